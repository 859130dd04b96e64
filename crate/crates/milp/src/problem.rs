//! Solver-independent description of a mixed-integer linear program.

use std::collections::HashMap;
use std::fmt;

use crate::error::MilpError;

/// Direction of a linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarType {
    Continuous,
    /// Integer restricted to `{0, 1}`.
    Binary,
    Integer,
}

impl VarType {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarType::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub var_type: VarType,
}

/// A sparse constraint row `lo <= coeffs . x <= hi`, stored in the familiar
/// sense/rhs/range form.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// MPS-style range. `None` for an ordinary one-sided or equality row.
    pub range: Option<f64>,
}

impl Row {
    /// Activity interval `[lo, hi]` implied by sense, rhs and range.
    pub fn bounds(&self) -> (f64, f64) {
        let rhs = self.rhs;
        match (self.sense, self.range) {
            (Sense::Le, None) => (f64::NEG_INFINITY, rhs),
            (Sense::Ge, None) => (rhs, f64::INFINITY),
            (Sense::Eq, None) => (rhs, rhs),
            (Sense::Le, Some(r)) => (rhs - r.abs(), rhs),
            (Sense::Ge, Some(r)) => (rhs, rhs + r.abs()),
            (Sense::Eq, Some(r)) if r >= 0.0 => (rhs, rhs + r),
            (Sense::Eq, Some(r)) => (rhs + r, rhs),
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// A named linear cost `constant + coeffs . x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Objective {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }
}

/// Columns, rows and any number of named objectives over the same feasible set.
/// All objectives are minimized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub objectives: Vec<Objective>,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_column(&mut self, name: impl Into<String>, lower: f64, upper: f64, var_type: VarType) -> usize {
        let (lower, upper) = match var_type {
            VarType::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.columns.push(Column { name: name.into(), lower, upper, var_type });
        self.columns.len() - 1
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.add_column(name, lower, upper, VarType::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_column(name, 0.0, 1.0, VarType::Binary)
    }

    /// Appends a row; zero coefficients are dropped and duplicate column
    /// entries merged.
    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        let coeffs = merge_coeffs(coeffs);
        self.rows.push(Row { name: name.into(), coeffs, sense, rhs, range: None });
        self.rows.len() - 1
    }

    pub fn add_objective(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, constant: f64) {
        let name = name.into();
        let coeffs = merge_coeffs(coeffs);
        if let Some(o) = self.objectives.iter_mut().find(|o| o.name == name) {
            o.coeffs = coeffs;
            o.constant = constant;
        } else {
            self.objectives.push(Objective { name, coeffs, constant });
        }
    }

    pub fn objective(&self, name: &str) -> Result<&Objective, MilpError> {
        self.objectives
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| MilpError::UnknownObjective(name.to_string()))
    }

    pub fn num_integer(&self) -> usize {
        self.columns.iter().filter(|c| c.var_type.is_integral()).count()
    }

    pub fn column_index(&self) -> HashMap<&str, usize> {
        self.columns.iter().enumerate().map(|(j, c)| (c.name.as_str(), j)).collect()
    }

    /// Fixes a column to a single value.
    pub fn fix(&mut self, col: usize, value: f64) {
        self.columns[col].lower = value;
        self.columns[col].upper = value;
    }

    /// Structural sanity: row references, bound ordering and binary bounds.
    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.columns.len();
        for c in &self.columns {
            if c.lower.is_nan() || c.upper.is_nan() || c.lower > c.upper {
                return Err(MilpError::InvalidBounds { name: c.name.clone(), lower: c.lower, upper: c.upper });
            }
            if c.var_type == VarType::Binary && (c.lower < 0.0 || c.upper > 1.0) {
                return Err(MilpError::InvalidBounds { name: c.name.clone(), lower: c.lower, upper: c.upper });
            }
        }
        for r in &self.rows {
            if let Some(&(j, _)) = r.coeffs.iter().find(|&&(j, a)| j >= n || !a.is_finite()) {
                return Err(MilpError::BadRow { row: r.name.clone(), column: j });
            }
            if !r.rhs.is_finite() {
                return Err(MilpError::BadRow { row: r.name.clone(), column: usize::MAX });
            }
        }
        for o in &self.objectives {
            if let Some(&(j, _)) = o.coeffs.iter().find(|&&(j, c)| j >= n || !c.is_finite()) {
                return Err(MilpError::BadRow { row: o.name.clone(), column: j });
            }
        }
        Ok(())
    }

    /// Largest violation of any row or column bound at `x`. Integrality is not
    /// considered; see [`MilpProblem::max_integrality_violation`].
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &v) in self.columns.iter().zip(x) {
            worst = worst.max(c.lower - v).max(v - c.upper);
        }
        for r in &self.rows {
            let (lo, hi) = r.bounds();
            let a = r.activity(x);
            worst = worst.max(lo - a).max(a - hi);
        }
        worst
    }

    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(x)
            .filter(|(c, _)| c.var_type.is_integral())
            .map(|(_, &v)| (v - v.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Plain-text listing of every row, one per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for o in &self.objectives {
            out.push_str(&format!("min {}: {} terms, constant {}\n", o.name, o.coeffs.len(), o.constant));
        }
        for r in &self.rows {
            let terms: Vec<String> = r
                .coeffs
                .iter()
                .map(|&(j, a)| format!("{:+} {}", a, self.columns[j].name))
                .collect();
            out.push_str(&format!("{}: {} {} {}\n", r.name, terms.join(" "), r.sense, r.rhs));
        }
        for c in &self.columns {
            out.push_str(&format!("{} in [{}, {}] {:?}\n", c.name, c.lower, c.upper, c.var_type));
        }
        out
    }
}

fn merge_coeffs(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

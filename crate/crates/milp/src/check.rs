//! Independent verification of a reported solution.

use crate::problem::MilpProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub max_bound_violation: f64,
    pub max_row_violation: f64,
    pub worst_row: Option<String>,
    pub max_integrality_violation: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_bound_violation <= tol && self.max_row_violation <= tol && self.max_integrality_violation <= tol
    }
}

/// Re-evaluates every row and bound from scratch at `x`.
pub fn check_solution(problem: &MilpProblem, x: &[f64]) -> FeasibilityReport {
    let mut max_bound_violation: f64 = 0.0;
    for (c, &v) in problem.columns.iter().zip(x) {
        max_bound_violation = max_bound_violation.max(c.lower - v).max(v - c.upper);
    }
    let mut max_row_violation: f64 = 0.0;
    let mut worst_row = None;
    for r in &problem.rows {
        let (lo, hi) = r.bounds();
        let a = r.activity(x);
        let v = (lo - a).max(a - hi);
        // Scale by row magnitude so large-coefficient rows are not penalized.
        let scale = r.coeffs.iter().map(|&(j, c)| (c * x[j]).abs()).fold(1.0, f64::max);
        let v = v / scale;
        if v > max_row_violation {
            max_row_violation = v;
            worst_row = Some(r.name.clone());
        }
    }
    FeasibilityReport {
        max_bound_violation,
        max_row_violation,
        worst_row,
        max_integrality_violation: problem.max_integrality_violation(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Sense;

    #[test]
    fn reports_worst_row() {
        let mut p = MilpProblem::new();
        let x = p.add_binary("x");
        let y = p.add_continuous("y", 0.0, 10.0);
        p.add_row("cap", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        p.add_row("floor", vec![(y, 1.0)], Sense::Ge, 0.0);
        let rep = check_solution(&p, &[0.5, 1.0]);
        assert!(!rep.is_feasible(1e-6));
        assert_eq!(rep.worst_row.as_deref(), Some("cap"));
        assert!((rep.max_integrality_violation - 0.5).abs() < 1e-12);
        assert!(check_solution(&p, &[1.0, 0.0]).is_feasible(1e-9));
    }
}

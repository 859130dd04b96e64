//! Bounded-variable revised primal simplex.
//!
//! Every row `lo <= a.x <= hi` becomes `a.x - r = 0` with a logical variable
//! `r` bounded by `[lo, hi]`, so the all-logical basis is always available as a
//! starting point. Phase 1 minimizes the sum of bound violations of basic
//! variables; whenever the current basic solution is feasible the true costs
//! are priced instead, so a warm start that loses feasibility after a bound
//! change simply falls back into phase 1.

use crate::error::MilpError;
use crate::lu::LuFactors;
use crate::problem::{MilpProblem, Objective};

const REFACTOR_EVERY: usize = 80;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_LIMIT: usize = 60;
const DUAL_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// A simplex basis over structural and logical variables, reusable as a warm
/// start for a problem with the same matrix and different bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub(crate) heads: Vec<usize>,
    pub(crate) status: Vec<VarStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The dual simplex proved the optimum exceeds `LpTolerances::cutoff`.
    Cutoff,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Structural values.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Basis,
}

/// Constraint matrix in column form with one extra `-e_i` column per row.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub(crate) n: usize,
    pub(crate) m: usize,
    start: Vec<usize>,
    entries: Vec<(usize, f64)>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    cost: Vec<f64>,
    cost_constant: f64,
    weight: Vec<f64>,
    row_start: Vec<usize>,
    row_entries: Vec<(usize, f64)>,
}

impl StandardLp {
    pub fn new(problem: &MilpProblem, objective: &Objective) -> Self {
        let n = problem.columns.len();
        let m = problem.rows.len();
        let mut counts = vec![0usize; n + m];
        for r in &problem.rows {
            for &(j, _) in &r.coeffs {
                counts[j] += 1;
            }
        }
        for c in counts.iter_mut().skip(n) {
            *c = 1;
        }
        let mut start = Vec::with_capacity(n + m + 1);
        start.push(0);
        for c in &counts {
            start.push(start.last().unwrap() + c);
        }
        let mut fill = start.clone();
        let mut entries = vec![(0usize, 0.0f64); *start.last().unwrap()];
        for (i, r) in problem.rows.iter().enumerate() {
            for &(j, a) in &r.coeffs {
                entries[fill[j]] = (i, a);
                fill[j] += 1;
            }
            entries[fill[n + i]] = (i, -1.0);
            fill[n + i] += 1;
        }
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for c in &problem.columns {
            lower.push(c.lower);
            upper.push(c.upper);
        }
        for r in &problem.rows {
            let (lo, hi) = r.bounds();
            lower.push(lo);
            upper.push(hi);
        }
        let mut cost = vec![0.0; n + m];
        for &(j, c) in &objective.coeffs {
            cost[j] += c;
        }
        let weight = (0..n + m)
            .map(|j| {
                let s: f64 = entries[start[j]..start[j + 1]].iter().map(|&(_, a)| a * a).sum();
                (1.0 + s).sqrt()
            })
            .collect();
        let mut row_start = vec![0usize; m + 1];
        for &(i, _) in &entries {
            row_start[i + 1] += 1;
        }
        for i in 0..m {
            row_start[i + 1] += row_start[i];
        }
        let mut row_fill = row_start.clone();
        let mut row_entries = vec![(0usize, 0.0f64); entries.len()];
        for j in 0..n + m {
            for &(i, a) in &entries[start[j]..start[j + 1]] {
                row_entries[row_fill[i]] = (j, a);
                row_fill[i] += 1;
            }
        }
        StandardLp {
            n,
            m,
            start,
            entries,
            lower,
            upper,
            cost,
            cost_constant: objective.constant,
            weight,
            row_start,
            row_entries,
        }
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.row_entries[self.row_start[i]..self.row_start[i + 1]]
    }

    #[inline]
    fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.entries[self.start[j]..self.start[j + 1]]
    }

    /// Bounds over structurals followed by logicals.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }

    pub fn slack_basis(&self) -> Basis {
        let mut status = Vec::with_capacity(self.n + self.m);
        for j in 0..self.n {
            status.push(default_status(self.lower[j], self.upper[j]));
        }
        status.extend(std::iter::repeat(VarStatus::Basic).take(self.m));
        Basis { heads: (self.n..self.n + self.m).collect(), status }
    }
}

fn default_status(l: f64, u: f64) -> VarStatus {
    if l.is_finite() {
        VarStatus::AtLower
    } else if u.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::Free
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpTolerances {
    pub primal: f64,
    pub dual: f64,
    pub max_iterations: usize,
    /// Warm-started solves stop with [`LpStatus::Cutoff`] once the dual
    /// bound exceeds this value.
    pub cutoff: f64,
}

impl Default for LpTolerances {
    fn default() -> Self {
        LpTolerances { primal: 1e-7, dual: 1e-8, max_iterations: 0, cutoff: f64::INFINITY }
    }
}

struct Simplex<'a> {
    lp: &'a StandardLp,
    lower: &'a [f64],
    upper: &'a [f64],
    heads: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    lu: LuFactors,
    tol: LpTolerances,
    iterations: usize,
    work_row: Vec<f64>,
    /// Reduced costs, maintained only by the dual simplex.
    d: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum DualEnd {
    Optimal,
    Infeasible,
    Cutoff,
    /// Numerical trouble or no dual feasible start; the primal simplex takes over.
    GiveUp,
}

enum BlockKind {
    Lower,
    Upper,
}

/// Solves the LP over bounds `lower`/`upper` (structurals then logicals),
/// starting from `warm` when given.
pub fn solve(
    lp: &StandardLp,
    lower: &[f64],
    upper: &[f64],
    warm: Option<&Basis>,
    tol: LpTolerances,
) -> Result<LpOutcome, MilpError> {
    let nt = lp.n + lp.m;
    assert_eq!(lower.len(), nt);
    assert_eq!(upper.len(), nt);
    if let Some(j) = (0..nt).find(|&j| lower[j] > upper[j] + tol.primal) {
        if j < lp.n {
            // Crossed bounds on a structural are plain infeasibility (e.g. a
            // branching decision); report it without iterating.
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                x: vec![0.0; lp.n],
                objective: f64::INFINITY,
                iterations: 0,
                basis: warm.cloned().unwrap_or_else(|| lp.slack_basis()),
            });
        }
    }
    let basis = match warm {
        Some(b) if b.heads.len() == lp.m && b.status.len() == nt => b.clone(),
        _ => lp.slack_basis(),
    };
    let mut status = basis.status;
    for j in 0..nt {
        if status[j] != VarStatus::Basic {
            status[j] = match status[j] {
                VarStatus::AtLower if lower[j].is_finite() => VarStatus::AtLower,
                VarStatus::AtUpper if upper[j].is_finite() => VarStatus::AtUpper,
                VarStatus::Free if !lower[j].is_finite() && !upper[j].is_finite() => VarStatus::Free,
                _ => default_status(lower[j], upper[j]),
            };
        }
    }
    let mut x = vec![0.0; nt];
    for j in 0..nt {
        x[j] = match status[j] {
            VarStatus::AtLower => lower[j],
            VarStatus::AtUpper => upper[j],
            _ => 0.0,
        };
    }
    let max_iterations = if tol.max_iterations > 0 { tol.max_iterations } else { 50 * (nt + lp.m) + 10_000 };
    let tol = LpTolerances { max_iterations, ..tol };
    let lu = LuFactors::factorize(0, &[]).expect("empty factorization");
    let mut s = Simplex {
        lp,
        lower,
        upper,
        heads: basis.heads,
        status,
        x,
        lu,
        tol,
        iterations: 0,
        work_row: vec![0.0; lp.m],
        d: vec![0.0; nt],
    };
    s.refactor();
    s.compute_basic_values();
    let dual_end = if warm.is_some() { s.run_dual()? } else { DualEnd::GiveUp };
    let dual_iterations = s.iterations;
    let st = match dual_end {
        DualEnd::Infeasible => LpStatus::Infeasible,
        DualEnd::Cutoff => LpStatus::Cutoff,
        DualEnd::Optimal => s.run(true)?,
        DualEnd::GiveUp => s.run(false)?,
    };
    log::trace!("lp: dual {:?} after {dual_iterations} iterations, {} primal iterations, {st:?}", dual_end, s.iterations - dual_iterations);
    let objective = match st {
        LpStatus::Optimal | LpStatus::Cutoff => s.objective_value(),
        LpStatus::Infeasible => f64::INFINITY,
        LpStatus::Unbounded => f64::NEG_INFINITY,
    };
    Ok(LpOutcome {
        status: st,
        x: s.x[..lp.n].to_vec(),
        objective,
        iterations: s.iterations,
        basis: Basis { heads: s.heads, status: s.status },
    })
}

impl<'a> Simplex<'a> {
    fn nonbasic_status_for(&self, j: usize) -> VarStatus {
        let (l, u) = (self.lower[j], self.upper[j]);
        let v = self.x[j];
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (v - l).abs() <= (u - v).abs() {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                }
            }
            (true, false) => VarStatus::AtLower,
            (false, true) => VarStatus::AtUpper,
            (false, false) => VarStatus::Free,
        }
    }

    fn refactor(&mut self) {
        let n = self.lp.n;
        loop {
            let cols: Vec<&[(usize, f64)]> = self.heads.iter().map(|&j| self.lp.column(j)).collect();
            match LuFactors::factorize(self.lp.m, &cols) {
                Ok(lu) => {
                    log::trace!("refactor: {} nonzeros in factors", lu.fill());
                    self.lu = lu;
                    return;
                }
                Err(sing) => {
                    log::debug!("singular basis: replacing {} columns with logicals", sing.slots.len());
                    for (&slot, &row) in sing.slots.iter().zip(&sing.rows) {
                        let old = self.heads[slot];
                        let st = self.nonbasic_status_for(old);
                        self.status[old] = st;
                        self.x[old] = match st {
                            VarStatus::AtLower => self.lower[old],
                            VarStatus::AtUpper => self.upper[old],
                            _ => 0.0,
                        };
                        self.heads[slot] = n + row;
                        self.status[n + row] = VarStatus::Basic;
                    }
                }
            }
        }
    }

    fn compute_basic_values(&mut self) {
        let rhs = &mut self.work_row;
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.lp.n + self.lp.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                for &(i, a) in self.lp.column(j) {
                    rhs[i] -= a * v;
                }
            }
        }
        self.lu.ftran(rhs);
        for (k, &j) in self.heads.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - self.tol.primal {
            self.lower[j] - v
        } else if v > self.upper[j] + self.tol.primal {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn objective_value(&self) -> f64 {
        self.lp.cost_constant + (0..self.lp.n).map(|j| self.lp.cost[j] * self.x[j]).sum::<f64>()
    }

    /// Recomputes `d` from scratch for the current basis.
    fn compute_duals(&mut self) {
        let lp = self.lp;
        let y = &mut self.work_row;
        for (k, &j) in self.heads.iter().enumerate() {
            y[k] = lp.cost[j];
        }
        self.lu.btran(y);
        for j in 0..lp.n + lp.m {
            self.d[j] = if self.status[j] == VarStatus::Basic {
                0.0
            } else {
                lp.cost[j] - lp.column(j).iter().map(|&(i, a)| a * y[i]).sum::<f64>()
            };
        }
    }

    /// Moves boxed nonbasic variables to the bound their reduced cost asks
    /// for. Returns false if some variable cannot be made dual feasible.
    fn make_dual_feasible(&mut self) -> bool {
        let dtol = self.tol.dual;
        let mut moved = false;
        for j in 0..self.lp.n + self.lp.m {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == u {
                continue;
            }
            let d = self.d[j];
            let wrong_sign = match self.status[j] {
                VarStatus::AtLower => d < -dtol,
                VarStatus::AtUpper => d > dtol,
                VarStatus::Free => d.abs() > dtol,
                VarStatus::Basic => false,
            };
            if !wrong_sign {
                continue;
            }
            match self.status[j] {
                VarStatus::AtLower if u.is_finite() => {
                    self.status[j] = VarStatus::AtUpper;
                    self.x[j] = u;
                    moved = true;
                }
                VarStatus::AtUpper if l.is_finite() => {
                    self.status[j] = VarStatus::AtLower;
                    self.x[j] = l;
                    moved = true;
                }
                // Small drift on a variable that cannot flip is absorbed here
                // and repaired by the primal pass that follows the dual.
                _ if d.abs() <= DUAL_DRIFT => self.d[j] = 0.0,
                _ => return false,
            }
        }
        if moved {
            self.compute_basic_values();
        }
        true
    }

    /// Bounded dual simplex with bound-flipping ratio test, used to
    /// reoptimize after bound changes from a basis that was optimal before.
    fn run_dual(&mut self) -> Result<DualEnd, MilpError> {
        let lp = self.lp;
        let nt = lp.n + lp.m;
        let ftol = self.tol.primal;
        let mut rho = vec![0.0; lp.m];
        let mut tau = vec![0.0; lp.m];
        // Dual steepest-edge weights `||e_k^T B^-1||^2`, starting from 1.
        let mut weights = vec![1.0; lp.m];
        let mut alpha = vec![0.0; lp.m];
        let mut flip_col = vec![0.0; lp.m];
        let mut row = vec![0.0; nt];
        let mut in_row = vec![false; nt];
        let mut touched: Vec<usize> = Vec::new();
        let mut cands: Vec<(usize, f64, f64)> = Vec::new();
        let mut mismatches = 0usize;
        let mut verified = false;

        self.compute_duals();
        if !self.make_dual_feasible() {
            return Ok(DualEnd::GiveUp);
        }
        loop {
            if self.iterations >= self.tol.max_iterations {
                return Ok(DualEnd::GiveUp);
            }
            if self.lu.num_updates() >= REFACTOR_EVERY {
                self.refactor();
                self.compute_basic_values();
                self.compute_duals();
                if !self.make_dual_feasible() {
                    return Ok(DualEnd::GiveUp);
                }
            }
            if self.tol.cutoff.is_finite() && self.objective_value() > self.tol.cutoff {
                return Ok(DualEnd::Cutoff);
            }

            // Leaving row: largest weighted bound violation.
            let mut leave: Option<(usize, bool, f64)> = None;
            for (k, &j) in self.heads.iter().enumerate() {
                let v = self.x[j];
                let (viol, up) = if v < self.lower[j] - ftol {
                    (self.lower[j] - v, false)
                } else if v > self.upper[j] + ftol {
                    (v - self.upper[j], true)
                } else {
                    continue;
                };
                let score = viol * viol / weights[k];
                if leave.map_or(true, |(_, _, b)| score > b) {
                    leave = Some((k, up, score));
                }
            }
            let Some((r, to_upper, _)) = leave else {
                return Ok(DualEnd::Optimal);
            };
            let out = self.heads[r];

            rho.iter_mut().for_each(|v| *v = 0.0);
            rho[r] = 1.0;
            self.lu.btran(&mut rho);
            let w_r = rho.iter().map(|v| v * v).sum::<f64>();
            weights[r] = w_r;
            for &j in &touched {
                row[j] = 0.0;
                in_row[j] = false;
            }
            touched.clear();
            for (i, &ri) in rho.iter().enumerate() {
                if ri.abs() <= 1e-14 {
                    continue;
                }
                for &(j, a) in lp.row(i) {
                    if self.status[j] == VarStatus::Basic {
                        continue;
                    }
                    if !in_row[j] {
                        in_row[j] = true;
                        touched.push(j);
                    }
                    row[j] += a * ri;
                }
            }

            let sign = if to_upper { 1.0 } else { -1.0 };
            cands.clear();
            for &j in &touched {
                let a = row[j];
                if a.abs() < PIVOT_TOL || self.lower[j] == self.upper[j] {
                    continue;
                }
                let g = sign * a;
                let d = self.d[j];
                let ratio = match self.status[j] {
                    VarStatus::AtLower if g > 0.0 => d.max(0.0) / g,
                    VarStatus::AtUpper if g < 0.0 => d.min(0.0) / g,
                    VarStatus::Free => 0.0,
                    _ => continue,
                };
                cands.push((j, ratio, g));
            }
            if cands.is_empty() {
                if !verified && self.lu.num_updates() > 0 {
                    verified = true;
                    self.refactor();
                    self.compute_basic_values();
                    self.compute_duals();
                    if !self.make_dual_feasible() {
                        return Ok(DualEnd::GiveUp);
                    }
                    continue;
                }
                return Ok(DualEnd::Infeasible);
            }
            cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

            // Pass breakpoints while the dual objective keeps improving.
            let bound_out = if to_upper { self.upper[out] } else { self.lower[out] };
            let mut slope = (self.x[out] - bound_out).abs();
            let mut stop = 0;
            while stop + 1 < cands.len() {
                let (j, _, g) = cands[stop];
                let range = self.upper[j] - self.lower[j];
                if !range.is_finite() || slope - g.abs() * range <= 0.0 {
                    break;
                }
                slope -= g.abs() * range;
                stop += 1;
            }
            // Among near-ties at the stopping point prefer the largest pivot.
            let t_stop = cands[stop].1;
            let mut pick = stop;
            for (k, c) in cands.iter().enumerate().skip(stop + 1) {
                if c.1 > t_stop + 1e-9 {
                    break;
                }
                if c.2.abs() > cands[pick].2.abs() {
                    pick = k;
                }
            }
            let (q, t, _) = cands[pick];

            alpha.iter_mut().for_each(|v| *v = 0.0);
            for &(i, a) in lp.column(q) {
                alpha[i] = a;
            }
            self.lu.ftran(&mut alpha);
            let ar = alpha[r];
            if (ar - row[q]).abs() > 1e-6 * (1.0 + ar.abs()) || ar.abs() < PIVOT_TOL {
                mismatches += 1;
                if mismatches > 3 {
                    return Ok(DualEnd::GiveUp);
                }
                self.refactor();
                self.compute_basic_values();
                self.compute_duals();
                if !self.make_dual_feasible() {
                    return Ok(DualEnd::GiveUp);
                }
                continue;
            }

            tau.copy_from_slice(&rho);
            self.lu.ftran(&mut tau);
            for k in 0..lp.m {
                let ratio = alpha[k] / ar;
                if k != r && ratio != 0.0 {
                    weights[k] = (weights[k] - 2.0 * ratio * tau[k] + ratio * ratio * w_r).max(1e-8);
                }
            }
            weights[r] = (w_r / (ar * ar)).max(1e-8);

            // Dual step.
            for &j in &touched {
                self.d[j] -= t * sign * row[j];
            }
            self.d[out] = -t * sign;
            self.d[q] = 0.0;

            // Bound flips for the breakpoints passed.
            let mut any_flip = false;
            flip_col.iter_mut().for_each(|v| *v = 0.0);
            for &(j, _, _) in cands[..stop].iter() {
                if j == q {
                    continue;
                }
                let delta = match self.status[j] {
                    VarStatus::AtLower => {
                        self.status[j] = VarStatus::AtUpper;
                        self.upper[j] - self.lower[j]
                    }
                    VarStatus::AtUpper => {
                        self.status[j] = VarStatus::AtLower;
                        self.lower[j] - self.upper[j]
                    }
                    _ => continue,
                };
                self.x[j] += delta;
                any_flip = true;
                for &(i, a) in lp.column(j) {
                    flip_col[i] -= a * delta;
                }
            }
            if any_flip {
                self.lu.ftran(&mut flip_col);
                for (k, &j) in self.heads.iter().enumerate() {
                    self.x[j] += flip_col[k];
                }
            }

            // Primal step: the leaving variable lands on its violated bound.
            let step = (self.x[out] - bound_out) / ar;
            for (k, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.heads[k]] -= a * step;
                }
            }
            self.x[q] += step;
            self.x[out] = bound_out;
            self.status[out] = if to_upper && self.lower[out] != self.upper[out] {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            self.heads[r] = q;
            self.status[q] = VarStatus::Basic;
            self.iterations += 1;
            verified = false;
            self.lu.update(r, &alpha);
            if ar.abs() < 1e-7 {
                self.refactor();
                self.compute_basic_values();
                self.compute_duals();
                if !self.make_dual_feasible() {
                    return Ok(DualEnd::GiveUp);
                }
            }
        }
    }

    /// Primal simplex. With `trusted` the factorization is not refreshed
    /// before declaring optimality on entry.
    fn run(&mut self, trusted: bool) -> Result<LpStatus, MilpError> {
        let lp = self.lp;
        let nt = lp.n + lp.m;
        let ftol = self.tol.primal;
        let dtol = self.tol.dual;
        let mut bland = false;
        let mut stalled = 0usize;
        let mut last_measure = f64::INFINITY;
        let mut last_phase1 = true;
        let mut verified = trusted;
        let mut y = vec![0.0; lp.m];
        let mut alpha = vec![0.0; lp.m];

        loop {
            if self.iterations >= self.tol.max_iterations {
                return Err(MilpError::Numeric(format!("iteration limit {} reached", self.tol.max_iterations)));
            }
            if self.lu.num_updates() >= REFACTOR_EVERY {
                self.refactor();
                self.compute_basic_values();
            }

            // Phase selection and basic cost vector.
            let mut infeas_sum = 0.0;
            for &j in &self.heads {
                infeas_sum += self.infeasibility(j);
            }
            let phase1 = infeas_sum > 0.0;
            for (k, &j) in self.heads.iter().enumerate() {
                y[k] = if phase1 {
                    let v = self.x[j];
                    if v < self.lower[j] - ftol {
                        -1.0
                    } else if v > self.upper[j] + ftol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    lp.cost[j]
                };
            }
            self.lu.btran(&mut y);

            let measure = if phase1 {
                infeas_sum
            } else {
                (0..nt).map(|j| lp.cost[j] * self.x[j]).sum::<f64>()
            };
            if phase1 != last_phase1 || measure < last_measure - 1e-12 * (1.0 + measure.abs()) {
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled > DEGENERATE_LIMIT {
                    bland = true;
                }
            }
            last_measure = measure;
            last_phase1 = phase1;

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..nt {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut d = if phase1 { 0.0 } else { lp.cost[j] };
                for &(i, a) in lp.column(j) {
                    d -= a * y[i];
                }
                let dir = match st {
                    VarStatus::AtLower if d < -dtol => 1.0,
                    VarStatus::AtUpper if d > dtol => -1.0,
                    VarStatus::Free if d.abs() > dtol => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir, d));
                    break;
                }
                let score = d.abs() / lp.weight[j];
                if entering.map_or(true, |(_, _, s)| score > s) {
                    entering = Some((j, dir, score));
                }
            }

            let Some((q, dir, _)) = entering else {
                if !verified && self.lu.num_updates() > 0 {
                    verified = true;
                    self.refactor();
                    self.compute_basic_values();
                    continue;
                }
                return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal });
            };
            verified = false;

            alpha.iter_mut().for_each(|v| *v = 0.0);
            for &(i, a) in lp.column(q) {
                alpha[i] = a;
            }
            self.lu.ftran(&mut alpha);

            // Ratio test (Harris two-pass; textbook under Bland's rule).
            let mut theta_max = f64::INFINITY;
            for k in 0..lp.m {
                let a = alpha[k];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let g = -dir * a;
                let j = self.heads[k];
                if let Some((relaxed, _, _)) = self.block_ratio(j, g, phase1, !bland) {
                    theta_max = theta_max.min(relaxed);
                }
            }
            let mut leave: Option<(usize, f64, BlockKind)> = None;
            let mut best_pivot = 0.0;
            if theta_max.is_finite() {
                for k in 0..lp.m {
                    let a = alpha[k];
                    if a.abs() < PIVOT_TOL {
                        continue;
                    }
                    let g = -dir * a;
                    let j = self.heads[k];
                    if let Some((_, exact, kind)) = self.block_ratio(j, g, phase1, !bland) {
                        if exact <= theta_max {
                            let better = if bland {
                                match &leave {
                                    None => true,
                                    Some((kk, t, _)) => {
                                        exact < *t - 1e-12 || (exact <= *t + 1e-12 && j < self.heads[*kk])
                                    }
                                }
                            } else {
                                a.abs() > best_pivot
                            };
                            if better {
                                best_pivot = a.abs();
                                leave = Some((k, exact.max(0.0), kind));
                            }
                        }
                    }
                }
            }

            let range = self.upper[q] - self.lower[q];
            let flip = range.is_finite() && leave.as_ref().map_or(true, |(_, t, _)| range <= *t);
            if leave.is_none() && !flip {
                if phase1 {
                    return Err(MilpError::Numeric("unbounded ray during phase 1".into()));
                }
                return Ok(LpStatus::Unbounded);
            }
            let theta = if flip { range } else { leave.as_ref().unwrap().1 };

            self.x[q] += dir * theta;
            if theta != 0.0 {
                for k in 0..lp.m {
                    let a = alpha[k];
                    if a != 0.0 {
                        self.x[self.heads[k]] -= dir * a * theta;
                    }
                }
            }
            self.iterations += 1;
            if flip {
                if dir > 0.0 {
                    self.status[q] = VarStatus::AtUpper;
                    self.x[q] = self.upper[q];
                } else {
                    self.status[q] = VarStatus::AtLower;
                    self.x[q] = self.lower[q];
                }
                continue;
            }
            let (r, _, kind) = leave.unwrap();
            let out = self.heads[r];
            match kind {
                BlockKind::Lower => {
                    self.x[out] = self.lower[out];
                    self.status[out] = VarStatus::AtLower;
                }
                BlockKind::Upper => {
                    self.x[out] = self.upper[out];
                    self.status[out] = if self.lower[out] == self.upper[out] {
                        VarStatus::AtLower
                    } else {
                        VarStatus::AtUpper
                    };
                }
            }
            self.heads[r] = q;
            self.status[q] = VarStatus::Basic;
            let pivot = alpha[r];
            self.lu.update(r, &alpha);
            if pivot.abs() < 1e-7 {
                self.refactor();
                self.compute_basic_values();
            }
        }
    }

    /// Step length at which basic variable `j`, moving at rate `g` per unit
    /// step, hits a blocking bound. Returns `(relaxed, exact, bound)`.
    fn block_ratio(&self, j: usize, g: f64, phase1: bool, harris: bool) -> Option<(f64, f64, BlockKind)> {
        let ftol = self.tol.primal;
        let v = self.x[j];
        let (l, u) = (self.lower[j], self.upper[j]);
        let slack = if harris { ftol } else { 0.0 };
        if phase1 && v < l - ftol {
            // Below its lower bound: blocks once it becomes feasible.
            return (g > 0.0).then(|| {
                let r = (l - v) / g;
                (r + slack / g, r, BlockKind::Lower)
            });
        }
        if phase1 && v > u + ftol {
            return (g < 0.0).then(|| {
                let r = (v - u) / -g;
                (r + slack / -g, r, BlockKind::Upper)
            });
        }
        if g < 0.0 && l.is_finite() {
            Some(((v - l + slack) / -g, (v - l) / -g, BlockKind::Lower))
        } else if g > 0.0 && u.is_finite() {
            Some(((u - v + slack) / g, (u - v) / g, BlockKind::Upper))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Sense;

    fn run(p: &MilpProblem, obj: &str) -> LpOutcome {
        let lp = StandardLp::new(p, p.objective(obj).unwrap());
        let (l, u) = lp.bounds();
        solve(&lp, &l, &u, None, LpTolerances::default()).unwrap()
    }

    #[test]
    fn single_lower_bound_row() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        p.add_row("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        p.add_objective("obj", vec![(x, 1.0)], 0.0);
        let out = run(&p, "obj");
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] - 3.0).abs() < 1e-9);
        assert!((out.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn facet_optimum() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, f64::INFINITY);
        let y = p.add_continuous("y", 0.0, f64::INFINITY);
        p.add_row("c", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        p.add_objective("obj", vec![(x, -1.0), (y, -1.0)], 0.0);
        let out = run(&p, "obj");
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective + 1.0).abs() < 1e-9);
        assert!((out.x[0] + out.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, f64::INFINITY);
        p.add_row("a", vec![(x, 1.0)], Sense::Le, 1.0);
        p.add_row("b", vec![(x, 1.0)], Sense::Ge, 2.0);
        p.add_objective("obj", vec![(x, 1.0)], 0.0);
        assert_eq!(run(&p, "obj").status, LpStatus::Infeasible);

        let mut q = MilpProblem::new();
        let x = q.add_continuous("x", 0.0, f64::INFINITY);
        let y = q.add_continuous("y", 0.0, f64::INFINITY);
        q.add_row("a", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        q.add_objective("obj", vec![(y, -1.0)], 0.0);
        assert_eq!(run(&q, "obj").status, LpStatus::Unbounded);
    }

    #[test]
    fn warm_start_after_bound_change() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, 10.0);
        let y = p.add_continuous("y", 0.0, 10.0);
        p.add_row("c1", vec![(x, 1.0), (y, 2.0)], Sense::Le, 14.0);
        p.add_row("c2", vec![(x, 3.0), (y, -1.0)], Sense::Ge, 0.0);
        p.add_objective("obj", vec![(x, -1.0), (y, -1.0)], 0.0);
        let lp = StandardLp::new(&p, p.objective("obj").unwrap());
        let (mut l, mut u) = lp.bounds();
        let first = solve(&lp, &l, &u, None, LpTolerances::default()).unwrap();
        assert!((first.objective + 12.0).abs() < 1e-9);
        u[y] = 1.0;
        l[x] = 0.0;
        let second = solve(&lp, &l, &u, Some(&first.basis), LpTolerances::default()).unwrap();
        assert_eq!(second.status, LpStatus::Optimal);
        assert!((second.objective + 11.0).abs() < 1e-9);
    }
}

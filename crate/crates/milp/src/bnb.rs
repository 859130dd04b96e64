//! Best-first branch-and-bound over integer columns.
//!
//! Node selection is best bound first; ties go to the deeper node and then to
//! the older one, so runs are reproducible. After branching the solver keeps
//! plunging into the preferred child while its bound stays level with the best
//! open bound (or while no incumbent exists), which finds feasible points
//! quickly on models whose integer variables rarely move the objective.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use crate::error::MilpError;
use crate::problem::MilpProblem;
use crate::simplex::{self, Basis, LpStatus, LpTolerances, StandardLp};
use crate::{Branching, SolveResult, SolveStats, SolveStatus, SolverOptions};

/// Without an incumbent, every this many nodes the dive is retried from the
/// current node.
const DIVE_EVERY: usize = 50;

/// Largest row or bound violation accepted in a start point.
const START_TOL: f64 = 1e-6;

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Rc<Basis>>,
    /// Branching decision that created this node: (column, up, distance moved).
    origin: Option<(usize, bool, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: "greater" means "explored first".
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Default, Clone, Copy)]
struct PseudoCost {
    down_sum: f64,
    down_n: u32,
    up_sum: f64,
    up_n: u32,
}

struct Search<'a> {
    problem: &'a MilpProblem,
    lp: StandardLp,
    options: &'a SolverOptions,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer_cols: Vec<usize>,
    group: Vec<usize>,
    pseudo: Vec<PseudoCost>,
    incumbent: Option<(f64, Vec<f64>)>,
    incumbents: Vec<f64>,
    stats: SolveStats,
    seq: u64,
    /// Smallest bound among nodes discarded only because of the gap tolerance.
    pruned_bound: f64,
}

pub(crate) fn branch_and_bound(
    problem: &MilpProblem,
    objective: &str,
    options: &SolverOptions,
) -> Result<SolveResult, MilpError> {
    problem.validate()?;
    let obj = problem.objective(objective)?;
    let lp = StandardLp::new(problem, obj);
    let (lower, upper) = lp.bounds();
    let integer_cols: Vec<usize> = problem
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.var_type.is_integral())
        .map(|(j, _)| j)
        .collect();
    let prefixes = &options.priority_prefixes;
    let group = problem
        .columns
        .iter()
        .map(|c| prefixes.iter().position(|p| c.name.starts_with(p.as_str())).unwrap_or(prefixes.len()))
        .collect();
    let mut search = Search {
        problem,
        lp,
        options,
        lower,
        upper,
        integer_cols,
        group,
        pseudo: vec![PseudoCost::default(); problem.columns.len()],
        incumbent: None,
        incumbents: Vec::new(),
        stats: SolveStats::default(),
        seq: 0,
        pruned_bound: f64::INFINITY,
    };
    if let Some(x) = &options.start {
        if x.len() == problem.columns.len()
            && problem.max_violation(x) <= START_TOL
            && problem.max_integrality_violation(x) <= options.int_tol
        {
            search.record_incumbent(obj.evaluate(x), x.clone());
        } else {
            log::debug!("start point rejected");
        }
    }
    search.run()
}

impl<'a> Search<'a> {
    fn tolerances(&self) -> LpTolerances {
        LpTolerances { primal: self.options.feas_tol, ..LpTolerances::default() }
    }

    fn gap_tol(&self, inc: f64) -> f64 {
        self.options.rel_gap * inc.abs().max(1.0)
    }

    fn node_bounds(&self, changes: &[(usize, f64, f64)]) -> (Vec<f64>, Vec<f64>) {
        let mut l = self.lower.clone();
        let mut u = self.upper.clone();
        for &(j, lo, hi) in changes {
            l[j] = l[j].max(lo);
            u[j] = u[j].min(hi);
        }
        (l, u)
    }

    fn fractional(&self, x: &[f64]) -> Vec<usize> {
        let tol = self.options.int_tol;
        self.integer_cols.iter().copied().filter(|&j| (x[j] - x[j].round()).abs() > tol).collect()
    }

    fn select_branch(&self, x: &[f64], frac: &[usize]) -> usize {
        let best_group = frac.iter().map(|&j| self.group[j]).min().unwrap();
        let cands = frac.iter().copied().filter(|&j| self.group[j] == best_group);
        match self.options.branching {
            Branching::MostFractional => {
                let mut best = (usize::MAX, -1.0);
                for j in cands {
                    let f = x[j] - x[j].floor();
                    let score = f.min(1.0 - f);
                    if score > best.1 + 1e-12 {
                        best = (j, score);
                    }
                }
                best.0
            }
            Branching::PseudoCost => {
                let (mut avg_d, mut nd, mut avg_u, mut nu) = (0.0, 0u32, 0.0, 0u32);
                for p in &self.pseudo {
                    if p.down_n > 0 {
                        avg_d += p.down_sum / p.down_n as f64;
                        nd += 1;
                    }
                    if p.up_n > 0 {
                        avg_u += p.up_sum / p.up_n as f64;
                        nu += 1;
                    }
                }
                let avg_d = if nd > 0 { avg_d / nd as f64 } else { 1.0 };
                let avg_u = if nu > 0 { avg_u / nu as f64 } else { 1.0 };
                let mut best = (usize::MAX, -1.0);
                for j in cands {
                    let f = x[j] - x[j].floor();
                    let p = self.pseudo[j];
                    let d = if p.down_n > 0 { p.down_sum / p.down_n as f64 } else { avg_d };
                    let u = if p.up_n > 0 { p.up_sum / p.up_n as f64 } else { avg_u };
                    let score = (d * f).max(1e-6) * (u * (1.0 - f)).max(1e-6);
                    if score > best.1 * (1.0 + 1e-12) {
                        best = (j, score);
                    }
                }
                best.0
            }
        }
    }

    /// Keeps `x` if it beats the incumbent by more than the gap tolerance;
    /// smaller gains would be pruned anyway.
    fn record_incumbent(&mut self, obj: f64, x: Vec<f64>) {
        if self.incumbent.as_ref().map_or(true, |(v, _)| obj < *v - self.gap_tol(*v)) {
            log::debug!("incumbent {obj} after {} nodes", self.stats.nodes);
            self.incumbents.push(obj);
            self.incumbent = Some((obj, x));
        }
    }

    /// Fixes every integer column at its rounded LP value and re-solves.
    fn rounding_heuristic(&mut self, x: &[f64], basis: &Basis) -> Result<(), MilpError> {
        let (mut l, mut u) = (self.lower.clone(), self.upper.clone());
        for &j in &self.integer_cols {
            let v = x[j].round().clamp(l[j], u[j]);
            l[j] = v;
            u[j] = v;
        }
        let out = simplex::solve(&self.lp, &l, &u, Some(basis), self.tolerances())?;
        self.stats.simplex_iterations += out.iterations;
        if out.status == LpStatus::Optimal {
            self.record_incumbent(out.objective, out.x);
        }
        Ok(())
    }

    /// Fix-and-dive: repeatedly fixes every integer column that is already
    /// integral together with the least fractional one, re-solving the LP
    /// after each round. A failed rounding is retried in the other direction
    /// once before the dive is abandoned.
    fn diving_heuristic(&mut self, x: &[f64], z: f64, basis: &Basis) -> Result<(), MilpError> {
        let (mut l, mut u) = (self.lower.clone(), self.upper.clone());
        let mut x = x.to_vec();
        let mut basis = basis.clone();
        let mut obj = z;
        for _ in 0..self.integer_cols.len() + 1 {
            let frac = self.fractional(&x);
            let Some(&j) = frac.iter().min_by(|&&a, &&b| {
                let fa = (x[a] - x[a].round()).abs();
                let fb = (x[b] - x[b].round()).abs();
                fa.total_cmp(&fb).then(a.cmp(&b))
            }) else {
                self.record_incumbent(obj, x);
                return Ok(());
            };
            for &k in &self.integer_cols {
                if k != j && l[k] != u[k] && !frac.contains(&k) {
                    let v = x[k].round().clamp(l[k], u[k]);
                    l[k] = v;
                    u[k] = v;
                }
            }
            let first = x[j].round();
            let second = if first > x[j] { x[j].floor() } else { x[j].ceil() };
            let mut solved = None;
            for v in [first, second] {
                let (lo, hi) = (l[j], u[j]);
                l[j] = v;
                u[j] = v;
                let mut tol = self.tolerances();
                if let Some((inc, _)) = &self.incumbent {
                    tol.cutoff = inc - self.gap_tol(*inc);
                }
                let out = simplex::solve(&self.lp, &l, &u, Some(&basis), tol)?;
                self.stats.simplex_iterations += out.iterations;
                if out.status == LpStatus::Optimal {
                    solved = Some(out);
                    break;
                }
                l[j] = lo;
                u[j] = hi;
            }
            let Some(out) = solved else {
                log::debug!("dive abandoned with {} fractional columns", frac.len());
                return Ok(());
            };
            obj = out.objective;
            x = out.x;
            basis = out.basis;
        }
        Ok(())
    }

    fn run(&mut self) -> Result<SolveResult, MilpError> {
        let started = Instant::now();
        let mut heap: BinaryHeap<Node> = BinaryHeap::new();
        let mut next = Some(Node { bound: f64::NEG_INFINITY, depth: 0, seq: 0, changes: Vec::new(), basis: None, origin: None });
        let mut limit_status = None;

        loop {
            let node = match next.take() {
                Some(n) => n,
                None => match heap.pop() {
                    Some(n) => n,
                    None => break,
                },
            };
            if let Some((inc, _)) = &self.incumbent {
                if node.bound >= inc - self.gap_tol(*inc) {
                    self.pruned_bound = self.pruned_bound.min(node.bound);
                    continue;
                }
                if let Some(gl) = self.options.gap_limit {
                    let lb = heap.peek().map_or(node.bound, |h| h.bound.min(node.bound));
                    if (inc - lb) / inc.abs().max(1.0) <= gl {
                        heap.push(node);
                        limit_status = Some(SolveStatus::GapLimit);
                        break;
                    }
                }
            }
            if self.stats.nodes >= self.options.node_limit {
                heap.push(node);
                limit_status = Some(SolveStatus::NodeLimit);
                break;
            }
            if let Some(tl) = self.options.time_limit {
                if started.elapsed().as_secs_f64() >= tl {
                    heap.push(node);
                    limit_status = Some(SolveStatus::TimeLimit);
                    break;
                }
            }

            self.stats.nodes += 1;
            if self.stats.nodes % 500 == 0 {
                let open = heap.peek().map_or(node.bound, |h| h.bound.min(node.bound));
                log::debug!(
                    "{} nodes, {} open, bound {open}, incumbent {:?}, {} iterations",
                    self.stats.nodes,
                    heap.len(),
                    self.incumbent.as_ref().map(|i| i.0),
                    self.stats.simplex_iterations
                );
            }
            let (l, u) = self.node_bounds(&node.changes);
            let mut tol = self.tolerances();
            if let Some((inc, _)) = &self.incumbent {
                tol.cutoff = inc - self.gap_tol(*inc);
            }
            let out = simplex::solve(&self.lp, &l, &u, node.basis.as_deref(), tol)?;
            self.stats.simplex_iterations += out.iterations;
            match out.status {
                LpStatus::Infeasible => continue,
                LpStatus::Cutoff => {
                    self.pruned_bound = self.pruned_bound.min(out.objective);
                    continue;
                }
                LpStatus::Unbounded => {
                    return Ok(SolveResult {
                        status: SolveStatus::Unbounded,
                        objective: f64::NEG_INFINITY,
                        values: out.x,
                        bound: f64::NEG_INFINITY,
                        gap: f64::INFINITY,
                        stats: self.stats,
                        incumbents: self.incumbents.clone(),
                    });
                }
                LpStatus::Optimal => {}
            }
            let z = out.objective;
            if let Some((col, up, dist)) = node.origin {
                if node.bound.is_finite() && dist > 0.0 {
                    let gain = (z - node.bound).max(0.0) / dist;
                    let p = &mut self.pseudo[col];
                    if up {
                        p.up_sum += gain;
                        p.up_n += 1;
                    } else {
                        p.down_sum += gain;
                        p.down_n += 1;
                    }
                }
            }
            if let Some((inc, _)) = &self.incumbent {
                if z >= inc - self.gap_tol(*inc) {
                    self.pruned_bound = self.pruned_bound.min(z);
                    continue;
                }
            }
            let frac = self.fractional(&out.x);
            if frac.is_empty() {
                self.record_incumbent(z, out.x);
                continue;
            }
            if node.depth == 0 && self.options.heuristics {
                self.rounding_heuristic(&out.x, &out.basis)?;
                if self.incumbent.is_none() {
                    self.diving_heuristic(&out.x, z, &out.basis)?;
                }
                if let Some((inc, _)) = &self.incumbent {
                    if z >= inc - self.gap_tol(*inc) {
                        self.pruned_bound = self.pruned_bound.min(z);
                        continue;
                    }
                }
            }

            if node.depth > 0 && self.options.heuristics && self.incumbent.is_none() && self.stats.nodes % DIVE_EVERY == 0 {
                self.diving_heuristic(&out.x, z, &out.basis)?;
            }

            let j = self.select_branch(&out.x, &frac);
            let v = out.x[j];
            let (fl, ce) = (v.floor(), v.ceil());
            let basis = Rc::new(out.basis);
            let make = |lo: f64, hi: f64, up: bool, seq: &mut u64| {
                *seq += 1;
                let mut changes = node.changes.clone();
                changes.push((j, lo, hi));
                Node {
                    bound: z,
                    depth: node.depth + 1,
                    seq: *seq,
                    changes,
                    basis: Some(basis.clone()),
                    origin: Some((j, up, if up { ce - v } else { v - fl })),
                }
            };
            let down = make(f64::NEG_INFINITY, fl, false, &mut self.seq);
            let upn = make(ce, f64::INFINITY, true, &mut self.seq);
            let (first, second) = if v - fl >= 0.5 { (upn, down) } else { (down, upn) };
            let best_open = heap.peek().map_or(f64::INFINITY, |h| h.bound);
            let level = z <= best_open + 1e-9 * z.abs().max(1.0);
            if self.incumbent.is_none() || level {
                next = Some(first);
            } else {
                heap.push(first);
            }
            heap.push(second);
        }

        let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        let result = match self.incumbent.take() {
            Some((obj, x)) => {
                let bound = open_bound.min(self.pruned_bound).min(obj);
                let gap = (obj - bound) / obj.abs().max(1.0);
                let status = match limit_status {
                    Some(s) => s,
                    None => SolveStatus::Optimal,
                };
                SolveResult {
                    status,
                    objective: obj,
                    values: x,
                    bound,
                    gap,
                    stats: self.stats,
                    incumbents: self.incumbents.clone(),
                }
            }
            None => SolveResult {
                status: limit_status.unwrap_or(SolveStatus::Infeasible),
                objective: f64::INFINITY,
                values: vec![f64::NAN; self.problem.columns.len()],
                bound: open_bound,
                gap: f64::INFINITY,
                stats: self.stats,
                incumbents: Vec::new(),
            },
        };
        Ok(result)
    }
}

//! A small, dependency-free MILP solver.
//!
//! Problems are built with [`MilpProblem`], which carries any number of named
//! objectives over one feasible set. [`solve_milp`] runs branch-and-bound on
//! top of a bounded-variable revised simplex with a sparse LU factorization;
//! [`solve_lp`] solves the continuous relaxation. Models can be written to and
//! read from fixed-format MPS for cross-checking with external solvers.

mod bnb;
pub mod check;
mod error;
mod lu;
pub mod mps;
mod problem;
pub mod simplex;

use std::io::Write;

pub use error::MilpError;
pub use problem::{Column, MilpProblem, Objective, Row, Sense, VarType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Nodes whose bound is within this relative distance of the incumbent are
    /// pruned.
    pub rel_gap: f64,
    pub int_tol: f64,
    pub feas_tol: f64,
    pub node_limit: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Stop early once the proven gap falls below this value.
    pub gap_limit: Option<f64>,
    pub branching: Branching,
    /// Integer columns whose names start with an earlier prefix are branched
    /// on first.
    pub priority_prefixes: Vec<String>,
    /// Run the round-and-fix heuristic at the root.
    pub heuristics: bool,
    /// Known solution used as the first incumbent when it satisfies every
    /// row, bound and integrality requirement.
    pub start: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rel_gap: 1e-6,
            int_tol: 1e-6,
            feas_tol: 1e-7,
            node_limit: 200_000,
            time_limit: None,
            gap_limit: None,
            branching: Branching::MostFractional,
            priority_prefixes: Vec::new(),
            heuristics: true,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped at the node limit; an incumbent may or may not exist.
    NodeLimit,
    TimeLimit,
    GapLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::GapLimit => "gap_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: usize,
    pub simplex_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    /// Column values; NaN when no feasible point was found.
    pub values: Vec<f64>,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    /// Relative gap `(objective - bound) / max(1, |objective|)`.
    pub gap: f64,
    pub stats: SolveStats,
    /// Objective of every improving incumbent, in discovery order.
    pub incumbents: Vec<f64>,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        self.objective.is_finite()
    }

    /// Writes `name,value` lines for every column.
    pub fn write_csv<W: Write>(&self, problem: &MilpProblem, mut out: W) -> std::io::Result<()> {
        writeln!(out, "name,value")?;
        for (c, v) in problem.columns.iter().zip(&self.values) {
            writeln!(out, "{},{}", c.name, v)?;
        }
        Ok(())
    }
}

/// Minimizes `objective` subject to integrality.
pub fn solve_milp(problem: &MilpProblem, objective: &str, options: &SolverOptions) -> Result<SolveResult, MilpError> {
    let started = std::time::Instant::now();
    let res = bnb::branch_and_bound(problem, objective, options)?;
    log::debug!(
        "{objective}: {} obj={} gap={:.2e} nodes={} iters={} in {:.2}s",
        res.status.as_str(),
        res.objective,
        res.gap,
        res.stats.nodes,
        res.stats.simplex_iterations,
        started.elapsed().as_secs_f64()
    );
    Ok(res)
}

/// Minimizes `objective` over the continuous relaxation.
pub fn solve_lp(problem: &MilpProblem, objective: &str, options: &SolverOptions) -> Result<SolveResult, MilpError> {
    problem.validate()?;
    let obj = problem.objective(objective)?;
    let lp = simplex::StandardLp::new(problem, obj);
    let (l, u) = lp.bounds();
    let tol = simplex::LpTolerances { primal: options.feas_tol, ..Default::default() };
    let out = simplex::solve(&lp, &l, &u, None, tol)?;
    let status = match out.status {
        simplex::LpStatus::Optimal => SolveStatus::Optimal,
        simplex::LpStatus::Infeasible | simplex::LpStatus::Cutoff => SolveStatus::Infeasible,
        simplex::LpStatus::Unbounded => SolveStatus::Unbounded,
    };
    let (values, objective) = match status {
        SolveStatus::Optimal => (out.x, out.objective),
        _ => (vec![f64::NAN; problem.columns.len()], out.objective),
    };
    Ok(SolveResult {
        status,
        objective,
        values,
        bound: objective,
        gap: 0.0,
        stats: SolveStats { nodes: 1, simplex_iterations: out.iterations },
        incumbents: Vec::new(),
    })
}

//! Assembly of the stochastic planning MILP and its three objectives.

use ces_milp::{MilpProblem, Sense, VarType};

use crate::config::CaseConfig;
use crate::error::{invalid, Result};
use crate::feeder::{add_distflow, DistflowColumns, FeederGraph, NodalInjection, RadialOrder};
use crate::scenario::ScenarioSet;
use crate::tariffs::TariffSchedule;

pub const F_INV: &str = "f_inv";
pub const F_OPC: &str = "f_opC";
pub const F_OPP: &str = "f_opP";

/// Columns of the storage at one candidate node; per-interval entries are
/// indexed `[s][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageColumns {
    pub node: usize,
    pub a: usize,
    pub e_cap: usize,
    pub p_rated: usize,
    /// Energy level before the first interval, shared by all scenarios.
    pub soc0: usize,
    pub b: Vec<Vec<usize>>,
    pub m_aux: Vec<Vec<usize>>,
    pub n_aux: Vec<Vec<usize>>,
    pub e_ch: Vec<Vec<usize>>,
    pub e_dis: Vec<Vec<usize>>,
    pub soc: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableCatalog {
    /// One entry per candidate node, in ascending node order.
    pub storage: Vec<StorageColumns>,
    /// `[u][s][t]`.
    pub e_grid: Vec<Vec<Vec<usize>>>,
    pub e_ces: Vec<Vec<Vec<usize>>>,
    /// `[s][t]`.
    pub flows: Vec<Vec<DistflowColumns>>,
}

impl VariableCatalog {
    pub fn storage_at(&self, node: usize) -> Option<&StorageColumns> {
        self.storage.iter().find(|s| s.node == node)
    }
}

/// A built planning problem together with the index of its columns.
#[derive(Debug, Clone)]
pub struct PlanningModel {
    pub problem: MilpProblem,
    pub catalog: VariableCatalog,
    pub order: RadialOrder,
    /// Prosumer indices at each node.
    pub hosts: Vec<Vec<usize>>,
    pub rho: f64,
    pub annualization: f64,
}

/// Values of the three objectives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub f_inv: f64,
    pub f_opc: f64,
    pub f_opp: f64,
}

impl Objectives {
    pub fn as_array(&self) -> [f64; 3] {
        [self.f_inv, self.f_opc, self.f_opp]
    }
}

fn candidates(graph: &FeederGraph, cfg: &CaseConfig) -> Result<Vec<usize>> {
    let mut nodes: Vec<usize> = match &cfg.candidate_nodes {
        Some(c) => c.clone(),
        None => graph.non_slack_nodes().collect(),
    };
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.is_empty() {
        return Err(invalid("the candidate node set is empty"));
    }
    if let Some(&bad) = nodes.iter().find(|&&a| a == 0 || a >= graph.n_nodes) {
        return Err(invalid(format!("candidate node {bad} is the slack node or not in the feeder")));
    }
    Ok(nodes)
}

/// Builds every constraint of the planning problem and the objectives
/// `f_inv`, `f_opC` and `f_opP`.
pub fn build(scenarios: &ScenarioSet, graph: &FeederGraph, ids: &[String], tariff: &TariffSchedule, cfg: &CaseConfig) -> Result<PlanningModel> {
    let order = graph.validate_radial()?;
    let hosts = graph.bind_prosumers(ids)?;
    let nodes = candidates(graph, cfg)?;
    let ns = scenarios.n_scenarios();
    let nt = scenarios.horizon();
    let nu = ids.len();
    if scenarios.num_prosumers() != nu {
        return Err(invalid(format!("scenarios cover {} prosumers, traces {nu}", scenarios.num_prosumers())));
    }
    if tariff.lambda_g.len() != nt {
        return Err(invalid(format!("tariff has {} hours, scenarios {nt}", tariff.lambda_g.len())));
    }
    if nt % 24 != 0 {
        return Err(invalid(format!("horizon of {nt} hours is not a multiple of 24")));
    }
    let dt = cfg.delta_t_hours;
    let pbar = cfg.p_max_kw * dt;
    let soc_cap = cfg.sigma_hi * cfg.e_max_kwh;
    let mut pb = MilpProblem::new();

    // Placement and sizing.
    let mut storage = Vec::with_capacity(nodes.len());
    for &a in &nodes {
        let col_a = pb.add_binary(format!("A[{a}]"));
        let e_cap = pb.add_continuous(format!("Ecap[{a}]"), 0.0, cfg.e_max_kwh);
        let p_rated = pb.add_continuous(format!("pR[{a}]"), 0.0, cfg.p_max_kw);
        let soc0 = pb.add_continuous(format!("soc0[{a}]"), 0.0, soc_cap);
        pb.add_row(format!("capMin[{a}]"), vec![(e_cap, 1.0), (col_a, -cfg.e_min_kwh)], Sense::Ge, 0.0);
        pb.add_row(format!("capMax[{a}]"), vec![(e_cap, 1.0), (col_a, -cfg.e_max_kwh)], Sense::Le, 0.0);
        pb.add_row(format!("powMax[{a}]"), vec![(p_rated, 1.0), (col_a, -cfg.p_max_kw)], Sense::Le, 0.0);
        pb.add_row(format!("soc0Lo[{a}]"), vec![(soc0, 1.0), (e_cap, -cfg.sigma_lo)], Sense::Ge, 0.0);
        pb.add_row(format!("soc0Hi[{a}]"), vec![(soc0, 1.0), (e_cap, -cfg.sigma_hi)], Sense::Le, 0.0);
        storage.push(StorageColumns {
            node: a,
            a: col_a,
            e_cap,
            p_rated,
            soc0,
            b: vec![Vec::with_capacity(nt); ns],
            m_aux: vec![Vec::with_capacity(nt); ns],
            n_aux: vec![Vec::with_capacity(nt); ns],
            e_ch: vec![Vec::with_capacity(nt); ns],
            e_dis: vec![Vec::with_capacity(nt); ns],
            soc: vec![Vec::with_capacity(nt); ns],
        });
    }
    let place: Vec<(usize, f64)> = storage.iter().map(|st| (st.a, 1.0)).collect();
    pb.add_row("place", place, Sense::Eq, 1.0);

    // Storage operation.
    for st in storage.iter_mut() {
        let a = st.node;
        for s in 0..ns {
            for t in 0..nt {
                let tag = format!("{a},{s},{t}");
                let b = pb.add_binary(format!("B[{tag}]"));
                let m = pb.add_continuous(format!("m[{tag}]"), 0.0, pbar);
                let n = pb.add_continuous(format!("n[{tag}]"), 0.0, pbar);
                let ch = pb.add_continuous(format!("ch[{tag}]"), 0.0, pbar);
                let dis = pb.add_continuous(format!("dis[{tag}]"), 0.0, pbar);
                let soc = pb.add_continuous(format!("soc[{tag}]"), 0.0, soc_cap);
                pb.add_row(format!("chLim[{tag}]"), vec![(ch, 1.0), (m, -1.0)], Sense::Le, 0.0);
                pb.add_row(format!("mOn[{tag}]"), vec![(m, 1.0), (b, -pbar)], Sense::Le, 0.0);
                pb.add_row(format!("mRated[{tag}]"), vec![(m, 1.0), (st.p_rated, -dt)], Sense::Le, 0.0);
                pb.add_row(format!("mFloor[{tag}]"), vec![(m, 1.0), (st.p_rated, -dt), (b, -pbar)], Sense::Ge, -pbar);
                pb.add_row(format!("disLim[{tag}]"), vec![(dis, 1.0), (n, -1.0)], Sense::Le, 0.0);
                pb.add_row(format!("nOn[{tag}]"), vec![(n, 1.0), (b, pbar)], Sense::Le, pbar);
                pb.add_row(format!("nRated[{tag}]"), vec![(n, 1.0), (st.p_rated, -dt)], Sense::Le, 0.0);
                pb.add_row(format!("nFloor[{tag}]"), vec![(n, 1.0), (st.p_rated, -dt), (b, pbar)], Sense::Ge, 0.0);
                let prev = if t == 0 { st.soc0 } else { st.soc[s][t - 1] };
                pb.add_row(
                    format!("socBal[{tag}]"),
                    vec![(soc, 1.0), (prev, -1.0), (ch, -cfg.mu_ch), (dis, 1.0 / cfg.mu_dis)],
                    Sense::Eq,
                    0.0,
                );
                pb.add_row(format!("socLo[{tag}]"), vec![(soc, 1.0), (st.e_cap, -cfg.sigma_lo)], Sense::Ge, 0.0);
                pb.add_row(format!("socHi[{tag}]"), vec![(soc, 1.0), (st.e_cap, -cfg.sigma_hi)], Sense::Le, 0.0);
                st.b[s].push(b);
                st.m_aux[s].push(m);
                st.n_aux[s].push(n);
                st.e_ch[s].push(ch);
                st.e_dis[s].push(dis);
                st.soc[s].push(soc);
            }
            for day in 0..nt / 24 {
                let end = st.soc[s][24 * day + 23];
                let tag = format!("{a},{s},{day}");
                pb.add_row(format!("cycleHi[{tag}]"), vec![(end, 1.0), (st.soc0, -1.0)], Sense::Le, cfg.theta_kwh);
                pb.add_row(format!("cycleLo[{tag}]"), vec![(end, 1.0), (st.soc0, -1.0)], Sense::Ge, -cfg.theta_kwh);
            }
        }
    }

    // Prosumer trades: the sign of the net demand picks the import or export form.
    let mut e_grid = vec![vec![Vec::with_capacity(nt); ns]; nu];
    let mut e_ces = vec![vec![Vec::with_capacity(nt); ns]; nu];
    for u in 0..nu {
        for s in 0..ns {
            for t in 0..nt {
                let net = scenarios.net(s, u, t);
                let (lo, hi) = if net >= 0.0 { (0.0, net) } else { (net, 0.0) };
                let tag = format!("{u},{s},{t}");
                let g = pb.add_continuous(format!("eG[{tag}]"), lo, hi);
                let c = pb.add_continuous(format!("eC[{tag}]"), lo, hi);
                pb.add_row(format!("trade[{tag}]"), vec![(g, 1.0), (c, 1.0)], Sense::Eq, net);
                e_grid[u][s].push(g);
                e_ces[u][s].push(c);
            }
        }
    }

    // Network.
    let u_bounds = (cfg.v_min * cfg.v_min, cfg.v_max * cfg.v_max);
    let u0 = cfg.v0 * cfg.v0;
    let scale = 1.0 / (dt * graph.s_base_kva);
    let mut flows = Vec::with_capacity(ns);
    for s in 0..ns {
        let mut row = Vec::with_capacity(nt);
        for t in 0..nt {
            let mut inj = NodalInjection {
                p_const: vec![0.0; graph.n_nodes],
                q_const: vec![0.0; graph.n_nodes],
                p_terms: vec![Vec::new(); graph.n_nodes],
            };
            for (a, us) in hosts.iter().enumerate() {
                inj.p_const[a] = us.iter().map(|&u| scenarios.net(s, u, t)).sum::<f64>() * scale;
                inj.q_const[a] = us.iter().map(|&u| scenarios.e_reactive[s][u][t]).sum::<f64>() * scale;
            }
            for st in &storage {
                inj.p_terms[st.node] = vec![(st.e_ch[s][t], scale), (st.e_dis[s][t], -scale)];
            }
            row.push(add_distflow(&mut pb, &order, &inj, u0, u_bounds, &format!("{s},{t}")));
        }
        flows.push(row);
    }

    let rho = cfg.annuity_factor();
    let annualization = cfg.annualization(nt);
    let catalog = VariableCatalog { storage, e_grid, e_ces, flows };
    add_objectives(&mut pb, &catalog, scenarios, tariff, rho, annualization, cfg);
    Ok(PlanningModel { problem: pb, catalog, order, hosts, rho, annualization })
}

fn add_objectives(
    pb: &mut MilpProblem,
    cat: &VariableCatalog,
    scenarios: &ScenarioSet,
    tariff: &TariffSchedule,
    rho: f64,
    ann: f64,
    cfg: &CaseConfig,
) {
    let inv: Vec<(usize, f64)> = cat
        .storage
        .iter()
        .flat_map(|st| [(st.p_rated, rho * cfg.cost_per_kw), (st.e_cap, rho * cfg.cost_per_kwh)])
        .collect();
    pb.add_objective(F_INV, inv, 0.0);

    let mut opc = Vec::new();
    let mut opp = Vec::new();
    for s in 0..scenarios.n_scenarios() {
        for t in 0..scenarios.horizon() {
            let w = scenarios.omega[s][t] * ann;
            let (lg, lc) = (tariff.lambda_g[t], tariff.lambda_c[t]);
            for u in 0..cat.e_ces.len() {
                // Energy sold to prosumers is bought from the grid by the provider.
                opc.push((cat.e_ces[u][s][t], w * (lg - lc)));
                opp.push((cat.e_grid[u][s][t], w * lg));
                opp.push((cat.e_ces[u][s][t], w * lc));
            }
            for st in &cat.storage {
                opc.push((st.e_ch[s][t], w * lg));
                opc.push((st.e_dis[s][t], -w * lg));
            }
        }
    }
    pb.add_objective(F_OPC, opc, 0.0);
    pb.add_objective(F_OPP, opp, 0.0);
}

impl PlanningModel {
    pub fn objectives(&self, x: &[f64]) -> Objectives {
        let ev = |name: &str| self.problem.objective(name).map(|o| o.evaluate(x)).unwrap_or(f64::NAN);
        Objectives { f_inv: ev(F_INV), f_opc: ev(F_OPC), f_opp: ev(F_OPP) }
    }

    /// Fixes placement, capacity and rated power to the given values.
    pub fn fix_plan(&mut self, node: usize, capacity_kwh: f64, rated_kw: f64) -> Result<()> {
        if self.catalog.storage_at(node).is_none() {
            return Err(invalid(format!("node {node} is not a candidate")));
        }
        for st in &self.catalog.storage {
            let chosen = st.node == node;
            self.problem.fix(st.a, if chosen { 1.0 } else { 0.0 });
            self.problem.fix(st.e_cap, if chosen { capacity_kwh } else { 0.0 });
            self.problem.fix(st.p_rated, if chosen { rated_kw } else { 0.0 });
        }
        Ok(())
    }

    /// Node whose placement binary is set in `x`.
    pub fn chosen_node(&self, x: &[f64]) -> Option<&StorageColumns> {
        self.catalog.storage.iter().find(|st| x[st.a] > 0.5)
    }
}

/// Right-hand side of an ε row: `f*(1+ε)`, or `f*(1−ε)` for a negative optimum
/// so the relaxation still moves away from the optimum.
pub fn epsilon_bound(f_star: f64, eps: f64) -> f64 {
    if f_star >= 0.0 {
        f_star * (1.0 + eps)
    } else {
        f_star * (1.0 - eps)
    }
}

/// Appends `objective <= epsilon_bound(f_star, eps)` and returns the row index.
pub fn add_epsilon_row(problem: &mut MilpProblem, objective: &str, f_star: f64, eps: f64) -> Result<usize> {
    add_objective_cap(problem, objective, epsilon_bound(f_star, eps))
}

/// Appends `objective <= rhs`.
pub fn add_objective_cap(problem: &mut MilpProblem, objective: &str, rhs: f64) -> Result<usize> {
    let obj = problem.objective(objective)?;
    let coeffs = obj.coeffs.clone();
    let rhs = rhs - obj.constant;
    Ok(problem.add_row(format!("eps[{objective}]"), coeffs, Sense::Le, rhs))
}

/// Counts binaries of the problem that the solver would branch on.
pub fn count_binaries(problem: &MilpProblem) -> usize {
    problem.columns.iter().filter(|c| c.var_type == VarType::Binary && c.lower < c.upper).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_bounds() {
        assert_eq!(epsilon_bound(100.0, 0.2), 120.0);
        assert_eq!(epsilon_bound(100.0, 0.0), 100.0);
        assert!((epsilon_bound(-38024.0, 0.2) + 30419.2).abs() < 1e-9);
    }
}

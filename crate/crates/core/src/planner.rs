//! Three-stage ε-constraint planning, trading-scheme comparison,
//! out-of-sample evaluation and Pareto sweeps.

use std::time::Instant;

use ces_milp::{solve_milp, MilpProblem, SolveResult, SolveStatus, SolverOptions};
use rayon::prelude::*;

use crate::config::CaseConfig;
use crate::error::{CesError, Result};
use crate::feeder::{evaluate_flows, FeederGraph};
use crate::model::{add_epsilon_row, add_objective_cap, build, count_binaries, epsilon_bound, Objectives, PlanningModel, F_INV, F_OPC, F_OPP};
use crate::scenario::{generate_initial, reduce_kmeans, sample_scenarios, ScenarioSet, STREAM_OOS};
use crate::tariffs::{derive_ces_price, Ets, TariffSchedule};
use crate::traces::ProsumerTraceSet;

/// Solver outcome of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: usize,
    pub objective_name: &'static str,
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchRow {
    pub node: usize,
    pub s: usize,
    pub t: usize,
    pub e_ch: f64,
    pub e_dis: f64,
    pub soc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRow {
    pub u: usize,
    pub s: usize,
    pub t: usize,
    pub e_grid: f64,
    pub e_ces: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningSolution {
    pub ets: Ets,
    pub node: usize,
    pub capacity_kwh: f64,
    pub rated_kw: f64,
    /// All three objectives evaluated at the stage-3 point.
    pub objectives: Objectives,
    pub f_inv_star: f64,
    pub f_opc_star: f64,
    /// Right-hand sides of the `f_inv` and `f_opC` rows of the last stage.
    pub eps_rhs: [f64; 2],
    /// Energy level before the first interval at the chosen node.
    pub soc0: f64,
    pub stages: Vec<StageReport>,
    /// Every candidate node, scenario and interval.
    pub dispatch: Vec<DispatchRow>,
    pub trades: Vec<TradeRow>,
    /// Stage-3 column values.
    pub values: Vec<f64>,
}

fn stage_error(stage: usize, res: &SolveResult) -> Option<CesError> {
    let detail = match stage {
        1 => "network and storage constraints admit no plan",
        2 => "no plan satisfies the f_inv epsilon row",
        _ => "no plan satisfies the f_inv and f_opC epsilon rows",
    };
    match res.status {
        SolveStatus::Infeasible => Some(CesError::Infeasible { stage, detail: detail.into() }),
        SolveStatus::Unbounded => Some(CesError::Infeasible { stage, detail: "objective is unbounded".into() }),
        _ if !res.has_solution() => Some(CesError::Limit { stage }),
        _ => None,
    }
}

/// Solves one stage; a limit with an incumbent is accepted with a warning.
pub fn solve_stage(problem: &MilpProblem, objective: &'static str, stage: usize, opts: &SolverOptions) -> Result<(SolveResult, StageReport)> {
    let started = Instant::now();
    let res = solve_milp(problem, objective, opts)?;
    let report = StageReport {
        stage,
        objective_name: objective,
        status: res.status,
        objective: res.objective,
        bound: res.bound,
        gap: res.gap,
        nodes: res.stats.nodes,
        iterations: res.stats.simplex_iterations,
        seconds: started.elapsed().as_secs_f64(),
    };
    log::info!(
        "stage {stage} ({objective}): {} objective {:.6e} after {} nodes, {} iterations, {:.1} s",
        res.status.as_str(),
        res.objective,
        report.nodes,
        report.iterations,
        report.seconds
    );
    if let Some(err) = stage_error(stage, &res) {
        return Err(err);
    }
    if !matches!(res.status, SolveStatus::Optimal) {
        log::warn!("stage {stage} stopped with status {} and gap {:.3e}", res.status.as_str(), res.gap);
    }
    Ok((res, report))
}

/// Stage optima that later stages build on.
#[derive(Debug, Clone)]
struct Stage1 {
    f_inv_star: f64,
    report: StageReport,
}

fn run_stage1(model: &PlanningModel, opts: &SolverOptions) -> Result<Stage1> {
    let (res, report) = solve_stage(&model.problem, F_INV, 1, opts)?;
    Ok(Stage1 { f_inv_star: model.objectives(&res.values).f_inv, report })
}

fn run_stage2(model: &PlanningModel, s1: &Stage1, eps1: f64, opts: &SolverOptions) -> Result<(f64, StageReport)> {
    let mut pb = model.problem.clone();
    add_epsilon_row(&mut pb, F_INV, s1.f_inv_star, eps1)?;
    let (res, report) = solve_stage(&pb, F_OPC, 2, opts)?;
    Ok((model.objectives(&res.values).f_opc, report))
}

fn run_stage3(model: &PlanningModel, rhs: [f64; 2], opts: &SolverOptions) -> Result<(SolveResult, StageReport)> {
    let mut pb = model.problem.clone();
    add_objective_cap(&mut pb, F_INV, rhs[0])?;
    add_objective_cap(&mut pb, F_OPC, rhs[1])?;
    solve_stage(&pb, F_OPP, 3, opts)
}

fn warn_size(model: &PlanningModel, cfg: &CaseConfig) {
    let nb = count_binaries(&model.problem);
    if nb > cfg.binary_warn_threshold {
        log::warn!(
            "model has {nb} binaries (threshold {}); the built-in solver may be slow, consider export-mps",
            cfg.binary_warn_threshold
        );
    }
}

/// Problem of stage `stage` (1 to 3): the model with the ε rows of the
/// earlier stages appended.
pub fn stage_problem(model: &PlanningModel, stage: usize, rhs: [f64; 2]) -> Result<MilpProblem> {
    let mut pb = model.problem.clone();
    if stage >= 2 {
        add_objective_cap(&mut pb, F_INV, rhs[0])?;
    }
    if stage >= 3 {
        add_objective_cap(&mut pb, F_OPC, rhs[1])?;
    }
    Ok(pb)
}

/// Runs the three stages on a prepared scenario set.
pub fn plan_with_scenarios(
    scenarios: &ScenarioSet,
    graph: &FeederGraph,
    ids: &[String],
    tariff: &TariffSchedule,
    cfg: &CaseConfig,
) -> Result<PlanningSolution> {
    let model = build(scenarios, graph, ids, tariff, cfg)?;
    warn_size(&model, cfg);
    let opts = cfg.solver_options();
    let s1 = run_stage1(&model, &opts)?;
    let (f_opc_star, r2) = run_stage2(&model, &s1, cfg.eps1, &opts)?;
    let rhs = [epsilon_bound(s1.f_inv_star, cfg.eps1), epsilon_bound(f_opc_star, cfg.eps2)];
    let (res, r3) = run_stage3(&model, rhs, &opts)?;
    Ok(extract(&model, tariff.scheme, &res.values, s1.f_inv_star, f_opc_star, rhs, vec![s1.report, r2, r3]))
}

/// Generates and reduces scenarios, then plans.
pub fn plan(traces: &ProsumerTraceSet, graph: &FeederGraph, tariff: &TariffSchedule, cfg: &CaseConfig) -> Result<PlanningSolution> {
    let scenarios = prepare_scenarios(traces, cfg)?;
    plan_with_scenarios(&scenarios, graph, &traces.prosumer_ids, tariff, cfg)
}

pub fn prepare_scenarios(traces: &ProsumerTraceSet, cfg: &CaseConfig) -> Result<ScenarioSet> {
    let initial = generate_initial(traces, cfg)?;
    reduce_kmeans(&initial, cfg)
}

fn extract(
    model: &PlanningModel,
    ets: Ets,
    x: &[f64],
    f_inv_star: f64,
    f_opc_star: f64,
    eps_rhs: [f64; 2],
    stages: Vec<StageReport>,
) -> PlanningSolution {
    let cat = &model.catalog;
    let chosen = model.chosen_node(x).unwrap_or(&cat.storage[0]);
    let mut dispatch = Vec::new();
    for st in &cat.storage {
        for (s, row) in st.e_ch.iter().enumerate() {
            for t in 0..row.len() {
                dispatch.push(DispatchRow {
                    node: st.node,
                    s,
                    t,
                    e_ch: x[st.e_ch[s][t]],
                    e_dis: x[st.e_dis[s][t]],
                    soc: x[st.soc[s][t]],
                });
            }
        }
    }
    let mut trades = Vec::new();
    for (u, per_s) in cat.e_grid.iter().enumerate() {
        for (s, per_t) in per_s.iter().enumerate() {
            for t in 0..per_t.len() {
                trades.push(TradeRow { u, s, t, e_grid: x[cat.e_grid[u][s][t]], e_ces: x[cat.e_ces[u][s][t]] });
            }
        }
    }
    PlanningSolution {
        ets,
        node: chosen.node,
        capacity_kwh: x[chosen.e_cap],
        rated_kw: x[chosen.p_rated],
        objectives: model.objectives(x),
        f_inv_star,
        f_opc_star,
        eps_rhs,
        soc0: x[chosen.soc0],
        stages,
        dispatch,
        trades,
        values: x.to_vec(),
    }
}

/// Operating cost of prosumers trading only with the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoCesBaseline {
    pub f_opp: f64,
    /// Largest excursion of squared voltage outside its limits (per-unit²);
    /// zero when the feeder copes without storage.
    pub max_voltage_violation: f64,
}

pub fn no_ces_baseline(scenarios: &ScenarioSet, graph: &FeederGraph, ids: &[String], lambda_g: &[f64], cfg: &CaseConfig) -> Result<NoCesBaseline> {
    let order = graph.validate_radial()?;
    let hosts = graph.bind_prosumers(ids)?;
    let ann = cfg.annualization(scenarios.horizon());
    let mut cost = 0.0;
    let mut worst: f64 = 0.0;
    let u_lim = (cfg.v_min * cfg.v_min, cfg.v_max * cfg.v_max);
    for s in 0..scenarios.n_scenarios() {
        for t in 0..scenarios.horizon() {
            let net: f64 = (0..ids.len()).map(|u| scenarios.net(s, u, t)).sum();
            cost += scenarios.omega[s][t] * lambda_g[t] * net;
            let p: Vec<f64> =
                hosts.iter().map(|us| graph.to_pu(us.iter().map(|&u| scenarios.net(s, u, t)).sum(), cfg.delta_t_hours)).collect();
            let q: Vec<f64> = hosts
                .iter()
                .map(|us| graph.to_pu(us.iter().map(|&u| scenarios.e_reactive[s][u][t]).sum(), cfg.delta_t_hours))
                .collect();
            let flows = evaluate_flows(&order, &p, &q, cfg.v0 * cfg.v0);
            worst = worst.max(flows.voltage_violation(u_lim.0, u_lim.1));
        }
    }
    Ok(NoCesBaseline { f_opp: cost * ann, max_voltage_violation: worst })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquitabilityRow {
    pub ets: Ets,
    /// `-(f_inv + f_opC)`: the provider's annual net revenue.
    pub provider_benefit: f64,
    /// Reduction of the prosumers' operating cost against the baseline.
    pub prosumer_benefit: f64,
    pub provider_share: f64,
    pub prosumer_share: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsComparison {
    pub solutions: Vec<PlanningSolution>,
    pub baseline: NoCesBaseline,
    pub equitability: Vec<EquitabilityRow>,
    /// Index into `solutions` of the smallest spread.
    pub most_equitable: usize,
}

pub fn equitability(solutions: &[PlanningSolution], baseline: &NoCesBaseline) -> (Vec<EquitabilityRow>, usize) {
    let prov: Vec<f64> = solutions.iter().map(|s| -(s.objectives.f_inv + s.objectives.f_opc)).collect();
    let pros: Vec<f64> = solutions.iter().map(|s| baseline.f_opp - s.objectives.f_opp).collect();
    let norm = |v: &[f64]| {
        let m = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    let (np, nq) = (norm(&prov), norm(&pros));
    let rows: Vec<EquitabilityRow> = solutions
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (a, b) = (prov[i] / np, pros[i] / nq);
            EquitabilityRow {
                ets: s.ets,
                provider_benefit: prov[i],
                prosumer_benefit: pros[i],
                provider_share: a,
                prosumer_share: b,
                spread: (a - b).abs(),
            }
        })
        .collect();
    let best = (0..rows.len()).min_by(|&i, &j| rows[i].spread.total_cmp(&rows[j].spread)).unwrap_or(0);
    (rows, best)
}

/// The three schemes of a study: average price, above-grid and below-grid.
pub fn default_schemes(cfg: &CaseConfig) -> [Ets; 3] {
    [Ets::AvgPrice, Ets::Scaled(cfg.ets_high_delta), Ets::Scaled(cfg.ets_low_delta)]
}

/// Plans every scheme on one shared scenario set.
pub fn run_all_ets(traces: &ProsumerTraceSet, graph: &FeederGraph, lambda_g: &[f64], cfg: &CaseConfig) -> Result<EtsComparison> {
    let scenarios = prepare_scenarios(traces, cfg)?;
    run_all_ets_with_scenarios(&scenarios, graph, &traces.prosumer_ids, lambda_g, cfg)
}

pub fn run_all_ets_with_scenarios(
    scenarios: &ScenarioSet,
    graph: &FeederGraph,
    ids: &[String],
    lambda_g: &[f64],
    cfg: &CaseConfig,
) -> Result<EtsComparison> {
    let tariffs = default_schemes(cfg).iter().map(|&e| derive_ces_price(lambda_g, e)).collect::<Result<Vec<_>>>()?;
    let solutions = tariffs
        .par_iter()
        .map(|tariff| plan_with_scenarios(scenarios, graph, ids, tariff, cfg))
        .collect::<Result<Vec<_>>>()?;
    let baseline = no_ces_baseline(scenarios, graph, ids, lambda_g, cfg)?;
    let (equitability, most_equitable) = equitability(&solutions, &baseline);
    Ok(EtsComparison { solutions, baseline, equitability, most_equitable })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OosRow {
    pub d: usize,
    pub status: String,
    /// Right-hand side of the `f_opC` row the scenario was solved with.
    pub opc_cap: f64,
    /// Whether the training cap was unattainable and the scenario's own
    /// relaxed optimum was used instead.
    pub relaxed_cap: bool,
    pub f_opc: f64,
    pub f_opp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OosReport {
    pub n_oos: usize,
    pub n_infeasible: usize,
    pub avg_opc: f64,
    pub avg_opp: f64,
    pub vss_percent: f64,
    pub rows: Vec<OosRow>,
}

/// Re-solves the operation on fresh scenarios with the plan fixed and
/// minimizes `f_opP`. Each scenario keeps the `f_opC` row of the last
/// planning stage when it can meet it; otherwise the row is rebuilt from the
/// scenario's own `f_opC` optimum relaxed by `eps2`.
pub fn out_of_sample(
    solution: &PlanningSolution,
    traces: &ProsumerTraceSet,
    graph: &FeederGraph,
    tariff: &TariffSchedule,
    cfg: &CaseConfig,
    n_oos: usize,
) -> Result<OosReport> {
    let draws = sample_scenarios(traces, cfg.sigma_fraction, n_oos, cfg.rng_seed, STREAM_OOS)?;
    let scenarios: Vec<ScenarioSet> = (0..n_oos).map(|d| ScenarioSet::single(&draws, d)).collect();
    out_of_sample_on(solution, &scenarios, graph, &traces.prosumer_ids, tariff, cfg)
}

pub fn out_of_sample_on(
    solution: &PlanningSolution,
    scenarios: &[ScenarioSet],
    graph: &FeederGraph,
    ids: &[String],
    tariff: &TariffSchedule,
    cfg: &CaseConfig,
) -> Result<OosReport> {
    let opts = cfg.solver_options();
    let rows = scenarios
        .par_iter()
        .enumerate()
        .map(|(d, sc)| -> Result<OosRow> {
            let mut model = build(sc, graph, ids, tariff, cfg)?;
            model.fix_plan(solution.node, solution.capacity_kwh, solution.rated_kw)?;
            let row = |status: SolveStatus, opc_cap: f64, relaxed_cap: bool, obj: Option<Objectives>| OosRow {
                d,
                status: status.as_str().to_string(),
                opc_cap,
                relaxed_cap,
                f_opc: obj.map_or(f64::NAN, |o| o.f_opc),
                f_opp: obj.map_or(f64::NAN, |o| o.f_opp),
            };
            let mut capped = model.problem.clone();
            add_objective_cap(&mut capped, F_OPC, solution.eps_rhs[1])?;
            // The planning dispatch is a valid start whenever the layouts agree
            // and it fits the new scenario.
            let mut start_opts = opts.clone();
            if capped.columns.len() == solution.values.len() {
                start_opts.start = Some(solution.values.clone());
            }
            let res = solve_milp(&capped, F_OPP, &start_opts)?;
            if res.has_solution() {
                return Ok(row(res.status, solution.eps_rhs[1], false, Some(model.objectives(&res.values))));
            }
            if res.status != SolveStatus::Infeasible {
                return Ok(row(res.status, solution.eps_rhs[1], false, None));
            }
            let best = solve_milp(&model.problem, F_OPC, &opts)?;
            if !best.has_solution() {
                return Ok(row(best.status, f64::NAN, true, None));
            }
            let cap = epsilon_bound(model.objectives(&best.values).f_opc, cfg.eps2);
            add_objective_cap(&mut model.problem, F_OPC, cap)?;
            // The f_opC optimum satisfies the relaxed row.
            let relaxed_opts = SolverOptions { start: Some(best.values), ..opts.clone() };
            let res = solve_milp(&model.problem, F_OPP, &relaxed_opts)?;
            let obj = res.has_solution().then(|| model.objectives(&res.values));
            Ok(row(res.status, cap, true, obj))
        })
        .collect::<Result<Vec<_>>>()?;
    let ok: Vec<&OosRow> = rows.iter().filter(|r| r.f_opp.is_finite()).collect();
    let n_infeasible = rows.len() - ok.len();
    let (avg_opc, avg_opp) = if ok.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let k = ok.len() as f64;
        (ok.iter().map(|r| r.f_opc).sum::<f64>() / k, ok.iter().map(|r| r.f_opp).sum::<f64>() / k)
    };
    let vss_percent = vss_percent(avg_opp, solution.objectives.f_opp);
    Ok(OosReport { n_oos: rows.len(), n_infeasible, avg_opc, avg_opp, vss_percent, rows })
}

/// `|avg − stochastic| / |avg| × 100`.
pub fn vss_percent(avg_opp: f64, stochastic_opp: f64) -> f64 {
    if avg_opp == stochastic_opp {
        return 0.0;
    }
    (avg_opp - stochastic_opp).abs() / avg_opp.abs() * 100.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub eps1: f64,
    pub eps2: f64,
    pub objectives: Option<Objectives>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoReport {
    pub points: Vec<ParetoPoint>,
    /// Row `k` holds all three objectives at the minimizer of objective `k`.
    pub payoff: [[f64; 3]; 3],
    pub utopia: [f64; 3],
    pub nadir: [f64; 3],
}

/// Plans at every `(ε₁, ε₂)` of `grid`, reusing the stage-1 optimum and the
/// stage-2 optimum of each distinct `ε₁`. Failed points are recorded.
pub fn pareto_sweep(
    scenarios: &ScenarioSet,
    graph: &FeederGraph,
    ids: &[String],
    tariff: &TariffSchedule,
    cfg: &CaseConfig,
    grid: &[(f64, f64)],
) -> Result<ParetoReport> {
    if grid.is_empty() {
        return Err(crate::error::invalid("the epsilon grid is empty"));
    }
    let model = build(scenarios, graph, ids, tariff, cfg)?;
    warn_size(&model, cfg);
    let opts = cfg.solver_options();

    let mut payoff = [[f64::NAN; 3]; 3];
    for (k, name) in [F_INV, F_OPC, F_OPP].into_iter().enumerate() {
        let (res, _) = solve_stage(&model.problem, name, k + 1, &opts)?;
        payoff[k] = model.objectives(&res.values).as_array();
    }
    let utopia = [payoff[0][0], payoff[1][1], payoff[2][2]];
    let mut nadir = [f64::NEG_INFINITY; 3];
    for row in &payoff {
        for j in 0..3 {
            nadir[j] = nadir[j].max(row[j]);
        }
    }

    let s1 = run_stage1(&model, &opts)?;
    let mut eps1s: Vec<f64> = grid.iter().map(|g| g.0).collect();
    eps1s.sort_by(f64::total_cmp);
    eps1s.dedup();
    let stage2: Vec<(f64, std::result::Result<f64, String>)> = eps1s
        .par_iter()
        .map(|&e1| (e1, run_stage2(&model, &s1, e1, &opts).map(|r| r.0).map_err(|e| e.to_string())))
        .collect();
    let points = grid
        .par_iter()
        .map(|&(eps1, eps2)| {
            let f2 = stage2.iter().find(|(e, _)| *e == eps1).map(|(_, r)| r.clone()).unwrap();
            let result = f2.and_then(|f_opc_star| {
                let rhs = [epsilon_bound(s1.f_inv_star, eps1), epsilon_bound(f_opc_star, eps2)];
                run_stage3(&model, rhs, &opts).map(|(res, _)| model.objectives(&res.values)).map_err(|e| e.to_string())
            });
            match result {
                Ok(o) => ParetoPoint { eps1, eps2, objectives: Some(o), error: None },
                Err(e) => ParetoPoint { eps1, eps2, objectives: None, error: Some(e) },
            }
        })
        .collect();
    Ok(ParetoReport { points, payoff, utopia, nadir })
}

//! CSV reports of plans, dispatch, Pareto sweeps and out-of-sample runs.

use std::io::Write;

use crate::error::Result;
use crate::model::Objectives;
use crate::planner::{EtsComparison, NoCesBaseline, OosReport, ParetoReport, PlanningSolution};
use crate::scenario::ScenarioSet;

fn num(v: f64) -> String {
    v.to_string()
}

pub const SOLUTION_HEADER: [&str; 17] = [
    "ets", "scheme", "node", "capacity_kwh", "rated_kw", "f_inv", "f_opC", "f_opP", "f_inv_star", "f_opC_star", "f_inv_rhs",
    "f_opC_rhs", "soc0_kwh", "stage1_status", "stage2_status", "stage3_status", "stage3_gap",
];

/// One row per plan.
pub fn write_solutions<W: Write>(solutions: &[PlanningSolution], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SOLUTION_HEADER)?;
    for s in solutions {
        let status = |k: usize| s.stages.get(k).map_or(String::new(), |r| r.status.as_str().to_string());
        w.write_record([
            s.ets.label().to_string(),
            s.ets.to_string(),
            s.node.to_string(),
            num(s.capacity_kwh),
            num(s.rated_kw),
            num(s.objectives.f_inv),
            num(s.objectives.f_opc),
            num(s.objectives.f_opp),
            num(s.f_inv_star),
            num(s.f_opc_star),
            num(s.eps_rhs[0]),
            num(s.eps_rhs[1]),
            num(s.soc0),
            status(0),
            status(1),
            status(2),
            s.stages.get(2).map_or(String::new(), |r| num(r.gap)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const DISPATCH_HEADER: [&str; 10] =
    ["ets", "node", "s", "t", "omega", "e_ch_kwh", "e_dis_kwh", "soc_kwh", "grid_trade_kwh", "ces_trade_kwh"];

/// One row per non-slack node, scenario and interval. Storage columns are
/// zero away from candidate nodes; trade columns sum the prosumers hosted at
/// the node.
pub fn write_dispatch<W: Write>(solution: &PlanningSolution, scenarios: &ScenarioSet, hosts: &[Vec<usize>], out: W) -> Result<()> {
    let ns = scenarios.n_scenarios();
    let nt = scenarios.horizon();
    let nu = scenarios.num_prosumers();
    let mut grid = vec![vec![vec![0.0; nt]; ns]; nu];
    let mut ces = vec![vec![vec![0.0; nt]; ns]; nu];
    for tr in &solution.trades {
        grid[tr.u][tr.s][tr.t] = tr.e_grid;
        ces[tr.u][tr.s][tr.t] = tr.e_ces;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DISPATCH_HEADER)?;
    for (node, us) in hosts.iter().enumerate().skip(1) {
        for s in 0..ns {
            for t in 0..nt {
                let d = solution.dispatch.iter().find(|d| d.node == node && d.s == s && d.t == t);
                let (ch, dis, soc) = d.map_or((0.0, 0.0, 0.0), |d| (d.e_ch, d.e_dis, d.soc));
                w.write_record([
                    solution.ets.label().to_string(),
                    node.to_string(),
                    s.to_string(),
                    t.to_string(),
                    num(scenarios.omega[s][t]),
                    num(ch),
                    num(dis),
                    num(soc),
                    num(us.iter().map(|&u| grid[u][s][t]).sum()),
                    num(us.iter().map(|&u| ces[u][s][t]).sum()),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Grid points, then the payoff table, utopia and nadir.
pub fn write_pareto<W: Write>(report: &ParetoReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "eps1", "eps2", "f_inv", "f_opC", "f_opP", "error"])?;
    for p in &report.points {
        let o = p.objectives.map_or([f64::NAN; 3], |o: Objectives| o.as_array());
        w.write_record([
            "point".to_string(),
            num(p.eps1),
            num(p.eps2),
            num(o[0]),
            num(o[1]),
            num(o[2]),
            p.error.clone().unwrap_or_default(),
        ])?;
    }
    let labels = ["min_f_inv", "min_f_opC", "min_f_opP"];
    let extra = report.payoff.iter().zip(labels).map(|(r, l)| (l, *r)).chain([("utopia", report.utopia), ("nadir", report.nadir)]);
    for (kind, v) in extra {
        w.write_record([kind.to_string(), String::new(), String::new(), num(v[0]), num(v[1]), num(v[2]), String::new()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_oos<W: Write>(report: &OosReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "status", "f_opC_cap", "relaxed_cap", "f_opC", "f_opP"])?;
    for r in &report.rows {
        w.write_record([r.d.to_string(), r.status.clone(), num(r.opc_cap), r.relaxed_cap.to_string(), num(r.f_opc), num(r.f_opp)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_oos_summary<W: Write>(report: &OosReport, stochastic_opp: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_oos", "n_infeasible", "avg_f_opC", "avg_f_opP", "stochastic_f_opP", "vss_percent"])?;
    w.write_record([
        report.n_oos.to_string(),
        report.n_infeasible.to_string(),
        num(report.avg_opc),
        num(report.avg_opp),
        num(stochastic_opp),
        num(report.vss_percent),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_equitability<W: Write>(cmp: &EtsComparison, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "ets",
        "provider_benefit",
        "prosumer_benefit",
        "provider_share",
        "prosumer_share",
        "spread",
        "most_equitable",
    ])?;
    for (i, r) in cmp.equitability.iter().enumerate() {
        w.write_record([
            r.ets.label().to_string(),
            num(r.provider_benefit),
            num(r.prosumer_benefit),
            num(r.provider_share),
            num(r.prosumer_share),
            num(r.spread),
            (i == cmp.most_equitable).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_baseline<W: Write>(baseline: &NoCesBaseline, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["f_opP", "max_voltage_violation_pu2"])?;
    w.write_record([num(baseline.f_opp), num(baseline.max_voltage_violation)])?;
    w.flush()?;
    Ok(())
}

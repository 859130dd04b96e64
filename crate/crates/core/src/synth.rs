//! Synthetic study cases. The traces, feeder and tariff are made up; they
//! stand in for measured data and carry no empirical meaning.

use std::path::Path;

use crate::config::CaseConfig;
use crate::error::Result;
use crate::feeder::{FeederGraph, Line};
use crate::tariffs::write_tariff_csv;
use crate::traces::ProsumerTraceSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub traces: ProsumerTraceSet,
    pub graph: FeederGraph,
    pub lambda_g: Vec<f64>,
    pub cfg: CaseConfig,
}

/// Synthetic three-band time-of-use price (AUD/kWh) repeated over `horizon` hours.
pub fn synthetic_tou(horizon: usize) -> Vec<f64> {
    (0..horizon)
        .map(|t| match t % 24 {
            0..=6 | 22..=23 => 0.20,
            14..=20 => 0.55,
            _ => 0.30,
        })
        .collect()
}

/// Hourly household consumption shape in kWh: low at night, a small morning
/// bump and a pronounced evening peak.
fn load_shape(h: usize) -> f64 {
    const SHAPE: [f64; 24] = [
        0.9, 0.8, 0.7, 0.7, 0.7, 0.8, 1.0, 1.3, 1.2, 0.8, 0.6, 0.5, //
        0.5, 0.5, 0.6, 0.8, 1.2, 1.8, 2.6, 2.8, 2.6, 2.1, 1.6, 1.2,
    ];
    SHAPE[h]
}

/// PV yield in kWh per kW of panel, a half sine between 06:00 and 18:00.
fn pv_shape(h: usize) -> f64 {
    let x = h as f64 + 0.5;
    if (6.0..18.0).contains(&x) {
        (std::f64::consts::PI * (x - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Deterministic multiplier in `[0.8, 1.2]` so prosumers differ a little.
fn spread(u: usize) -> f64 {
    0.8 + 0.4 * ((u * 7919 + 3) % 13) as f64 / 12.0
}

fn traces(ids: &[String], panel_kw: &[f64], horizon: usize) -> ProsumerTraceSet {
    let mut set = ProsumerTraceSet::zeros(ids.to_vec(), horizon);
    for u in 0..ids.len() {
        let f = spread(u);
        for t in 0..horizon {
            let h = t % 24;
            set.mu_load[u][t] = f * load_shape(h);
            set.mu_reactive[u][t] = 0.25 * f * load_shape(h);
            set.mu_pv[u][t] = panel_kw[u] * pv_shape(h);
        }
    }
    set
}

fn build_graph(n_nodes: usize, edges: &[(usize, usize, f64, f64)], counts: &[usize], ids: &[String]) -> FeederGraph {
    let mut prosumers_at = vec![Vec::new(); n_nodes];
    let mut next = 0;
    for (node, &c) in counts.iter().enumerate() {
        prosumers_at[node] = ids[next..next + c].to_vec();
        next += c;
    }
    FeederGraph {
        n_nodes,
        lines: edges.iter().map(|&(alpha, beta, r_pu, x_pu)| Line { alpha, beta, r_pu, x_pu }).collect(),
        prosumers_at,
        s_base_kva: 100.0,
        v_base_kv: 0.4,
    }
}

/// Seven-node feeder with thirty prosumers who mostly import. Larger PV
/// systems at the far end of the long branch push the voltage outside its
/// limits unless storage nearby shifts part of the flow.
pub fn default_case() -> SyntheticCase {
    let counts = [0, 4, 5, 5, 6, 5, 5];
    let n: usize = counts.iter().sum();
    let ids: Vec<String> = (1..=n).map(|i| format!("p{i:02}")).collect();
    let node_of: Vec<usize> = counts.iter().enumerate().flat_map(|(a, &c)| std::iter::repeat(a).take(c)).collect();
    let panel: Vec<f64> = node_of.iter().map(|&a| if a == 4 { 5.0 } else if a == 3 { 1.5 } else { 1.0 }).collect();
    let edges = [
        (0, 1, 0.015, 0.0075),
        (1, 2, 0.015, 0.0075),
        (2, 3, 0.02, 0.01),
        (3, 4, 0.1, 0.05),
        (2, 5, 0.012, 0.006),
        (5, 6, 0.012, 0.006),
    ];
    SyntheticCase {
        traces: traces(&ids, &panel, 24),
        graph: build_graph(7, &edges, &counts, &ids),
        lambda_g: synthetic_tou(24),
        cfg: CaseConfig { n_reduced_scenarios: 5, ..CaseConfig::default() },
    }
}

/// Four-node chain with six prosumers and two candidate nodes, small enough
/// for exhaustive cross-checks.
pub fn tiny_case() -> SyntheticCase {
    let counts = [0, 2, 2, 2];
    let ids: Vec<String> = (1..=6).map(|i| format!("p{i}")).collect();
    let panel = [2.0, 2.0, 3.0, 3.0, 9.0, 9.0];
    let edges = [(0, 1, 0.06, 0.03), (1, 2, 0.08, 0.04), (2, 3, 0.14, 0.07)];
    let cfg = CaseConfig {
        n_initial_scenarios: 10,
        n_reduced_scenarios: 2,
        candidate_nodes: Some(vec![2, 3]),
        n_oos: 4,
        ..CaseConfig::default()
    };
    SyntheticCase {
        traces: traces(&ids, &panel, 24),
        graph: build_graph(4, &edges, &counts, &ids),
        lambda_g: synthetic_tou(24),
        cfg,
    }
}

/// Writes `traces.csv`, `feeder_lines.csv`, `feeder_nodes.csv`,
/// `tariff.csv` and `case.toml` into `dir`.
pub fn write_case(case: &SyntheticCase, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    case.traces.write_csv(std::fs::File::create(dir.join("traces.csv"))?)?;
    case.graph.write_lines_csv(std::fs::File::create(dir.join("feeder_lines.csv"))?)?;
    case.graph.write_assignment_csv(std::fs::File::create(dir.join("feeder_nodes.csv"))?)?;
    write_tariff_csv(&case.lambda_g, std::fs::File::create(dir.join("tariff.csv"))?)?;
    let toml = toml::to_string(&case.cfg).map_err(|e| crate::error::invalid(format!("config: {e}")))?;
    std::fs::write(dir.join("case.toml"), format!("# Synthetic case; all data in this directory is made up.\n{toml}"))?;
    Ok(())
}

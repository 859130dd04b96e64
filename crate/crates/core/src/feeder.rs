//! Radial feeder topology and linearized DistFlow constraints.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use ces_milp::{MilpProblem, Sense};

use crate::error::{invalid, CesError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub alpha: usize,
    pub beta: usize,
    pub r_pu: f64,
    pub x_pu: f64,
}

/// Nodes `0..n_nodes` with node 0 the slack bus (transformer secondary).
#[derive(Debug, Clone, PartialEq)]
pub struct FeederGraph {
    pub n_nodes: usize,
    pub lines: Vec<Line>,
    /// Prosumer ids hosted at each node; empty at node 0.
    pub prosumers_at: Vec<Vec<String>>,
    pub s_base_kva: f64,
    pub v_base_kv: f64,
}

/// Lines oriented away from the slack node, parents before children.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialOrder {
    pub lines: Vec<Line>,
    /// Index into `lines` of the line feeding each node; `None` for node 0.
    pub feeding_line: Vec<Option<usize>>,
    /// Indices into `lines` of the lines leaving each node.
    pub children: Vec<Vec<usize>>,
}

impl FeederGraph {
    pub fn non_slack_nodes(&self) -> std::ops::Range<usize> {
        1..self.n_nodes
    }

    /// Checks the graph is a tree spanning every node and orients it.
    pub fn validate_radial(&self) -> Result<RadialOrder> {
        let n = self.n_nodes;
        if n < 2 {
            return Err(CesError::Topology("feeder needs the slack node and at least one more".into()));
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut seen_pairs: HashMap<(usize, usize), usize> = HashMap::new();
        for (i, l) in self.lines.iter().enumerate() {
            for node in [l.alpha, l.beta] {
                if node >= n {
                    return Err(CesError::Topology(format!("line {i} refers to unknown node {node}")));
                }
            }
            if l.alpha == l.beta {
                return Err(CesError::Topology(format!("line {i} is a self-loop at node {}", l.alpha)));
            }
            if !(l.r_pu >= 0.0 && l.x_pu >= 0.0 && l.r_pu.is_finite() && l.x_pu.is_finite()) {
                return Err(CesError::Topology(format!("line ({}, {}) has negative or non-finite impedance", l.alpha, l.beta)));
            }
            let key = (l.alpha.min(l.beta), l.alpha.max(l.beta));
            if seen_pairs.insert(key, i).is_some() {
                return Err(CesError::Topology(format!("duplicate line ({}, {})", l.alpha, l.beta)));
            }
            adj[l.alpha].push(i);
            adj[l.beta].push(i);
        }

        let mut order = RadialOrder { lines: Vec::new(), feeding_line: vec![None; n], children: vec![Vec::new(); n] };
        let mut visited = vec![false; n];
        visited[0] = true;
        let mut used = vec![false; self.lines.len()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(a) = queue.pop_front() {
            for &i in &adj[a] {
                if used[i] {
                    continue;
                }
                used[i] = true;
                let l = self.lines[i];
                let b = if l.alpha == a { l.beta } else { l.alpha };
                if visited[b] {
                    return Err(CesError::Topology(format!("cycle closes at node {b}")));
                }
                visited[b] = true;
                let k = order.lines.len();
                order.lines.push(Line { alpha: a, beta: b, ..l });
                order.feeding_line[b] = Some(k);
                order.children[a].push(k);
                queue.push_back(b);
            }
        }
        if let Some(b) = visited.iter().position(|v| !v) {
            return Err(CesError::Topology(format!("node {b} is not connected to the slack node")));
        }
        Ok(order)
    }

    /// Maps the hosted prosumers to indices into `ids`. Every id must sit at
    /// exactly one non-slack node.
    pub fn bind_prosumers(&self, ids: &[String]) -> Result<Vec<Vec<usize>>> {
        if self.prosumers_at.len() != self.n_nodes {
            return Err(CesError::Topology("prosumer assignment does not cover every node".into()));
        }
        if !self.prosumers_at[0].is_empty() {
            return Err(CesError::Topology("prosumers cannot sit at the slack node".into()));
        }
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut placed = vec![false; ids.len()];
        let mut out = vec![Vec::new(); self.n_nodes];
        for (node, hosted) in self.prosumers_at.iter().enumerate() {
            for id in hosted {
                let &u = index
                    .get(id.as_str())
                    .ok_or_else(|| CesError::Topology(format!("prosumer {id} at node {node} has no traces")))?;
                if placed[u] {
                    return Err(CesError::Topology(format!("prosumer {id} is assigned twice")));
                }
                placed[u] = true;
                out[node].push(u);
            }
        }
        if let Some(u) = placed.iter().position(|p| !p) {
            return Err(CesError::Topology(format!("prosumer {} is not assigned to a node", ids[u])));
        }
        Ok(out)
    }

    /// Converts an energy per interval (kWh or kvarh) to per-unit power.
    pub fn to_pu(&self, energy: f64, delta_t: f64) -> f64 {
        energy / (delta_t * self.s_base_kva)
    }
}

/// Branch flows and squared voltages of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub p_line: Vec<f64>,
    pub q_line: Vec<f64>,
    pub u_node: Vec<f64>,
}

impl FlowState {
    pub fn voltage_violation(&self, u_min: f64, u_max: f64) -> f64 {
        self.u_node.iter().skip(1).map(|&u| (u_min - u).max(u - u_max).max(0.0)).fold(0.0, f64::max)
    }
}

/// Evaluates the DistFlow equations directly for nodal absorptions `p`, `q`
/// (per-unit, index 0 ignored).
pub fn evaluate_flows(order: &RadialOrder, p: &[f64], q: &[f64], u0: f64) -> FlowState {
    let nl = order.lines.len();
    let mut p_line = vec![0.0; nl];
    let mut q_line = vec![0.0; nl];
    for k in (0..nl).rev() {
        let b = order.lines[k].beta;
        p_line[k] = p[b] + order.children[b].iter().map(|&c| p_line[c]).sum::<f64>();
        q_line[k] = q[b] + order.children[b].iter().map(|&c| q_line[c]).sum::<f64>();
    }
    let mut u_node = vec![0.0; order.feeding_line.len()];
    u_node[0] = u0;
    for (k, l) in order.lines.iter().enumerate() {
        u_node[l.beta] = u_node[l.alpha] - 2.0 * (l.r_pu * p_line[k] + l.x_pu * q_line[k]);
    }
    FlowState { p_line, q_line, u_node }
}

/// Per-unit absorption at each node for one `(s, t)`: a constant from the
/// scenario data plus linear terms in decision columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodalInjection {
    pub p_const: Vec<f64>,
    pub q_const: Vec<f64>,
    pub p_terms: Vec<Vec<(usize, f64)>>,
}

/// Columns created by [`add_distflow`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistflowColumns {
    pub p_line: Vec<usize>,
    pub q_line: Vec<usize>,
    pub u_node: Vec<usize>,
}

/// Appends flow and voltage columns and the DistFlow rows of one `(s, t)`.
/// `tag` is appended to every name, e.g. `"3,17"`.
pub fn add_distflow(
    problem: &mut MilpProblem,
    order: &RadialOrder,
    inj: &NodalInjection,
    u0: f64,
    u_bounds: (f64, f64),
    tag: &str,
) -> DistflowColumns {
    let n = order.feeding_line.len();
    let p_line: Vec<usize> = order
        .lines
        .iter()
        .map(|l| problem.add_continuous(format!("P[{},{},{tag}]", l.alpha, l.beta), f64::NEG_INFINITY, f64::INFINITY))
        .collect();
    let q_line: Vec<usize> = order
        .lines
        .iter()
        .map(|l| problem.add_continuous(format!("Q[{},{},{tag}]", l.alpha, l.beta), f64::NEG_INFINITY, f64::INFINITY))
        .collect();
    let u_node: Vec<usize> = (0..n)
        .map(|a| {
            let (lo, hi) = if a == 0 { (u0, u0) } else { u_bounds };
            problem.add_continuous(format!("U[{a},{tag}]"), lo, hi)
        })
        .collect();
    for (k, l) in order.lines.iter().enumerate() {
        let b = l.beta;
        let mut pc = vec![(p_line[k], 1.0)];
        pc.extend(order.children[b].iter().map(|&c| (p_line[c], -1.0)));
        pc.extend(inj.p_terms[b].iter().map(|&(j, v)| (j, -v)));
        problem.add_row(format!("flowP[{},{},{tag}]", l.alpha, b), pc, Sense::Eq, inj.p_const[b]);
        let mut qc = vec![(q_line[k], 1.0)];
        qc.extend(order.children[b].iter().map(|&c| (q_line[c], -1.0)));
        problem.add_row(format!("flowQ[{},{},{tag}]", l.alpha, b), qc, Sense::Eq, inj.q_const[b]);
        let mut vc = vec![(u_node[b], 1.0), (u_node[l.alpha], -1.0)];
        if l.r_pu != 0.0 {
            vc.push((p_line[k], 2.0 * l.r_pu));
        }
        if l.x_pu != 0.0 {
            vc.push((q_line[k], 2.0 * l.x_pu));
        }
        problem.add_row(format!("volt[{},{},{tag}]", l.alpha, b), vc, Sense::Eq, 0.0);
    }
    DistflowColumns { p_line, q_line, u_node }
}

fn parse_err(path: &Path, line: u64, msg: String) -> CesError {
    CesError::Parse { path: path.to_path_buf(), line, msg }
}

/// Reads `alpha,beta,r_pu,x_pu` lines and `node,prosumer_id` assignments.
/// The node count is one more than the largest node named in either file.
pub fn load_feeder(lines_path: &Path, assignment_path: &Path, s_base_kva: f64, v_base_kv: f64) -> Result<FeederGraph> {
    let mut lines = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(lines_path)?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["alpha", "beta", "r_pu", "x_pu"] {
        return Err(parse_err(lines_path, 1, "expected header `alpha,beta,r_pu,x_pu`".into()));
    }
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(parse_err(lines_path, line, format!("expected 4 fields, found {}", rec.len())));
        }
        let node = |i: usize| rec[i].parse::<usize>().map_err(|_| parse_err(lines_path, line, format!("bad node `{}`", &rec[i])));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| parse_err(lines_path, line, format!("bad number `{}`", &rec[i])));
        lines.push(Line { alpha: node(0)?, beta: node(1)?, r_pu: num(2)?, x_pu: num(3)? });
    }
    let mut assignment: Vec<(usize, String)> = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(assignment_path)?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["node", "prosumer_id"] {
        return Err(parse_err(assignment_path, 1, "expected header `node,prosumer_id`".into()));
    }
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(assignment_path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let node = rec[0].parse::<usize>().map_err(|_| parse_err(assignment_path, line, format!("bad node `{}`", &rec[0])))?;
        assignment.push((node, rec[1].to_string()));
    }
    let max_node = lines.iter().flat_map(|l| [l.alpha, l.beta]).chain(assignment.iter().map(|a| a.0)).max().unwrap_or(0);
    let mut prosumers_at = vec![Vec::new(); max_node + 1];
    for (node, id) in assignment {
        prosumers_at[node].push(id);
    }
    if !(s_base_kva > 0.0 && v_base_kv > 0.0) {
        return Err(invalid("bases must be positive"));
    }
    let graph = FeederGraph { n_nodes: max_node + 1, lines, prosumers_at, s_base_kva, v_base_kv };
    graph.validate_radial()?;
    Ok(graph)
}

impl FeederGraph {
    pub fn write_lines_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "beta", "r_pu", "x_pu"])?;
        for l in &self.lines {
            w.write_record([l.alpha.to_string(), l.beta.to_string(), l.r_pu.to_string(), l.x_pu.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_assignment_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "prosumer_id"])?;
        for (node, ids) in self.prosumers_at.iter().enumerate() {
            for id in ids {
                w.write_record([node.to_string(), id.clone()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

//! Scenario generation by roulette-wheel sampling of discretized normal
//! distributions, followed by K-means reduction.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::CaseConfig;
use crate::error::{invalid, CesError, Result};
use crate::traces::ProsumerTraceSet;

/// RNG stream of the training scenarios.
pub const STREAM_TRAINING: u64 = 0;
/// RNG stream of out-of-sample scenarios; never overlaps the training draws.
pub const STREAM_OOS: u64 = 1;
const STREAM_KMEANS: u64 = 2;

const KMEANS_MAX_ITER: usize = 300;

/// Seven-point approximation of a normal distribution, ordered
/// `[μ, μ+σ, μ−σ, μ+2σ, μ−2σ, μ+3σ, μ−3σ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdf {
    pub realizations: Vec<f64>,
    pub probs: Vec<f64>,
    /// `σ <= 0`: a single point at `μ` with probability one.
    pub degenerate: bool,
}

const OFFSETS: [f64; 7] = [0.0, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0];

pub fn discretize_normal(mu: f64, sigma: f64) -> DiscretePdf {
    if !(sigma > 0.0) {
        return DiscretePdf { realizations: vec![mu], probs: vec![1.0], degenerate: true };
    }
    let realizations: Vec<f64> = OFFSETS.iter().map(|k| mu + k * sigma).collect();
    // Density at each midpoint times the interval width σ.
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let raw: Vec<f64> = realizations
        .iter()
        .map(|x| {
            let z = (x - mu) / sigma;
            norm * (-0.5 * z * z).exp() * sigma
        })
        .collect();
    let total: f64 = raw.iter().sum();
    DiscretePdf { realizations, probs: raw.iter().map(|p| p / total).collect(), degenerate: false }
}

/// Cumulative bins over `[0, 1)`; bin `i` is `[cumulative[i-1], cumulative[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct RouletteWheel {
    pub cumulative: Vec<f64>,
}

impl RouletteWheel {
    pub fn new(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p > 0.0)) {
            return Err(invalid("roulette wheel needs positive probabilities"));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let total = acc;
        for c in cumulative.iter_mut() {
            *c /= total;
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(RouletteWheel { cumulative })
    }

    pub fn from_pdf(pdf: &DiscretePdf) -> Self {
        Self::new(&pdf.probs).expect("discretized probabilities are positive")
    }

    /// Index of the bin containing `r`.
    pub fn spin(&self, r: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&r) {
            return Err(invalid(format!("spin value {r} is outside [0, 1)")));
        }
        Ok(self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1))
    }
}

/// Counter-based uniform draws: the value at `index` does not depend on how
/// many other draws were taken or in which order.
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        UniformStream { rng }
    }

    pub fn at(&mut self, index: u64) -> f64 {
        // One f64 consumes one u64, i.e. two 32-bit words.
        self.rng.set_word_pos(index as u128 * 2);
        self.rng.random::<f64>()
    }
}

/// Raw sampled scenarios, indexed `[m][u][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialScenarioSet {
    pub e_load: Vec<Vec<Vec<f64>>>,
    pub e_reactive: Vec<Vec<Vec<f64>>>,
    pub e_pv: Vec<Vec<Vec<f64>>>,
    pub phi_load: Vec<Vec<Vec<f64>>>,
    pub phi_reactive: Vec<Vec<Vec<f64>>>,
    pub phi_pv: Vec<Vec<Vec<f64>>>,
    /// Probability of scenario `m` at time `t`, normalized over `m`.
    pub omega_big: Vec<Vec<f64>>,
}

impl InitialScenarioSet {
    pub fn len(&self) -> usize {
        self.e_load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_load.is_empty()
    }
}

/// Samples `cfg.n_initial_scenarios` training scenarios.
pub fn generate_initial(traces: &ProsumerTraceSet, cfg: &CaseConfig) -> Result<InitialScenarioSet> {
    sample_scenarios(traces, cfg.sigma_fraction, cfg.n_initial_scenarios, cfg.rng_seed, STREAM_TRAINING)
}

/// Samples `n` scenarios from the given RNG stream. Every `(m, u, t, quantity)`
/// cell gets its own uniform draw.
pub fn sample_scenarios(
    traces: &ProsumerTraceSet,
    sigma_fraction: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<InitialScenarioSet> {
    traces.validate()?;
    if n == 0 {
        return Err(invalid("at least one scenario is required"));
    }
    let nu = traces.num_prosumers();
    let nt = traces.horizon_hours;
    let means = [&traces.mu_load, &traces.mu_reactive, &traces.mu_pv];
    // wheels[k][u][t]
    let pdfs: Vec<Vec<Vec<DiscretePdf>>> = means
        .iter()
        .map(|mu| {
            mu.iter()
                .map(|row| row.iter().map(|&m| discretize_normal(m, sigma_fraction * m.abs())).collect())
                .collect()
        })
        .collect();
    let wheels: Vec<Vec<Vec<RouletteWheel>>> =
        pdfs.iter().map(|a| a.iter().map(|r| r.iter().map(RouletteWheel::from_pdf).collect()).collect()).collect();

    let mut uni = UniformStream::new(seed, stream);
    let mut values = vec![vec![vec![vec![0.0; nt]; nu]; n]; 3];
    let mut phis = vec![vec![vec![vec![0.0; nt]; nu]; n]; 3];
    let mut log_w = vec![vec![0.0f64; nt]; n];
    for m in 0..n {
        for u in 0..nu {
            for t in 0..nt {
                for k in 0..3 {
                    let index = (((m * nu + u) * nt + t) * 3 + k) as u64;
                    let i = wheels[k][u][t].spin(uni.at(index))?;
                    let pdf = &pdfs[k][u][t];
                    values[k][m][u][t] = pdf.realizations[i];
                    phis[k][m][u][t] = pdf.probs[i];
                    log_w[m][t] += pdf.probs[i].ln();
                }
            }
        }
    }
    // The product of ~3|U| probabilities underflows; normalize in log space.
    let mut omega_big = vec![vec![0.0; nt]; n];
    for t in 0..nt {
        let top = (0..n).map(|m| log_w[m][t]).fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = (0..n).map(|m| (log_w[m][t] - top).exp()).sum();
        for m in 0..n {
            omega_big[m][t] = (log_w[m][t] - top).exp() / total;
        }
    }
    let mut values = values.into_iter();
    let mut phis = phis.into_iter();
    Ok(InitialScenarioSet {
        e_load: values.next().unwrap(),
        e_reactive: values.next().unwrap(),
        e_pv: values.next().unwrap(),
        phi_load: phis.next().unwrap(),
        phi_reactive: phis.next().unwrap(),
        phi_pv: phis.next().unwrap(),
        omega_big,
    })
}

/// Scenarios fed to the optimization, indexed `[s][u][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub e_load: Vec<Vec<Vec<f64>>>,
    pub e_reactive: Vec<Vec<Vec<f64>>>,
    pub e_pv: Vec<Vec<Vec<f64>>>,
    /// `omega[s][t]`, summing to one over `s` at every `t`.
    pub omega: Vec<Vec<f64>>,
    /// Initial scenarios merged into each reduced scenario.
    pub members: Vec<Vec<usize>>,
}

impl ScenarioSet {
    pub fn n_scenarios(&self) -> usize {
        self.e_load.len()
    }

    pub fn num_prosumers(&self) -> usize {
        self.e_load.first().map_or(0, |s| s.len())
    }

    pub fn horizon(&self) -> usize {
        self.omega.first().map_or(0, |o| o.len())
    }

    /// The expected traces as a single certain scenario.
    pub fn from_means(traces: &ProsumerTraceSet) -> Self {
        ScenarioSet {
            e_load: vec![traces.mu_load.clone()],
            e_reactive: vec![traces.mu_reactive.clone()],
            e_pv: vec![traces.mu_pv.clone()],
            omega: vec![vec![1.0; traces.horizon_hours]],
            members: vec![vec![0]],
        }
    }

    /// Scenario `m` of an initial set, on its own with probability one.
    pub fn single(initial: &InitialScenarioSet, m: usize) -> Self {
        ScenarioSet {
            e_load: vec![initial.e_load[m].clone()],
            e_reactive: vec![initial.e_reactive[m].clone()],
            e_pv: vec![initial.e_pv[m].clone()],
            omega: vec![vec![1.0; initial.omega_big[m].len()]],
            members: vec![vec![m]],
        }
    }

    /// Net energy `e^L − e^PV` of prosumer `u`.
    pub fn net(&self, s: usize, u: usize, t: usize) -> f64 {
        self.e_load[s][u][t] - self.e_pv[s][u][t]
    }

    pub fn write_csv<W: Write>(&self, ids: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "t", "u", "load_kwh", "reactive_kvarh", "pv_kwh"])?;
        for s in 0..self.n_scenarios() {
            for t in 0..self.horizon() {
                for (u, id) in ids.iter().enumerate() {
                    w.write_record([
                        s.to_string(),
                        t.to_string(),
                        id.clone(),
                        self.e_load[s][u][t].to_string(),
                        self.e_reactive[s][u][t].to_string(),
                        self.e_pv[s][u][t].to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_omega_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s", "t", "omega"])?;
        for (s, row) in self.omega.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                w.write_record([s.to_string(), t.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn feature_vectors(initial: &InitialScenarioSet) -> Vec<Vec<f64>> {
    (0..initial.len())
        .map(|m| {
            [&initial.e_load, &initial.e_reactive, &initial.e_pv]
                .iter()
                .flat_map(|q| q[m].iter().flatten().copied())
                .collect()
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters the initial scenarios into `cfg.n_reduced_scenarios` groups on the
/// standardized joint vector of all quantities.
pub fn reduce_kmeans(initial: &InitialScenarioSet, cfg: &CaseConfig) -> Result<ScenarioSet> {
    let k = cfg.n_reduced_scenarios;
    let n = initial.len();
    if k == 0 || k > n {
        return Err(invalid(format!("cannot reduce {n} scenarios to {k}")));
    }
    let raw = feature_vectors(initial);
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for v in &raw {
        if !distinct.iter().any(|d| d.iter().zip(v.iter()).all(|(a, b)| a.to_bits() == b.to_bits())) {
            distinct.push(v);
        }
    }
    if k > distinct.len() {
        return Err(CesError::Reduction(format!(
            "only {} distinct scenarios for {k} clusters; lower n_reduced_scenarios",
            distinct.len()
        )));
    }

    let dim = raw[0].len();
    let mut x = raw.clone();
    for j in 0..dim {
        let mean = raw.iter().map(|v| v[j]).sum::<f64>() / n as f64;
        let var = raw.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for v in x.iter_mut() {
            v[j] = if sd > 0.0 { (v[j] - mean) / sd } else { 0.0 };
        }
    }

    let assign = lloyd(&x, k, cfg.rng_seed)?;
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (m, &c) in assign.iter().enumerate() {
        clusters[c].push(m);
    }
    clusters.sort_by_key(|c| c[0]);

    let nu = initial.e_load[0].len();
    let nt = initial.omega_big[0].len();
    let centroid = |q: &Vec<Vec<Vec<f64>>>, members: &[usize]| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; nt]; nu];
        for &m in members {
            for u in 0..nu {
                for t in 0..nt {
                    out[u][t] += q[m][u][t];
                }
            }
        }
        let c = members.len() as f64;
        out.iter_mut().flatten().for_each(|v| *v /= c);
        out
    };
    let mut set = ScenarioSet {
        e_load: Vec::with_capacity(k),
        e_reactive: Vec::with_capacity(k),
        e_pv: Vec::with_capacity(k),
        omega: Vec::with_capacity(k),
        members: clusters.clone(),
    };
    let mut mass = vec![vec![0.0; nt]; k];
    for (s, members) in clusters.iter().enumerate() {
        set.e_load.push(centroid(&initial.e_load, members));
        set.e_reactive.push(centroid(&initial.e_reactive, members));
        set.e_pv.push(centroid(&initial.e_pv, members));
        for t in 0..nt {
            mass[s][t] = members.iter().map(|&m| initial.omega_big[m][t]).sum();
        }
    }
    for t in 0..nt {
        let total: f64 = (0..k).map(|s| mass[s][t]).sum();
        for s in 0..k {
            mass[s][t] /= total;
        }
    }
    set.omega = mass;
    Ok(set)
}

/// K-means++ seeding followed by Lloyd iterations. Returns the cluster of
/// each point.
fn lloyd(x: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = x.len();
    let mut uni = UniformStream::new(seed, STREAM_KMEANS);
    let mut draw = 0u64;
    let mut next = || {
        draw += 1;
        uni.at(draw - 1)
    };
    let first = ((next() * n as f64) as usize).min(n - 1);
    let mut centers: Vec<Vec<f64>> = vec![x[first].clone()];
    let mut d2: Vec<f64> = x.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(CesError::Reduction("k-means++ seeding produced duplicate centroids; lower n_reduced_scenarios".into()));
        }
        let target = next() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if d > 0.0 && target < acc {
                pick = i;
                break;
            }
        }
        if d2[pick] == 0.0 {
            pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap();
        }
        centers.push(x[pick].clone());
        for (i, p) in x.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let nearest = |p: &[f64], centers: &[Vec<f64>]| -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, ctr) in centers.iter().enumerate() {
            let d = sq_dist(p, ctr);
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    };
    let mut assign: Vec<usize> = x.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..KMEANS_MAX_ITER {
        let dim = x[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in x.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // An emptied cluster takes over the point farthest from its centre.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&i, &j| {
                        sq_dist(&x[i], &centers[assign[i]]).total_cmp(&sq_dist(&x[j], &centers[assign[j]])).then(j.cmp(&i))
                    })
                    .expect("k <= number of distinct points");
                counts[assign[far]] -= 1;
                assign[far] = c;
                counts[c] = 1;
                centers[c] = x[far].clone();
            }
        }
        let next_assign: Vec<usize> = x.iter().map(|p| nearest(p, &centers)).collect();
        if next_assign == assign {
            break;
        }
        assign = next_assign;
    }
    let mut used = vec![false; k];
    assign.iter().for_each(|&c| used[c] = true);
    if used.iter().any(|u| !u) {
        return Err(CesError::Reduction("a cluster ended up empty; lower n_reduced_scenarios".into()));
    }
    Ok(assign)
}

use ces_core::scenario::{discretize_normal, sample_scenarios, InitialScenarioSet, RouletteWheel, STREAM_OOS, STREAM_TRAINING};
use ces_core::synth::default_case;
use ces_core::{generate_initial, reduce_kmeans, CaseConfig, ProsumerTraceSet};
use ces_oracles::{best_sse_bruteforce, normalized_products, sse};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

/// Weights `exp(-k²/2)` at offsets `0, ±1, ±2, ±3` normalized; the `1/σ` of
/// the density cancels the interval width.
fn closed_form_probs() -> [f64; 7] {
    let raw: Vec<f64> = [0.0f64, 1.0, -1.0, 2.0, -2.0, 3.0, -3.0].iter().map(|k| (-k * k / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    std::array::from_fn(|i| raw[i] / total)
}

#[test]
fn probabilities_match_the_closed_form_constants() {
    let pdf = discretize_normal(10.0, 0.2);
    let published: [f64; 7] = [0.39905, 0.24204, 0.24204, 0.054005, 0.054005, 0.0044330, 0.0044330];
    let oracle = closed_form_probs();
    for i in 0..7 {
        assert!((pdf.probs[i] - oracle[i]).abs() < 1e-15, "{i}: {} vs {}", pdf.probs[i], oracle[i]);
        // The published values carry five significant digits, some truncated
        // rather than rounded.
        let last_digit = 10f64.powf(published[i].log10().floor() - 4.0);
        assert!((pdf.probs[i] - published[i]).abs() <= last_digit, "{i}: {}", pdf.probs[i]);
    }
}

fn traces_from(mu: Vec<Vec<f64>>) -> ProsumerTraceSet {
    let ids = (0..mu.len()).map(|u| format!("u{u}")).collect();
    let mut set = ProsumerTraceSet::zeros(ids, mu[0].len());
    set.mu_load = mu.clone();
    set.mu_pv = mu.iter().map(|r| r.iter().map(|v| v / 2.0).collect()).collect();
    set.mu_reactive = mu.iter().map(|r| r.iter().map(|v| v / 4.0).collect()).collect();
    set
}

#[test]
fn single_scenario_has_probability_one() {
    let tr = traces_from(vec![vec![1.0; 24]; 2]);
    let set = sample_scenarios(&tr, 0.02, 1, 3, STREAM_TRAINING).unwrap();
    assert!(set.omega_big[0].iter().all(|&w| w == 1.0));
}

#[test]
fn zero_means_give_the_mean_trace() {
    let tr = traces_from(vec![vec![0.0; 24]; 3]);
    let set = sample_scenarios(&tr, 0.02, 6, 3, STREAM_TRAINING).unwrap();
    for m in 0..6 {
        assert_eq!(set.e_load[m], tr.mu_load);
        assert_eq!(set.e_pv[m], tr.mu_pv);
    }
}

#[test]
fn omega_matches_exact_products() {
    let case = default_case();
    let cfg = CaseConfig { n_initial_scenarios: 50, ..case.cfg.clone() };
    let set = generate_initial(&case.traces, &cfg).unwrap();
    let nu = case.traces.num_prosumers();
    for t in [0, 7, 13, 23] {
        let factors: Vec<Vec<f64>> = (0..set.len())
            .map(|m| {
                (0..nu).flat_map(|u| [set.phi_load[m][u][t], set.phi_reactive[m][u][t], set.phi_pv[m][u][t]]).collect()
            })
            .collect();
        let exact = normalized_products(&factors);
        for m in 0..set.len() {
            assert!(
                (set.omega_big[m][t] - exact[m]).abs() <= 1e-12 * exact[m].max(1e-3),
                "m {m} t {t}: {} vs {}",
                set.omega_big[m][t],
                exact[m]
            );
        }
    }
}

#[test]
fn sampled_values_are_realizations_with_matching_phi() {
    let tr = traces_from(vec![vec![2.0; 24], vec![3.0; 24]]);
    let set = sample_scenarios(&tr, 0.1, 20, 9, STREAM_TRAINING).unwrap();
    for m in 0..20 {
        for u in 0..2 {
            for t in 0..24 {
                let pdf = discretize_normal(tr.mu_load[u][t], 0.1 * tr.mu_load[u][t]);
                let i = pdf.realizations.iter().position(|&r| r == set.e_load[m][u][t]).expect("value is a realization");
                assert_eq!(pdf.probs[i], set.phi_load[m][u][t]);
            }
        }
    }
}

#[test]
fn training_and_oos_streams_differ() {
    let tr = traces_from(vec![vec![2.0; 24]; 2]);
    let a = sample_scenarios(&tr, 0.1, 10, 5, STREAM_TRAINING).unwrap();
    let b = sample_scenarios(&tr, 0.1, 10, 5, STREAM_OOS).unwrap();
    assert_ne!(a.e_load, b.e_load);
}

fn hand_built(points: &[[f64; 2]], omega: &[f64]) -> InitialScenarioSet {
    // One prosumer, one "day" of two hours carrying the two coordinates in
    // the load; PV and reactive stay zero.
    let n = points.len();
    InitialScenarioSet {
        e_load: points.iter().map(|p| vec![p.to_vec()]).collect(),
        e_reactive: vec![vec![vec![0.0; 2]]; n],
        e_pv: vec![vec![vec![0.0; 2]]; n],
        phi_load: vec![vec![vec![1.0; 2]]; n],
        phi_reactive: vec![vec![vec![1.0; 2]]; n],
        phi_pv: vec![vec![vec![1.0; 2]]; n],
        omega_big: omega.iter().map(|&w| vec![w, w]).collect(),
    }
}

#[test]
fn separated_pairs_are_clustered_together() {
    let set = hand_built(&[[0.0, 0.0], [10.0, 10.0], [0.2, 0.1], [10.1, 9.9]], &[0.1, 0.2, 0.3, 0.4]);
    let cfg = CaseConfig { n_initial_scenarios: 4, n_reduced_scenarios: 2, ..CaseConfig::default() };
    let red = reduce_kmeans(&set, &cfg).unwrap();
    assert_eq!(red.members, vec![vec![0, 2], vec![1, 3]]);
    let pts: Vec<Vec<f64>> = set.e_load.iter().map(|m| m[0].clone()).collect();
    let assign = [0, 1, 0, 1];
    assert!((sse(&pts, &assign, 2) - best_sse_bruteforce(&pts, 2)).abs() < 1e-12);
    for t in 0..2 {
        assert!((red.omega[0][t] - 0.4).abs() < 1e-15);
        assert!((red.omega[1][t] - 0.6).abs() < 1e-15);
    }
    assert!((red.e_load[0][0][0] - 0.1).abs() < 1e-15);
}

#[test]
fn reduction_to_all_scenarios_is_the_identity() {
    let set = hand_built(&[[0.0, 1.0], [3.0, 2.0], [5.0, 5.0]], &[0.2, 0.3, 0.5]);
    let cfg = CaseConfig { n_initial_scenarios: 3, n_reduced_scenarios: 3, ..CaseConfig::default() };
    let red = reduce_kmeans(&set, &cfg).unwrap();
    assert_eq!(red.members, vec![vec![0], vec![1], vec![2]]);
    for s in 0..3 {
        assert_eq!(red.e_load[s], set.e_load[s]);
        assert!((red.omega[s][0] - set.omega_big[s][0]).abs() < 1e-15);
    }
}

#[test]
fn one_cluster_is_the_plain_centroid() {
    let set = hand_built(&[[0.0, 1.0], [3.0, 2.0], [6.0, 0.0]], &[0.7, 0.2, 0.1]);
    let cfg = CaseConfig { n_initial_scenarios: 3, n_reduced_scenarios: 1, ..CaseConfig::default() };
    let red = reduce_kmeans(&set, &cfg).unwrap();
    assert_eq!(red.e_load[0][0], vec![3.0, 1.0]);
    assert_eq!(red.omega[0], vec![1.0, 1.0]);
}

#[test]
fn too_few_distinct_scenarios_is_an_error() {
    let set = hand_built(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]], &[0.3, 0.3, 0.4]);
    let cfg = CaseConfig { n_initial_scenarios: 3, n_reduced_scenarios: 3, ..CaseConfig::default() };
    assert!(reduce_kmeans(&set, &cfg).is_err());
}

#[test]
fn reduced_scenarios_are_reproducible() {
    let case = default_case();
    let cfg = CaseConfig { n_initial_scenarios: 50, n_reduced_scenarios: 10, ..case.cfg.clone() };
    let digest = || {
        let red = reduce_kmeans(&generate_initial(&case.traces, &cfg).unwrap(), &cfg).unwrap();
        let mut buf = Vec::new();
        red.write_csv(&case.traces.prosumer_ids, &mut buf).unwrap();
        red.write_omega_csv(&mut buf).unwrap();
        Sha256::digest(&buf)
    };
    assert_eq!(digest(), digest());
}

proptest! {
    #[test]
    fn probabilities_do_not_depend_on_mu_or_sigma(mu in -50.0f64..50.0, sigma in 1e-3f64..20.0) {
        let pdf = discretize_normal(mu, sigma);
        let oracle = closed_form_probs();
        prop_assert!((pdf.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..7 {
            prop_assert!((pdf.probs[i] - oracle[i]).abs() < 1e-12);
            prop_assert!(pdf.probs[i] > 0.0);
        }
        prop_assert_eq!(pdf.realizations[0], mu);
    }

    #[test]
    fn spin_lands_in_its_bin(probs in prop::collection::vec(0.01f64..1.0, 1..8), r in 0.0f64..1.0) {
        let wheel = RouletteWheel::new(&probs).unwrap();
        let i = wheel.spin(r).unwrap();
        let lo = if i == 0 { 0.0 } else { wheel.cumulative[i - 1] };
        prop_assert!(lo <= r && r < wheel.cumulative[i]);
    }

    #[test]
    fn reduced_probabilities_sum_to_one(seed in 0u64..1000, ns in 1usize..6) {
        let tr = traces_from(vec![(0..24).map(|t| 1.0 + t as f64 / 10.0).collect(); 3]);
        let cfg = CaseConfig { n_initial_scenarios: 12, n_reduced_scenarios: ns, rng_seed: seed, ..CaseConfig::default() };
        let init = generate_initial(&tr, &cfg).unwrap();
        let red = reduce_kmeans(&init, &cfg).unwrap();
        for t in 0..24 {
            prop_assert!(((0..init.len()).map(|m| init.omega_big[m][t]).sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(((0..ns).map(|s| red.omega[s][t]).sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let mut all: Vec<usize> = red.members.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..12).collect::<Vec<_>>());
    }
}

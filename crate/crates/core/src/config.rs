//! Case parameters, read from a flat `key = value` file.

use std::path::Path;

use ces_milp::{Branching, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CesError, Result};

/// Every tunable of a planning run. Absent keys take the values of the
/// reference study (a 7-node LV feeder with Li-ion storage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseConfig {
    /// Standard deviation as a fraction of the mean, for load, reactive load and PV.
    pub sigma_fraction: f64,
    pub n_initial_scenarios: usize,
    pub n_reduced_scenarios: usize,
    pub rng_seed: u64,

    pub p_max_kw: f64,
    pub e_min_kwh: f64,
    pub e_max_kwh: f64,
    pub mu_ch: f64,
    pub mu_dis: f64,
    /// SOC bounds as fractions of installed capacity.
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Allowed end-of-day SOC deviation from the initial level.
    pub theta_kwh: f64,

    pub v0: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub s_base_kva: f64,
    pub v_base_kv: f64,
    pub delta_t_hours: f64,

    pub discount_rate: f64,
    pub lifetime_years: f64,
    pub cost_per_kw: f64,
    pub cost_per_kwh: f64,

    pub eps1: f64,
    pub eps2: f64,
    /// Scales horizon operating costs to a year; `8760 / |T|` when unset.
    pub annualization_factor: Option<f64>,
    /// Nodes allowed to host the storage; every non-slack node when unset.
    pub candidate_nodes: Option<Vec<usize>>,

    /// Price multipliers of the above-grid and below-grid trading schemes.
    pub ets_high_delta: f64,
    pub ets_low_delta: f64,
    pub n_oos: usize,

    pub solver_rel_gap: f64,
    pub solver_node_limit: usize,
    pub solver_time_limit_s: Option<f64>,
    /// `most-fractional` or `pseudo-cost`.
    pub solver_branching: String,
    /// Warn when a model carries more binaries than this.
    pub binary_warn_threshold: usize,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            sigma_fraction: 0.02,
            n_initial_scenarios: 50,
            n_reduced_scenarios: 10,
            rng_seed: 2023,
            p_max_kw: 200.0,
            e_min_kwh: 50.0,
            e_max_kwh: 1000.0,
            mu_ch: 0.98,
            mu_dis: 0.98,
            sigma_lo: 0.05,
            sigma_hi: 1.0,
            theta_kwh: 0.0001,
            v0: 1.0,
            v_min: 0.95,
            v_max: 1.05,
            s_base_kva: 100.0,
            v_base_kv: 0.4,
            delta_t_hours: 1.0,
            discount_rate: 0.1,
            lifetime_years: 12.5,
            cost_per_kw: 463.0,
            cost_per_kwh: 795.0,
            eps1: 0.2,
            eps2: 0.2,
            annualization_factor: None,
            candidate_nodes: None,
            ets_high_delta: 1.5,
            ets_low_delta: 0.5,
            n_oos: 20,
            solver_rel_gap: 1e-6,
            solver_node_limit: 200_000,
            solver_time_limit_s: None,
            solver_branching: "most-fractional".into(),
            binary_warn_threshold: 600,
        }
    }
}

impl CaseConfig {
    /// Parses config text and applies `key=value` overrides on top of it.
    pub fn from_str_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid(format!("config: {e}")))?;
        for (k, v) in overrides {
            // Values are TOML literals; anything that does not parse is a string.
            let value = format!("x = {v}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("x"))
                .unwrap_or_else(|| toml::Value::String(v.clone()));
            table.insert(k.clone(), value);
        }
        let cfg: CaseConfig = table.try_into().map_err(|e: toml::de::Error| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(invalid(msg.to_string())) };
        check(self.mu_ch > 0.0 && self.mu_ch <= 1.0, "mu_ch must lie in (0, 1]")?;
        check(self.mu_dis > 0.0 && self.mu_dis <= 1.0, "mu_dis must lie in (0, 1]")?;
        check(
            self.sigma_lo >= 0.0 && self.sigma_lo < self.sigma_hi && self.sigma_hi <= 1.0,
            "soc bounds need 0 <= sigma_lo < sigma_hi <= 1",
        )?;
        check(self.e_min_kwh >= 0.0 && self.e_min_kwh <= self.e_max_kwh, "need 0 <= e_min_kwh <= e_max_kwh")?;
        check(self.p_max_kw >= 0.0, "p_max_kw must be non-negative")?;
        check(self.v_min < self.v0 && self.v0 < self.v_max && self.v_min > 0.0, "need 0 < v_min < v0 < v_max")?;
        check(self.eps1 >= 0.0 && self.eps2 >= 0.0, "eps1 and eps2 must be non-negative")?;
        check(self.theta_kwh > 0.0, "theta_kwh must be positive")?;
        check(self.sigma_fraction >= 0.0, "sigma_fraction must be non-negative")?;
        check(self.n_initial_scenarios >= 1, "n_initial_scenarios must be at least 1")?;
        check(
            self.n_reduced_scenarios >= 1 && self.n_reduced_scenarios <= self.n_initial_scenarios,
            "need 1 <= n_reduced_scenarios <= n_initial_scenarios",
        )?;
        check(self.discount_rate > 0.0 && self.lifetime_years > 0.0, "discount_rate and lifetime_years must be positive")?;
        check(self.cost_per_kw >= 0.0 && self.cost_per_kwh >= 0.0, "investment costs must be non-negative")?;
        check(self.delta_t_hours > 0.0 && self.s_base_kva > 0.0 && self.v_base_kv > 0.0, "delta_t_hours and bases must be positive")?;
        check(self.annualization_factor.map_or(true, |a| a > 0.0), "annualization_factor must be positive")?;
        check(self.solver_rel_gap > 0.0, "solver_rel_gap must be positive")?;
        check(self.n_oos >= 1, "n_oos must be at least 1")?;
        self.branching()?;
        Ok(())
    }

    /// Capital recovery factor `d(1+d)^τ / ((1+d)^τ - 1)`.
    pub fn annuity_factor(&self) -> f64 {
        annuity_factor(self.discount_rate, self.lifetime_years)
    }

    pub fn annualization(&self, horizon_hours: usize) -> f64 {
        self.annualization_factor.unwrap_or(8760.0 / horizon_hours as f64)
    }

    fn branching(&self) -> Result<Branching> {
        match self.solver_branching.as_str() {
            "most-fractional" => Ok(Branching::MostFractional),
            "pseudo-cost" => Ok(Branching::PseudoCost),
            other => Err(invalid(format!("unknown solver_branching `{other}`"))),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            rel_gap: self.solver_rel_gap,
            node_limit: self.solver_node_limit,
            time_limit: self.solver_time_limit_s,
            branching: self.branching().unwrap_or(Branching::MostFractional),
            priority_prefixes: vec!["A[".into(), "B[".into()],
            ..SolverOptions::default()
        }
    }
}

pub fn annuity_factor(d: f64, years: f64) -> f64 {
    let g = (1.0 + d).powf(years);
    d * g / (g - 1.0)
}

pub fn load_config(path: &Path) -> Result<CaseConfig> {
    load_config_with_overrides(path, &[])
}

pub fn load_config_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<CaseConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CesError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    CaseConfig::from_str_with_overrides(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = CaseConfig::from_str_with_overrides("", &[]).unwrap();
        assert_eq!(cfg, CaseConfig::default());
    }

    #[test]
    fn override_beats_file() {
        let cfg = CaseConfig::from_str_with_overrides(
            "eps1 = 0.3\nsolver_branching = \"pseudo-cost\"",
            &[("eps1".into(), "0.1".into()), ("candidate_nodes".into(), "[2, 3]".into())],
        )
        .unwrap();
        assert_eq!(cfg.eps1, 0.1);
        assert_eq!(cfg.candidate_nodes, Some(vec![2, 3]));
        assert_eq!(cfg.solver_options().branching, Branching::PseudoCost);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = CaseConfig::from_str_with_overrides("", &[("no_such_key".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("no_such_key"), "{err}");
    }

    #[test]
    fn inverted_soc_bounds_are_rejected() {
        let err = CaseConfig::from_str_with_overrides("sigma_lo = 0.5\nsigma_hi = 0.3", &[]).unwrap_err();
        assert!(err.to_string().contains("sigma_lo"));
    }
}

//! Stochastic multi-objective planning of community energy storage on a
//! radial low-voltage feeder.
//!
//! The pipeline samples load and PV scenarios ([`scenario`]), builds a MILP
//! over the feeder model ([`model`], [`feeder`]) for a trading scheme
//! ([`tariffs`]) and solves it in three ε-constrained stages ([`planner`]).

pub mod config;
pub mod error;
pub mod feeder;
pub mod model;
pub mod planner;
pub mod report;
pub mod scenario;
pub mod synth;
pub mod tariffs;
pub mod traces;

pub use config::{load_config, load_config_with_overrides, CaseConfig};
pub use error::{CesError, Result};
pub use feeder::{load_feeder, FeederGraph};
pub use planner::{out_of_sample, pareto_sweep, plan, run_all_ets, PlanningSolution};
pub use scenario::{ScenarioSet, generate_initial, reduce_kmeans};
pub use tariffs::{derive_ces_price, load_tariff, Ets, TariffSchedule};
pub use traces::{load_traces, ProsumerTraceSet};

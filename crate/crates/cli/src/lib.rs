//! `ces` command-line front end: one subcommand per pipeline stage, with
//! CSV and SVG outputs.

pub mod plot;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ces_core::model::{build, F_INV, F_OPC, F_OPP};
use ces_core::planner::{out_of_sample, plan_with_scenarios, prepare_scenarios, run_all_ets_with_scenarios, stage_problem};
use ces_core::report;
use ces_core::synth::{default_case, tiny_case, write_case};
use ces_core::{
    derive_ces_price, load_feeder, load_tariff, load_traces, pareto_sweep, CaseConfig, CesError, Ets, FeederGraph, ProsumerTraceSet,
};
use ces_milp::mps::write_mps_file;
use ces_milp::MilpError;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use log::info;
use thiserror::Error;

use crate::plot::{read_dispatch, render_dispatch_svg, PlotError};

/// Environment variable naming the configuration file used when `--config`
/// is absent.
pub const CONFIG_ENV: &str = "CES_CONFIG";

pub mod exit {
    pub const OK: i32 = 0;
    /// I/O failures and solver breakdowns.
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const INFEASIBLE: i32 = 5;
    pub const LIMIT: i32 = 6;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CesError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<MilpError> for CliError {
    fn from(e: MilpError) -> Self {
        CliError::Core(CesError::Solver(e))
    }
}

fn csv_code(e: &csv::Error) -> i32 {
    if e.is_io_error() {
        exit::INTERNAL
    } else {
        exit::PARSE
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                CesError::Parse { .. } => exit::PARSE,
                CesError::Csv(e) => csv_code(e),
                CesError::Validation(_) | CesError::Topology(_) | CesError::Reduction(_) => exit::VALIDATION,
                CesError::Infeasible { .. } => exit::INFEASIBLE,
                CesError::Limit { .. } => exit::LIMIT,
                CesError::Solver(MilpError::MpsParse { .. }) => exit::PARSE,
                CesError::Solver(MilpError::InvalidBounds { .. } | MilpError::BadRow { .. } | MilpError::UnknownObjective(_)) => {
                    exit::VALIDATION
                }
                CesError::Solver(_) | CesError::Io(_) => exit::INTERNAL,
            },
            CliError::Plot(PlotError::Csv(e)) => csv_code(e),
            CliError::Plot(_) => exit::VALIDATION,
            CliError::Io(_) => exit::INTERNAL,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ces", version, about = "Stochastic planning of community energy storage on a radial feeder")]
struct Cli {
    /// Case configuration (TOML). Defaults apply to keys it omits.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Overrides one configuration key, e.g. `--set eps1=0.1`. Repeatable;
    /// takes precedence over the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// More log output; repeat for debug messages.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    if k.trim().is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Args)]
struct CaseArgs {
    /// Prosumer traces CSV.
    #[arg(long)]
    traces: PathBuf,
    /// Feeder lines CSV.
    #[arg(long)]
    feeder: PathBuf,
    /// Prosumer-to-node CSV; `feeder_nodes.csv` next to the lines file when omitted.
    #[arg(long)]
    nodes: Option<PathBuf>,
    /// Grid price CSV.
    #[arg(long)]
    tariff: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Default,
    Tiny,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Samples and reduces scenarios; writes `scenarios.csv` and `omega.csv`.
    GenScenarios {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Plans one trading scheme; writes `solution.csv` and `dispatch.csv`.
    Plan {
        #[command(flatten)]
        case: CaseArgs,
        /// `avg` or `scaled:<delta>`.
        #[arg(long, default_value = "avg")]
        ets: Ets,
    },
    /// Plans the three schemes on one scenario set and compares them.
    RunAll {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Plans, then re-solves the operation on fresh scenarios.
    Oos {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value = "avg")]
        ets: Ets,
        /// Number of out-of-sample scenarios; the config value when omitted.
        #[arg(long)]
        n_oos: Option<usize>,
    },
    /// Solves every (eps1, eps2) pair of the given lists.
    Pareto {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value = "avg")]
        ets: Ets,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3")]
        eps1: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3")]
        eps2: Vec<f64>,
    },
    /// Writes the problem of one planning stage in MPS format. Stages 2 and 3
    /// need the earlier optima, so the plan is solved first.
    ExportMps {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        stage: u8,
        #[arg(long, default_value = "avg")]
        ets: Ets,
        /// MPS path; `<out>/stage<k>.mps` when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Renders one day of a dispatch CSV as SVG.
    Plot {
        #[arg(long)]
        dispatch: PathBuf,
        #[arg(long, default_value_t = 0)]
        day: usize,
        /// Keeps only rows of this scheme label (e.g. `ETS2`).
        #[arg(long)]
        ets: Option<String>,
        /// SVG path; `dispatch_day<d>.svg` next to the dispatch file when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Writes a synthetic case directory (traces, feeder, tariff, config).
    SynthCase {
        #[arg(long, value_enum, default_value = "default")]
        kind: SynthKind,
        #[arg(long, default_value = "case")]
        out: PathBuf,
    },
}

struct Case {
    cfg: CaseConfig,
    traces: ProsumerTraceSet,
    graph: FeederGraph,
    lambda_g: Vec<f64>,
    out: PathBuf,
}

fn load_cfg(path: Option<&Path>, overrides: &[(String, String)]) -> Result<CaseConfig> {
    Ok(match path {
        Some(p) => ces_core::load_config_with_overrides(p, overrides)?,
        None => CaseConfig::from_str_with_overrides("", overrides)?,
    })
}

fn load_case(cfg: CaseConfig, args: &CaseArgs) -> Result<Case> {
    let traces = load_traces(&args.traces, None)?;
    let nodes = args.nodes.clone().unwrap_or_else(|| args.feeder.with_file_name("feeder_nodes.csv"));
    let graph = load_feeder(&args.feeder, &nodes, cfg.s_base_kva, cfg.v_base_kv)?;
    let lambda_g = load_tariff(&args.tariff, traces.horizon_hours)?;
    std::fs::create_dir_all(&args.out)?;
    Ok(Case { cfg, traces, graph, lambda_g, out: args.out.clone() })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    info!("writing {}", path.display());
    Ok(BufWriter::new(File::create(path)?))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = || load_cfg(cli.config.as_deref(), &cli.overrides);
    match cli.command {
        Command::GenScenarios { ref traces, ref out } => {
            let cfg = cfg()?;
            let traces = load_traces(traces, None)?;
            std::fs::create_dir_all(out)?;
            let sc = prepare_scenarios(&traces, &cfg)?;
            sc.write_csv(&traces.prosumer_ids, create(&out.join("scenarios.csv"))?)?;
            sc.write_omega_csv(create(&out.join("omega.csv"))?)?;
            println!("{} scenarios over {} hours written to {}", sc.n_scenarios(), sc.horizon(), out.display());
        }
        Command::Plan { ref case, ets } => {
            let case = load_case(cfg()?, case)?;
            let tariff = derive_ces_price(&case.lambda_g, ets)?;
            let sc = prepare_scenarios(&case.traces, &case.cfg)?;
            let sol = plan_with_scenarios(&sc, &case.graph, &case.traces.prosumer_ids, &tariff, &case.cfg)?;
            let hosts = case.graph.bind_prosumers(&case.traces.prosumer_ids)?;
            report::write_solutions(std::slice::from_ref(&sol), create(&case.out.join("solution.csv"))?)?;
            report::write_dispatch(&sol, &sc, &hosts, create(&case.out.join("dispatch.csv"))?)?;
            print_plan(&sol);
        }
        Command::RunAll { ref case } => {
            let case = load_case(cfg()?, case)?;
            let sc = prepare_scenarios(&case.traces, &case.cfg)?;
            let ids = &case.traces.prosumer_ids;
            let cmp = run_all_ets_with_scenarios(&sc, &case.graph, ids, &case.lambda_g, &case.cfg)?;
            let hosts = case.graph.bind_prosumers(ids)?;
            report::write_solutions(&cmp.solutions, create(&case.out.join("solutions.csv"))?)?;
            report::write_equitability(&cmp, create(&case.out.join("equitability.csv"))?)?;
            report::write_baseline(&cmp.baseline, create(&case.out.join("baseline.csv"))?)?;
            for sol in &cmp.solutions {
                let path = case.out.join(format!("dispatch_{}.csv", sol.ets.label()));
                report::write_dispatch(sol, &sc, &hosts, create(&path)?)?;
                print_plan(sol);
            }
            println!("most equitable: {}", cmp.solutions[cmp.most_equitable].ets.label());
        }
        Command::Oos { ref case, ets, n_oos } => {
            let case = load_case(cfg()?, case)?;
            let tariff = derive_ces_price(&case.lambda_g, ets)?;
            let sc = prepare_scenarios(&case.traces, &case.cfg)?;
            let sol = plan_with_scenarios(&sc, &case.graph, &case.traces.prosumer_ids, &tariff, &case.cfg)?;
            let rep = out_of_sample(&sol, &case.traces, &case.graph, &tariff, &case.cfg, n_oos.unwrap_or(case.cfg.n_oos))?;
            report::write_solutions(std::slice::from_ref(&sol), create(&case.out.join("solution.csv"))?)?;
            report::write_oos(&rep, create(&case.out.join("oos.csv"))?)?;
            report::write_oos_summary(&rep, sol.objectives.f_opp, create(&case.out.join("oos_summary.csv"))?)?;
            print_plan(&sol);
            println!(
                "out-of-sample: {} scenarios, {} infeasible, average f_opP {:.2}, VSS {:.2}%",
                rep.n_oos, rep.n_infeasible, rep.avg_opp, rep.vss_percent
            );
        }
        Command::Pareto { ref case, ets, ref eps1, ref eps2 } => {
            let case = load_case(cfg()?, case)?;
            let tariff = derive_ces_price(&case.lambda_g, ets)?;
            let sc = prepare_scenarios(&case.traces, &case.cfg)?;
            let grid: Vec<(f64, f64)> = eps1.iter().flat_map(|&a| eps2.iter().map(move |&b| (a, b))).collect();
            let rep = pareto_sweep(&sc, &case.graph, &case.traces.prosumer_ids, &tariff, &case.cfg, &grid)?;
            report::write_pareto(&rep, create(&case.out.join("pareto.csv"))?)?;
            let failed = rep.points.iter().filter(|p| p.error.is_some()).count();
            println!("{} grid points, {failed} failed", rep.points.len());
        }
        Command::ExportMps { ref case, stage, ets, ref output } => {
            let case = load_case(cfg()?, case)?;
            let tariff = derive_ces_price(&case.lambda_g, ets)?;
            let sc = prepare_scenarios(&case.traces, &case.cfg)?;
            let ids = &case.traces.prosumer_ids;
            let model = build(&sc, &case.graph, ids, &tariff, &case.cfg)?;
            let stage = usize::from(stage);
            let rhs = if stage == 1 {
                [f64::INFINITY; 2]
            } else {
                plan_with_scenarios(&sc, &case.graph, ids, &tariff, &case.cfg)?.eps_rhs
            };
            let problem = stage_problem(&model, stage, rhs)?;
            let objective = [F_INV, F_OPC, F_OPP][stage - 1];
            let path = output.clone().unwrap_or_else(|| case.out.join(format!("stage{stage}.mps")));
            let names = write_mps_file(&problem, objective, &path)?;
            println!(
                "stage {stage}: {} rows, {} columns written to {} (names in {})",
                problem.rows.len(),
                problem.columns.len(),
                path.display(),
                names.display()
            );
        }
        Command::Plot { ref dispatch, day, ref ets, ref output } => {
            let mut rows = read_dispatch(File::open(dispatch)?)?;
            if let Some(label) = ets {
                rows.retain(|r| &r.ets == label);
            }
            let svg = render_dispatch_svg(&rows, day)?;
            let path = output.clone().unwrap_or_else(|| dispatch.with_file_name(format!("dispatch_day{day}.svg")));
            std::fs::write(&path, svg)?;
            println!("{}", path.display());
        }
        Command::SynthCase { kind, ref out } => {
            let case = match kind {
                SynthKind::Default => default_case(),
                SynthKind::Tiny => tiny_case(),
            };
            write_case(&case, out)?;
            println!("synthetic case written to {}", out.display());
        }
    }
    Ok(())
}

fn print_plan(sol: &ces_core::PlanningSolution) {
    println!(
        "{} ({}): node {}, {:.2} kWh, {:.2} kW; f_inv {:.2}, f_opC {:.2}, f_opP {:.2} AUD/yr",
        sol.ets.label(),
        sol.ets,
        sol.node,
        sol.capacity_kwh,
        sol.rated_kw,
        sol.objectives.f_inv,
        sol.objectives.f_opc,
        sol.objectives.f_opp
    );
}

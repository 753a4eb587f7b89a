use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, Matrix4};
use otrobust::controller::{build_schedule, linearize, lqr_gain, spectral_abscissa, GainSchedule, LqrWeights};
use otrobust::harness::{
    read_snapshots, run_case, run_scenario, with_workers, write_snapshots, ControllerKind, ScenarioConfig, Setup,
    DEG_SCALE,
};
use otrobust::liouville::EnsembleSnapshot;
use otrobust::model::{AeroTables, AircraftParams, Plant};
use otrobust::transport::{
    extended_wasserstein, wasserstein_dirac, wasserstein_lp, DiscreteDistribution, TransportOptions, DEFAULT_BUDGET,
};
use otrobust::trim::{default_grid, find_trim_with, lattice, trim_grid, TrimOptions, TrimPoint};
use otrobust::{Error, Result};

#[derive(Parser)]
#[command(
    name = "otrobust",
    version,
    about = "Controller robustness via density propagation and optimal transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PlantArgs {
    /// Aircraft parameter JSON (built-in F-16 values when absent).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Aerodynamic table JSON (built-in tables when absent).
    #[arg(long)]
    tables: Option<PathBuf>,
}

impl PlantArgs {
    fn plant(&self) -> Result<Plant<f64>> {
        let params = match &self.params {
            Some(p) => AircraftParams::load(p)?,
            None => AircraftParams::default(),
        };
        let tables = match &self.tables {
            Some(p) => AeroTables::load(p)?,
            None => AeroTables::stevens_lewis(),
        };
        Plant::new(params, tables)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    Lqr,
    Gslqr,
}

impl From<Controller> for ControllerKind {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Lqr => ControllerKind::Lqr,
            Controller::Gslqr => ControllerKind::Gslqr,
        }
    }
}

#[derive(clap::Args)]
struct PropagateArgs {
    #[arg(long, value_enum)]
    controller: Controller,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    tf: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    emit_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Delta (%) or Omega (rad/s); the scenario's first value when absent.
    #[arg(long)]
    sweep: Option<f64>,
    /// Write one long-format CSV instead of one file per time.
    #[arg(long)]
    long: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Trim at one flight condition; prints the trim point as JSON.
    Trim {
        #[arg(long = "V", allow_negative_numbers = true)]
        v: f64,
        #[arg(long, allow_negative_numbers = true)]
        alpha_deg: f64,
        #[command(flatten)]
        plant: PlantArgs,
    },
    /// Trim on a (V, alpha) lattice; writes a JSON array.
    TrimGrid {
        #[arg(long, default_value_t = 100.0)]
        v_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        v_max: f64,
        #[arg(long, default_value_t = 10)]
        nv: usize,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        alpha_min_deg: f64,
        #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
        alpha_max_deg: f64,
        #[arg(long, default_value_t = 10)]
        na: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        plant: PlantArgs,
    },
    /// LQR gain about a trim point; prints JSON.
    Gains {
        #[arg(long = "V", default_value_t = 407.8942)]
        v: f64,
        #[arg(long, default_value_t = 6.165, allow_negative_numbers = true)]
        alpha_deg: f64,
        /// Trim point JSON to linearize about instead of trimming at (V, alpha).
        #[arg(long)]
        trim: Option<PathBuf>,
        #[command(flatten)]
        plant: PlantArgs,
    },
    /// Build a gain schedule from trim-grid JSON.
    Schedule {
        /// Output of `trim-grid`; the default lattice is trimmed when absent.
        #[arg(long)]
        trims: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        plant: PlantArgs,
    },
    /// Propagate one case of a scenario and write snapshot CSVs.
    Propagate(PropagateArgs),
    /// W2 between snapshot CSVs, or to a trim point; writes `t,W` rows.
    Wasserstein {
        snapshots: PathBuf,
        /// Second snapshot CSV; times are paired in order.
        other: Option<PathBuf>,
        /// Trim point JSON used as a point-mass reference.
        #[arg(long)]
        dirac_at: Option<PathBuf>,
        /// Sparse `t,i,j,mass` plan export (two-cloud mode only).
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a full scenario: W.csv, snapshots/ and report.json under the output directory.
    Scenario {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn load_trim(path: &Path) -> Result<TrimPoint> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn gains(v: f64, alpha_deg: f64, trim: Option<&Path>, plant: &PlantArgs) -> Result<serde_json::Value> {
    let plant = plant.plant()?;
    let trim = match trim {
        Some(p) => load_trim(p)?,
        None => find_trim_with(&plant, v, alpha_deg.to_radians(), &TrimOptions::default())?,
    };
    let model = linearize(&plant, &trim.x_trim, &trim.u_trim)?;
    let k = lqr_gain(&model, &LqrWeights::default())?;
    let closed = model.a - model.b * k;
    let rows: Vec<Vec<f64>> = (0..2).map(|i| (0..4).map(|j| k[(i, j)]).collect()).collect();
    Ok(serde_json::json!({
        "trim": trim,
        "K": rows,
        "open_loop_abscissa": spectral_abscissa(&to_dynamic(&model.a)),
        "closed_loop_abscissa": spectral_abscissa(&to_dynamic(&closed)),
    }))
}

fn to_dynamic(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(4, 4, m.as_slice())
}

fn propagate_cmd(args: &PropagateArgs) -> Result<()> {
    let mut cfg = ScenarioConfig::load(&args.scenario)?;
    cfg.t_final = args.tf.unwrap_or(cfg.t_final);
    cfg.dt = args.dt.unwrap_or(cfg.dt);
    cfg.samples = args.samples.or(cfg.samples);
    cfg.emit_every = args.emit_every.or(cfg.emit_every);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    let controller = ControllerKind::from(args.controller);
    cfg.controllers = vec![controller];
    cfg.validate()?;
    let sweep = match args.sweep {
        Some(s) => s,
        None => cfg.sweep()[0],
    };
    let setup = Setup::new(&cfg)?;
    let run = run_case(&cfg, &setup, controller, sweep, true)?;
    fs::create_dir_all(&args.out)?;
    write_snapshots(
        &args.out,
        &format!("{}_{}", controller.name(), sweep),
        &run.snapshots,
        args.long,
    )?;
    log::info!("{} scalar ODE steps", run.scalar_ode_steps);
    Ok(())
}

fn extended_scale(snap: &EnsembleSnapshot<f64>) -> Vec<f64> {
    let p = snap.samples.first().map_or(0, |s| s.p.len());
    DEG_SCALE.iter().copied().chain(std::iter::repeat_n(1.0, p)).collect()
}

fn extended_distribution(snap: &EnsembleSnapshot<f64>) -> Result<DiscreteDistribution<f64>> {
    DiscreteDistribution::new(
        snap.samples.iter().map(|s| s.extended()).collect(),
        snap.samples.iter().map(|s| s.gamma).collect(),
    )
}

fn wasserstein_cmd(
    first: &Path,
    other: Option<&Path>,
    dirac_at: Option<&Path>,
    plan: Option<&Path>,
    budget: usize,
    out: Option<&Path>,
) -> Result<()> {
    let a = read_snapshots(first)?;
    let mut rows = csv::Writer::from_writer(Vec::new());
    rows.write_record(["t", "W"])?;
    match (other, dirac_at) {
        (Some(b_path), None) => {
            let b = read_snapshots(b_path)?;
            if a.len() != b.len() {
                return Err(Error::Dimension(format!(
                    "{} snapshot times versus {}",
                    a.len(),
                    b.len()
                )));
            }
            let mut plan_rows = match plan {
                Some(p) => {
                    let mut w = csv::Writer::from_path(p)?;
                    w.write_record(["t", "i", "j", "mass"])?;
                    Some(w)
                }
                None => None,
            };
            for (sa, sb) in a.iter().zip(&b) {
                let opts = TransportOptions {
                    scale: Some(extended_scale(sa)),
                    budget,
                };
                let result = wasserstein_lp(&extended_distribution(sa)?, &extended_distribution(sb)?, &opts)?;
                rows.write_record([sa.t.to_string(), result.w.to_string()])?;
                if let Some(w) = plan_rows.as_mut() {
                    for (i, j, m) in &result.entries {
                        w.write_record([sa.t.to_string(), i.to_string(), j.to_string(), m.to_string()])?;
                    }
                }
            }
            if let Some(mut w) = plan_rows {
                w.flush()?;
            }
        }
        (None, Some(trim_path)) => {
            if plan.is_some() {
                return Err(Error::Config("--plan needs a second snapshot file".into()));
            }
            let x_ref = load_trim(trim_path)?.x_trim.to_array();
            for snap in &a {
                let w = if snap.samples.iter().any(|s| !s.p.is_empty()) {
                    extended_wasserstein(snap, &x_ref, Some(&DEG_SCALE), budget)?.w
                } else {
                    wasserstein_dirac(snap, &x_ref, Some(&DEG_SCALE))?
                };
                rows.write_record([snap.t.to_string(), w.to_string()])?;
            }
        }
        _ => return Err(Error::Config("give either a second snapshot file or --dirac-at".into())),
    }
    let bytes = rows.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let text = String::from_utf8(bytes).expect("csv output is UTF-8");
    emit(out, text.trim_end())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Trim { v, alpha_deg, plant } => {
            let trim = find_trim_with(&plant.plant()?, v, alpha_deg.to_radians(), &TrimOptions::default())?;
            emit(None, &serde_json::to_string_pretty(&trim)?)
        }
        Command::TrimGrid {
            v_min,
            v_max,
            nv,
            alpha_min_deg,
            alpha_max_deg,
            na,
            out,
            plant,
        } => {
            if nv < 2 || na < 2 {
                return Err(Error::Config("the lattice needs at least two values per axis".into()));
            }
            let nodes = lattice(v_min, v_max, nv, alpha_min_deg, alpha_max_deg, na);
            let trims = with_workers(|| trim_grid(&nodes, &plant.plant()?, &TrimOptions::default()))??;
            emit(out.as_deref(), &serde_json::to_string_pretty(&trims)?)
        }
        Command::Gains {
            v,
            alpha_deg,
            trim,
            plant,
        } => emit(
            None,
            &serde_json::to_string_pretty(&gains(v, alpha_deg, trim.as_deref(), &plant)?)?,
        ),
        Command::Schedule { trims, out, plant } => {
            let plant = plant.plant()?;
            let trims: Vec<TrimPoint> = match trims {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => with_workers(|| trim_grid(&default_grid(), &plant, &TrimOptions::default()))??,
            };
            let schedule: GainSchedule = with_workers(|| build_schedule(&trims, &LqrWeights::default(), &plant))??;
            schedule.save(out)
        }
        Command::Propagate(args) => with_workers(|| propagate_cmd(&args))?,
        Command::Wasserstein {
            snapshots,
            other,
            dirac_at,
            plan,
            budget,
            out,
        } => with_workers(|| {
            wasserstein_cmd(
                &snapshots,
                other.as_deref(),
                dirac_at.as_deref(),
                plan.as_deref(),
                budget,
                out.as_deref(),
            )
        })?,
        Command::Scenario { config, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            if cfg.output_dir.is_none() {
                return Err(Error::Config(
                    "no output directory: set output_dir or pass --out".into(),
                ));
            }
            let report = with_workers(|| run_scenario(&cfg))??;
            log::info!("report hash {}", report.content_hash);
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidInput(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Io(_)
        | Error::Dimension(_)
        | Error::Tables(_)
        | Error::UnknownCoefficient(_)
        | Error::BudgetExceeded { .. }
        | Error::MassImbalance(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

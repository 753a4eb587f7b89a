use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::analysis::{marginal_histogram, Histogram};
use super::config::{ControllerKind, ScenarioConfig, ScenarioKind};
use super::scenario::{run_case, Setup, DEG_SCALE};
use crate::error::{Error, Result};
use crate::liouville::{likelihood_extremes, EnsembleSnapshot, LikelihoodExtremes};
use crate::transport::{extended_wasserstein, wasserstein_dirac, DEFAULT_BUDGET};
use crate::trim::TrimPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHistograms {
    pub t: f64,
    /// One histogram per extended-state axis, state axes in deg, ft/s, deg, deg/s.
    pub axes: Vec<Histogram>,
}

/// Trajectories (deg, ft/s, deg, deg/s) of the most and least likely samples at the final time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremeTrajectories {
    pub max_id: usize,
    pub min_id: usize,
    pub max: Vec<[f64; 4]>,
    pub min: Vec<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub controller: ControllerKind,
    /// `Δ` (%) for param runs, `Ω` (rad/s) for disturbance runs, 0 otherwise.
    pub sweep: f64,
    pub t: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub diverged: Vec<usize>,
    pub samples: usize,
    pub scalar_ode_steps: u64,
    pub extremes: Vec<LikelihoodExtremes<f64>>,
    pub extreme_trajectories: ExtremeTrajectories,
    pub histograms: Vec<SnapshotHistograms>,
}

/// `W_LQR − W_gsLQR` for one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Difference {
    pub sweep: f64,
    pub t: Vec<f64>,
    pub lqr_minus_gslqr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub reference_trim: TrimPoint,
    pub series: Vec<Series>,
    pub differences: Vec<Difference>,
    /// SHA-256 of the report serialized with this field empty.
    pub content_hash: String,
}

impl RunReport {
    pub fn series(&self, controller: ControllerKind, sweep: f64) -> Option<&Series> {
        self.series
            .iter()
            .find(|s| s.controller == controller && s.sweep == sweep)
    }

    pub fn compute_hash(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.content_hash.clear();
        let bytes = serde_json::to_vec(&copy)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Snapshot in reporting units (deg, ft/s, deg, deg/s; parameters unchanged).
fn to_degrees(snap: &EnsembleSnapshot<f64>) -> EnsembleSnapshot<f64> {
    let mut s = snap.clone();
    for sample in &mut s.samples {
        for (v, f) in sample.x.iter_mut().zip(DEG_SCALE) {
            *v *= f;
        }
    }
    s
}

/// `W(t)` of one snapshot against the reference trim, in reporting units.
pub fn snapshot_distance(kind: ScenarioKind, snap: &EnsembleSnapshot<f64>, x_trim: &[f64; 4]) -> Result<f64> {
    match kind {
        ScenarioKind::Param => Ok(extended_wasserstein(snap, x_trim, Some(&DEG_SCALE), DEFAULT_BUDGET)?.w),
        _ => wasserstein_dirac(snap, x_trim, Some(&DEG_SCALE)),
    }
}

fn build_series(
    cfg: &ScenarioConfig,
    setup: &Setup,
    controller: ControllerKind,
    sweep: f64,
    out: Option<&Path>,
) -> Result<Series> {
    let run = run_case(cfg, setup, controller, sweep, true)?;
    let x_trim = setup.reference.x_trim.to_array();
    let mut series = Series {
        controller,
        sweep,
        t: Vec::new(),
        w: Vec::new(),
        diverged: Vec::new(),
        samples: run.snapshots[0].samples.len(),
        scalar_ode_steps: run.scalar_ode_steps,
        extremes: likelihood_extremes(&run.snapshots)?,
        extreme_trajectories: ExtremeTrajectories {
            max_id: 0,
            min_id: 0,
            max: Vec::new(),
            min: Vec::new(),
        },
        histograms: Vec::new(),
    };
    let last = *series.extremes.last().expect("at least one snapshot");
    series.extreme_trajectories.max_id = last.max_id;
    series.extreme_trajectories.min_id = last.min_id;
    let dims = run.snapshots[0].samples[0].x.len() + run.snapshots[0].samples[0].p.len();
    for snap in &run.snapshots {
        series.t.push(snap.t);
        series.w.push(snapshot_distance(cfg.kind, snap, &x_trim)?);
        series.diverged.push(snap.diverged_count());
        let deg = to_degrees(snap);
        let axes = (0..dims)
            .map(|a| marginal_histogram(&deg, a, cfg.histogram_bins))
            .collect::<Result<Vec<_>>>()?;
        series.histograms.push(SnapshotHistograms { t: snap.t, axes });
        let row = |id: usize| -> [f64; 4] { std::array::from_fn(|k| deg.samples[id].x[k]) };
        series.extreme_trajectories.max.push(row(last.max_id));
        series.extreme_trajectories.min.push(row(last.min_id));
    }
    if let Some(dir) = out {
        if cfg.write_snapshots {
            write_snapshots(
                dir,
                &format!("{}_{}", controller.name(), sweep),
                &run.snapshots,
                cfg.long_format,
            )?;
        }
    }
    Ok(series)
}

/// Run every (controller, sweep) case of the scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    run_scenario_with(cfg, &setup)
}

pub fn run_scenario_with(cfg: &ScenarioConfig, setup: &Setup) -> Result<RunReport> {
    let out = cfg.output_dir.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir.join("snapshots"))?;
    }
    let mut series = Vec::new();
    for &controller in &cfg.controllers {
        for sweep in cfg.sweep() {
            log::info!("running {:?} {} sweep {}", cfg.kind, controller.name(), sweep);
            series.push(build_series(cfg, setup, controller, sweep, out)?);
        }
    }
    let mut differences = Vec::new();
    for sweep in cfg.sweep() {
        let find = |c| series.iter().find(|s: &&Series| s.controller == c && s.sweep == sweep);
        if let (Some(a), Some(b)) = (find(ControllerKind::Lqr), find(ControllerKind::Gslqr)) {
            differences.push(Difference {
                sweep,
                t: a.t.clone(),
                lqr_minus_gslqr: a.w.iter().zip(&b.w).map(|(x, y)| x - y).collect(),
            });
        }
    }
    let mut report = RunReport {
        config: cfg.clone(),
        reference_trim: setup.reference,
        series,
        differences,
        content_hash: String::new(),
    };
    report.content_hash = report.compute_hash()?;
    if let Some(dir) = out {
        write_w_csv(&dir.join("W.csv"), &report)?;
        let f = fs::File::create(dir.join("report.json"))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &report)?;
    }
    Ok(report)
}

fn expect_kind(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "expected a {kind:?} scenario, got {:?}",
            cfg.kind
        )));
    }
    Ok(())
}

pub fn run_ic_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    expect_kind(cfg, ScenarioKind::Ic)?;
    run_scenario(cfg)
}

pub fn run_param_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    expect_kind(cfg, ScenarioKind::Param)?;
    run_scenario(cfg)
}

pub fn run_disturbance_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    expect_kind(cfg, ScenarioKind::Disturbance)?;
    run_scenario(cfg)
}

/// `t,sweep,controller,W` rows; the difference series uses controller `lqr-gslqr`.
pub fn write_w_csv(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "sweep", "controller", "W"])?;
    for s in &report.series {
        for (t, v) in s.t.iter().zip(&s.w) {
            w.write_record([
                t.to_string(),
                s.sweep.to_string(),
                s.controller.name().to_string(),
                v.to_string(),
            ])?;
        }
    }
    for d in &report.differences {
        for (t, v) in d.t.iter().zip(&d.lqr_minus_gslqr) {
            w.write_record([
                t.to_string(),
                d.sweep.to_string(),
                "lqr-gslqr".to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn snapshot_header(params: bool) -> Vec<&'static str> {
    let mut h = vec!["t", "id", "theta_deg", "V", "alpha_deg", "q_dps"];
    if params {
        h.extend(["m", "xcg", "Jyy"]);
    }
    h.extend(["phi", "gamma", "diverged"]);
    h
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, snap: &EnsembleSnapshot<f64>) -> Result<()> {
    for (id, s) in snap.samples.iter().enumerate() {
        let mut row = vec![snap.t.to_string(), id.to_string()];
        row.extend(s.x.iter().zip(DEG_SCALE).map(|(v, f)| (v * f).to_string()));
        row.extend(s.p.iter().map(|v| v.to_string()));
        row.push(s.phi().to_string());
        row.push(s.gamma.to_string());
        row.push(u8::from(s.diverged).to_string());
        w.write_record(&row)?;
    }
    Ok(())
}

/// Snapshot CSVs under `dir/snapshots/`: one per time, or one long file with `long`.
pub fn write_snapshots(dir: &Path, stem: &str, snapshots: &[EnsembleSnapshot<f64>], long: bool) -> Result<()> {
    let sub = dir.join("snapshots");
    fs::create_dir_all(&sub)?;
    let params = snapshots
        .first()
        .is_some_and(|s| s.samples.first().is_some_and(|x| !x.p.is_empty()));
    if long {
        let mut w = csv::Writer::from_path(sub.join(format!("{stem}.csv")))?;
        w.write_record(snapshot_header(params))?;
        for snap in snapshots {
            write_rows(&mut w, snap)?;
        }
        w.flush()?;
    } else {
        for snap in snapshots {
            let mut w = csv::Writer::from_path(sub.join(format!("{stem}_t{:09.3}.csv", snap.t)))?;
            w.write_record(snapshot_header(params))?;
            write_rows(&mut w, snap)?;
            w.flush()?;
        }
    }
    Ok(())
}

/// Read snapshot CSVs back (states converted to internal units), grouped by time.
pub fn read_snapshots(path: &Path) -> Result<Vec<EnsembleSnapshot<f64>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need =
        |name: &str| col(name).ok_or_else(|| Error::Config(format!("{}: missing column `{name}`", path.display())));
    let (ct, cphi, cgamma) = (need("t")?, need("phi")?, need("gamma")?);
    let cx = [need("theta_deg")?, need("V")?, need("alpha_deg")?, need("q_dps")?];
    let cp: Vec<usize> = ["m", "xcg", "Jyy"].iter().filter_map(|n| col(n)).collect();
    let cdiv = col("diverged");
    let mut out: Vec<EnsembleSnapshot<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad number `{}`: {e}", path.display(), &rec[k])))
        };
        let t = num(ct)?;
        let x = (0..4)
            .map(|k| Ok(num(cx[k])? / DEG_SCALE[k]))
            .collect::<Result<Vec<f64>>>()?;
        let p = cp.iter().map(|&k| num(k)).collect::<Result<Vec<f64>>>()?;
        let mut s = crate::liouville::WeightedSample::new(x, p, num(cphi)?, num(cgamma)?);
        s.diverged = cdiv.is_some_and(|k| &rec[k] == "1" || rec[k].eq_ignore_ascii_case("true"));
        match out.last_mut() {
            Some(snap) if snap.t == t => snap.samples.push(s),
            _ => out.push(EnsembleSnapshot {
                t,
                samples: vec![s],
                meta: Default::default(),
            }),
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: no snapshot rows", path.display())));
    }
    Ok(out)
}

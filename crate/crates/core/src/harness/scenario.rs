use serde::{Deserialize, Serialize};

use super::config::{ControllerKind, GsOffsets, Sampler, ScenarioConfig, ScenarioKind};
use crate::controller::{
    build_schedule, linearize, lqr_gain, GainSchedule, LinearModel, LqrLaw, LqrWeights, ScheduledLaw, TrimOffsets,
};
use crate::error::{Error, Result};
use crate::liouville::{
    propagate, propagate_states, EnsembleSnapshot, PropagateOptions, Propagation, SnapshotMeta, WeightedSample,
};
use crate::model::{
    AeroTables, AircraftParams, ClosedLoop, ControlLaw, Disturbance, NoDisturbance, Plant, SineDisturbance,
};
use crate::sampling::{halton, mcmc_sample, uniform_masses, BoxDomain, UniformBox};
use crate::scalar::compensated_sum;
use crate::trim::{default_grid, find_trim_with, trim_grid, TrimOptions, TrimPoint};

/// Per-coordinate factors converting `(rad, ft/s, rad, rad/s)` to `(deg, ft/s, deg, deg/s)`.
pub const DEG_SCALE: [f64; 4] = [
    180.0 / std::f64::consts::PI,
    1.0,
    180.0 / std::f64::consts::PI,
    180.0 / std::f64::consts::PI,
];

/// Plant, reference trim and controllers shared by every run of a scenario.
pub struct Setup {
    pub plant: Plant<f64>,
    pub reference: TrimPoint,
    pub model: LinearModel,
    pub lqr: LqrLaw,
    pub schedule: Option<GainSchedule>,
}

impl Setup {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let params = match &cfg.params_file {
            Some(p) => AircraftParams::load(p)?,
            None => AircraftParams::default(),
        };
        let tables = match &cfg.tables_file {
            Some(p) => AeroTables::load(p)?,
            None => AeroTables::stevens_lewis(),
        };
        let plant = Plant::new(params, tables)?;
        let opts = TrimOptions::default();
        let reference = find_trim_with(&plant, cfg.trim.v, cfg.trim.alpha_deg.to_radians(), &opts)?;
        if !reference.converged {
            return Err(Error::Numerical(format!(
                "reference trim at V = {}, alpha = {} deg did not converge ({:?})",
                cfg.trim.v, cfg.trim.alpha_deg, reference.status
            )));
        }
        let model = linearize(&plant, &reference.x_trim, &reference.u_trim)?;
        let weights = LqrWeights::default();
        let k = lqr_gain(&model, &weights)?;
        let lqr = LqrLaw::new(&k, reference);
        let schedule = if cfg.controllers.contains(&ControllerKind::Gslqr) {
            let s = match &cfg.schedule_file {
                Some(p) => GainSchedule::load(p)?,
                None => build_schedule(&trim_grid(&default_grid(), &plant, &opts)?, &weights, &plant)?,
            };
            Some(match cfg.gs_offsets {
                GsOffsets::Nominal => s.with_offsets(TrimOffsets::Nominal { reference }),
                GsOffsets::Interpolated => s,
            })
        } else {
            None
        };
        Ok(Self {
            plant,
            reference,
            model,
            lqr,
            schedule,
        })
    }

    pub fn law(&self, c: ControllerKind) -> Result<Box<dyn ControlLaw<f64>>> {
        Ok(match c {
            ControllerKind::Lqr => Box::new(self.lqr.clone()),
            ControllerKind::Gslqr => Box::new(ScheduledLaw::new(
                self.schedule
                    .clone()
                    .ok_or_else(|| Error::Config("gain schedule was not built".into()))?,
            )),
        })
    }
}

/// Initial cloud for one sweep value: a box in the state (IC and disturbance
/// runs) or in the parameters around a deterministic state (param runs).
pub fn initial_cloud(cfg: &ScenarioConfig, setup: &Setup, sweep: f64) -> Result<EnsembleSnapshot<f64>> {
    let x_trim = setup.reference.x_trim.to_array();
    let (center, lower, upper, state_dim): (Vec<f64>, Vec<f64>, Vec<f64>, usize) = match cfg.kind {
        ScenarioKind::Ic | ScenarioKind::Disturbance => {
            let (lo, hi) = cfg.ic_box().offsets();
            (
                x_trim.to_vec(),
                (0..4).map(|k| x_trim[k] + lo[k]).collect(),
                (0..4).map(|k| x_trim[k] + hi[k]).collect(),
                4,
            )
        }
        ScenarioKind::Param => {
            let pert = cfg.x_pert.unwrap_or_default().offsets();
            let p0 = setup.plant.params().uncertain_vector();
            let f = sweep / 100.0;
            let mut c: Vec<f64> = (0..4).map(|k| x_trim[k] + pert[k]).collect();
            c.extend(p0);
            let lo = c
                .iter()
                .enumerate()
                .map(|(k, &v)| if k < 4 { v } else { v * (1.0 - f) })
                .collect();
            let hi = c
                .iter()
                .enumerate()
                .map(|(k, &v)| if k < 4 { v } else { v * (1.0 + f) })
                .collect();
            (c, lo, hi, 4)
        }
    };
    // Zero-width coordinates are held fixed; the box density lives on the others.
    let free: Vec<usize> = (0..center.len()).filter(|&k| upper[k] > lower[k]).collect();
    let meta = SnapshotMeta {
        scenario: format!("{:?}", cfg.kind).to_lowercase(),
        ..SnapshotMeta::default()
    };
    if free.is_empty() {
        let point = lower.clone();
        let sample = WeightedSample::new(point[..state_dim].to_vec(), point[state_dim..].to_vec(), 1.0, 1.0);
        return EnsembleSnapshot::new(0.0, vec![sample], meta);
    }
    let domain = BoxDomain::new(
        free.iter().map(|&k| lower[k]).collect(),
        free.iter().map(|&k| upper[k]).collect(),
    )?;
    let pdf = UniformBox::new(domain.clone());
    let n = cfg.sample_count();
    let reduced = match cfg.sampler {
        Sampler::Halton => halton(n, &domain, cfg.halton_skip)?,
        Sampler::Mcmc => mcmc_sample(&pdf, n, cfg.seed)?,
    };
    let gammas = uniform_masses::<f64>(reduced.len());
    let mut samples = Vec::with_capacity(reduced.len());
    for (r, g) in reduced.iter().zip(gammas) {
        let mut full = lower.clone();
        for (slot, &k) in free.iter().enumerate() {
            full[k] = r[slot];
        }
        let phi = crate::sampling::InitialPdf::density(&pdf, r);
        if !(phi > 0.0) {
            return Err(Error::Numerical("initial sample off its own support".into()));
        }
        samples.push(WeightedSample::new(
            full[..state_dim].to_vec(),
            full[state_dim..].to_vec(),
            phi,
            g,
        ));
    }
    debug_assert_eq!(compensated_sum(samples.iter().map(|s| s.gamma)), 1.0);
    EnsembleSnapshot::new(0.0, samples, meta)
}

fn disturbance_for(cfg: &ScenarioConfig, sweep: f64) -> Box<dyn Disturbance<f64>> {
    match cfg.kind {
        ScenarioKind::Disturbance => Box::new(SineDisturbance::from_degrees(cfg.disturbance_amplitude_deg, sweep)),
        _ => Box::new(NoDisturbance),
    }
}

pub fn propagate_options(cfg: &ScenarioConfig) -> PropagateOptions<f64> {
    PropagateOptions {
        t_final: cfg.t_final,
        dt: cfg.dt,
        emit_every: cfg.emit_steps(),
        strict_rk4: cfg.strict_rk4,
    }
}

/// Propagate one (controller, sweep) case, with or without the density ODE.
pub fn run_case(
    cfg: &ScenarioConfig,
    setup: &Setup,
    controller: ControllerKind,
    sweep: f64,
    with_density: bool,
) -> Result<Propagation<f64>> {
    let law = setup.law(controller)?;
    let disturbance = disturbance_for(cfg, sweep);
    let mut field = ClosedLoop::new(&setup.plant, law.as_ref(), disturbance.as_ref());
    if cfg.kind == ScenarioKind::Param {
        field = field.with_uncertain_params();
    }
    let mut cloud = initial_cloud(cfg, setup, sweep)?;
    cloud.meta.controller = controller.name().to_string();
    let opts = propagate_options(cfg);
    if with_density {
        propagate(&cloud, &field, &opts)
    } else {
        propagate_states(&cloud, &field, &opts)
    }
}

/// Plain trajectory ensemble: errors `x(t) − x_trim` in deg, ft/s, deg, deg/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McBundle {
    pub controller: ControllerKind,
    pub sweep: f64,
    pub t: Vec<f64>,
    /// `errors[time][sample]`.
    pub errors: Vec<Vec<[f64; 4]>>,
    /// Equal-weight sample mean of the state (internal units) per time.
    pub mean_state: Vec<Vec<f64>>,
    /// 5 %, 50 % and 95 % quantiles of the errors per time.
    pub quantiles: Vec<[[f64; 4]; 3]>,
    pub diverged: Vec<usize>,
    pub snapshots: Vec<EnsembleSnapshot<f64>>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Monte Carlo ensemble of the scenario's cases (no density ODE).
pub fn mc_compare(cfg: &ScenarioConfig) -> Result<Vec<McBundle>> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    mc_compare_with(cfg, &setup)
}

pub fn mc_compare_with(cfg: &ScenarioConfig, setup: &Setup) -> Result<Vec<McBundle>> {
    let x_trim = setup.reference.x_trim.to_array();
    let mut out = Vec::new();
    for &controller in &cfg.controllers {
        for sweep in cfg.sweep() {
            let run = run_case(cfg, setup, controller, sweep, false)?;
            let mut bundle = McBundle {
                controller,
                sweep,
                t: Vec::new(),
                errors: Vec::new(),
                mean_state: Vec::new(),
                quantiles: Vec::new(),
                diverged: Vec::new(),
                snapshots: Vec::new(),
            };
            for snap in &run.snapshots {
                let errs: Vec<[f64; 4]> = snap
                    .samples
                    .iter()
                    .map(|s| std::array::from_fn(|k| (s.x[k] - x_trim[k]) * DEG_SCALE[k]))
                    .collect();
                let weights = uniform_masses::<f64>(snap.samples.len());
                let mean = (0..4)
                    .map(|k| compensated_sum(snap.samples.iter().zip(&weights).map(|(s, w)| w * s.x[k])))
                    .collect();
                let q = [0.05, 0.5, 0.95].map(|level| {
                    std::array::from_fn(|k| {
                        let mut col: Vec<f64> = errs.iter().map(|e| e[k]).collect();
                        col.sort_by(f64::total_cmp);
                        quantile(&col, level)
                    })
                });
                bundle.t.push(snap.t);
                bundle.errors.push(errs);
                bundle.mean_state.push(mean);
                bundle.quantiles.push(q);
                bundle.diverged.push(snap.diverged_count());
            }
            bundle.snapshots = run.snapshots;
            out.push(bundle);
        }
    }
    Ok(out)
}

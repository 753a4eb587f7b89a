//! Density propagation along closed-loop characteristics.
//!
//! Each sample carries its extended state and `ln φ`; both are advanced with a
//! fixed-step RK4 scheme, the log-density obeying `d(ln φ)/dt = −∇·f`.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LongitudinalState;
use crate::sampling::InitialPdf;
use crate::scalar::{compensated_sum, Real};

/// Right-hand side `ẋ = f(t, x, p)` with constant parameters `p`.
pub trait VectorField<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn params_dim(&self) -> usize {
        0
    }

    fn eval(&self, t: T, x: &[T], p: &[T], dx: &mut [T]) -> Result<()>;
}

/// Parameter-free field from a closure `f(t, x, dx)`.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Real, F: Fn(T, &[T], &mut [T]) + Sync> VectorField<T> for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: T, x: &[T], _p: &[T], dx: &mut [T]) -> Result<()> {
        (self.f)(t, x, dx);
        Ok(())
    }
}

/// Trace of the central-difference Jacobian of the state block.
pub fn divergence<T: Real>(field: &dyn VectorField<T>, x: &[T], p: &[T], t: T) -> Result<T> {
    let n = field.dim();
    let mut xs = x.to_vec();
    let mut fp = vec![T::zero(); n];
    let mut fm = vec![T::zero(); n];
    let base = T::epsilon().cbrt();
    let mut acc = T::zero();
    for j in 0..n {
        let h = base * x[j].abs().max(T::one());
        xs[j] = x[j] + h;
        field.eval(t, &xs, p, &mut fp)?;
        xs[j] = x[j] - h;
        field.eval(t, &xs, p, &mut fm)?;
        xs[j] = x[j];
        let d = (fp[j] - fm[j]) / (h + h);
        if !d.is_finite() {
            return Err(Error::Numerical(format!("non-finite Jacobian diagonal entry {j}")));
        }
        acc = acc + d;
    }
    Ok(acc)
}

/// One characteristic: extended state, log-density and transport mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample<T> {
    pub x: Vec<T>,
    pub p: Vec<T>,
    pub log_phi: T,
    pub gamma: T,
    pub diverged: bool,
}

impl<T: Real> WeightedSample<T> {
    pub fn new(x: Vec<T>, p: Vec<T>, phi: T, gamma: T) -> Self {
        Self {
            x,
            p,
            log_phi: phi.ln(),
            gamma,
            diverged: false,
        }
    }

    pub fn phi(&self) -> T {
        self.log_phi.exp()
    }

    /// Flight state view; `None` unless the state block has four entries.
    pub fn state(&self) -> Option<LongitudinalState<T>> {
        (self.x.len() == 4).then(|| LongitudinalState::new(self.x[0], self.x[1], self.x[2], self.x[3]))
    }

    /// `[x, p]`.
    pub fn extended(&self) -> Vec<T> {
        self.x.iter().chain(&self.p).copied().collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub scenario: String,
    pub controller: String,
    pub integrator: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSnapshot<T> {
    pub t: T,
    pub samples: Vec<WeightedSample<T>>,
    pub meta: SnapshotMeta,
}

impl<T: Real> EnsembleSnapshot<T> {
    pub fn new(t: T, samples: Vec<WeightedSample<T>>, meta: SnapshotMeta) -> Result<Self> {
        let s = Self { t, samples, meta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.samples.first() else {
            return Err(Error::InvalidInput("empty ensemble".into()));
        };
        let (nx, np) = (first.x.len(), first.p.len());
        if self.samples.iter().any(|s| s.x.len() != nx || s.p.len() != np) {
            return Err(Error::Dimension("samples differ in dimension".into()));
        }
        if self.samples.iter().any(|s| !(s.gamma >= T::zero())) {
            return Err(Error::InvalidInput("negative transport mass".into()));
        }
        let total = self.total_mass();
        if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(self.samples.len() as f64)) {
            return Err(Error::MassImbalance(total.as_f64()));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> T {
        compensated_sum(self.samples.iter().map(|s| s.gamma))
    }

    pub fn diverged_count(&self) -> usize {
        self.samples.iter().filter(|s| s.diverged).count()
    }

    /// Mass-weighted mean of the state block.
    pub fn mean_state(&self) -> Vec<T> {
        let n = self.samples.first().map_or(0, |s| s.x.len());
        (0..n)
            .map(|k| compensated_sum(self.samples.iter().map(|s| s.gamma * s.x[k])))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagateOptions<T> {
    pub t_final: T,
    pub dt: T,
    pub emit_every: usize,
    /// Divergence at every RK4 stage instead of once per step.
    pub strict_rk4: bool,
}

impl<T: Real> PropagateOptions<T> {
    pub fn new(t_final: T, dt: T, emit_every: usize) -> Self {
        Self {
            t_final,
            dt,
            emit_every,
            strict_rk4: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("step {} must be positive", self.dt)));
        }
        if !(self.t_final >= T::zero() && self.t_final.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "final time {} must be nonnegative",
                self.t_final
            )));
        }
        if self.emit_every == 0 {
            return Err(Error::InvalidInput("emit_every must be positive".into()));
        }
        Ok(())
    }

    /// Step sizes: uniform `dt`, with a shortened last step if `t_final` is
    /// not a multiple of `dt`.
    pub fn steps(&self) -> Vec<T> {
        step_sizes(self.t_final, self.dt)
    }
}

fn step_sizes<T: Real>(span: T, dt: T) -> Vec<T> {
    let ratio = span / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= T::lit(1e-9) * rounded.max(T::one()) {
        return vec![dt; rounded.to_usize().unwrap_or(0)];
    }
    let full = ratio.floor().to_usize().unwrap_or(0);
    let mut steps = vec![dt; full];
    steps.push(span - dt * T::lit(full as f64));
    steps
}

/// Snapshots plus the number of scalar ODE components integrated (per sample per step).
#[derive(Clone, Debug)]
pub struct Propagation<T> {
    pub snapshots: Vec<EnsembleSnapshot<T>>,
    pub scalar_ode_steps: u64,
}

/// State of one characteristic during integration.
struct Characteristic<T> {
    x: Vec<T>,
    log_phi: T,
    diverged: bool,
}

fn axpy<T: Real>(out: &mut [T], x: &[T], a: T, k: &[T]) {
    for ((o, &xi), &ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

/// One RK4 step of `(x, ln φ)`; `None` once the state leaves the domain of `f`.
fn rk4_step<T: Real>(
    field: &dyn VectorField<T>,
    t: T,
    h: T,
    x: &[T],
    p: &[T],
    strict: bool,
    with_density: bool,
) -> Option<(Vec<T>, T)> {
    let n = x.len();
    let half = h / T::lit(2.0);
    let mut k = [
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
    ];
    let mut stage = vec![T::zero(); n];
    let mut divs = [T::zero(); 4];
    field.eval(t, x, p, &mut k[0]).ok()?;
    if strict && with_density {
        divs[0] = divergence(field, x, p, t).ok()?;
    }
    axpy(&mut stage, x, half, &k[0]);
    field.eval(t + half, &stage, p, &mut k[1]).ok()?;
    if with_density {
        divs[1] = divergence(field, &stage, p, t + half).ok()?;
    }
    axpy(&mut stage, x, half, &k[1]);
    field.eval(t + half, &stage, p, &mut k[2]).ok()?;
    if strict && with_density {
        divs[2] = divergence(field, &stage, p, t + half).ok()?;
    }
    axpy(&mut stage, x, h, &k[2]);
    field.eval(t + h, &stage, p, &mut k[3]).ok()?;
    if strict && with_density {
        divs[3] = divergence(field, &stage, p, t + h).ok()?;
    }
    let six = T::lit(6.0);
    let two = T::lit(2.0);
    let next: Vec<T> = (0..n)
        .map(|i| x[i] + h / six * (k[0][i] + two * k[1][i] + two * k[2][i] + k[3][i]))
        .collect();
    let div = if strict {
        (divs[0] + two * divs[1] + two * divs[2] + divs[3]) / six
    } else {
        divs[1]
    };
    let d_log_phi = -h * div;
    if next.iter().all(|v| v.is_finite()) && d_log_phi.is_finite() {
        Some((next, d_log_phi))
    } else {
        None
    }
}

/// Integrate one characteristic, recording its state at the emission steps.
#[allow(clippy::too_many_arguments)]
fn integrate_one<T: Real>(
    field: &dyn VectorField<T>,
    sample: &WeightedSample<T>,
    t0: T,
    steps: &[T],
    emit: &[bool],
    strict: bool,
    with_density: bool,
    index: usize,
) -> Vec<WeightedSample<T>> {
    let mut c = Characteristic {
        x: sample.x.clone(),
        log_phi: sample.log_phi,
        diverged: sample.diverged,
    };
    let record = |c: &Characteristic<T>| WeightedSample {
        x: c.x.clone(),
        p: sample.p.clone(),
        log_phi: c.log_phi,
        gamma: sample.gamma,
        diverged: c.diverged,
    };
    let mut out = Vec::with_capacity(emit.iter().filter(|&&e| e).count());
    if emit[0] {
        out.push(record(&c));
    }
    let times = grid_times(t0, steps);
    for (s, &h) in steps.iter().enumerate() {
        let t = times[s];
        if !c.diverged {
            match rk4_step(field, t, h, &c.x, &sample.p, strict, with_density) {
                Some((x, dl)) => {
                    c.x = x;
                    c.log_phi = c.log_phi + dl;
                }
                None => {
                    log::debug!("sample {index} diverged at t = {}", t.as_f64());
                    c.diverged = true;
                }
            }
        }
        if emit[s + 1] {
            out.push(record(&c));
        }
    }
    out
}

/// Step start times `t0 + k·h₀`, plus the end of the last (possibly short) step.
fn grid_times<T: Real>(t0: T, steps: &[T]) -> Vec<T> {
    let n = steps.len();
    let mut times: Vec<T> = (0..n).map(|k| t0 + steps[0] * T::lit(k as f64)).collect();
    times.push(match n {
        0 => t0,
        _ => times[n - 1] + steps[n - 1],
    });
    times
}

fn emission_schedule(n_steps: usize, every: usize) -> Vec<bool> {
    (0..=n_steps).map(|s| s % every == 0 || s == n_steps).collect()
}

fn run<T: Real>(
    cloud: &EnsembleSnapshot<T>,
    field: &dyn VectorField<T>,
    opts: &PropagateOptions<T>,
    with_density: bool,
) -> Result<Propagation<T>> {
    opts.validate()?;
    cloud.validate()?;
    let first = &cloud.samples[0];
    if first.x.len() != field.dim() || first.p.len() != field.params_dim() {
        return Err(Error::Dimension(format!(
            "cloud has ({}, {}) state/parameter entries, field expects ({}, {})",
            first.x.len(),
            first.p.len(),
            field.dim(),
            field.params_dim()
        )));
    }
    let steps = opts.steps();
    let emit = emission_schedule(steps.len(), opts.emit_every);
    let counter = AtomicU64::new(0);
    let per_step = (field.dim() + usize::from(with_density)) as u64;

    let tracks: Vec<Vec<WeightedSample<T>>> = cloud
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let track = integrate_one(field, s, cloud.t, &steps, &emit, opts.strict_rk4, with_density, i);
            counter.fetch_add(per_step * steps.len() as u64, Ordering::Relaxed);
            track
        })
        .collect();

    let grid = grid_times(cloud.t, &steps);
    let times: Vec<T> = (0..=steps.len())
        .filter(|&s| emit[s])
        .map(|s| {
            if s == steps.len() {
                cloud.t + opts.t_final
            } else {
                grid[s]
            }
        })
        .collect();
    let mut integrator = format!("rk4 dt={}", opts.dt);
    if opts.strict_rk4 {
        integrator.push_str(" strict");
    }
    let meta = SnapshotMeta {
        integrator,
        ..cloud.meta.clone()
    };
    let snapshots = times
        .iter()
        .enumerate()
        .map(|(k, &t)| EnsembleSnapshot {
            t,
            samples: tracks.iter().map(|tr| tr[k].clone()).collect(),
            meta: meta.clone(),
        })
        .collect();
    Ok(Propagation {
        snapshots,
        scalar_ode_steps: counter.into_inner(),
    })
}

/// Co-integrate every characteristic over `[t0, t0 + t_final]`.
pub fn propagate<T: Real>(
    cloud: &EnsembleSnapshot<T>,
    field: &dyn VectorField<T>,
    opts: &PropagateOptions<T>,
) -> Result<Propagation<T>> {
    run(cloud, field, opts, true)
}

/// State trajectories only, with the same integrator and emission schedule.
pub fn propagate_states<T: Real>(
    cloud: &EnsembleSnapshot<T>,
    field: &dyn VectorField<T>,
    opts: &PropagateOptions<T>,
) -> Result<Propagation<T>> {
    run(cloud, field, opts, false)
}

/// Backward-time view of a field.
struct Reversed<'a, T: Real> {
    inner: &'a dyn VectorField<T>,
    t_end: T,
}

impl<T: Real> VectorField<T> for Reversed<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn params_dim(&self) -> usize {
        self.inner.params_dim()
    }

    fn eval(&self, s: T, x: &[T], p: &[T], dx: &mut [T]) -> Result<()> {
        self.inner.eval(self.t_end - s, x, p, dx)?;
        dx.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }
}

/// `φ(x_star, t)`: integrate back to `t = 0`, evaluate `φ₀` there, and carry
/// the density forward along the same characteristic.
pub fn query_density<T: Real>(
    x_star: &[T],
    t: T,
    field: &dyn VectorField<T>,
    phi0: &dyn InitialPdf<T>,
    dt: T,
) -> Result<T> {
    let (n, np) = (field.dim(), field.params_dim());
    if x_star.len() != n + np || phi0.dim() != n + np {
        return Err(Error::Dimension(format!(
            "query has {} coordinates, field expects {}",
            x_star.len(),
            n + np
        )));
    }
    if !(t >= T::zero()) || !(dt > T::zero()) {
        return Err(Error::InvalidInput(
            "query time must be nonnegative and step positive".into(),
        ));
    }
    let (x, p) = x_star.split_at(n);
    let steps = step_sizes(t, dt);
    let reversed = Reversed { inner: field, t_end: t };
    let mut back = x.to_vec();
    let mut s = T::zero();
    for &h in &steps {
        let (next, _) = rk4_step(&reversed, s, h, &back, p, false, false).ok_or_else(|| {
            Error::UnresolvableQuery(format!("backward integration failed at t = {}", (t - s).as_f64()))
        })?;
        back = next;
        s = s + h;
    }
    let origin: Vec<T> = back.iter().chain(p).copied().collect();
    let phi_0 = phi0.density(&origin);
    if !(phi_0 > T::zero()) {
        return Ok(T::zero());
    }
    let sample = WeightedSample::new(back, p.to_vec(), phi_0, T::one());
    let emit = emission_schedule(steps.len(), steps.len().max(1));
    let track = integrate_one(field, &sample, T::zero(), &steps, &emit, false, true, 0);
    let last = track.last().expect("final state emitted");
    if last.diverged {
        return Err(Error::UnresolvableQuery("forward density integration failed".into()));
    }
    Ok(last.phi())
}

/// Most and least likely sample per snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodExtremes<T> {
    pub t: T,
    pub max_id: usize,
    pub min_id: usize,
}

/// Argmax/argmin of `φ` over the non-diverged samples of each snapshot
/// (all samples if every one diverged). Ties go to the lowest index.
pub fn likelihood_extremes<T: Real>(snapshots: &[EnsembleSnapshot<T>]) -> Result<Vec<LikelihoodExtremes<T>>> {
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("no snapshots".into()));
    }
    snapshots
        .iter()
        .map(|snap| {
            if snap.samples.is_empty() {
                return Err(Error::InvalidInput("empty snapshot".into()));
            }
            let any_live = snap.samples.iter().any(|s| !s.diverged);
            let candidates = snap
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| !any_live || !s.diverged);
            let (mut max_id, mut min_id) = (usize::MAX, usize::MAX);
            let (mut max_v, mut min_v) = (T::neg_infinity(), T::infinity());
            for (i, s) in candidates {
                if max_id == usize::MAX || s.log_phi > max_v {
                    max_id = i;
                    max_v = s.log_phi;
                }
                if min_id == usize::MAX || s.log_phi < min_v {
                    min_id = i;
                    min_v = s.log_phi;
                }
            }
            Ok(LikelihoodExtremes {
                t: snap.t,
                max_id,
                min_id,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{BoxDomain, UniformBox};

    fn cloud(points: &[Vec<f64>], phi: f64) -> EnsembleSnapshot<f64> {
        let n = points.len();
        let masses = crate::sampling::uniform_masses::<f64>(n);
        EnsembleSnapshot::new(
            0.0,
            points
                .iter()
                .zip(masses)
                .map(|(x, g)| WeightedSample::new(x.clone(), vec![], phi, g))
                .collect(),
            SnapshotMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn divergence_of_simple_fields() {
        let m = [[1.0, 2.0], [-3.0, -0.5]];
        let lin = FnField::new(2, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = m[0][0] * x[0] + m[0][1] * x[1];
            dx[1] = m[1][0] * x[0] + m[1][1] * x[1];
        });
        assert!((divergence(&lin, &[0.3, -2.0], &[], 0.0).unwrap() - 0.5).abs() < 1e-9);
        let sink = FnField::new(2, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = -x[0];
            dx[1] = -x[1];
        });
        assert!((divergence(&sink, &[5.0, 1.0], &[], 0.0).unwrap() + 2.0).abs() < 1e-9);
        let pendulum = FnField::new(2, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = x[0].sin();
        });
        assert!(divergence(&pendulum, &[0.7, 0.2], &[], 0.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn contraction_grows_density() {
        let f = FnField::new(1, |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
        let c = cloud(&[vec![1.0], vec![-0.4]], 0.5);
        let out = propagate(&c, &f, &PropagateOptions::new(1.0, 0.01, 50)).unwrap();
        assert_eq!(out.snapshots.len(), 3);
        assert_eq!(out.snapshots[2].t, 1.0);
        for s in &out.snapshots[2].samples {
            assert!((s.phi() / (0.5 * 1f64.exp()) - 1.0).abs() < 1e-9);
        }
        assert!((out.snapshots[2].samples[0].x[0] - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation_preserves_density() {
        let f = FnField::new(2, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = -x[1];
            dx[1] = x[0];
        });
        let c = cloud(&[vec![1.0, 0.0], vec![0.0, 2.0]], 0.25);
        let out = propagate(&c, &f, &PropagateOptions::new(3.0, 0.01, 100)).unwrap();
        for snap in &out.snapshots {
            for s in &snap.samples {
                assert!((s.phi() - 0.25).abs() < 1e-12);
            }
        }
        let ext = likelihood_extremes(&out.snapshots).unwrap();
        assert!(ext.iter().all(|e| e.max_id == 0 && e.min_id == 0));
    }

    #[test]
    fn emission_includes_endpoints_and_partial_step() {
        let f = FnField::new(1, |_t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = 1.0);
        let c = cloud(&[vec![0.0]], 1.0);
        let out = propagate(&c, &f, &PropagateOptions::new(0.25, 0.1, 2)).unwrap();
        let times: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.2, 0.25]);
        assert!((out.snapshots[2].samples[0].x[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ode_counter_is_state_plus_one() {
        let f = FnField::new(3, |_t: f64, x: &[f64], dx: &mut [f64]| dx.copy_from_slice(x));
        let c = cloud(&[vec![0.0, 0.1, 0.2], vec![1.0, 1.0, 1.0]], 1.0);
        let out = propagate(&c, &f, &PropagateOptions::new(1.0, 0.1, 5)).unwrap();
        assert_eq!(out.scalar_ode_steps, 2 * 10 * 4);
        let mc = propagate_states(&c, &f, &PropagateOptions::new(1.0, 0.1, 5)).unwrap();
        assert_eq!(mc.scalar_ode_steps, 2 * 10 * 3);
    }

    #[test]
    fn diverged_samples_are_frozen_and_kept() {
        // Finite-time blow-up for x0 = 1 at t = 1.
        let f = FnField::new(1, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[0] * x[0] * x[0] * x[0]
        });
        let c = cloud(&[vec![1.0], vec![0.0]], 1.0);
        let out = propagate(&c, &f, &PropagateOptions::new(2.0, 0.01, 50)).unwrap();
        let last = out.snapshots.last().unwrap();
        assert!(last.samples[0].diverged);
        assert!(last.samples[0].x[0].is_finite());
        assert!(!last.samples[1].diverged);
        assert_eq!(last.total_mass(), 1.0);
    }

    #[test]
    fn query_matches_propagated_sample() {
        let f = FnField::new(2, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = -0.5 * x[0] + x[1];
            dx[1] = -x[0] - 0.3 * x[1] + 0.1 * x[0] * x[0];
        });
        let pdf = UniformBox::new(BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap());
        let c = cloud(&[vec![0.4, -0.3]], 0.25);
        let out = propagate(&c, &f, &PropagateOptions::new(2.0, 0.01, 200)).unwrap();
        let s = &out.snapshots.last().unwrap().samples[0];
        let q = query_density(&s.x, 2.0, &f, &pdf, 0.01).unwrap();
        assert!((q / s.phi() - 1.0).abs() < 1e-6, "{q} vs {}", s.phi());
        assert_eq!(query_density(&[0.2, 0.1], 0.0, &f, &pdf, 0.01).unwrap(), 0.25);
        assert_eq!(query_density(&[5.0, 5.0], 1.0, &f, &pdf, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn permutation_equivariance() {
        let f = FnField::new(2, |t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0].sin() - 0.2 * x[1] + t.cos();
        });
        let pts = vec![vec![0.1, 0.0], vec![1.0, -0.5], vec![-0.7, 0.3]];
        let rev: Vec<Vec<f64>> = pts.iter().rev().cloned().collect();
        let opts = PropagateOptions::new(1.0, 0.05, 10);
        let a = propagate(&cloud(&pts, 1.0), &f, &opts).unwrap();
        let b = propagate(&cloud(&rev, 1.0), &f, &opts).unwrap();
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            for (i, s) in sa.samples.iter().enumerate() {
                let r = &sb.samples[2 - i];
                assert_eq!(s.x, r.x);
                assert_eq!(s.log_phi, r.log_phi);
            }
        }
    }

    #[test]
    fn strict_mode_agrees_on_smooth_field() {
        let f = FnField::new(1, |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = -x[0] - x[0] * x[0] * x[0]
        });
        let c = cloud(&[vec![0.8]], 1.0);
        let mut opts = PropagateOptions::new(1.0, 0.01, 100);
        let mid = propagate(&c, &f, &opts).unwrap();
        opts.strict_rk4 = true;
        let strict = propagate(&c, &f, &opts).unwrap();
        let (a, b) = (
            mid.snapshots[1].samples[0].log_phi,
            strict.snapshots[1].samples[0].log_phi,
        );
        assert!((a - b).abs() < 1e-4);
        assert_eq!(mid.snapshots[1].samples[0].x, strict.snapshots[1].samples[0].x);
    }
}

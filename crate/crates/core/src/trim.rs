//! Equilibrium search at prescribed `(V, alpha)` flight conditions.
//!
//! The unknowns are `(theta, T, delta_e)` with `q = 0`; the residual is the
//! scaled force/moment balance `(V̇ / 100, α̇, q̇)`. A projected
//! Levenberg–Marquardt iteration keeps the inputs inside the actuator box.
//!
//! When an actuator bound is active the three balance equations generally
//! cannot all vanish with `q = 0`. In that case the active input is held at
//! its bound and `q` is released; the result is accepted only if the balance
//! closes and the released pitch rate stays below [`TrimOptions::max_released_q`].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AeroTables, AircraftParams, ControlInput, LongitudinalState, Plant, ELEVATOR_LIMIT_DEG, THRUST_MAX, THRUST_MIN,
};

/// How a trim solve terminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimStatus {
    /// Balance closed with `q = 0`.
    Exact,
    /// An input sits on its bound; balance closed with a small nonzero `q`.
    PitchRateReleased,
    /// An input sits on its bound and the reduced residual is stationary.
    BoundLimited,
    /// Stationary least-squares point with no bound active: no equilibrium exists here.
    LeastSquares,
    /// Iteration budget exhausted away from a stationary point.
    Failed,
}

impl TrimStatus {
    pub fn is_stationary(self) -> bool {
        !matches!(self, Self::Failed)
    }
}

/// JSON form uses degrees for angles and deg/s for the pitch rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TrimRecord", from = "TrimRecord")]
pub struct TrimPoint {
    pub x_trim: LongitudinalState<f64>,
    pub u_trim: ControlInput<f64>,
    /// Norm of the scaled balance `(V̇/100, α̇, q̇)`.
    pub residual: f64,
    pub converged: bool,
    pub status: TrimStatus,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct TrimRecord {
    theta_deg: f64,
    #[serde(rename = "V")]
    v: f64,
    alpha_deg: f64,
    q_dps: f64,
    #[serde(rename = "T")]
    thrust: f64,
    delta_e_deg: f64,
    residual: f64,
    converged: bool,
    status: TrimStatus,
    iterations: usize,
}

impl From<TrimPoint> for TrimRecord {
    fn from(t: TrimPoint) -> Self {
        let [theta_deg, v, alpha_deg, q_dps] = t.x_trim.to_degrees();
        Self {
            theta_deg,
            v,
            alpha_deg,
            q_dps,
            thrust: t.u_trim.thrust,
            delta_e_deg: t.u_trim.delta_e.to_degrees(),
            residual: t.residual,
            converged: t.converged,
            status: t.status,
            iterations: t.iterations,
        }
    }
}

impl From<TrimRecord> for TrimPoint {
    fn from(r: TrimRecord) -> Self {
        Self {
            x_trim: LongitudinalState::from_degrees(r.theta_deg, r.v, r.alpha_deg, r.q_dps),
            u_trim: ControlInput::new(r.thrust, r.delta_e_deg.to_radians()),
            residual: r.residual,
            converged: r.converged,
            status: r.status,
            iterations: r.iterations,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrimOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest |q| (rad/s) accepted when releasing the pitch rate.
    pub max_released_q: f64,
    /// Stationarity threshold on the projected gradient (scaled variables).
    pub gradient_tolerance: f64,
}

impl Default for TrimOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 3000,
            max_released_q: 1e-3,
            gradient_tolerance: 1e-9,
        }
    }
}

const V_DOT_SCALE: f64 = 100.0;
const STALL_DECREASE: f64 = 1e-9;
const STALL_STEPS: usize = 10;
// theta, T, delta_e, q
const TYPICAL: [f64; 4] = [1.0, 1.0e4, 1.0, 1.0];

/// Scaled balance residual `(V̇/100, α̇, q̇)`.
pub fn scaled_residual(plant: &Plant<f64>, x: &LongitudinalState<f64>, u: &ControlInput<f64>) -> Result<[f64; 3]> {
    let d = plant.derivative(x, u)?;
    Ok([d[1] / V_DOT_SCALE, d[2], d[3]])
}

struct Problem<'a> {
    plant: &'a Plant<f64>,
    v: f64,
    alpha: f64,
    lower: [f64; 4],
    upper: [f64; 4],
}

impl Problem<'_> {
    fn unpack(&self, z: &[f64; 4]) -> (LongitudinalState<f64>, ControlInput<f64>) {
        (
            LongitudinalState::new(z[0], self.v, self.alpha, z[3]),
            ControlInput::new(z[1], z[2]),
        )
    }

    fn residual(&self, z: &[f64; 4]) -> Option<[f64; 3]> {
        let (x, u) = self.unpack(z);
        scaled_residual(self.plant, &x, &u)
            .ok()
            .filter(|r| r.iter().all(|c| c.is_finite()))
    }
}

fn norm(r: &[f64; 3]) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

struct LsOutcome {
    z: [f64; 4],
    residual: f64,
    iterations: usize,
    stationary: bool,
}

/// Projected Levenberg–Marquardt over the unmasked entries of `z`.
fn projected_lm(problem: &Problem<'_>, z0: [f64; 4], free: [bool; 4], opts: &TrimOptions) -> LsOutcome {
    let clamp = |z: &mut [f64; 4]| {
        for ((v, lo), hi) in z.iter_mut().zip(problem.lower).zip(problem.upper) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut z = z0;
    clamp(&mut z);
    let Some(mut r) = problem.residual(&z) else {
        return LsOutcome {
            z,
            residual: f64::INFINITY,
            iterations: 0,
            stationary: false,
        };
    };
    let mut lambda = 1e-3;
    let mut stationary = false;
    let mut iterations = 0;
    let idx: Vec<usize> = (0..4).filter(|&k| free[k]).collect();
    // Consecutive accepted steps with negligible relative decrease.
    let mut stalled = 0usize;

    while iterations < opts.max_iterations {
        iterations += 1;
        if norm(&r) < 1e-3 * opts.tolerance {
            stationary = true;
            break;
        }
        // Jacobian in scaled variables, central differences.
        let mut jac = DMatrix::<f64>::zeros(3, idx.len());
        let mut ok = true;
        for (c, &k) in idx.iter().enumerate() {
            let h = 1e-7 * TYPICAL[k] * (1.0 + (z[k] / TYPICAL[k]).abs());
            let (mut zp, mut zm) = (z, z);
            zp[k] += h;
            zm[k] -= h;
            match (problem.residual(&zp), problem.residual(&zm)) {
                (Some(rp), Some(rm)) => {
                    for row in 0..3 {
                        jac[(row, c)] = (rp[row] - rm[row]) / (2.0 * h) * TYPICAL[k];
                    }
                }
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let grad = jac.transpose() * &rv;

        // Variables pinned at a bound with the descent direction pointing outward.
        let mut active = vec![false; idx.len()];
        let mut pg: f64 = 0.0;
        for (c, &k) in idx.iter().enumerate() {
            let at_lo = z[k] <= problem.lower[k] && grad[c] > 0.0;
            let at_hi = z[k] >= problem.upper[k] && grad[c] < 0.0;
            active[c] = at_lo || at_hi;
            if !active[c] {
                pg = pg.max(grad[c].abs());
            }
        }
        if pg <= opts.gradient_tolerance {
            stationary = true;
            break;
        }

        let cols: Vec<usize> = (0..idx.len()).filter(|&c| !active[c]).collect();
        let jf = jac.select_columns(&cols);
        let gf = DVector::from_iterator(cols.len(), cols.iter().map(|&c| grad[c]));
        let jtj = jf.transpose() * &jf;

        let mut accepted = false;
        while lambda < 1e14 {
            let mut h = jtj.clone();
            for d in 0..cols.len() {
                h[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let Some(step) = h.lu().solve(&(-&gf)) else {
                lambda *= 4.0;
                continue;
            };
            let mut trial = z;
            for (s, &c) in cols.iter().enumerate() {
                let k = idx[c];
                trial[k] += step[s] * TYPICAL[k];
            }
            clamp(&mut trial);
            if let Some(rt) = problem.residual(&trial) {
                if norm(&rt) < norm(&r) {
                    if norm(&r) - norm(&rt) <= STALL_DECREASE * norm(&r) {
                        stalled += 1;
                    } else {
                        stalled = 0;
                    }
                    z = trial;
                    r = rt;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted || stalled >= STALL_STEPS {
            // No useful descent at any damping: a stationary point to working precision.
            stationary = true;
            break;
        }
    }
    LsOutcome {
        z,
        residual: norm(&r),
        iterations,
        stationary,
    }
}

/// Trim with default options on the given plant.
pub fn find_trim_with(plant: &Plant<f64>, v: f64, alpha: f64, opts: &TrimOptions) -> Result<TrimPoint> {
    if !(v.is_finite() && v > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("trim condition V = {v}, alpha = {alpha}")));
    }
    let de_lim = ELEVATOR_LIMIT_DEG.to_radians();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let problem = Problem {
        plant,
        v,
        alpha,
        lower: [-half_pi, THRUST_MIN, -de_lim, f64::NEG_INFINITY],
        upper: [half_pi, THRUST_MAX, de_lim, f64::INFINITY],
    };
    let z0 = [alpha, 5000.0, 0.0, 0.0];
    let first = projected_lm(&problem, z0, [true, true, true, false], opts);

    let input_active = |z: &[f64; 4]| [1, 2].map(|k| z[k] <= problem.lower[k] || z[k] >= problem.upper[k]);
    let active = input_active(&first.z);
    let mut best = first;
    let mut status = if best.residual < opts.tolerance {
        TrimStatus::Exact
    } else if !best.stationary {
        TrimStatus::Failed
    } else if active.iter().any(|&a| a) {
        TrimStatus::BoundLimited
    } else {
        TrimStatus::LeastSquares
    };

    if status == TrimStatus::BoundLimited {
        let free = [true, !active[0], !active[1], true];
        let second = projected_lm(&problem, best.z, free, opts);
        if second.residual < opts.tolerance && second.z[3].abs() <= opts.max_released_q {
            let iterations = best.iterations + second.iterations;
            best = LsOutcome { iterations, ..second };
            status = TrimStatus::PitchRateReleased;
        }
    }

    let (x_trim, u_trim) = problem.unpack(&best.z);
    Ok(TrimPoint {
        x_trim,
        u_trim,
        residual: best.residual,
        converged: matches!(
            status,
            TrimStatus::Exact | TrimStatus::PitchRateReleased | TrimStatus::BoundLimited
        ),
        status,
        iterations: best.iterations,
    })
}

/// Trim at `(V, alpha)` (ft/s, rad).
pub fn find_trim(v: f64, alpha: f64, params: &AircraftParams<f64>, tables: &AeroTables<f64>) -> Result<TrimPoint> {
    let plant = Plant::new(*params, tables.clone())?;
    find_trim_with(&plant, v, alpha, &TrimOptions::default())
}

/// 10 x 10 uniform lattice over 100..1000 ft/s and -10..45 deg, V-major. Angles in radians.
pub fn default_grid() -> Vec<(f64, f64)> {
    lattice(100.0, 1000.0, 10, -10.0, 45.0, 10)
}

/// Uniform `(V, alpha)` lattice with alpha limits in degrees, V-major order.
pub fn lattice(
    v_min: f64,
    v_max: f64,
    nv: usize,
    alpha_min_deg: f64,
    alpha_max_deg: f64,
    na: usize,
) -> Vec<(f64, f64)> {
    let lin = |a: f64, b: f64, n: usize, i: usize| {
        if n == 1 {
            a
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    };
    (0..nv)
        .flat_map(|i| {
            (0..na).map(move |j| {
                (
                    lin(v_min, v_max, nv, i),
                    lin(alpha_min_deg, alpha_max_deg, na, j).to_radians(),
                )
            })
        })
        .collect()
}

/// One trim per node, in node order. Per-node problems are reported in each
/// point's status rather than aborting the batch.
pub fn trim_grid(nodes: &[(f64, f64)], plant: &Plant<f64>, opts: &TrimOptions) -> Result<Vec<TrimPoint>> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput("empty trim grid".into()));
    }
    nodes
        .par_iter()
        .map(|&(v, alpha)| find_trim_with(plant, v, alpha, opts))
        .collect()
}

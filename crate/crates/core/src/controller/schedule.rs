use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::care::spectral_abscissa;
use super::linearize::linearize;
use super::lqr::{lqr_gain, Gain, LqrWeights};
use crate::error::{Error, Result};
use crate::model::{ControlInput, ControlLaw, LongitudinalState, Plant};
use crate::scalar::Real;
use crate::trim::TrimPoint;

/// Which trim the scheduled law regulates about.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrimOffsets {
    /// `u = ũ_trim(x) − K̃(x)(x − x̃_trim(x))` with trims interpolated like the gains.
    Interpolated,
    /// `u = u_ref − K̃(x)(x − x_ref)` about a fixed reference trim.
    Nominal { reference: TrimPoint },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleNode {
    #[serde(rename = "V")]
    pub v: f64,
    pub alpha_deg: f64,
    pub trim: TrimPoint,
    /// Rows `(T, delta_e)`, columns `(theta, V, alpha, q)`, radian units.
    pub gain: [[f64; 4]; 2],
    pub open_loop_abscissa: f64,
    pub closed_loop_abscissa: f64,
}

impl ScheduleNode {
    pub fn gain_matrix(&self) -> Gain {
        Gain::from_fn(|i, j| self.gain[i][j])
    }
}

/// Gains and trims on a rectangular `(V, alpha)` lattice, V-major node order.
/// Queries are bilinearly interpolated and clamped to the lattice hull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule {
    #[serde(rename = "V_grid")]
    pub v_grid: Vec<f64>,
    pub alpha_grid_deg: Vec<f64>,
    pub nodes: Vec<ScheduleNode>,
    pub offsets: TrimOffsets,
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    v
}

fn gain_array(k: &Gain) -> [[f64; 4]; 2] {
    std::array::from_fn(|i| std::array::from_fn(|j| k[(i, j)]))
}

/// Synthesize one LQR gain per trim. The trims must cover a full rectangular
/// lattice in V-major order (as produced by the lattice builders).
pub fn build_schedule(trims: &[TrimPoint], weights: &LqrWeights, plant: &Plant<f64>) -> Result<GainSchedule> {
    if trims.is_empty() {
        return Err(Error::InvalidInput("empty trim list".into()));
    }
    let v_grid = distinct_sorted(trims.iter().map(|t| t.x_trim.v));
    let alpha_grid_deg = distinct_sorted(trims.iter().map(|t| t.x_trim.alpha.to_degrees()));
    let (nv, na) = (v_grid.len(), alpha_grid_deg.len());
    if nv * na != trims.len() {
        return Err(Error::InvalidInput(format!(
            "{} trims do not form a {nv} x {na} lattice",
            trims.len()
        )));
    }
    for (idx, t) in trims.iter().enumerate() {
        let (i, j) = (idx / na, idx % na);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        if !close(t.x_trim.v, v_grid[i]) || !close(t.x_trim.alpha.to_degrees(), alpha_grid_deg[j]) {
            return Err(Error::InvalidInput(format!(
                "trim {idx} is out of V-major lattice order"
            )));
        }
        if !t.status.is_stationary() {
            return Err(Error::UnconvergedTrim {
                index: idx,
                v: t.x_trim.v,
                alpha_deg: t.x_trim.alpha.to_degrees(),
            });
        }
    }

    let nodes = trims
        .par_iter()
        .enumerate()
        .map(|(idx, t)| {
            let v = t.x_trim.v;
            let alpha_deg = t.x_trim.alpha.to_degrees();
            let model = linearize(plant, &t.x_trim, &t.u_trim)?;
            let a = DMatrix::from_column_slice(4, 4, model.a.as_slice());
            let open_loop_abscissa = spectral_abscissa(&a);
            let k = lqr_gain(&model, weights).map_err(|e| match e {
                Error::Synthesis(msg) => {
                    log::warn!("node {idx} (V = {v}, alpha = {alpha_deg} deg): {msg}");
                    Error::UnstableNode {
                        index: idx,
                        v,
                        alpha_deg,
                        abscissa: open_loop_abscissa,
                    }
                }
                other => other,
            })?;
            let acl = DMatrix::from_column_slice(4, 4, (model.a - model.b * k).as_slice());
            let closed_loop_abscissa = spectral_abscissa(&acl);
            if !(closed_loop_abscissa < 0.0) {
                return Err(Error::UnstableNode {
                    index: idx,
                    v,
                    alpha_deg,
                    abscissa: closed_loop_abscissa,
                });
            }
            Ok(ScheduleNode {
                v,
                alpha_deg,
                trim: *t,
                gain: gain_array(&k),
                open_loop_abscissa,
                closed_loop_abscissa,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GainSchedule {
        v_grid,
        alpha_grid_deg,
        nodes,
        offsets: TrimOffsets::Interpolated,
    })
}

/// Clamped cell location: lower index and fractional weight of the upper one.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    if n == 1 || x <= grid[0] {
        return (0, 0.0);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}

/// Interpolated gain and trim at a scheduling point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolant {
    pub gain: Gain,
    pub x_trim: [f64; 4],
    pub u_trim: [f64; 2],
}

impl GainSchedule {
    pub fn with_offsets(mut self, offsets: TrimOffsets) -> Self {
        self.offsets = offsets;
        self
    }

    pub fn node(&self, iv: usize, ia: usize) -> &ScheduleNode {
        &self.nodes[iv * self.alpha_grid_deg.len() + ia]
    }

    /// Bilinear interpolation at `(V, alpha)` (ft/s, rad), clamped to the hull.
    pub fn interpolate(&self, v: f64, alpha: f64) -> Interpolant {
        let (iv, tv) = locate(&self.v_grid, v);
        let (ia, ta) = locate(&self.alpha_grid_deg, alpha.to_degrees());
        let iv1 = (iv + 1).min(self.v_grid.len() - 1);
        let ia1 = (ia + 1).min(self.alpha_grid_deg.len() - 1);
        let corners = [
            (self.node(iv, ia), (1.0 - tv) * (1.0 - ta)),
            (self.node(iv1, ia), tv * (1.0 - ta)),
            (self.node(iv, ia1), (1.0 - tv) * ta),
            (self.node(iv1, ia1), tv * ta),
        ];
        let mut out = Interpolant {
            gain: Gain::zeros(),
            x_trim: [0.0; 4],
            u_trim: [0.0; 2],
        };
        for (node, w) in corners {
            if w == 0.0 {
                continue;
            }
            out.gain += node.gain_matrix() * w;
            for (o, c) in out.x_trim.iter_mut().zip(node.trim.x_trim.to_array()) {
                *o += w * c;
            }
            for (o, c) in out.u_trim.iter_mut().zip(node.trim.u_trim.to_array()) {
                *o += w * c;
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s: Self = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if s.v_grid.is_empty()
            || s.alpha_grid_deg.is_empty()
            || s.nodes.len() != s.v_grid.len() * s.alpha_grid_deg.len()
        {
            return Err(Error::Config("schedule node count does not match its grid".into()));
        }
        Ok(s)
    }
}

/// Gain-scheduled control, before saturation.
pub fn gs_control(x: &LongitudinalState<f64>, schedule: &GainSchedule) -> ControlInput<f64> {
    let it = schedule.interpolate(x.v, x.alpha);
    let (x_ref, u_ref) = match &schedule.offsets {
        TrimOffsets::Interpolated => (it.x_trim, it.u_trim),
        TrimOffsets::Nominal { reference } => (reference.x_trim.to_array(), reference.u_trim.to_array()),
    };
    let xa = x.to_array();
    let mut u = u_ref;
    for (i, ui) in u.iter_mut().enumerate() {
        for j in 0..4 {
            *ui -= it.gain[(i, j)] * (xa[j] - x_ref[j]);
        }
    }
    ControlInput::new(u[0], u[1])
}

/// [`gs_control`] as a control law.
#[derive(Clone, Debug)]
pub struct ScheduledLaw {
    pub schedule: GainSchedule,
}

impl ScheduledLaw {
    pub fn new(schedule: GainSchedule) -> Self {
        Self { schedule }
    }
}

impl<T: Real> ControlLaw<T> for ScheduledLaw {
    fn command(&self, x: &LongitudinalState<T>) -> ControlInput<T> {
        let x64 = LongitudinalState::from_array(x.to_array().map(|c| c.as_f64()));
        let u = gs_control(&x64, &self.schedule);
        ControlInput::new(T::lit(u.thrust), T::lit(u.delta_e))
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Ic,
    Param,
    Disturbance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Lqr,
    Gslqr,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lqr => "lqr",
            Self::Gslqr => "gslqr",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lqr" => Ok(Self::Lqr),
            "gslqr" => Ok(Self::Gslqr),
            other => Err(Error::Config(format!(
                "unknown controller `{other}` (expected lqr or gslqr)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    #[default]
    Halton,
    Mcmc,
}

/// Trim offsets used by the scheduled controller.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GsOffsets {
    /// Deviations from the scenario's reference trim.
    #[default]
    Nominal,
    /// Deviations from the trim interpolated at the current `(V, alpha)`.
    Interpolated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleUnit {
    #[default]
    Deg,
    Rad,
}

impl AngleUnit {
    pub fn to_rad(self, v: f64) -> f64 {
        match self {
            Self::Deg => v.to_radians(),
            Self::Rad => v,
        }
    }
}

/// Perturbation interval per state: `theta` and `alpha` in deg, `V` in ft/s, `q` in deg/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcBox {
    pub theta: [f64; 2],
    #[serde(rename = "V")]
    pub v: [f64; 2],
    pub alpha: [f64; 2],
    pub q: [f64; 2],
}

impl Default for IcBox {
    fn default() -> Self {
        Self {
            theta: [-35.0, 35.0],
            v: [-65.0, 65.0],
            alpha: [-20.0, 50.0],
            q: [-70.0, 70.0],
        }
    }
}

impl IcBox {
    /// `(lower, upper)` offsets in internal units (rad, ft/s, rad, rad/s).
    pub fn offsets(&self) -> ([f64; 4], [f64; 4]) {
        let r = f64::to_radians;
        (
            [r(self.theta[0]), self.v[0], r(self.alpha[0]), r(self.q[0])],
            [r(self.theta[1]), self.v[1], r(self.alpha[1]), r(self.q[1])],
        )
    }

    pub fn zero() -> Self {
        Self {
            theta: [0.0; 2],
            v: [0.0; 2],
            alpha: [0.0; 2],
            q: [0.0; 2],
        }
    }
}

/// Deterministic initial offset from trim; `q` is in `angle_unit` per second.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XPert {
    pub theta: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub alpha: f64,
    pub q: f64,
    #[serde(default)]
    pub angle_unit: AngleUnit,
}

impl Default for XPert {
    fn default() -> Self {
        Self {
            theta: 1.1803,
            v: 5.1058,
            alpha: 2.8370,
            q: 1e-4,
            angle_unit: AngleUnit::Deg,
        }
    }
}

impl XPert {
    pub fn offsets(&self) -> [f64; 4] {
        let u = self.angle_unit;
        [u.to_rad(self.theta), self.v, u.to_rad(self.alpha), u.to_rad(self.q)]
    }
}

/// Trim condition `(V, alpha)` the scenario regulates to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrimCondition {
    #[serde(rename = "V")]
    pub v: f64,
    pub alpha_deg: f64,
}

impl Default for TrimCondition {
    fn default() -> Self {
        Self {
            v: 407.8942,
            alpha_deg: 6.1650,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

fn both_controllers() -> Vec<ControllerKind> {
    vec![ControllerKind::Lqr, ControllerKind::Gslqr]
}

fn default_t_final() -> f64 {
    20.0
}

fn default_dt() -> f64 {
    0.01
}

fn default_amplitude() -> f64 {
    6.5
}

fn default_skip() -> usize {
    crate::sampling::HALTON_SKIP
}

fn default_bins() -> usize {
    20
}

fn default_true() -> bool {
    true
}

/// One experiment. Angles are in degrees unless stated otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default = "both_controllers")]
    pub controllers: Vec<ControllerKind>,
    /// Defaults to 200 (2000 with `full_scale`).
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub full_scale: bool,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Steps between snapshots; defaults to 1 s (0.1 s for disturbance runs).
    #[serde(default)]
    pub emit_every: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default = "default_skip")]
    pub halton_skip: usize,
    #[serde(default)]
    pub trim: TrimCondition,
    #[serde(default)]
    pub ic_box_deg: Option<IcBox>,
    #[serde(default)]
    pub x_pert: Option<XPert>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub param_delta_percent: Option<Vec<f64>>,
    /// Disturbance frequencies (rad/s).
    #[serde(default, deserialize_with = "one_or_many")]
    pub omega: Option<Vec<f64>>,
    #[serde(default = "default_amplitude")]
    pub disturbance_amplitude_deg: f64,
    #[serde(default)]
    pub gs_offsets: GsOffsets,
    #[serde(default)]
    pub strict_rk4: bool,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub write_snapshots: bool,
    /// One long-format snapshot file per series instead of one file per time.
    #[serde(default)]
    pub long_format: bool,
    #[serde(default)]
    pub params_file: Option<PathBuf>,
    #[serde(default)]
    pub tables_file: Option<PathBuf>,
    /// Prebuilt gain schedule; synthesized from the trim grid when absent.
    #[serde(default)]
    pub schedule_file: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Defaults for `kind` at desk scale.
    pub fn new(kind: ScenarioKind) -> Self {
        let mut cfg: Self = serde_json::from_value(serde_json::json!({ "kind": kind })).expect("defaults deserialize");
        match kind {
            ScenarioKind::Ic => cfg.ic_box_deg = Some(IcBox::default()),
            ScenarioKind::Param => {
                cfg.x_pert = Some(XPert::default());
                cfg.param_delta_percent = Some(vec![0.5, 2.5, 5.0, 7.5, 15.0]);
            }
            ScenarioKind::Disturbance => {
                cfg.ic_box_deg = Some(IcBox::default());
                cfg.omega = Some(vec![0.0, 2.0, 100.0]);
            }
        }
        cfg
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sample_count(&self) -> usize {
        self.samples.unwrap_or(if self.full_scale { 2000 } else { 200 })
    }

    pub fn emit_steps(&self) -> usize {
        self.emit_every.unwrap_or_else(|| {
            let interval = if self.kind == ScenarioKind::Disturbance {
                0.1
            } else {
                1.0
            };
            ((interval / self.dt).round() as usize).max(1)
        })
    }

    pub fn ic_box(&self) -> IcBox {
        self.ic_box_deg.unwrap_or_default()
    }

    /// Sweep values: `Δ` percentages, `Ω` values, or a single 0 for the IC scenario.
    pub fn sweep(&self) -> Vec<f64> {
        match self.kind {
            ScenarioKind::Ic => vec![0.0],
            ScenarioKind::Param => self.param_delta_percent.clone().unwrap_or_default(),
            ScenarioKind::Disturbance => self.omega.clone().unwrap_or_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.sample_count() == 0 {
            return bad("samples must be positive".into());
        }
        if self.emit_every == Some(0) {
            return bad("emit_every must be positive".into());
        }
        if self.controllers.is_empty() {
            return bad("at least one controller is required".into());
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be positive".into());
        }
        if !(self.trim.v > 0.0) {
            return bad("trim speed must be positive".into());
        }
        let check_box = |b: &IcBox| {
            [b.theta, b.v, b.alpha, b.q]
                .iter()
                .all(|iv| iv[0].is_finite() && iv[1].is_finite() && iv[0] <= iv[1])
        };
        match self.kind {
            ScenarioKind::Ic => {
                if let Some(b) = &self.ic_box_deg {
                    if !check_box(b) {
                        return bad("ic_box_deg intervals must satisfy lower <= upper".into());
                    }
                }
            }
            ScenarioKind::Param => {
                if self.x_pert.is_none() {
                    return bad("param scenario requires x_pert".into());
                }
                match &self.param_delta_percent {
                    Some(d) if !d.is_empty() && d.iter().all(|v| *v >= 0.0 && *v < 100.0) => {}
                    _ => return bad("param scenario requires param_delta_percent values in [0, 100)".into()),
                }
            }
            ScenarioKind::Disturbance => {
                if let Some(b) = &self.ic_box_deg {
                    if !check_box(b) {
                        return bad("ic_box_deg intervals must satisfy lower <= upper".into());
                    }
                }
                match &self.omega {
                    Some(o) if !o.is_empty() && o.iter().all(|v| v.is_finite() && *v >= 0.0) => {}
                    _ => return bad("disturbance scenario requires nonnegative omega values".into()),
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for kind in [ScenarioKind::Ic, ScenarioKind::Param, ScenarioKind::Disturbance] {
            let cfg = ScenarioConfig::new(kind);
            cfg.validate().unwrap();
            assert_eq!(cfg.sample_count(), 200);
        }
        assert_eq!(ScenarioConfig::new(ScenarioKind::Ic).emit_steps(), 100);
        assert_eq!(ScenarioConfig::new(ScenarioKind::Disturbance).emit_steps(), 10);
    }

    #[test]
    fn scalar_or_list_sweeps() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"kind": "param", "param_delta_percent": 2.5, "x_pert": {"theta": 1, "V": 2, "alpha": 3, "q": 0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.sweep(), vec![2.5]);
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"kind": "disturbance", "omega": [0, 2]}"#).unwrap();
        assert_eq!(cfg.sweep(), vec![0.0, 2.0]);
    }

    #[test]
    fn missing_kind_fields_are_config_errors() {
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"kind": "param"}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ScenarioConfig::new(ScenarioKind::Ic);
        cfg.dt = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"kind": "ic", "sampels": 3}"#).is_err());
    }

    #[test]
    fn x_pert_units() {
        let p = XPert::default().offsets();
        assert!((p[0] - 1.1803f64.to_radians()).abs() < 1e-15);
        let rad = XPert {
            angle_unit: AngleUnit::Rad,
            ..XPert::default()
        };
        assert_eq!(rad.offsets()[0], 1.1803);
    }
}

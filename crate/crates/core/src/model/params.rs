use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rigid-body and atmosphere constants of the longitudinal model.
///
/// Units: slug, ft/s², ft², ft, ft, ft, slug·ft², slug/ft³, ft. The JSON form
/// uses the same field names as the published parameter table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AircraftParams<T> {
    pub m: T,
    pub g: T,
    #[serde(rename = "S")]
    pub wing_area: T,
    pub cbar: T,
    pub xcg_ref: T,
    pub xcg: T,
    #[serde(rename = "Jyy")]
    pub jyy: T,
    pub rho0: T,
    pub h: T,
}

impl<T: Real> Default for AircraftParams<T> {
    fn default() -> Self {
        let cbar = T::lit(11.32);
        Self {
            m: T::lit(636.94),
            g: T::lit(32.17),
            wing_area: T::lit(300.0),
            cbar,
            xcg_ref: T::lit(0.35) * cbar,
            xcg: T::lit(0.30) * cbar,
            jyy: T::lit(55_814.0),
            rho0: T::lit(2.377e-3),
            h: T::lit(10_000.0),
        }
    }
}

impl<T: Real> AircraftParams<T> {
    /// Air density at the configured altitude, `rho0 (1 - 0.703e-5 h)^4.14`.
    pub fn density(&self) -> T {
        self.rho0 * (T::one() - T::lit(0.703e-5) * self.h).powf(T::lit(4.14))
    }

    /// Names of the entries a parameter vector overrides, in order.
    pub const UNCERTAIN: [&'static str; 3] = ["m", "xcg", "Jyy"];

    /// `(m, xcg, Jyy)`.
    pub fn uncertain_vector(&self) -> [T; 3] {
        [self.m, self.xcg, self.jyy]
    }

    /// Copy with `(m, xcg, Jyy)` replaced by `p`. An empty `p` keeps the nominal values.
    pub fn with_uncertain(&self, p: &[T]) -> Result<Self> {
        match p.len() {
            0 => Ok(*self),
            3 => Ok(Self {
                m: p[0],
                xcg: p[1],
                jyy: p[2],
                ..*self
            }),
            n => Err(Error::Dimension(format!(
                "parameter vector has {n} entries, expected 0 or 3"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("g", self.g),
            ("S", self.wing_area),
            ("cbar", self.cbar),
            ("Jyy", self.jyy),
            ("rho0", self.rho0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidInput(format!("parameter {name} = {v} must be positive")));
            }
        }
        if !(self.xcg.is_finite() && self.xcg_ref.is_finite() && self.h.is_finite()) {
            return Err(Error::InvalidInput("non-finite c.g. or altitude".into()));
        }
        if !(self.density() > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "altitude {} ft gives non-positive density",
                self.h
            )));
        }
        Ok(())
    }
}

impl AircraftParams<f64> {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let params: Self = serde_json::from_reader(std::fs::File::open(path)?)?;
        params.validate()?;
        Ok(params)
    }
}

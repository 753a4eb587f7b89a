use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// `(theta, V, alpha, q)` in rad, ft/s, rad, rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalState<T> {
    pub theta: T,
    #[serde(rename = "V")]
    pub v: T,
    pub alpha: T,
    pub q: T,
}

impl<T: Real> LongitudinalState<T> {
    pub fn new(theta: T, v: T, alpha: T, q: T) -> Self {
        Self { theta, v, alpha, q }
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.theta, self.v, self.alpha, self.q]
    }

    /// Build from degrees (`theta_deg`, ft/s, `alpha_deg`, deg/s).
    pub fn from_degrees(theta_deg: T, v: T, alpha_deg: T, q_dps: T) -> Self {
        Self::new(theta_deg.to_radians(), v, alpha_deg.to_radians(), q_dps.to_radians())
    }

    /// `[theta_deg, V, alpha_deg, q_dps]`.
    pub fn to_degrees(&self) -> [T; 4] {
        [
            self.theta.to_degrees(),
            self.v,
            self.alpha.to_degrees(),
            self.q.to_degrees(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

/// Thrust (lb) and elevator deflection (rad).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput<T> {
    #[serde(rename = "T")]
    pub thrust: T,
    pub delta_e: T,
}

impl<T: Real> ControlInput<T> {
    pub fn new(thrust: T, delta_e: T) -> Self {
        Self { thrust, delta_e }
    }

    pub fn to_array(&self) -> [T; 2] {
        [self.thrust, self.delta_e]
    }

    pub fn from_array(a: [T; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

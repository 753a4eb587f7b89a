use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{AeroTables, AircraftParams, Coefficient, ControlInput, LongitudinalState};

pub const THRUST_MIN: f64 = 1_000.0;
pub const THRUST_MAX: f64 = 28_000.0;
pub const ELEVATOR_LIMIT_DEG: f64 = 25.0;

/// `q̄ = ½ ρ(h) V²` in lb/ft².
pub fn dynamic_pressure<T: Real>(v: T, params: &AircraftParams<T>) -> Result<T> {
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!("velocity {v} is not finite")));
    }
    Ok(T::lit(0.5) * params.density() * v * v)
}

/// Componentwise clamp to the actuator limits.
pub fn saturate<T: Real>(u: ControlInput<T>) -> ControlInput<T> {
    let lim = T::lit(ELEVATOR_LIMIT_DEG).to_radians();
    ControlInput {
        thrust: u.thrust.max(T::lit(THRUST_MIN)).min(T::lit(THRUST_MAX)),
        delta_e: u.delta_e.max(-lim).min(lim),
    }
}

/// Open-loop state derivative `(θ̇, V̇, α̇, q̇)` for the given parameters and tables.
pub fn dynamics<T: Real>(
    x: &LongitudinalState<T>,
    u: &ControlInput<T>,
    params: &AircraftParams<T>,
    tables: &AeroTables<T>,
) -> Result<[T; 4]> {
    equations_of_motion(x, u, params, tables, params.density())
}

pub(crate) fn equations_of_motion<T: Real>(
    x: &LongitudinalState<T>,
    u: &ControlInput<T>,
    p: &AircraftParams<T>,
    tables: &AeroTables<T>,
    rho: T,
) -> Result<[T; 4]> {
    let LongitudinalState { theta, v, alpha, q } = *x;
    if !(v > T::zero()) || !v.is_finite() {
        return Err(Error::SingularState(v.as_f64()));
    }
    let half = T::lit(0.5);
    let qbar_s = half * rho * v * v * p.wing_area;
    let rate = p.cbar / (T::lit(2.0) * v) * q;
    let de = u.delta_e;

    let cx = tables.lookup(Coefficient::Cx, alpha, de) + rate * tables.lookup(Coefficient::Cxq, alpha, de);
    let cz = tables.lookup(Coefficient::Cz, alpha, de) + rate * tables.lookup(Coefficient::Czq, alpha, de);
    let cm = tables.lookup(Coefficient::Cm, alpha, de)
        + rate * tables.lookup(Coefficient::Cmq, alpha, de)
        + (p.xcg_ref - p.xcg) / p.cbar * cz;

    let weight = p.m * p.g;
    let (sa, ca) = alpha.sin_cos();
    let (st, ct) = theta.sin_cos();
    let axial = u.thrust - weight * st + qbar_s * cx;
    let normal = weight * ct + qbar_s * cz;

    let v_dot = (ca * axial + sa * normal) / p.m;
    let alpha_dot = q + (ca * normal - sa * axial) / (p.m * v);
    let q_dot = qbar_s * p.cbar / p.jyy * cm;
    Ok([q, v_dot, alpha_dot, q_dot])
}

/// Parameters, tables and the altitude density frozen for a run.
#[derive(Clone, Debug)]
pub struct Plant<T> {
    params: AircraftParams<T>,
    tables: AeroTables<T>,
    rho: T,
}

impl<T: Real> Plant<T> {
    pub fn new(params: AircraftParams<T>, tables: AeroTables<T>) -> Result<Self> {
        params.validate()?;
        let rho = params.density();
        Ok(Self { params, tables, rho })
    }

    /// Default parameters with the bundled Stevens–Lewis tables.
    pub fn f16() -> Self {
        Self::new(AircraftParams::default(), AeroTables::stevens_lewis()).expect("default plant")
    }

    pub fn params(&self) -> &AircraftParams<T> {
        &self.params
    }

    pub fn tables(&self) -> &AeroTables<T> {
        &self.tables
    }

    pub fn density(&self) -> T {
        self.rho
    }

    pub fn derivative(&self, x: &LongitudinalState<T>, u: &ControlInput<T>) -> Result<[T; 4]> {
        equations_of_motion(x, u, &self.params, &self.tables, self.rho)
    }

    /// Derivative with `(m, xcg, Jyy)` overridden by `p` (empty `p` means nominal).
    pub fn derivative_with(&self, x: &LongitudinalState<T>, u: &ControlInput<T>, p: &[T]) -> Result<[T; 4]> {
        if p.is_empty() {
            return self.derivative(x, u);
        }
        let params = self.params.with_uncertain(p)?;
        equations_of_motion(x, u, &params, &self.tables, self.rho)
    }
}

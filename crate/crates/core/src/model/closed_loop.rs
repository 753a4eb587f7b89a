use crate::error::{Error, Result};
use crate::liouville::VectorField;
use crate::scalar::Real;

use super::{saturate, ControlInput, LongitudinalState, Plant};

/// State feedback producing a (pre-saturation) actuator command.
pub trait ControlLaw<T: Real>: Send + Sync {
    fn command(&self, x: &LongitudinalState<T>) -> ControlInput<T>;
}

/// A constant input is the trivial control law.
impl<T: Real> ControlLaw<T> for ControlInput<T> {
    fn command(&self, _x: &LongitudinalState<T>) -> ControlInput<T> {
        *self
    }
}

/// Additive elevator disturbance `w(t)` in radians.
pub trait Disturbance<T: Real>: Send + Sync {
    fn elevator(&self, t: T) -> T;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoDisturbance;

impl<T: Real> Disturbance<T> for NoDisturbance {
    fn elevator(&self, _t: T) -> T {
        T::zero()
    }
}

/// `w(t) = A sin(Ω t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SineDisturbance<T> {
    pub amplitude: T,
    pub omega: T,
}

impl<T: Real> SineDisturbance<T> {
    pub fn from_degrees(amplitude_deg: T, omega: T) -> Self {
        Self {
            amplitude: amplitude_deg.to_radians(),
            omega,
        }
    }
}

impl<T: Real> Disturbance<T> for SineDisturbance<T> {
    fn elevator(&self, t: T) -> T {
        self.amplitude * (self.omega * t).sin()
    }
}

/// Plant + control law + actuator disturbance.
///
/// The extended state is `[x, p]` with `p` either empty or `(m, xcg, Jyy)`;
/// parameters are constant along trajectories.
#[derive(Clone, Copy)]
pub struct ClosedLoop<'a, T: Real> {
    plant: &'a Plant<T>,
    law: &'a dyn ControlLaw<T>,
    disturbance: &'a dyn Disturbance<T>,
    params_dim: usize,
}

impl<'a, T: Real> ClosedLoop<'a, T> {
    pub fn new(plant: &'a Plant<T>, law: &'a dyn ControlLaw<T>, disturbance: &'a dyn Disturbance<T>) -> Self {
        Self {
            plant,
            law,
            disturbance,
            params_dim: 0,
        }
    }

    /// Expect a 3-entry `(m, xcg, Jyy)` parameter block on every evaluation.
    pub fn with_uncertain_params(mut self) -> Self {
        self.params_dim = 3;
        self
    }

    pub fn plant(&self) -> &Plant<T> {
        self.plant
    }

    /// Actuator command before saturation: `law(x) + (0, w(t))`.
    pub fn command(&self, x: &LongitudinalState<T>, t: T) -> ControlInput<T> {
        let mut u = self.law.command(x);
        u.delta_e = u.delta_e + self.disturbance.elevator(t);
        u
    }

    /// State block of the closed-loop vector field.
    pub fn rhs(&self, x: &LongitudinalState<T>, p: &[T], t: T) -> Result<[T; 4]> {
        let u = saturate(self.command(x, t));
        self.plant.derivative_with(x, &u, p)
    }

    /// Extended derivative `[ẋ, ṗ]` with `ṗ = 0`.
    pub fn extended_rhs(&self, x: &LongitudinalState<T>, p: &[T], t: T) -> Result<Vec<T>> {
        let dx = self.rhs(x, p, t)?;
        let mut out = dx.to_vec();
        out.extend(std::iter::repeat_n(T::zero(), p.len()));
        Ok(out)
    }
}

impl<T: Real> VectorField<T> for ClosedLoop<'_, T> {
    fn dim(&self) -> usize {
        4
    }

    fn params_dim(&self) -> usize {
        self.params_dim
    }

    fn eval(&self, t: T, x: &[T], p: &[T], dx: &mut [T]) -> Result<()> {
        if x.len() != 4 || dx.len() != 4 {
            return Err(Error::Dimension(format!(
                "closed loop expects 4 states, got {}",
                x.len()
            )));
        }
        let state = LongitudinalState::new(x[0], x[1], x[2], x[3]);
        dx.copy_from_slice(&self.rhs(&state, p, t)?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_disturbance_peaks_at_quarter_period() {
        let w = SineDisturbance::from_degrees(6.5_f64, 2.0);
        assert!((w.elevator(std::f64::consts::FRAC_PI_4).to_degrees() - 6.5).abs() < 1e-12);
        assert!(w.elevator(std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn disturbance_enters_before_saturation() {
        let plant = Plant::<f64>::f16();
        let law = ControlInput::new(2000.0, 0.0);
        let w = SineDisturbance::from_degrees(6.5, 2.0);
        let cl = ClosedLoop::new(&plant, &law, &w);
        let x = LongitudinalState::new(0.0, 400.0, 0.1, 0.0);
        let u = cl.command(&x, std::f64::consts::FRAC_PI_4);
        assert!((u.delta_e.to_degrees() - 6.5).abs() < 1e-12);
        assert_eq!(u.thrust, 2000.0);

        // A command that saturates: law at 24 deg plus 6.5 deg clips to 25 deg.
        let law = ControlInput::new(2000.0, 24.0_f64.to_radians());
        let cl = ClosedLoop::new(&plant, &law, &w);
        let expect = plant
            .derivative(&x, &ControlInput::new(2000.0, 25.0_f64.to_radians()))
            .unwrap();
        assert_eq!(cl.rhs(&x, &[], std::f64::consts::FRAC_PI_4).unwrap(), expect);
    }

    #[test]
    fn parameter_block_is_zero() {
        let plant = Plant::<f64>::f16();
        let law = ControlInput::new(3000.0, -0.02);
        let cl = ClosedLoop::new(&plant, &law, &NoDisturbance).with_uncertain_params();
        let x = LongitudinalState::new(0.1, 380.0, 0.15, 0.05);
        let d = cl.extended_rhs(&x, &[640.0, 3.4, 56_000.0], 1.3).unwrap();
        assert_eq!(d.len(), 7);
        assert_eq!(&d[4..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn parameter_override_changes_state_rates() {
        let plant = Plant::<f64>::f16();
        let law = ControlInput::new(3000.0, -0.02);
        let cl = ClosedLoop::new(&plant, &law, &NoDisturbance);
        let x = LongitudinalState::new(0.1, 380.0, 0.15, 0.05);
        let nominal = cl.rhs(&x, &[], 0.0).unwrap();
        let same = cl.rhs(&x, &plant.params().uncertain_vector(), 0.0).unwrap();
        assert_eq!(nominal, same);
        let heavy = cl.rhs(&x, &[700.0, 3.396, 55_814.0], 0.0).unwrap();
        assert_ne!(nominal[1], heavy[1]);
    }
}

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::care::{solve_care, spectral_abscissa};
use super::linearize::LinearModel;
use crate::error::{Error, Result};
use crate::model::{ControlInput, ControlLaw, LongitudinalState};
use crate::scalar::Real;
use crate::trim::TrimPoint;

/// State feedback gain, rows `(T, delta_e)`, columns `(theta, V, alpha, q)`.
pub type Gain = SMatrix<f64, 2, 4>;

#[derive(Clone, Debug, PartialEq)]
pub struct LqrWeights {
    pub q: Matrix4<f64>,
    pub r: Matrix2<f64>,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: Matrix4::from_diagonal(&SVector::from([100.0, 0.25, 100.0, 1e-4])),
            r: Matrix2::from_diagonal(&SVector::from([1e-6, 625.0])),
        }
    }
}

impl LqrWeights {
    pub fn validate(&self) -> Result<()> {
        if (self.q - self.q.transpose()).abs().max() > 0.0 || (self.r - self.r.transpose()).abs().max() > 0.0 {
            return Err(Error::InvalidInput("LQR weights must be symmetric".into()));
        }
        if self.q.symmetric_eigenvalues().min() < -1e-12 * self.q.norm() {
            return Err(Error::InvalidInput("Q must be positive semidefinite".into()));
        }
        if self.r.cholesky().is_none() {
            return Err(Error::InvalidInput("R must be positive definite".into()));
        }
        Ok(())
    }
}

/// `K = R⁻¹BᵀP` with `P` the stabilizing CARE solution.
pub fn lqr_gain(model: &LinearModel, weights: &LqrWeights) -> Result<Gain> {
    weights.validate()?;
    let a = DMatrix::from_column_slice(4, 4, model.a.as_slice());
    let b = DMatrix::from_column_slice(4, 2, model.b.as_slice());
    let q = DMatrix::from_column_slice(4, 4, weights.q.as_slice());
    let r = DMatrix::from_column_slice(2, 2, weights.r.as_slice());
    let p = solve_care(&a, &b, &q, &r)?;
    let r_inv = weights
        .r
        .try_inverse()
        .ok_or_else(|| Error::Synthesis("R is singular".into()))?;
    let bt_p = b.transpose() * p;
    let k = r_inv * Gain::from_column_slice(bt_p.as_slice());
    let abscissa = spectral_abscissa(&DMatrix::from_column_slice(4, 4, (model.a - model.b * k).as_slice()));
    if !(abscissa < 0.0) {
        return Err(Error::Synthesis(format!(
            "closed loop not Hurwitz (abscissa {abscissa:.3e})"
        )));
    }
    Ok(k)
}

/// `u = u_trim − K (x − x_trim)`, before saturation.
pub fn lqr_control(x: &LongitudinalState<f64>, k: &Gain, trim: &TrimPoint) -> ControlInput<f64> {
    let dx = SVector::from(x.to_array()) - SVector::from(trim.x_trim.to_array());
    let u = SVector::from(trim.u_trim.to_array()) - k * dx;
    ControlInput::new(u[0], u[1])
}

/// Fixed-gain LQR about one trim point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqrLaw {
    pub gain: [[f64; 4]; 2],
    pub trim: TrimPoint,
}

impl LqrLaw {
    pub fn new(gain: &Gain, trim: TrimPoint) -> Self {
        let mut g = [[0.0; 4]; 2];
        for (i, row) in g.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = gain[(i, j)];
            }
        }
        Self { gain: g, trim }
    }

    pub fn gain_matrix(&self) -> Gain {
        Gain::from_fn(|i, j| self.gain[i][j])
    }
}

impl<T: Real> ControlLaw<T> for LqrLaw {
    fn command(&self, x: &LongitudinalState<T>) -> ControlInput<T> {
        let xt = self.trim.x_trim.to_array();
        let dx = [
            x.theta - T::lit(xt[0]),
            x.v - T::lit(xt[1]),
            x.alpha - T::lit(xt[2]),
            x.q - T::lit(xt[3]),
        ];
        let ut = self.trim.u_trim.to_array();
        let mut u = [T::lit(ut[0]), T::lit(ut[1])];
        for (i, ui) in u.iter_mut().enumerate() {
            for (j, d) in dx.iter().enumerate() {
                *ui = *ui - T::lit(self.gain[i][j]) * *d;
            }
        }
        ControlInput::new(u[0], u[1])
    }
}

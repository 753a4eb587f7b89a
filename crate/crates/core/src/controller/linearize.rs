use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlInput, LongitudinalState, Plant};

/// Central-difference Jacobians of `f(x, u)` with steps `1e-6 max(1, |z|)`.
pub fn jacobians<const N: usize, const M: usize>(
    f: impl Fn(&SVector<f64, N>, &SVector<f64, M>) -> Result<SVector<f64, N>>,
    x0: &SVector<f64, N>,
    u0: &SVector<f64, M>,
) -> Result<(SMatrix<f64, N, N>, SMatrix<f64, N, M>)> {
    let step = |z: f64| 1e-6 * z.abs().max(1.0);
    let mut a = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let h = step(x0[j]);
        let (mut xp, mut xm) = (*x0, *x0);
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp, u0)? - f(&xm, u0)?) / (2.0 * h);
        a.set_column(j, &col);
    }
    let mut b = SMatrix::<f64, N, M>::zeros();
    for j in 0..M {
        let h = step(u0[j]);
        let (mut up, mut um) = (*u0, *u0);
        up[j] += h;
        um[j] -= h;
        let col = (f(x0, &up)? - f(x0, &um)?) / (2.0 * h);
        b.set_column(j, &col);
    }
    if let Some((row, col)) = first_non_finite(a.as_slice(), N) {
        return Err(Error::Linearization { matrix: "A", row, col });
    }
    if let Some((row, col)) = first_non_finite(b.as_slice(), N) {
        return Err(Error::Linearization { matrix: "B", row, col });
    }
    Ok((a, b))
}

// Column-major slice.
fn first_non_finite(data: &[f64], rows: usize) -> Option<(usize, usize)> {
    data.iter().position(|v| !v.is_finite()).map(|k| (k % rows, k / rows))
}

/// Open-loop linearization of the F-16 about `(x0, u0)`, in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub a: SMatrix<f64, 4, 4>,
    pub b: SMatrix<f64, 4, 2>,
    /// Elevator column of `b`: the actuator disturbance enters there.
    pub bw: SVector<f64, 4>,
    pub x0: LongitudinalState<f64>,
    pub u0: ControlInput<f64>,
}

pub fn linearize(plant: &Plant<f64>, x0: &LongitudinalState<f64>, u0: &ControlInput<f64>) -> Result<LinearModel> {
    let f = |x: &SVector<f64, 4>, u: &SVector<f64, 2>| {
        let d = plant.derivative(
            &LongitudinalState::new(x[0], x[1], x[2], x[3]),
            &ControlInput::new(u[0], u[1]),
        )?;
        Ok(SVector::<f64, 4>::from(d))
    };
    let (a, b) = jacobians(f, &SVector::from(x0.to_array()), &SVector::from(u0.to_array()))?;
    Ok(LinearModel {
        a,
        b,
        bw: b.column(1).into_owned(),
        x0: *x0,
        u0: *u0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Matrix3};

    #[test]
    fn linear_map_is_reproduced() {
        let m = Matrix3::new(1.0, -2.0, 0.5, 3.0, 0.25, -7.0, 1e3, 2.0, -0.1);
        let bm = SMatrix::<f64, 3, 1>::new(2.0, -1.0, 4.0);
        let f = |x: &SVector<f64, 3>, u: &SVector<f64, 1>| Ok(m * x + bm * u);
        let (a, b) = jacobians(f, &SVector::from([0.3, -20.0, 5.0]), &SVector::from([1.5])).unwrap();
        assert!((a - m).abs().max() <= 1e-8 * m.abs().max());
        assert!((b - bm).abs().max() <= 1e-8 * bm.abs().max());
    }

    #[test]
    fn constant_field_has_zero_jacobians() {
        let f = |_: &SVector<f64, 2>, _: &SVector<f64, 2>| Ok(SVector::from([4.0, -1.0]));
        let (a, b) = jacobians(f, &SVector::from([1.0, 2.0]), &SVector::from([3.0, 4.0])).unwrap();
        assert_eq!(a, Matrix2::zeros());
        assert_eq!(b, Matrix2::zeros());
    }

    #[test]
    fn non_finite_entry_is_reported() {
        let f = |x: &SVector<f64, 2>, _: &SVector<f64, 1>| Ok(SVector::from([x[0].sqrt(), x[1]]));
        let err = jacobians(f, &SVector::from([0.0, 1.0]), &SVector::from([0.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::Linearization {
                matrix: "A",
                row: 0,
                col: 0
            }
        ));
    }

    #[test]
    fn disturbance_column_is_elevator_column() {
        let plant = Plant::f16();
        let x0 = LongitudinalState::new(0.05, 400.0, 0.1, 0.0);
        let m = linearize(&plant, &x0, &ControlInput::new(3000.0, -0.05)).unwrap();
        assert_eq!(m.bw, m.b.column(1).into_owned());
        // Thrust accelerates along the velocity vector only through cos(alpha)/m.
        assert!((m.b[(1, 0)] - 0.1_f64.cos() / 636.94).abs() < 1e-9);
        assert_eq!(m.b[(0, 0)], 0.0);
    }
}

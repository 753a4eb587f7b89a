//! Continuous algebraic Riccati equation `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
//!
//! The stabilizing solution is read off the stable invariant subspace of the
//! Hamiltonian `[[A, −G], [−Q, −Aᵀ]]`, `G = BR⁻¹Bᵀ`, obtained from the matrix
//! sign function, then polished with Newton–Kleinman steps.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SIGN_MAX_ITER: usize = 100;
const NEWTON_MAX_ITER: usize = 4;

/// Largest real part of the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Frobenius norm of `AᵀP + PA − PGP + Q`.
pub fn care_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a - p * g * p + q).norm()
}

fn matrix_sign(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows() as f64;
    let mut z = h.clone();
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Synthesis("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        // Determinantal scaling, through log|det| to stay in range.
        let log_det: f64 = z.clone().lu().u().diagonal().iter().map(|d| d.abs().ln()).sum();
        let c = (log_det / n).exp();
        let c = if c.is_finite() && c > 0.0 { c } else { 1.0 };
        let next = (&z / c + inv * c) * 0.5;
        let delta = (&next - &z).norm();
        z = next;
        if delta <= 1e-13 * z.norm() {
            return Ok(z);
        }
    }
    Err(Error::Synthesis("matrix sign iteration did not converge".into()))
}

/// Solve `AcᵀX + XAc = −C` through the Kronecker form.
fn lyapunov(ac: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = ac.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let act = ac.transpose();
    let op = eye.kronecker(&act) + act.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, c.as_slice());
    let x = op.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Some((&x + x.transpose()) * 0.5)
}

/// Stabilizing solution of the CARE.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "CARE shapes A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Synthesis("R is not positive definite".into()))?
        .inverse();
    let g = b * r_inv * b.transpose();

    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let w = matrix_sign(&h)?;
    let eye = DMatrix::<f64>::identity(n, n);
    // (W + I) [I; P] = 0
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w.view((0, 0), (n, n)) + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Synthesis(format!("stable subspace solve failed: {e}")))?;
    let mut p = (&p + p.transpose()) * 0.5;
    let mut res = care_residual(a, &g, q, &p);

    for _ in 0..NEWTON_MAX_ITER {
        let ac = a - &g * &p;
        let Some(next) = lyapunov(&ac, &(q + &p * &g * &p)) else {
            break;
        };
        let next_res = care_residual(a, &g, q, &next);
        if !(next_res < res) {
            break;
        }
        p = next;
        res = next_res;
    }

    let scale = q.norm() + (a.transpose() * &p + &p * a).norm() + (&p * &g * &p).norm();
    if !res.is_finite() || res > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Synthesis(format!("Riccati residual {res:.3e} too large")));
    }
    let abscissa = spectral_abscissa(&(a - &g * &p));
    if !(abscissa < 0.0) {
        return Err(Error::Synthesis(format!(
            "closed loop not Hurwitz (abscissa {abscissa:.3e})"
        )));
    }
    Ok(p)
}

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::scenario::DEG_SCALE;
use crate::controller::{spectral_abscissa, Gain, LinearModel};
use crate::error::{Error, Result};
use crate::liouville::EnsembleSnapshot;
use crate::scalar::compensated_sum;

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect()
}

/// Default frequency grid: 200 points over `[1e-2, 1e3]` rad/s.
pub fn default_omega_grid() -> Vec<f64> {
    log_grid(1e-2, 1e3, 200)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqResponse {
    pub omega: Vec<f64>,
    /// `σ_max((jωI − A)⁻¹ b)` per frequency.
    pub gain: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub peak_omega: f64,
    pub peak_db: f64,
}

/// Disturbance-to-state gain of `ẋ = A x + b w`.
pub fn freq_response(a: &DMatrix<f64>, b: &DVector<f64>, omegas: &[f64]) -> Result<FreqResponse> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "A is {:?}, b has {} entries",
            a.shape(),
            b.len()
        )));
    }
    if omegas.is_empty() {
        return Err(Error::InvalidInput("empty frequency grid".into()));
    }
    let abscissa = spectral_abscissa(a);
    if !(abscissa < 0.0) {
        return Err(Error::InvalidInput(format!(
            "closed loop is not Hurwitz (abscissa {abscissa:.3e})"
        )));
    }
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let bc = b.map(|v| Complex64::new(v, 0.0));
    let mut gain = Vec::with_capacity(omegas.len());
    for &w in omegas {
        let m = DMatrix::<Complex64>::from_diagonal_element(n, n, Complex64::new(0.0, w)) - &ac;
        let x = m
            .lu()
            .solve(&bc)
            .ok_or_else(|| Error::Numerical(format!("singular resolvent at omega = {w}")))?;
        gain.push(x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }
    let gain_db: Vec<f64> = gain.iter().map(|g| 20.0 * g.log10()).collect();
    let (k, _) = gain.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |(bk, bg), (k, &g)| if g > bg { (k, g) } else { (bk, bg) },
    );
    Ok(FreqResponse {
        omega: omegas.to_vec(),
        peak_omega: omegas[k],
        peak_db: gain_db[k],
        gain,
        gain_db,
    })
}

/// Frequency response of `A − BK` from the elevator disturbance column, in
/// reporting units: states in deg, ft/s, deg, deg/s per degree of disturbance.
pub fn closed_loop_freq_response(model: &LinearModel, k: &Gain, omegas: &[f64]) -> Result<FreqResponse> {
    let acl = model.a - model.b * k;
    let d = DEG_SCALE;
    freq_response(
        &DMatrix::from_fn(4, 4, |i, j| acl[(i, j)] * d[i] / d[j]),
        &DVector::from_fn(4, |i, _| model.bw[i] * d[i] * 1f64.to_radians()),
        omegas,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub axis: usize,
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Mass-weighted histogram of one extended-state coordinate.
pub fn marginal_histogram(snapshot: &EnsembleSnapshot<f64>, axis: usize, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidInput("histogram needs at least one bin".into()));
    }
    let values: Vec<f64> = snapshot
        .samples
        .iter()
        .map(|s| {
            if axis < s.x.len() {
                s.x.get(axis).copied()
            } else {
                s.p.get(axis - s.x.len()).copied()
            }
        })
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::Dimension(format!("axis {axis} out of range")))?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut parts = vec![Vec::new(); bins];
    for (v, s) in values.iter().zip(&snapshot.samples) {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        parts[k].push(s.gamma);
    }
    let mass = parts.into_iter().map(compensated_sum).collect();
    Ok(Histogram { axis, edges, mass })
}

/// Dominant nonzero angular frequency (rad/s) of a uniformly sampled series
/// restricted to `[t0, t1]`, from the zero-padded FFT of the demeaned samples.
pub fn dominant_frequency(t: &[f64], y: &[f64], t0: f64, t1: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= t0 - 1e-9 && ti <= t1 + 1e-9)
        .map(|(&a, &b)| (a, b))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InvalidInput("too few samples in the FFT window".into()));
    }
    let dt = (pts[pts.len() - 1].0 - pts[0].0) / (pts.len() - 1) as f64;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let size = (pts.len() * 16).next_power_of_two();
    let mut buf: Vec<Complex64> = pts.iter().map(|p| Complex64::new(p.1 - mean, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    FftPlanner::<f64>::new().plan_fft_forward(size).process(&mut buf);
    let (k, _) =
        buf[1..size / 2].iter().enumerate().fold(
            (0, -1.0),
            |(bk, bm), (k, z)| if z.norm() > bm { (k + 1, z.norm()) } else { (bk, bm) },
        );
    Ok(2.0 * std::f64::consts::PI * k as f64 / (size as f64 * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{SnapshotMeta, WeightedSample};

    #[test]
    fn scalar_low_pass() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DVector::from_element(1, 1.0);
        let grid = default_omega_grid();
        let r = freq_response(&a, &b, &grid).unwrap();
        for (w, g) in grid.iter().zip(&r.gain) {
            assert!((g - 1.0 / (1.0 + w * w).sqrt()).abs() < 1e-10);
        }
        assert!(r.gain.windows(2).all(|p| p[1] < p[0]));
        let dc = freq_response(&a, &b, &[0.0]).unwrap();
        assert!(dc.gain_db[0].abs() < 1e-12);
    }

    #[test]
    fn unstable_closed_loop_rejected() {
        let a = DMatrix::from_element(1, 1, 0.5);
        assert!(freq_response(&a, &DVector::from_element(1, 1.0), &[1.0]).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = default_omega_grid();
        assert_eq!(g.len(), 200);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[199] - 1e3).abs() < 1e-9);
    }

    fn snap(xs: &[f64]) -> EnsembleSnapshot<f64> {
        let g = crate::sampling::uniform_masses::<f64>(xs.len());
        EnsembleSnapshot::new(
            0.0,
            xs.iter()
                .zip(g)
                .map(|(&x, g)| WeightedSample::new(vec![x], vec![], 1.0, g))
                .collect(),
            SnapshotMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn histogram_cases() {
        let s = snap(&[0.1, 0.5, 0.9]);
        let one = marginal_histogram(&s, 0, 1).unwrap();
        assert_eq!(one.mass, vec![1.0]);
        let same = marginal_histogram(&snap(&[2.0; 5]), 0, 4).unwrap();
        assert_eq!(same.mass.iter().filter(|&&m| m > 0.0).count(), 1);
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        let flat = marginal_histogram(&snap(&xs), 0, 10).unwrap();
        let chi2: f64 = flat.mass.iter().map(|m| (m * 1000.0 - 100.0).powi(2) / 100.0).sum();
        assert!(chi2 < 21.67, "{chi2}");
        assert!((compensated_sum(flat.mass.iter().copied()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dominant_frequency_of_sine() {
        let t: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&s| 3.0 + (2.0 * s).sin()).collect();
        let w = dominant_frequency(&t, &y, 10.0, 20.0).unwrap();
        assert!((w - 2.0).abs() < 0.1, "{w}");
    }
}

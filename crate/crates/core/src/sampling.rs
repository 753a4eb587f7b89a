//! Scattered samples from initial densities: Halton points for boxes,
//! random-walk Metropolis for general densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::WeightedSample;
use crate::scalar::{compensated_sum, Real};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Default number of leading Halton points discarded.
pub const HALTON_SKIP: usize = 20;

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::InvalidInput(
                "box requires finite lower < upper in every dimension".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// Box `center ± half_width`.
    pub fn centered(center: &[T], half_width: &[T]) -> Result<Self> {
        if center.len() != half_width.len() {
            return Err(Error::Dimension("center and half-width lengths differ".into()));
        }
        Self::new(
            center.iter().zip(half_width).map(|(&c, &h)| c - h).collect(),
            center.iter().zip(half_width).map(|(&c, &h)| c + h).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> Vec<T> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| u - l).collect()
    }

    pub fn volume(&self) -> T {
        self.widths().into_iter().fold(T::one(), |a, w| a * w)
    }

    pub fn center(&self) -> Vec<T> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| (l + u) / T::lit(2.0))
            .collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// Affine image of a unit-cube point.
    pub fn map_unit(&self, u: &[T]) -> Vec<T> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&s, (&l, &h))| l + s * (h - l))
            .collect()
    }
}

/// Where an initial density may be nonzero.
#[derive(Clone, Debug, PartialEq)]
pub enum Support<T> {
    Box(BoxDomain<T>),
    /// Unbounded support; `scale` sets the per-dimension proposal spread and `start` the chain origin.
    Unbounded {
        start: Vec<T>,
        scale: Vec<T>,
    },
}

/// Initial joint density `φ₀` over the extended state.
pub trait InitialPdf<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    /// Density value, exactly 0 off the support.
    fn density(&self, x: &[T]) -> T;
    fn support(&self) -> Support<T>;
    /// Whether `density` integrates to one.
    fn normalized(&self) -> bool {
        true
    }
}

/// Uniform density on a box.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformBox<T> {
    pub domain: BoxDomain<T>,
}

impl<T: Real> UniformBox<T> {
    pub fn new(domain: BoxDomain<T>) -> Self {
        Self { domain }
    }
}

impl<T: Real> InitialPdf<T> for UniformBox<T> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn density(&self, x: &[T]) -> T {
        if self.domain.contains(x) {
            T::one() / self.domain.volume()
        } else {
            T::zero()
        }
    }

    fn support(&self) -> Support<T> {
        Support::Box(self.domain.clone())
    }
}

/// Product of independent normals.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalGaussian<T> {
    pub mean: Vec<T>,
    pub std_dev: Vec<T>,
}

impl<T: Real> DiagonalGaussian<T> {
    pub fn new(mean: Vec<T>, std_dev: Vec<T>) -> Result<Self> {
        if mean.len() != std_dev.len() || mean.is_empty() {
            return Err(Error::Dimension("mean and standard deviation lengths differ".into()));
        }
        if std_dev.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::InvalidInput("standard deviations must be positive".into()));
        }
        Ok(Self { mean, std_dev })
    }
}

impl<T: Real> InitialPdf<T> for DiagonalGaussian<T> {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn density(&self, x: &[T]) -> T {
        if x.len() != self.dim() {
            return T::zero();
        }
        let two = T::lit(2.0);
        let norm = (two * T::PI()).sqrt();
        x.iter()
            .zip(self.mean.iter().zip(&self.std_dev))
            .fold(T::one(), |acc, (&v, (&m, &s))| {
                let z = (v - m) / s;
                acc * (-(z * z) / two).exp() / (s * norm)
            })
    }

    fn support(&self) -> Support<T> {
        Support::Unbounded {
            start: self.mean.clone(),
            scale: self.std_dev.iter().map(|&s| s * T::lit(10.0)).collect(),
        }
    }
}

/// Radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// First `n` Halton points after `skip`, mapped into `domain`.
pub fn halton<T: Real>(n: usize, domain: &BoxDomain<T>, skip: usize) -> Result<Vec<Vec<T>>> {
    let d = domain.dim();
    if n == 0 {
        return Err(Error::InvalidInput("Halton sample count must be positive".into()));
    }
    if d > PRIMES.len() {
        return Err(Error::Dimension(format!(
            "Halton dimension {d} exceeds {}",
            PRIMES.len()
        )));
    }
    Ok((0..n)
        .map(|k| {
            let index = (skip + k + 1) as u64;
            let unit: Vec<T> = PRIMES[..d].iter().map(|&b| T::lit(radical_inverse(index, b))).collect();
            domain.map_unit(&unit)
        })
        .collect())
}

#[derive(Clone, Copy, Debug)]
pub struct McmcOptions {
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in state.
    pub thin: usize,
    /// Initial proposal standard deviation as a fraction of the support scale.
    pub initial_scale: f64,
    pub target_acceptance: f64,
    pub min_acceptance: f64,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            thin: 5,
            initial_scale: 0.1,
            target_acceptance: 0.3,
            min_acceptance: 0.01,
        }
    }
}

/// Random-walk Metropolis with an isotropic Gaussian proposal.
pub fn mcmc_sample<T: Real>(pdf: &dyn InitialPdf<T>, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    mcmc_sample_with(pdf, n, seed, &McmcOptions::default())
}

pub fn mcmc_sample_with<T: Real>(
    pdf: &dyn InitialPdf<T>,
    n: usize,
    seed: u64,
    opts: &McmcOptions,
) -> Result<Vec<Vec<T>>> {
    if n == 0 {
        return Err(Error::InvalidInput("MCMC sample count must be positive".into()));
    }
    let d = pdf.dim();
    let (start, scale) = match pdf.support() {
        Support::Box(b) => (b.center(), b.widths()),
        Support::Unbounded { start, scale } => (start, scale),
    };
    let scale: Vec<f64> = scale.iter().map(|s| s.as_f64()).collect();
    let mut x: Vec<f64> = start.iter().map(|v| v.as_f64()).collect();
    let density = |x: &[f64]| {
        let xt: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
        pdf.density(&xt).as_f64()
    };
    let mut fx = density(&x);
    if !(fx > 0.0) {
        return Err(Error::InvalidInput("MCMC start point has zero density".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = opts.initial_scale;
    let mut proposal = vec![0.0; d];

    let mut advance = |x: &mut Vec<f64>, fx: &mut f64, step: f64, rng: &mut ChaCha8Rng| -> bool {
        for (k, p) in proposal.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *p = x[k] + step * scale[k] * z;
        }
        let fp = density(&proposal);
        let accept = fp > 0.0 && (fp >= *fx || rng.random::<f64>() * *fx < fp);
        if accept {
            x.copy_from_slice(&proposal);
            *fx = fp;
        }
        accept
    };

    // Burn-in with batch scale adaptation.
    const BATCH: usize = 100;
    let mut accepted = 0usize;
    for k in 1..=opts.burn_in {
        accepted += advance(&mut x, &mut fx, step, &mut rng) as usize;
        if k % BATCH == 0 {
            let rate = accepted as f64 / BATCH as f64;
            step *= ((rate - opts.target_acceptance) * 2.0).exp();
            step = step.clamp(1e-8, 10.0);
            accepted = 0;
        }
    }

    let mut out = Vec::with_capacity(n);
    let mut total_accepted = 0usize;
    let mut total = 0usize;
    while out.len() < n {
        for _ in 0..opts.thin.max(1) {
            total_accepted += advance(&mut x, &mut fx, step, &mut rng) as usize;
            total += 1;
        }
        out.push(x.iter().map(|&v| T::lit(v)).collect());
    }
    let rate = total_accepted as f64 / total as f64;
    log::info!("MCMC acceptance rate {rate:.3} (proposal scale {step:.3e})");
    if rate < opts.min_acceptance {
        return Err(Error::DegenerateProposal(rate));
    }
    Ok(out)
}

/// Uniform transport masses summing to exactly one under compensated summation.
pub fn uniform_masses<T: Real>(n: usize) -> Vec<T> {
    if n == 0 {
        return Vec::new();
    }
    let mut g = vec![T::one() / T::lit(n as f64); n];
    let head = compensated_sum(g[..n - 1].iter().copied());
    g[n - 1] = T::one() - head;
    g
}

/// Attach `φ₀` values and uniform masses. Samples with zero density are
/// dropped with a warning; `dim` leading coordinates are the state, the rest parameters.
pub fn weighted_cloud<T: Real>(
    samples: &[Vec<T>],
    pdf: &dyn InitialPdf<T>,
    state_dim: usize,
) -> Result<Vec<WeightedSample<T>>> {
    let mut kept = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if s.len() != pdf.dim() || state_dim > s.len() {
            return Err(Error::Dimension(format!(
                "sample {i} has {} coordinates, density expects {}",
                s.len(),
                pdf.dim()
            )));
        }
        let phi = pdf.density(s);
        if phi > T::zero() && phi.is_finite() {
            kept.push((s, phi));
        } else {
            log::warn!("sample {i} lies off the support and was rejected");
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput("no sample lies on the density support".into()));
    }
    let masses = uniform_masses::<T>(kept.len());
    Ok(kept
        .into_iter()
        .zip(masses)
        .map(|((s, phi), gamma)| WeightedSample::new(s[..state_dim].to_vec(), s[state_dim..].to_vec(), phi, gamma))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> BoxDomain<f64> {
        BoxDomain::new(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    #[test]
    fn van_der_corput_base_two() {
        let pts = halton(4, &unit(1), 0).unwrap();
        let flat: Vec<f64> = pts.into_iter().map(|p| p[0]).collect();
        assert_eq!(flat, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn first_two_dimensional_point() {
        let p = &halton(1, &unit(2), 0).unwrap()[0];
        assert_eq!(p[0], 0.5);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn affine_map_into_box() {
        let b = BoxDomain::new(vec![0.0], vec![10.0]).unwrap();
        assert_eq!(b.map_unit(&[0.5]), vec![5.0]);
        assert_eq!(halton(1, &b, 0).unwrap()[0], vec![5.0]);
    }

    #[test]
    fn skip_drops_prefix() {
        let all = halton(25, &unit(3), 0).unwrap();
        let skipped = halton(5, &unit(3), 20).unwrap();
        assert_eq!(&all[20..], &skipped[..]);
    }

    #[test]
    fn too_many_dimensions() {
        assert!(halton(3, &unit(17), 0).is_err());
    }

    #[test]
    fn uniform_density_is_reciprocal_volume() {
        let pdf = UniformBox::new(BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 4.0]).unwrap());
        assert_eq!(pdf.density(&[0.3, 2.0]), 1.0 / 8.0);
        assert_eq!(pdf.density(&[1.5, 2.0]), 0.0);
    }

    #[test]
    fn masses_sum_to_one_exactly() {
        for n in [1, 3, 7, 2000, 4999] {
            assert_eq!(compensated_sum(uniform_masses::<f64>(n)), 1.0);
        }
    }

    #[test]
    fn off_support_samples_are_rejected() {
        let pdf = UniformBox::new(unit(2));
        let cloud = weighted_cloud(&[vec![0.5, 0.5], vec![2.0, 0.5], vec![0.1, 0.9]], &pdf, 2).unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(cloud.iter().all(|s| s.phi() == 1.0));
        assert_eq!(compensated_sum(cloud.iter().map(|s| s.gamma)), 1.0);
    }

    #[test]
    fn mcmc_is_reproducible_and_centered() {
        let pdf = UniformBox::new(BoxDomain::new(vec![-1.0, 2.0], vec![1.0, 6.0]).unwrap());
        let a = mcmc_sample(&pdf, 2000, 7).unwrap();
        let b = mcmc_sample(&pdf, 2000, 7).unwrap();
        assert_eq!(a, b);
        let n = a.len() as f64;
        for (k, (c, w)) in [(0.0, 2.0), (4.0, 4.0)].into_iter().enumerate() {
            let mean = a.iter().map(|s| s[k]).sum::<f64>() / n;
            let sigma = w / 12f64.sqrt();
            // Thinned chain: allow for residual autocorrelation.
            assert!((mean - c).abs() < 4.0 * sigma / n.sqrt() * 3.0, "dim {k}: {mean}");
        }
    }

    #[test]
    fn mcmc_spread_tracks_target_width() {
        let spread = |s: f64| {
            let pdf = DiagonalGaussian::new(vec![1.0], vec![s]).unwrap();
            let xs = mcmc_sample(&pdf, 1000, 3).unwrap();
            let m = xs.iter().map(|x| x[0]).sum::<f64>() / 1000.0;
            (xs.iter().map(|x| (x[0] - m).powi(2)).sum::<f64>() / 999.0).sqrt()
        };
        let (wide, narrow) = (spread(1.0), spread(1e-3));
        assert!(narrow < 1e-2 * wide);
        assert!((wide - 1.0).abs() < 0.25);
    }

    #[test]
    fn degenerate_proposal_is_reported() {
        // Needle-thin support relative to the declared scale.
        struct Needle;
        impl InitialPdf<f64> for Needle {
            fn dim(&self) -> usize {
                2
            }
            fn density(&self, x: &[f64]) -> f64 {
                if x[0].abs() < 1e-12 && x[1].abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            fn support(&self) -> Support<f64> {
                Support::Unbounded {
                    start: vec![0.0, 0.0],
                    scale: vec![1.0, 1.0],
                }
            }
        }
        let opts = McmcOptions {
            burn_in: 200,
            ..McmcOptions::default()
        };
        assert!(matches!(
            mcmc_sample_with(&Needle, 50, 1, &opts),
            Err(Error::DegenerateProposal(_))
        ));
    }
}

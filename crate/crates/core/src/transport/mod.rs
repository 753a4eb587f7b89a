//! Wasserstein-2 distances between weighted point clouds.

mod simplex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::EnsembleSnapshot;
use crate::scalar::{compensated_sum, Real};

/// Default cap on `m · n` coupling variables.
pub const DEFAULT_BUDGET: usize = 25_000_000;

/// Inputs whose masses sum to within this of one are renormalized.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Post-solve tolerance on the marginal constraints.
pub const PLAN_TOLERANCE: f64 = 1e-9;

/// Weighted point cloud with masses summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution<T> {
    points: Vec<Vec<T>>,
    masses: Vec<T>,
}

impl<T: Real> DiscreteDistribution<T> {
    /// Validate and, if the total mass is within [`MASS_TOLERANCE`] of one, renormalize.
    pub fn new(points: Vec<Vec<T>>, masses: Vec<T>) -> Result<Self> {
        if points.is_empty() || points.len() != masses.len() {
            return Err(Error::Dimension(format!(
                "{} points with {} masses",
                points.len(),
                masses.len()
            )));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::Dimension("points differ in dimension".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite point coordinate".into()));
        }
        if masses.iter().any(|m| !(*m >= T::zero()) || !m.is_finite()) {
            return Err(Error::InvalidInput("masses must be finite and nonnegative".into()));
        }
        let total = compensated_sum(masses.iter().copied());
        if (total - T::one()).abs().as_f64() >= MASS_TOLERANCE {
            return Err(Error::MassImbalance(total.as_f64()));
        }
        let masses = if total == T::one() {
            masses
        } else {
            masses.into_iter().map(|m| m / total).collect()
        };
        Ok(Self { points, masses })
    }

    /// Equal masses `1/n`.
    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, crate::sampling::uniform_masses(n))
    }

    pub fn dirac(point: Vec<T>) -> Result<Self> {
        Self::new(vec![point], vec![T::one()])
    }

    /// Snapshot samples as a distribution over the state block.
    pub fn from_snapshot(snapshot: &EnsembleSnapshot<T>) -> Result<Self> {
        Self::new(
            snapshot.samples.iter().map(|s| s.x.clone()).collect(),
            snapshot.samples.iter().map(|s| s.gamma).collect(),
        )
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// One coordinate as a 1-D distribution.
    pub fn marginal(&self, axis: usize) -> Result<Self> {
        if axis >= self.dim() {
            return Err(Error::Dimension(format!(
                "axis {axis} of a {}-D distribution",
                self.dim()
            )));
        }
        Ok(Self {
            points: self.points.iter().map(|p| vec![p[axis]]).collect(),
            masses: self.masses.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan<T> {
    /// `(i, j, μ_ij)` for every positive coupling entry.
    pub entries: Vec<(usize, usize, T)>,
    /// `Σ c_ij μ_ij`.
    pub cost: T,
    /// `√cost`.
    pub w: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportOptions<T> {
    /// Per-dimension weights in the cost `‖diag(scale)(y − ŷ)‖²`; `None` means 1.
    pub scale: Option<Vec<T>>,
    pub budget: usize,
}

impl<T> Default for TransportOptions<T> {
    fn default() -> Self {
        Self {
            scale: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

fn scaled_sq_dist<T: Real>(a: &[T], b: &[T], scale: Option<&[T]>) -> T {
    match scale {
        None => a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)),
        Some(s) => a
            .iter()
            .zip(b)
            .zip(s)
            .fold(T::zero(), |acc, ((&x, &y), &w)| acc + (w * (x - y)) * (w * (x - y))),
    }
}

/// Optimal plan for an arbitrary pairwise cost.
pub fn solve_transport<T: Real>(
    a: &[T],
    b: &[T],
    cost: impl Fn(usize, usize) -> T + Sync,
    budget: usize,
) -> Result<TransportPlan<T>> {
    let (m, n) = (a.len(), b.len());
    let size = m.saturating_mul(n);
    if size > budget {
        return Err(Error::BudgetExceeded { m, n, size, budget });
    }
    let (ta, tb) = (compensated_sum(a.iter().copied()), compensated_sum(b.iter().copied()));
    if (ta - tb).abs().as_f64() >= MASS_TOLERANCE {
        return Err(Error::MassImbalance((ta - tb).as_f64() + 1.0));
    }
    // Zero-mass rows and columns are dropped; the balanced residue goes to the largest entry.
    let rows: Vec<usize> = (0..m).filter(|&i| a[i] > T::zero()).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| b[j] > T::zero()).collect();
    let supply: Vec<T> = rows.iter().map(|&i| a[i] / ta).collect();
    let mut demand: Vec<T> = cols.iter().map(|&j| b[j] / tb).collect();
    let gap = compensated_sum(supply.iter().copied()) - compensated_sum(demand.iter().copied());
    if let Some(k) =
        (0..demand.len()).max_by(|&x, &y| demand[x].partial_cmp(&demand[y]).unwrap_or(std::cmp::Ordering::Equal))
    {
        demand[k] = demand[k] + gap;
    }
    let nc = cols.len();
    let mut c = vec![T::zero(); rows.len() * nc];
    c.par_chunks_mut(nc.max(1)).enumerate().for_each(|(r, row)| {
        for (k, v) in row.iter_mut().enumerate() {
            *v = cost(rows[r], cols[k]);
        }
    });
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite transport cost".into()));
    }
    let sol = simplex::solve(&supply, &demand, &c)?;

    let mut row_sum = vec![T::zero(); rows.len()];
    let mut col_sum = vec![T::zero(); nc];
    for &(i, j, f) in &sol.flows {
        if f < T::zero() {
            return Err(Error::Numerical("negative coupling entry".into()));
        }
        row_sum[i] = row_sum[i] + f;
        col_sum[j] = col_sum[j] + f;
    }
    let tol = T::lit(PLAN_TOLERANCE);
    if row_sum.iter().zip(&supply).any(|(s, t)| (*s - *t).abs() > tol)
        || col_sum.iter().zip(&demand).any(|(s, t)| (*s - *t).abs() > tol)
    {
        return Err(Error::Numerical("transport plan violates its marginals".into()));
    }
    let entries: Vec<(usize, usize, T)> = sol.flows.iter().map(|&(i, j, f)| (rows[i], cols[j], f)).collect();
    let total = compensated_sum(sol.flows.iter().map(|&(i, j, f)| f * c[i * nc + j])).max(T::zero());
    Ok(TransportPlan {
        entries,
        cost: total,
        w: total.sqrt(),
    })
}

/// Exact `W₂` between two clouds with squared (optionally scaled) Euclidean cost.
pub fn wasserstein_lp<T: Real>(
    a: &DiscreteDistribution<T>,
    b: &DiscreteDistribution<T>,
    opts: &TransportOptions<T>,
) -> Result<TransportPlan<T>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    if let Some(s) = &opts.scale {
        if s.len() != a.dim() {
            return Err(Error::Dimension(format!(
                "{} scale weights for dimension {}",
                s.len(),
                a.dim()
            )));
        }
    }
    let scale = opts.scale.as_deref();
    solve_transport(
        a.masses(),
        b.masses(),
        |i, j| scaled_sq_dist(&a.points[i], &b.points[j], scale),
        opts.budget,
    )
}

/// `W₂` to a point mass: `√(Σ γᵢ ‖xᵢ − x_ref‖²)`, over the state block.
pub fn wasserstein_dirac<T: Real>(snapshot: &EnsembleSnapshot<T>, x_ref: &[T], scale: Option<&[T]>) -> Result<T> {
    if snapshot.samples.iter().any(|s| s.x.len() != x_ref.len()) {
        return Err(Error::Dimension("reference and sample dimensions differ".into()));
    }
    let total = compensated_sum(
        snapshot
            .samples
            .iter()
            .map(|s| s.gamma * scaled_sq_dist(&s.x, x_ref, scale)),
    );
    Ok(total.max(T::zero()).sqrt())
}

/// Exact 1-D `W₂` from the quantile coupling.
pub fn wasserstein_1d<T: Real>(a: &DiscreteDistribution<T>, b: &DiscreteDistribution<T>) -> Result<T> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Dimension("wasserstein_1d needs 1-D distributions".into()));
    }
    let sorted = |d: &DiscreteDistribution<T>| {
        let mut v: Vec<(T, T)> = d
            .points
            .iter()
            .zip(&d.masses)
            .filter(|(_, &m)| m > T::zero())
            .map(|(p, &m)| (p[0], m))
            .collect();
        v.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
        v
    };
    let (sa, sb) = (sorted(a), sorted(b));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (sa[0].1, sb[0].1);
    let mut terms = Vec::with_capacity(sa.len() + sb.len());
    while i < sa.len() && j < sb.len() {
        let step = ra.min(rb);
        let d = sa[i].0 - sb[j].0;
        terms.push(step * d * d);
        ra = ra - step;
        rb = rb - step;
        if ra <= T::zero() {
            i += 1;
            if i < sa.len() {
                ra = sa[i].1;
            }
        }
        if rb <= T::zero() {
            j += 1;
            if j < sb.len() {
                rb = sb[j].1;
            }
        }
    }
    Ok(compensated_sum(terms).max(T::zero()).sqrt())
}

/// `W₂` between `{[xᵢ, pᵢ], γᵢ}` and `{[x_ref, pⱼ], γⱼ}` with per-pair cost
/// `‖S(xᵢ − x_ref)‖² + ‖pᵢ − pⱼ‖²`.
pub fn extended_wasserstein<T: Real>(
    snapshot: &EnsembleSnapshot<T>,
    x_ref: &[T],
    state_scale: Option<&[T]>,
    budget: usize,
) -> Result<TransportPlan<T>> {
    let samples = &snapshot.samples;
    if samples.is_empty() || samples[0].p.is_empty() {
        return Err(Error::InvalidInput("extended distance needs a parameter block".into()));
    }
    if samples.iter().any(|s| s.x.len() != x_ref.len()) {
        return Err(Error::Dimension("reference and sample dimensions differ".into()));
    }
    let state_cost: Vec<T> = samples
        .iter()
        .map(|s| scaled_sq_dist(&s.x, x_ref, state_scale))
        .collect();
    let masses: Vec<T> = samples.iter().map(|s| s.gamma).collect();
    solve_transport(
        &masses,
        &masses,
        |i, j| state_cost[i] + scaled_sq_dist(&samples[i].p, &samples[j].p, None),
        budget,
    )
}

/// Per-axis marginal distances against the joint one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalBound<T> {
    pub per_axis: Vec<T>,
    pub joint: T,
    /// `Σ Wᵢ² ≤ W̄² + 1e-9`.
    pub satisfied: bool,
}

pub fn marginal_bound_check<T: Real>(
    a: &DiscreteDistribution<T>,
    b: &DiscreteDistribution<T>,
) -> Result<MarginalBound<T>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let per_axis = (0..a.dim())
        .map(|k| wasserstein_1d(&a.marginal(k)?, &b.marginal(k)?))
        .collect::<Result<Vec<T>>>()?;
    let joint = wasserstein_lp(a, b, &TransportOptions::default())?.w;
    let lhs = compensated_sum(per_axis.iter().map(|w| *w * *w));
    let satisfied = lhs <= joint * joint + T::lit(1e-9);
    Ok(MarginalBound {
        per_axis,
        joint,
        satisfied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{SnapshotMeta, WeightedSample};

    fn dist(points: &[f64], masses: &[f64]) -> DiscreteDistribution<f64> {
        DiscreteDistribution::new(points.iter().map(|&p| vec![p]).collect(), masses.to_vec()).unwrap()
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let a = DiscreteDistribution::uniform(vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]]).unwrap();
        let plan = wasserstein_lp(&a, &a, &TransportOptions::default()).unwrap();
        assert_eq!(plan.w, 0.0);
        assert!(plan.entries.iter().all(|&(i, j, _)| i == j));
    }

    #[test]
    fn dirac_to_dirac() {
        let a = dist(&[0.0], &[1.0]);
        let b = dist(&[3.0], &[1.0]);
        assert_eq!(wasserstein_lp(&a, &b, &TransportOptions::default()).unwrap().w, 3.0);
        assert_eq!(wasserstein_1d(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn split_mass_to_dirac() {
        let a = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let b = dist(&[0.0], &[1.0]);
        let w = wasserstein_lp(&a, &b, &TransportOptions::default()).unwrap().w;
        assert!((w - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quantile_oracle_examples() {
        let a = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let b = dist(&[2.0, 3.0], &[0.5, 0.5]);
        assert!((wasserstein_1d(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(wasserstein_1d(&a, &a).unwrap(), 0.0);
        let c = dist(&[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]);
        let d = dist(&[0.5, 4.0], &[0.6, 0.4]);
        let lp = wasserstein_lp(&c, &d, &TransportOptions::default()).unwrap().w;
        assert!((lp - wasserstein_1d(&c, &d).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mass_policy() {
        assert!(DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5 + 1e-11]).is_ok());
        let err = DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).unwrap_err();
        assert!(matches!(err, Error::MassImbalance(_)));
    }

    #[test]
    fn zero_masses_are_dropped() {
        let a = dist(&[0.0, 7.0, 1.0], &[0.5, 0.0, 0.5]);
        let b = dist(&[0.0], &[1.0]);
        let plan = wasserstein_lp(&a, &b, &TransportOptions::default()).unwrap();
        assert!(plan.entries.iter().all(|&(i, _, _)| i != 1));
        assert!((plan.w - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn budget_is_enforced() {
        let a = DiscreteDistribution::uniform((0..10).map(|k| vec![k as f64]).collect()).unwrap();
        let opts = TransportOptions {
            scale: None,
            budget: 99,
        };
        let err = wasserstein_lp(&a, &a, &opts).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { size: 100, .. }));
    }

    #[test]
    fn scale_weights_the_cost() {
        let a = DiscreteDistribution::dirac(vec![0.0, 0.0]).unwrap();
        let b = DiscreteDistribution::dirac(vec![1.0, 1.0]).unwrap();
        let opts = TransportOptions {
            scale: Some(vec![3.0_f64, 4.0]),
            ..Default::default()
        };
        assert!((wasserstein_lp(&a, &b, &opts).unwrap().w - 5.0).abs() < 1e-15);
    }

    fn snapshot(xs: &[Vec<f64>], ps: &[Vec<f64>]) -> EnsembleSnapshot<f64> {
        let g = crate::sampling::uniform_masses::<f64>(xs.len());
        EnsembleSnapshot::new(
            1.0,
            xs.iter()
                .zip(ps)
                .zip(g)
                .map(|((x, p), g)| WeightedSample::new(x.clone(), p.clone(), 1.0, g))
                .collect(),
            SnapshotMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn dirac_closed_form() {
        let s = snapshot(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &[vec![], vec![]]);
        assert!((wasserstein_dirac(&s, &[0.0, 0.0], None).unwrap() - 1.0).abs() < 1e-15);
        let one = snapshot(&[vec![3.0, 4.0]], &[vec![]]);
        assert!((wasserstein_dirac(&one, &[0.0, 0.0], None).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn extended_distance_without_parameter_spread() {
        let s = snapshot(&[vec![3.0, 4.0]], &[vec![2.0]]);
        let w = extended_wasserstein(&s, &[0.0, 0.0], None, DEFAULT_BUDGET).unwrap().w;
        assert!((w - 5.0).abs() < 1e-12);
        let at_ref = snapshot(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[vec![1.0], vec![2.0]]);
        assert_eq!(
            extended_wasserstein(&at_ref, &[0.0, 0.0], None, DEFAULT_BUDGET)
                .unwrap()
                .w,
            0.0
        );
    }

    #[test]
    fn lemma_equality_in_one_dimension() {
        let a = dist(&[0.0, 2.0, 3.0], &[0.2, 0.3, 0.5]);
        let b = dist(&[1.0, -1.0], &[0.5, 0.5]);
        let r = marginal_bound_check(&a, &b).unwrap();
        assert!(r.satisfied);
        assert!((r.per_axis[0] - r.joint).abs() < 1e-12);
    }
}

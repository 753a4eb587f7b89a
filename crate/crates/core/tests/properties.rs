//! Invariants checked over generated inputs.

use otrobust::liouville::{propagate, EnsembleSnapshot, FnField, PropagateOptions, SnapshotMeta, WeightedSample};
use otrobust::model::{saturate, ControlInput, LongitudinalState, Plant};
use otrobust::sampling::{halton, mcmc_sample, uniform_masses, BoxDomain, UniformBox};
use otrobust::scalar::compensated_sum;
use otrobust::transport::{
    marginal_bound_check, solve_transport, wasserstein_1d, wasserstein_lp, DiscreteDistribution, TransportOptions,
    DEFAULT_BUDGET,
};
use proptest::prelude::*;

fn masses(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let mut m: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let n = m.len();
    let rest = compensated_sum(m[..n - 1].iter().copied());
    m[n - 1] = 1.0 - rest;
    m
}

fn cloud(dim: usize, max: usize) -> impl Strategy<Value = DiscreteDistribution<f64>> {
    prop::collection::vec((prop::collection::vec(-5.0..5.0_f64, dim), 0.05..1.0_f64), 1..=max).prop_map(|pts| {
        let (points, raw): (Vec<Vec<f64>>, Vec<f64>) = pts.into_iter().unzip();
        DiscreteDistribution::new(points, masses(&raw)).unwrap()
    })
}

fn w2(a: &DiscreteDistribution<f64>, b: &DiscreteDistribution<f64>) -> f64 {
    wasserstein_lp(a, b, &TransportOptions::default()).unwrap().w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn saturation_is_idempotent(t in -1e5..1e5_f64, de in -3.0..3.0_f64) {
        let once = saturate(ControlInput::new(t, de));
        prop_assert_eq!(saturate(once), once);
        prop_assert!((1000.0..=28000.0).contains(&once.thrust));
        prop_assert!(once.delta_e.abs() <= 25f64.to_radians() + 1e-15);
    }

    #[test]
    fn dynamics_finite_inside_envelope(
        theta in -1.0..1.0_f64, v in 150.0..900.0_f64, alpha in -0.17..0.78_f64, q in -1.0..1.0_f64,
        t in 1000.0..28000.0_f64, de in -0.43..0.43_f64,
    ) {
        let d = Plant::f16().derivative(&LongitudinalState::new(theta, v, alpha, q), &ControlInput::new(t, de)).unwrap();
        prop_assert!(d.iter().all(|x| x.is_finite()));
        prop_assert_eq!(d[0], q);
    }

    #[test]
    fn halton_is_deterministic_and_inside(n in 1usize..200, skip in 0usize..50) {
        let domain = BoxDomain::new(vec![-1.0, 0.0, 10.0], vec![1.0, 2.0, 11.0]).unwrap();
        let a = halton(n, &domain, skip).unwrap();
        prop_assert_eq!(&a, &halton(n, &domain, skip).unwrap());
        prop_assert!(a.iter().all(|p| domain.contains(p)));
    }

    #[test]
    fn uniform_masses_sum_exactly_to_one(n in 1usize..5000) {
        let m = uniform_masses::<f64>(n);
        prop_assert_eq!(compensated_sum(m.iter().copied()), 1.0);
        prop_assert!(m.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn mcmc_reproducible_and_on_support(seed in 0u64..1000) {
        let pdf = UniformBox::new(BoxDomain::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap());
        let a = mcmc_sample(&pdf, 50, seed).unwrap();
        prop_assert_eq!(&a, &mcmc_sample(&pdf, 50, seed).unwrap());
        prop_assert!(a.iter().all(|p| (0.0..=1.0).contains(&p[0]) && (-1.0..=1.0).contains(&p[1])));
    }

    #[test]
    fn plan_is_feasible(a in cloud(2, 12), b in cloud(2, 12)) {
        let plan = solve_transport(a.masses(), b.masses(), |i, j| {
            a.points()[i].iter().zip(&b.points()[j]).map(|(x, y)| (x - y).powi(2)).sum()
        }, DEFAULT_BUDGET).unwrap();
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, m) in &plan.entries {
            prop_assert!(m >= 0.0);
            rows[i] += m;
            cols[j] += m;
        }
        for (r, target) in rows.iter().zip(a.masses()) {
            prop_assert!((r - target).abs() <= 1e-9);
        }
        for (c, target) in cols.iter().zip(b.masses()) {
            prop_assert!((c - target).abs() <= 1e-9);
        }
        prop_assert!(plan.entries.len() < a.len() + b.len());
    }

    #[test]
    fn metric_axioms(a in cloud(2, 8), b in cloud(2, 8), c in cloud(2, 8)) {
        let (ab, ba, bc, ac) = (w2(&a, &b), w2(&b, &a), w2(&b, &c), w2(&a, &c));
        prop_assert!(ab >= 0.0);
        prop_assert!(w2(&a, &a) <= 1e-9);
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn lp_matches_sorted_coupling_in_one_dimension(a in cloud(1, 20), b in cloud(1, 20)) {
        prop_assert!((w2(&a, &b) - wasserstein_1d(&a, &b).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn marginals_bound_the_joint_distance(a in cloud(3, 10), b in cloud(3, 10)) {
        prop_assert!(marginal_bound_check(&a, &b).unwrap().satisfied);
    }

    #[test]
    fn translation_shifts_distance_by_mean_offset(a in cloud(2, 10), dx in -3.0..3.0_f64, dy in -3.0..3.0_f64) {
        let shifted = DiscreteDistribution::new(
            a.points().iter().map(|p| vec![p[0] + dx, p[1] + dy]).collect(),
            a.masses().to_vec(),
        ).unwrap();
        prop_assert!((w2(&a, &shifted) - (dx * dx + dy * dy).sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn propagation_preserves_mass(n in 1usize..30, rate in 0.1..2.0_f64) {
        let field = FnField::new(2, move |_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = -rate * x[0] + x[1];
            dx[1] = -x[0] - rate * x[1] + 0.1 * x[0] * x[0];
        });
        let samples = uniform_masses::<f64>(n)
            .into_iter()
            .enumerate()
            .map(|(i, g)| WeightedSample::new(vec![i as f64 / n as f64, 0.5], vec![], 1.0, g))
            .collect();
        let snap = EnsembleSnapshot::new(0.0, samples, SnapshotMeta::default()).unwrap();
        let run = propagate(&snap, &field, &PropagateOptions::new(0.5, 0.01, 10)).unwrap();
        for s in &run.snapshots {
            prop_assert_eq!(s.total_mass(), 1.0);
            prop_assert!(s.samples.iter().all(|x| x.phi() > 0.0));
        }
    }
}

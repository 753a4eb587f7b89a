//! Scenario orchestration and reporting at reduced scale.

use otrobust::harness::{
    mc_compare_with, read_snapshots, run_scenario, run_scenario_with, ControllerKind, IcBox, ScenarioConfig,
    ScenarioKind, Setup, DEG_SCALE,
};
use otrobust::transport::wasserstein_dirac;
use otrobust::Error;

fn small(kind: ScenarioKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(kind);
    cfg.samples = Some(24);
    cfg.t_final = 2.0;
    cfg.emit_every = Some(50);
    cfg
}

#[test]
fn ic_outputs_and_archived_snapshots_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ScenarioKind::Ic);
    cfg.output_dir = Some(dir.path().to_path_buf());
    cfg.long_format = true;
    let report = run_scenario(&cfg).unwrap();
    assert_eq!(report.content_hash, report.compute_hash().unwrap());
    let w_csv = std::fs::read_to_string(dir.path().join("W.csv")).unwrap();
    assert!(w_csv.starts_with("t,sweep,controller,W\n"));
    assert!(w_csv.contains(",lqr-gslqr,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["content_hash"], report.content_hash);

    let x_trim = report.reference_trim.x_trim.to_array();
    for series in &report.series {
        assert_eq!(series.t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(series.w.iter().all(|w| *w >= 0.0));
        let path = dir
            .path()
            .join("snapshots")
            .join(format!("{}_0.csv", series.controller.name()));
        let header = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string();
        assert_eq!(header, "t,id,theta_deg,V,alpha_deg,q_dps,phi,gamma,diverged");
        let archived = read_snapshots(&path).unwrap();
        assert_eq!(archived.len(), series.t.len());
        for (snap, w) in archived.iter().zip(&series.w) {
            let again = wasserstein_dirac(snap, &x_trim, Some(&DEG_SCALE)).unwrap();
            assert!((again - w).abs() <= 1e-9 * w.max(1.0), "{again} vs {w}");
        }
    }
}

#[test]
fn identical_configs_hash_identically() {
    let cfg = small(ScenarioKind::Ic);
    let setup = Setup::new(&cfg).unwrap();
    let a = run_scenario_with(&cfg, &setup).unwrap();
    let b = run_scenario_with(&cfg, &setup).unwrap();
    assert_eq!(a.content_hash, b.content_hash);
    let mut other = cfg.clone();
    other.halton_skip += 1;
    assert_ne!(run_scenario_with(&other, &setup).unwrap().content_hash, a.content_hash);
}

#[test]
fn zero_amplitude_disturbance_reproduces_ic_run() {
    let ic = small(ScenarioKind::Ic);
    let mut dist = small(ScenarioKind::Disturbance);
    dist.disturbance_amplitude_deg = 0.0;
    dist.omega = Some(vec![2.0]);
    dist.emit_every = ic.emit_every;
    let setup = Setup::new(&ic).unwrap();
    let a = run_scenario_with(&ic, &setup).unwrap();
    let b = run_scenario_with(&dist, &setup).unwrap();
    for c in [ControllerKind::Lqr, ControllerKind::Gslqr] {
        assert_eq!(a.series(c, 0.0).unwrap().w, b.series(c, 2.0).unwrap().w);
    }
}

#[test]
fn deterministic_param_case_is_the_trajectory_error() {
    let mut cfg = small(ScenarioKind::Param);
    cfg.param_delta_percent = Some(vec![0.0, 5.0]);
    cfg.controllers = vec![ControllerKind::Lqr];
    let setup = Setup::new(&cfg).unwrap();
    let report = run_scenario_with(&cfg, &setup).unwrap();
    let det = report.series(ControllerKind::Lqr, 0.0).unwrap();
    assert_eq!(det.samples, 1);
    let mc = mc_compare_with(&cfg, &setup).unwrap();
    for (w, errs) in det.w.iter().zip(&mc[0].errors) {
        let norm = errs[0].iter().map(|e| e * e).sum::<f64>().sqrt();
        assert!((w - norm).abs() <= 1e-9);
    }
    let spread = report.series(ControllerKind::Lqr, 5.0).unwrap();
    assert_eq!(spread.samples, 24);
    assert_eq!(spread.histograms[0].axes.len(), 7);
}

#[test]
fn degenerate_box_collapses_to_one_sample() {
    let mut cfg = small(ScenarioKind::Ic);
    cfg.ic_box_deg = Some(IcBox::zero());
    cfg.controllers = vec![ControllerKind::Lqr];
    let report = run_scenario(&cfg).unwrap();
    let s = &report.series[0];
    assert_eq!(s.samples, 1);
    assert!(s.w.iter().all(|w| *w < 0.1), "{:?}", s.w);
}

#[test]
fn mc_quantiles_are_ordered() {
    let cfg = small(ScenarioKind::Ic);
    let setup = Setup::new(&cfg).unwrap();
    for bundle in mc_compare_with(&cfg, &setup).unwrap() {
        for q in &bundle.quantiles {
            for ((lo, mid), hi) in q[0].iter().zip(&q[1]).zip(&q[2]) {
                assert!(lo <= mid && mid <= hi);
            }
        }
    }
}

#[test]
fn config_errors_are_reported_as_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"kind": "ic", "dt": -1}"#).unwrap();
    assert!(matches!(ScenarioConfig::load(&path), Err(Error::Config(_))));
    std::fs::write(&path, r#"{"kind": "param"}"#).unwrap();
    assert!(matches!(ScenarioConfig::load(&path), Err(Error::Config(_))));
    std::fs::write(&path, r#"{"kind": "ic", "typo": 1}"#).unwrap();
    assert!(matches!(ScenarioConfig::load(&path), Err(Error::Config(_))));
}

#[test]
fn shipped_configs_load() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["ic.json", "param.json", "disturbance.json"] {
        ScenarioConfig::load(root.join(name)).unwrap();
    }
}

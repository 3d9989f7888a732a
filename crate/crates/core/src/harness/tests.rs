use super::*;

fn cheap() -> FileConfig {
    let mut c = FileConfig::single_tls();
    c.control.gate_time_ns = 10.0;
    c.control.slices_per_ns = 2.0;
    c.control.ramp_time_ns = 1.0;
    c.optimization.max_iterations = 3;
    c.optimization.starts = 1;
    c
}

fn read_body(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn optimize_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cheap();
    let o = run_optimize(&cfg, 1, dir.path()).unwrap();
    for f in ["pulse.csv", "history.csv", "determinant.csv", "summary.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let pulse = read_pulse_csv(&dir.path().join("pulse.csv")).unwrap();
    assert_eq!(pulse.values, o.result.best_control.values);
    let header = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(header.contains(&cfg.hash()));
    let summary: toml::Table = std::fs::read_to_string(dir.path().join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(summary["beats_baseline"].as_bool(), Some(o.beats_baseline));
    assert_eq!(o.beats_baseline, o.result.final_error < BASELINE_ERROR);
}

#[test]
fn sweep_is_worker_independent() {
    let mut cfg = cheap();
    cfg.sweep = Some(SweepSection {
        axes: vec![
            Axis { name: "qudit.t1_ns".into(), values: vec![500.0, 5000.0] },
            Axis { name: "tls1.coupling_mhz".into(), values: vec![0.0, 60.0] },
        ],
    });
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = run_sweep(&cfg, 1, Some(a.path())).unwrap();
    let three = run_sweep(&cfg, 3, Some(b.path())).unwrap();
    assert_eq!(one, three);
    assert_eq!(one.len(), 4);
    assert_eq!(one[1].params, vec![500.0, 60.0]);
    assert_eq!(one[2].point.seed, derive_seed(cfg.optimization.seed, 2));
    assert_eq!(
        std::fs::read_to_string(a.path().join("sweep.csv")).unwrap(),
        std::fs::read_to_string(b.path().join("sweep.csv")).unwrap()
    );
}

#[test]
fn failed_points_are_recorded() {
    let mut cfg = cheap();
    cfg.sweep = Some(SweepSection {
        axes: vec![Axis { name: "tls1.t1_ns".into(), values: vec![100.0, -1.0] }],
    });
    let dir = tempfile::tempdir().unwrap();
    let rows = run_sweep(&cfg, 1, Some(dir.path())).unwrap();
    assert!(rows[0].point.outcome.is_ok());
    assert!(rows[1].point.outcome.as_ref().unwrap_err().contains("tls[1].t1_ns"));
    assert!(read_body(&dir.path().join("sweep.csv")).contains("failed:"));
}

#[test]
fn sweep_axis_validation() {
    let mut cfg = cheap();
    assert!(run_sweep(&cfg, 1, None).is_err());
    let axis = |n: &str| Axis { name: n.into(), values: vec![1.0] };
    cfg.sweep = Some(SweepSection { axes: vec![axis("qudit.t1_ns"), axis("qudit.t1_ns"), axis("qudit.t1_ns")] });
    assert!(run_sweep(&cfg, 1, None).is_err());
    cfg.sweep = Some(SweepSection { axes: vec![axis("nope.t1_ns")] });
    assert!(run_sweep(&cfg, 1, None).is_err());
}

#[test]
fn second_tls_placement() {
    let c = with_second_tls(&FileConfig::single_tls(), 50.0, 40.0, 200.0).unwrap();
    assert_eq!(c.tls.len(), 2);
    assert_eq!(c.tls[1].detuning_mhz, 600.0);
    let m = c.model().unwrap();
    let p = crate::presets::two_tls_model(50.0, 40.0, 200.0);
    assert!((m.tls[1].detuning - p.tls[1].detuning).abs() < 1e-12);
    assert_eq!(TABLE1.len(), 12);
}

#[test]
fn statistics() {
    assert_eq!(stats(&[3.0, 1.0, 2.0]), (1.0, 3.0, 2.0));
    assert_eq!(stats(&[4.0, 1.0, 2.0, 3.0]), (1.0, 4.0, 2.5));
    assert!(stats(&[1.0, f64::NAN]).0.is_nan());
}

#[test]
fn random_targets_report() {
    let mut cfg = cheap();
    cfg.random_targets.count = 3;
    let dir = tempfile::tempdir().unwrap();
    let r = run_random_targets(&cfg, 2, Some(dir.path())).unwrap();
    assert_eq!(r.points.len(), 3);
    assert!(r.min <= r.median && r.median <= r.max);
    assert!((r.spread - r.max / r.min).abs() < 1e-12);
    assert!(dir.path().join("random_targets_summary.csv").exists());
}

#[test]
fn simulate_zero_pulse_identity_target() {
    let mut cfg = cheap();
    cfg.tls.clear();
    cfg.qudit.t1_ns = f64::INFINITY;
    cfg.qudit.anharmonicity_mhz = 0.0;
    cfg.optimization.target = "identity".into();
    let zero = PiecewiseControl::constant(10.0, 20, 0.0).unwrap();
    let r = simulate(&cfg, &zero).unwrap();
    assert!(r.gate_error < 1e-12);
    assert!((r.average_fidelity - 1.0).abs() < 1e-12);
    let tr = run_nonmarkov(&cfg, None, None).unwrap();
    assert!(tr.det_abs.iter().all(|d| (d - 1.0).abs() < 1e-10));
}

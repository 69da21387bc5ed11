mod common;

use common::*;
use kernreg::ingest::{self, Trajectory, TrajectoryFormat};
use kernreg::manifest::{manifest_path, RunManifest};
use kernreg_core::innerprod;
use kernreg_core::{Isometry, KernelParams, Vector3};

#[test]
fn register_self_gives_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = save(&fixture_cloud(1, 300), dir.path(), "a.ply");
    let config = write(dir.path(), "c.json", FAST_CONFIG);
    let out = dir.path().join("t.txt");
    let trace = dir.path().join("trace.csv");
    let o = kernreg(&["register", "--source", p(&cloud), "--target", p(&cloud), "--config", p(&config), "--output", p(&out), "--trace", p(&trace)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "1 0 0 0 0 1 0 0 0 0 1 0\n");

    let trace = std::fs::read_to_string(&trace).unwrap();
    assert!(trace.starts_with("iteration,lengthscale,F,indicator,step,twist_norm\n"));
    assert!(trace.lines().count() > 1);

    let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest.input_hashes.len(), 2);
    assert_eq!(manifest.input_hashes[0].sha256.len(), 64);
    assert!(manifest.config_hash.is_some());
    assert_eq!(manifest.result_summary["converged"], true);
    assert_eq!(manifest.tool_version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn register_recovers_synthetic_transform() {
    let dir = tempfile::tempdir().unwrap();
    let target = fixture_cloud(2, 600);
    let truth = Isometry::exp(&kernreg_core::Twist::from_array([0.02, -0.05, 0.06, 0.03, -0.02, 0.01])).unwrap();
    let source = target.transformed(&truth.inverse());
    let (t_path, s_path) = (save(&target, dir.path(), "x.ply"), save(&source, dir.path(), "z.ply"));
    let config = write(dir.path(), "c.json", COLOR_CONFIG);
    let out = dir.path().join("t.txt");
    let o = kernreg(&["register", "--source", p(&s_path), "--target", p(&t_path), "--config", p(&config), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (rot, trans) = pose_error(&truth, &read_transform(&out));
    assert!(rot < 0.5 && trans < 0.01 * target.diameter(), "{rot} deg {trans} m");

    // Starting from the truth stays there.
    let init = write(dir.path(), "init.txt", &ingest::trajectory::kitti_line(&truth, None));
    let o = kernreg(&["register", "--source", p(&s_path), "--target", p(&t_path), "--config", p(&config), "--initial", p(&init), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (rot, trans) = pose_error(&truth, &read_transform(&out));
    assert!(rot < 1e-3 && trans < 1e-5, "{rot} deg {trans} m");
}

#[test]
fn non_convergence_exits_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = save(&fixture_cloud(3, 200), dir.path(), "a.ply");
    let config = write(dir.path(), "c.json", r#"{"registration": {"init_lengthscale": 0.1, "max_iterations": 1}}"#);
    let out = dir.path().join("t.txt");
    let o = kernreg(&["register", "--source", p(&cloud), "--target", p(&cloud), "--config", p(&config), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.exists());
}

#[test]
fn schema_mismatch_is_a_single_line_error_naming_both() {
    let dir = tempfile::tempdir().unwrap();
    let colored = save(&fixture_cloud(4, 100), dir.path(), "c.ply");
    let plain = save(&fixture_cloud(4, 100).geometric_only(), dir.path(), "g.ply");
    let config = write(dir.path(), "c.json", COLOR_CONFIG);
    let out = dir.path().join("t.txt");
    let o = kernreg(&["register", "--source", p(&plain), "--target", p(&colored), "--config", p(&config), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[schema_mismatch]:"), "{err}");
    assert!(err.contains("[color:color x3]") || err.contains("color:colorx3"), "{err}");
    assert!(err.contains("[geometric]"), "{err}");
}

#[test]
fn errors_exit_one_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = save(&fixture_cloud(5, 50), dir.path(), "a.ply");
    let far = save(&fixture_cloud(5, 50).transformed(&Isometry::from_translation(Vector3::new(50.0, 0.0, 0.0))), dir.path(), "far.ply");
    let config = write(dir.path(), "c.json", FAST_CONFIG);
    let out = dir.path().join("t.txt");
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["register", "--source", "missing.ply", "--target", p(&cloud), "--config", p(&config), "--output", p(&out)], "error[io]"),
        (vec!["register", "--source", p(&far), "--target", p(&cloud), "--config", p(&config), "--output", p(&out)], "error[no_overlap]"),
        (vec!["register", "--source", p(&cloud)], "error[usage]"),
        (vec!["eval", "--est", "a", "--gt", "b", "--metric", "nope", "--output", "o"], "error[usage]"),
    ];
    for (args, prefix) in cases {
        let o = kernreg(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with(prefix), "{err}");
    }
    let bad = write(dir.path(), "bad.json", r#"{"registration": {"init_lengthscale": -1}}"#);
    let o = kernreg(&["register", "--source", p(&cloud), "--target", p(&cloud), "--config", p(&bad), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("init_lengthscale"), "{}", stderr(&o));
}

#[test]
fn sequence_of_identical_frames_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    let cloud = fixture_cloud(6, 200);
    for k in 0..3 {
        save(&cloud, &frames, &format!("frame_{k:03}.ply"));
    }
    let config = write(dir.path(), "c.json", FAST_CONFIG);
    let out = dir.path().join("traj.txt");
    let o = kernreg(&["sequence", "--dir", p(&frames), "--pattern", "*.ply", "--config", p(&config), "--traj-format", "kitti", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "1 0 0 0 0 1 0 0 0 0 1 0\n".repeat(3));
    let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(manifest.result_summary["fallback_frames"], serde_json::json!([]));
    assert_eq!(manifest.input_hashes.len(), 3);

    let tum = dir.path().join("traj.tum");
    let o = kernreg(&["sequence", "--dir", p(&frames), "--pattern", "*.ply", "--config", p(&config), "--traj-format", "tum", "--output", p(&tum)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&tum).unwrap().lines().next().unwrap(), "0 0 0 0 0 0 0 1");
}

#[test]
fn constant_motion_sequence_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let world = fixture_cloud(7, 500).geometric_only();
    let motion = Isometry::exp(&kernreg_core::Twist::from_array([0.0, 0.0, 0.04, 0.03, 0.01, 0.0])).unwrap();
    let mut truth = vec![Isometry::identity()];
    for k in 0..3 {
        save(&world.transformed(&truth[k].inverse()), dir.path(), &format!("f{k}.ply"));
        truth.push(truth[k].compose(&motion));
    }
    truth.pop();
    let config = write(dir.path(), "c.json", FAST_CONFIG);
    let out = dir.path().join("traj.txt");
    let o = kernreg(&["sequence", "--dir", p(dir.path()), "--pattern", "f*.ply", "--config", p(&config), "--traj-format", "kitti", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let est = ingest::read_trajectory(&out, TrajectoryFormat::Kitti).unwrap();
    for (k, (e, t)) in est.poses.iter().zip(&truth).enumerate() {
        let (rot, trans) = pose_error(t, e);
        assert!(rot < 1.0 && trans < 0.02 * world.diameter(), "frame {k}: {rot} deg {trans} m");
    }
}

#[test]
fn missing_frame_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = fixture_cloud(8, 50);
    for k in [0, 1, 3] {
        save(&cloud, dir.path(), &format!("frame_{k:02}.ply"));
    }
    let config = write(dir.path(), "c.json", FAST_CONFIG);
    let out = dir.path().join("traj.txt");
    let o = kernreg(&["sequence", "--dir", p(dir.path()), "--pattern", "frame_*.ply", "--config", p(&config), "--traj-format", "kitti", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("frame_02.ply"), "{}", stderr(&o));
}

#[test]
fn indicator_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = fixture_cloud(9, 300);
    let a = save(&cloud, dir.path(), "a.ply");
    let far = save(&cloud.transformed(&Isometry::from_translation(Vector3::new(10.0, 0.0, 0.0))), dir.path(), "far.ply");
    let config = write(dir.path(), "c.json", r#"{"registration": {"init_lengthscale": 0.05}}"#);
    let out = dir.path().join("i.json");
    let o = kernreg(&["indicator", "--source", p(&a), "--target", p(&a), "--config", p(&config), "--exact", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let value: f64 = text.lines().next().unwrap().strip_prefix("indicator ").unwrap().parse().unwrap();
    let geometric = cloud.geometric_only();
    let lib = innerprod::indicator(&geometric, &geometric, &Isometry::identity(), &KernelParams::geometric(0.05), 3.0, 1e-4).unwrap();
    assert_eq!(value, kernreg::report::format_number(lib, Some(9)).parse::<f64>().unwrap());
    assert!(text.contains("exact_cosine 1\n"), "{text}");
    assert!(manifest_path(&out).exists());

    let o = kernreg(&["indicator", "--source", p(&far), "--target", p(&a), "--config", p(&config)]);
    assert_eq!(stdout(&o), "indicator 0\n");
}

#[test]
fn well_separated_self_indicator_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let positions = (0..64).map(|k| Vector3::new((k % 4) as f64, ((k / 4) % 4) as f64, (k / 16) as f64)).collect();
    let a = save(&kernreg_core::PointCloud::from_positions(positions), dir.path(), "grid.ply");
    let config = write(dir.path(), "c.json", r#"{"registration": {"init_lengthscale": 0.1}}"#);
    let o = kernreg(&["indicator", "--source", p(&a), "--target", p(&a), "--config", p(&config)]);
    let value: f64 = stdout(&o).trim().strip_prefix("indicator ").unwrap().parse().unwrap();
    assert!((value - 1.0).abs() <= 1e-6);
}

#[test]
fn sweep_zero_row_is_the_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let a = save(&fixture_cloud(10, 300), dir.path(), "a.ply");
    let config = write(dir.path(), "c.json", r#"{"registration": {"init_lengthscale": 0.1}}"#);
    for (axis, range) in [("rotation", "20"), ("translation", "0.2")] {
        let out = dir.path().join(format!("{axis}.csv"));
        let o = kernreg(&["sweep", "--cloud", p(&a), "--config", p(&config), "--axis", axis, "--range", range, "--steps", "11", "--output", p(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let csv = std::fs::read_to_string(&out).unwrap();
        let values: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(values.len(), 11);
        assert!(values[1..].iter().all(|&v| v < values[0]), "{csv}");
    }
}

#[test]
fn eval_reports_zero_and_one_percent() {
    let dir = tempfile::tempdir().unwrap();
    let gt: Vec<Isometry> = (0..=800).map(|k| Isometry::from_translation(Vector3::new(k as f64, 0.0, 0.0))).collect();
    let est: Vec<Isometry> = gt.iter().map(|p| Isometry::from_translation(p.translation * 1.01)).collect();
    let gt_path = dir.path().join("gt.txt");
    let est_path = dir.path().join("est.txt");
    ingest::write_trajectory(&gt_path, &Trajectory::untimed(gt), TrajectoryFormat::Kitti, None).unwrap();
    ingest::write_trajectory(&est_path, &Trajectory::untimed(est), TrajectoryFormat::Kitti, None).unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = kernreg(&["eval", "--est", p(&est_path), "--gt", p(&gt_path), "--metric", "kitti", "--output", p(&out), "--csv", p(&csv)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "translation_percent 1 rotation_deg_per_m 0\n");
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 9);

    let o = kernreg(&["eval", "--est", p(&gt_path), "--gt", p(&gt_path), "--metric", "kitti", "--output", p(&out)]);
    assert_eq!(stdout(&o), "translation_percent 0 rotation_deg_per_m 0\n");

    let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
    let poses: Vec<Isometry> = times.iter().map(|&t| Isometry::from_translation(Vector3::new(t, 0.0, 0.0))).collect();
    let tum = dir.path().join("gt.tum");
    ingest::write_trajectory(&tum, &Trajectory::timed(times, poses), TrajectoryFormat::Tum, None).unwrap();
    let o = kernreg(&["eval", "--est", p(&tum), "--gt", p(&tum), "--metric", "tum", "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "trans_rmse 0 rot_rmse 0\n");
}

#[test]
fn bench_is_deterministic_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let csv = dir.path().join("a.csv");
    let args = |out: &str, threads: &str| {
        vec!["--threads".to_string(), threads.into(), "bench".into(), "--trials".into(), "3".into(), "--points".into(), "300".into(), "--output".into(), out.into()]
    };
    let mut first = args(p(&a), "1");
    first.extend(["--csv".to_string(), p(&csv).to_string()]);
    let o = kernreg(&first.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = kernreg(&args(p(&b), "3").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(report["trials"].as_array().unwrap().len(), 3);
}

#[test]
fn rgbd_frames_become_colored_clouds() {
    use kernreg::ingest::pnm::{write_pgm16, write_ppm};
    use kernreg::ingest::Image;
    let dir = tempfile::tempdir().unwrap();
    let depth = Image::from_fn(64, 48, 1, |u, v, _| 1000 + (u * 7 + v * 3) as u16);
    let rgb = Image::from_fn(64, 48, 3, |u, v, c| ((u * 31 + v * 17 + c * 90) % 256) as u8);
    let (mut d, mut c) = (Vec::new(), Vec::new());
    write_pgm16(&depth, &mut d).unwrap();
    write_ppm(&rgb, &mut c).unwrap();
    std::fs::write(dir.path().join("d.pgm"), d).unwrap();
    std::fs::write(dir.path().join("c.ppm"), c).unwrap();
    let config = write(
        dir.path(),
        "c.json",
        r#"{"registration": {"init_lengthscale": 0.1},
            "selector": {"target_min": 10, "target_max": 500},
            "camera": {"fx": 50.0, "fy": 50.0, "cx": 32.0, "cy": 24.0, "skip_top_rows": 0}}"#,
    );
    let out = dir.path().join("cloud.ply");
    let o = kernreg(&["rgbd-to-cloud", "--depth", p(&dir.path().join("d.pgm")), "--rgb", p(&dir.path().join("c.ppm")), "--config", p(&config), "--output", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cloud = ingest::read_cloud(&out).unwrap();
    assert!(!cloud.is_empty());
    assert_eq!(cloud.schema().channels()[0].name, "color");
}

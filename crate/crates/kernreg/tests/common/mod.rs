#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

use kernreg::ingest;
use kernreg_core::{ChannelKind, FeatureChannel, FeatureSchema, Isometry, PointCloud, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn kernreg(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_kernreg")).args(args).output().expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Geometry-only config with a short schedule.
pub const FAST_CONFIG: &str = r#"{"registration": {"init_lengthscale": 0.1, "min_lengthscale": 0.02,
    "first_frame_lengthscale": 0.1, "subsequent_lengthscale": 0.1}}"#;

pub const COLOR_CONFIG: &str = r#"{"kernel": {"channels": {"color": {"lengthscale": 0.2}}},
    "registration": {"init_lengthscale": 0.1, "min_lengthscale": 0.02}}"#;

/// Anisotropic blob plus an offset cluster, with random colors.
pub fn fixture_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    for k in 0..n {
        let u = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        positions.push(if k % 4 == 0 {
            Vector3::new(0.6, 0.3, -0.2) + u * 0.08
        } else {
            u.component_mul(&Vector3::new(0.5, 0.3, 0.15))
        });
    }
    let colors = (0..3 * n).map(|_| rng.random::<f64>()).collect();
    let schema = FeatureSchema::new(vec![FeatureChannel::new("color", 3, ChannelKind::Color)]).unwrap();
    PointCloud::new(positions, colors, schema).unwrap()
}

pub fn save(cloud: &PointCloud, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    ingest::write_cloud(cloud, &path).unwrap();
    path
}

pub fn read_transform(path: &Path) -> Isometry {
    let t = ingest::read_trajectory(path, ingest::TrajectoryFormat::Kitti).unwrap();
    assert_eq!(t.len(), 1);
    t.poses[0]
}

pub fn pose_error(truth: &Isometry, est: &Isometry) -> (f64, f64) {
    let e = truth.inverse().compose(est);
    (e.rotation_angle().to_degrees(), e.translation.norm())
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

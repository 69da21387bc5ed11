//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's numerics; it only uses the public
//! data types to move values in and out.

#![allow(dead_code)]

use std::collections::BTreeSet;

use kernreg_core::{
    ChannelKernel, ChannelKind, FeatureChannel, FeatureSchema, Isometry, KernelForm, KernelParams, Matrix3,
    PointCloud, Vector3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rodrigues' formula for the rotation by `|w|` about `w / |w|`.
pub fn rodrigues(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let k = w / theta;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
}

/// Rotation angle in `[0, π]`, via `atan2` of the skew and trace parts.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm() * 0.5;
    let c = (r.trace() - 1.0) * 0.5;
    s.atan2(c)
}

pub fn random_isometry(rng: &mut ChaCha8Rng, max_angle_deg: f64, max_translation: f64) -> Isometry {
    let angle = rng.random_range(0.0..=max_angle_deg).to_radians();
    let w = unit_vector(rng) * angle;
    let t = unit_vector(rng) * rng.random_range(0.0..=max_translation);
    Isometry::new(rodrigues(&w), t)
}

pub fn color_intensity_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        FeatureChannel::new("color", 3, ChannelKind::Color),
        FeatureChannel::new("intensity", 1, ChannelKind::Intensity),
    ])
    .unwrap()
}

/// Positions uniform in `[-half, half]³`; features uniform in `[0, 1]`.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, half: f64, schema: &FeatureSchema) -> PointCloud {
    let positions = (0..n)
        .map(|_| Vector3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)))
        .collect();
    let features = (0..n * schema.total_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
    PointCloud::new(positions, features, schema.clone()).unwrap()
}

/// Cloud with no rotational or reflective symmetry: an anisotropic Gaussian
/// blob plus an off-center cluster.
pub fn asymmetric_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let mut positions = Vec::with_capacity(n);
    for k in 0..n {
        let g = |rng: &mut ChaCha8Rng| {
            // Box-Muller.
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let p = if k % 4 == 0 {
            Vector3::new(0.6 + 0.05 * g(rng), 0.3 + 0.05 * g(rng), -0.2 + 0.05 * g(rng))
        } else {
            Vector3::new(0.4 * g(rng), 0.2 * g(rng), 0.1 * g(rng))
        };
        positions.push(p);
    }
    PointCloud::from_positions(positions)
}

fn channel_value(k: &ChannelKernel, u: &[f64], v: &[f64]) -> f64 {
    match k.form {
        KernelForm::SquaredExponential => {
            let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            k.sigma.powi(2) * (-d2 / (2.0 * k.lengthscale.powi(2))).exp()
        }
        KernelForm::Linear => u.iter().zip(v).map(|(a, b)| a * b).sum(),
    }
}

/// Appearance coefficient: the product of per-channel kernels.
pub fn coefficient(x: &PointCloud, i: usize, z: &PointCloud, j: usize, params: &KernelParams) -> f64 {
    let (u, v) = (x.feature_row(i), z.feature_row(j));
    let mut off = 0;
    let mut c = 1.0;
    for (ch, k) in x.schema().channels().iter().zip(&params.per_channel) {
        c *= channel_value(k, &u[off..off + ch.dim], &v[off..off + ch.dim]);
        off += ch.dim;
    }
    c
}

pub fn transform_point(t: &Isometry, p: &Vector3<f64>) -> Vector3<f64> {
    t.rotation * p + t.translation
}

/// Full double sum `Σ_ij c_ij σ² exp(−‖x_i − T z_j‖² / 2ℓ²)`.
pub fn dense_objective(x: &PointCloud, z: &PointCloud, t: &Isometry, params: &KernelParams) -> f64 {
    let mut total = 0.0;
    for j in 0..z.len() {
        let q = transform_point(t, &z.positions()[j]);
        for i in 0..x.len() {
            let d2 = (x.positions()[i] - q).norm_squared();
            total += coefficient(x, i, z, j, params)
                * params.sigma.powi(2)
                * (-d2 / (2.0 * params.lengthscale.powi(2))).exp();
        }
    }
    total
}

/// `F(T₊) − F(T₋)` summed term by term, which keeps finite differences
/// free of the cancellation in subtracting two large totals.
pub fn dense_objective_difference(
    x: &PointCloud,
    z: &PointCloud,
    t_plus: &Isometry,
    t_minus: &Isometry,
    params: &KernelParams,
) -> f64 {
    let k = |d2: f64| (-d2 / (2.0 * params.lengthscale.powi(2))).exp();
    let mut total = 0.0;
    for j in 0..z.len() {
        let qp = transform_point(t_plus, &z.positions()[j]);
        let qm = transform_point(t_minus, &z.positions()[j]);
        for i in 0..x.len() {
            let xi = x.positions()[i];
            let diff = k((xi - qp).norm_squared()) - k((xi - qm).norm_squared());
            total += coefficient(x, i, z, j, params) * params.sigma.powi(2) * diff;
        }
    }
    total
}

/// Pairs with `‖x_i − T z_j‖ ≤ cutoff_multiplier·ℓ` and `c_ij > c_min`.
pub fn brute_force_pairs(
    x: &PointCloud,
    z: &PointCloud,
    t: &Isometry,
    params: &KernelParams,
    cutoff_multiplier: f64,
    c_min: f64,
) -> BTreeSet<(u32, u32)> {
    let r = cutoff_multiplier * params.lengthscale;
    let mut out = BTreeSet::new();
    for j in 0..z.len() {
        let q = transform_point(t, &z.positions()[j]);
        for i in 0..x.len() {
            if (x.positions()[i] - q).norm_squared() <= r * r && coefficient(x, i, z, j, params) > c_min {
                out.insert((i as u32, j as u32));
            }
        }
    }
    out
}

/// Relative-pose error `(Q_a⁻¹Q_b)⁻¹(P_a⁻¹P_b)` as (translation norm, angle in rad).
pub fn relative_pose_error(p_a: &Isometry, p_b: &Isometry, q_a: &Isometry, q_b: &Isometry) -> (f64, f64) {
    let rel = |a: &Isometry, b: &Isometry| {
        let r = a.rotation.transpose() * b.rotation;
        let t = a.rotation.transpose() * (b.translation - a.translation);
        (r, t)
    };
    let (r_gt, t_gt) = rel(q_a, q_b);
    let (r_est, t_est) = rel(p_a, p_b);
    let r_err = r_gt.transpose() * r_est;
    let t_err = r_gt.transpose() * (t_est - t_gt);
    (t_err.norm(), rotation_angle(&r_err))
}

/// Reference odometry drift: mean (% translation, deg/m rotation) per length,
/// `None` for lengths without a subsequence.
pub fn reference_drift(est: &[Isometry], gt: &[Isometry], lengths: &[f64]) -> Vec<Option<(f64, f64, usize)>> {
    let mut dist = vec![0.0];
    for k in 1..gt.len() {
        let d = dist[k - 1] + (gt[k].translation - gt[k - 1].translation).norm();
        dist.push(d);
    }
    lengths
        .iter()
        .map(|&len| {
            let (mut t_sum, mut r_sum, mut n) = (0.0, 0.0, 0usize);
            for s in 0..gt.len() {
                let Some(e) = (s..gt.len()).find(|&e| dist[e] >= dist[s] + len) else { continue };
                let (t, r) = relative_pose_error(&est[s], &est[e], &gt[s], &gt[e]);
                t_sum += 100.0 * t / len;
                r_sum += r.to_degrees() / len;
                n += 1;
            }
            (n > 0).then(|| (t_sum / n as f64, r_sum / n as f64, n))
        })
        .collect()
}

/// Reference RPE for trajectories sampled at identical timestamps:
/// pairs `(i, j)` with `t_j` the nearest sample to `t_i + delta` within `tol`.
pub fn reference_rpe(times: &[f64], est: &[Isometry], gt: &[Isometry], delta: f64, tol: f64) -> Option<(f64, f64, usize)> {
    let (mut t2, mut r2, mut n) = (0.0, 0.0, 0usize);
    for i in 0..times.len() {
        let best = (0..times.len())
            .filter(|&j| (times[j] - (times[i] + delta)).abs() <= tol)
            .min_by(|&a, &b| (times[a] - times[i] - delta).abs().total_cmp(&(times[b] - times[i] - delta).abs()));
        let Some(j) = best else { continue };
        if j <= i {
            continue;
        }
        let dt = times[j] - times[i];
        let (t, r) = relative_pose_error(&est[i], &est[j], &gt[i], &gt[j]);
        t2 += (t / dt).powi(2);
        r2 += (r.to_degrees() / dt).powi(2);
        n += 1;
    }
    (n > 0).then(|| ((t2 / n as f64).sqrt(), (r2 / n as f64).sqrt(), n))
}

/// Smooth random trajectory: piecewise-constant random body velocities.
pub fn random_trajectory(rng: &mut ChaCha8Rng, n: usize, step: f64) -> Vec<Isometry> {
    let mut poses = vec![Isometry::identity()];
    for _ in 1..n {
        let motion = Isometry::new(
            rodrigues(&(unit_vector(rng) * rng.random_range(0.0..0.02))),
            Vector3::new(step * rng.random_range(0.8..1.2), 0.05 * rng.random_range(-1.0..1.0), 0.0),
        );
        let last = *poses.last().unwrap();
        poses.push(Isometry::new(last.rotation * motion.rotation, last.rotation * motion.translation + last.translation));
    }
    poses
}

/// `poses` with independent small random errors on every pose.
pub fn perturb_trajectory(rng: &mut ChaCha8Rng, poses: &[Isometry], angle: f64, offset: f64) -> Vec<Isometry> {
    poses
        .iter()
        .map(|p| {
            let e = Isometry::new(rodrigues(&(unit_vector(rng) * angle)), unit_vector(rng) * offset);
            Isometry::new(p.rotation * e.rotation, p.rotation * e.translation + p.translation)
        })
        .collect()
}

//! Trajectory error metrics and indicator sweeps.

use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{invalid, Error, Result};
use crate::innerprod;
use crate::kernels::KernelParams;
use crate::se3::Isometry;

/// Subsequence lengths (m) evaluated by [`kitti_drift`].
pub const DRIFT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];
/// Width of the ground-truth speed bins (m/s).
pub const SPEED_BIN_WIDTH: f64 = 2.0;
/// Default frame rate used to convert frame counts into speeds (Hz).
pub const DEFAULT_FRAME_RATE: f64 = 10.0;
/// Maximum timestamp difference for pose association (s).
pub const ASSOCIATION_TOLERANCE: f64 = 0.02;

const RAD_TO_DEG: f64 = 180.0 / core::f64::consts::PI;

/// Mean drift over a group of subsequences.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftBin {
    pub translation_percent: f64,
    pub rotation_deg_per_m: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LengthDrift {
    pub length: f64,
    /// `None` when the trajectory has no subsequence of this length.
    pub drift: Option<DriftBin>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeedDrift {
    /// Lower bin edge (m/s); the bin is `[speed_min, speed_min + SPEED_BIN_WIDTH)`.
    pub speed_min: f64,
    pub drift: DriftBin,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftReport {
    /// Mean over every valid subsequence; `None` when there is none.
    pub overall: Option<DriftBin>,
    pub per_length: Vec<LengthDrift>,
    /// Non-empty speed bins in ascending order.
    pub per_speed: Vec<SpeedDrift>,
}

impl DriftReport {
    pub fn translation_percent(&self) -> Option<f64> {
        self.overall.map(|b| b.translation_percent)
    }

    pub fn rotation_deg_per_m(&self) -> Option<f64> {
        self.overall.map(|b| b.rotation_deg_per_m)
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    t: f64,
    r: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, t: f64, r: f64) {
        self.t += t;
        self.r += r;
        self.n += 1;
    }

    fn finish(self) -> Option<DriftBin> {
        (self.n > 0).then(|| DriftBin {
            translation_percent: self.t / self.n as f64,
            rotation_deg_per_m: self.r / self.n as f64,
            count: self.n,
        })
    }
}

/// Translation norm and rotation angle (rad) of `(Q_a⁻¹ Q_b)⁻¹ (P_a⁻¹ P_b)`.
///
/// Both come from differences of the two relative motions: the translation
/// is `R_gtᵀ(t_est − t_gt)` and the angle follows from the chord
/// `‖R_est − R_gt‖_F = 2√2 sin(θ/2)`, so equal motions give exactly zero.
fn relative_error(p_a: &Isometry, p_b: &Isometry, q_a: &Isometry, q_b: &Isometry) -> (f64, f64) {
    let gt = q_a.inverse().compose(q_b);
    let est = p_a.inverse().compose(p_b);
    let trans = (gt.rotation.transpose() * (est.translation - gt.translation)).norm();
    let chord = (est.rotation - gt.rotation).norm() / (2.0 * core::f64::consts::SQRT_2);
    (trans, 2.0 * libm::asin(chord.min(1.0)))
}

/// Cumulative path length along `poses`.
pub fn path_distances(poses: &[Isometry]) -> Vec<f64> {
    let mut out = Vec::with_capacity(poses.len());
    let mut acc = 0.0;
    for (k, p) in poses.iter().enumerate() {
        if k > 0 {
            acc += (p.translation - poses[k - 1].translation).norm();
        }
        out.push(acc);
    }
    out
}

/// KITTI-style drift at the default 10 Hz frame rate.
pub fn kitti_drift(estimated: &[Isometry], ground_truth: &[Isometry]) -> Result<DriftReport> {
    kitti_drift_with_rate(estimated, ground_truth, DEFAULT_FRAME_RATE)
}

/// Relative-pose drift averaged over every start index and every length in
/// [`DRIFT_LENGTHS`]. The subsequence from `s` ends at the first index `e`
/// whose ground-truth path length from `s` is at least `L`. Translation
/// drift is `‖t(E)‖ / L` in percent and rotation drift `angle(E) / L` in
/// deg/m, with `E = (Q_s⁻¹Q_e)⁻¹(P_s⁻¹P_e)`.
pub fn kitti_drift_with_rate(estimated: &[Isometry], ground_truth: &[Isometry], frame_rate: f64) -> Result<DriftReport> {
    if estimated.len() != ground_truth.len() {
        return Err(invalid(alloc::format!(
            "trajectories differ in length: {} estimated vs {} ground truth",
            estimated.len(),
            ground_truth.len()
        )));
    }
    if !(frame_rate > 0.0) {
        return Err(invalid("frame rate must be > 0"));
    }
    let dist = path_distances(ground_truth);
    let mut overall = Acc::default();
    let mut per_length = [Acc::default(); DRIFT_LENGTHS.len()];
    let mut per_speed: Vec<(usize, Acc)> = Vec::new();

    for s in 0..ground_truth.len() {
        for (li, &len) in DRIFT_LENGTHS.iter().enumerate() {
            let target = dist[s] + len;
            // `dist` is non-decreasing, so the first index reaching the target is a partition point.
            let e = s + dist[s..].partition_point(|&d| d < target);
            if e >= ground_truth.len() {
                continue;
            }
            let (trans, angle) = relative_error(&estimated[s], &estimated[e], &ground_truth[s], &ground_truth[e]);
            let t_err = 100.0 * trans / len;
            let r_err = angle * RAD_TO_DEG / len;
            overall.add(t_err, r_err);
            per_length[li].add(t_err, r_err);

            let speed = len * frame_rate / (e - s) as f64;
            let bin = libm::floor(speed / SPEED_BIN_WIDTH) as usize;
            match per_speed.binary_search_by_key(&bin, |(b, _)| *b) {
                Ok(pos) => per_speed[pos].1.add(t_err, r_err),
                Err(pos) => {
                    let mut acc = Acc::default();
                    acc.add(t_err, r_err);
                    per_speed.insert(pos, (bin, acc));
                }
            }
        }
    }

    Ok(DriftReport {
        overall: overall.finish(),
        per_length: DRIFT_LENGTHS
            .iter()
            .zip(per_length)
            .map(|(&length, acc)| LengthDrift { length, drift: acc.finish() })
            .collect(),
        per_speed: per_speed
            .into_iter()
            .filter_map(|(bin, acc)| {
                acc.finish().map(|drift| SpeedDrift { speed_min: bin as f64 * SPEED_BIN_WIDTH, drift })
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimedPose {
    pub timestamp: f64,
    pub pose: Isometry,
}

impl TimedPose {
    pub fn new(timestamp: f64, pose: Isometry) -> Self {
        Self { timestamp, pose }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RpeResidual {
    pub t_start: f64,
    pub t_end: f64,
    /// Translational drift (m/s).
    pub translation: f64,
    /// Rotational drift (deg/s).
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RpeReport {
    pub trans_rmse: f64,
    pub rot_rmse: f64,
    pub residuals: Vec<RpeResidual>,
}

/// Index of the entry in `sorted` nearest to `t`, if within `tol`.
fn nearest(sorted: &[f64], t: f64, tol: f64) -> Option<usize> {
    let pos = sorted.partition_point(|&s| s < t);
    let mut best: Option<(usize, f64)> = None;
    for k in [pos.wrapping_sub(1), pos] {
        if let Some(&s) = sorted.get(k) {
            let d = libm::fabs(s - t);
            if d <= tol && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// TUM-style relative pose error per second.
///
/// Each estimated pose is associated with the nearest ground-truth pose
/// within [`ASSOCIATION_TOLERANCE`]. For every associated pose at time `t_i`
/// the partner is the associated pose nearest `t_i + delta` (same
/// tolerance); residuals are the relative-pose error divided by the elapsed
/// estimated time.
pub fn tum_rpe(estimated: &[TimedPose], ground_truth: &[TimedPose], delta: f64) -> Result<RpeReport> {
    if !(delta > 0.0) {
        return Err(invalid(alloc::format!("delta must be > 0, got {delta}")));
    }
    let mut gt: Vec<&TimedPose> = ground_truth.iter().collect();
    gt.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let gt_times: Vec<f64> = gt.iter().map(|p| p.timestamp).collect();

    let mut matched: Vec<(f64, Isometry, Isometry)> = estimated
        .iter()
        .filter_map(|e| nearest(&gt_times, e.timestamp, ASSOCIATION_TOLERANCE).map(|k| (e.timestamp, e.pose, gt[k].pose)))
        .collect();
    matched.sort_by(|a, b| a.0.total_cmp(&b.0));
    let times: Vec<f64> = matched.iter().map(|m| m.0).collect();

    let mut residuals = Vec::new();
    for (i, (ti, pi, qi)) in matched.iter().enumerate() {
        let Some(j) = nearest(&times, ti + delta, ASSOCIATION_TOLERANCE) else { continue };
        if j <= i {
            continue;
        }
        let (tj, pj, qj) = &matched[j];
        let dt = tj - ti;
        let (trans, angle) = relative_error(pi, pj, qi, qj);
        residuals.push(RpeResidual {
            t_start: *ti,
            t_end: *tj,
            translation: trans / dt,
            rotation: angle * RAD_TO_DEG / dt,
        });
    }
    if residuals.is_empty() {
        return Err(Error::EmptyReport(alloc::format!(
            "no associable pose pairs {delta} s apart ({} of {} estimated poses matched ground truth)",
            matched.len(),
            estimated.len()
        )));
    }
    let n = residuals.len() as f64;
    let trans_rmse = libm::sqrt(residuals.iter().map(|r| r.translation * r.translation).sum::<f64>() / n);
    let rot_rmse = libm::sqrt(residuals.iter().map(|r| r.rotation * r.rotation).sum::<f64>() / n);
    Ok(RpeReport { trans_rmse, rot_rmse, residuals })
}

/// Perturbation family for [`indicator_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SweepAxis {
    /// Rotation about the given axis through the cloud centroid; magnitudes in radians.
    Rotation(Vector3<f64>),
    /// Translation along the given direction; magnitudes in meters.
    Translation(Vector3<f64>),
}

impl SweepAxis {
    /// The perturbation of the given magnitude for a cloud with centroid `c`.
    pub fn perturbation(&self, magnitude: f64, c: &Vector3<f64>) -> Isometry {
        match self {
            SweepAxis::Rotation(axis) => {
                let r = Isometry::from_axis_angle(axis, magnitude);
                Isometry::from_translation(*c).compose(&r).compose(&Isometry::from_translation(-c))
            }
            SweepAxis::Translation(dir) => Isometry::from_translation(dir.normalize() * magnitude),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub magnitude: f64,
    pub indicator: f64,
}

/// Indicator of `cloud` against a perturbed copy of itself at `steps`
/// evenly spaced magnitudes in `[0, range]`. A zero range yields one row.
pub fn indicator_sweep(
    cloud: &PointCloud,
    params: &KernelParams,
    axis: SweepAxis,
    range: f64,
    steps: usize,
    cutoff_multiplier: f64,
    c_min: f64,
) -> Result<Vec<SweepRow>> {
    let direction = match axis {
        SweepAxis::Rotation(a) | SweepAxis::Translation(a) => a,
    };
    if !(direction.norm() > 0.0) {
        return Err(invalid("sweep axis must be non-zero"));
    }
    if !(range >= 0.0 && range.is_finite()) {
        return Err(invalid(alloc::format!("sweep range must be finite and >= 0, got {range}")));
    }
    let centroid = cloud.centroid().ok_or_else(|| invalid("sweep needs a non-empty cloud"))?;
    let count = if range == 0.0 {
        1
    } else if steps < 2 {
        return Err(invalid("sweep needs at least two steps"));
    } else {
        steps
    };
    (0..count)
        .map(|k| {
            let magnitude = if count == 1 { 0.0 } else { range * k as f64 / (count - 1) as f64 };
            let t = axis.perturbation(magnitude, &centroid);
            let indicator = innerprod::indicator(cloud, cloud, &t, params, cutoff_multiplier, c_min)?;
            Ok(SweepRow { magnitude, indicator })
        })
        .collect()
}

//! Seeded synthetic registration benchmark.
//!
//! Each trial draws a cloud, a ground-truth transform `T` within the
//! configured bounds, and sets `Z = T⁻¹·X` plus optional Gaussian position
//! noise, so that registering `Z` to `X` from identity should return `T`.
//! Trial `k` is seeded with `splitmix64(seed + (k + 1)·γ)` (γ the 64-bit
//! golden-ratio increment), so trials are independent of scheduling and the
//! report is identical for any thread count.

use kernreg_core::registration::register;
use kernreg_core::{
    ChannelKernel, ChannelKind, FeatureChannel, FeatureSchema, Isometry, KernelParams, PointCloud,
    RegistrationConfig, Vector3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `k` under master seed `seed`.
pub fn trial_seed(seed: u64, k: usize) -> u64 {
    splitmix64(seed.wrapping_add((k as u64 + 1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Points uniform in a unit cube centered at the origin, random colors.
    Box,
    /// Eight identical blobs on a unit ring in the xy-plane, one color per
    /// blob; ground-truth rotations are about the ring axis.
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Geometric,
    Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_points: usize,
    /// Position noise standard deviation as a fraction of the cloud diameter.
    pub noise_sigma: f64,
    pub rotation_min_deg: f64,
    pub rotation_max_deg: f64,
    /// Translation bound as a fraction of the cloud diameter.
    pub translation_max_frac: f64,
    pub trials: usize,
    pub scenario: Scenario,
    pub mode: FeatureMode,
    pub success_rotation_deg: f64,
    /// Success bound on translation error as a fraction of the diameter.
    pub success_translation_frac: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            n_points: 2000,
            noise_sigma: 0.005,
            rotation_min_deg: 0.0,
            rotation_max_deg: 10.0,
            translation_max_frac: 0.05,
            trials: 100,
            scenario: Scenario::Box,
            mode: FeatureMode::Geometric,
            success_rotation_deg: 0.5,
            success_translation_frac: 0.01,
        }
    }
}

impl SynthSpec {
    /// The ring scenario: 25°–40° about the ring axis, so the nearest
    /// symmetric copy (45° period) is closer to identity than the truth.
    pub fn ring(seed: u64, trials: usize, mode: FeatureMode) -> Self {
        Self {
            seed,
            n_points: 400,
            noise_sigma: 0.0,
            rotation_min_deg: 25.0,
            rotation_max_deg: 40.0,
            translation_max_frac: 0.0,
            trials,
            scenario: Scenario::Ring,
            mode,
            ..Self::default()
        }
    }
}

/// Kernel and solver settings used by the benchmark unless overridden.
pub fn default_setup(scenario: Scenario, mode: FeatureMode) -> (KernelParams, RegistrationConfig) {
    let (init, floor) = match scenario {
        Scenario::Box => (0.05, 0.02),
        Scenario::Ring => (0.3, 0.015),
    };
    let channels = match mode {
        FeatureMode::Geometric => Vec::new(),
        FeatureMode::Color => vec![ChannelKernel::squared_exponential(1.0, 0.1)],
    };
    let config = RegistrationConfig { min_lengthscale: floor, ..RegistrationConfig::with_init_lengthscale(init) };
    (KernelParams::with_channels(init, channels), config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub truth_rotation_deg: f64,
    pub truth_translation: f64,
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    pub diameter: f64,
    pub converged: bool,
    pub iterations: usize,
    pub success: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub max: f64,
}

impl Quantiles {
    /// Nearest-rank quantiles; all zero for an empty sample.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, p50: 0.0, p90: 0.0, p95: 0.0, max: 0.0 };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Self { mean: v.iter().sum::<f64>() / v.len() as f64, p50: rank(0.5), p90: rank(0.9), p95: rank(0.95), max: v[v.len() - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: SynthSpec,
    pub success_rate: f64,
    pub converged_rate: f64,
    pub rotation_error_deg: Quantiles,
    pub translation_error_frac: Quantiles,
    pub mean_iterations: f64,
    pub trials: Vec<TrialRecord>,
}

fn color_schema() -> FeatureSchema {
    FeatureSchema::new(vec![FeatureChannel::new("color", 3, ChannelKind::Color)]).expect("valid schema")
}

fn hue_to_rgb(h: f64) -> [f64; 3] {
    let f = |n: f64| {
        let k = (n + h * 6.0) % 6.0;
        1.0 - k.min(4.0 - k).clamp(0.0, 1.0)
    };
    [f(5.0), f(3.0), f(1.0)]
}

/// The benchmark cloud for one trial (colored; geometric mode drops the colors later).
pub fn make_cloud(scenario: Scenario, n_points: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    let mut positions = Vec::with_capacity(n_points);
    let mut colors = Vec::with_capacity(3 * n_points);
    match scenario {
        Scenario::Box => {
            for _ in 0..n_points {
                positions.push(Vector3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                ));
                colors.extend((0..3).map(|_| rng.random_range(0.0..1.0)));
            }
        }
        Scenario::Ring => {
            const BLOBS: usize = 8;
            let per_blob = n_points.div_ceil(BLOBS);
            let spread = Normal::new(0.0, 0.1).expect("valid normal");
            let pattern: Vec<Vector3<f64>> = (0..per_blob)
                .map(|_| Vector3::new(spread.sample(rng), spread.sample(rng), 0.5 * spread.sample(rng)))
                .collect();
            for k in 0..BLOBS {
                let rot = Isometry::from_axis_angle(&Vector3::z(), k as f64 * std::f64::consts::TAU / BLOBS as f64);
                let color = hue_to_rgb(k as f64 / BLOBS as f64);
                for local in &pattern {
                    if positions.len() == n_points {
                        break;
                    }
                    positions.push(rot.apply(&(Vector3::x() + local)));
                    colors.extend_from_slice(&color);
                }
            }
        }
    }
    PointCloud::new(positions, colors, color_schema()).expect("consistent widths")
}

fn run_trial(spec: &SynthSpec, params: &KernelParams, config: &RegistrationConfig, trial: usize) -> TrialRecord {
    let seed = trial_seed(spec.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colored = make_cloud(spec.scenario, spec.n_points, &mut rng);
    let x = match spec.mode {
        FeatureMode::Geometric => colored.geometric_only(),
        FeatureMode::Color => colored,
    };
    let diameter = x.diameter();

    let angle = rng.random_range(spec.rotation_min_deg..=spec.rotation_max_deg).to_radians();
    let axis = match spec.scenario {
        Scenario::Box => Vector3::from(UnitSphere.sample(&mut rng)),
        Scenario::Ring => Vector3::z(),
    };
    let dir = Vector3::from(UnitSphere.sample(&mut rng));
    let shift = rng.random_range(0.0..=1.0) * spec.translation_max_frac * diameter;
    let truth = Isometry::new(Isometry::from_axis_angle(&axis, angle).rotation, dir * shift);

    let moved = x.transformed(&truth.inverse());
    let z = if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma * diameter).expect("valid normal");
        let positions =
            moved.positions().iter().map(|p| p + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))).collect();
        PointCloud::new(positions, moved.features().to_vec(), moved.schema().clone()).expect("same layout")
    } else {
        moved
    };

    let mut record = TrialRecord {
        trial,
        seed,
        truth_rotation_deg: angle.to_degrees(),
        truth_translation: shift,
        rotation_error_deg: f64::INFINITY,
        translation_error: f64::INFINITY,
        diameter,
        converged: false,
        iterations: 0,
        success: false,
        error: None,
    };
    match register(&x, &z, &Isometry::identity(), params, config) {
        Ok(r) => {
            let err = truth.inverse().compose(&r.transform);
            record.rotation_error_deg = err.rotation_angle().to_degrees();
            record.translation_error = err.translation_norm();
            record.converged = r.converged;
            record.iterations = r.iterations;
            record.success = record.rotation_error_deg <= spec.success_rotation_deg
                && record.translation_error <= spec.success_translation_frac * diameter;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs `spec.trials` seeded registrations in parallel and summarizes them.
pub fn synth_bench(spec: &SynthSpec, params: &KernelParams, config: &RegistrationConfig) -> Result<BenchReport> {
    config.validate()?;
    let trials: Vec<TrialRecord> =
        (0..spec.trials).into_par_iter().map(|k| run_trial(spec, params, config, k)).collect();
    let n = trials.len().max(1) as f64;
    let finite = |f: fn(&TrialRecord) -> f64| trials.iter().map(f).filter(|v| v.is_finite()).collect::<Vec<_>>();
    Ok(BenchReport {
        spec: spec.clone(),
        success_rate: trials.iter().filter(|t| t.success).count() as f64 / n,
        converged_rate: trials.iter().filter(|t| t.converged).count() as f64 / n,
        rotation_error_deg: Quantiles::of(&finite(|t| t.rotation_error_deg)),
        translation_error_frac: Quantiles::of(&finite(|t| t.translation_error / t.diameter)),
        mean_iterations: trials.iter().map(|t| t.iterations as f64).sum::<f64>() / n,
        trials,
    })
}

//! Annealed gradient ascent over SE(3).
//!
//! Each iteration computes the body-frame gradient of `F`, backtracks along
//! the normalized gradient until `F` strictly increases, and updates the
//! transform on the right, `T ← T·exp(ε ĝ)`. The geometric lengthscale starts
//! large for a wide basin of attraction and decays by a fixed factor every
//! time the alignment indicator has been stable for a full window of
//! iterations at the current lengthscale.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{invalid, Error, Result};
use crate::innerprod::{self, build_pairs, check_compatible, inner_product, value_and_gradient, PairList};
use crate::kernels::KernelParams;
use crate::se3::{Isometry, Twist};

/// Gradients below this fraction of `F / ℓ` are treated as zero: the best
/// gain along the gradient, roughly `½(‖g‖ℓ/F)²·F`, is then under the
/// rounding error of `F` and the line search cannot detect it.
const STATIONARY_RELATIVE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegistrationConfig {
    /// Starting geometric lengthscale for a single `register` call (m).
    pub init_lengthscale: f64,
    /// Annealing floor (m).
    pub min_lengthscale: f64,
    pub decay_factor: f64,
    /// Number of consecutive indicator values that must agree before a decay.
    pub stabilization_window: usize,
    /// Relative band those values must lie in.
    pub stabilization_rel_tol: f64,
    pub max_iterations: usize,
    /// First trial step, as a multiple of the current lengthscale.
    pub step_init: f64,
    pub step_shrink: f64,
    pub step_grow: f64,
    pub max_backtracks: usize,
    /// Threshold on `‖ω‖ + ‖v‖/diameter` of the last step at the floor lengthscale.
    pub convergence_twist_norm: f64,
    pub cutoff_multiplier: f64,
    pub c_min: f64,
    /// Starting lengthscale for the first pair of a sequence (m).
    pub first_frame_lengthscale: f64,
    /// Starting lengthscale for every later pair of a sequence (m).
    pub subsequent_lengthscale: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self::with_init_lengthscale(0.1)
    }
}

impl RegistrationConfig {
    /// Defaults with the given starting lengthscale and a floor at 5% of it.
    pub fn with_init_lengthscale(init_lengthscale: f64) -> Self {
        Self {
            init_lengthscale,
            min_lengthscale: 0.05 * init_lengthscale,
            decay_factor: 0.98,
            stabilization_window: 5,
            stabilization_rel_tol: 1e-5,
            max_iterations: 2000,
            step_init: 0.1,
            step_shrink: 0.5,
            step_grow: 1.2,
            max_backtracks: 20,
            convergence_twist_norm: 1e-5,
            cutoff_multiplier: innerprod::DEFAULT_CUTOFF_MULTIPLIER,
            c_min: innerprod::DEFAULT_C_MIN,
            first_frame_lengthscale: 0.95,
            subsequent_lengthscale: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |what: &str| Err(invalid(alloc::format!("registration config: {what}")));
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return fail("decay_factor must lie in (0, 1)");
        }
        if !(self.min_lengthscale > 0.0 && self.min_lengthscale <= self.init_lengthscale) {
            return fail("need 0 < min_lengthscale <= init_lengthscale");
        }
        if !self.init_lengthscale.is_finite() {
            return fail("init_lengthscale must be finite");
        }
        if self.max_iterations < 1 {
            return fail("max_iterations must be >= 1");
        }
        if self.stabilization_window < 1 {
            return fail("stabilization_window must be >= 1");
        }
        if !(self.stabilization_rel_tol >= 0.0) {
            return fail("stabilization_rel_tol must be >= 0");
        }
        if !(self.step_init > 0.0) {
            return fail("step_init must be > 0");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return fail("step_shrink must lie in (0, 1)");
        }
        if !(self.step_grow >= 1.0) {
            return fail("step_grow must be >= 1");
        }
        if !(self.cutoff_multiplier >= 1.0) {
            return fail("cutoff_multiplier must be >= 1");
        }
        if !(self.c_min >= 0.0 && self.c_min < 1.0) {
            return fail("c_min must lie in [0, 1)");
        }
        if !(self.first_frame_lengthscale > 0.0 && self.subsequent_lengthscale > 0.0) {
            return fail("sequence lengthscales must be > 0");
        }
        Ok(())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    /// Lengthscale the iteration ran at.
    pub lengthscale: f64,
    /// `F` after the step, on the iteration's pair list.
    pub value_f: f64,
    pub indicator: f64,
    /// Accepted step length along the normalized gradient (0 when no ascent was found).
    pub step: f64,
    /// `‖ω‖ + ‖v‖/diameter` of the accepted step.
    pub twist_norm: f64,
    pub pair_count: usize,
    /// The pair list was rebuilt at the start of this iteration.
    pub pairs_rebuilt: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegistrationResult {
    pub transform: Isometry,
    pub converged: bool,
    pub iterations: usize,
    pub indicator_trace: Vec<f64>,
    pub lengthscale_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
    /// Indicator at the final transform and lengthscale, on a freshly built pair list.
    pub final_indicator: f64,
    pub diagnostics: Vec<IterationRecord>,
}

/// Next lengthscale given the indicator history at the current lengthscale.
///
/// Decays by `decay_factor` (floored at `min_lengthscale`) once the last
/// `stabilization_window` values lie within the relative band; otherwise
/// returns `lengthscale` unchanged.
pub fn anneal_step(lengthscale: f64, history: &[f64], config: &RegistrationConfig) -> f64 {
    if lengthscale <= config.min_lengthscale || !window_is_stable(history, config) {
        return lengthscale;
    }
    (lengthscale * config.decay_factor).max(config.min_lengthscale)
}

/// True when the last `stabilization_window` values of `history` agree
/// within `stabilization_rel_tol` relative to their largest magnitude.
pub fn window_is_stable(history: &[f64], config: &RegistrationConfig) -> bool {
    let w = config.stabilization_window;
    if w == 0 || history.len() < w {
        return false;
    }
    let recent = &history[history.len() - w..];
    let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs());
    hi - lo <= config.stabilization_rel_tol * scale
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    /// Accepted step, or 0 when no trial increased `F`.
    pub step: f64,
    pub value: f64,
    pub transform: Isometry,
    /// Number of trial evaluations made.
    pub trials: usize,
}

/// Backtracking search along `g/‖g‖` from `initial_step`, shrinking by
/// `step_shrink` up to `max_backtracks` times. Accepts the first trial with
/// `F(T·exp(ε ĝ)) > F(T)` on the given pair list.
#[allow(clippy::too_many_arguments)]
pub fn line_search(
    x: &PointCloud,
    z: &PointCloud,
    t: &Isometry,
    g: &Twist,
    params: &KernelParams,
    pairs: &PairList,
    config: &RegistrationConfig,
    initial_step: f64,
) -> LineSearchOutcome {
    let value0 = inner_product(pairs, x, z, t, params);
    line_search_from(x, z, t, value0, g, params, pairs, config, initial_step)
}

#[allow(clippy::too_many_arguments)]
fn line_search_from(
    x: &PointCloud,
    z: &PointCloud,
    t: &Isometry,
    value0: f64,
    g: &Twist,
    params: &KernelParams,
    pairs: &PairList,
    config: &RegistrationConfig,
    initial_step: f64,
) -> LineSearchOutcome {
    let failed = LineSearchOutcome { step: 0.0, value: value0, transform: *t, trials: 0 };
    let norm = g.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return failed;
    }
    let dir = g.scale(1.0 / norm);
    let mut step = initial_step;
    for trial in 0..=config.max_backtracks {
        let candidate = t.retract(&dir.scale(step));
        let value = inner_product(pairs, x, z, &candidate, params);
        if value > value0 {
            return LineSearchOutcome { step, value, transform: candidate, trials: trial + 1 };
        }
        step *= config.step_shrink;
    }
    LineSearchOutcome { trials: config.max_backtracks + 1, ..failed }
}

fn step_twist_norm(dir: &Twist, step: f64, diameter: f64) -> f64 {
    step * (dir.omega.norm() + dir.v.norm() / diameter)
}

/// Aligns `z` to `x`: returns `T` such that `T·z` overlays `x`.
pub fn register(
    x: &PointCloud,
    z: &PointCloud,
    initial: &Isometry,
    params: &KernelParams,
    config: &RegistrationConfig,
) -> Result<RegistrationResult> {
    config.validate()?;
    check_compatible(x, z, &params.with_lengthscale(config.init_lengthscale))?;
    for cloud in [x, z] {
        cloud.validate().map_err(Error::InvalidCloud)?;
    }
    if !initial.is_finite() {
        return Err(invalid("initial transform has non-finite entries"));
    }

    let diameter = {
        let d = z.diameter().max(x.diameter());
        if d > 0.0 { d } else { 1.0 }
    };
    let norm = |f: f64| innerprod::normalize(f, x.len(), z.len());

    let mut lengthscale = config.init_lengthscale;
    let mut kp = params.with_lengthscale(lengthscale);
    let mut t = *initial;
    let mut pairs = build_pairs(x, z, &t, &kp, config.cutoff_multiplier, config.c_min)?;
    if pairs.is_empty() {
        return Err(Error::NoOverlap { cutoff_radius: pairs.cutoff_radius() });
    }
    let mut fresh = true;

    let max_step = 10.0 * config.step_init;
    let mut step_factor = config.step_init;
    let mut history: Vec<f64> = Vec::new();
    let mut diagnostics: Vec<IterationRecord> = Vec::new();
    // Set after a failed line search; cleared when the pair list or lengthscale changes.
    let mut stalled: Option<f64> = None;
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let mut rebuilt = false;
        if !fresh && pairs.is_stale(&t, lengthscale) {
            pairs = build_pairs(x, z, &t, &kp, config.cutoff_multiplier, config.c_min)?;
            rebuilt = true;
            stalled = None;
        }
        if fresh {
            rebuilt = true;
            fresh = false;
        }

        let (value, step, twist_norm) = match stalled {
            Some(value) => (value, 0.0, 0.0),
            None => {
                let (value0, g) = value_and_gradient(&pairs, x, z, &t, &kp);
                let g_norm = g.norm();
                let stationary = g_norm * lengthscale <= STATIONARY_RELATIVE * value0.abs() || g_norm == 0.0;
                let outcome = if stationary {
                    LineSearchOutcome { step: 0.0, value: value0, transform: t, trials: 0 }
                } else {
                    line_search_from(x, z, &t, value0, &g, &kp, &pairs, config, step_factor * lengthscale)
                };
                if outcome.step > 0.0 {
                    t = outcome.transform;
                    step_factor = if outcome.trials == 1 {
                        (step_factor * config.step_grow).min(max_step)
                    } else {
                        outcome.step / lengthscale
                    };
                    let dir = g.scale(1.0 / g_norm);
                    (outcome.value, outcome.step, step_twist_norm(&dir, outcome.step, diameter))
                } else {
                    stalled = Some(value0);
                    (value0, 0.0, 0.0)
                }
            }
        };

        let indicator = norm(value);
        diagnostics.push(IterationRecord {
            lengthscale,
            value_f: value,
            indicator,
            step,
            twist_norm,
            pair_count: pairs.len(),
            pairs_rebuilt: rebuilt,
        });
        history.push(indicator);

        let at_floor = lengthscale <= config.min_lengthscale;
        if at_floor && twist_norm < config.convergence_twist_norm {
            converged = true;
            break;
        }

        let next = anneal_step(lengthscale, &history, config);
        if next != lengthscale {
            lengthscale = next;
            kp = params.with_lengthscale(lengthscale);
            history.clear();
            stalled = None;
            step_factor = config.step_init;
            pairs = build_pairs(x, z, &t, &kp, config.cutoff_multiplier, config.c_min)?;
            fresh = true;
        }
    }

    let final_report = innerprod::alignment_report(x, z, &t, &kp, config.cutoff_multiplier, config.c_min)?;
    Ok(RegistrationResult {
        transform: t,
        converged,
        iterations: diagnostics.len(),
        indicator_trace: diagnostics.iter().map(|d| d.indicator).collect(),
        lengthscale_trace: diagnostics.iter().map(|d| d.lengthscale).collect(),
        objective_trace: diagnostics.iter().map(|d| d.value_f).collect(),
        final_indicator: final_report.indicator,
        diagnostics,
    })
}

/// Outcome for one consecutive frame pair of a sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameOutcome {
    /// Transform taking frame `k` into frame `k − 1`.
    pub relative: Isometry,
    pub converged: bool,
    pub iterations: usize,
    pub final_indicator: f64,
    /// Set when registration failed and the previous relative transform was reused.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SequenceResult {
    /// One entry per consecutive pair (`frames.len() − 1`).
    pub frames: Vec<FrameOutcome>,
    /// Pose of every frame in the first frame's coordinates; starts at identity.
    pub trajectory: Vec<Isometry>,
}

impl SequenceResult {
    pub fn relative_transforms(&self) -> Vec<Isometry> {
        self.frames.iter().map(|f| f.relative).collect()
    }

    pub fn fallback_frames(&self) -> Vec<usize> {
        self.frames.iter().enumerate().filter(|(_, f)| f.fallback.is_some()).map(|(k, _)| k + 1).collect()
    }
}

/// Frame-to-frame registration of an ordered sequence.
///
/// The first pair starts from identity at `first_frame_lengthscale`; every
/// later pair starts from the previous pair's result at
/// `subsequent_lengthscale`. A pair with no overlap reuses the previous
/// relative transform and is flagged.
pub fn register_sequence(frames: &[PointCloud], params: &KernelParams, config: &RegistrationConfig) -> Result<SequenceResult> {
    if frames.len() < 2 {
        return Err(invalid("a sequence needs at least two frames"));
    }
    let mut outcomes = Vec::with_capacity(frames.len() - 1);
    let mut trajectory = Vec::with_capacity(frames.len());
    trajectory.push(Isometry::identity());
    let mut previous = Isometry::identity();

    for k in 1..frames.len() {
        let start = if k == 1 { config.first_frame_lengthscale } else { config.subsequent_lengthscale };
        let frame_config = RegistrationConfig {
            init_lengthscale: start,
            min_lengthscale: config.min_lengthscale.min(start),
            ..config.clone()
        };
        let outcome = match register(&frames[k - 1], &frames[k], &previous, params, &frame_config) {
            Ok(r) => FrameOutcome {
                relative: r.transform,
                converged: r.converged,
                iterations: r.iterations,
                final_indicator: r.final_indicator,
                fallback: None,
            },
            Err(e @ Error::NoOverlap { .. }) => FrameOutcome {
                relative: previous,
                converged: false,
                iterations: 0,
                final_indicator: 0.0,
                fallback: Some(alloc::format!("{e}")),
            },
            Err(e) => return Err(e),
        };
        previous = outcome.relative;
        let pose = trajectory[k - 1].compose(&outcome.relative);
        trajectory.push(pose);
        outcomes.push(outcome);
    }
    Ok(SequenceResult { frames: outcomes, trajectory })
}

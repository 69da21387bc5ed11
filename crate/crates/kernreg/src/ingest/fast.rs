//! FAST-9 pixel selection with a budget-controlled threshold.
//!
//! A pixel is a corner at threshold `t` when 9 contiguous samples of the
//! radius-3 Bresenham circle are all brighter than `center + t` or all
//! darker than `center − t`. No non-maximum suppression is applied. The
//! threshold is scaled up or down by `adjust_factor` until the number of
//! corners with valid depth falls inside `[target_min, target_max]`.

use serde::{Deserialize, Serialize};

use super::pnm::Image;
use crate::error::{Error, Result};

/// Circle of radius 3 around the center, clockwise from 12 o'clock.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];
const ARC: usize = 9;
const BORDER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorConfig {
    pub target_min: usize,
    pub target_max: usize,
    /// Starting threshold in 8-bit intensity units.
    pub initial_threshold: f64,
    /// Multiplicative threshold step (> 1).
    pub adjust_factor: f64,
    /// Threshold floor; fewer than `target_min` corners here triggers the fallback.
    pub min_threshold: f64,
    pub max_rounds: usize,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            target_min: 3000,
            target_max: 15000,
            initial_threshold: 20.0,
            adjust_factor: 1.3,
            min_threshold: 1.0,
            max_rounds: 20,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0 < self.target_min && self.target_min < self.target_max) {
            return Err(Error::Config(format!(
                "selector: need 0 < target_min < target_max, got {} and {}",
                self.target_min, self.target_max
            )));
        }
        if !(self.adjust_factor > 1.0) {
            return Err(Error::Config("selector: adjust_factor must be > 1".into()));
        }
        if !(self.min_threshold > 0.0 && self.initial_threshold >= self.min_threshold) {
            return Err(Error::Config("selector: need 0 < min_threshold <= initial_threshold".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("selector: max_rounds must be >= 1".into()));
        }
        Ok(())
    }
}

/// How the final threshold was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionOutcome {
    InRange,
    /// Round budget exhausted; the count closest to the target range was kept.
    Nearest,
    /// Too few corners even at `min_threshold`; every valid pixel was kept.
    AllValid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Row-major pixel indices, ascending.
    pub pixels: Vec<usize>,
    pub threshold: f64,
    pub rounds: usize,
    pub outcome: SelectionOutcome,
}

/// Luma of an 8-bit RGB image (ITU-R BT.601 weights).
pub fn luminance(rgb: &Image<u8>) -> Vec<f32> {
    rgb.data
        .chunks_exact(rgb.channels)
        .map(|p| match p.len() {
            1 => p[0] as f32,
            _ => 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32,
        })
        .collect()
}

/// Largest `t` for which each pixel is a FAST-9 corner (0 within 3 pixels
/// of the border). A pixel is a corner at `t` iff its score exceeds `t`.
pub fn fast_scores(gray: &[f32], width: usize, height: usize) -> Vec<f32> {
    assert_eq!(gray.len(), width * height, "gray buffer size");
    let mut scores = vec![0.0f32; gray.len()];
    if width <= 2 * BORDER || height <= 2 * BORDER {
        return scores;
    }
    let offsets: Vec<isize> = CIRCLE.iter().map(|&(du, dv)| dv as isize * width as isize + du as isize).collect();
    let mut ring = [0.0f32; 16];
    for v in BORDER..height - BORDER {
        for u in BORDER..width - BORDER {
            let idx = v * width + u;
            let c = gray[idx];
            for (k, off) in offsets.iter().enumerate() {
                ring[k] = gray[(idx as isize + off) as usize] - c;
            }
            let mut best = 0.0f32;
            for start in 0..16 {
                let (mut bright, mut dark) = (f32::INFINITY, f32::INFINITY);
                for k in 0..ARC {
                    let d = ring[(start + k) % 16];
                    bright = bright.min(d);
                    dark = dark.min(-d);
                }
                best = best.max(bright).max(dark);
            }
            scores[idx] = best;
        }
    }
    scores
}

/// Number of entries of `sorted_desc` strictly greater than `t`.
fn count_above(sorted_desc: &[f32], t: f64) -> usize {
    sorted_desc.partition_point(|&s| s as f64 > t)
}

/// Selects FAST-9 pixels among those with `valid[i]`, steering the
/// threshold toward the configured count range.
pub fn select_points(rgb: &Image<u8>, valid: &[bool], sel: &SelectorConfig) -> Result<Selection> {
    sel.validate()?;
    if valid.len() != rgb.width * rgb.height {
        return Err(Error::Core(kernreg_core::Error::InvalidArgument(format!(
            "depth mask has {} entries for a {}x{} image",
            valid.len(),
            rgb.width,
            rgb.height
        ))));
    }
    let scores = fast_scores(&luminance(rgb), rgb.width, rgb.height);
    let mut ranked: Vec<f32> = scores.iter().zip(valid).filter(|(_, &ok)| ok).map(|(&s, _)| s).collect();
    ranked.sort_unstable_by(|a, b| b.total_cmp(a));

    let all_valid = || valid.iter().enumerate().filter(|(_, &ok)| ok).map(|(i, _)| i).collect::<Vec<_>>();
    if count_above(&ranked, sel.min_threshold) < sel.target_min {
        log::warn!(
            "selector: {} corners at the minimum threshold {} (target {}..{}); keeping all {} valid pixels",
            count_above(&ranked, sel.min_threshold),
            sel.min_threshold,
            sel.target_min,
            sel.target_max,
            ranked.len()
        );
        return Ok(Selection { pixels: all_valid(), threshold: 0.0, rounds: 0, outcome: SelectionOutcome::AllValid });
    }

    let distance = |n: usize| {
        if n < sel.target_min {
            sel.target_min - n
        } else {
            n.saturating_sub(sel.target_max)
        }
    };
    let mut t = sel.initial_threshold;
    let mut best = (usize::MAX, t);
    let mut outcome = SelectionOutcome::Nearest;
    let mut rounds = 0;
    while rounds < sel.max_rounds {
        rounds += 1;
        let n = count_above(&ranked, t);
        let d = distance(n);
        if d < best.0 {
            best = (d, t);
        }
        if d == 0 {
            outcome = SelectionOutcome::InRange;
            break;
        }
        t = if n > sel.target_max { t * sel.adjust_factor } else { (t / sel.adjust_factor).max(sel.min_threshold) };
    }
    let threshold = best.1;
    if outcome == SelectionOutcome::Nearest {
        log::warn!(
            "selector: no threshold within {} rounds hit {}..{}; using t = {threshold} ({} corners)",
            sel.max_rounds,
            sel.target_min,
            sel.target_max,
            count_above(&ranked, threshold)
        );
    }
    let pixels = scores
        .iter()
        .zip(valid)
        .enumerate()
        .filter(|(_, (&s, &ok))| ok && s as f64 > threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(Selection { pixels, threshold, rounds, outcome })
}

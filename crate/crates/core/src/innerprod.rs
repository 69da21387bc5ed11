//! Sparse evaluation of the kernel inner product
//!
//! ```text
//! F(T) = Σ_(i,j) c_ij · k(x_i, T·z_j)
//! ```
//!
//! its gradient with respect to a right perturbation `T·exp(ξ)`, and the
//! normalized alignment indicator `F / sqrt(|X|·|Z|)`.
//!
//! The pair set is pruned twice: spatially, keeping pairs within
//! `cutoff_multiplier · ℓ` at build time, and in feature space, keeping
//! pairs whose appearance coefficient exceeds `c_min`. Coefficients do not
//! depend on the transform, so they are computed once per build and cached.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::ops::Add;

use nalgebra::{Matrix3, Vector3};

use crate::cloud::PointCloud;
use crate::error::{invalid, Error, Result};
use crate::grid::CellGrid;
use crate::kernels::{se_kernel_sq, CoefficientEvaluator, KernelParams};
use crate::math;
use crate::se3::{Isometry, Twist};
use crate::sum;

pub const DEFAULT_CUTOFF_MULTIPLIER: f64 = 3.0;
pub const DEFAULT_C_MIN: f64 = 1e-4;
/// A pair list is stale once any source point may have moved this fraction
/// of the cutoff radius since the build.
pub const STALENESS_FRACTION: f64 = 0.5;

/// One retained term of the double sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub i: u32,
    pub j: u32,
    pub c: f64,
    /// `‖x_i − T·z_j‖` at build time.
    pub distance: f64,
}

/// Pruned pair set, ordered by `j` then `i`, no duplicates.
#[derive(Debug, Clone)]
pub struct PairList {
    entries: Vec<Pair>,
    built_at_lengthscale: f64,
    cutoff_radius: f64,
    c_min: f64,
    built_at: Isometry,
    /// `max_j ‖z_j‖`, used to bound point motion for staleness checks.
    source_radius: f64,
}

impl PairList {
    pub fn entries(&self) -> &[Pair] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn built_at_lengthscale(&self) -> f64 {
        self.built_at_lengthscale
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_radius
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn built_at(&self) -> &Isometry {
        &self.built_at
    }

    /// Upper bound on `max_j ‖T·z_j − T_build·z_j‖`.
    pub fn displacement_bound(&self, t: &Isometry) -> f64 {
        let dr = (t.rotation - self.built_at.rotation).norm();
        let dt = (t.translation - self.built_at.translation).norm();
        dr * self.source_radius + dt
    }

    /// True when the lengthscale changed or points may have moved more than
    /// [`STALENESS_FRACTION`] of the cutoff radius.
    pub fn is_stale(&self, t: &Isometry, lengthscale: f64) -> bool {
        lengthscale != self.built_at_lengthscale
            || self.displacement_bound(t) > STALENESS_FRACTION * self.cutoff_radius
    }
}

/// Value, indicator and pair count of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignmentReport {
    pub value_f: f64,
    pub indicator: f64,
    pub pair_count: usize,
}

pub(crate) fn check_compatible(x: &PointCloud, z: &PointCloud, params: &KernelParams) -> Result<()> {
    if x.schema() != z.schema() {
        return Err(Error::SchemaMismatch { target: x.schema().to_string(), source: z.schema().to_string() });
    }
    params.validate(x.schema())
}

fn transformed_positions(z: &PointCloud, t: &Isometry) -> Vec<Vector3<f64>> {
    let pts = z.positions();
    sum::map_chunks(pts.len(), |r| pts[r].iter().map(|p| t.apply(p)).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

/// Builds the pruned pair list at transform `t`.
pub fn build_pairs(
    x: &PointCloud,
    z: &PointCloud,
    t: &Isometry,
    params: &KernelParams,
    cutoff_multiplier: f64,
    c_min: f64,
) -> Result<PairList> {
    if !(cutoff_multiplier >= 1.0 && cutoff_multiplier.is_finite()) {
        return Err(invalid(alloc::format!("cutoff multiplier must be >= 1, got {cutoff_multiplier}")));
    }
    check_compatible(x, z, params)?;
    let cutoff_radius = cutoff_multiplier * params.lengthscale;
    let source_radius = z.positions().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let mut list = PairList {
        entries: Vec::new(),
        built_at_lengthscale: params.lengthscale,
        cutoff_radius,
        c_min,
        built_at: *t,
        source_radius,
    };
    if x.is_empty() || z.is_empty() {
        return Ok(list);
    }

    let grid = CellGrid::new(x.positions(), cutoff_radius);
    let coeff = CoefficientEvaluator::new(x.schema(), params)?;
    let xp = x.positions();
    let queries = transformed_positions(z, t);
    let chunks = sum::map_chunks(queries.len(), |range| {
        let mut out = Vec::new();
        let mut hits: Vec<(usize, f64)> = Vec::new();
        for j in range {
            hits.clear();
            grid.for_each_within(xp, &queries[j], cutoff_radius, |i, d2| hits.push((i, d2)));
            hits.sort_unstable_by_key(|h| h.0);
            let v = z.feature_row(j);
            for &(i, d2) in &hits {
                let c = coeff.eval(x.feature_row(i), v);
                if c > c_min {
                    out.push(Pair { i: i as u32, j: j as u32, c, distance: math::sqrt(d2) });
                }
            }
        }
        out
    });
    list.entries = chunks.concat();
    Ok(list)
}

#[derive(Debug, Clone, Copy)]
struct Accum {
    value: f64,
    moment: Vector3<f64>,
    offset: Vector3<f64>,
}

impl Accum {
    const ZERO: Accum = Accum { value: 0.0, moment: Vector3::new(0.0, 0.0, 0.0), offset: Vector3::new(0.0, 0.0, 0.0) };
}

impl Add for Accum {
    type Output = Accum;
    fn add(self, rhs: Accum) -> Accum {
        Accum { value: self.value + rhs.value, moment: self.moment + rhs.moment, offset: self.offset + rhs.offset }
    }
}

fn sum_value(pairs: &PairList, x: &PointCloud, q: &[Vector3<f64>], params: &KernelParams) -> f64 {
    let xp = x.positions();
    let e = pairs.entries();
    let (sigma, ell) = (params.sigma, params.lengthscale);
    sum::chunked_sum(e.len(), 0.0, |r| {
        e[r].iter()
            .map(|p| p.c * se_kernel_sq((xp[p.i as usize] - q[p.j as usize]).norm_squared(), sigma, ell))
            .sum::<f64>()
    })
}

fn sum_value_and_moments(pairs: &PairList, x: &PointCloud, q: &[Vector3<f64>], params: &KernelParams) -> Accum {
    let xp = x.positions();
    let e = pairs.entries();
    let (sigma, ell) = (params.sigma, params.lengthscale);
    sum::chunked_sum(e.len(), Accum::ZERO, |r| {
        let mut acc = Accum::ZERO;
        for p in &e[r] {
            let qj = q[p.j as usize];
            let d = xp[p.i as usize] - qj;
            let w = p.c * se_kernel_sq(d.norm_squared(), sigma, ell);
            acc.value += w;
            acc.offset += d * w;
            acc.moment += qj.cross(&d) * w;
        }
        acc
    })
}

/// `F(T) = Σ c_ij k(x_i, T·z_j)` over the retained pairs.
pub fn inner_product(pairs: &PairList, x: &PointCloud, z: &PointCloud, t: &Isometry, params: &KernelParams) -> f64 {
    let q = transformed_positions(z, t);
    sum_value(pairs, x, &q, params)
}

/// Body-frame gradient `g` such that `d/dε F(T·exp(ε ξ))|₀ = ⟨g, ξ⟩`.
///
/// World-frame sums `Σ w (x − q)` and `Σ w q × x` (with `w = c k / ℓ²` and
/// `q = T z`) are the gradient for a left perturbation; pulling them back
/// through the adjoint of `T` gives the right-perturbation gradient.
pub fn gradient(pairs: &PairList, x: &PointCloud, z: &PointCloud, t: &Isometry, params: &KernelParams) -> Twist {
    value_and_gradient(pairs, x, z, t, params).1
}

/// `F(T)` and its body-frame gradient in one pass.
pub fn value_and_gradient(
    pairs: &PairList,
    x: &PointCloud,
    z: &PointCloud,
    t: &Isometry,
    params: &KernelParams,
) -> (f64, Twist) {
    let q = transformed_positions(z, t);
    let acc = sum_value_and_moments(pairs, x, &q, params);
    let inv_l2 = 1.0 / (params.lengthscale * params.lengthscale);
    let world_v = acc.offset * inv_l2;
    let world_w = acc.moment * inv_l2;
    (acc.value, world_to_body(t, &world_w, &world_v))
}

/// Pulls a world-frame (left) cotangent back to the body frame: `Ad_Tᵀ g`.
fn world_to_body(t: &Isometry, world_w: &Vector3<f64>, world_v: &Vector3<f64>) -> Twist {
    let rt: Matrix3<f64> = t.rotation.transpose();
    Twist::new(rt * (world_w - t.translation.cross(world_v)), rt * world_v)
}

/// Builds pairs at `t` and evaluates value, indicator and pair count.
pub fn alignment_report(
    x: &PointCloud,
    z: &PointCloud,
    t: &Isometry,
    params: &KernelParams,
    cutoff_multiplier: f64,
    c_min: f64,
) -> Result<AlignmentReport> {
    if x.is_empty() || z.is_empty() {
        return Err(invalid("indicator needs non-empty clouds"));
    }
    let pairs = build_pairs(x, z, t, params, cutoff_multiplier, c_min)?;
    let value_f = inner_product(&pairs, x, z, t, params);
    Ok(AlignmentReport { value_f, indicator: normalize(value_f, x.len(), z.len()), pair_count: pairs.len() })
}

/// `F / sqrt(|X|·|Z|)`.
pub fn normalize(value_f: f64, nx: usize, nz: usize) -> f64 {
    value_f / math::sqrt(nx as f64 * nz as f64)
}

/// Alignment indicator `i_θ = F(T) / sqrt(|X|·|Z|)` on the pruned pair set.
pub fn indicator(
    x: &PointCloud,
    z: &PointCloud,
    t: &Isometry,
    params: &KernelParams,
    cutoff_multiplier: f64,
    c_min: f64,
) -> Result<f64> {
    alignment_report(x, z, t, params, cutoff_multiplier, c_min).map(|r| r.indicator)
}

/// Dense `Σ_{i,j} c_ij k(a_i, b_j)` with deterministic chunked reduction.
fn dense_sum(a: &[Vector3<f64>], a_cloud: &PointCloud, b: &[Vector3<f64>], b_cloud: &PointCloud, params: &KernelParams) -> Result<f64> {
    let coeff = CoefficientEvaluator::new(a_cloud.schema(), params)?;
    let (sigma, ell) = (params.sigma, params.lengthscale);
    Ok(sum::chunked_sum(a.len(), 0.0, |r| {
        let mut s = 0.0;
        for i in r {
            let u = a_cloud.feature_row(i);
            for (j, bj) in b.iter().enumerate() {
                s += coeff.eval(u, b_cloud.feature_row(j)) * se_kernel_sq((a[i] - bj).norm_squared(), sigma, ell);
            }
        }
        s
    }))
}

/// Exact cosine of the angle between the two cloud functions,
/// `⟨f_X, f_{T·Z}⟩ / (‖f_X‖ ‖f_Z‖)`, from full O(N²) double sums.
pub fn exact_cosine(x: &PointCloud, z: &PointCloud, t: &Isometry, params: &KernelParams) -> Result<f64> {
    check_compatible(x, z, params)?;
    if x.is_empty() || z.is_empty() {
        return Err(invalid("exact cosine needs non-empty clouds"));
    }
    let q = transformed_positions(z, t);
    let cross = dense_sum(x.positions(), x, &q, z, params)?;
    let nx2 = dense_sum(x.positions(), x, x.positions(), x, params)?;
    let nz2 = dense_sum(z.positions(), z, z.positions(), z, params)?;
    if !(nx2 > 0.0 && nz2 > 0.0) {
        return Err(invalid("cloud function has zero norm"));
    }
    Ok(cross / (math::sqrt(nx2) * math::sqrt(nz2)))
}

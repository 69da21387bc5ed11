//! Squared-exponential kernels over positions and feature channels, and the
//! tensor-product appearance coefficient `c_ij`.

use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::cloud::FeatureSchema;
use crate::error::{invalid, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KernelForm {
    /// `σ_c² exp(−‖u − v‖² / 2ℓ_c²)`.
    #[default]
    SquaredExponential,
    /// Plain inner product `⟨u, v⟩`; natural for one-hot labels.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelKernel {
    pub sigma: f64,
    pub lengthscale: f64,
    pub form: KernelForm,
}

impl ChannelKernel {
    pub fn squared_exponential(sigma: f64, lengthscale: f64) -> Self {
        Self { sigma, lengthscale, form: KernelForm::SquaredExponential }
    }

    pub fn linear() -> Self {
        Self { sigma: 1.0, lengthscale: 1.0, form: KernelForm::Linear }
    }

    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.form {
            KernelForm::SquaredExponential => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                self.sigma * self.sigma * math::exp(-d2 / (2.0 * self.lengthscale * self.lengthscale))
            }
            KernelForm::Linear => u.iter().zip(v).map(|(a, b)| a * b).sum(),
        }
    }
}

/// Geometric amplitude and lengthscale plus one kernel per feature channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelParams {
    pub sigma: f64,
    pub lengthscale: f64,
    pub per_channel: Vec<ChannelKernel>,
}

impl KernelParams {
    /// Unit-amplitude geometric-only kernel.
    pub fn geometric(lengthscale: f64) -> Self {
        Self { sigma: 1.0, lengthscale, per_channel: Vec::new() }
    }

    pub fn with_channels(lengthscale: f64, per_channel: Vec<ChannelKernel>) -> Self {
        Self { sigma: 1.0, lengthscale, per_channel }
    }

    pub fn with_lengthscale(&self, lengthscale: f64) -> Self {
        Self { lengthscale, ..self.clone() }
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(invalid(alloc::format!("lengthscale must be > 0, got {}", self.lengthscale)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(alloc::format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.per_channel.len() != schema.len() {
            return Err(invalid(alloc::format!(
                "{} channel kernels for schema {} with {} channels",
                self.per_channel.len(),
                schema,
                schema.len()
            )));
        }
        for (k, ch) in self.per_channel.iter().enumerate() {
            if ch.form == KernelForm::SquaredExponential && !(ch.lengthscale > 0.0 && ch.sigma > 0.0) {
                return Err(invalid(alloc::format!(
                    "channel '{}' needs sigma > 0 and lengthscale > 0",
                    schema.channels()[k].name
                )));
            }
        }
        Ok(())
    }
}

/// `σ² exp(−‖x − z‖² / 2ℓ²)`.
pub fn geometric_kernel(x: &Vector3<f64>, z: &Vector3<f64>, sigma: f64, lengthscale: f64) -> Result<f64> {
    if !(lengthscale > 0.0) {
        return Err(invalid(alloc::format!("lengthscale must be > 0, got {lengthscale}")));
    }
    Ok(se_kernel_sq((x - z).norm_squared(), sigma, lengthscale))
}

/// Squared-exponential kernel from a squared distance (no argument checks).
#[inline]
pub(crate) fn se_kernel_sq(d2: f64, sigma: f64, lengthscale: f64) -> f64 {
    sigma * sigma * math::exp(-d2 / (2.0 * lengthscale * lengthscale))
}

/// Precomputed channel layout for repeated `c_ij` evaluation.
#[derive(Debug, Clone)]
pub(crate) struct CoefficientEvaluator<'a> {
    channels: Vec<(usize, usize, &'a ChannelKernel)>,
    width: usize,
}

impl<'a> CoefficientEvaluator<'a> {
    pub fn new(schema: &FeatureSchema, params: &'a KernelParams) -> Result<Self> {
        if params.per_channel.len() != schema.len() {
            return Err(invalid(alloc::format!(
                "{} channel kernels for schema {}",
                params.per_channel.len(),
                schema
            )));
        }
        let channels = schema
            .offsets()
            .into_iter()
            .zip(schema.channels())
            .zip(&params.per_channel)
            .map(|((off, ch), k)| (off, ch.dim, k))
            .collect();
        Ok(Self { channels, width: schema.total_dim() })
    }

    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut c = 1.0;
        for &(off, dim, kernel) in &self.channels {
            c *= kernel.eval(&u[off..off + dim], &v[off..off + dim]);
        }
        c
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// `c_ij`: product over channels of the per-channel kernel. Exactly 1 for
/// an empty schema.
pub fn feature_coefficient(u: &[f64], v: &[f64], schema: &FeatureSchema, params: &KernelParams) -> Result<f64> {
    let eval = CoefficientEvaluator::new(schema, params)?;
    if u.len() != eval.width() || v.len() != eval.width() {
        return Err(invalid(alloc::format!(
            "feature rows of width {} and {} for schema {} of width {}",
            u.len(),
            v.len(),
            schema,
            eval.width()
        )));
    }
    Ok(eval.eval(u, v))
}

/// Sparse row of coefficients: `(j, c_ij)` for every row of `rows` with
/// `c_ij > c_min`. `rows` is row-major with the schema's width.
pub fn coefficient_matrix_row(
    u: &[f64],
    rows: &[f64],
    schema: &FeatureSchema,
    params: &KernelParams,
    c_min: f64,
) -> Result<Vec<(usize, f64)>> {
    let eval = CoefficientEvaluator::new(schema, params)?;
    let w = eval.width();
    if u.len() != w {
        return Err(invalid("feature row width does not match schema"));
    }
    if w == 0 {
        return Err(invalid("geometric-only schema has no feature rows to enumerate"));
    }
    if rows.len() % w != 0 {
        return Err(invalid("feature matrix width does not match schema"));
    }
    Ok(rows
        .chunks_exact(w)
        .enumerate()
        .filter_map(|(j, v)| {
            let c = eval.eval(u, v);
            (c > c_min).then_some((j, c))
        })
        .collect())
}

//! JSON run configuration.
//!
//! ```json
//! {
//!   "kernel": { "sigma": 1.0, "channels": { "color": { "lengthscale": 0.1 } } },
//!   "registration": { "init_lengthscale": 0.1 },
//!   "selector": { "target_min": 3000, "target_max": 15000 },
//!   "camera": { "fx": 525.0, "fy": 525.0, "cx": 319.5, "cy": 239.5 }
//! }
//! ```
//!
//! Only `registration.init_lengthscale` is required. Unknown keys are
//! rejected. Defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `kernel.sigma` | 1 |
//! | `kernel.channels` | none (geometry only) |
//! | channel `sigma` / `form` | 1 / `squared_exponential` |
//! | `registration.min_lengthscale` | 0.05 × `init_lengthscale` |
//! | `registration.decay_factor` | 0.98 |
//! | `registration.stabilization_window` / `stabilization_rel_tol` | 5 / 1e-5 |
//! | `registration.max_iterations` | 2000 |
//! | `registration.step_init` / `step_shrink` / `step_grow` | 0.1 (× ℓ) / 0.5 / 1.2 |
//! | `registration.max_backtracks` | 20 |
//! | `registration.convergence_twist_norm` | 1e-5 |
//! | `registration.cutoff_multiplier` / `c_min` | 3 / 1e-4 |
//! | `registration.first_frame_lengthscale` / `subsequent_lengthscale` | 0.95 / 0.1 |
//! | `selector.*` | 3000, 15000, threshold 20, factor 1.3, floor 1, 20 rounds |
//! | `camera.depth_scale` / `max_depth` / `skip_top_rows` | 0.001 / 55 / 100 |

use std::collections::BTreeMap;
use std::path::Path;

use kernreg_core::{ChannelKernel, KernelForm, KernelParams, PointCloud, RegistrationConfig};
use serde::{Deserialize, Serialize};

use super::fast::SelectorConfig;
use super::rgbd::CameraIntrinsics;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default = "one")]
    pub sigma: f64,
    /// Required for the squared-exponential form.
    #[serde(default)]
    pub lengthscale: Option<f64>,
    #[serde(default)]
    pub form: KernelForm,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "one")]
    pub sigma: f64,
    /// Channel name to kernel; listed channels are the ones used.
    #[serde(default)]
    pub channels: BTreeMap<String, ChannelSpec>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { sigma: 1.0, channels: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistrationSection {
    init_lengthscale: f64,
    min_lengthscale: Option<f64>,
    decay_factor: Option<f64>,
    stabilization_window: Option<usize>,
    stabilization_rel_tol: Option<f64>,
    max_iterations: Option<usize>,
    step_init: Option<f64>,
    step_shrink: Option<f64>,
    step_grow: Option<f64>,
    max_backtracks: Option<usize>,
    convergence_twist_norm: Option<f64>,
    cutoff_multiplier: Option<f64>,
    c_min: Option<f64>,
    first_frame_lengthscale: Option<f64>,
    subsequent_lengthscale: Option<f64>,
}

impl RegistrationSection {
    fn resolve(&self) -> RegistrationConfig {
        let mut c = RegistrationConfig::with_init_lengthscale(self.init_lengthscale);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(
            min_lengthscale,
            decay_factor,
            stabilization_window,
            stabilization_rel_tol,
            max_iterations,
            step_init,
            step_shrink,
            step_grow,
            max_backtracks,
            convergence_twist_norm,
            cutoff_multiplier,
            c_min,
            first_frame_lengthscale,
            subsequent_lengthscale
        );
        c
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    kernel: KernelSection,
    registration: RegistrationSection,
    #[serde(default)]
    selector: SelectorConfig,
    camera: Option<CameraIntrinsics>,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kernel: KernelSection,
    pub registration: RegistrationConfig,
    pub selector: SelectorConfig,
    pub camera: Option<CameraIntrinsics>,
}

impl RunConfig {
    /// Geometry-only configuration with defaults around `init_lengthscale`.
    pub fn geometric(init_lengthscale: f64) -> Self {
        Self {
            kernel: KernelSection::default(),
            registration: RegistrationConfig::with_init_lengthscale(init_lengthscale),
            selector: SelectorConfig::default(),
            camera: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.registration.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.kernel.sigma > 0.0) {
            return Err(Error::Config(format!("kernel.sigma must be > 0, got {}", self.kernel.sigma)));
        }
        for (name, ch) in &self.kernel.channels {
            if ch.form == KernelForm::SquaredExponential {
                match ch.lengthscale {
                    Some(l) if l > 0.0 => {}
                    Some(l) => {
                        return Err(Error::Config(format!("kernel.channels.{name}.lengthscale must be > 0, got {l}")))
                    }
                    None => return Err(Error::Config(format!("missing key kernel.channels.{name}.lengthscale"))),
                }
                if !(ch.sigma > 0.0) {
                    return Err(Error::Config(format!("kernel.channels.{name}.sigma must be > 0, got {}", ch.sigma)));
                }
            }
        }
        self.selector.validate()?;
        if let Some(cam) = &self.camera {
            cam.validate()?;
        }
        Ok(())
    }

    /// Names of the configured feature channels, in kernel order.
    pub fn channel_names(&self) -> Vec<&str> {
        self.kernel.channels.keys().map(String::as_str).collect()
    }

    /// Keeps only the configured channels of `cloud`, in kernel order.
    pub fn prepare_cloud(&self, cloud: &PointCloud) -> Result<PointCloud> {
        let names = self.channel_names();
        if names.is_empty() {
            return Ok(cloud.geometric_only());
        }
        Ok(cloud.select_channels(&names)?)
    }

    /// Prepares a target/source pair; a configured channel missing from
    /// either cloud is a schema mismatch naming both original schemas.
    pub fn prepare_pair(&self, target: &PointCloud, source: &PointCloud) -> Result<(PointCloud, PointCloud)> {
        let names = self.channel_names();
        let has_all = |c: &PointCloud| names.iter().all(|n| c.schema().index_of(n).is_some());
        if !has_all(target) || !has_all(source) {
            return Err(Error::Core(kernreg_core::Error::SchemaMismatch {
                target: target.schema().to_string(),
                source: source.schema().to_string(),
            }));
        }
        Ok((self.prepare_cloud(target)?, self.prepare_cloud(source)?))
    }

    /// Kernel parameters at `lengthscale` matching [`Self::prepare_cloud`].
    pub fn kernel_params(&self, lengthscale: f64) -> KernelParams {
        let per_channel = self
            .kernel
            .channels
            .values()
            .map(|ch| match ch.form {
                KernelForm::Linear => ChannelKernel::linear(),
                KernelForm::SquaredExponential => {
                    ChannelKernel::squared_exponential(ch.sigma, ch.lengthscale.unwrap_or(f64::NAN))
                }
            })
            .collect();
        KernelParams { sigma: self.kernel.sigma, lengthscale, per_channel }
    }
}

pub fn parse_config(text: &str, path: &str) -> Result<RunConfig> {
    let file: FileConfig = serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    let config = RunConfig {
        kernel: file.kernel,
        registration: file.registration.resolve(),
        selector: file.selector,
        camera: file.camera,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

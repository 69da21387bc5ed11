//! Depth + color images to colored (and optionally labeled) point clouds.

use kernreg_core::{ChannelKind, FeatureChannel, FeatureSchema, PointCloud, Vector3};
use serde::{Deserialize, Serialize};

use super::fast::{select_points, Selection, SelectorConfig};
use super::pnm::Image;
use crate::error::{Error, Result};

fn default_depth_scale() -> f64 {
    0.001
}
fn default_max_depth() -> f64 {
    55.0
}
fn default_skip_top_rows() -> usize {
    100
}

/// Pinhole intrinsics plus depth filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Meters per stored depth unit (default 0.001).
    #[serde(default = "default_depth_scale")]
    pub depth_scale: f64,
    /// Points farther than this are dropped (m, default 55).
    #[serde(default = "default_max_depth")]
    pub max_depth: f64,
    /// Rows `0..skip_top_rows` are ignored (default 100).
    #[serde(default = "default_skip_top_rows")]
    pub skip_top_rows: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            depth_scale: default_depth_scale(),
            max_depth: default_max_depth(),
            skip_top_rows: default_skip_top_rows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config(format!("camera: need fx > 0 and fy > 0, got {} and {}", self.fx, self.fy)));
        }
        if !(self.max_depth > 0.0) {
            return Err(Error::Config(format!("camera: max_depth must be > 0, got {}", self.max_depth)));
        }
        if !(self.depth_scale > 0.0) {
            return Err(Error::Config(format!("camera: depth_scale must be > 0, got {}", self.depth_scale)));
        }
        Ok(())
    }

    /// `depth · ((u − cx)/fx, (v − cy)/fy, 1)`.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(depth * (u - self.cx) / self.fx, depth * (v - self.cy) / self.fy, depth)
    }

    /// Pixel coordinates of a camera-frame point.
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Metric depth of a stored value, if it passes the filters.
    fn usable_depth(&self, raw: u16, row: usize) -> Option<f64> {
        let d = raw as f64 * self.depth_scale;
        (raw > 0 && row >= self.skip_top_rows && d <= self.max_depth).then_some(d)
    }
}

/// Per-pixel class probabilities, row-major with `classes` values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticImage {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub data: Vec<f64>,
}

impl SemanticImage {
    /// One-hot probabilities from a label image; labels `>= classes` are rejected.
    pub fn from_labels(labels: &Image<u16>, classes: usize) -> Result<Self> {
        let mut data = vec![0.0; labels.width * labels.height * classes];
        for (i, &l) in labels.data.iter().enumerate() {
            if l as usize >= classes {
                return Err(Error::Core(kernreg_core::Error::InvalidArgument(format!(
                    "label {l} at pixel {i} exceeds class count {classes}"
                ))));
            }
            data[i * classes + l as usize] = 1.0;
        }
        Ok(Self { width: labels.width, height: labels.height, classes, data })
    }
}

/// Back-projects the selected pixels of an RGB-D frame. Features are the
/// color in `[0, 1]` and, when given, the semantic probability vector.
pub fn depth_rgb_to_cloud(
    depth: &Image<u16>,
    rgb: &Image<u8>,
    semantics: Option<&SemanticImage>,
    intr: &CameraIntrinsics,
    sel: &SelectorConfig,
) -> Result<(PointCloud, Selection)> {
    intr.validate()?;
    let mismatch = |what: &str, w: usize, h: usize| {
        Error::Core(kernreg_core::Error::InvalidArgument(format!(
            "{what} is {w}x{h} but depth is {}x{}",
            depth.width, depth.height
        )))
    };
    if !depth.same_size(rgb) || rgb.channels != 3 || depth.channels != 1 {
        return Err(mismatch("color image", rgb.width, rgb.height));
    }
    if let Some(s) = semantics {
        if s.width != depth.width || s.height != depth.height {
            return Err(mismatch("semantic image", s.width, s.height));
        }
    }
    let w = depth.width;
    let valid: Vec<bool> =
        depth.data.iter().enumerate().map(|(i, &raw)| intr.usable_depth(raw, i / w).is_some()).collect();
    let selection = select_points(rgb, &valid, sel)?;

    let mut channels = vec![FeatureChannel::new("color", 3, ChannelKind::Color)];
    if let Some(s) = semantics {
        channels.push(FeatureChannel::new("semantic", s.classes, ChannelKind::Semantic));
    }
    let schema = FeatureSchema::new(channels)?;
    let mut positions = Vec::with_capacity(selection.pixels.len());
    let mut features = Vec::with_capacity(selection.pixels.len() * schema.total_dim());
    for &i in &selection.pixels {
        let (u, v) = (i % w, i / w);
        let d = intr.usable_depth(depth.data[i], v).expect("selection is a subset of valid pixels");
        positions.push(intr.back_project(u as f64, v as f64, d));
        features.extend((0..3).map(|c| rgb.get(u, v, c) as f64 / 255.0));
        if let Some(s) = semantics {
            features.extend_from_slice(&s.data[i * s.classes..(i + 1) * s.classes]);
        }
    }
    Ok((PointCloud::new(positions, features, schema)?, selection))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics { skip_top_rows: 0, ..CameraIntrinsics::new(500.0, 480.0, 32.0, 24.0) }
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let p = intr().back_project(32.0, 24.0, 2.5);
        assert_eq!(p, Vector3::new(0.0, 0.0, 2.5));
    }

    #[test]
    fn projection_inverts_back_projection() {
        let c = intr();
        for (u, v, d) in [(0.0, 0.0, 1.0), (63.0, 47.0, 30.0), (12.5, 40.25, 0.3)] {
            let (pu, pv) = c.project(&c.back_project(u, v, d));
            assert!((pu - u).abs() < 1e-9 && (pv - v).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_depth_gives_empty_cloud() {
        let depth = Image::<u16>::new(16, 12, 1);
        let rgb = Image::from_fn(16, 12, 3, |u, v, _| ((u * 31 + v * 17) % 256) as u8);
        let sel = SelectorConfig { target_min: 1, target_max: 10, ..Default::default() };
        let (cloud, _) = depth_rgb_to_cloud(&depth, &rgb, None, &intr(), &sel).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn filters_rows_and_far_points() {
        let c = CameraIntrinsics { skip_top_rows: 4, max_depth: 5.0, ..intr() };
        let depth = Image::from_fn(8, 8, 1, |u, _, _| if u < 4 { 3000 } else { 9000 });
        let rgb = Image::from_fn(8, 8, 3, |_, _, _| 100u8);
        let sel = SelectorConfig { target_min: 100, target_max: 200, ..Default::default() };
        let (cloud, selection) = depth_rgb_to_cloud(&depth, &rgb, None, &c, &sel).unwrap();
        // Uniform image, so the selector keeps every valid pixel: rows 4..8, columns 0..4.
        assert_eq!(cloud.len(), 16);
        assert!(selection.pixels.iter().all(|&i| i / 8 >= 4 && i % 8 < 4));
        assert!(cloud.positions().iter().all(|p| p.z == 3.0));
    }

    #[test]
    fn resolution_mismatch_is_rejected() {
        let depth = Image::<u16>::new(8, 8, 1);
        let rgb = Image::<u8>::new(8, 7, 3);
        assert!(depth_rgb_to_cloud(&depth, &rgb, None, &intr(), &SelectorConfig::default()).is_err());
    }

    #[test]
    fn one_hot_labels() {
        let labels = Image::from_fn(2, 1, 1, |u, _, _| u as u16);
        let s = SemanticImage::from_labels(&labels, 3).unwrap();
        assert_eq!(s.data, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(SemanticImage::from_labels(&labels, 1).is_err());
    }
}

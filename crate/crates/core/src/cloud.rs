//! Point sets with per-point appearance channels.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::se3::Isometry;

/// Clouds up to this size get an exact O(N²) diameter.
pub const EXACT_DIAMETER_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ChannelKind {
    Color,
    Intensity,
    Semantic,
    Custom,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Color => "color",
            ChannelKind::Intensity => "intensity",
            ChannelKind::Semantic => "semantic",
            ChannelKind::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureChannel {
    pub name: String,
    pub dim: usize,
    pub kind: ChannelKind,
}

impl FeatureChannel {
    pub fn new(name: impl Into<String>, dim: usize, kind: ChannelKind) -> Self {
        Self { name: name.into(), dim, kind }
    }
}

/// Ordered list of feature channels. An empty schema is the geometric-only mode.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSchema {
    channels: Vec<FeatureChannel>,
}

impl FeatureSchema {
    pub fn geometric() -> Self {
        Self::default()
    }

    pub fn new(channels: Vec<FeatureChannel>) -> Result<Self> {
        for (k, ch) in channels.iter().enumerate() {
            if ch.dim == 0 {
                return Err(invalid(alloc::format!("channel '{}' has zero dimension", ch.name)));
            }
            if channels[..k].iter().any(|other| other.name == ch.name) {
                return Err(invalid(alloc::format!("duplicate channel name '{}'", ch.name)));
            }
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[FeatureChannel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Total feature width, the sum of channel dimensions.
    pub fn total_dim(&self) -> usize {
        self.channels.iter().map(|c| c.dim).sum()
    }

    /// Column offset of each channel in a feature row.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.channels
            .iter()
            .map(|c| {
                let off = acc;
                acc += c.dim;
                off
            })
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    /// Concatenation of two schemas (channel names must stay unique).
    pub fn concat(&self, other: &FeatureSchema) -> Result<FeatureSchema> {
        let mut channels = self.channels.clone();
        channels.extend(other.channels.iter().cloned());
        FeatureSchema::new(channels)
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.channels.is_empty() {
            return f.write_str("[geometric]");
        }
        f.write_str("[")?;
        for (k, ch) in self.channels.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}:{}x{}", ch.name, ch.kind, ch.dim)?;
        }
        f.write_str("]")
    }
}

/// One failed cloud invariant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Violation {
    NonFinitePosition { row: usize },
    NonFiniteFeature { row: usize, channel: String },
    ColorOutOfRange { row: usize, channel: String, value: f64 },
    SemanticNegative { row: usize, channel: String, value: f64 },
    SemanticNotNormalized { row: usize, channel: String, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinitePosition { row } => write!(f, "row {row}: non-finite position"),
            Violation::NonFiniteFeature { row, channel } => {
                write!(f, "row {row}: non-finite value in channel '{channel}'")
            }
            Violation::ColorOutOfRange { row, channel, value } => {
                write!(f, "row {row}: color channel '{channel}' value {value} outside [0, 1]")
            }
            Violation::SemanticNegative { row, channel, value } => {
                write!(f, "row {row}: semantic channel '{channel}' has negative entry {value}")
            }
            Violation::SemanticNotNormalized { row, channel, sum } => {
                write!(f, "row {row}: semantic channel '{channel}' sums to {sum}, expected 1")
            }
        }
    }
}

/// Positions plus row-major features under a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vector3<f64>>,
    features: Vec<f64>,
    schema: FeatureSchema,
}

impl PointCloud {
    /// Checks that `features.len() == positions.len() * schema.total_dim()`.
    pub fn new(positions: Vec<Vector3<f64>>, features: Vec<f64>, schema: FeatureSchema) -> Result<Self> {
        let width = schema.total_dim();
        if features.len() != positions.len() * width {
            return Err(invalid(alloc::format!(
                "feature buffer has {} values, schema {} needs {} rows x {} = {}",
                features.len(),
                schema,
                positions.len(),
                width,
                positions.len() * width
            )));
        }
        Ok(Self { positions, features, schema })
    }

    pub fn from_positions(positions: Vec<Vector3<f64>>) -> Self {
        Self { positions, features: Vec::new(), schema: FeatureSchema::geometric() }
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        Self { positions: Vec::new(), features: Vec::new(), schema }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn feature_dim(&self) -> usize {
        self.schema.total_dim()
    }

    /// Feature row of point `i` (empty slice in geometric-only mode).
    #[inline]
    pub fn feature_row(&self, i: usize) -> &[f64] {
        let d = self.schema.total_dim();
        &self.features[i * d..(i + 1) * d]
    }

    /// Copy with positions mapped by `t`; features unchanged.
    pub fn transformed(&self, t: &Isometry) -> PointCloud {
        PointCloud {
            positions: self.positions.iter().map(|p| t.apply(p)).collect(),
            features: self.features.clone(),
            schema: self.schema.clone(),
        }
    }

    /// Copy keeping only the named channels, in the given order.
    pub fn select_channels(&self, names: &[&str]) -> Result<PointCloud> {
        let offsets = self.schema.offsets();
        let mut picked = Vec::with_capacity(names.len());
        for name in names {
            let k = self.schema.index_of(name).ok_or_else(|| {
                invalid(alloc::format!("cloud with schema {} has no channel '{}'", self.schema, name))
            })?;
            picked.push(k);
        }
        let channels: Vec<FeatureChannel> =
            picked.iter().map(|&k| self.schema.channels[k].clone()).collect();
        let schema = FeatureSchema::new(channels)?;
        let mut features = Vec::with_capacity(self.len() * schema.total_dim());
        for i in 0..self.len() {
            let row = self.feature_row(i);
            for &k in &picked {
                let off = offsets[k];
                features.extend_from_slice(&row[off..off + self.schema.channels[k].dim]);
            }
        }
        PointCloud::new(self.positions.clone(), features, schema)
    }

    /// Drops every feature channel.
    pub fn geometric_only(&self) -> PointCloud {
        PointCloud::from_positions(self.positions.clone())
    }

    /// Concatenates clouds sharing a schema.
    pub fn concat(&self, other: &PointCloud) -> Result<PointCloud> {
        if self.schema != other.schema {
            return Err(Error::SchemaMismatch {
                target: self.schema.to_string(),
                source: other.schema.to_string(),
            });
        }
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        PointCloud::new(positions, features, self.schema.clone())
    }

    /// Maximum pairwise distance. Exact for up to [`EXACT_DIAMETER_LIMIT`]
    /// points; larger clouds return the bounding-box diagonal, an upper bound.
    pub fn diameter(&self) -> f64 {
        let n = self.positions.len();
        if n < 2 {
            return 0.0;
        }
        if n <= EXACT_DIAMETER_LIMIT {
            let mut best = 0.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    best = best.max((self.positions[i] - self.positions[j]).norm_squared());
                }
            }
            return math::sqrt(best);
        }
        let (lo, hi) = self.bounding_box().expect("non-empty");
        (hi - lo).norm()
    }

    pub fn bounding_box(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.positions.is_empty() {
            return None;
        }
        let sum = self.positions.iter().fold(Vector3::zeros(), |acc, p| acc + p);
        Some(sum / self.positions.len() as f64)
    }

    /// Every invariant violation, in row order. Never mutates.
    pub fn validate(&self) -> core::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let offsets = self.schema.offsets();
        for (row, p) in self.positions.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                out.push(Violation::NonFinitePosition { row });
            }
            let feats = self.feature_row(row);
            for (ch, &off) in self.schema.channels.iter().zip(&offsets) {
                let vals = &feats[off..off + ch.dim];
                if vals.iter().any(|v| !v.is_finite()) {
                    out.push(Violation::NonFiniteFeature { row, channel: ch.name.clone() });
                    continue;
                }
                match ch.kind {
                    ChannelKind::Color => {
                        if let Some(&value) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                            out.push(Violation::ColorOutOfRange { row, channel: ch.name.clone(), value });
                        }
                    }
                    ChannelKind::Semantic => {
                        if let Some(&value) = vals.iter().find(|v| **v < 0.0) {
                            out.push(Violation::SemanticNegative { row, channel: ch.name.clone(), value });
                        } else {
                            let sum: f64 = vals.iter().sum();
                            if math::abs(sum - 1.0) > 1e-6 {
                                out.push(Violation::SemanticNotNormalized {
                                    row,
                                    channel: ch.name.clone(),
                                    sum,
                                });
                            }
                        }
                    }
                    ChannelKind::Intensity | ChannelKind::Custom => {}
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// `transform_cloud`: positions mapped by `t`, features copied.
pub fn transform_cloud(t: &Isometry, cloud: &PointCloud) -> PointCloud {
    cloud.transformed(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    fn colored(n: usize) -> PointCloud {
        let schema = FeatureSchema::new(vec![FeatureChannel::new("color", 3, ChannelKind::Color)]).unwrap();
        let positions = (0..n).map(|i| Vector3::new(i as f64, 0.5 * i as f64, -(i as f64))).collect();
        let features = (0..n * 3).map(|k| (k % 7) as f64 / 7.0).collect();
        PointCloud::new(positions, features, schema).unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_zero_dims() {
        let dup = FeatureSchema::new(vec![
            FeatureChannel::new("a", 1, ChannelKind::Custom),
            FeatureChannel::new("a", 2, ChannelKind::Custom),
        ]);
        assert!(dup.is_err());
        assert!(FeatureSchema::new(vec![FeatureChannel::new("z", 0, ChannelKind::Custom)]).is_err());
        let ok = FeatureSchema::new(vec![
            FeatureChannel::new("color", 3, ChannelKind::Color),
            FeatureChannel::new("sem", 5, ChannelKind::Semantic),
        ])
        .unwrap();
        assert_eq!(ok.total_dim(), 8);
        assert_eq!(ok.offsets(), vec![0, 3]);
        assert!(FeatureSchema::geometric().is_empty());
    }

    #[test]
    fn construction_checks_width() {
        let schema = FeatureSchema::new(vec![FeatureChannel::new("i", 1, ChannelKind::Intensity)]).unwrap();
        let err = PointCloud::new(vec![Vector3::zeros(); 3], vec![0.0; 2], schema);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn transform_identity_and_quarter_turn() {
        let c = colored(5);
        assert_eq!(transform_cloud(&Isometry::identity(), &c), c);
        let p = PointCloud::from_positions(vec![Vector3::new(1.0, 0.0, 0.0)]);
        let r = Isometry::from_axis_angle(&Vector3::z(), FRAC_PI_2);
        let q = transform_cloud(&r, &p).positions()[0];
        assert!((q - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transform_round_trip_restores_positions() {
        let c = colored(20);
        let t = Isometry::exp(&crate::Twist::from_array([0.2, -0.4, 0.9, 1.0, 2.0, 3.0])).unwrap();
        let back = c.transformed(&t).transformed(&t.inverse());
        for (a, b) in back.positions().iter().zip(c.positions()) {
            assert!((a - b).norm() < 1e-9);
        }
        assert_eq!(back.features(), c.features());
    }

    #[test]
    fn diameter_cases() {
        assert_eq!(PointCloud::from_positions(vec![Vector3::new(3.0, 1.0, 2.0)]).diameter(), 0.0);
        let mut corners = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    corners.push(Vector3::new(x, y, z));
                }
            }
        }
        let cube = PointCloud::from_positions(corners);
        assert!((cube.diameter() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn validate_reports_rows() {
        assert!(colored(4).validate().is_ok());
        let mut positions = vec![Vector3::zeros(); 3];
        positions[1].y = f64::NAN;
        let bad = PointCloud::from_positions(positions);
        assert_eq!(bad.validate().unwrap_err(), vec![Violation::NonFinitePosition { row: 1 }]);

        let schema = FeatureSchema::new(vec![FeatureChannel::new("sem", 2, ChannelKind::Semantic)]).unwrap();
        let cloud = PointCloud::new(vec![Vector3::zeros(); 2], vec![1.0, 0.0, 0.75, 0.75], schema).unwrap();
        let v = cloud.validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::SemanticNotNormalized { row: 1, .. }));
    }

    #[test]
    fn color_range_is_checked() {
        let schema = FeatureSchema::new(vec![FeatureChannel::new("rgb", 3, ChannelKind::Color)]).unwrap();
        let cloud = PointCloud::new(vec![Vector3::zeros()], vec![0.1, 1.2, 0.3], schema).unwrap();
        assert!(matches!(cloud.validate().unwrap_err()[0], Violation::ColorOutOfRange { row: 0, .. }));
    }

    #[test]
    fn select_channels_reorders() {
        let schema = FeatureSchema::new(vec![
            FeatureChannel::new("a", 1, ChannelKind::Custom),
            FeatureChannel::new("b", 2, ChannelKind::Custom),
        ])
        .unwrap();
        let cloud = PointCloud::new(vec![Vector3::zeros(); 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], schema).unwrap();
        let picked = cloud.select_channels(&["b"]).unwrap();
        assert_eq!(picked.features(), &[2.0, 3.0, 5.0, 6.0]);
        assert!(cloud.select_channels(&["nope"]).is_err());
        assert!(cloud.geometric_only().schema().is_empty());
    }
}

//! Point-cloud, image, trajectory and configuration files.

pub mod config;
pub mod fast;
pub mod pcd;
pub mod ply;
pub mod pnm;
pub mod rgbd;
pub mod trajectory;

use std::path::Path;

use kernreg_core::PointCloud;

use crate::error::{Error, Result};

pub use config::{load_config, parse_config, RunConfig};
pub use fast::{select_points, Selection, SelectionOutcome, SelectorConfig};
pub use ply::PlyEncoding;
pub use pnm::Image;
pub use rgbd::{depth_rgb_to_cloud, CameraIntrinsics, SemanticImage};
pub use trajectory::{Trajectory, TrajectoryFormat};

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Reads a `.ply` or `.pcd` file.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let label = path.display().to_string();
    match extension(path).as_str() {
        "ply" => ply::parse_ply(&read_bytes(path)?, &label),
        "pcd" => {
            let bytes = read_bytes(path)?;
            let text = std::str::from_utf8(&bytes).map_err(|_| Error::Unsupported(format!("{label}: non-text PCD")))?;
            pcd::parse_pcd(text, &label)
        }
        other => Err(Error::Unsupported(format!("{label}: unknown point-cloud extension '{other}'"))),
    }
}

/// Writes `.ply` (binary little-endian) or `.pcd` (ASCII) by extension.
pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    write_cloud_with(cloud, path, PlyEncoding::BinaryLittleEndian)
}

pub fn write_cloud_with(cloud: &PointCloud, path: &Path, encoding: PlyEncoding) -> Result<()> {
    let mut buf = Vec::new();
    match extension(path).as_str() {
        "ply" => ply::write_ply(cloud, &mut buf, encoding)?,
        "pcd" => pcd::write_pcd(cloud, &mut buf)?,
        other => {
            return Err(Error::Unsupported(format!("{}: unknown point-cloud extension '{other}'", path.display())))
        }
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path, format: TrajectoryFormat) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trajectory::parse_trajectory(&text, format, &path.display().to_string())
}

/// Writes a trajectory; `digits` significant digits, or exact when `None`.
pub fn write_trajectory(path: &Path, traj: &Trajectory, format: TrajectoryFormat, digits: Option<usize>) -> Result<()> {
    let text = trajectory::format_trajectory(traj, format, digits)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<Image<u16>> {
    pnm::parse_pgm(&read_bytes(path)?, &path.display().to_string())
}

pub fn read_ppm(path: &Path) -> Result<Image<u8>> {
    pnm::parse_ppm(&read_bytes(path)?, &path.display().to_string())
}

//! TUM (`t tx ty tz qx qy qz qw`) and KITTI (row-major 3×4) trajectories.

use std::fmt::Write as _;
use std::str::FromStr;

use kernreg_core::eval::TimedPose;
use kernreg_core::{Isometry, Vector3};

use crate::error::{Error, Result};
use crate::report::format_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Tum,
    Kitti,
}

impl FromStr for TrajectoryFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tum" => Ok(TrajectoryFormat::Tum),
            "kitti" => Ok(TrajectoryFormat::Kitti),
            other => Err(Error::Config(format!("unknown trajectory format '{other}' (expected tum or kitti)"))),
        }
    }
}

/// Poses with optional timestamps (TUM files carry them, KITTI files do not).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub timestamps: Option<Vec<f64>>,
    pub poses: Vec<Isometry>,
}

impl Trajectory {
    pub fn untimed(poses: Vec<Isometry>) -> Self {
        Self { timestamps: None, poses }
    }

    pub fn timed(timestamps: Vec<f64>, poses: Vec<Isometry>) -> Self {
        assert_eq!(timestamps.len(), poses.len(), "one timestamp per pose");
        Self { timestamps: Some(timestamps), poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Timed poses; untimed trajectories are stamped with their index.
    pub fn to_timed(&self) -> Vec<TimedPose> {
        self.poses
            .iter()
            .enumerate()
            .map(|(k, p)| TimedPose::new(self.timestamps.as_ref().map_or(k as f64, |t| t[k]), *p))
            .collect()
    }
}

pub fn parse_trajectory(text: &str, format: TrajectoryFormat, path: &str) -> Result<Trajectory> {
    let mut timestamps = Vec::new();
    let mut poses = Vec::new();
    let want = match format {
        TrajectoryFormat::Tum => 8,
        TrajectoryFormat::Kitti => 12,
    };
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(path, line_no, format!("cannot parse '{t}'"))))
            .collect::<Result<_>>()?;
        if values.len() != want {
            return Err(Error::parse(path, line_no, format!("expected {want} columns, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(path, line_no, "non-finite value"));
        }
        match format {
            TrajectoryFormat::Tum => {
                let t = Vector3::new(values[1], values[2], values[3]);
                let pose = Isometry::from_quaternion([values[4], values[5], values[6], values[7]], t)
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                timestamps.push(values[0]);
                poses.push(pose);
            }
            TrajectoryFormat::Kitti => {
                let a: [f64; 12] = values.try_into().unwrap();
                poses.push(Isometry::from_row_major_3x4(&a));
            }
        }
    }
    Ok(match format {
        TrajectoryFormat::Tum => Trajectory::timed(timestamps, poses),
        TrajectoryFormat::Kitti => Trajectory::untimed(poses),
    })
}

/// One KITTI line for `pose`; `digits` significant digits or shortest exact form.
pub fn kitti_line(pose: &Isometry, digits: Option<usize>) -> String {
    join(&pose.to_row_major_3x4(), digits)
}

fn join(values: &[f64], digits: Option<usize>) -> String {
    let mut s = String::new();
    for (k, &v) in values.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        s.push_str(&format_number(v, digits));
    }
    s
}

/// Serializes a trajectory. TUM output needs timestamps; `digits` as in [`kitti_line`].
pub fn format_trajectory(traj: &Trajectory, format: TrajectoryFormat, digits: Option<usize>) -> Result<String> {
    let mut out = String::new();
    match format {
        TrajectoryFormat::Kitti => {
            for pose in &traj.poses {
                writeln!(out, "{}", kitti_line(pose, digits)).unwrap();
            }
        }
        TrajectoryFormat::Tum => {
            let ts = traj
                .timestamps
                .as_ref()
                .ok_or_else(|| Error::Config("TUM trajectories need timestamps".into()))?;
            for (t, pose) in ts.iter().zip(&traj.poses) {
                let q = pose.quaternion();
                let p = pose.translation;
                let row = [p.x, p.y, p.z, q[0], q[1], q[2], q[3]];
                writeln!(out, "{} {}", format_number(*t, None), join(&row, digits)).unwrap();
            }
        }
    }
    Ok(out)
}

//! ASCII PCD point clouds with optional packed `rgb` and `intensity` fields.

use std::io::Write;

use kernreg_core::{ChannelKind, FeatureChannel, FeatureSchema, PointCloud, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Field {
    Axis(usize),
    Rgb { float: bool },
    Intensity,
    Skip,
}

/// Parses an ASCII PCD file. Points with a non-finite position (the usual
/// filler in organized clouds) are dropped with a warning.
pub fn parse_pcd(text: &str, path: &str) -> Result<PointCloud> {
    let err = |line: usize, msg: String| Error::parse(path, line, msg);
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));

    let mut fields: Vec<String> = Vec::new();
    let mut types: Vec<char> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut points: Option<usize> = None;
    let mut last_header_line = 0;
    for (line_no, raw) in lines.by_ref() {
        last_header_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let key = tok.next().unwrap();
        let rest: Vec<&str> = tok.collect();
        match key {
            "VERSION" | "VIEWPOINT" | "SIZE" => {}
            "FIELDS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "TYPE" => {
                types = rest
                    .iter()
                    .map(|t| match *t {
                        "F" | "I" | "U" => Ok(t.chars().next().unwrap()),
                        other => Err(err(line_no, format!("unknown field type '{other}'"))),
                    })
                    .collect::<Result<_>>()?
            }
            "COUNT" => {
                counts = rest
                    .iter()
                    .map(|c| c.parse::<usize>().map_err(|_| err(line_no, format!("bad COUNT entry '{c}'"))))
                    .collect::<Result<_>>()?
            }
            "WIDTH" | "HEIGHT" => {
                if rest.len() != 1 || rest[0].parse::<usize>().is_err() {
                    return Err(err(line_no, format!("{key} needs one non-negative integer")));
                }
            }
            "POINTS" => {
                points = Some(
                    rest.first()
                        .and_then(|p| p.parse().ok())
                        .filter(|_| rest.len() == 1)
                        .ok_or_else(|| err(line_no, "POINTS needs one non-negative integer".into()))?,
                )
            }
            "DATA" => {
                match rest.first().copied() {
                    Some("ascii") => {}
                    Some(other) => return Err(Error::Unsupported(format!("{path}: PCD DATA {other}"))),
                    None => return Err(err(line_no, "DATA without encoding".into())),
                }
                break;
            }
            other => return Err(err(line_no, format!("unexpected header keyword '{other}'"))),
        }
    }
    if fields.is_empty() {
        return Err(err(last_header_line, "missing FIELDS".into()));
    }
    if counts.is_empty() {
        counts = vec![1; fields.len()];
    }
    if types.len() != fields.len() || counts.len() != fields.len() {
        return Err(err(last_header_line, "FIELDS, TYPE and COUNT lengths differ".into()));
    }
    let points = points.ok_or_else(|| err(last_header_line, "missing POINTS".into()))?;

    let mut roles = Vec::with_capacity(fields.len());
    let mut axes = [false; 3];
    let (mut has_rgb, mut has_intensity) = (false, false);
    for (k, name) in fields.iter().enumerate() {
        let role = match (name.as_str(), counts[k]) {
            ("x", 1) | ("y", 1) | ("z", 1) => {
                let a = (name.as_bytes()[0] - b'x') as usize;
                axes[a] = true;
                Field::Axis(a)
            }
            ("rgb", 1) | ("rgba", 1) => {
                has_rgb = true;
                Field::Rgb { float: types[k] == 'F' }
            }
            ("intensity", 1) => {
                has_intensity = true;
                Field::Intensity
            }
            _ => {
                log::warn!("{path}: skipping unknown field '{name}'");
                Field::Skip
            }
        };
        roles.push(role);
    }
    if axes.iter().any(|a| !a) {
        return Err(err(last_header_line, "FIELDS lacks x, y or z".into()));
    }
    let mut channels = Vec::new();
    if has_rgb {
        channels.push(FeatureChannel::new("color", 3, ChannelKind::Color));
    }
    if has_intensity {
        channels.push(FeatureChannel::new("intensity", 1, ChannelKind::Intensity));
    }
    let schema = FeatureSchema::new(channels)?;
    let intensity_slot = if has_rgb { 3 } else { 0 };
    let width = schema.total_dim();

    let mut positions = Vec::with_capacity(points);
    let mut features = Vec::with_capacity(points * width);
    let mut row = vec![0.0; width];
    let mut seen = 0usize;
    let mut dropped = 0usize;
    for (line_no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if seen == points {
            return Err(err(line_no, "trailing data after POINTS entries".into()));
        }
        seen += 1;
        let mut tok = line.split_whitespace();
        let mut p = Vector3::zeros();
        for (k, role) in roles.iter().enumerate() {
            for _ in 0..counts[k] {
                let t = tok.next().ok_or_else(|| err(line_no, "too few values".into()))?;
                let parse_f = || t.parse::<f64>().map_err(|_| err(line_no, format!("cannot parse '{t}'")));
                match *role {
                    Field::Axis(a) => p[a] = parse_f()?,
                    Field::Intensity => row[intensity_slot] = parse_f()?,
                    Field::Rgb { float } => {
                        let bits = if float {
                            t.parse::<f32>().map_err(|_| err(line_no, format!("cannot parse '{t}'")))?.to_bits()
                        } else {
                            t.parse::<u32>().map_err(|_| err(line_no, format!("cannot parse '{t}'")))?
                        };
                        row[0] = ((bits >> 16) & 0xff) as f64 / 255.0;
                        row[1] = ((bits >> 8) & 0xff) as f64 / 255.0;
                        row[2] = (bits & 0xff) as f64 / 255.0;
                    }
                    Field::Skip => {}
                }
            }
        }
        if tok.next().is_some() {
            return Err(err(line_no, "too many values".into()));
        }
        if p.iter().all(|v| v.is_finite()) {
            positions.push(p);
            features.extend_from_slice(&row);
        } else {
            dropped += 1;
        }
    }
    if seen != points {
        return Err(err(text.lines().count(), format!("expected {points} points, found {seen}")));
    }
    if dropped > 0 {
        log::warn!("{path}: dropped {dropped} points with non-finite positions");
    }
    Ok(PointCloud::new(positions, features, schema)?)
}

/// Writes an ASCII PCD. Colors are quantized to 8 bits per component and
/// packed into a float `rgb` field; positions and intensity are exact.
pub fn write_pcd<W: Write>(cloud: &PointCloud, out: &mut W) -> Result<()> {
    let mut color = None;
    let mut intensity = None;
    let offsets = cloud.schema().offsets();
    for (k, ch) in cloud.schema().channels().iter().enumerate() {
        match (ch.kind, ch.dim) {
            (ChannelKind::Color, 3) if color.is_none() => color = Some(offsets[k]),
            (ChannelKind::Intensity, 1) if intensity.is_none() => intensity = Some(offsets[k]),
            (kind, dim) => {
                return Err(Error::Unsupported(format!(
                    "channel '{}' ({kind} x{dim}) has no PCD representation",
                    ch.name
                )))
            }
        }
    }
    let mut names = vec!["x", "y", "z"];
    let mut sizes = vec!["8", "8", "8"];
    if color.is_some() {
        names.push("rgb");
        sizes.push("4");
    }
    if intensity.is_some() {
        names.push("intensity");
        sizes.push("8");
    }
    let n = names.len();
    let mut text = String::new();
    text.push_str("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n");
    text.push_str(&format!("FIELDS {}\nSIZE {}\n", names.join(" "), sizes.join(" ")));
    text.push_str(&format!("TYPE {}\nCOUNT {}\n", vec!["F"; n].join(" "), vec!["1"; n].join(" ")));
    text.push_str(&format!(
        "WIDTH {}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {}\nDATA ascii\n",
        cloud.len(),
        cloud.len()
    ));
    for i in 0..cloud.len() {
        let p = cloud.positions()[i];
        let row = cloud.feature_row(i);
        text.push_str(&format!("{} {} {}", p.x, p.y, p.z));
        if let Some(o) = color {
            let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u32;
            let bits = (q(row[o]) << 16) | (q(row[o + 1]) << 8) | q(row[o + 2]);
            text.push_str(&format!(" {}", f32::from_bits(bits)));
        }
        if let Some(o) = intensity {
            text.push_str(&format!(" {}", row[o]));
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<pcd>", e))
}

//! PLY point clouds, ASCII and binary little-endian.
//!
//! Recognized vertex properties are `x y z`, `red green blue`, `intensity`
//! and `semantic_0 … semantic_{K−1}`. Colors stored as `uchar` or `ushort`
//! are normalized to `[0, 1]`; floating-point colors are taken as given.
//! Other vertex properties are skipped with a warning, and non-vertex
//! elements are parsed and discarded.

use std::io::Write;

use kernreg_core::{ChannelKind, FeatureChannel, FeatureSchema, PointCloud, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn parse_text(self, tok: &str) -> Option<f64> {
        match self {
            Scalar::I8 | Scalar::I16 | Scalar::I32 => tok.parse::<i64>().ok().map(|v| v as f64),
            Scalar::U8 | Scalar::U16 | Scalar::U32 => tok.parse::<u64>().ok().map(|v| v as f64),
            Scalar::F32 => tok.parse::<f32>().ok().map(f64::from),
            Scalar::F64 => tok.parse::<f64>().ok(),
        }
    }

    /// Divisor mapping stored colors onto `[0, 1]`.
    fn color_scale(self) -> f64 {
        match self {
            Scalar::U8 => 255.0,
            Scalar::U16 => 65535.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    /// Byte offset of the first data byte.
    data_start: usize,
    /// Number of header lines, for line numbers in ASCII bodies.
    lines: usize,
}

fn parse_header(bytes: &[u8], path: &str) -> Result<Header> {
    let err = |line: usize, msg: String| Error::parse(path, line, msg);
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err(line_no + 1, "header not terminated by end_header".into()))?;
        let raw = &bytes[pos..pos + end];
        pos += end + 1;
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| err(line_no, "header is not valid UTF-8".into()))?
            .trim_end_matches('\r')
            .trim();
        let mut tok = line.split_whitespace();
        let keyword = tok.next().unwrap_or("");
        if line_no == 1 {
            if line != "ply" {
                return Err(err(1, format!("expected 'ply' magic, found '{line}'")));
            }
            continue;
        }
        match keyword {
            "" | "comment" | "obj_info" => {}
            "format" => {
                let kind = tok.next().unwrap_or("");
                encoding = Some(match kind {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    "binary_big_endian" => {
                        return Err(Error::Unsupported(format!("{path}: big-endian PLY")));
                    }
                    other => return Err(err(line_no, format!("unknown PLY format '{other}'"))),
                });
            }
            "element" => {
                let name = tok.next().ok_or_else(|| err(line_no, "element without name".into()))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| err(line_no, format!("element '{name}' has no valid count")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            "property" => {
                let element =
                    elements.last_mut().ok_or_else(|| err(line_no, "property before any element".into()))?;
                let ty = tok.next().unwrap_or("");
                let kind = if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) => PropKind::List { count, item },
                        _ => return Err(err(line_no, "malformed list property".into())),
                    }
                } else {
                    PropKind::Scalar(
                        Scalar::parse(ty).ok_or_else(|| err(line_no, format!("unknown property type '{ty}'")))?,
                    )
                };
                let name = tok.next().ok_or_else(|| err(line_no, "property without name".into()))?;
                element.props.push(Property { name: name.to_string(), kind });
            }
            "end_header" => break,
            other => return Err(err(line_no, format!("unexpected header keyword '{other}'"))),
        }
        if tok.next().is_some() && !matches!(keyword, "comment" | "obj_info" | "format") {
            return Err(err(line_no, "trailing tokens in header line".into()));
        }
    }
    let encoding = encoding.ok_or_else(|| err(line_no, "missing format line".into()))?;
    Ok(Header { encoding, elements, data_start: pos, lines: line_no })
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Axis(usize),
    /// Feature slot and the divisor applied to the stored value.
    Feature(usize, f64),
    Skip,
}

/// Assigns a role to each vertex property and derives the schema.
fn vertex_layout(vertex: &Element, path: &str) -> Result<(Vec<Role>, FeatureSchema)> {
    let mut roles = vec![Role::Skip; vertex.props.len()];
    let mut axes = [false; 3];
    let mut colors = [None; 3];
    let mut intensity = None;
    let mut semantic: Vec<(usize, usize)> = Vec::new();
    for (k, prop) in vertex.props.iter().enumerate() {
        let PropKind::Scalar(scalar) = prop.kind else {
            log::warn!("{path}: skipping list property '{}' on vertex", prop.name);
            continue;
        };
        let name = prop.name.as_str();
        match name {
            "x" | "y" | "z" => {
                let a = (name.as_bytes()[0] - b'x') as usize;
                axes[a] = true;
                roles[k] = Role::Axis(a);
            }
            "red" | "green" | "blue" => {
                let c = ["red", "green", "blue"].iter().position(|n| *n == name).unwrap();
                colors[c] = Some((k, scalar.color_scale()));
            }
            "intensity" => intensity = Some(k),
            _ => match name.strip_prefix("semantic_").and_then(|s| s.parse::<usize>().ok()) {
                Some(class) => semantic.push((class, k)),
                None => log::warn!("{path}: skipping unknown vertex property '{name}'"),
            },
        }
    }
    if axes.iter().any(|a| !a) {
        return Err(Error::parse(path, 0, "vertex element lacks x, y or z"));
    }

    let mut channels = Vec::new();
    let mut next = 0;
    match colors {
        [Some(r), Some(g), Some(b)] => {
            for (c, (k, scale)) in [r, g, b].into_iter().enumerate() {
                roles[k] = Role::Feature(next + c, scale);
            }
            channels.push(FeatureChannel::new("color", 3, ChannelKind::Color));
            next += 3;
        }
        [None, None, None] => {}
        _ => log::warn!("{path}: incomplete red/green/blue properties skipped"),
    }
    if let Some(k) = intensity {
        roles[k] = Role::Feature(next, 1.0);
        channels.push(FeatureChannel::new("intensity", 1, ChannelKind::Intensity));
        next += 1;
    }
    if !semantic.is_empty() {
        semantic.sort_unstable();
        if semantic.iter().enumerate().any(|(i, (class, _))| *class != i) {
            return Err(Error::parse(path, 0, "semantic properties must be numbered semantic_0 .. semantic_{K-1}"));
        }
        for &(class, k) in &semantic {
            roles[k] = Role::Feature(next + class, 1.0);
        }
        channels.push(FeatureChannel::new("semantic", semantic.len(), ChannelKind::Semantic));
    }
    Ok((roles, FeatureSchema::new(channels)?))
}

struct VertexSink {
    roles: Vec<Role>,
    width: usize,
    positions: Vec<Vector3<f64>>,
    features: Vec<f64>,
}

impl VertexSink {
    fn push(&mut self, values: &[f64]) {
        let mut p = Vector3::zeros();
        let base = self.features.len();
        self.features.resize(base + self.width, 0.0);
        for (role, &v) in self.roles.iter().zip(values) {
            match *role {
                Role::Axis(a) => p[a] = v,
                Role::Feature(slot, scale) => self.features[base + slot] = v / scale,
                Role::Skip => {}
            }
        }
        self.positions.push(p);
    }
}

/// Parses PLY bytes. `path` only labels errors.
pub fn parse_ply(bytes: &[u8], path: &str) -> Result<PointCloud> {
    let header = parse_header(bytes, path)?;
    let vertex_idx = header.elements.iter().position(|e| e.name == "vertex");
    let (roles, schema) = match vertex_idx {
        Some(v) => vertex_layout(&header.elements[v], path)?,
        None => {
            log::warn!("{path}: no vertex element; returning an empty cloud");
            (Vec::new(), FeatureSchema::geometric())
        }
    };
    let mut sink = VertexSink { roles, width: schema.total_dim(), positions: Vec::new(), features: Vec::new() };
    let body = &bytes[header.data_start..];
    match header.encoding {
        PlyEncoding::Ascii => read_ascii_body(body, &header, vertex_idx, &mut sink, path)?,
        PlyEncoding::BinaryLittleEndian => read_binary_body(body, &header, vertex_idx, &mut sink, path)?,
    }
    Ok(PointCloud::new(sink.positions, sink.features, schema)?)
}

fn read_ascii_body(body: &[u8], header: &Header, vertex_idx: Option<usize>, sink: &mut VertexSink, path: &str) -> Result<()> {
    let text = std::str::from_utf8(body).map_err(|_| Error::parse(path, header.lines + 1, "body is not valid UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(k, l)| (header.lines + 1 + k, l)).filter(|(_, l)| !l.trim().is_empty());
    let mut values = Vec::new();
    for (e_idx, element) in header.elements.iter().enumerate() {
        for _ in 0..element.count {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, header.lines + 1, format!("unexpected end of data in element '{}'", element.name)))?;
            let mut tok = line.split_whitespace();
            let mut next = |ty: Scalar| -> Result<f64> {
                let t = tok.next().ok_or_else(|| Error::parse(path, line_no, "too few values"))?;
                ty.parse_text(t).ok_or_else(|| Error::parse(path, line_no, format!("cannot parse '{t}'")))
            };
            values.clear();
            for prop in &element.props {
                match prop.kind {
                    PropKind::Scalar(ty) => values.push(next(ty)?),
                    PropKind::List { count, item } => {
                        let n = next(count)?;
                        if n < 0.0 {
                            return Err(Error::parse(path, line_no, "negative list length"));
                        }
                        for _ in 0..n as usize {
                            next(item)?;
                        }
                        values.push(0.0);
                    }
                }
            }
            if tok.next().is_some() {
                return Err(Error::parse(path, line_no, "too many values"));
            }
            if Some(e_idx) == vertex_idx {
                sink.push(&values);
            }
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::parse(path, line_no, "trailing data after last element"));
    }
    Ok(())
}

fn read_binary_body(body: &[u8], header: &Header, vertex_idx: Option<usize>, sink: &mut VertexSink, path: &str) -> Result<()> {
    let mut pos = 0usize;
    let truncated = |name: &str| Error::parse(path, 0, format!("binary data truncated in element '{name}'"));
    let mut values = Vec::new();
    for (e_idx, element) in header.elements.iter().enumerate() {
        for _ in 0..element.count {
            values.clear();
            for prop in &element.props {
                match prop.kind {
                    PropKind::Scalar(ty) => {
                        let b = body.get(pos..pos + ty.size()).ok_or_else(|| truncated(&element.name))?;
                        values.push(ty.read_le(b));
                        pos += ty.size();
                    }
                    PropKind::List { count, item } => {
                        let b = body.get(pos..pos + count.size()).ok_or_else(|| truncated(&element.name))?;
                        let n = count.read_le(b);
                        if n < 0.0 {
                            return Err(Error::parse(path, 0, "negative list length"));
                        }
                        pos += count.size() + n as usize * item.size();
                        if pos > body.len() {
                            return Err(truncated(&element.name));
                        }
                        values.push(0.0);
                    }
                }
            }
            if Some(e_idx) == vertex_idx {
                sink.push(&values);
            }
        }
    }
    if pos != body.len() {
        return Err(Error::parse(path, 0, format!("{} trailing bytes after last element", body.len() - pos)));
    }
    Ok(())
}

/// Property names for each schema channel, in feature order.
fn property_names(schema: &FeatureSchema) -> Result<Vec<String>> {
    let mut names = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for ch in schema.channels() {
        if !seen.insert(ch.kind) {
            return Err(Error::Unsupported(format!("PLY stores at most one {} channel", ch.kind)));
        }
        match (ch.kind, ch.dim) {
            (ChannelKind::Color, 3) => names.extend(["red", "green", "blue"].map(String::from)),
            (ChannelKind::Intensity, 1) => names.push("intensity".into()),
            (ChannelKind::Semantic, k) => names.extend((0..k).map(|i| format!("semantic_{i}"))),
            (kind, dim) => {
                return Err(Error::Unsupported(format!(
                    "channel '{}' ({kind} x{dim}) has no PLY representation",
                    ch.name
                )))
            }
        }
    }
    Ok(names)
}

/// Serializes `cloud`. Positions and features are written as `double`, so
/// both encodings reproduce every value exactly.
pub fn write_ply<W: Write>(cloud: &PointCloud, out: &mut W, encoding: PlyEncoding) -> Result<()> {
    let names = property_names(cloud.schema())?;
    let io = |e| Error::io("<ply>", e);
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut head = format!("ply\nformat {format} 1.0\nelement vertex {}\n", cloud.len());
    for axis in ["x", "y", "z"] {
        head.push_str(&format!("property double {axis}\n"));
    }
    for name in &names {
        head.push_str(&format!("property double {name}\n"));
    }
    head.push_str("end_header\n");
    out.write_all(head.as_bytes()).map_err(io)?;

    match encoding {
        PlyEncoding::Ascii => {
            let mut line = String::new();
            for i in 0..cloud.len() {
                line.clear();
                let p = cloud.positions()[i];
                let row = cloud.feature_row(i);
                for v in [p.x, p.y, p.z].iter().chain(row) {
                    if !line.is_empty() {
                        line.push(' ');
                    }
                    line.push_str(&v.to_string());
                }
                line.push('\n');
                out.write_all(line.as_bytes()).map_err(io)?;
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            let mut buf = Vec::with_capacity(cloud.len() * 8 * (3 + names.len()));
            for i in 0..cloud.len() {
                let p = cloud.positions()[i];
                for v in [p.x, p.y, p.z].iter().chain(cloud.feature_row(i)) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            out.write_all(&buf).map_err(io)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_only_ascii() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 0 0 255 0 51\n1 2 3 0 255 0\n";
        let cloud = parse_ply(text, "t.ply").unwrap();
        assert_eq!(cloud.schema().len(), 1);
        assert_eq!(cloud.schema().channels()[0].dim, 3);
        assert_eq!(cloud.schema().channels()[0].kind, ChannelKind::Color);
        assert_eq!(cloud.feature_row(0), &[1.0, 0.0, 0.2]);
        assert_eq!(cloud.positions()[1], Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn empty_vertex_element() {
        let text = b"ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
        let cloud = parse_ply(text, "e.ply").unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn header_errors_carry_line_numbers() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty blob x\nend_header\n";
        match parse_ply(text, "bad.ply") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        match parse_ply(b"plx\n", "bad.ply") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_garbage_rejected() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n7 7 7\n";
        match parse_ply(text, "g.ply") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 9),
            other => panic!("unexpected {other:?}"),
        }
        let text = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0 1\n";
        assert!(parse_ply(text, "g.ply").is_err());
    }

    #[test]
    fn unknown_properties_and_faces_are_skipped() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nproperty float intensity\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 1 0.5\n1 0 0 1 0.25\n0 1 0 1 1\n3 0 1 2\n";
        let cloud = parse_ply(text, "f.ply").unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.schema().channels()[0].kind, ChannelKind::Intensity);
        assert_eq!(cloud.feature_row(1), &[0.25]);
    }

    #[test]
    fn custom_channels_are_not_writable() {
        let schema = FeatureSchema::new(vec![FeatureChannel::new("normal", 3, ChannelKind::Custom)]).unwrap();
        let cloud = PointCloud::new(vec![Vector3::zeros()], vec![0.0, 0.0, 1.0], schema).unwrap();
        assert!(matches!(write_ply(&cloud, &mut Vec::new(), PlyEncoding::Ascii), Err(Error::Unsupported(_))));
    }

    #[test]
    fn binary_round_trip_with_all_channels() {
        let schema = FeatureSchema::new(vec![
            FeatureChannel::new("color", 3, ChannelKind::Color),
            FeatureChannel::new("intensity", 1, ChannelKind::Intensity),
            FeatureChannel::new("semantic", 2, ChannelKind::Semantic),
        ])
        .unwrap();
        let cloud = PointCloud::new(
            vec![Vector3::new(0.1, -2.5, 1e-9), Vector3::new(3.0, 4.0, 5.0)],
            vec![0.1, 0.2, 0.3, 7.5, 0.25, 0.75, 1.0, 0.0, 0.5, 0.0, 1.0, 0.0],
            schema,
        )
        .unwrap();
        for enc in [PlyEncoding::BinaryLittleEndian, PlyEncoding::Ascii] {
            let mut buf = Vec::new();
            write_ply(&cloud, &mut buf, enc).unwrap();
            let back = parse_ply(&buf, "rt.ply").unwrap();
            assert_eq!(back, cloud);
        }
    }
}

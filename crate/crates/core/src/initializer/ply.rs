//! Minimal PLY point-cloud reader/writer (ASCII and binary little-endian).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<[f64; 3]>) -> Self {
        Self { points, colors: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Ply(format!("unknown property type {other}"))),
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
}

#[derive(Debug, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

struct Header {
    format: Format,
    vertices: usize,
    props: Vec<(String, Scalar)>,
    body_start: usize,
}

fn parse_header(data: &[u8]) -> Result<Header> {
    let mut at = 0;
    let mut lines = Vec::new();
    loop {
        let end = data[at..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| Error::Ply("unterminated header".into()))?;
        let line = std::str::from_utf8(&data[at..at + end])
            .map_err(|_| Error::Ply("header is not text".into()))?
            .trim_end_matches('\r')
            .trim()
            .to_string();
        at += end + 1;
        let done = line == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }
    if lines.first().map(String::as_str) != Some("ply") {
        return Err(Error::Ply("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut vertices = None;
    let mut props = Vec::new();
    let mut in_vertex = false;
    let mut seen_element = false;
    for line in &lines[1..] {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => format = Some(Format::Ascii),
            ["format", "binary_little_endian", _] => format = Some(Format::BinaryLe),
            ["format", other, _] => return Err(Error::Ply(format!("unsupported format {other}"))),
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| Error::Ply(format!("bad element count {count}")))?;
                if *name == "vertex" {
                    if seen_element {
                        return Err(Error::Ply("vertex element must come first".into()));
                    }
                    vertices = Some(count);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                }
                seen_element = true;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(Error::Ply("list properties on vertices are not supported".into()))
            }
            ["property", ty, name] if in_vertex => props.push((name.to_string(), Scalar::parse(ty)?)),
            _ => {}
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| Error::Ply("missing format line".into()))?,
        vertices: vertices.ok_or_else(|| Error::Ply("missing vertex element".into()))?,
        props,
        body_start: at,
    })
}

pub fn parse_ply(data: &[u8]) -> Result<PointCloud> {
    let h = parse_header(data)?;
    let find = |n: &str| h.props.iter().position(|(name, _)| name == n);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::Ply("vertex needs x, y, z".into())),
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let mut points = Vec::with_capacity(h.vertices);
    let mut colors = rgb.map(|_| Vec::with_capacity(h.vertices));
    let mut row = vec![0.0f64; h.props.len()];
    let body = &data[h.body_start..];
    match h.format {
        Format::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| Error::Ply("ascii body is not text".into()))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for k in 0..h.vertices {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Ply(format!("expected {} vertices, got {k}", h.vertices)))?;
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() < row.len() {
                    return Err(Error::Ply(format!("vertex {k}: too few values")));
                }
                for (r, v) in row.iter_mut().zip(&vals) {
                    *r = v.parse().map_err(|_| Error::Ply(format!("vertex {k}: bad number {v}")))?;
                }
                push(&row, ix, iy, iz, rgb, &mut points, &mut colors);
            }
        }
        Format::BinaryLe => {
            let stride: usize = h.props.iter().map(|(_, t)| t.size()).sum();
            if body.len() < stride * h.vertices {
                return Err(Error::Ply(format!(
                    "binary body holds {} bytes, need {}",
                    body.len(),
                    stride * h.vertices
                )));
            }
            for rec in body.chunks_exact(stride).take(h.vertices) {
                let mut off = 0;
                for (r, (_, t)) in row.iter_mut().zip(&h.props) {
                    *r = t.read_le(&rec[off..off + t.size()]);
                    off += t.size();
                }
                push(&row, ix, iy, iz, rgb, &mut points, &mut colors);
            }
        }
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Ply("non-finite coordinate".into()));
    }
    Ok(PointCloud { points, colors })
}

fn push(
    row: &[f64],
    ix: usize,
    iy: usize,
    iz: usize,
    rgb: Option<[usize; 3]>,
    points: &mut Vec<[f64; 3]>,
    colors: &mut Option<Vec<[u8; 3]>>,
) {
    points.push([row[ix], row[iy], row[iz]]);
    if let (Some(c), Some(idx)) = (colors.as_mut(), rgb) {
        c.push(idx.map(|i| row[i].clamp(0.0, 255.0) as u8));
    }
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&data).map_err(|e| Error::Ply(format!("{}: {e}", path.display())))
}

/// Binary little-endian PLY with float x,y,z and uchar colors if present.
pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    out.extend_from_slice(b"property float x\nproperty float y\nproperty float z\n");
    if cloud.colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        for v in p {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        if let Some(c) = &cloud.colors {
            out.extend_from_slice(&c[i]);
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

//! PLY 1.0 point clouds (ascii and binary_little_endian).
//!
//! Writes `float x y z` and, when the cloud is colored, `uchar red green
//! blue`. The reader accepts any scalar vertex properties and picks out
//! those names.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use fruitlet_core::{Point3, PointCloud, Rgb};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

pub fn write_ply_to<W: Write>(cloud: &PointCloud, format: PlyFormat, mut w: W) -> std::io::Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    let colors = cloud.colors();
    if colors.is_some() {
        writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        let xyz = [p.x as f32, p.y as f32, p.z as f32];
        match format {
            PlyFormat::Ascii => {
                write!(w, "{} {} {}", xyz[0], xyz[1], xyz[2])?;
                if let Some(c) = colors {
                    write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
                }
                writeln!(w)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in xyz {
                    w.write_all(&v.to_le_bytes())?;
                }
                if let Some(c) = colors {
                    w.write_all(&c[i])?;
                }
            }
        }
    }
    w.flush()
}

pub fn write_ply(cloud: &PointCloud, path: &Path, format: PlyFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply_to(cloud, format, BufWriter::new(file)).map_err(|e| Error::io(path, e))
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(format!("PLY: {}", msg.into()))
}

pub fn read_ply_from<R: BufRead>(mut r: R) -> Result<PointCloud> {
    let mut line = String::new();
    let mut next_line = |r: &mut R| -> Result<String> {
        line.clear();
        if r.read_line(&mut line).map_err(|e| bad(e.to_string()))? == 0 {
            return Err(bad("unexpected end of header"));
        }
        Ok(line.trim_end().to_string())
    };
    if next_line(&mut r)? != "ply" {
        return Err(bad("missing `ply` magic"));
    }
    let mut format = None;
    let mut count = None;
    let mut props: Vec<(Scalar, String)> = Vec::new();
    let mut in_vertex = false;
    loop {
        let l = next_line(&mut r)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", "1.0"] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", "1.0"] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, ..] => return Err(bad(format!("unsupported format `{other}`"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                if count.is_some() {
                    return Err(bad("vertex element must come first"));
                }
                count = Some(n.parse::<usize>().map_err(|_| bad(format!("bad vertex count `{n}`")))?);
                in_vertex = true;
            }
            ["element", ..] => {
                if count.is_none() {
                    return Err(bad("vertex element must come first"));
                }
                in_vertex = false;
            }
            ["property", "list", ..] if in_vertex => return Err(bad("list properties on vertices are not supported")),
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown property type `{ty}`")))?;
                props.push((s, name.to_string()));
            }
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(bad(format!("unexpected header line `{l}`"))),
        }
    }
    let format = format.ok_or_else(|| bad("missing format line"))?;
    let count = count.ok_or_else(|| bad("missing vertex element"))?;
    let find = |n: &str| props.iter().position(|(_, p)| p == n);
    let (xi, yi, zi) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(bad("vertex needs x, y and z")),
    };
    let color_idx = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };

    let mut points = Vec::with_capacity(count);
    let mut colors = color_idx.map(|_| Vec::with_capacity(count));
    let mut row = vec![0.0f64; props.len()];
    let mut push = |row: &[f64]| {
        points.push(Point3::new(row[xi], row[yi], row[zi]));
        if let (Some(c), Some(idx)) = (colors.as_mut(), color_idx) {
            let rgb: Rgb = idx.map(|i| row[i].clamp(0.0, 255.0) as u8);
            c.push(rgb);
        }
    };
    match format {
        PlyFormat::Ascii => {
            let mut text = String::new();
            r.read_to_string(&mut text).map_err(|e| bad(e.to_string()))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for i in 0..count {
                let l = lines.next().ok_or_else(|| bad(format!("only {i} of {count} vertices")))?;
                let vals: Vec<&str> = l.split_whitespace().collect();
                if vals.len() < props.len() {
                    return Err(bad(format!("vertex {i} has {} values, need {}", vals.len(), props.len())));
                }
                for ((slot, v), (s, _)) in row.iter_mut().zip(&vals).zip(&props) {
                    let not_num = || bad(format!("vertex {i}: `{v}` is not a number"));
                    // float properties go through f32 so ascii files restore the written values exactly
                    *slot = match s {
                        Scalar::F32 => v.parse::<f32>().map_err(|_| not_num())? as f64,
                        _ => v.parse::<f64>().map_err(|_| not_num())?,
                    };
                }
                push(&row);
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = props.iter().map(|(s, _)| s.size()).sum();
            let mut buf = vec![0u8; stride];
            for i in 0..count {
                r.read_exact(&mut buf).map_err(|_| bad(format!("only {i} of {count} vertices")))?;
                let mut off = 0;
                for (slot, (s, _)) in row.iter_mut().zip(&props) {
                    *slot = s.decode_le(&buf[off..off + s.size()]);
                    off += s.size();
                }
                push(&row);
            }
        }
    }
    Ok(PointCloud::new(points, colors)?)
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply_from(BufReader::new(file))
}

//! Depth rasters on disk.
//!
//! Metric sensor depth is a single-channel 16-bit PNG in millimeters.
//! Relative network output is a grayscale PFM (`Pf`) of 32-bit floats.
//! In both, 0 marks a pixel without data.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use fruitlet_core::{DepthConvention, DepthMap};
use image::{DynamicImage, ImageBuffer, Luma};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthFormat {
    Png16,
    Pfm,
}

impl DepthFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("png") => Ok(Self::Png16),
            Some("pfm") => Ok(Self::Pfm),
            _ => Err(Error::Format(format!("{}: expected a .png or .pfm depth file", path.display()))),
        }
    }
}

/// Load a depth raster. PNG files are always metric; `convention` applies
/// to PFM files. `expected` checks the raster size when given.
pub fn load_depth(path: &Path, convention: DepthConvention, expected: Option<(u32, u32)>) -> Result<DepthMap> {
    let map = match DepthFormat::from_path(path)? {
        DepthFormat::Png16 => read_png16(path)?,
        DepthFormat::Pfm => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_pfm(BufReader::new(file), convention).map_err(|e| match e {
                Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
    };
    if let Some((w, h)) = expected {
        if (map.width(), map.height()) != (w, h) {
            return Err(Error::Dimension { expected: (w, h), found: (map.width(), map.height()) });
        }
    }
    Ok(map)
}

fn read_png16(path: &Path) -> Result<DepthMap> {
    let img = image::open(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::Format(format!(
            "{}: depth PNG must be 16-bit single channel, found {:?}",
            path.display(),
            img.color()
        )));
    };
    let (w, h) = buf.dimensions();
    let values = buf.into_raw().into_iter().map(|mm| mm as f64 / 1000.0).collect();
    Ok(DepthMap::new(w, h, values, DepthConvention::MetricMeters)?)
}

/// Write a metric map as millimeter PNG, rounding to the nearest mm.
pub fn write_png16(depth: &DepthMap, path: &Path) -> Result<()> {
    depth.require(DepthConvention::MetricMeters)?;
    let raw: Vec<u16> = depth.values().iter().map(|d| (d * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width(), depth.height(), raw).expect("raster length checked by DepthMap");
    buf.save(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn header_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut token = Vec::new();
    loop {
        let mut b = [0u8; 1];
        if r.read(&mut b).map_err(|e| Error::Format(e.to_string()))? == 0 {
            break;
        }
        if b[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(b[0]);
    }
    if token.is_empty() {
        return Err(Error::Format("truncated PFM header".into()));
    }
    String::from_utf8(token).map_err(|_| Error::Format("PFM header is not ASCII".into()))
}

/// Parse a grayscale PFM. Rows are stored bottom-up; the result is
/// top-down. Negative or non-finite samples become invalid (0).
pub fn read_pfm<R: BufRead>(mut r: R, convention: DepthConvention) -> Result<DepthMap> {
    match header_token(&mut r)?.as_str() {
        "Pf" => {}
        "PF" => return Err(Error::Format("color PFM (PF) is not a depth raster".into())),
        other => return Err(Error::Format(format!("bad PFM magic `{other}`"))),
    }
    let parse_dim = |s: String| s.parse::<u32>().map_err(|_| Error::Format(format!("bad PFM dimension `{s}`")));
    let w = parse_dim(header_token(&mut r)?)?;
    let h = parse_dim(header_token(&mut r)?)?;
    let scale: f32 = {
        let s = header_token(&mut r)?;
        s.parse().map_err(|_| Error::Format(format!("bad PFM scale `{s}`")))?
    };
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format("PFM scale must be non-zero".into()));
    }
    let little_endian = scale < 0.0;
    let n = w as usize * h as usize;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes).map_err(|_| Error::Format(format!("PFM payload shorter than {w}x{h} floats")))?;
    let samples: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    for row in (0..h as usize).rev() {
        let start = row * w as usize;
        values.extend(samples[start..start + w as usize].iter().map(|&v| {
            let v = v as f64;
            if v.is_finite() && v > 0.0 {
                v
            } else {
                DepthMap::INVALID
            }
        }));
    }
    Ok(DepthMap::new(w, h, values, convention)?)
}

/// Little-endian PFM, rows bottom-up.
pub fn write_pfm<W: Write>(depth: &DepthMap, mut w: W) -> std::io::Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", depth.width(), depth.height())?;
    let width = depth.width() as usize;
    for row in (0..depth.height() as usize).rev() {
        for v in &depth.values()[row * width..(row + 1) * width] {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn save_pfm(depth: &DepthMap, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_pfm(depth, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pfm_bytes(magic: &str, w: u32, h: u32, scale: &str, rows_bottom_up: &[f32], le: bool) -> Vec<u8> {
        let mut b = format!("{magic}\n{w} {h}\n{scale}\n").into_bytes();
        for v in rows_bottom_up {
            b.extend(if le { v.to_le_bytes() } else { v.to_be_bytes() });
        }
        b
    }

    #[test]
    fn pfm_little_endian_is_flipped_top_down() {
        // file order (bottom row first): [3, 4], [1, 2]
        let bytes = pfm_bytes("Pf", 2, 2, "-1.0", &[3.0, 4.0, 1.0, 2.0], true);
        let d = read_pfm(&bytes[..], DepthConvention::RelativeInverseDepth).unwrap();
        assert_eq!(d.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.convention(), DepthConvention::RelativeInverseDepth);
    }

    #[test]
    fn pfm_big_endian() {
        let bytes = pfm_bytes("Pf", 2, 1, "1.0", &[0.5, 0.25], false);
        assert_eq!(read_pfm(&bytes[..], DepthConvention::RelativeDepth).unwrap().values(), &[0.5, 0.25]);
    }

    #[test]
    fn pfm_rejects_color_and_truncation() {
        let bytes = pfm_bytes("PF", 1, 1, "-1.0", &[1.0, 1.0, 1.0], true);
        assert!(matches!(read_pfm(&bytes[..], DepthConvention::RelativeDepth), Err(Error::Format(_))));
        let bytes = pfm_bytes("Pf", 2, 2, "-1.0", &[1.0], true);
        assert!(matches!(read_pfm(&bytes[..], DepthConvention::RelativeDepth), Err(Error::Format(_))));
    }

    #[test]
    fn pfm_negative_and_nan_become_invalid() {
        let bytes = pfm_bytes("Pf", 3, 1, "-1.0", &[-1.0, f32::NAN, 2.0], true);
        assert_eq!(read_pfm(&bytes[..], DepthConvention::RelativeDepth).unwrap().values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn pfm_round_trip() {
        let d = DepthMap::new(3, 2, vec![0.5, 1.0, 0.0, 2.0, 0.25, 8.0], DepthConvention::RelativeInverseDepth).unwrap();
        let mut buf = Vec::new();
        write_pfm(&d, &mut buf).unwrap();
        assert_eq!(read_pfm(&buf[..], DepthConvention::RelativeInverseDepth).unwrap(), d);
    }

    #[test]
    fn png_millimeters_to_meters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(2, 1, vec![610, 0]).unwrap();
        buf.save(&path).unwrap();
        let d = load_depth(&path, DepthConvention::MetricMeters, Some((2, 1))).unwrap();
        assert_eq!(d.values(), &[0.61, 0.0]);
        assert_eq!(d.valid_count(), 1);
        // loading twice is identical
        assert_eq!(load_depth(&path, DepthConvention::MetricMeters, None).unwrap(), d);
        assert!(matches!(
            load_depth(&path, DepthConvention::MetricMeters, Some((3, 1))),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn png_must_be_16_bit_gray() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        image::RgbImage::new(2, 2).save(&path).unwrap();
        assert!(matches!(load_depth(&path, DepthConvention::MetricMeters, None), Err(Error::Format(_))));
        let path8 = dir.path().join("g.png");
        image::GrayImage::new(2, 2).save(&path8).unwrap();
        assert!(matches!(load_depth(&path8, DepthConvention::MetricMeters, None), Err(Error::Format(_))));
    }

    #[test]
    fn png_write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let d = DepthMap::new(2, 2, vec![0.61, 0.0, 1.234, 9.999], DepthConvention::MetricMeters).unwrap();
        write_png16(&d, &path).unwrap();
        assert_eq!(load_depth(&path, DepthConvention::MetricMeters, None).unwrap(), d);
    }
}

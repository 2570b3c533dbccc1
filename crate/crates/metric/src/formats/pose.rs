//! Pose label files: one fruitlet per line,
//!
//! ```text
//! class cx cy w h calyx_x calyx_y calyx_v peduncle_x peduncle_y peduncle_v [confidence]
//! ```
//!
//! Coordinates are normalized to `[0, 1]`, visibility is 0 (not labeled),
//! 1 (occluded) or 2 (visible). Ground-truth files have 11 fields;
//! prediction files append a confidence.

use std::fmt::Write as _;

use fruitlet_core::{BBox, Keypoint, PoseDetection, Visibility};

use crate::{Error, Result};

/// The only class id: fruitlet.
pub const FRUITLET_CLASS: u32 = 0;

fn unit(line: usize, name: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::Parse { line, msg: format!("{name} = {v} outside [0, 1]") })
    }
}

fn visibility(line: usize, v: f64) -> Result<Visibility> {
    if v.fract() == 0.0 && (0.0..=2.0).contains(&v) {
        Ok(Visibility::from_code(v as u8).expect("code checked"))
    } else {
        Err(Error::Parse { line, msg: format!("visibility {v} must be 0, 1 or 2") })
    }
}

pub fn parse_pose_file(text: &str, image_id: &str) -> Result<Vec<PoseDetection>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 11 && fields.len() != 12 {
            return Err(Error::Parse { line, msg: format!("expected 11 or 12 fields, found {}", fields.len()) });
        }
        let nums = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("`{f}` is not a number") }))
            .collect::<Result<Vec<f64>>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse { line, msg: "non-finite value".into() });
        }
        if nums[0] != FRUITLET_CLASS as f64 {
            return Err(Error::Parse { line, msg: format!("unknown class id {}", fields[0]) });
        }
        let [cx, cy, w, h] = [("cx", 1), ("cy", 2), ("w", 3), ("h", 4)].map(|(n, j)| unit(line, n, nums[j]));
        let bbox = BBox::clamped(cx?, cy?, w?, h?).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let calyx = Keypoint::new(unit(line, "calyx x", nums[5])?, unit(line, "calyx y", nums[6])?, visibility(line, nums[7])?);
        let peduncle =
            Keypoint::new(unit(line, "peduncle x", nums[8])?, unit(line, "peduncle y", nums[9])?, visibility(line, nums[10])?);
        let confidence = match nums.get(11) {
            Some(&c) => unit(line, "confidence", c)?,
            None => 1.0,
        };
        out.push(PoseDetection { image_id: image_id.to_string(), bbox, confidence, calyx, peduncle });
    }
    Ok(out)
}

/// Inverse of [`parse_pose_file`]. Values use Rust's shortest round-trip
/// float formatting, so parsing the output restores them exactly.
pub fn write_pose_file(dets: &[PoseDetection], with_confidence: bool) -> String {
    let mut s = String::new();
    for d in dets {
        let b = &d.bbox;
        let (c, p) = (&d.calyx, &d.peduncle);
        write!(
            s,
            "{FRUITLET_CLASS} {} {} {} {} {} {} {} {} {} {}",
            b.cx,
            b.cy,
            b.w,
            b.h,
            c.x,
            c.y,
            c.visibility.code(),
            p.x,
            p.y,
            p.visibility.code()
        )
        .unwrap();
        if with_confidence {
            write!(s, " {}", d.confidence).unwrap();
        }
        s.push('\n');
    }
    s
}

//! Caliper ground truth: UTF-8 CSV with header `image_id,fruit_id,length_mm`.

use std::collections::HashSet;
use std::io::{Read, Write};

use fruitlet_core::GroundTruthLength;

use crate::{Error, Result};

pub const HEADER: [&str; 3] = ["image_id", "fruit_id", "length_mm"];

/// Rows are numbered from 1, header excluded.
pub fn parse_ground_truth<R: Read>(reader: R) -> Result<Vec<GroundTruthLength>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let (ci, cf, cl) = (col(HEADER[0])?, col(HEADER[1])?, col(HEADER[2])?);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::Value { row, msg: "missing field".into() });
        let (image_id, fruit_id) = (field(ci)?.to_string(), field(cf)?.to_string());
        if image_id.is_empty() || fruit_id.is_empty() {
            return Err(Error::Value { row, msg: "empty image_id or fruit_id".into() });
        }
        let raw = field(cl)?;
        let length_mm: f64 =
            raw.parse().map_err(|_| Error::Value { row, msg: format!("length `{raw}` is not a number") })?;
        if !(length_mm.is_finite() && length_mm > 0.0) {
            return Err(Error::Value { row, msg: format!("length {length_mm} mm must be positive") });
        }
        if !seen.insert((image_id.clone(), fruit_id.clone())) {
            return Err(Error::DuplicateKey { image_id, fruit_id });
        }
        out.push(GroundTruthLength { image_id, fruit_id, length_mm });
    }
    Ok(out)
}

pub fn write_ground_truth<W: Write>(records: &[GroundTruthLength], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for r in records {
        wtr.write_record([r.image_id.as_str(), r.fruit_id.as_str(), &r.length_mm.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))
}

//! `lengths.csv`: one row per (measured, truth) pair per depth method.
//!
//! ```text
//! image_id,fruit_id,method,predicted_mm,actual_mm,residual_mm
//! ```
//!
//! The reader also accepts hand-made tables that only carry `method`,
//! `predicted_mm` and `actual_mm`.

use std::io::{Read, Write};

use fruitlet_core::{DepthMethod, LengthRecord};

use crate::{Error, Result};

pub const HEADER: [&str; 6] = ["image_id", "fruit_id", "method", "predicted_mm", "actual_mm", "residual_mm"];

pub fn write_lengths<W: Write>(records: &[LengthRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for r in records {
        wtr.write_record([
            r.image_id.as_str(),
            r.fruit_id.as_str(),
            r.method.name(),
            &r.predicted_mm.to_string(),
            &r.actual_mm.to_string(),
            &r.residual_mm().to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_lengths<R: Read>(reader: R) -> Result<Vec<LengthRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::Schema(format!("missing column `{name}`")));
    let (cm, cp, ca) = (need("method")?, need("predicted_mm")?, need("actual_mm")?);
    let (ci, cf) = (find("image_id"), find("fruit_id"));
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let get = |c: usize| rec.get(c).ok_or_else(|| Error::Value { row, msg: "missing field".into() });
        let num = |c: usize| -> Result<f64> {
            let s = get(c)?;
            let v: f64 = s.parse().map_err(|_| Error::Value { row, msg: format!("`{s}` is not a number") })?;
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Value { row, msg: format!("length {v} mm must be positive") })
            }
        };
        let method: DepthMethod = get(cm)?.parse().map_err(|e: fruitlet_core::Error| Error::Value { row, msg: e.to_string() })?;
        out.push(LengthRecord {
            image_id: ci.map(get).transpose()?.unwrap_or("").to_string(),
            fruit_id: match cf {
                Some(c) => get(c)?.to_string(),
                None => format!("row{row}"),
            },
            predicted_mm: num(cp)?,
            actual_mm: num(ca)?,
            method,
        });
    }
    Ok(out)
}

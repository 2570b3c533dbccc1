//! Output tables and rendered reports.
//!
//! `metrics.csv` holds one row per pose model. The `*_ms` columns are wall
//! clock means and differ between runs; every other byte is reproducible.

use std::fmt::Write as _;
use std::io::{Read, Write};

use fruitlet_core::boxplot::BoxStats;
use fruitlet_core::{length_error_stats, DepthMethod, LengthErrorStats, LengthRecord};
use serde::{Deserialize, Serialize};

use crate::Result;

/// Columns whose values depend on the machine and load.
pub const VOLATILE_COLUMNS: [&str; 3] = ["preprocess_ms", "inference_ms", "postprocess_ms"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub box_precision: f64,
    pub box_recall: f64,
    /// `None` when no image has an annotation.
    pub box_map50: Option<f64>,
    pub pose_precision: f64,
    pub pose_recall: f64,
    pub pose_map50: Option<f64>,
    pub images: usize,
    pub preprocess_ms: f64,
    pub inference_ms: f64,
    pub postprocess_ms: f64,
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?)
}

/// Three decimals with trailing zeros dropped, keeping one: 0.910 -> "0.91".
pub fn format_metric(v: f64) -> String {
    let s = format!("{v:.3}");
    let trimmed = s.trim_end_matches('0');
    if trimmed.ends_with('.') {
        format!("{trimmed}0")
    } else {
        trimmed.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Better {
    Higher,
    Lower,
}

struct Column {
    title: &'static str,
    better: Better,
    get: fn(&MetricsRow) -> Option<f64>,
}

const COLUMNS: [Column; 9] = [
    Column { title: "Box P", better: Better::Higher, get: |r| Some(r.box_precision) },
    Column { title: "Box R", better: Better::Higher, get: |r| Some(r.box_recall) },
    Column { title: "Box mAP@50", better: Better::Higher, get: |r| r.box_map50 },
    Column { title: "Pose P", better: Better::Higher, get: |r| Some(r.pose_precision) },
    Column { title: "Pose R", better: Better::Higher, get: |r| Some(r.pose_recall) },
    Column { title: "Pose mAP@50", better: Better::Higher, get: |r| r.pose_map50 },
    Column { title: "Pre ms", better: Better::Lower, get: |r| Some(r.preprocess_ms) },
    Column { title: "Inference ms", better: Better::Lower, get: |r| Some(r.inference_ms) },
    Column { title: "Post ms", better: Better::Lower, get: |r| Some(r.postprocess_ms) },
];

/// Formatted cells per row, with a flag on the best value of each column.
/// Ties compare on the displayed value, so equal-looking cells are all marked.
fn table_cells(rows: &[MetricsRow]) -> Vec<Vec<(String, bool)>> {
    let shown: Vec<Vec<Option<String>>> =
        rows.iter().map(|r| COLUMNS.iter().map(|c| (c.get)(r).map(format_metric)).collect()).collect();
    let mut best: Vec<Option<String>> = vec![None; COLUMNS.len()];
    for (j, col) in COLUMNS.iter().enumerate() {
        let mut top: Option<(f64, String)> = None;
        for (i, r) in rows.iter().enumerate() {
            let (Some(v), Some(s)) = ((col.get)(r), shown[i][j].clone()) else { continue };
            let v: f64 = s.parse().unwrap_or(v);
            let wins = match &top {
                None => true,
                Some((t, _)) => match col.better {
                    Better::Higher => v > *t,
                    Better::Lower => v < *t,
                },
            };
            if wins {
                top = Some((v, s));
            }
        }
        best[j] = top.map(|t| t.1);
    }
    shown
        .into_iter()
        .map(|row| {
            row.into_iter()
                .enumerate()
                .map(|(j, s)| match s {
                    Some(s) => {
                        let b = rows.len() > 1 && best[j].as_deref() == Some(s.as_str());
                        (s, b)
                    }
                    None => ("n/a".to_string(), false),
                })
                .collect()
        })
        .collect()
}

/// Plain-text table; the best value in each column carries a `*`.
pub fn render_summary(rows: &[MetricsRow]) -> String {
    let mut header = vec!["Model".to_string()];
    header.extend(COLUMNS.iter().map(|c| c.title.to_string()));
    let mut lines = vec![header];
    for (r, cells) in rows.iter().zip(table_cells(rows)) {
        let mut line = vec![r.model.clone()];
        line.extend(cells.into_iter().map(|(s, b)| if b { format!("{s}*") } else { s }));
        lines.push(line);
    }
    let widths: Vec<usize> =
        (0..lines[0].len()).map(|j| lines.iter().map(|l| l[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out.push_str("* best in column (timings: lowest)\n");
    out
}

fn markdown_metrics(rows: &[MetricsRow], out: &mut String) {
    out.push_str("| Model |");
    for c in &COLUMNS {
        let _ = write!(out, " {} |", c.title);
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(COLUMNS.len()));
    out.push('\n');
    for (r, cells) in rows.iter().zip(table_cells(rows)) {
        let _ = write!(out, "| {} |", r.model);
        for (s, b) in cells {
            if b {
                let _ = write!(out, " **{s}** |");
            } else {
                let _ = write!(out, " {s} |");
            }
        }
        out.push('\n');
    }
}

/// One box of the plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub stats: BoxStats,
}

/// Box-plot series: ground truth first, then each depth method present in
/// the records. Absent methods are returned separately.
pub fn length_series(records: &[LengthRecord]) -> Result<(Vec<Series>, Vec<DepthMethod>)> {
    let mut seen = std::collections::BTreeSet::new();
    let actual: Vec<f64> = records
        .iter()
        .filter(|r| seen.insert((r.image_id.as_str(), r.fruit_id.as_str())))
        .map(|r| r.actual_mm)
        .collect();
    let mut series = Vec::new();
    if !actual.is_empty() {
        series.push(Series { label: "Ground truth".into(), stats: BoxStats::from_values(&actual)? });
    }
    let mut missing = Vec::new();
    for m in DepthMethod::ALL {
        let values: Vec<f64> = records.iter().filter(|r| r.method == m).map(|r| r.predicted_mm).collect();
        if values.is_empty() {
            missing.push(m);
        } else {
            series.push(Series { label: m.label().into(), stats: BoxStats::from_values(&values)? });
        }
    }
    Ok((series, missing))
}

/// Error statistics per depth method present in the records.
pub fn method_stats(records: &[LengthRecord]) -> Result<Vec<(DepthMethod, LengthErrorStats)>> {
    let mut out = Vec::new();
    for m in DepthMethod::ALL {
        let subset: Vec<LengthRecord> = records.iter().filter(|r| r.method == m).cloned().collect();
        if !subset.is_empty() {
            out.push((m, length_error_stats(&subset)?));
        }
    }
    Ok(out)
}

const SVG_W_PER_BOX: f64 = 140.0;
const SVG_MARGIN_L: f64 = 70.0;
const SVG_MARGIN_R: f64 = 20.0;
const SVG_TOP: f64 = 40.0;
const SVG_PLOT_H: f64 = 360.0;
const SVG_BOTTOM: f64 = 80.0;

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-9);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(t);
        t += step;
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Box plot of length distributions: box Q1 to Q3, median line, whiskers
/// to the furthest values within 1.5 IQR, outliers as dots.
pub fn render_boxplot_svg(series: &[Series], missing: &[DepthMethod]) -> String {
    let n = series.len().max(1) as f64;
    let width = SVG_MARGIN_L + SVG_MARGIN_R + n * SVG_W_PER_BOX;
    let height = SVG_TOP + SVG_PLOT_H + SVG_BOTTOM;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        lo = lo.min(s.stats.whisker_low).min(s.stats.outliers.iter().copied().fold(f64::INFINITY, f64::min));
        hi = hi.max(s.stats.whisker_high).max(s.stats.outliers.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(0.5);
    let (lo, hi) = (lo - pad, hi + pad);
    let y = |v: f64| SVG_TOP + (hi - v) / (hi - lo) * SVG_PLOT_H;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">Fruitlet length by measurement source</text>"#,
        width / 2.0
    );
    let bottom = SVG_TOP + SVG_PLOT_H;
    let _ = writeln!(
        s,
        r#"<line x1="{SVG_MARGIN_L:.2}" y1="{SVG_TOP:.2}" x2="{SVG_MARGIN_L:.2}" y2="{bottom:.2}" stroke="black"/>"#
    );
    for t in nice_ticks(lo, hi) {
        let ty = y(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{SVG_MARGIN_L:.2}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            SVG_MARGIN_L - 5.0,
            SVG_MARGIN_L - 8.0,
            ty + 4.0,
            format_metric(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">Length (mm)</text>"#,
        SVG_TOP + SVG_PLOT_H / 2.0,
        SVG_TOP + SVG_PLOT_H / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let b = &ser.stats;
        let cx = SVG_MARGIN_L + (i as f64 + 0.5) * SVG_W_PER_BOX;
        let half = SVG_W_PER_BOX * 0.25;
        let cap = half * 0.5;
        let (yq1, yq3, ymed) = (y(b.q1), y(b.q3), y(b.median));
        let (ylo, yhi) = (y(b.whisker_low), y(b.whisker_high));
        let _ = writeln!(s, r#"<g class="box" data-label="{}">"#, escape(&ser.label));
        let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="{yhi:.2}" x2="{cx:.2}" y2="{yq3:.2}" stroke="black"/>"#);
        let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="{yq1:.2}" x2="{cx:.2}" y2="{ylo:.2}" stroke="black"/>"#);
        for wy in [yhi, ylo] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{wy:.2}" x2="{:.2}" y2="{wy:.2}" stroke="black"/>"#,
                cx - cap,
                cx + cap
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{yq3:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
            cx - half,
            2.0 * half,
            (yq1 - yq3).max(0.0)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{ymed:.2}" x2="{:.2}" y2="{ymed:.2}" stroke="#d62728" stroke-width="2"/>"##,
            cx - half,
            cx + half
        );
        for o in &b.outliers {
            let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{:.2}" r="3" fill="none" stroke="black"/>"#, y(*o));
        }
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            escape(&ser.label)
        );
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">n = {}</text>"#, bottom + 34.0, b.n);
        s.push_str("</g>\n");
    }
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|m| m.label()).collect();
        let _ = writeln!(
            s,
            r#"<text class="legend-note" x="{SVG_MARGIN_L:.2}" y="{:.2}">No data: {}</text>"#,
            height - 12.0,
            escape(&names.join(", "))
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Markdown report: detection table (when given), length accuracy per
/// method and the box-plot figures.
pub fn render_report(metrics: Option<&[MetricsRow]>, records: &[LengthRecord], boxplot_file: &str) -> Result<String> {
    let mut out = String::from("# Fruitlet measurement report\n\n");
    if let Some(rows) = metrics {
        out.push_str("## Detection and pose\n\n");
        if rows.is_empty() {
            out.push_str("No models were evaluated.\n\n");
        } else {
            markdown_metrics(rows, &mut out);
            out.push_str("\nBold marks the best value per column. Timings are means per image and vary between runs.\n\n");
        }
    }
    out.push_str("## Length accuracy\n\n");
    let stats = method_stats(records)?;
    if stats.is_empty() {
        out.push_str("No length records.\n\n");
    } else {
        out.push_str("| Method | n | RMSE (mm) | MAE (mm) |\n|---|---:|---:|---:|\n");
        for (m, s) in &stats {
            let _ = writeln!(out, "| {} | {} | {:.4} | {:.4} |", m.label(), s.n, s.rmse_mm, s.mae_mm);
        }
        out.push('\n');
    }
    let (series, missing) = length_series(records)?;
    out.push_str("## Length distribution\n\n");
    let _ = writeln!(out, "![Length box plot]({boxplot_file})\n");
    if !series.is_empty() {
        out.push_str("| Series | n | Low whisker | Q1 | Median | Q3 | High whisker | Outliers |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
        for s in &series {
            let b = &s.stats;
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {} |",
                s.label,
                b.n,
                b.whisker_low,
                b.q1,
                b.median,
                b.q3,
                b.whisker_high,
                b.outliers.len()
            );
        }
        out.push('\n');
    }
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|m| m.label()).collect();
        let _ = writeln!(out, "No data for: {}.", names.join(", "));
    }
    Ok(out)
}

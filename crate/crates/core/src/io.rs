//! Serialization: JSON tessellations, CSV tables and SVG skeleta.

use crate::convergence::{BoundCheckRow, ConvergenceTable};
use crate::error::{Error, Result};
use crate::tessellation::{skeleton, Tessellation};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Lossless float formatting: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Parameter(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parameter(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Parameter(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let io = |e: csv::Error| Error::Parameter(format!("csv: {e}"));
        let header = r.headers().map_err(io)?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect())).collect::<std::result::Result<_, _>>().map_err(io)?;
        Ok(Table { header, rows })
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub const MOMENT_COLUMNS: [&str; 9] = ["d", "nu", "s", "closed_form", "mc_estimate", "stderr", "z_score", "n", "seed"];
pub const CONVERGENCE_COLUMNS: [&str; 10] = ["model", "beta", "compact", "t_beta", "t_gauss", "delta", "stderr", "n_paired", "tv_bound", "monotone"];
pub const BOUND_COLUMNS: [&str; 11] = ["bound", "d", "A", "level", "beta", "beta0", "bound_value", "empirical", "stderr", "n_seeds", "ok"];

pub fn convergence_table(t: &ConvergenceTable) -> Table {
    let mut out = Table::new(&CONVERGENCE_COLUMNS);
    for r in &t.rows {
        let mono = t.monotone.iter().find(|m| m.0 == r.kind).map(|m| m.1).unwrap_or(true);
        let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        out.push(vec![
            kind,
            fmt_f64(r.beta),
            r.compact.to_string(),
            fmt_f64(r.t_beta),
            fmt_f64(r.t_gauss),
            fmt_f64(r.delta),
            fmt_f64(r.stderr),
            r.n_paired.to_string(),
            fmt_f64(r.tv_bound),
            mono.to_string(),
        ]);
    }
    out
}

pub fn bound_table(rows: &[BoundCheckRow]) -> Table {
    let mut out = Table::new(&BOUND_COLUMNS);
    for r in rows {
        out.push(vec![
            r.which.to_string(),
            r.d.to_string(),
            fmt_f64(r.a),
            fmt_f64(r.level),
            fmt_f64(r.beta),
            fmt_f64(r.beta0),
            fmt_f64(r.bound),
            fmt_f64(r.empirical),
            fmt_f64(r.stderr),
            r.n_seeds.to_string(),
            r.ok.to_string(),
        ]);
    }
    out
}

pub fn tessellation_json(t: &Tessellation) -> Result<String> {
    serde_json::to_string_pretty(t).map_err(|e| Error::Parameter(format!("json: {e}")))
}

/// SVG of the skeleton inside B_R (planar tessellations only); the view
/// box is the window's bounding square, y pointing up.
pub fn skeleton_svg(t: &Tessellation) -> Result<String> {
    if t.window.model.d != 3 {
        return Err(Error::Dimension(t.window.model.d));
    }
    let r = t.window.radius;
    let stroke = r / 250.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}" width="600" height="600">"#,
        -r,
        -r,
        2.0 * r,
        2.0 * r
    );
    let _ = writeln!(s, r#"<circle cx="0" cy="0" r="{r}" fill="white" stroke="gray" stroke-width="{stroke}"/>"#);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="{stroke}" stroke-linecap="round">"#);
    for f in skeleton(t) {
        if let [a, b] = &f.points[..] {
            let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, a[0], -a[1], b[0], -b[1]);
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

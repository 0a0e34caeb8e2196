//! Output documents and plot-ready CSV tables, the fit input format, and a
//! validator for every file this crate writes.
//!
//! Numbers are written in shortest round-trip form, so a table read back
//! reproduces the values bit for bit.

use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::{BoundaryPoint, PhaseDiagram, Regime, TrajectoryPoint};
use crate::error::{Error, Result};
use crate::estimation::{Residual, SeriesKind, SeriesPoint, TimeSeries};
use crate::units::MICRO;

/// Identifier and version of the JSON result document.
pub const SCHEMA_ID: &str = "codt-transport/report/v1";

pub const TRAJECTORY_HEADER: [&str; 4] = ["t_s", "N_c", "R_atoms_per_s", "D_atoms_per_s"];
pub const GRID_HEADER: [&str; 3] = ["U_eff_uK", "N_c0", "regime"];
pub const BOUNDARY_HEADER: [&str; 2] = ["U_eff_uK", "N_c0_star"];
pub const TEMPERATURE_HEADER: [&str; 2] = ["U_eff_uK", "T_uK"];
pub const RESIDUAL_HEADER: [&str; 4] = ["t_s", "N_c", "N_c_model", "residual"];

/// Versioned result document.
#[derive(Debug, Clone, Serialize)]
pub struct Document<T: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub result: T,
}

impl<T: Serialize> Document<T> {
    pub fn new(command: &'static str, result: T) -> Self {
        Document {
            schema: SCHEMA_ID,
            command,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn trajectory_csv(points: &[TrajectoryPoint]) -> String {
    table(
        &TRAJECTORY_HEADER,
        points
            .iter()
            .map(|p| vec![fmt_f64(p.t), fmt_f64(p.n_c), fmt_f64(p.loading), fmt_f64(p.loss)]),
    )
}

pub fn grid_csv(d: &PhaseDiagram) -> String {
    let mut rows = Vec::new();
    for (i, &u) in d.u_eff.iter().enumerate() {
        for (j, &n) in d.n_c0.iter().enumerate() {
            rows.push(vec![fmt_f64(u / MICRO), fmt_f64(n), d.labels[i][j].to_string()]);
        }
    }
    table(&GRID_HEADER, rows.into_iter())
}

pub fn boundary_csv(points: &[BoundaryPoint]) -> String {
    table(
        &BOUNDARY_HEADER,
        points
            .iter()
            .map(|b| vec![fmt_f64(b.u_eff / MICRO), fmt_f64(b.n_c0_star)]),
    )
}

/// `(U_eff, T)` pairs in kelvin.
pub fn temperature_csv(pairs: &[(f64, f64)]) -> String {
    table(
        &TEMPERATURE_HEADER,
        pairs
            .iter()
            .map(|(u, t)| vec![fmt_f64(u / MICRO), fmt_f64(t / MICRO)]),
    )
}

pub fn residual_csv(rows: &[Residual]) -> String {
    table(
        &RESIDUAL_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.t),
                fmt_f64(r.observed),
                fmt_f64(r.model),
                fmt_f64(r.observed - r.model),
            ]
        }),
    )
}

/// Read a centre-number series: columns `t_s` and `N_c` are required,
/// `sigma_N` is optional, other columns are ignored.
pub fn read_series_csv(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let (Some(it), Some(iv)) = (find("t_s"), find("N_c")) else {
        return Err(Error::data(format!(
            "expected columns t_s,N_c[,sigma_N], found {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    };
    let is = find("sigma_N");
    let mut points: Vec<SeriesPoint> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let num = |i: usize, name: &str| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::data(format!("line {line}: column {name}: cannot parse {field:?}")))
        };
        let t = num(it, "t_s")?;
        if let Some(prev) = points.last() {
            if !(t > prev.t) {
                return Err(Error::data(format!(
                    "line {line} (data row {}): t_s = {t} does not increase",
                    k + 1
                )));
            }
        }
        points.push(SeriesPoint {
            t,
            value: num(iv, "N_c")?,
            sigma: is.map(|i| num(i, "sigma_N")).transpose()?,
        });
    }
    TimeSeries::new(SeriesKind::CenterNumber, points)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// What kind of file a schema check recognised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Document,
    Trajectory,
    Grid,
    Boundary,
    Temperature,
    Residuals,
    Series,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaReport {
    pub kind: FileKind,
    pub rows: usize,
}

/// Validate a file produced by this crate: a JSON document with the
/// current schema id, or a CSV table with a known header, finite numbers,
/// valid regime labels and increasing time columns.
pub fn schema_check(text: &str) -> Result<SchemaReport> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let schema = v.get("schema").and_then(|s| s.as_str());
        if schema != Some(SCHEMA_ID) {
            return Err(Error::data(format!(
                "document schema {schema:?} is not {SCHEMA_ID:?}"
            )));
        }
        if v.get("command").and_then(|c| c.as_str()).is_none() || v.get("result").is_none() {
            return Err(Error::data("document lacks command or result"));
        }
        return Ok(SchemaReport {
            kind: FileKind::Document,
            rows: 1,
        });
    }

    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let kind = match h.as_slice() {
        x if x == TRAJECTORY_HEADER => FileKind::Trajectory,
        x if x == GRID_HEADER => FileKind::Grid,
        x if x == BOUNDARY_HEADER => FileKind::Boundary,
        x if x == TEMPERATURE_HEADER => FileKind::Temperature,
        x if x == RESIDUAL_HEADER => FileKind::Residuals,
        ["t_s", "N_c"] | ["t_s", "N_c", "sigma_N"] => FileKind::Series,
        _ => {
            let mut msg = String::new();
            let _ = write!(msg, "unrecognised header {:?}", header.join(","));
            return Err(Error::data(msg));
        }
    };
    let mut rows = 0;
    let mut last_t = f64::NEG_INFINITY;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != header.len() {
            return Err(Error::data(format!("line {line}: expected {} fields", header.len())));
        }
        for (i, field) in rec.iter().enumerate() {
            if header[i] == "regime" {
                field.parse::<Regime>().map_err(|_| Error::data(format!("line {line}: bad regime {field:?}")))?;
                continue;
            }
            let x: f64 = field
                .parse()
                .map_err(|_| Error::data(format!("line {line}: column {}: not a number", header[i])))?;
            if !x.is_finite() {
                return Err(Error::data(format!("line {line}: column {}: not finite", header[i])));
            }
            if header[i] == "t_s" {
                if !(x > last_t) {
                    return Err(Error::data(format!("line {line}: t_s does not increase")));
                }
                last_t = x;
            }
        }
        rows += 1;
    }
    Ok(SchemaReport { kind, rows })
}

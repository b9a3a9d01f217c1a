//! Time-series CSV, report JSON, and field sample files.
//!
//! Floats are written with 17 significant digits so every value round-trips
//! exactly. All writers go through a temporary file in the target directory
//! and rename it into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::analytic::ExactSolution;
use crate::error::OutputError;
use crate::experiments::ExperimentReport;
use crate::grid::{Grid, SpectralField};
use crate::integrator::TrajectoryRecord;

pub const TIMESERIES_HEADER: &str = "t,sup_norm,re_Q,im_Q,re_E,im_E,l2,h1";
pub const FIELD_HEADER: &str = "x,re,im";
pub const EXACT_HEADER: &str = "t,x,re,im,abs";

/// Top-level report keys in serialization order.
pub const REPORT_KEYS: [&str; 10] = [
    "name",
    "inputs",
    "grid",
    "stepper",
    "metrics",
    "tolerances",
    "verdict",
    "notes",
    "artifacts",
    "tool_version",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn schema_err(path: &Path, message: impl Into<String>) -> OutputError {
    OutputError::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), OutputError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| OutputError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
    cells.join(",")
}

pub fn timeseries_csv(traj: &TrajectoryRecord) -> String {
    let mut out = String::new();
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&row(&[
            s.time,
            s.sup_norm,
            s.charge.re,
            s.charge.im,
            s.energy.re,
            s.energy.im,
            s.l2,
            s.h1,
        ]));
        out.push('\n');
    }
    out.push_str(&format!("# termination={}\n", traj.termination.name()));
    out.push_str(&format!("# final_time={}\n", fmt_f64(traj.final_time)));
    out.push_str(&format!("# steps={}\n", traj.steps));
    match traj.blowup_estimate {
        Some(est) => {
            out.push_str(&format!("# blowup_estimate={}\n", fmt_f64(est.time)));
            out.push_str(&format!("# blowup_uncertainty={}\n", fmt_f64(est.uncertainty)));
        }
        None => out.push_str("# blowup_estimate=none\n"),
    }
    out
}

pub fn write_timeseries(traj: &TrajectoryRecord, path: &Path) -> Result<(), OutputError> {
    write_atomic(path, timeseries_csv(traj).as_bytes())
}

/// Parsed time-series file: data rows and `# key=value` trailer entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Timeseries {
    pub rows: Vec<[f64; 8]>,
    pub trailer: BTreeMap<String, String>,
}

impl Timeseries {
    pub fn column(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[index])
    }
}

/// Reads and schema-checks a time-series file.
pub fn read_timeseries(path: &Path) -> Result<Timeseries, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_timeseries(&text).map_err(|m| schema_err(path, m))
}

pub fn parse_timeseries(text: &str) -> Result<Timeseries, String> {
    let mut trailer = BTreeMap::new();
    let mut data = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(rest) => {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| format!("malformed trailer line {line:?}"))?;
                trailer.insert(k.to_owned(), v.to_owned());
            }
            None => {
                data.push_str(line);
                data.push('\n');
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(data.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>().join(",") != TIMESERIES_HEADER {
        return Err(format!("expected header {TIMESERIES_HEADER:?}"));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<[f64; 8]>().enumerate() {
        rows.push(record.map_err(|e| format!("row {}: {e}", i + 1))?);
    }
    if !trailer.contains_key("termination") {
        return Err("missing termination trailer".into());
    }
    if !trailer.contains_key("blowup_estimate") {
        return Err("missing blowup_estimate trailer".into());
    }
    Ok(Timeseries { rows, trailer })
}

pub fn report_json(rep: &ExperimentReport) -> Result<String, serde_json::Error> {
    let mut text = serde_json::to_string_pretty(rep)?;
    text.push('\n');
    Ok(text)
}

pub fn write_report(rep: &ExperimentReport, path: &Path) -> Result<(), OutputError> {
    let text = report_json(rep).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, text.as_bytes())
}

/// Reads a report, rejecting documents whose top-level keys differ from
/// [`REPORT_KEYS`] in name or order.
pub fn read_report(path: &Path) -> Result<ExperimentReport, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_report(&text).map_err(|e| match e {
        ReportParseError::Json(source) => OutputError::Json {
            path: path.to_path_buf(),
            source,
        },
        ReportParseError::Schema(m) => schema_err(path, m),
    })
}

#[derive(Debug)]
pub enum ReportParseError {
    Json(serde_json::Error),
    Schema(String),
}

pub fn parse_report(text: &str) -> Result<ExperimentReport, ReportParseError> {
    let keys = top_level_keys(text).map_err(ReportParseError::Json)?;
    if keys != REPORT_KEYS {
        return Err(ReportParseError::Schema(format!(
            "top-level keys {keys:?} do not match {REPORT_KEYS:?}"
        )));
    }
    serde_json::from_str(text).map_err(ReportParseError::Json)
}

/// Top-level object keys in document order.
fn top_level_keys(text: &str) -> Result<Vec<String>, serde_json::Error> {
    use serde::de::{Deserializer, IgnoredAny, MapAccess, Visitor};
    use std::fmt;

    struct Keys;
    impl<'de> Visitor<'de> for Keys {
        type Value = Vec<String>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a JSON object")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Vec<String>, A::Error> {
            let mut keys = Vec::new();
            while let Some(k) = map.next_key::<String>()? {
                map.next_value::<IgnoredAny>()?;
                keys.push(k);
            }
            Ok(keys)
        }
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let keys = (&mut de).deserialize_map(Keys)?;
    de.end()?;
    Ok(keys)
}

pub fn field_csv(f: &SpectralField) -> String {
    let mut out = String::new();
    out.push_str(FIELD_HEADER);
    out.push('\n');
    for (x, u) in f.grid().nodes().iter().zip(f.samples()) {
        out.push_str(&row(&[*x, u.re, u.im]));
        out.push('\n');
    }
    out.push_str(&format!("# t={}\n", fmt_f64(f.time())));
    out
}

pub fn write_field(f: &SpectralField, path: &Path) -> Result<(), OutputError> {
    write_atomic(path, field_csv(f).as_bytes())
}

/// Reads `x,re,im` samples. The nodes must be the grid nodes
/// `-L + j dx` of a power-of-two grid; the time defaults to zero unless a
/// `# t=` trailer is present.
pub fn read_field(path: &Path) -> Result<SpectralField, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_field(&text).map_err(|m| schema_err(path, m))
}

pub fn parse_field(text: &str) -> Result<SpectralField, String> {
    let mut time = 0.0;
    let mut data = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(rest) => {
                if let Some(v) = rest.trim().strip_prefix("t=") {
                    time = v.trim().parse().map_err(|_| format!("bad time {v:?}"))?;
                }
            }
            None => {
                data.push_str(line);
                data.push('\n');
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(data.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>().join(",") != FIELD_HEADER {
        return Err(format!("expected header {FIELD_HEADER:?}"));
    }
    let mut xs = Vec::new();
    let mut samples = Vec::new();
    for (i, record) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        let (x, re, im) = record.map_err(|e| format!("row {}: {e}", i + 1))?;
        xs.push(x);
        samples.push(Complex64::new(re, im));
    }
    if xs.len() < 2 {
        return Err("need at least two samples".into());
    }
    let half_length = -xs[0];
    let grid = Grid::new(xs.len(), half_length).map_err(|e| e.to_string())?;
    let tol = 1e-9 * grid.spacing();
    if let Some(j) = xs
        .iter()
        .zip(grid.nodes())
        .position(|(x, node)| (x - node).abs() > tol)
    {
        return Err(format!(
            "row {}: x = {} is not the grid node {}",
            j + 1,
            xs[j],
            grid.nodes()[j]
        ));
    }
    SpectralField::new(grid, samples, time).map_err(|e| e.to_string())
}

/// `t,x,re,im,abs` table of a catalog solution. Pole hits are written as
/// `inf` moduli with `nan` components.
pub fn exact_csv(kind: &ExactSolution, times: &[f64], xs: &[f64]) -> String {
    let mut out = String::new();
    out.push_str(EXACT_HEADER);
    out.push('\n');
    for &t in times {
        for &x in xs {
            let line = match kind.eval(t, x) {
                Ok(u) => row(&[t, x, u.re, u.im, u.norm()]),
                Err(_) => format!("{},{},nan,nan,inf", fmt_f64(t), fmt_f64(x)),
            };
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Inclusive `start:stop:step` range; the endpoint is kept when it lies on
/// the lattice up to rounding.
pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number {s:?} in range {text:?}"))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, stop, step] => {
            let (a, b, h) = (num(start)?, num(stop)?, num(step)?);
            if !(h > 0.0 && h.is_finite()) || b < a {
                return Err(format!("range {text:?} needs start <= stop and step > 0"));
            }
            let count = ((b - a) / h + 1e-9).floor() as usize;
            if count > 10_000_000 {
                return Err(format!("range {text:?} has too many points"));
            }
            Ok((0..=count).map(|i| a + i as f64 * h).collect())
        }
        _ => Err(format!("range {text:?} must be a number or start:stop:step")),
    }
}

/// Per-experiment output locations under one directory.
#[derive(Clone, Debug)]
pub struct OutputLayout {
    pub dir: PathBuf,
}

impl OutputLayout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.report.json"))
    }

    pub fn timeseries(&self, name: &str, label: &str) -> PathBuf {
        self.dir.join(format!("{name}.{label}.csv"))
    }
}

/// Writes every trajectory of an outcome and then its report. The
/// trajectory paths are listed ahead of any artifacts already recorded.
/// Returns the report path.
pub fn write_outcome(
    outcome: &mut crate::experiments::ExperimentOutcome,
    layout: &OutputLayout,
) -> Result<PathBuf, OutputError> {
    let name = outcome.report.name.clone();
    let mut artifacts = Vec::new();
    for (i, t) in outcome.trajectories.iter().enumerate() {
        let label = if outcome
            .trajectories
            .iter()
            .filter(|o| o.label == t.label)
            .count()
            > 1
        {
            format!("{}_{i}", t.label)
        } else {
            t.label.clone()
        };
        let path = layout.timeseries(&name, &label);
        write_timeseries(&t.record, &path)?;
        artifacts.push(path.display().to_string());
    }
    artifacts.append(&mut outcome.report.artifacts);
    outcome.report.artifacts = artifacts;
    let path = layout.report(&name);
    write_report(&outcome.report, &path)?;
    Ok(path)
}

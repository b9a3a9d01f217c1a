//! Run configuration documents.
//!
//! ```toml
//! equation = "focusing"          # or "defocusing"
//! t_end = 1.0
//! output_dir = "out"             # optional
//!
//! [initial]                      # a catalog datum ...
//! kind = "soliton"               # zero | soliton | one_param | two_param | perturbed_soliton
//! omega = 1.0
//! # samples_file = "u0.csv"      # ... or samples on a grid, never both
//!
//! [grid]
//! num_points = 1024              # power of two
//! half_length = "auto"           # 40 / (slowest decay rate of the datum), or a number
//!
//! [stepper]                      # every key optional
//! scheme = "strang_pair_rk4"     # or "if_rk4"
//! dt0 = 1e-3
//!
//! [experiment]                   # instead of [initial]
//! name = "small_data_blowup"
//! alpha = 0.75
//! ```
//!
//! Unknown keys are errors. Errors carry the line of the offending key.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::analytic::ExactSolution;
use crate::error::ConfigError;
use crate::experiments::{Discretization, ExperimentSpec, Params};
use crate::grid::{Grid, SpectralField};
use crate::integrator::{Scheme, StepperConfig};
use crate::nonlinearity::Sign;
use crate::output::read_field;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "NLNLS_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "nlnls-out";
/// Grid size for `simulate` when the config leaves it open.
pub const DEFAULT_POINTS: usize = 2048;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Catalog(ExactSolution),
    SamplesFile(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSelection {
    pub name: String,
    pub params: Params,
}

impl ExperimentSelection {
    pub fn spec(&self) -> Result<ExperimentSpec, ConfigError> {
        ExperimentSpec::from_params(&self.name, &self.params)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub equation: Sign,
    pub initial: Option<InitialData>,
    pub grid: Discretization,
    pub stepper: StepperConfig,
    pub t_end: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub experiment: Option<ExperimentSelection>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            equation: Sign::Focusing,
            initial: None,
            grid: Discretization::default(),
            stepper: StepperConfig::default(),
            t_end: None,
            output_dir: None,
            experiment: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    equation: Option<Spanned<Sign>>,
    t_end: Option<Spanned<f64>>,
    output_dir: Option<String>,
    initial: Option<Spanned<RawInitial>>,
    grid: Option<RawGrid>,
    stepper: Option<Spanned<RawStepper>>,
    experiment: Option<Spanned<toml::Table>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: Option<Spanned<String>>,
    omega: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    delta: Option<f64>,
    samples_file: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    num_points: Option<Spanned<i64>>,
    half_length: Option<Spanned<toml::Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStepper {
    scheme: Option<Scheme>,
    dt0: Option<f64>,
    adaptive: Option<bool>,
    dt_min: Option<f64>,
    amplitude_threshold: Option<f64>,
    conservation_tol: Option<f64>,
    dealias: Option<bool>,
    monitor_stride: Option<usize>,
}

struct Anchor<'a> {
    text: &'a str,
}

impl Anchor<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn err(&self, span: &Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError::AtLine {
            line: self.line(span),
            message: message.into(),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let anchor = Anchor { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => anchor.err(&span, e.message().trim_end()),
        None => ConfigError::Invalid(e.message().trim_end().to_owned()),
    })?;

    let mut cfg = RunConfig {
        output_dir: raw.output_dir.map(PathBuf::from),
        ..RunConfig::default()
    };
    if let Some(eq) = raw.equation {
        cfg.equation = *eq.get_ref();
    }
    if let Some(t) = raw.t_end {
        let v = *t.get_ref();
        if !(v.is_finite() && v > 0.0) {
            return Err(anchor.err(&t.span(), format!("t_end must be positive, got {v}")));
        }
        cfg.t_end = Some(v);
    }
    if let Some(grid) = raw.grid {
        if let Some(n) = grid.num_points {
            let v = *n.get_ref();
            let checked = usize::try_from(v)
                .map_err(|_| format!("num_points must be positive, got {v}"))
                .and_then(|n| check_points(n).map(|_| n));
            match checked {
                Ok(n) => cfg.grid.num_points = Some(n),
                Err(m) => return Err(anchor.err(&n.span(), m)),
            }
        }
        if let Some(l) = grid.half_length {
            cfg.grid.half_length =
                parse_half_length(l.get_ref()).map_err(|m| anchor.err(&l.span(), m))?;
        }
    }
    if let Some(st) = raw.stepper {
        let span = st.span();
        let s = st.into_inner();
        let mut c = StepperConfig::default();
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = s.$f { c.$f = v; })* };
        }
        take!(scheme, dt0, adaptive, dt_min, amplitude_threshold, conservation_tol, dealias, monitor_stride);
        c.validate().map_err(|e| anchor.err(&span, e.to_string()))?;
        cfg.stepper = c;
    }
    if let Some(init) = raw.initial {
        let span = init.span();
        cfg.initial = Some(initial_from_raw(init.into_inner(), &anchor, span)?);
    }
    if let Some(exp) = raw.experiment {
        let span = exp.span();
        if cfg.initial.is_some() {
            return Err(ConfigError::ConflictingInitialData(format!(
                "line {}: [experiment] defines its own initial data; remove [initial]",
                anchor.line(&span)
            )));
        }
        let sel = selection_from_table(exp.into_inner()).map_err(|m| anchor.err(&span, m))?;
        sel.spec().map_err(|e| anchor.err(&span, e.to_string()))?;
        cfg.experiment = Some(sel);
    }
    if cfg.initial.is_none() && cfg.experiment.is_none() {
        return Err(ConfigError::Invalid(
            "config needs an [initial] or an [experiment] section".into(),
        ));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        ConfigError::AtLine { line, message } => ConfigError::AtLine {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })?;
    // samples files are relative to the config file
    if let Some(InitialData::SamplesFile(p)) = &mut cfg.initial {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

fn check_points(n: usize) -> Result<(), String> {
    if n < crate::grid::MIN_POINTS || !n.is_power_of_two() {
        return Err(format!(
            "num_points must be a power of two of at least {}, got {n}",
            crate::grid::MIN_POINTS
        ));
    }
    Ok(())
}

fn parse_half_length(v: &toml::Value) -> Result<Option<f64>, String> {
    let l = match v {
        toml::Value::String(s) if s == "auto" => return Ok(None),
        toml::Value::Float(f) => *f,
        toml::Value::Integer(i) => *i as f64,
        other => return Err(format!("half_length must be \"auto\" or a number, got {other}")),
    };
    if !(l.is_finite() && l > 0.0) {
        return Err(format!("half_length must be positive, got {l}"));
    }
    Ok(Some(l))
}

fn initial_from_raw(
    raw: RawInitial,
    anchor: &Anchor,
    span: Range<usize>,
) -> Result<InitialData, ConfigError> {
    match (raw.kind, raw.samples_file) {
        (Some(_), Some(file)) => Err(ConfigError::ConflictingInitialData(format!(
            "line {}: both a catalog kind and samples_file are given",
            anchor.line(&file.span())
        ))),
        (None, Some(file)) => {
            if raw.omega.or(raw.alpha).or(raw.beta).or(raw.delta).is_some() {
                return Err(ConfigError::ConflictingInitialData(format!(
                    "line {}: catalog parameters given alongside samples_file",
                    anchor.line(&span)
                )));
            }
            Ok(InitialData::SamplesFile(PathBuf::from(file.into_inner())))
        }
        (None, None) => Err(anchor.err(&span, "[initial] needs kind or samples_file")),
        (Some(kind), None) => {
            let kind_span = kind.span();
            let params = CatalogParams {
                omega: raw.omega,
                alpha: raw.alpha,
                beta: raw.beta,
                delta: raw.delta,
            };
            params
                .build(kind.get_ref())
                .map(InitialData::Catalog)
                .map_err(|m| anchor.err(&kind_span, m))
        }
    }
}

/// Parameters of a catalog datum before its kind is known.
#[derive(Clone, Copy, Debug, Default)]
pub struct CatalogParams {
    pub omega: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
}

impl CatalogParams {
    pub fn of(sol: &ExactSolution) -> Self {
        match *sol {
            ExactSolution::Zero => Self::default(),
            ExactSolution::Soliton { omega } => Self {
                omega: Some(omega),
                ..Self::default()
            },
            ExactSolution::TwoParam { alpha, beta } => Self {
                alpha: Some(alpha),
                beta: Some(beta),
                ..Self::default()
            },
            ExactSolution::OneParam { alpha } => Self {
                alpha: Some(alpha),
                ..Self::default()
            },
            ExactSolution::PerturbedSoliton { omega, delta } => Self {
                omega: Some(omega),
                delta: Some(delta),
                ..Self::default()
            },
        }
    }

    /// Builds the datum of `kind`. Missing parameters and parameters the
    /// kind does not take are errors.
    pub fn build(&self, kind: &str) -> Result<ExactSolution, String> {
        let allowed: &[&str] = match kind {
            "zero" => &[],
            "soliton" => &["omega"],
            "one_param" => &["alpha"],
            "two_param" => &["alpha", "beta"],
            "perturbed_soliton" => &["omega", "delta"],
            other => {
                return Err(format!(
                    "unknown initial kind {other:?}; expected zero, soliton, one_param, two_param or perturbed_soliton"
                ))
            }
        };
        let given = [
            ("omega", self.omega),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("delta", self.delta),
        ];
        for (name, value) in given {
            if value.is_some() && !allowed.contains(&name) {
                return Err(format!("parameter {name} does not apply to kind {kind}"));
            }
        }
        let need = |name: &str, v: Option<f64>| v.ok_or(format!("kind {kind} needs parameter {name}"));
        let sol = match kind {
            "zero" => ExactSolution::Zero,
            "soliton" => ExactSolution::Soliton {
                omega: need("omega", self.omega)?,
            },
            "one_param" => ExactSolution::OneParam {
                alpha: need("alpha", self.alpha)?,
            },
            "two_param" => ExactSolution::TwoParam {
                alpha: need("alpha", self.alpha)?,
                beta: need("beta", self.beta)?,
            },
            _ => ExactSolution::PerturbedSoliton {
                omega: need("omega", self.omega)?,
                delta: need("delta", self.delta)?,
            },
        };
        sol.validate().map_err(|e| e.to_string())?;
        Ok(sol)
    }
}

fn value_to_param(v: &toml::Value) -> Result<String, String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => Ok(items
            .iter()
            .map(value_to_param)
            .collect::<Result<Vec<_>, _>>()?
            .join(",")),
        other => Err(format!("unsupported experiment parameter value {other}")),
    }
}

fn selection_from_table(mut table: toml::Table) -> Result<ExperimentSelection, String> {
    let name = match table.remove("name") {
        Some(toml::Value::String(s)) => s,
        Some(other) => return Err(format!("experiment name must be a string, got {other}")),
        None => return Err("[experiment] needs a name".into()),
    };
    let mut params = Params::new();
    for (k, v) in &table {
        params.insert(k.clone(), value_to_param(v)?);
    }
    Ok(ExperimentSelection { name, params })
}

/// Keys of the `[grid]` section.
pub const GRID_KEYS: [&str; 2] = ["num_points", "half_length"];

/// Keys of the `[stepper]` section.
pub const STEPPER_KEYS: [&str; 8] = [
    "scheme",
    "dt0",
    "adaptive",
    "dt_min",
    "amplitude_threshold",
    "conservation_tol",
    "dealias",
    "monitor_stride",
];

impl RunConfig {
    /// Applies a `key=value` override. Dotted keys (`stepper.dt0`,
    /// `grid.num_points`, `initial.alpha`, `experiment.alpha`) name their
    /// section. Bare keys are looked up in the stepper and the grid, then in
    /// the experiment parameters when an experiment is selected, and
    /// otherwise in the top level and the initial-data parameters.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |m: String| ConfigError::Invalid(format!("override {key}={value}: {m}"));
        let (section, field) = match key.split_once('.') {
            Some((s, f)) => (s, f),
            None => (self.section_of(key), key),
        };
        let num = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| bad("expected a number".into()))
        };
        match (section, field) {
            ("", "equation") => {
                self.equation = match value {
                    "focusing" => Sign::Focusing,
                    "defocusing" => Sign::Defocusing,
                    _ => return Err(bad("expected focusing or defocusing".into())),
                }
            }
            ("", "t_end") => {
                let t = num()?;
                if !(t.is_finite() && t > 0.0) {
                    return Err(bad("t_end must be positive".into()));
                }
                self.t_end = Some(t);
            }
            ("", "output_dir") => self.output_dir = Some(PathBuf::from(value)),
            ("grid", "num_points") => {
                let n = value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad("expected a positive integer".into()))?;
                check_points(n).map_err(bad)?;
                self.grid.num_points = Some(n);
            }
            ("grid", "half_length") => {
                let v = match value.trim() {
                    "auto" => toml::Value::String("auto".into()),
                    _ => toml::Value::Float(num()?),
                };
                self.grid.half_length = parse_half_length(&v).map_err(bad)?;
            }
            ("stepper", f) if STEPPER_KEYS.contains(&f) => {
                let mut c = self.stepper;
                let boolean = || {
                    value
                        .trim()
                        .parse::<bool>()
                        .map_err(|_| bad("expected true or false".into()))
                };
                match f {
                    "scheme" => {
                        c.scheme = match value.trim() {
                            "strang_pair_rk4" => Scheme::StrangPairRk4,
                            "if_rk4" => Scheme::IfRk4,
                            _ => return Err(bad("expected strang_pair_rk4 or if_rk4".into())),
                        }
                    }
                    "dt0" => c.dt0 = num()?,
                    "adaptive" => c.adaptive = boolean()?,
                    "dt_min" => c.dt_min = num()?,
                    "amplitude_threshold" => c.amplitude_threshold = num()?,
                    "conservation_tol" => c.conservation_tol = num()?,
                    "dealias" => c.dealias = boolean()?,
                    _ => {
                        c.monitor_stride = value
                            .trim()
                            .parse()
                            .map_err(|_| bad("expected a positive integer".into()))?
                    }
                }
                c.validate().map_err(|e| bad(e.to_string()))?;
                self.stepper = c;
            }
            ("experiment", f) => {
                let mut sel = self
                    .experiment
                    .clone()
                    .ok_or_else(|| bad("no experiment selected".into()))?;
                if f == "name" {
                    sel.name = value.to_owned();
                } else {
                    sel.params.insert(f.to_owned(), value.to_owned());
                }
                sel.spec().map_err(|e| bad(e.to_string()))?;
                self.experiment = Some(sel);
            }
            ("initial", "samples_file") => {
                self.initial = Some(InitialData::SamplesFile(PathBuf::from(value)));
            }
            ("initial", f) => {
                let sol = match &self.initial {
                    Some(InitialData::Catalog(sol)) => *sol,
                    _ => return Err(bad("no catalog initial data to modify".into())),
                };
                let mut params = CatalogParams::of(&sol);
                let kind = if f == "kind" {
                    value.to_owned()
                } else {
                    let v = Some(num()?);
                    match f {
                        "omega" => params.omega = v,
                        "alpha" => params.alpha = v,
                        "beta" => params.beta = v,
                        "delta" => params.delta = v,
                        _ => return Err(bad("unknown initial-data parameter".into())),
                    }
                    sol.kind().to_owned()
                };
                if f == "kind" {
                    params = CatalogParams::default();
                }
                self.initial = Some(InitialData::Catalog(params.build(&kind).map_err(bad)?));
            }
            _ => return Err(bad("unknown key".into())),
        }
        Ok(())
    }

    fn section_of(&self, key: &str) -> &'static str {
        if key == "output_dir" {
            ""
        } else if STEPPER_KEYS.contains(&key) {
            "stepper"
        } else if GRID_KEYS.contains(&key) {
            "grid"
        } else if self.experiment.is_some() {
            "experiment"
        } else if matches!(key, "equation" | "t_end") {
            ""
        } else {
            "initial"
        }
    }

    /// Output directory: the config value, else `$NLNLS_OUTPUT_DIR`, else
    /// `nlnls-out` in the working directory.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(default_output_dir)
    }

    /// Samples the initial datum on its resolved grid.
    pub fn initial_field(&self) -> Result<SpectralField, ConfigError> {
        match &self.initial {
            None => Err(ConfigError::Invalid("no initial data configured".into())),
            Some(InitialData::Catalog(sol)) => {
                let n = self.grid.num_points.unwrap_or(DEFAULT_POINTS);
                let l = self
                    .grid
                    .half_length
                    .unwrap_or_else(|| crate::experiments::auto_half_length(sol.decay_rate()));
                let grid = Grid::new(n, l).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                sol.sample(0.0, &grid)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            Some(InitialData::SamplesFile(path)) => {
                let f = read_field(path).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if let Some(n) = self.grid.num_points {
                    if n != f.grid().num_points() {
                        return Err(ConfigError::ConflictingInitialData(format!(
                            "num_points = {n} but {} holds {} samples",
                            path.display(),
                            f.grid().num_points()
                        )));
                    }
                }
                if let Some(l) = self.grid.half_length {
                    if (l - f.grid().half_length()).abs() > 1e-12 * l {
                        return Err(ConfigError::ConflictingInitialData(format!(
                            "half_length = {l} but {} spans [-{}, {})",
                            path.display(),
                            f.grid().half_length(),
                            f.grid().half_length()
                        )));
                    }
                }
                Ok(f)
            }
        }
    }
}

pub fn default_output_dir() -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "equation = \"focusing\"\nt_end = 1\n\n[initial]\nkind = \"soliton\"\nomega = 1.0\n\n[grid]\nhalf_length = \"auto\"\n";

    fn line_of(e: ConfigError) -> usize {
        match e {
            ConfigError::AtLine { line, .. } => line,
            other => panic!("expected a line-anchored error, got {other}"),
        }
    }

    #[test]
    fn minimal_soliton_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.equation, Sign::Focusing);
        assert_eq!(cfg.t_end, Some(1.0));
        assert_eq!(
            cfg.initial,
            Some(InitialData::Catalog(ExactSolution::Soliton { omega: 1.0 }))
        );
        assert_eq!(cfg.grid, Discretization::default());
        assert_eq!(cfg.stepper, StepperConfig::default());
        let f = cfg.initial_field().unwrap();
        assert_eq!(f.grid().half_length(), 40.0);
        assert_eq!(f.grid().num_points(), DEFAULT_POINTS);
    }

    #[test]
    fn conflicting_initial_data() {
        let text = "t_end = 1\n[initial]\nkind = \"soliton\"\nomega = 1.0\nsamples_file = \"u.csv\"\n";
        let e = parse_config(text).unwrap_err();
        assert!(matches!(e, ConfigError::ConflictingInitialData(_)));
        assert!(e.to_string().starts_with("conflicting initial data"));
        assert!(e.to_string().contains("line 5"));
    }

    #[test]
    fn non_power_of_two_is_rejected_at_its_line() {
        let text = "t_end = 1\n[initial]\nkind = \"zero\"\n[grid]\nnum_points = 1000\n";
        let e = parse_config(text).unwrap_err();
        assert!(e.to_string().contains("power of two"), "{e}");
        assert_eq!(line_of(e), 5);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = parse_config("t_end = 1\nbogus = 2\n[initial]\nkind = \"zero\"\n").unwrap_err();
        assert_eq!(line_of(e), 2);
        let e = parse_config("[initial]\nkind = \"zero\"\n[stepper]\ndt = 0.1\n").unwrap_err();
        assert_eq!(line_of(e), 4);
        let e = parse_config("[initial]\nkind = \"soliton\"\nomega = 1\nalpha = 2\n").unwrap_err();
        assert!(e.to_string().contains("alpha does not apply"), "{e}");
    }

    #[test]
    fn malformed_document() {
        let e = parse_config("t_end = = 1\n").unwrap_err();
        assert_eq!(line_of(e), 1);
        assert!(parse_config("t_end = 1\n").is_err());
        let e = parse_config("equation = \"sideways\"\n[initial]\nkind=\"zero\"\n").unwrap_err();
        assert_eq!(line_of(e), 1);
    }

    #[test]
    fn stepper_and_experiment_sections() {
        let text = "[stepper]\nscheme = \"if_rk4\"\ndt0 = 5e-4\nadaptive = false\n\n[experiment]\nname = \"norm_scaling\"\nalphas = [0.2, 0.4, 0.6, 0.8]\nks = [0, 1]\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.stepper.scheme, Scheme::IfRk4);
        assert_eq!(cfg.stepper.dt0, 5e-4);
        assert!(!cfg.stepper.adaptive);
        let spec = cfg.experiment.unwrap().spec().unwrap();
        assert_eq!(
            spec,
            ExperimentSpec::NormScaling {
                alphas: vec![0.2, 0.4, 0.6, 0.8],
                ks: vec![0, 1]
            }
        );

        let e = parse_config("[stepper]\ndt0 = -1\n[initial]\nkind=\"zero\"\n").unwrap_err();
        assert_eq!(line_of(e), 1);
        let e = parse_config("[experiment]\nname = \"nope\"\n").unwrap_err();
        assert!(e.to_string().contains("unknown experiment"), "{e}");
        let e = parse_config("[initial]\nkind=\"zero\"\n[experiment]\nname=\"norm_scaling\"\n")
            .unwrap_err();
        assert!(matches!(e, ConfigError::ConflictingInitialData(_)));
    }

    #[test]
    fn overrides() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.apply_override("stepper.dt0", "0.002").unwrap();
        cfg.apply_override("num_points", "512").unwrap();
        cfg.apply_override("omega", "4").unwrap();
        cfg.apply_override("equation", "defocusing").unwrap();
        assert_eq!(cfg.stepper.dt0, 0.002);
        assert_eq!(cfg.grid.num_points, Some(512));
        assert_eq!(
            cfg.initial,
            Some(InitialData::Catalog(ExactSolution::Soliton { omega: 4.0 }))
        );
        assert_eq!(cfg.equation, Sign::Defocusing);
        assert_eq!(cfg.initial_field().unwrap().grid().half_length(), 20.0);

        assert!(cfg.apply_override("grid.num_points", "1000").is_err());
        assert!(cfg.apply_override("alpha", "1").is_err());
        assert!(cfg.apply_override("stepper.dt0", "-1").is_err());
        assert!(cfg.apply_override("nonsense.key", "1").is_err());
        assert_eq!(cfg.stepper.dt0, 0.002);

        cfg.apply_override("initial.kind", "zero").unwrap();
        assert_eq!(cfg.initial, Some(InitialData::Catalog(ExactSolution::Zero)));
    }

    #[test]
    fn experiment_overrides() {
        let mut cfg = parse_config("[experiment]\nname = \"small_data_blowup\"\nalpha = 0.5\n").unwrap();
        cfg.apply_override("alpha", "0.75").unwrap();
        assert_eq!(
            cfg.experiment.as_ref().unwrap().spec().unwrap(),
            ExperimentSpec::SmallDataBlowup { alpha: 0.75 }
        );
        assert!(cfg.apply_override("beta", "0.1").is_err());
    }
}

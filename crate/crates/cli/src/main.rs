//! `nlnls`: exact solutions, single runs, named experiments, parameter sweeps
//! and the acceptance suite.
//!
//! Exit status is 0 when every run passes or completes, 1 when a run fails
//! its checks, and 2 on usage or configuration errors.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use nlnls::config::{
    load_config, CatalogParams, ExperimentSelection, InitialData, RunConfig, OUTPUT_DIR_ENV,
};
use nlnls::experiments::{simulate, ExperimentOutcome, Verdict, EXPERIMENT_NAMES};
use nlnls::output::{
    exact_csv, parse_range, read_report, read_timeseries, write_atomic, write_field,
    write_outcome, OutputLayout,
};
use nlnls::verification::{run_criterion, CriterionResult, CRITERIA};
use nlnls::{AnalyticError, ConfigError, ExperimentError, IntegratorError};

#[derive(Parser)]
#[command(name = "nlnls", version, about = "Pseudospectral laboratory for the nonlocal NLS")]
#[command(after_help = format!(
    "Output goes to --output-dir, else the config's output_dir, else ${OUTPUT_DIR_ENV}, else ./nlnls-out."
))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a catalog solution as t,x,re,im,abs.
    Exact(ExactArgs),
    /// One run from a config file.
    Simulate(SimulateArgs),
    /// Run a named experiment.
    Experiment(ExperimentArgs),
    /// Cartesian parameter sweep of runs or experiments.
    Sweep(SweepArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ExactArgs {
    /// zero, soliton, one_param, two_param or perturbed_soliton
    #[arg(long)]
    kind: String,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// A time or an inclusive start:stop:step range.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    t: String,
    /// Inclusive start:stop:step range of x, or a single point.
    #[arg(long, allow_hyphen_values = true)]
    x_range: String,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `stepper.dt0=5e-4` or `num_points=2048`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment name; taken from the config's [experiment] section when omitted.
    name: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Parameters as `--key value`: experiment parameters, grid keys
    /// (num_points, half_length) and stepper keys (dt0, scheme, ...).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    params: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base config; either this or --experiment (or both).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    /// A swept key with its values, e.g. `alpha=0.25,0.5,0.75`. Repeat to
    /// sweep the cartesian product.
    #[arg(long = "vary", value_name = "KEY=V1,V2,...", required = true)]
    vary: Vec<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Concurrent jobs; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated criterion numbers (1 to 11); all by default.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Usage(message.into()).into()
}

/// 2 for errors in what was asked for, 1 for failures while doing it.
fn error_status(err: &anyhow::Error) -> u8 {
    let bad_request = err.chain().any(|cause| {
        if cause.is::<Usage>() || cause.is::<ConfigError>() {
            return true;
        }
        match cause.downcast_ref::<ExperimentError>() {
            Some(ExperimentError::Precondition(_) | ExperimentError::Grid(_)) => true,
            Some(ExperimentError::Analytic(e)) => !matches!(e, AnalyticError::PoleProximity { .. }),
            Some(ExperimentError::Integrator(e)) => matches!(
                e,
                IntegratorError::InvalidConfig(_) | IntegratorError::EmptyInterval { .. }
            ),
            None => false,
        }
    });
    if bad_request {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Exact(a) => cmd_exact(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(status) => ExitCode::from(status),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(error_status(&err))
        }
    }
}

fn verdict_status(v: Verdict) -> u8 {
    if v == Verdict::Fail {
        1
    } else {
        0
    }
}

fn cmd_exact(a: ExactArgs) -> anyhow::Result<u8> {
    let params = CatalogParams {
        omega: a.omega,
        alpha: a.alpha,
        beta: a.beta,
        delta: a.delta,
    };
    let sol = params.build(&a.kind).map_err(usage)?;
    let times = parse_range(&a.t).map_err(usage)?;
    let xs = parse_range(&a.x_range).map_err(usage)?;
    let table = exact_csv(&sol, &times, &xs);
    match a.out {
        Some(path) => write_atomic(&path, table.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(table.as_bytes()).and_then(|()| out.flush()) {
                // a reader such as `head` closing early is not an error
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(e).context("writing to standard output")
                }
                _ => {}
            }
        }
    }
    Ok(0)
}

fn split_assignment(text: &str) -> anyhow::Result<(&str, &str)> {
    text.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| usage(format!("expected KEY=VALUE, got {text:?}")))
}

fn apply_sets(cfg: &mut RunConfig, sets: &[String]) -> anyhow::Result<()> {
    for s in sets {
        let (k, v) = split_assignment(s)?;
        cfg.apply_override(k, v)?;
    }
    Ok(())
}

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.unwrap_or_else(|| cfg.resolved_output_dir())
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<u8> {
    let mut cfg = load_config(&a.config)?;
    apply_sets(&mut cfg, &a.set)?;
    let layout = OutputLayout::new(output_dir(a.output_dir, &cfg));
    let done = run_job(&cfg, &layout)?;
    print!("{}", done.describe());
    Ok(verdict_status(done.verdict))
}

/// `--key value` and `--key=value` pairs, with dashes in keys read as
/// underscores.
fn flag_pairs(tokens: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let Some(flag) = tok.strip_prefix("--") else {
            return Err(usage(format!("unexpected argument {tok:?}; parameters are --key value")));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_owned(), v.to_owned()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| usage(format!("--{flag} needs a value")))?;
                (flag.to_owned(), v.clone())
            }
        };
        pairs.push((key.replace('-', "_"), value));
    }
    Ok(pairs)
}

fn cmd_experiment(a: ExperimentArgs) -> anyhow::Result<u8> {
    let mut config = a.config;
    let mut out = a.output_dir;
    let mut sets = a.set;
    let mut params = Vec::new();
    // options given after the experiment name arrive with the parameters
    for (k, v) in flag_pairs(&a.params)? {
        match k.as_str() {
            "config" => config = Some(PathBuf::from(v)),
            "output_dir" => out = Some(PathBuf::from(v)),
            "set" => sets.push(v),
            _ => params.push((k, v)),
        }
    }

    let mut cfg = match &config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    select_experiment(&mut cfg, a.name.as_deref())?;
    for (k, v) in &params {
        cfg.apply_override(k, v)?;
    }
    apply_sets(&mut cfg, &sets)?;

    let layout = OutputLayout::new(output_dir(out, &cfg));
    let done = run_job(&cfg, &layout)?;
    print!("{}", done.describe());
    Ok(verdict_status(done.verdict))
}

fn select_experiment(cfg: &mut RunConfig, name: Option<&str>) -> anyhow::Result<()> {
    match (name, &cfg.experiment) {
        (Some(n), Some(sel)) if sel.name != n => Err(usage(format!(
            "experiment {n:?} conflicts with {:?} in the config",
            sel.name
        ))),
        (Some(_), Some(_)) => Ok(()),
        (Some(n), None) => {
            if cfg.initial.is_some() {
                return Err(usage("the config selects initial data, not an experiment"));
            }
            let sel = ExperimentSelection {
                name: n.to_owned(),
                params: Default::default(),
            };
            sel.spec()?;
            cfg.experiment = Some(sel);
            Ok(())
        }
        (None, Some(_)) => Ok(()),
        (None, None) => Err(usage(format!(
            "name an experiment: {}",
            EXPERIMENT_NAMES.join(", ")
        ))),
    }
}

struct Finished {
    name: String,
    verdict: Verdict,
    report: PathBuf,
    failed: Vec<String>,
}

impl Finished {
    fn of(outcome: &ExperimentOutcome, report: PathBuf) -> Self {
        Self {
            name: outcome.report.name.clone(),
            verdict: outcome.report.verdict,
            report,
            failed: outcome
                .report
                .failed_checks()
                .map(|c| format!("{} = {:e} (bound {:e})", c.name, c.value, c.bound))
                .collect(),
        }
    }

    fn describe(&self) -> String {
        let mut s = format!(
            "{}: {} -> {}\n",
            self.name,
            self.verdict.name(),
            self.report.display()
        );
        for f in &self.failed {
            s.push_str(&format!("    failed: {f}\n"));
        }
        s
    }
}

/// Runs the configured experiment, or a single simulation when none is
/// selected, and writes its outputs under `layout`.
fn run_job(cfg: &RunConfig, layout: &OutputLayout) -> anyhow::Result<Finished> {
    let mut outcome = match &cfg.experiment {
        Some(sel) => sel.spec()?.run(&cfg.stepper, &cfg.grid)?,
        None => {
            let t_end = cfg
                .t_end
                .ok_or_else(|| usage("t_end is required for a simulation"))?;
            let u0 = cfg.initial_field()?;
            let catalog = match &cfg.initial {
                Some(InitialData::Catalog(sol)) => Some(*sol),
                _ => None,
            };
            let (mut outcome, field) =
                simulate(&u0, catalog.as_ref(), t_end, &cfg.stepper, cfg.equation)?;
            let path = layout.dir.join("simulate.final.csv");
            write_field(&field, &path)?;
            outcome.report.artifacts.push(path.display().to_string());
            outcome
        }
    };
    let report = write_outcome(&mut outcome, layout)?;
    Ok(Finished::of(&outcome, report))
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<u8> {
    let mut base = match &a.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if a.experiment.is_some() || base.initial.is_none() {
        select_experiment(&mut base, a.experiment.as_deref())?;
    }
    apply_sets(&mut base, &a.set)?;

    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for v in &a.vary {
        let (k, values) = split_assignment(v)?;
        let values: Vec<String> = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        if values.is_empty() {
            return Err(usage(format!("--vary {v:?} lists no values")));
        }
        axes.push((k.to_owned(), values));
    }

    let mut combos: Vec<Vec<&str>> = vec![Vec::new()];
    for (_, values) in &axes {
        combos = combos
            .iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push(v.as_str());
                    next
                })
            })
            .collect();
    }

    let root = output_dir(a.output_dir, &base);
    // every job is configured before any runs, so bad values fail fast
    let mut jobs = Vec::with_capacity(combos.len());
    for (i, combo) in combos.iter().enumerate() {
        let mut cfg = base.clone();
        for ((key, _), value) in axes.iter().zip(combo) {
            cfg.apply_override(key, value)?;
        }
        jobs.push((cfg, OutputLayout::new(root.join(format!("job_{i:03}")))));
    }

    let run_all = || -> Vec<anyhow::Result<Finished>> {
        jobs.par_iter()
            .map(|(cfg, layout)| run_job(cfg, layout))
            .collect()
    };
    let results = match a.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the job pool")?
            .install(run_all),
        None => run_all(),
    };

    let mut summary = String::from("job");
    for (k, _) in &axes {
        summary.push(',');
        summary.push_str(k);
    }
    summary.push_str(",verdict,report\n");
    let mut status = 0;
    for (i, (combo, result)) in combos.iter().zip(&results).enumerate() {
        let (verdict, report) = match result {
            Ok(done) => {
                print!("job_{i:03} [{}] {}", combo.join(","), done.describe());
                status = status.max(verdict_status(done.verdict));
                (done.verdict.name(), done.report.display().to_string())
            }
            Err(err) => {
                eprintln!("job_{i:03} [{}] error: {err:#}", combo.join(","));
                status = status.max(error_status(err));
                ("error", String::new())
            }
        };
        summary.push_str(&format!("job_{i:03},{},{verdict},{report}\n", combo.join(",")));
    }
    let path = root.join("sweep.csv");
    write_atomic(&path, summary.as_bytes())?;
    println!("summary -> {}", path.display());
    Ok(status)
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<u8> {
    let ids: Vec<u8> = if a.only.is_empty() {
        CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        a.only.clone()
    };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|(c, _)| c == *id)) {
        return Err(usage(format!("no criterion {bad}; criteria are 1 to {}", CRITERIA.len())));
    }
    let root = a.output_dir.unwrap_or_else(nlnls::config::default_output_dir);

    let results: Vec<anyhow::Result<CriterionResult>> = ids
        .par_iter()
        .map(|&id| {
            let mut result = run_criterion(id)?;
            emit_and_validate(&mut result, &root.join(format!("criterion_{id:02}")))?;
            Ok(result)
        })
        .collect();

    let mut passed = 0;
    let mut status = 0;
    for result in &results {
        match result {
            Ok(r) => {
                println!("{}", r.summary_line());
                for d in &r.details {
                    println!("    {d}");
                }
                if r.passed {
                    passed += 1;
                } else {
                    status = 1;
                }
            }
            Err(err) => {
                eprintln!("error: {err:#}");
                status = 1;
            }
        }
    }
    println!("{passed}/{} criteria passed", ids.len());
    Ok(status)
}

/// Writes each outcome of a criterion and reads it back; a document that
/// does not survive the round trip fails the criterion.
fn emit_and_validate(result: &mut CriterionResult, dir: &Path) -> anyhow::Result<()> {
    let mut problems = Vec::new();
    for (i, outcome) in result.outcomes.iter_mut().enumerate() {
        let layout = OutputLayout::new(dir.join(i.to_string()));
        let path = write_outcome(outcome, &layout)?;
        match read_report(&path) {
            Ok(back) if back == outcome.report => {}
            Ok(_) => problems.push(format!("{}: report changed on re-reading", path.display())),
            Err(e) => problems.push(e.to_string()),
        }
        for artifact in &outcome.report.artifacts {
            if let Err(e) = read_timeseries(Path::new(artifact)) {
                problems.push(e.to_string());
            }
        }
    }
    for p in problems {
        result.passed = false;
        result.details.push(format!("FAIL: schema: {p}"));
    }
    Ok(())
}

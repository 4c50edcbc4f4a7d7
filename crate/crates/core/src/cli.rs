//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::copulas::Family;
use crate::dataset::{load_csv, ObservationSet};
use crate::diagnose::{check_applicability, render_applicability};
use crate::error::{Error, Result};
use crate::estimate::{fit_pipeline, EstimateReport, Estimator, TrimPolicy};
use crate::marginals::{ErrorLaw, MarginalSpec, Transformation};
use crate::montecarlo::{
    render_table, run_scenario, CovariateLaw, Margins, McEstimator, MetricRow, Scenario,
    TableFormat,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rescop",
    version,
    about = "Copula estimation from regression residuals"
)]
pub struct Cli {
    /// Seed for all randomness; drawn from system entropy and printed when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulation.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a copula to the residuals of per-margin regressions.
    Fit(FitArgs),
    /// Run a Monte Carlo scenario and print bias/SD/RMSE on the tau scale (x100).
    Simulate(SimulateArgs),
    /// Report which equivalence guarantee covers a family and error laws.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with columns y1..yd and x1..xq.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long)]
    pub family: String,
    /// ik (tau inversion), pl (pseudo-likelihood) or pl_star (trimmed).
    #[arg(long, default_value = "pl")]
    pub estimator: String,
    #[arg(long = "trim-D", default_value_t = 0.25)]
    pub trim_d: f64,
    #[arg(long = "trim-lambda", default_value_t = 1.9)]
    pub trim_lambda: f64,
    /// identity or log, one per margin (comma separated) or a single value for all.
    #[arg(long, default_value = "identity")]
    pub transform: String,
    /// Break ties in the responses with uniform noise of relative size 1e-12 (seeded).
    #[arg(long)]
    pub jitter: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file; when given, the inline flags below are ignored.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// NE, NU, tt, NNE or NNU.
    #[arg(long)]
    pub margins: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma separated subset of ik_oracle, ik, pl_oracle, pl, pl_star.
    #[arg(long)]
    pub estimators: Option<String>,
    /// normal or poisson.
    #[arg(long)]
    pub covariate: Option<String>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub family: String,
    /// Comma separated error laws, e.g. normal,exponential or student_t(5),t.
    #[arg(long)]
    pub margins: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli, stderr) {
        Ok(text) => match emit(&cli, &text, stdout) {
            Ok(()) => EXIT_OK,
            Err(e) => report(&e, stderr),
        },
        Err(e) => report(&e, stderr),
    }
}

fn report(e: &Error, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn emit(cli: &Cli, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn dispatch(cli: &Cli, stderr: &mut dyn Write) -> Result<String> {
    match &cli.command {
        Command::Fit(a) => {
            let seed = a.jitter.then(|| resolve_seed(cli.seed, stderr));
            cmd_fit(a, cli.format.unwrap_or(OutputFormat::Json), seed)
        }
        Command::Simulate(a) => cmd_simulate(a, cli, stderr),
        Command::Diagnose(a) => cmd_diagnose(a, cli.format),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn parse_transforms(spec: &str, d: usize) -> Result<Vec<Transformation>> {
    let parts: Vec<Transformation> = spec.split(',').map(str::parse).collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; d]),
        k if k == d => Ok(parts),
        k => Err(Error::ShapeMismatch(format!(
            "--transform has {k} entries for {d} margins"
        ))),
    }
}

fn resolve_seed(seed: Option<u64>, stderr: &mut dyn Write) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        let _ = writeln!(stderr, "seed: {s}");
        s
    })
}

/// Adds `U(-1, 1) * 1e-12 * max(1, |y|)` to every response.
pub fn jitter_responses(data: &ObservationSet, seed: u64) -> Result<ObservationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = data.y().clone();
    for i in 0..y.nrows() {
        for v in y.row_mut(i) {
            *v += rng.random_range(-1.0..1.0) * 1e-12 * v.abs().max(1.0);
        }
    }
    ObservationSet::new(y, data.x().clone())
}

/// `jitter_seed` enables tie-breaking noise on the responses.
pub fn cmd_fit(a: &FitArgs, format: OutputFormat, jitter_seed: Option<u64>) -> Result<String> {
    let family: Family = a.family.parse()?;
    let estimator: Estimator = a.estimator.parse()?;
    let policy = TrimPolicy::new(a.trim_d, a.trim_lambda)?;
    let mut data = load_csv(&a.data, a.d, a.q)?;
    if let Some(seed) = jitter_seed {
        data = jitter_responses(&data, seed)?;
    }
    let specs: Vec<MarginalSpec> = parse_transforms(&a.transform, a.d)?
        .into_iter()
        .enumerate()
        .map(|(j, t)| MarginalSpec::location_only(j).with_transformation(t))
        .collect();
    let fit = fit_pipeline(&data, &specs, family, estimator, Some(&policy))?;
    Ok(render_report(&fit.report, format))
}

const REPORT_KEYS: [&str; 9] = [
    "estimator",
    "alpha_hat",
    "tau_hat",
    "std_error_alpha",
    "std_error_tau",
    "iterations",
    "converged",
    "n_used",
    "score_at_root",
];

fn report_values(r: &EstimateReport) -> [String; 9] {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    [
        r.estimator.name().to_string(),
        r.alpha_hat.to_string(),
        r.tau_hat.to_string(),
        opt(r.std_error_alpha),
        opt(r.std_error_tau),
        r.iterations.to_string(),
        r.converged.to_string(),
        r.n_used.to_string(),
        r.score_at_root.to_string(),
    ]
}

pub fn render_report(r: &EstimateReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => to_json(r),
        OutputFormat::Csv => format!(
            "{}\n{}\n",
            REPORT_KEYS.join(","),
            report_values(r).join(",")
        ),
        OutputFormat::Markdown => {
            let mut s = String::from("| field | value |\n|---|---|\n");
            for (k, v) in REPORT_KEYS.iter().zip(report_values(r)) {
                s.push_str(&format!("| {k} | {v} |\n"));
            }
            s
        }
    }
}

fn inline_scenario(a: &SimulateArgs) -> Result<Scenario> {
    let missing = |f: &str| Error::InvalidScenario(format!("{f}: required without --scenario"));
    let family: Family = a
        .family
        .as_deref()
        .ok_or_else(|| missing("--family"))?
        .parse()?;
    let tau = a.tau.ok_or_else(|| missing("--tau"))?;
    let margins: Margins = a
        .margins
        .as_deref()
        .ok_or_else(|| missing("--margins"))?
        .parse()?;
    let n = a.n.ok_or_else(|| missing("--n"))?;
    let reps = a.reps.ok_or_else(|| missing("--reps"))?;
    let mut s = Scenario::new(family, tau, margins, n, reps);
    if let Some(list) = &a.estimators {
        s.estimators = list
            .split(',')
            .map(str::parse::<McEstimator>)
            .collect::<Result<_>>()?;
    }
    if let Some(c) = &a.covariate {
        s.covariate_law = match c.trim() {
            "normal" | "normal(0,1)" => CovariateLaw::Normal,
            "poisson" | "poisson(5)" => CovariateLaw::Poisson,
            other => {
                return Err(Error::InvalidScenario(format!(
                    "covariate_law: unknown law `{other}`"
                )))
            }
        };
    }
    Ok(s)
}

fn cmd_simulate(a: &SimulateArgs, cli: &Cli, stderr: &mut dyn Write) -> Result<String> {
    let (mut scenario, file_seed) = match &a.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let has_seed = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v.get("seed").cloned())
                .is_some();
            let s = Scenario::from_json(&text)?;
            let seed = has_seed.then_some(s.seed);
            (s, seed)
        }
        None => (inline_scenario(a)?, None),
    };
    scenario.seed = resolve_seed(cli.seed.or(file_seed), stderr);
    scenario.validate()?;
    let rows = match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build()
            .map_err(|e| Error::InvalidScenario(format!("threads: {e}")))?
            .install(|| run_scenario(&scenario))?,
        None => run_scenario(&scenario)?,
    };
    render_rows(&rows, cli.format.unwrap_or(OutputFormat::Markdown))
}

pub fn render_rows(rows: &[MetricRow], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => render_table(rows, TableFormat::Csv),
        OutputFormat::Markdown => render_table(rows, TableFormat::Markdown),
        OutputFormat::Json => {
            if rows.is_empty() {
                return Err(Error::EmptyInput);
            }
            Ok(to_json(&rows))
        }
    }
}

fn cmd_diagnose(a: &DiagnoseArgs, format: Option<OutputFormat>) -> Result<String> {
    let family: Family = a.family.parse()?;
    let laws: Vec<ErrorLaw> = split_laws(&a.margins)
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let app = check_applicability(family, &laws)?;
    Ok(match format {
        Some(OutputFormat::Json) => to_json(&app),
        _ => render_applicability(&app),
    })
}

/// Splits on commas outside parentheses, so `uniform(-2,3),normal` has two items.
fn split_laws(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            ',' if depth == 0 => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn split_respects_parentheses() {
        assert_eq!(
            split_laws("uniform(-2,3),normal"),
            vec!["uniform(-2,3)", "normal"]
        );
    }

    #[test]
    fn missing_data_is_usage_error() {
        let (code, _, err) = run_str(&[
            "rescop", "fit", "--d", "2", "--q", "1", "--family", "clayton",
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--data"));
    }

    #[test]
    fn diagnose_verdicts() {
        let (code, out, _) = run_str(&[
            "rescop",
            "diagnose",
            "--family",
            "frank",
            "--margins",
            "normal,exponential",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("theorem2"));
        let (code, _, err) = run_str(&[
            "rescop",
            "diagnose",
            "--family",
            "nosuch",
            "--margins",
            "normal",
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("nosuch"));
    }

    #[test]
    fn zero_threads_rejected() {
        let (code, _, _) = run_str(&[
            "rescop",
            "--threads",
            "0",
            "diagnose",
            "--family",
            "frank",
            "--margins",
            "normal",
        ]);
        assert_eq!(code, EXIT_USAGE);
    }
}

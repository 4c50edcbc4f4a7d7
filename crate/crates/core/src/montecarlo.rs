//! Replicated simulation of the two-step estimators under a location model
//! `Y_j = theta_j0 + theta_j1 X + eps_j`, with errors coupled by a copula.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r`: the copula sample first, then the covariate. The oracle
//! estimators rank the copula sample directly, which has the same ranks as the
//! true errors, so their output does not depend on the margins.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::{Copula, Family};
use crate::dataset::ObservationSet;
use crate::error::{Error, Result};
use crate::estimate::{estimate, fit_margins, Estimator, TrimPolicy};
use crate::marginals::{ErrorLaw, MarginalSpec};
use crate::matrix::RowMatrix;
use crate::ranks::{pseudo_observations, PseudoSample};

/// Minimum share of replications an estimator must converge in.
pub const MIN_CONVERGED_SHARE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Margins {
    /// normal + exponential(1)
    #[serde(rename = "NE")]
    NE,
    /// normal + uniform(-1, 1)
    #[serde(rename = "NU")]
    NU,
    /// two Student t5
    #[serde(rename = "tt")]
    TT,
    #[serde(rename = "NNE")]
    NNE,
    #[serde(rename = "NNU")]
    NNU,
}

impl Margins {
    pub fn laws(self) -> Vec<ErrorLaw> {
        let n = ErrorLaw::STANDARD_NORMAL;
        match self {
            Margins::NE => vec![n, ErrorLaw::UNIT_EXPONENTIAL],
            Margins::NU => vec![n, ErrorLaw::SYMMETRIC_UNIFORM],
            Margins::TT => vec![ErrorLaw::STUDENT_T5, ErrorLaw::STUDENT_T5],
            Margins::NNE => vec![n, n, ErrorLaw::UNIT_EXPONENTIAL],
            Margins::NNU => vec![n, n, ErrorLaw::SYMMETRIC_UNIFORM],
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Margins::NE | Margins::NU | Margins::TT => 2,
            Margins::NNE | Margins::NNU => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Margins::NE => "NE",
            Margins::NU => "NU",
            Margins::TT => "tt",
            Margins::NNE => "NNE",
            Margins::NNU => "NNU",
        }
    }
}

impl FromStr for Margins {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NE" | "ne" | "N+E" => Ok(Margins::NE),
            "NU" | "nu" | "N+U" => Ok(Margins::NU),
            "tt" | "TT" | "t" => Ok(Margins::TT),
            "NNE" | "nne" => Ok(Margins::NNE),
            "NNU" | "nnu" => Ok(Margins::NNU),
            other => Err(Error::UnknownMargin(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CovariateLaw {
    #[default]
    #[serde(rename = "normal", alias = "normal(0,1)")]
    Normal,
    #[serde(rename = "poisson", alias = "poisson(5)")]
    Poisson,
}

impl CovariateLaw {
    fn draw(self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        match self {
            CovariateLaw::Normal => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
            CovariateLaw::Poisson => {
                let p = Poisson::new(5.0).expect("positive rate");
                (0..n).map(|_| p.sample(rng)).collect()
            }
        }
    }
}

/// Estimator labels used in simulation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McEstimator {
    IkOracle,
    Ik,
    PlOracle,
    Pl,
    PlStar,
}

impl McEstimator {
    pub const ALL: [McEstimator; 5] = [
        McEstimator::IkOracle,
        McEstimator::Ik,
        McEstimator::PlOracle,
        McEstimator::Pl,
        McEstimator::PlStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            McEstimator::IkOracle => "ik_oracle",
            McEstimator::Ik => "ik",
            McEstimator::PlOracle => "pl_oracle",
            McEstimator::Pl => "pl",
            McEstimator::PlStar => "pl_star",
        }
    }

    pub fn estimator(self) -> Estimator {
        match self {
            McEstimator::IkOracle | McEstimator::Ik => Estimator::TauInversion,
            McEstimator::PlOracle | McEstimator::Pl => Estimator::Mple,
            McEstimator::PlStar => Estimator::MpleTrimmed,
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(self, McEstimator::IkOracle | McEstimator::PlOracle)
    }
}

impl FromStr for McEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        McEstimator::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| Error::InvalidScenario(format!("unknown estimator `{s}`")))
    }
}

fn default_estimators() -> Vec<McEstimator> {
    McEstimator::ALL.to_vec()
}

fn default_seed() -> u64 {
    1
}

/// Default `(theta_j0, theta_j1)` per margin.
pub fn default_theta(d: usize) -> Vec<[f64; 2]> {
    [[1.0, 1.0], [-1.0, 2.0], [0.0, 1.0]][..d].to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub family: Family,
    pub tau_true: f64,
    pub margins: Margins,
    pub n: usize,
    pub reps: usize,
    /// `(theta_j0, theta_j1)` per margin; defaults per [`default_theta`].
    #[serde(default)]
    pub theta: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub covariate_law: CovariateLaw,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<McEstimator>,
    #[serde(default)]
    pub trim: TrimPolicy,
}

impl Scenario {
    pub fn new(family: Family, tau_true: f64, margins: Margins, n: usize, reps: usize) -> Self {
        Self {
            family,
            tau_true,
            margins,
            n,
            reps,
            theta: None,
            covariate_law: CovariateLaw::Normal,
            seed: default_seed(),
            estimators: default_estimators(),
            trim: TrimPolicy::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_estimators(mut self, estimators: &[McEstimator]) -> Self {
        self.estimators = estimators.to_vec();
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.margins.dim()
    }

    pub fn theta(&self) -> Vec<[f64; 2]> {
        self.theta
            .clone()
            .unwrap_or_else(|| default_theta(self.dim()))
    }

    pub fn copula(&self) -> Result<Copula> {
        Copula::new(self.family, self.dim())
    }

    /// Copula parameter matching `tau_true`.
    pub fn alpha_true(&self) -> Result<f64> {
        self.copula()?.tau_to_alpha(self.tau_true)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.reps == 0 {
            return bad("reps: must be at least 1".into());
        }
        if self.n < 10 {
            return bad(format!("n: must be at least 10, got {}", self.n));
        }
        if self.estimators.is_empty() {
            return bad("estimators: at least one is required".into());
        }
        let theta = self.theta();
        if theta.len() != self.dim() {
            return bad(format!(
                "theta: {} rows for {} margins",
                theta.len(),
                self.dim()
            ));
        }
        if theta.iter().flatten().any(|v| !v.is_finite()) {
            return bad("theta: values must be finite".into());
        }
        if self.alpha_true().is_err() {
            return bad(format!(
                "tau_true: {} is not attainable by {} in dimension {}",
                self.tau_true,
                self.family,
                self.dim()
            ));
        }
        self.trim
            .validate()
            .or_else(|e| bad(format!("trim: {e}")))?;
        self.trim
            .delta(self.n)
            .map(|_| ())
            .or_else(|e| bad(format!("trim: {e}")))
    }
}

/// One simulated data set together with the copula draw behind its errors.
#[derive(Debug, Clone)]
pub struct Replication {
    pub data: ObservationSet,
    pub uniforms: RowMatrix,
}

pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Draws replication `rep` of a scenario.
pub fn generate_replication(s: &Scenario, rep: usize) -> Result<Replication> {
    let copula = s.copula()?;
    let alpha = s.alpha_true()?;
    let mut rng = replication_rng(s.seed, rep);
    let u = copula.sample(alpha, s.n, &mut rng)?;
    let x = s.covariate_law.draw(&mut rng, s.n);
    let laws = s.margins.laws();
    let theta = s.theta();
    let d = s.dim();
    let mut y = RowMatrix::zeros(s.n, d);
    for (i, &xi) in x.iter().enumerate() {
        for j in 0..d {
            let eps = laws[j].quantile(u.get(i, j))?;
            y.set(i, j, theta[j][0] + theta[j][1] * xi + eps);
        }
    }
    let data = ObservationSet::new(y, RowMatrix::from_columns(&[x])?)?;
    Ok(Replication { data, uniforms: u })
}

/// Pseudo-observations of the true errors and of the residuals.
pub fn replication_samples(
    s: &Scenario,
    rep: &Replication,
) -> Result<(PseudoSample, PseudoSample)> {
    let oracle = pseudo_observations(&rep.uniforms)?;
    let specs: Vec<MarginalSpec> = (0..s.dim()).map(MarginalSpec::location_only).collect();
    let (_, residual) = fit_margins(&rep.data, &specs)?;
    Ok((oracle, residual))
}

/// Tau-scale estimate of one replication per requested estimator, or the
/// kind tag of the error that stopped it.
pub type ReplicationOutcome = BTreeMap<McEstimator, std::result::Result<f64, &'static str>>;

pub fn run_replication(s: &Scenario, rep: usize) -> ReplicationOutcome {
    let samples = generate_replication(s, rep).and_then(|r| replication_samples(s, &r));
    s.estimators
        .iter()
        .map(|&e| {
            let out = match &samples {
                Ok((oracle, residual)) => {
                    let p = if e.is_oracle() { oracle } else { residual };
                    estimate(p, s.family, e.estimator(), Some(&s.trim))
                        .map(|r| r.tau_hat)
                        .map_err(|err| err.kind())
                }
                Err(err) => Err(err.kind()),
            };
            (e, out)
        })
        .collect()
}

/// Runs every replication in parallel; results are ordered by replication index.
pub fn run_replications(s: &Scenario) -> Result<Vec<ReplicationOutcome>> {
    s.validate()?;
    Ok((0..s.reps)
        .into_par_iter()
        .map(|r| run_replication(s, r))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub estimator: McEstimator,
    pub bias_x100: f64,
    pub sd_x100: f64,
    pub rmse_x100: f64,
    /// Replications that produced an estimate.
    pub converged: usize,
}

/// Bias, SD (denominator `k - 1`, zero when `k = 1`) and RMSE of `values`
/// around `truth`, all times 100.
pub fn summarize(values: &[f64], truth: f64) -> (f64, f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    let sd = if values.len() > 1 {
        (ss / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let mse = values
        .iter()
        .map(|v| (v - truth) * (v - truth))
        .sum::<f64>()
        / k;
    (100.0 * (mean - truth), 100.0 * sd, 100.0 * mse.sqrt())
}

pub fn aggregate(s: &Scenario, outcomes: &[ReplicationOutcome]) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::with_capacity(s.estimators.len());
    for &e in &s.estimators {
        let mut values = Vec::with_capacity(outcomes.len());
        let mut tally: BTreeMap<&'static str, usize> = BTreeMap::new();
        for o in outcomes {
            match o.get(&e) {
                Some(Ok(v)) => values.push(*v),
                Some(Err(kind)) => *tally.entry(kind).or_default() += 1,
                None => *tally.entry("missing").or_default() += 1,
            }
        }
        if (values.len() as f64) < MIN_CONVERGED_SHARE * outcomes.len() as f64 || values.is_empty()
        {
            let failures = tally
                .iter()
                .map(|(k, v)| format!("{k}: {v}"))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::ScenarioUnstable {
                estimator: e.name().to_string(),
                converged: values.len(),
                reps: outcomes.len(),
                failures,
            });
        }
        let (bias, sd, rmse) = summarize(&values, s.tau_true);
        rows.push(MetricRow {
            estimator: e,
            bias_x100: bias,
            sd_x100: sd,
            rmse_x100: rmse,
            converged: values.len(),
        });
    }
    Ok(rows)
}

pub fn run_scenario(s: &Scenario) -> Result<Vec<MetricRow>> {
    let outcomes = run_replications(s)?;
    aggregate(s, &outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

fn two_decimals(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub fn render_table(rows: &[MetricRow], format: TableFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("estimator,bias,SD,RMSE\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.estimator.name(),
                    two_decimals(r.bias_x100),
                    two_decimals(r.sd_x100),
                    two_decimals(r.rmse_x100)
                );
            }
        }
        TableFormat::Markdown => {
            out.push_str("| estimator | bias | SD | RMSE |\n|---|---:|---:|---:|\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    r.estimator.name(),
                    two_decimals(r.bias_x100),
                    two_decimals(r.sd_x100),
                    two_decimals(r.rmse_x100)
                );
            }
        }
    }
    Ok(out)
}

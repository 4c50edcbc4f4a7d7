//! Copula parameter estimators on pseudo-observations: maximum pseudo-likelihood,
//! its trimmed variant, and Kendall's tau inversion, plus sandwich standard errors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::copulas::{Copula, Family, Prepared};
use crate::dataset::ObservationSet;
use crate::error::{Error, Result};
use crate::marginals::{fit_marginal, MarginalFit, MarginalSpec};
use crate::matrix::RowMatrix;
use crate::ranks::{pseudo_observations, PseudoSample};

/// Relative score tolerance: a root is accepted once `|sum psi| < SCORE_TOL * n`.
pub const SCORE_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;
const PARAM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Mple,
    MpleTrimmed,
    TauInversion,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mple => "mple",
            Estimator::MpleTrimmed => "mple_trimmed",
            Estimator::TauInversion => "tau_inversion",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts the report tags and the short table names `pl`, `pl_star`, `ik`.
impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mple" | "pl" => Ok(Estimator::Mple),
            "mple_trimmed" | "pl_star" | "pl*" => Ok(Estimator::MpleTrimmed),
            "tau_inversion" | "ik" => Ok(Estimator::TauInversion),
            other => Err(Error::InvalidScenario(format!(
                "unknown estimator `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: Estimator,
    pub alpha_hat: f64,
    pub tau_hat: f64,
    pub std_error_alpha: Option<f64>,
    pub std_error_tau: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub n_used: usize,
    pub score_at_root: f64,
}

/// Trimming radius `delta_n = d * n^(-1/lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimPolicy {
    #[serde(rename = "D", alias = "d")]
    pub d: f64,
    pub lambda: f64,
}

impl Default for TrimPolicy {
    fn default() -> Self {
        Self {
            d: 0.25,
            lambda: 1.9,
        }
    }
}

impl TrimPolicy {
    pub fn new(d: f64, lambda: f64) -> Result<Self> {
        let p = Self { d, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::InvalidTrimPolicy(format!(
                "D must be positive, got {}",
                self.d
            )));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidTrimPolicy(format!(
                "lambda must be at least 1, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn delta(&self, n: usize) -> Result<f64> {
        self.validate()?;
        let delta = self.d * (n as f64).powf(-1.0 / self.lambda);
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidTrimPolicy(format!(
                "delta_n = {delta} must lie in (0, 0.5)"
            )));
        }
        Ok(delta)
    }
}

fn copula_for(pseudo: &PseudoSample, family: Family) -> Result<Copula> {
    Copula::new(family, pseudo.dim())
}

/// Kendall's tau inversion. For d > 2 the average pairwise tau is inverted.
pub fn estimate_tau_inversion(pseudo: &PseudoSample, family: Family) -> Result<EstimateReport> {
    let copula = copula_for(pseudo, family)?;
    let tau = pseudo.mean_pairwise_tau()?;
    let alpha = copula.tau_to_alpha(tau)?;
    Ok(EstimateReport {
        estimator: Estimator::TauInversion,
        alpha_hat: alpha,
        tau_hat: copula.alpha_to_tau(alpha)?,
        std_error_alpha: None,
        std_error_tau: None,
        iterations: 0,
        converged: true,
        n_used: pseudo.n(),
        score_at_root: 0.0,
    })
}

/// Tau-inversion starting value. A sample tau the family cannot attain is an
/// error; one inside the range is pulled into the search interval.
fn initial_alpha(copula: &Copula, pseudo: &PseudoSample) -> Result<f64> {
    let sample_tau = pseudo.mean_pairwise_tau()?;
    let (tlo, thi) = copula.tau_range();
    if sample_tau <= tlo || sample_tau >= thi {
        return copula.tau_to_alpha(sample_tau);
    }
    let (lo, hi) = tau_search_interval(copula);
    let mut tau = sample_tau.clamp(lo, hi);
    if copula.family() == Family::Frank && tau == 0.0 {
        tau = 1e-6;
    }
    copula.tau_to_alpha(tau)
}

fn tau_search_interval(copula: &Copula) -> (f64, f64) {
    let (tlo, thi) = copula.tau_range();
    ((tlo + 1e-4).max(-0.99), thi.min(0.99))
}

/// `alpha` for a tau on the search grid, skipping the Frank hole at 0.
fn alpha_at_tau(copula: &Copula, tau: f64) -> Result<f64> {
    let tau = if copula.family() == Family::Frank && tau.abs() < 1e-8 {
        1e-8_f64.copysign(tau)
    } else {
        tau
    };
    copula.tau_to_alpha(tau)
}

struct Root {
    alpha: f64,
    score: f64,
    iterations: usize,
}

/// Finds a sign change of the summed score by stepping outward on the tau
/// scale from `alpha0`, first in the ascent direction.
fn bracket(prep: &Prepared, alpha0: f64, s0: f64) -> Result<(f64, f64, f64, f64)> {
    let c = prep.copula();
    let (tlo, thi) = tau_search_interval(c);
    let tau0 = c.alpha_to_tau(alpha0)?.clamp(tlo, thi);
    let ascent = if s0 > 0.0 { 1.0 } else { -1.0 };
    for dir in [ascent, -ascent] {
        let mut prev = (alpha0, s0);
        let mut step = 0.02;
        loop {
            let t = (tau0 + dir * step).clamp(tlo, thi);
            let a = alpha_at_tau(c, t)?;
            let (s, _) = prep.score_sums(a);
            if s.is_finite() && s.signum() != prev.1.signum() {
                return Ok(if a < prev.0 {
                    (a, prev.0, s, prev.1)
                } else {
                    (prev.0, a, prev.1, s)
                });
            }
            if t == tlo || t == thi {
                break;
            }
            if s.is_finite() {
                prev = (a, s);
            }
            step *= 2.0;
        }
    }
    Err(Error::NoBracketFound)
}

/// Root of the summed score nearest to `alpha0`: Newton with bisection
/// fallback inside a sign-change bracket.
fn solve_score(prep: &Prepared, alpha0: f64) -> Result<Root> {
    let tol = SCORE_TOL * prep.n() as f64;
    let c = *prep.copula();
    c.check_alpha(alpha0)?;
    let (s0, _) = prep.score_sums(alpha0);
    if s0.abs() < tol {
        return Ok(Root {
            alpha: alpha0,
            score: s0,
            iterations: 0,
        });
    }
    let (mut lo, mut hi, s_lo, _) = bracket(prep, alpha0, s0)?;
    let lo_positive = s_lo > 0.0;
    let mut a = if alpha0 > lo && alpha0 < hi {
        alpha0
    } else {
        0.5 * (lo + hi)
    };
    for it in 1..=MAX_ITERATIONS {
        let (s, ds) = prep.score_sums(a);
        if s.abs() < tol {
            return Ok(Root {
                alpha: a,
                score: s,
                iterations: it,
            });
        }
        if (s > 0.0) == lo_positive {
            lo = a;
        } else {
            hi = a;
        }
        let mut next = a - s / ds;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if c.family() == Family::Frank && next == 0.0 {
            next = 1e-12 * (hi - lo).signum();
        }
        if (hi - lo) <= PARAM_TOL * 1e-6 * a.abs().max(1.0) {
            // bracket pinned to machine precision
            let (s_next, _) = prep.score_sums(next);
            if s_next.abs() < tol {
                return Ok(Root {
                    alpha: next,
                    score: s_next,
                    iterations: it,
                });
            }
            return Err(Error::MaxIterations(it));
        }
        a = next;
    }
    Err(Error::MaxIterations(MAX_ITERATIONS))
}

fn mple_on(
    pseudo: &PseudoSample,
    family: Family,
    init: Option<f64>,
    estimator: Estimator,
) -> Result<EstimateReport> {
    let copula = copula_for(pseudo, family)?;
    let alpha0 = match init {
        Some(a) => a,
        None => initial_alpha(&copula, pseudo)?,
    };
    let prep = copula.prepare(pseudo.matrix())?;
    let root = solve_score(&prep, alpha0)?;
    Ok(EstimateReport {
        estimator,
        alpha_hat: root.alpha,
        tau_hat: copula.alpha_to_tau(root.alpha)?,
        std_error_alpha: None,
        std_error_tau: None,
        iterations: root.iterations,
        converged: true,
        n_used: pseudo.n(),
        score_at_root: root.score,
    })
}

/// Maximum pseudo-likelihood estimate. Starts from `init` when given,
/// otherwise from the tau-inversion estimate.
pub fn estimate_mple(
    pseudo: &PseudoSample,
    family: Family,
    init: Option<f64>,
) -> Result<EstimateReport> {
    mple_on(pseudo, family, init, Estimator::Mple)
}

/// Pseudo-likelihood restricted to rows inside `[delta_n, 1 - delta_n]^d`.
/// The starting value is the tau-inversion estimate on the full sample.
pub fn estimate_mple_trimmed(
    pseudo: &PseudoSample,
    family: Family,
    policy: &TrimPolicy,
) -> Result<EstimateReport> {
    let delta = policy.delta(pseudo.n())?;
    let kept = trim_rows(pseudo.matrix(), delta);
    if kept.nrows() < 2 {
        return Err(Error::AllPointsTrimmed { delta });
    }
    let copula = copula_for(pseudo, family)?;
    let alpha0 = initial_alpha(&copula, pseudo)?;
    let sub = PseudoSample::from_uniforms(kept)?;
    mple_on(&sub, family, Some(alpha0), Estimator::MpleTrimmed)
}

/// Rows with every coordinate in `[delta, 1 - delta]`.
pub fn trim_rows(u: &RowMatrix, delta: f64) -> RowMatrix {
    u.filter_rows(|r| r.iter().all(|&v| v >= delta && v <= 1.0 - delta))
}

/// Sandwich variance pieces at `alpha_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sandwich {
    /// Asymptotic variance of `sqrt(n) (alpha_hat - alpha)`.
    pub sigma: f64,
    /// Estimated Fisher information `-mean(d psi / d alpha)`.
    pub fisher: f64,
}

impl Sandwich {
    pub fn std_error_alpha(&self, n: usize) -> f64 {
        (self.sigma / n as f64).sqrt()
    }
}

/// Sandwich variance with the rank-estimation correction
/// `psi~_i = psi_i + sum_j (1/n) sum_m [1{U_ji <= U_jm} - U_jm] psi^(j)_m`.
///
/// The inner sum over `m` is a suffix sum in the order of column `j`, so the
/// whole correction costs O(n log n) per column.
pub fn sandwich_covariance(
    pseudo: &PseudoSample,
    family: Family,
    alpha_hat: f64,
) -> Result<Sandwich> {
    let copula = copula_for(pseudo, family)?;
    copula.check_alpha(alpha_hat)?;
    let prep = copula.prepare(pseudo.matrix())?;
    let n = pseudo.n();
    let d = pseudo.dim();
    let nf = n as f64;
    let (_, dsum) = prep.score_sums(alpha_hat);
    let fisher = -dsum / nf;
    if !(fisher > 0.0 && fisher.is_finite()) {
        return Err(Error::SingularInformation(fisher));
    }
    let mut tilde = prep.scores(alpha_hat);
    let partials = prep.score_partials(alpha_hat);
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..d {
        let col = pseudo.column(j);
        let pj = |m: usize| partials[m * d + j];
        let offset: f64 = (0..n).map(|m| col[m] * pj(m)).sum();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        // walk from the largest value down; tied values share one suffix sum
        let mut suffix = 0.0;
        let mut k = n;
        while k > 0 {
            let mut start = k - 1;
            while start > 0 && col[order[start - 1]] == col[order[k - 1]] {
                start -= 1;
            }
            for &m in &order[start..k] {
                suffix += pj(m);
            }
            for &i in &order[start..k] {
                tilde[i] += (suffix - offset) / nf;
            }
            k = start;
        }
    }
    let mean = tilde.iter().sum::<f64>() / nf;
    let var = tilde.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / nf;
    let sigma = var / (fisher * fisher);
    if !sigma.is_finite() {
        return Err(Error::SingularInformation(fisher));
    }
    Ok(Sandwich { sigma, fisher })
}

/// Fills the standard-error fields of a pseudo-likelihood report. The tau
/// scale uses the delta method with the exact `d tau / d alpha`.
pub fn attach_std_errors(
    report: &mut EstimateReport,
    pseudo: &PseudoSample,
    family: Family,
) -> Result<()> {
    let copula = copula_for(pseudo, family)?;
    let sw = sandwich_covariance(pseudo, family, report.alpha_hat)?;
    let se = sw.std_error_alpha(pseudo.n());
    report.std_error_alpha = Some(se);
    report.std_error_tau = Some(se * copula.tau_derivative(report.alpha_hat)?.abs());
    Ok(())
}

/// Runs one estimator without standard errors.
pub fn estimate(
    pseudo: &PseudoSample,
    family: Family,
    estimator: Estimator,
    policy: Option<&TrimPolicy>,
) -> Result<EstimateReport> {
    match estimator {
        Estimator::TauInversion => estimate_tau_inversion(pseudo, family),
        Estimator::Mple => estimate_mple(pseudo, family, None),
        Estimator::MpleTrimmed => {
            estimate_mple_trimmed(pseudo, family, policy.unwrap_or(&TrimPolicy::default()))
        }
    }
}

/// Fits every margin and converts the residuals to pseudo-observations.
pub fn fit_margins(
    data: &ObservationSet,
    specs: &[MarginalSpec],
) -> Result<(Vec<MarginalFit>, PseudoSample)> {
    if specs.len() != data.d() {
        return Err(Error::ShapeMismatch(format!(
            "{} marginal specs for {} responses",
            specs.len(),
            data.d()
        )));
    }
    let mut fits = Vec::with_capacity(specs.len());
    for (j, spec) in specs.iter().enumerate() {
        if spec.margin_index != j {
            return Err(Error::ShapeMismatch(format!(
                "spec {j} refers to margin {}",
                spec.margin_index
            )));
        }
        fits.push(fit_marginal(data, spec)?);
    }
    let residuals: Vec<&[f64]> = fits.iter().map(|f| f.residuals.as_slice()).collect();
    let pseudo = pseudo_observations(&RowMatrix::from_columns(&residuals)?)?;
    Ok((fits, pseudo))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineFit {
    pub report: EstimateReport,
    pub margins: Vec<MarginalFit>,
}

/// Margins, ranks, estimator and (for the pseudo-likelihood variants)
/// sandwich standard errors.
pub fn fit_pipeline(
    data: &ObservationSet,
    specs: &[MarginalSpec],
    family: Family,
    estimator: Estimator,
    policy: Option<&TrimPolicy>,
) -> Result<PipelineFit> {
    let (margins, pseudo) = fit_margins(data, specs)?;
    let mut report = estimate(&pseudo, family, estimator, policy)?;
    if estimator != Estimator::TauInversion {
        attach_std_errors(&mut report, &pseudo, family)?;
    }
    Ok(PipelineFit { report, margins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn clayton_sample(alpha: f64, n: usize, seed: u64) -> PseudoSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Copula::bivariate(Family::Clayton)
            .sample(alpha, n, &mut rng)
            .unwrap();
        PseudoSample::from_uniforms(u).unwrap()
    }

    #[test]
    fn delta_formula() {
        let d = TrimPolicy::default().delta(100).unwrap();
        assert!((d - 0.25 * 100f64.powf(-1.0 / 1.9)).abs() < 1e-15);
        assert!((d - 0.022146).abs() < 1e-6);
        assert!(matches!(
            TrimPolicy {
                d: 1.0,
                lambda: 0.1
            }
            .delta(100),
            Err(Error::InvalidTrimPolicy(_))
        ));
        assert!(matches!(
            TrimPolicy {
                d: 1.0,
                lambda: 1.0
            }
            .delta(2),
            Err(Error::InvalidTrimPolicy(_))
        ));
    }

    #[test]
    fn mple_recovers_clayton_parameter() {
        let p = clayton_sample(2.0, 5000, 11);
        let r = estimate_mple(&p, Family::Clayton, None).unwrap();
        assert!(r.converged);
        assert!((r.alpha_hat - 2.0).abs() < 0.15, "{}", r.alpha_hat);
        assert!(r.score_at_root.abs() < SCORE_TOL * 5000.0);
        assert_eq!(r.n_used, 5000);
    }

    #[test]
    fn mple_is_a_fixed_point_of_its_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = Copula::bivariate(Family::Frank)
            .sample(5.7, 500, &mut rng)
            .unwrap();
        let p = PseudoSample::from_uniforms(u).unwrap();
        let r = estimate_mple(&p, Family::Frank, None).unwrap();
        let again = estimate_mple(&p, Family::Frank, Some(r.alpha_hat)).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.alpha_hat, r.alpha_hat);
    }

    #[test]
    fn trimming_is_a_no_op_inside_the_cube() {
        let p = clayton_sample(2.0, 400, 3);
        let inner = trim_rows(p.matrix(), 0.1);
        let inner = PseudoSample::from_uniforms(inner).unwrap();
        let policy = TrimPolicy::default();
        assert!(policy.delta(inner.n()).unwrap() < 0.1);
        let a = estimate_mple(&inner, Family::Clayton, None).unwrap();
        let b = estimate_mple_trimmed(&inner, Family::Clayton, &policy).unwrap();
        assert_eq!(a.alpha_hat, b.alpha_hat);
        assert_eq!(b.n_used, inner.n());
    }

    #[test]
    fn tau_inversion_closed_form() {
        let u =
            RowMatrix::from_columns(&[vec![0.1, 0.2, 0.3, 0.4], vec![0.1, 0.2, 0.4, 0.3]]).unwrap();
        // concordant 5 of 6 pairs: tau = 4/6
        let p = PseudoSample::from_uniforms(u).unwrap();
        let r = estimate_tau_inversion(&p, Family::Clayton).unwrap();
        let tau = 4.0 / 6.0;
        assert!((r.alpha_hat - 2.0 * tau / (1.0 - tau)).abs() < 1e-12);
        assert!(r.std_error_alpha.is_none());
    }

    #[test]
    fn sandwich_matches_quadratic_oracle() {
        let p = clayton_sample(2.0, 300, 8);
        let alpha = 2.1;
        let sw = sandwich_covariance(&p, Family::Clayton, alpha).unwrap();
        // direct O(n^2) evaluation of the same formula
        let c = Copula::bivariate(Family::Clayton);
        let n = p.n();
        let psi: Vec<f64> = (0..n).map(|i| c.score(p.row(i), alpha).unwrap()).collect();
        let mut tilde = psi.clone();
        for j in 0..2 {
            for (i, t) in tilde.iter_mut().enumerate() {
                let mut acc = 0.0;
                for m in 0..n {
                    let ind = if p.row(i)[j] <= p.row(m)[j] { 1.0 } else { 0.0 };
                    acc += (ind - p.row(m)[j]) * c.score_partial_u(p.row(m), alpha, j).unwrap();
                }
                *t += acc / n as f64;
            }
        }
        let fisher = -(0..n)
            .map(|i| c.score_dalpha(p.row(i), alpha).unwrap())
            .sum::<f64>()
            / n as f64;
        let mean = tilde.iter().sum::<f64>() / n as f64;
        let var = tilde.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((sw.fisher - fisher).abs() < 1e-10 * fisher);
        assert!((sw.sigma - var / (fisher * fisher)).abs() < 1e-9 * sw.sigma);
    }

    #[test]
    fn tiny_sample_never_yields_nan() {
        let u = RowMatrix::from_columns(&[vec![1.0 / 3.0, 2.0 / 3.0], vec![2.0 / 3.0, 1.0 / 3.0]])
            .unwrap();
        let p = PseudoSample::from_uniforms(u).unwrap();
        match sandwich_covariance(&p, Family::Frank, 1.0) {
            Ok(sw) => assert!(sw.sigma.is_finite()),
            Err(e) => assert!(matches!(e, Error::SingularInformation(_))),
        }
    }
}

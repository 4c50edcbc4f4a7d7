//! Tail-regularity screening of error laws and of copula/margin combinations.
//!
//! For a law with density `f` and quantile `q`, the boundary behaviour of
//! `g(u) = f(q(u)) (1 + |q(u)|)` decides how much score growth the margins can
//! absorb: `g(u) ~ u^beta` near 0 (and likewise near 1) with `beta > 0` is
//! needed for unbounded copula scores.

use serde::Serialize;

use crate::copulas::{Family, ScoreClass};
use crate::error::{Error, Result};
use crate::marginals::ErrorLaw;

pub const BETA_CAP: f64 = 0.499;
/// Tail exponents below this are read as a positive boundary limit.
const FLAT_EXPONENT: f64 = 0.02;
const GRID_DECADES: i32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaVerdict {
    pub law: String,
    pub beta_max: f64,
    /// The density jumps at a finite support endpoint.
    pub continuous_density_violated: bool,
    /// `g` at the innermost grid point, `u = 1e-8` and `u = 1 - 1e-8`.
    pub left_limit: f64,
    pub right_limit: f64,
    pub left_exponent: f64,
    pub right_exponent: f64,
    /// Grid sup of `f(q(2u)) / f(q(u))` and of its mirror at 1.
    pub left_ratio_sup: f64,
    pub right_ratio_sup: f64,
    pub warnings: Vec<String>,
}

fn g(law: &ErrorLaw, u: f64) -> Result<f64> {
    let q = law.quantile(u)?;
    Ok(law.density(q) * (1.0 + q.abs()))
}

/// Local power exponent of `h` between `a` and `b`.
fn log_slope(ha: f64, hb: f64, a: f64, b: f64) -> f64 {
    if hb <= 0.0 {
        return f64::INFINITY;
    }
    (ha.ln() - hb.ln()) / (a.ln() - b.ln())
}

fn is_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1]) || v.windows(2).all(|w| w[0] >= w[1])
}

struct Tail {
    limit: f64,
    exponent: f64,
    ratio_sup: f64,
    monotone: bool,
}

/// `dist` maps a distance `t` from the boundary to the matching `u`.
fn tail(law: &ErrorLaw, dist: impl Fn(f64) -> f64) -> Result<Tail> {
    let ts: Vec<f64> = (1..=GRID_DECADES).map(|k| 10f64.powi(-k)).collect();
    let gs = ts
        .iter()
        .map(|&t| g(law, dist(t)))
        .collect::<Result<Vec<_>>>()?;
    let k = ts.len();
    let exponent = log_slope(gs[k - 1], gs[k - 2], ts[k - 1], ts[k - 2]);
    let mut ratio_sup = 0.0_f64;
    for &t in &ts {
        let f1 = law.density(law.quantile(dist(t))?);
        let f2 = law.density(law.quantile(dist(2.0 * t))?);
        if f1 > 0.0 {
            ratio_sup = ratio_sup.max(f2 / f1);
        }
    }
    Ok(Tail {
        limit: gs[k - 1],
        exponent,
        ratio_sup,
        monotone: is_monotone(&gs),
    })
}

/// Location-scale members reduced to their standard form. `1 + |a + b z|`
/// is within constant factors of `1 + |z|`, so the tail exponents are
/// unchanged, while a large `|a| / b` would otherwise push the kink of
/// `1 + |q|` into the finite grid.
fn standard_form(law: &ErrorLaw) -> ErrorLaw {
    match law {
        ErrorLaw::Normal { .. } => ErrorLaw::STANDARD_NORMAL,
        ErrorLaw::Exponential { .. } => ErrorLaw::UNIT_EXPONENTIAL,
        ErrorLaw::Uniform { .. } => ErrorLaw::SYMMETRIC_UNIFORM,
        ErrorLaw::StudentT { .. } => *law,
    }
}

/// Tail exponents and limits are those of the standardized law.
pub fn classify_beta(law: &ErrorLaw) -> Result<BetaVerdict> {
    law.validate()
        .map_err(|_| Error::UnsupportedLaw(law.to_string()))?;
    let std_law = standard_form(law);
    let left = tail(&std_law, |t| t)?;
    let right = tail(&std_law, |t| 1.0 - t)?;
    let side_beta = |t: &Tail| {
        if t.exponent < FLAT_EXPONENT {
            0.0
        } else {
            t.exponent.min(BETA_CAP)
        }
    };
    let beta_max = side_beta(&left).min(side_beta(&right)).max(0.0);
    let mut warnings = Vec::new();
    for (name, t) in [("left", &left), ("right", &right)] {
        if !t.monotone {
            warnings.push(format!("g is not monotone on the {name} tail grid"));
        }
    }
    Ok(BetaVerdict {
        law: law.to_string(),
        beta_max,
        continuous_density_violated: matches!(
            law,
            ErrorLaw::Exponential { .. } | ErrorLaw::Uniform { .. }
        ),
        left_limit: left.limit,
        right_limit: right.limit,
        left_exponent: left.exponent,
        right_exponent: right.exponent,
        left_ratio_sup: left.ratio_sup,
        right_ratio_sup: right.ratio_sup,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Every margin has `beta > 0`: residual-based estimation is asymptotically
    /// equivalent to estimation from the true errors.
    Theorem1,
    /// Bounded copula score: equivalence holds even with `beta = 0` margins.
    Theorem2,
    NoGuarantee,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Theorem1 => "theorem1",
            Verdict::Theorem2 => "theorem2",
            Verdict::NoGuarantee => "no_guarantee",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Applicability {
    pub family: Family,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    pub margins: Vec<BetaVerdict>,
}

pub fn check_applicability(family: Family, laws: &[ErrorLaw]) -> Result<Applicability> {
    if laws.is_empty() {
        return Err(Error::EmptyInput);
    }
    let margins = laws.iter().map(classify_beta).collect::<Result<Vec<_>>>()?;
    let mut reasons = Vec::new();
    let irregular: Vec<usize> = margins
        .iter()
        .enumerate()
        .filter(|(_, v)| v.beta_max <= 0.0)
        .map(|(j, _)| j)
        .collect();
    for &j in &irregular {
        let v = &margins[j];
        let side = if v.left_exponent < FLAT_EXPONENT {
            "left"
        } else {
            "right"
        };
        reasons.push(format!(
            "margin {} ({}): beta_max = 0, f(q(u))(1+|q(u)|) has a positive limit at the {side} end",
            j + 1,
            v.law
        ));
    }
    let class = family.score_class();
    let verdict = if irregular.is_empty() {
        reasons.push(format!(
            "all margins have beta_max > 0 (min {:.3})",
            margins
                .iter()
                .map(|v| v.beta_max)
                .fold(f64::INFINITY, f64::min)
        ));
        Verdict::Theorem1
    } else if class == ScoreClass::Bounded {
        reasons.push(format!("{family} copula has a bounded score"));
        Verdict::Theorem2
    } else {
        reasons.push(format!(
            "{family} copula score is unbounded near the boundary of the unit cube"
        ));
        if family == Family::Gaussian {
            reasons.push(
                "open question: the Gaussian copula estimator has been seen to behave well in \
                 such settings at moderate dependence; whether a weaker tail condition suffices \
                 is not settled"
                    .to_string(),
            );
        }
        Verdict::NoGuarantee
    };
    for v in &margins {
        for w in &v.warnings {
            reasons.push(format!("warning ({}): {w}", v.law));
        }
    }
    Ok(Applicability {
        family,
        verdict,
        reasons,
        margins,
    })
}

/// Plain-text report for the command line.
pub fn render_applicability(a: &Applicability) -> String {
    let mut out = format!("family: {}\nverdict: {}\n", a.family, a.verdict.name());
    for v in &a.margins {
        out.push_str(&format!(
            "margin {}: beta_max = {:.3}{}\n",
            v.law,
            v.beta_max,
            if v.continuous_density_violated {
                " (density jumps at a support endpoint)"
            } else {
                ""
            }
        ));
    }
    for r in &a.reasons {
        out.push_str(&format!("- {r}\n"));
    }
    out
}

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    normal_cdf, normal_pdf, normal_quantile, student_t_cdf, student_t_pdf, student_t_quantile,
};

/// Parametric law of a regression error.
///
/// `StudentT` is the unscaled t distribution (variance `df / (df - 2)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ErrorLaw {
    Normal { mean: f64, sd: f64 },
    Exponential { mean: f64 },
    Uniform { lo: f64, hi: f64 },
    StudentT { df: f64 },
}

impl ErrorLaw {
    pub const STANDARD_NORMAL: ErrorLaw = ErrorLaw::Normal { mean: 0.0, sd: 1.0 };
    pub const UNIT_EXPONENTIAL: ErrorLaw = ErrorLaw::Exponential { mean: 1.0 };
    pub const SYMMETRIC_UNIFORM: ErrorLaw = ErrorLaw::Uniform { lo: -1.0, hi: 1.0 };
    pub const STUDENT_T5: ErrorLaw = ErrorLaw::StudentT { df: 5.0 };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ErrorLaw::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            ErrorLaw::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            ErrorLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ErrorLaw::StudentT { df } => df > 2.0 && df.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLaw(format!("{self:?}")))
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        match *self {
            ErrorLaw::Normal { mean, sd } => normal_pdf((y - mean) / sd) / sd,
            ErrorLaw::Exponential { mean } => {
                if y < 0.0 {
                    0.0
                } else {
                    (-y / mean).exp() / mean
                }
            }
            ErrorLaw::Uniform { lo, hi } => {
                if y < lo || y > hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            ErrorLaw::StudentT { df } => student_t_pdf(y, df),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            ErrorLaw::Normal { mean, sd } => normal_cdf((y - mean) / sd),
            ErrorLaw::Exponential { mean } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-y / mean).exp_m1()
                }
            }
            ErrorLaw::Uniform { lo, hi } => ((y - lo) / (hi - lo)).clamp(0.0, 1.0),
            ErrorLaw::StudentT { df } => student_t_cdf(y, df),
        }
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::QuantileArgumentOutOfRange(u));
        }
        Ok(match *self {
            ErrorLaw::Normal { mean, sd } => mean + sd * normal_quantile(u),
            ErrorLaw::Exponential { mean } => -mean * (-u).ln_1p(),
            ErrorLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
            ErrorLaw::StudentT { df } => student_t_quantile(u, df),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        match *self {
            ErrorLaw::Normal { mean, sd } => (0..count)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    mean + sd * z
                })
                .collect(),
            ErrorLaw::Exponential { mean } => (0..count)
                .map(|_| {
                    let e: f64 = Exp1.sample(rng);
                    mean * e
                })
                .collect(),
            ErrorLaw::Uniform { lo, hi } => (0..count)
                .map(|_| lo + (hi - lo) * rng.sample::<f64, _>(Open01))
                .collect(),
            ErrorLaw::StudentT { df } => {
                let t = StudentT::new(df).expect("validated df");
                (0..count).map(|_| t.sample(rng)).collect()
            }
        }
    }

    /// Short name used by the CLI and in reports.
    pub fn name(&self) -> &'static str {
        match self {
            ErrorLaw::Normal { .. } => "normal",
            ErrorLaw::Exponential { .. } => "exponential",
            ErrorLaw::Uniform { .. } => "uniform",
            ErrorLaw::StudentT { .. } => "student_t",
        }
    }
}

impl fmt::Display for ErrorLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ErrorLaw::Normal { mean, sd } => write!(f, "normal({mean}, {sd})"),
            ErrorLaw::Exponential { mean } => write!(f, "exponential({mean})"),
            ErrorLaw::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            ErrorLaw::StudentT { df } => write!(f, "student_t({df})"),
        }
    }
}

/// Parses `normal`, `exponential`, `uniform`, `t`/`student_t` with the
/// standard parameters, or an explicit form such as `student_t(7)` or
/// `uniform(-2,3)`.
impl FromStr for ErrorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, args) = match s.find('(') {
            Some(p) if s.ends_with(')') => (&s[..p], Some(&s[p + 1..s.len() - 1])),
            _ => (s.as_str(), None),
        };
        let nums: Vec<f64> = match args {
            Some(a) => a
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::UnknownMargin(s.clone()))?,
            None => Vec::new(),
        };
        let law = match (name, nums.as_slice()) {
            ("normal" | "n", []) => ErrorLaw::STANDARD_NORMAL,
            ("normal" | "n", [m, sd]) => ErrorLaw::Normal { mean: *m, sd: *sd },
            ("exponential" | "exp" | "e", []) => ErrorLaw::UNIT_EXPONENTIAL,
            ("exponential" | "exp" | "e", [m]) => ErrorLaw::Exponential { mean: *m },
            ("uniform" | "u", []) => ErrorLaw::SYMMETRIC_UNIFORM,
            ("uniform" | "u", [lo, hi]) => ErrorLaw::Uniform { lo: *lo, hi: *hi },
            ("t" | "student_t" | "student", []) => ErrorLaw::STUDENT_T5,
            ("t" | "student_t" | "student", [df]) => ErrorLaw::StudentT { df: *df },
            _ => return Err(Error::UnknownMargin(s.clone())),
        };
        law.validate()?;
        Ok(law)
    }
}

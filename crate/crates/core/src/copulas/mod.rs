//! One-parameter exchangeable copula families.
//!
//! Every family exposes its log-density, the score `psi = d log c / d alpha`,
//! `d psi / d alpha`, the mixed partials `d psi / d u_j`, the Kendall's tau map
//! in both directions and an exact sampler. Derivatives are exact: the
//! closed-form log-density is evaluated with hyper-dual numbers.

pub mod dual;
pub mod kernels;
mod sampling;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    frank_tau, frank_tau_derivative, normal_pdf, normal_quantile, student_t_pdf, student_t_quantile,
};
use dual::{HyperDual, Scalar};
use kernels::MAX_DIM;

/// Degrees of freedom of the Student copula; only the correlation is free.
pub const STUDENT_DF: f64 = 5.0;

/// Coordinates closer than this to 0 or 1 are rejected.
pub const BOUNDARY_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Clayton,
    Frank,
    Gumbel,
    Gaussian,
    StudentT5,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Clayton,
        Family::Frank,
        Family::Gumbel,
        Family::Gaussian,
        Family::StudentT5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Clayton => "clayton",
            Family::Frank => "frank",
            Family::Gumbel => "gumbel",
            Family::Gaussian => "gaussian",
            Family::StudentT5 => "student_t5",
        }
    }

    pub fn score_class(self) -> ScoreClass {
        match self {
            Family::Frank => ScoreClass::Bounded,
            _ => ScoreClass::LogUnbounded,
        }
    }

    fn is_elliptical(self) -> bool {
        matches!(self, Family::Gaussian | Family::StudentT5)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clayton" => Ok(Family::Clayton),
            "frank" => Ok(Family::Frank),
            "gumbel" => Ok(Family::Gumbel),
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "student_t5" | "student" | "t" | "t5" => Ok(Family::StudentT5),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// Boundedness class of the score function and its coordinate partials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreClass {
    Bounded,
    LogUnbounded,
}

/// A copula family in a fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Copula {
    family: Family,
    dim: usize,
    student_const: f64,
}

impl Copula {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension {
                dim,
                reason: format!("dimension must lie in 2..={MAX_DIM}"),
            });
        }
        let student_const = if family == Family::StudentT5 {
            kernels::student_norm_const(STUDENT_DF, dim)
        } else {
            0.0
        };
        Ok(Self {
            family,
            dim,
            student_const,
        })
    }

    pub fn bivariate(family: Family) -> Self {
        Self::new(family, 2).expect("dimension 2 is always supported")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn score_class(&self) -> ScoreClass {
        self.family.score_class()
    }

    /// Open parameter interval `(lo, hi)`; Frank at d = 2 also excludes 0.
    pub fn domain(&self) -> (f64, f64) {
        match self.family {
            Family::Clayton => (0.0, f64::INFINITY),
            Family::Frank if self.dim == 2 => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Frank => (0.0, f64::INFINITY),
            Family::Gumbel => (1.0, f64::INFINITY),
            Family::Gaussian | Family::StudentT5 => (-1.0 / (self.dim as f64 - 1.0), 1.0),
        }
    }

    fn domain_text(&self) -> String {
        let (lo, hi) = self.domain();
        if self.family == Family::Frank && self.dim == 2 {
            "(-inf, 0) U (0, inf)".to_string()
        } else {
            format!("({lo}, {hi})")
        }
    }

    pub fn in_domain(&self, alpha: f64) -> bool {
        let (lo, hi) = self.domain();
        alpha.is_finite()
            && alpha > lo
            && alpha < hi
            && !(self.family == Family::Frank && alpha == 0.0)
    }

    pub fn check_alpha(&self, alpha: f64) -> Result<()> {
        if self.in_domain(alpha) {
            Ok(())
        } else {
            Err(Error::ParameterOutOfDomain {
                family: self.family.name(),
                alpha,
                domain: self.domain_text(),
            })
        }
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::LengthMismatch {
                left: self.dim,
                right: u.len(),
            });
        }
        for &v in u {
            if !(v > BOUNDARY_EPS && v < 1.0 - BOUNDARY_EPS) {
                return Err(Error::PointOnBoundary { value: v });
            }
        }
        Ok(())
    }

    /// Maps a uniform coordinate to the kernel coordinate (identity for
    /// Archimedean families, marginal quantile for elliptical ones), carrying
    /// the derivative seeds of `u` through the transform.
    fn lift(&self, u: HyperDual) -> HyperDual {
        match self.family {
            Family::Gaussian => {
                let x = normal_quantile(u.re);
                let f = normal_pdf(x);
                u.chain(x, 1.0 / f, x / (f * f))
            }
            Family::StudentT5 => {
                let x = student_t_quantile(u.re, STUDENT_DF);
                let f = student_t_pdf(x, STUDENT_DF);
                let g = (STUDENT_DF + 1.0) * x / (STUDENT_DF + x * x);
                u.chain(x, 1.0 / f, g / (f * f))
            }
            _ => u,
        }
    }

    fn natural_coordinate(&self, u: f64) -> f64 {
        match self.family {
            Family::Gaussian => normal_quantile(u),
            Family::StudentT5 => student_t_quantile(u, STUDENT_DF),
            _ => u,
        }
    }

    #[inline]
    fn kernel<S: Scalar>(&self, z: &[S], alpha: S) -> S {
        match self.family {
            Family::Clayton => kernels::clayton(z, alpha),
            Family::Frank => kernels::frank(z, alpha),
            Family::Gumbel => kernels::gumbel(z, alpha),
            Family::Gaussian => kernels::gaussian(z, alpha),
            Family::StudentT5 => kernels::student(z, alpha, STUDENT_DF, self.student_const),
        }
    }

    fn eval_dual(&self, u: &[f64], alpha: HyperDual, seed_coord: Option<usize>) -> HyperDual {
        let mut z = [HyperDual::cst(0.0); MAX_DIM];
        for (j, &uj) in u.iter().enumerate() {
            let seed = if seed_coord == Some(j) { 1.0 } else { 0.0 };
            z[j] = self.lift(HyperDual::new(uj, 0.0, seed, 0.0));
        }
        self.kernel(&z[..self.dim], alpha)
    }

    pub fn log_density(&self, u: &[f64], alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        self.check_point(u)?;
        let mut z = [0.0; MAX_DIM];
        for (j, &uj) in u.iter().enumerate() {
            z[j] = self.natural_coordinate(uj);
        }
        Ok(self.kernel(&z[..self.dim], alpha))
    }

    /// Score `psi(u; alpha) = d log c(u; alpha) / d alpha`.
    pub fn score(&self, u: &[f64], alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        self.check_point(u)?;
        Ok(self
            .eval_dual(u, HyperDual::new(alpha, 1.0, 0.0, 0.0), None)
            .e1)
    }

    /// `d psi / d alpha`, the second derivative of the log-density in alpha.
    pub fn score_dalpha(&self, u: &[f64], alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        self.check_point(u)?;
        Ok(self
            .eval_dual(u, HyperDual::new(alpha, 1.0, 1.0, 0.0), None)
            .e12)
    }

    /// `d psi / d u_j` (j is zero-based).
    pub fn score_partial_u(&self, u: &[f64], alpha: f64, j: usize) -> Result<f64> {
        self.check_alpha(alpha)?;
        self.check_point(u)?;
        if j >= self.dim {
            return Err(Error::LengthMismatch {
                left: self.dim,
                right: j + 1,
            });
        }
        Ok(self
            .eval_dual(u, HyperDual::new(alpha, 1.0, 0.0, 0.0), Some(j))
            .e12)
    }

    pub fn alpha_to_tau(&self, alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        Ok(match self.family {
            Family::Clayton => alpha / (alpha + 2.0),
            Family::Gumbel => 1.0 - 1.0 / alpha,
            Family::Frank => frank_tau(alpha),
            Family::Gaussian | Family::StudentT5 => std::f64::consts::FRAC_2_PI * alpha.asin(),
        })
    }

    /// `d tau / d alpha`.
    pub fn tau_derivative(&self, alpha: f64) -> Result<f64> {
        self.check_alpha(alpha)?;
        Ok(match self.family {
            Family::Clayton => 2.0 / ((alpha + 2.0) * (alpha + 2.0)),
            Family::Gumbel => 1.0 / (alpha * alpha),
            Family::Frank => frank_tau_derivative(alpha),
            Family::Gaussian | Family::StudentT5 => {
                std::f64::consts::FRAC_2_PI / (1.0 - alpha * alpha).sqrt()
            }
        })
    }

    /// Open interval of attainable Kendall's tau.
    pub fn tau_range(&self) -> (f64, f64) {
        match self.family {
            Family::Clayton | Family::Gumbel => (0.0, 1.0),
            Family::Frank if self.dim > 2 => (0.0, 1.0),
            Family::Frank => (-1.0, 1.0),
            Family::Gaussian | Family::StudentT5 => {
                let lo = self.domain().0;
                (std::f64::consts::FRAC_2_PI * lo.asin(), 1.0)
            }
        }
    }

    pub fn tau_to_alpha(&self, tau: f64) -> Result<f64> {
        let (lo, hi) = self.tau_range();
        let out_of_range = || Error::TauOutOfRange {
            family: self.family.name(),
            tau,
        };
        if !(tau > lo && tau < hi) || (self.family == Family::Frank && tau == 0.0) {
            return Err(out_of_range());
        }
        let alpha = match self.family {
            Family::Clayton => 2.0 * tau / (1.0 - tau),
            Family::Gumbel => 1.0 / (1.0 - tau),
            Family::Gaussian | Family::StudentT5 => (std::f64::consts::FRAC_PI_2 * tau).sin(),
            Family::Frank => invert_frank_tau(tau),
        };
        if self.in_domain(alpha) {
            Ok(alpha)
        } else {
            Err(out_of_range())
        }
    }

    /// Parameter interval corresponding to tau in `[-0.99, 0.99]` intersected
    /// with the attainable range; used to bracket score roots.
    pub fn search_interval(&self) -> (f64, f64) {
        let (tlo, thi) = self.tau_range();
        let lo_tau = (tlo + 1e-4).max(-0.99);
        let hi_tau = thi.min(0.99);
        let lo = self
            .tau_to_alpha(lo_tau)
            .unwrap_or_else(|_| self.domain().0);
        let hi = self
            .tau_to_alpha(hi_tau)
            .unwrap_or_else(|_| self.domain().1);
        (lo, hi)
    }

    /// Precomputes the kernel coordinates of every row, for repeated
    /// evaluation at different parameters.
    pub fn prepare(&self, rows: &crate::matrix::RowMatrix) -> Result<Prepared> {
        if rows.ncols() != self.dim {
            return Err(Error::LengthMismatch {
                left: self.dim,
                right: rows.ncols(),
            });
        }
        let mut coords = Vec::with_capacity(rows.nrows() * self.dim);
        for r in rows.rows() {
            self.check_point(r)?;
            coords.extend(r.iter().map(|&u| self.natural_coordinate(u)));
        }
        Ok(Prepared {
            copula: *self,
            n: rows.nrows(),
            coords,
        })
    }
}

fn invert_frank_tau(tau: f64) -> f64 {
    if tau < 0.0 {
        return -invert_frank_tau(-tau);
    }
    // tau(alpha) is increasing; bracket then Newton with bisection fallback
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while frank_tau(hi) < tau {
        lo = hi;
        hi *= 2.0;
    }
    let mut a = if tau < 0.05 {
        9.0 * tau
    } else {
        0.5 * (lo + hi)
    };
    if !(a > lo && a < hi) {
        a = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = frank_tau(a) - tau;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let mut next = a - f / frank_tau_derivative(a);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - a).abs() <= 1e-15 * a.abs() {
            a = next;
            break;
        }
        a = next;
    }
    a
}

/// Kernel coordinates of a sample, ready for repeated score evaluation.
#[derive(Debug, Clone)]
pub struct Prepared {
    copula: Copula,
    n: usize,
    coords: Vec<f64>,
}

impl Prepared {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn copula(&self) -> &Copula {
        &self.copula
    }

    fn row(&self, i: usize) -> &[f64] {
        let d = self.copula.dim;
        &self.coords[i * d..(i + 1) * d]
    }

    /// Returns `(sum_i psi_i, sum_i dpsi_i/dalpha)` at `alpha`.
    pub fn score_sums(&self, alpha: f64) -> (f64, f64) {
        let a = HyperDual::new(alpha, 1.0, 1.0, 0.0);
        let mut z = [HyperDual::cst(0.0); MAX_DIM];
        let d = self.copula.dim;
        let mut s = 0.0;
        let mut ds = 0.0;
        for i in 0..self.n {
            for (zj, &c) in z.iter_mut().zip(self.row(i)) {
                *zj = HyperDual::cst(c);
            }
            let v = self.copula.kernel(&z[..d], a);
            s += v.e1;
            ds += v.e12;
        }
        (s, ds)
    }

    /// Per-row score values.
    pub fn scores(&self, alpha: f64) -> Vec<f64> {
        let a = HyperDual::new(alpha, 1.0, 0.0, 0.0);
        let d = self.copula.dim;
        let mut z = [HyperDual::cst(0.0); MAX_DIM];
        (0..self.n)
            .map(|i| {
                for (zj, &c) in z.iter_mut().zip(self.row(i)) {
                    *zj = HyperDual::cst(c);
                }
                self.copula.kernel(&z[..d], a).e1
            })
            .collect()
    }

    /// Per-row `d psi / d u_j`, for all j, as a row-major n x d buffer.
    pub fn score_partials(&self, alpha: f64) -> Vec<f64> {
        let a = HyperDual::new(alpha, 1.0, 0.0, 0.0);
        let d = self.copula.dim;
        let mut out = Vec::with_capacity(self.n * d);
        let mut z = [HyperDual::cst(0.0); MAX_DIM];
        for i in 0..self.n {
            let row = self.row(i);
            for j in 0..d {
                for (k, (zk, &c)) in z.iter_mut().zip(row).enumerate() {
                    *zk = if k == j {
                        self.seed_coordinate(c)
                    } else {
                        HyperDual::cst(c)
                    };
                }
                out.push(self.copula.kernel(&z[..d], a).e12);
            }
        }
        out
    }

    /// Seeds `d/du` on an already transformed coordinate.
    fn seed_coordinate(&self, c: f64) -> HyperDual {
        let unit = HyperDual::new(c, 0.0, 1.0, 0.0);
        match self.copula.family {
            Family::Gaussian => {
                let f = normal_pdf(c);
                unit.chain(c, 1.0 / f, c / (f * f))
            }
            Family::StudentT5 => {
                let f = student_t_pdf(c, STUDENT_DF);
                let g = (STUDENT_DF + 1.0) * c / (STUDENT_DF + c * c);
                unit.chain(c, 1.0 / f, g / (f * f))
            }
            _ => unit,
        }
    }
}

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};

use super::{Copula, Family, STUDENT_DF};
use crate::error::Result;
use crate::matrix::RowMatrix;
use crate::special::{normal_cdf, student_t_cdf};

impl Copula {
    /// Draws `n` i.i.d. points from the copula. Rows with a coordinate that
    /// rounds onto {0, 1} are redrawn.
    pub fn sample<R: Rng + ?Sized>(&self, alpha: f64, n: usize, rng: &mut R) -> Result<RowMatrix> {
        self.check_alpha(alpha)?;
        let d = self.dim;
        let mut out = RowMatrix::zeros(n, d);
        let chol = if self.family.is_elliptical() {
            Some(equicorrelation_cholesky(alpha, d))
        } else {
            None
        };
        for i in 0..n {
            loop {
                let row = out.row_mut(i);
                match self.family {
                    Family::Clayton => clayton_row(alpha, row, rng),
                    Family::Gumbel => gumbel_row(alpha, row, rng),
                    Family::Frank if d == 2 => frank_conditional_row(alpha, row, rng),
                    Family::Frank => frank_frailty_row(alpha, row, rng),
                    Family::Gaussian | Family::StudentT5 => {
                        elliptical_row(self.family, chol.as_deref().unwrap(), row, rng)
                    }
                }
                if row.iter().all(|&v| v > 0.0 && v < 1.0) {
                    break;
                }
            }
        }
        Ok(out)
    }
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

fn clayton_row<R: Rng + ?Sized>(alpha: f64, row: &mut [f64], rng: &mut R) {
    // Gamma(1/alpha) frailty; generator inverse (1 + t)^(-1/alpha)
    let v: f64 = Gamma::new(1.0 / alpha, 1.0).unwrap().sample(rng);
    for u in row.iter_mut() {
        *u = (-(exp1(rng) / v).ln_1p() / alpha).exp();
    }
}

/// Positive stable variate with Laplace transform `exp(-t^a)`, `0 < a < 1`
/// (Kanter's representation, as used by Chambers-Mallows-Stuck).
fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a >= 1.0 {
        return 1.0;
    }
    let u: f64 = rng.sample(Open01);
    let theta = PI * u;
    let w = exp1(rng);
    let num = (a * theta).sin().powf(a / (1.0 - a)) * ((1.0 - a) * theta).sin();
    let den = theta.sin().powf(1.0 / (1.0 - a));
    (num / den / w).powf((1.0 - a) / a)
}

fn gumbel_row<R: Rng + ?Sized>(alpha: f64, row: &mut [f64], rng: &mut R) {
    let a = 1.0 / alpha;
    let v = positive_stable(a, rng);
    for u in row.iter_mut() {
        *u = (-(exp1(rng) / v).powf(a)).exp();
    }
}

/// `ln(w + (1 - w) e^-x)` without cancellation for small or large `x`.
fn ln_blend(w: f64, x: f64) -> f64 {
    let s = w + (1.0 - w) * (-x).exp();
    if s < 0.5 {
        s.ln()
    } else {
        ((1.0 - w) * (-x).exp_m1()).ln_1p()
    }
}

fn frank_conditional_row<R: Rng + ?Sized>(alpha: f64, row: &mut [f64], rng: &mut R) {
    let u: f64 = rng.sample(Open01);
    let w: f64 = rng.sample(Open01);
    // inverse of the conditional distribution of V given U = u
    let v = u + (ln_blend(w, alpha * u) - ln_blend(1.0 - w, alpha * (1.0 - u))) / alpha;
    row[0] = u;
    row[1] = v;
}

/// Logarithmic-series variate with `P(V = k) ∝ p^k / k`, `p = 1 - e^-alpha`
/// (Kemp's LK algorithm).
fn log_series<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let p = -(-alpha).exp_m1();
    let v: f64 = rng.sample(Open01);
    if v >= p {
        return 1.0;
    }
    let u: f64 = rng.sample(Open01);
    let q = -(-alpha * u).exp_m1();
    if v > q {
        1.0
    } else if v > q * q {
        2.0
    } else {
        (1.0 + v.ln() / q.ln()).floor()
    }
}

fn frank_frailty_row<R: Rng + ?Sized>(alpha: f64, row: &mut [f64], rng: &mut R) {
    let v = log_series(alpha, rng);
    let delta = -(-alpha).exp_m1();
    for u in row.iter_mut() {
        // generator inverse -ln(1 - delta e^-t) / alpha
        *u = -(-delta * (-exp1(rng) / v).exp()).ln_1p() / alpha;
    }
}

/// Lower Cholesky factor of the equicorrelation matrix, row-major d x d.
fn equicorrelation_cholesky(rho: f64, d: usize) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { rho };
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            l[i * d + j] = if i == j {
                (target - s).sqrt()
            } else {
                (target - s) / l[j * d + j]
            };
        }
    }
    l
}

fn elliptical_row<R: Rng + ?Sized>(family: Family, chol: &[f64], row: &mut [f64], rng: &mut R) {
    let d = row.len();
    let mut z = [0.0; super::kernels::MAX_DIM];
    for zk in z.iter_mut().take(d) {
        *zk = StandardNormal.sample(rng);
    }
    let scale = if family == Family::StudentT5 {
        let w: f64 = ChiSquared::new(STUDENT_DF).unwrap().sample(rng);
        (STUDENT_DF / w).sqrt()
    } else {
        1.0
    };
    for (i, u) in row.iter_mut().enumerate() {
        let x: f64 = (0..=i).map(|k| chol[i * d + k] * z[k]).sum::<f64>() * scale;
        *u = if family == Family::StudentT5 {
            student_t_cdf(x, STUDENT_DF)
        } else {
            normal_cdf(x)
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_series_mean() {
        let alpha = 3.0_f64;
        let p = 1.0 - (-alpha).exp();
        let expect = -p / ((1.0 - p) * (1.0 - p).ln());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| log_series(alpha, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - expect).abs() < 0.02 * expect, "{mean} vs {expect}");
    }

    #[test]
    fn positive_stable_laplace_transform() {
        let a = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let t = 0.7_f64;
        let lt: f64 = (0..n)
            .map(|_| (-t * positive_stable(a, &mut rng)).exp())
            .sum::<f64>()
            / n as f64;
        assert!((lt - (-t.powf(a)).exp()).abs() < 0.005);
    }

    #[test]
    fn cholesky_reproduces_matrix() {
        let l = equicorrelation_cholesky(0.3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                let t = if i == j { 1.0 } else { 0.3 };
                assert!((v - t).abs() < 1e-15);
            }
        }
    }
}

//! Independent oracles shared by the integration suites.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rescop::copulas::{Copula, Family};
use rescop::ranks::kendall_tau;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Integral of the bivariate density over `[clip, 1 - clip]^2`.
pub fn density_mass(family: Family, alpha: f64, nodes: usize, clip: f64) -> f64 {
    let c = Copula::bivariate(family);
    let (x, w) = gauss_legendre(nodes);
    let half = 0.5 * (1.0 - 2.0 * clip);
    let map = |t: f64| clip + half * (t + 1.0);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        for (xj, wj) in x.iter().zip(&w) {
            let u = [map(*xi), map(*xj)];
            s += wi * wj * c.log_density(&u, alpha).unwrap().exp();
        }
    }
    s * half * half
}

/// Kendall's tau by counting all pairs.
pub fn kendall_quadratic(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = (u[i] - u[j]).signum() * (v[i] - v[j]).signum();
            s += a as i64;
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

pub fn ks_uniform(sample: &mut [f64]) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-2)
}

/// Largest relative disagreement between the analytic derivatives
/// (score, its alpha-derivative and its u-partials) and central differences,
/// over `points` random interior points at random parameters.
pub fn max_derivative_error(family: Family, dim: usize, points: usize, seed: u64) -> f64 {
    let c = Copula::new(family, dim).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..points {
        let tau: f64 = rng.random_range(0.1..0.8);
        let a = c.tau_to_alpha(tau).unwrap();
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(0.02..0.98)).collect();
        let h = 1e-5 * a.abs().max(1.0);
        let ld = |x: &[f64], al: f64| c.log_density(x, al).unwrap();
        let fd_score = (ld(&u, a + h) - ld(&u, a - h)) / (2.0 * h);
        worst = worst.max(rel_err(c.score(&u, a).unwrap(), fd_score));
        let sc = |al: f64| c.score(&u, al).unwrap();
        let fd_dalpha = (sc(a + h) - sc(a - h)) / (2.0 * h);
        worst = worst.max(rel_err(c.score_dalpha(&u, a).unwrap(), fd_dalpha));
        for j in 0..dim {
            let hu = 1e-6;
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += hu;
            dn[j] -= hu;
            let fd = (c.score(&up, a).unwrap() - c.score(&dn, a).unwrap()) / (2.0 * hu);
            worst = worst.max(rel_err(c.score_partial_u(&u, a, j).unwrap(), fd));
        }
    }
    worst
}

/// Largest `|alpha_to_tau(tau_to_alpha(tau)) - tau|` over tau in {0.1, ..., 0.9}.
pub fn max_round_trip_error(family: Family) -> f64 {
    let c = Copula::bivariate(family);
    (1..=9)
        .map(|k| {
            let t = k as f64 / 10.0;
            (c.alpha_to_tau(c.tau_to_alpha(t).unwrap()).unwrap() - t).abs()
        })
        .fold(0.0, f64::max)
}

/// `(|empirical tau - tau|, worst margin KS distance)` for `n` draws.
pub fn sampler_check(family: Family, tau: f64, n: usize, seed: u64) -> (f64, f64) {
    let c = Copula::bivariate(family);
    let a = c.tau_to_alpha(tau).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = c.sample(a, n, &mut rng).unwrap();
    let mut u = m.column(0);
    let mut v = m.column(1);
    let dev = (kendall_tau(&u, &v).unwrap() - tau).abs();
    let ks = ks_uniform(&mut u).max(ks_uniform(&mut v));
    (dev, ks)
}

/// Clayton copula cdf.
pub fn clayton_cdf(u: f64, v: f64, a: f64) -> f64 {
    (u.powf(-a) + v.powf(-a) - 1.0).powf(-1.0 / a)
}

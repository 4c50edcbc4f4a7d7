//! Scalar special functions shared by the margin laws and the copula kernels.
//!
//! `erfc` comes from `libm`, `ln_gamma` and the regularized incomplete beta from `statrs`;
//! the quantile functions and the Debye integral are computed here.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::{beta::beta_reg, gamma::ln_gamma};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation followed by one
/// Halley step on the cdf. `p` must lie in (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p > 0.5 {
        // 1 - p is exact here
        return -normal_quantile_lower(1.0 - p);
    }
    normal_quantile_lower(p)
}

fn normal_quantile_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Log normalizing constant of the Student t density with `df` degrees of freedom.
fn student_t_log_norm(df: f64) -> f64 {
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln()
}

pub fn student_t_pdf(x: f64, df: f64) -> f64 {
    (student_t_log_norm(df) - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp()
}

pub fn student_t_cdf(x: f64, df: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let x2 = x * x;
    if x2 < df {
        let half = 0.5 * beta_reg(0.5, 0.5 * df, x2 / (df + x2));
        if x >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x2));
        if x >= 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

/// Student t quantile by safeguarded Newton iteration on the incomplete-beta cdf.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        return -student_t_quantile(1.0 - p, df);
    }
    // lower half: root is negative
    let mut hi = 0.0_f64;
    let mut lo = -1.0_f64;
    while student_t_cdf(lo, df) > p {
        hi = lo;
        lo *= 2.0;
        if !lo.is_finite() {
            return f64::NEG_INFINITY;
        }
    }
    let z = normal_quantile(p);
    let mut x = if z > lo && z < hi { z } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let f = student_t_cdf(x, df) - p;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = student_t_pdf(x, df);
        let mut next = x - f / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` on `[a, b]`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
        const XK: [f64; 8] = [
            0.991_455_371_120_812_6,
            0.949_107_912_342_758_5,
            0.864_864_423_359_769_1,
            0.741_531_185_599_394_4,
            0.586_087_235_467_691_1,
            0.405_845_151_377_397_2,
            0.207_784_955_007_898_5,
            0.0,
        ];
        const WK: [f64; 8] = [
            0.022_935_322_010_529_22,
            0.063_092_092_629_978_55,
            0.104_790_010_322_250_2,
            0.140_653_259_715_525_9,
            0.169_004_726_639_267_9,
            0.190_350_578_064_785_4,
            0.204_432_940_075_298_9,
            0.209_482_141_084_727_8,
        ];
        const WG: [f64; 4] = [
            0.129_484_966_168_869_7,
            0.279_705_391_489_276_7,
            0.381_830_050_505_118_9,
            0.417_959_183_673_469_4,
        ];
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut kron = WK[7] * fc;
        let mut gauss = WG[3] * fc;
        for k in 0..7 {
            let dx = h * XK[k];
            let s = f(c - dx) + f(c + dx);
            kron += WK[k] * s;
            if k % 2 == 1 {
                gauss += WG[k / 2] * s;
            }
        }
        (kron * h, ((kron - gauss) * h).abs())
    }

    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return val;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth - 1) + recurse(f, m, b, 0.5 * tol, depth - 1)
    }

    recurse(f, a, b, tol, 30)
}

/// First-order Debye function `D1(x) = (1/x) * integral_0^x t / (e^t - 1) dt`.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - 0.5 * x;
    }
    if x < 1e-3 {
        // 1 - x/4 + x^2/36 - x^4/3600
        let x2 = x * x;
        return 1.0 - 0.25 * x + x2 / 36.0 - x2 * x2 / 3600.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    integrate_adaptive(&integrand, 0.0, x, 1e-15 * x) / x
}

/// Kendall's tau of the Frank copula as a function of its parameter.
pub fn frank_tau(alpha: f64) -> f64 {
    if alpha.abs() < 1e-3 {
        // odd series around independence
        let a2 = alpha * alpha;
        return alpha / 9.0 - alpha * a2 / 900.0 + alpha * a2 * a2 / 52_920.0;
    }
    1.0 - 4.0 / alpha * (1.0 - debye1(alpha))
}

/// `d tau / d alpha` for the Frank copula.
pub fn frank_tau_derivative(alpha: f64) -> f64 {
    if alpha.abs() < 1e-3 {
        let a2 = alpha * alpha;
        return 1.0 / 9.0 - a2 / 300.0 + 5.0 * a2 * a2 / 52_920.0;
    }
    let d1 = debye1(alpha);
    let dd1 = -d1 / alpha + 1.0 / alpha.exp_m1();
    4.0 / (alpha * alpha) * (1.0 - d1) + 4.0 / alpha * dd1
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

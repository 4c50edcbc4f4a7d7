//! Closed-form log-densities, generic over the scalar type so that the same
//! expression yields values (f64) and exact derivatives (HyperDual).
//!
//! Archimedean kernels take the uniforms `u`; elliptical kernels take the
//! quantile-transformed coordinates `x`.

use super::dual::Scalar;

pub const MAX_DIM: usize = 16;

pub fn clayton<S: Scalar>(u: &[S], a: S) -> S {
    let d = u.len();
    let mut acc = S::cst(0.0);
    for k in 1..d {
        acc = acc + (a * k as f64 + 1.0).ln();
    }
    let mut sum_ln_u = S::cst(0.0);
    let mut t = [S::cst(0.0); MAX_DIM];
    let mut m = f64::NEG_INFINITY;
    for (j, &uj) in u.iter().enumerate() {
        let l = uj.ln();
        sum_ln_u = sum_ln_u + l;
        t[j] = -(a * l);
        m = m.max(t[j].re());
    }
    // ln S with S = sum u_j^-a - (d - 1)
    let ln_s = if m < 0.5 {
        let mut s_minus_one = S::cst(0.0);
        for tj in &t[..d] {
            s_minus_one = s_minus_one + tj.exp_m1();
        }
        s_minus_one.ln_1p()
    } else {
        let mut inner = S::cst(-((d - 1) as f64) * (-m).exp());
        for tj in &t[..d] {
            inner = inner + (*tj - m).exp();
        }
        inner.ln() + m
    };
    acc - (a + 1.0) * sum_ln_u - (a.recip() + d as f64) * ln_s
}

/// Stirling numbers of the second kind `S(n, k)` for `n <= MAX_DIM`.
fn stirling2(n: usize, k: usize) -> f64 {
    let mut row = [0.0_f64; MAX_DIM + 1];
    row[0] = 1.0;
    for i in 1..=n {
        let mut next = [0.0_f64; MAX_DIM + 1];
        for j in 1..=i {
            next[j] = j as f64 * row[j] + row[j - 1];
        }
        row = next;
    }
    row[k]
}

/// `ln(1 - e^-x)` for `x > 0`, accurate for small and large `x`.
fn ln_one_minus_exp_neg<S: Scalar>(x: S) -> S {
    if x.re() > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

pub fn frank<S: Scalar>(u: &[S], a: S) -> S {
    if a.re() < 0.0 {
        // c_{-a}(u, v) = c_a(u, 1 - v); negative parameters exist only for d = 2
        return frank(&[u[0], S::cst(1.0) - u[1]], -a);
    }
    let d = u.len();
    let ln_a = a.ln();
    // z = prod_j (1 - e^{-a u_j}) / (1 - e^{-a})^(d-1), kept in log form so
    // that 1 - z does not cancel when z is close to 1
    let mut ln_z = ln_one_minus_exp_neg(a) * -((d - 1) as f64);
    let mut acc = S::cst(0.0);
    for &uj in u {
        let au = a * uj;
        let ln_aj = ln_one_minus_exp_neg(au);
        ln_z = ln_z + ln_aj;
        acc = acc + ln_a - ln_aj - au;
    }
    let z = ln_z.exp();
    // polylog Li_{-(d-1)}(z) = sum_k k! S(d, k+1) w^(k+1), w = z / (1 - z)
    let w = z / -ln_z.exp_m1();
    let mut li = S::cst(0.0);
    let mut wp = w;
    let mut fact = 1.0;
    for k in 0..d {
        if k > 0 {
            fact *= k as f64;
        }
        li = li + wp * (fact * stirling2(d, k + 1));
        wp = wp * w;
    }
    acc + li.ln() - ln_a
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

pub fn gumbel<S: Scalar>(u: &[S], a: S) -> S {
    let d = u.len();
    let beta = a.recip();
    let ln_a = a.ln();
    let mut acc = S::cst(0.0);
    let mut t = [S::cst(0.0); MAX_DIM];
    let mut m = f64::NEG_INFINITY;
    for (j, &uj) in u.iter().enumerate() {
        let x = -uj.ln();
        let lx = x.ln();
        acc = acc + ln_a + (a - 1.0) * lx + x;
        t[j] = a * lx;
        m = m.max(t[j].re());
    }
    let mut inner = S::cst(0.0);
    for tj in &t[..d] {
        inner = inner + (*tj - m).exp();
    }
    // ln of the generator argument sum_j (-ln u_j)^a
    let ln_t = inner.ln() + m;
    let s = (beta * ln_t).exp();

    // |psi^(k)(t)| t^k / psi(t) via the Bell-polynomial recurrence on the
    // scaled derivatives of -t^beta (all terms share one sign).
    let mut h = [S::cst(0.0); MAX_DIM + 1];
    let mut c = beta;
    for (mm, hm) in h.iter_mut().enumerate().take(d + 1).skip(1) {
        if mm > 1 {
            c = c * (S::cst((mm - 1) as f64) - beta);
        }
        *hm = c * s;
    }
    let mut b = [S::cst(0.0); MAX_DIM + 1];
    b[0] = S::cst(1.0);
    for k in 0..d {
        let mut next = S::cst(0.0);
        for i in 0..=k {
            next = next + b[k - i] * h[i + 1] * binomial(k, i);
        }
        b[k + 1] = next;
    }
    acc - s + b[d].ln() - ln_t * d as f64
}

fn equicorrelation_terms<S: Scalar>(x: &[S], r: S) -> (S, S, S) {
    let d = x.len() as f64;
    let mut sq = S::cst(0.0);
    let mut sum = S::cst(0.0);
    for &xj in x {
        sq = sq + xj * xj;
        sum = sum + xj;
    }
    let k = r * (d - 1.0) + 1.0;
    let ln_det = (-r).ln_1p() * (d - 1.0) + k.ln();
    let qf = (sq - r * sum * sum / k) / (S::cst(1.0) - r);
    (ln_det, qf, sq)
}

pub fn gaussian<S: Scalar>(x: &[S], r: S) -> S {
    let (ln_det, qf, sq) = equicorrelation_terms(x, r);
    -(ln_det + qf - sq) * 0.5
}

/// `norm_const` is the dimension-dependent gamma-function constant.
pub fn student<S: Scalar>(x: &[S], r: S, df: f64, norm_const: f64) -> S {
    let d = x.len() as f64;
    let (ln_det, qf, _) = equicorrelation_terms(x, r);
    let mut marg = S::cst(0.0);
    for &xj in x {
        marg = marg + (xj * xj / df).ln_1p();
    }
    S::cst(norm_const) - ln_det * 0.5 - (qf / df).ln_1p() * (0.5 * (df + d))
        + marg * (0.5 * (df + 1.0))
}

pub fn student_norm_const(df: f64, d: usize) -> f64 {
    use crate::special::ln_gamma_fn as lg;
    let d = d as f64;
    lg(0.5 * (df + d)) + (d - 1.0) * lg(0.5 * df) - d * lg(0.5 * (df + 1.0))
}

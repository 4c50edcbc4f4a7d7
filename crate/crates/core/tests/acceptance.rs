//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.
//!
//! `cargo test -p rescop --release --test acceptance` runs them alone.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rescop::copulas::{Copula, Family};
use rescop::estimate::{
    attach_std_errors, estimate_mple, estimate_mple_trimmed, estimate_tau_inversion, TrimPolicy,
};
use rescop::montecarlo::{
    generate_replication, replication_samples, run_replications, run_scenario, Margins,
    McEstimator, MetricRow, Scenario,
};
use rescop::ranks::{kendall_tau, pseudo_observations};
use rescop::RowMatrix;

const SEED: u64 = 20_240_101;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn row(rows: &[MetricRow], e: McEstimator) -> &MetricRow {
    rows.iter().find(|r| r.estimator == e).unwrap()
}

fn pl_cell(family: Family, margins: Margins) -> MetricRow {
    let s = Scenario::new(family, 0.5, margins, 1000, 1000)
        .with_seed(SEED)
        .with_estimators(&[McEstimator::Pl]);
    run_scenario(&s).unwrap().remove(0)
}

fn c1_regular_clayton() -> Outcome {
    let r = pl_cell(Family::Clayton, Margins::TT);
    let pass = (r.bias_x100 - -0.02).abs() <= 0.25 && (1.30..=1.70).contains(&r.sd_x100);
    check(
        pass,
        format!("pl bias {:.3}, SD {:.3}", r.bias_x100, r.sd_x100),
    )
}

fn c2_frank_robustness() -> Outcome {
    let r = pl_cell(Family::Frank, Margins::NE);
    let pass = r.bias_x100.abs() < 0.30 && (1.25..=1.60).contains(&r.sd_x100);
    check(
        pass,
        format!("pl bias {:.3}, SD {:.3}", r.bias_x100, r.sd_x100),
    )
}

fn c3_non_regular_signature() -> Outcome {
    let s = Scenario::new(Family::Clayton, 0.75, Margins::NE, 1000, 200)
        .with_seed(SEED)
        .with_estimators(&[McEstimator::Ik, McEstimator::Pl, McEstimator::PlStar]);
    let rows = run_scenario(&s).unwrap();
    let ik = row(&rows, McEstimator::Ik).bias_x100;
    let pl = row(&rows, McEstimator::Pl).bias_x100;
    let star = row(&rows, McEstimator::PlStar).bias_x100;
    let pass = pl < -2.5
        && ik > -1.5
        && ik.abs() < star.abs()
        && star.abs() < pl.abs()
        && pl.abs() >= 3.0 * ik.abs();
    check(
        pass,
        format!("bias ik {ik:.3}, pl {pl:.3}, pl_star {star:.3}"),
    )
}

fn c4_oracle_equivalence() -> Outcome {
    let s = Scenario::new(Family::Clayton, 0.5, Margins::TT, 2000, 200)
        .with_seed(SEED)
        .with_estimators(&[McEstimator::PlOracle, McEstimator::Pl]);
    let diffs: Vec<f64> = run_replications(&s)
        .unwrap()
        .iter()
        .map(|o| o[&McEstimator::Pl].unwrap() - o[&McEstimator::PlOracle].unwrap())
        .collect();
    let k = diffs.len() as f64;
    let mean_abs = diffs.iter().map(|d| d.abs()).sum::<f64>() / k;
    let mean = diffs.iter().sum::<f64>() / k;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    check(
        mean_abs < 0.005 && sd < 0.01,
        format!(
            "mean |diff| {mean_abs:.5}, SD {sd:.5} over {} pairs",
            diffs.len()
        ),
    )
}

fn c5_kernel_suite() -> Outcome {
    let mut fails = Vec::new();
    let mut worst_fd = 0.0_f64;
    let mut worst_rt = 0.0_f64;
    let mut worst_tau = 0.0_f64;
    for (k, family) in Family::ALL.into_iter().enumerate() {
        let fd = max_derivative_error(family, 2, 100, 100 + k as u64);
        worst_fd = worst_fd.max(fd);
        if fd >= 1e-5 {
            fails.push(format!("{family} derivatives {fd:.2e}"));
        }
        let rt = max_round_trip_error(family);
        worst_rt = worst_rt.max(rt);
        if rt >= 1e-8 {
            fails.push(format!("{family} round trip {rt:.2e}"));
        }
        let a = Copula::bivariate(family).tau_to_alpha(0.5).unwrap();
        let mass = density_mass(family, a, 128, 1e-6);
        if !(0.995..=1.005).contains(&mass) {
            fails.push(format!("{family} mass {mass:.5}"));
        }
        for tau in [0.5, 0.75] {
            let (dev, _) = sampler_check(family, tau, 100_000, 1000 + k as u64);
            worst_tau = worst_tau.max(dev);
            if dev >= 0.01 {
                fails.push(format!("{family} sampler tau={tau} off by {dev:.4}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let u: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
    let v: Vec<f64> = u.iter().map(|x| x + rng.random::<f64>()).collect();
    if kendall_tau(&u, &v).unwrap() != kendall_quadratic(&u, &v) {
        fails.push("kendall merge sort differs from pair count".into());
    }
    let detail = if fails.is_empty() {
        format!(
            "worst derivative rel err {worst_fd:.1e}, round trip {worst_rt:.1e}, sampler tau {worst_tau:.4}"
        )
    } else {
        fails.join("; ")
    };
    check(fails.is_empty(), detail)
}

fn c6_pseudo_observations() -> Outcome {
    let c = Copula::bivariate(Family::Clayton);
    let n = 1500;
    let m = c
        .sample(2.0, n, &mut ChaCha8Rng::seed_from_u64(SEED))
        .unwrap();
    let p = pseudo_observations(&m).unwrap();
    let grid: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
    let exact = (0..2).all(|j| {
        let mut col = p.column(j);
        col.sort_by(f64::total_cmp);
        col == grid
    });
    // strictly increasing transforms of each column
    let moved = RowMatrix::from_columns(&[
        m.column(0)
            .iter()
            .map(|x| (x / (1.0 - x)).ln())
            .collect::<Vec<_>>(),
        m.column(1)
            .iter()
            .map(|x| x.powi(3) * 1e4 - 7.0)
            .collect::<Vec<_>>(),
    ])
    .unwrap();
    let q = pseudo_observations(&moved).unwrap();
    let policy = TrimPolicy::default();
    let same = p.matrix() == q.matrix()
        && estimate_mple(&p, Family::Clayton, None).unwrap()
            == estimate_mple(&q, Family::Clayton, None).unwrap()
        && estimate_mple_trimmed(&p, Family::Clayton, &policy).unwrap()
            == estimate_mple_trimmed(&q, Family::Clayton, &policy).unwrap()
        && estimate_tau_inversion(&p, Family::Clayton).unwrap()
            == estimate_tau_inversion(&q, Family::Clayton).unwrap();
    check(
        exact && same,
        format!("grid-exact columns: {exact}, bit-identical estimates: {same}"),
    )
}

fn c7_sandwich_calibration() -> Outcome {
    let s = Scenario::new(Family::Frank, 0.5, Margins::NE, 2000, 500).with_seed(SEED);
    let fits: Vec<(f64, f64)> = (0..s.reps)
        .into_par_iter()
        .map(|r| {
            let rep = generate_replication(&s, r).unwrap();
            let (_, residual) = replication_samples(&s, &rep).unwrap();
            let mut fit = estimate_mple(&residual, Family::Frank, None).unwrap();
            attach_std_errors(&mut fit, &residual, Family::Frank).unwrap();
            (fit.tau_hat, fit.std_error_tau.unwrap())
        })
        .collect();
    let k = fits.len() as f64;
    let mean = fits.iter().map(|f| f.0).sum::<f64>() / k;
    let sd = (fits.iter().map(|f| (f.0 - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    let mut se: Vec<f64> = fits.iter().map(|f| f.1).collect();
    se.sort_by(f64::total_cmp);
    let median = 0.5 * (se[se.len() / 2 - 1] + se[se.len() / 2]);
    let ratio = median / sd;
    check(
        (0.7..=1.3).contains(&ratio),
        format!("median SE {median:.5} / MC SD {sd:.5} = {ratio:.3}"),
    )
}

fn c8_determinism() -> Outcome {
    let args = [
        "rescop",
        "--seed",
        "7",
        "--threads",
        "4",
        "simulate",
        "--family",
        "clayton",
        "--tau",
        "0.5",
        "--margins",
        "tt",
        "--n",
        "300",
        "--reps",
        "40",
        "--format",
        "csv",
    ];
    let run = || {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = rescop::cli::run(args, &mut out, &mut err);
        (code, out)
    };
    let (c1, a) = run();
    let (c2, b) = run();
    check(
        c1 == 0 && c2 == 0 && a == b && !a.is_empty(),
        format!(
            "exit codes {c1}/{c2}, {} bytes, identical: {}",
            a.len(),
            a == b
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 regular Clayton/t cell", c1_regular_clayton),
        ("2 Frank robustness under N+E", c2_frank_robustness),
        ("3 non-regularity signature", c3_non_regular_signature),
        ("4 oracle equivalence", c4_oracle_equivalence),
        ("5 numerical kernels", c5_kernel_suite),
        ("6 pseudo-observation invariants", c6_pseudo_observations),
        ("7 sandwich SE calibration", c7_sandwich_calibration),
        ("8 determinism", c8_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} criterion {name}: {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

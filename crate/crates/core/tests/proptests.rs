mod common;

use common::kendall_quadratic;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rescop::copulas::{Copula, Family};
use rescop::diagnose::{check_applicability, classify_beta, Verdict};
use rescop::estimate::{estimate_mple, estimate_mple_trimmed, estimate_tau_inversion, TrimPolicy};
use rescop::marginals::{fit_marginal, ErrorLaw, MarginalSpec};
use rescop::montecarlo::summarize;
use rescop::ranks::{kendall_tau, pseudo_observations};
use rescop::{read_csv, ObservationSet, RowMatrix};

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

fn copula_draws(family: Family, tau: f64, n: usize, seed: u64) -> RowMatrix {
    let c = Copula::bivariate(family);
    let a = c.tau_to_alpha(tau).unwrap();
    c.sample(a, n, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap()
}

fn map_columns(m: &RowMatrix, f: [fn(f64) -> f64; 2]) -> RowMatrix {
    let cols: Vec<Vec<f64>> = (0..2)
        .map(|j| m.column(j).into_iter().map(f[j]).collect())
        .collect();
    RowMatrix::from_columns(&cols).unwrap()
}

// strictly increasing on (0, 1)
const TRANSFORMS: [fn(f64) -> f64; 4] = [
    |x| x.ln(),
    |x| 3.0 * x * x * x + 7.0,
    |x| (x / (1.0 - x)).ln().atan(),
    |x| -1.0 / x,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pseudo_columns_are_permutations_of_the_grid(n in 2usize..300, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..3 * n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let p = pseudo_observations(&RowMatrix::from_row_major(n, 3, data).unwrap()).unwrap();
        for j in 0..3 {
            let mut col = p.column(j);
            col.sort_by(f64::total_cmp);
            for (k, v) in col.iter().enumerate() {
                prop_assert_eq!(*v, (k + 1) as f64 / (n + 1) as f64);
            }
        }
    }

    #[test]
    fn pseudo_observations_are_permutation_equivariant(n in 2usize..200, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..2 * n).map(|_| rng.random()).collect();
        let m = RowMatrix::from_row_major(n, 2, data).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut shuffled = RowMatrix::zeros(n, 2);
        for (i, &p) in perm.iter().enumerate() {
            shuffled.row_mut(i).copy_from_slice(m.row(p));
        }
        let a = pseudo_observations(&m).unwrap();
        let b = pseudo_observations(&shuffled).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(b.row(i), a.row(p));
        }
    }

    #[test]
    fn kendall_matches_pair_count_and_symmetries(n in 2usize..400, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let v: Vec<f64> = u.iter().map(|x| x + 0.3 * rng.random::<f64>()).collect();
        let t = kendall_tau(&u, &v).unwrap();
        prop_assert_eq!(t, kendall_quadratic(&u, &v));
        prop_assert_eq!(t, kendall_tau(&v, &u).unwrap());
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert_eq!(kendall_tau(&u, &neg).unwrap(), -t);
    }

    #[test]
    fn estimators_are_bit_identical_under_monotone_transforms(
        fam in family(),
        tau in 0.2f64..0.7,
        seed: u64,
        f in prop::sample::select(TRANSFORMS.to_vec()),
        g in prop::sample::select(TRANSFORMS.to_vec()),
    ) {
        let m = copula_draws(fam, tau, 300, seed);
        let base = pseudo_observations(&m).unwrap();
        let moved = pseudo_observations(&map_columns(&m, [f, g])).unwrap();
        prop_assert_eq!(base.matrix(), moved.matrix());
        let policy = TrimPolicy::default();
        prop_assert_eq!(
            estimate_tau_inversion(&base, fam).unwrap(),
            estimate_tau_inversion(&moved, fam).unwrap()
        );
        prop_assert_eq!(
            estimate_mple(&base, fam, None).unwrap(),
            estimate_mple(&moved, fam, None).unwrap()
        );
        prop_assert_eq!(
            estimate_mple_trimmed(&base, fam, &policy).unwrap(),
            estimate_mple_trimmed(&moved, fam, &policy).unwrap()
        );
    }

    #[test]
    fn estimates_stay_inside_the_domain(fam in family(), tau in 0.05f64..0.9, n in 30usize..400, seed: u64) {
        let c = Copula::bivariate(fam);
        let p = pseudo_observations(&copula_draws(fam, tau, n, seed)).unwrap();
        let reports = [
            estimate_tau_inversion(&p, fam),
            estimate_mple(&p, fam, None),
            estimate_mple_trimmed(&p, fam, &TrimPolicy::default()),
        ];
        for r in reports.into_iter().flatten() {
            prop_assert!(c.in_domain(r.alpha_hat), "{fam}: {}", r.alpha_hat);
            prop_assert!(r.score_at_root.abs() < 1e-10 * r.n_used as f64 || r.estimator.name() == "tau_inversion");
        }
    }

    #[test]
    fn summary_satisfies_the_variance_identity(values in prop::collection::vec(-1.0f64..1.0, 2..200), truth in -1.0f64..1.0) {
        // rmse^2 = bias^2 + (k - 1)/k * sd^2
        let k = values.len() as f64;
        let (bias, sd, rmse) = summarize(&values, truth);
        let rhs = bias * bias + (k - 1.0) / k * sd * sd;
        prop_assert!((rmse * rmse - rhs).abs() <= 1e-9 * rhs.max(1.0));
        prop_assert!(sd >= 0.0 && rmse >= bias.abs() - 1e-12);
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_the_design(n in 5usize..200, seed: u64, b0 in -5.0f64..5.0, b1 in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y1: Vec<f64> = x.iter().map(|xi| b0 + b1 * xi + rng.random::<f64>()).collect();
        let y2: Vec<f64> = x.iter().map(|_| rng.random::<f64>()).collect();
        let data = ObservationSet::new(
            RowMatrix::from_columns(&[y1, y2]).unwrap(),
            RowMatrix::from_columns(std::slice::from_ref(&x)).unwrap(),
        ).unwrap();
        let fit = fit_marginal(&data, &MarginalSpec::location_only(0)).unwrap();
        let s0: f64 = fit.residuals.iter().sum();
        let s1: f64 = fit.residuals.iter().zip(&x).map(|(r, xi)| r * xi).sum();
        prop_assert!(s0.abs() < 1e-9 * n as f64 && s1.abs() < 1e-9 * n as f64, "{s0} {s1}");
    }

    #[test]
    fn residuals_absorb_covariate_shifts(n in 5usize..200, seed: u64, c in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let shifted: Vec<f64> = y.iter().zip(&x).map(|(yi, xi)| yi + c * xi).collect();
        let build = |y: &[f64]| ObservationSet::new(
            RowMatrix::from_columns(&[y.to_vec(), y.to_vec()]).unwrap(),
            RowMatrix::from_columns(std::slice::from_ref(&x)).unwrap(),
        ).unwrap();
        let spec = MarginalSpec::location_only(0);
        let a = fit_marginal(&build(&y), &spec).unwrap();
        let b = fit_marginal(&build(&shifted), &spec).unwrap();
        for (ra, rb) in a.residuals.iter().zip(&b.residuals) {
            prop_assert!((ra - rb).abs() < 1e-8);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(n in 2usize..50, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random::<f64>() * 1e6 - 5e5).collect() };
        let data = ObservationSet::new(
            RowMatrix::from_row_major(n, 2, draw(2 * n)).unwrap(),
            RowMatrix::from_row_major(n, 3, draw(3 * n)).unwrap(),
        ).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice(), 2, 3).unwrap(), data);
    }

    #[test]
    fn laws_round_trip_through_the_quantile(mean in -5.0f64..5.0, scale in 0.1f64..10.0, df in 2.5f64..30.0, u in 1e-6f64..(1.0 - 1e-6)) {
        let laws = [
            ErrorLaw::Normal { mean, sd: scale },
            ErrorLaw::Exponential { mean: scale },
            ErrorLaw::Uniform { lo: mean, hi: mean + scale },
            ErrorLaw::StudentT { df },
        ];
        for law in laws {
            let back = law.cdf(law.quantile(u).unwrap());
            prop_assert!((back - u).abs() < 1e-10, "{law}: {back} vs {u}");
        }
    }

    #[test]
    fn beta_is_affine_equivariant(mean in -100.0f64..100.0, scale in 0.01f64..100.0) {
        let pairs = [
            (ErrorLaw::STANDARD_NORMAL, ErrorLaw::Normal { mean, sd: scale }),
            (ErrorLaw::SYMMETRIC_UNIFORM, ErrorLaw::Uniform { lo: mean - scale, hi: mean + scale }),
        ];
        for (base, moved) in pairs {
            prop_assert_eq!(classify_beta(&base).unwrap().beta_max, classify_beta(&moved).unwrap().beta_max);
        }
    }

    #[test]
    fn applicability_is_monotone_in_beta(fam in family(), k in 0usize..3, mask in 0u8..8) {
        // either guarantee certifies equivalence; only losing it is a downgrade
        let rank = |v: Verdict| match v {
            Verdict::NoGuarantee => 0,
            Verdict::Theorem1 | Verdict::Theorem2 => 1,
        };
        let flat = [ErrorLaw::UNIT_EXPONENTIAL, ErrorLaw::SYMMETRIC_UNIFORM];
        let smooth = [ErrorLaw::STANDARD_NORMAL, ErrorLaw::STUDENT_T5];
        let mut laws: Vec<ErrorLaw> = (0..3)
            .map(|j| if mask >> j & 1 == 1 { smooth[j % 2] } else { flat[j % 2] })
            .collect();
        let before = check_applicability(fam, &laws).unwrap().verdict;
        laws[k] = smooth[k % 2];
        let after = check_applicability(fam, &laws).unwrap().verdict;
        prop_assert!(rank(after) >= rank(before), "{fam}: {before:?} -> {after:?}");
    }
}

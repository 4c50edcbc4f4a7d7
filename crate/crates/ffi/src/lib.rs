//! C ABI for `rescop`.
//!
//! Every function returns a [`RescopStatus`]. On failure a message is stored
//! per thread and can be read with [`rescop_last_error_message`]. Handles are
//! created by `*_new`/`*_from_*` functions and must be released with the
//! matching `*_free`. Matrices are row-major `double` buffers.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rescop::copulas::{Copula, Family};
use rescop::estimate::{attach_std_errors, estimate, fit_pipeline, Estimator, TrimPolicy};
use rescop::marginals::{MarginalSpec, Transformation};
use rescop::montecarlo::{render_table, run_scenario, Scenario, TableFormat};
use rescop::ranks::{kendall_tau, pseudo_observations, PseudoSample};
use rescop::{Error, ObservationSet, RowMatrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or inconsistent input data.
    InputError = 3,
    /// Estimation or evaluation failed numerically (no root, singular information, ...).
    NumericalError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescopFamily {
    Clayton = 0,
    Frank = 1,
    Gumbel = 2,
    Gaussian = 3,
    StudentT5 = 4,
}

impl From<RescopFamily> for Family {
    fn from(f: RescopFamily) -> Self {
        match f {
            RescopFamily::Clayton => Family::Clayton,
            RescopFamily::Frank => Family::Frank,
            RescopFamily::Gumbel => Family::Gumbel,
            RescopFamily::Gaussian => Family::Gaussian,
            RescopFamily::StudentT5 => Family::StudentT5,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescopEstimator {
    TauInversion = 0,
    Mple = 1,
    MpleTrimmed = 2,
}

impl From<RescopEstimator> for Estimator {
    fn from(e: RescopEstimator) -> Self {
        match e {
            RescopEstimator::TauInversion => Estimator::TauInversion,
            RescopEstimator::Mple => Estimator::Mple,
            RescopEstimator::MpleTrimmed => Estimator::MpleTrimmed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescopTableFormat {
    Csv = 0,
    Markdown = 1,
}

/// Estimation result. Standard errors are NaN when not computed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescopReport {
    pub estimator: RescopEstimator,
    pub alpha_hat: f64,
    pub tau_hat: f64,
    pub std_error_alpha: f64,
    pub std_error_tau: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_used: usize,
    pub score_at_root: f64,
}

impl From<&rescop::EstimateReport> for RescopReport {
    fn from(r: &rescop::EstimateReport) -> Self {
        Self {
            estimator: match r.estimator {
                Estimator::TauInversion => RescopEstimator::TauInversion,
                Estimator::Mple => RescopEstimator::Mple,
                Estimator::MpleTrimmed => RescopEstimator::MpleTrimmed,
            },
            alpha_hat: r.alpha_hat,
            tau_hat: r.tau_hat,
            std_error_alpha: r.std_error_alpha.unwrap_or(f64::NAN),
            std_error_tau: r.std_error_tau.unwrap_or(f64::NAN),
            iterations: r.iterations,
            converged: r.converged,
            n_used: r.n_used,
            score_at_root: r.score_at_root,
        }
    }
}

/// Opaque pseudo-observation sample.
pub struct RescopPseudoSample {
    inner: PseudoSample,
}

/// Opaque copula of a fixed family and dimension.
pub struct RescopCopula {
    inner: Copula,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<(CString, CString)>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String, kind: &'static str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    let k = CString::new(kind).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some((c, k)));
}

enum Failure {
    Null(&'static str),
    Argument(String),
    Buffer { need: usize, have: usize },
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

/// Runs `f`, recording failures and converting panics.
fn guard<F: FnOnce() -> FfiResult>(f: F) -> RescopStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RescopStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer: {name}"), "null_pointer");
            RescopStatus::NullPointer
        }
        Ok(Err(Failure::Argument(m))) => {
            set_last_error(m, "invalid_argument");
            RescopStatus::InvalidArgument
        }
        Ok(Err(Failure::Buffer { need, have })) => {
            set_last_error(
                format!("buffer holds {have} values, {need} required"),
                "buffer_too_small",
            );
            RescopStatus::BufferTooSmall
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string(), e.kind());
            if e.is_numerical() {
                RescopStatus::NumericalError
            } else {
                RescopStatus::InputError
            }
        }
        Err(_) => {
            set_last_error("internal panic".to_string(), "panic");
            RescopStatus::Panic
        }
    }
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, name: &'static str) -> FfiResult<&'a [f64]> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(name))
}

fn checked_len(n: usize, d: usize) -> FfiResult<usize> {
    n.checked_mul(d)
        .ok_or_else(|| Failure::Argument(format!("{n} x {d} overflows")))
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length, or 0 if none.
#[no_mangle]
pub unsafe extern "C" fn rescop_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some((msg, _)) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let k = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, k);
                *buf.add(k) = 0;
            }
            bytes.len()
        }
        None => 0,
    })
}

/// Stable snake_case tag of the last error of this thread, or NULL if none.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn rescop_last_error_kind() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some((_, kind)) => kind.as_ptr(),
        None => ptr::null(),
    })
}

/// Pseudo-observations (column ranks over n + 1) of an n x d residual matrix.
#[no_mangle]
pub unsafe extern "C" fn rescop_pseudo_sample_from_residuals(
    residuals: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut RescopPseudoSample,
) -> RescopStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let data = slice_in(residuals, checked_len(n, d)?, "residuals")?;
        let u = pseudo_observations(&RowMatrix::from_row_major(n, d, data.to_vec())?)?;
        *out = Box::into_raw(Box::new(RescopPseudoSample { inner: u }));
        Ok(())
    })
}

/// Wraps an n x d matrix of values already in (0, 1), used as is.
#[no_mangle]
pub unsafe extern "C" fn rescop_pseudo_sample_from_uniforms(
    uniforms: *const f64,
    n: usize,
    d: usize,
    out: *mut *mut RescopPseudoSample,
) -> RescopStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let data = slice_in(uniforms, checked_len(n, d)?, "uniforms")?;
        let u = PseudoSample::from_uniforms(RowMatrix::from_row_major(n, d, data.to_vec())?)?;
        *out = Box::into_raw(Box::new(RescopPseudoSample { inner: u }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rescop_pseudo_sample_free(sample: *mut RescopPseudoSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rescop_pseudo_sample_shape(
    sample: *const RescopPseudoSample,
    n: *mut usize,
    d: *mut usize,
) -> RescopStatus {
    guard(|| {
        let s = handle(sample, "sample")?;
        *out_ref(n, "n")? = s.inner.n();
        *out_ref(d, "d")? = s.inner.dim();
        Ok(())
    })
}

/// Copies the n x d values into `out`, which must hold at least n * d doubles.
#[no_mangle]
pub unsafe extern "C" fn rescop_pseudo_sample_values(
    sample: *const RescopPseudoSample,
    out: *mut f64,
    len: usize,
) -> RescopStatus {
    guard(|| {
        let s = handle(sample, "sample")?;
        let src = s.inner.matrix().as_slice();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if len < src.len() {
            return Err(Failure::Buffer {
                need: src.len(),
                have: len,
            });
        }
        slice::from_raw_parts_mut(out, src.len()).copy_from_slice(src);
        Ok(())
    })
}

/// Runs one estimator. `trim_d`/`trim_lambda` are used by the trimmed
/// estimator only; pass values <= 0 for the defaults (0.25, 1.9).
/// Standard errors are attached for the pseudo-likelihood estimators when
/// `with_std_errors` is true.
#[no_mangle]
pub unsafe extern "C" fn rescop_estimate(
    sample: *const RescopPseudoSample,
    family: RescopFamily,
    estimator: RescopEstimator,
    trim_d: f64,
    trim_lambda: f64,
    with_std_errors: bool,
    out: *mut RescopReport,
) -> RescopStatus {
    guard(|| {
        let s = handle(sample, "sample")?;
        let out = out_ref(out, "out")?;
        let policy = trim_policy(trim_d, trim_lambda)?;
        let est: Estimator = estimator.into();
        let mut r = estimate(&s.inner, family.into(), est, Some(&policy))?;
        if with_std_errors && est != Estimator::TauInversion {
            attach_std_errors(&mut r, &s.inner, family.into())?;
        }
        *out = (&r).into();
        Ok(())
    })
}

fn trim_policy(d: f64, lambda: f64) -> FfiResult<TrimPolicy> {
    let def = TrimPolicy::default();
    let d = if d > 0.0 { d } else { def.d };
    let lambda = if lambda > 0.0 { lambda } else { def.lambda };
    Ok(TrimPolicy::new(d, lambda)?)
}

/// End-to-end fit: location regression of each response on `[1, x]`,
/// pseudo-observations of the residuals, then the chosen estimator with
/// standard errors. `log_transform` may be NULL (identity everywhere) or
/// point to `d` flags.
#[no_mangle]
pub unsafe extern "C" fn rescop_fit_pipeline(
    y: *const f64,
    x: *const f64,
    n: usize,
    d: usize,
    q: usize,
    log_transform: *const bool,
    family: RescopFamily,
    estimator: RescopEstimator,
    trim_d: f64,
    trim_lambda: f64,
    out: *mut RescopReport,
) -> RescopStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let ys = slice_in(y, checked_len(n, d)?, "y")?;
        let xs = slice_in(x, checked_len(n, q)?, "x")?;
        let logs: Vec<bool> = if log_transform.is_null() {
            vec![false; d]
        } else {
            slice::from_raw_parts(log_transform, d).to_vec()
        };
        let data = ObservationSet::new(
            RowMatrix::from_row_major(n, d, ys.to_vec())?,
            RowMatrix::from_row_major(n, q, xs.to_vec())?,
        )?;
        let specs: Vec<MarginalSpec> = logs
            .iter()
            .enumerate()
            .map(|(j, &l)| {
                let t = if l {
                    Transformation::Log
                } else {
                    Transformation::Identity
                };
                MarginalSpec::location_only(j).with_transformation(t)
            })
            .collect();
        let policy = trim_policy(trim_d, trim_lambda)?;
        let fit = fit_pipeline(
            &data,
            &specs,
            family.into(),
            estimator.into(),
            Some(&policy),
        )?;
        *out = (&fit.report).into();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rescop_kendall_tau(
    u: *const f64,
    v: *const f64,
    n: usize,
    out: *mut f64,
) -> RescopStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = kendall_tau(slice_in(u, n, "u")?, slice_in(v, n, "v")?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rescop_copula_new(
    family: RescopFamily,
    dim: usize,
    out: *mut *mut RescopCopula,
) -> RescopStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let c = Copula::new(family.into(), dim)?;
        *out = Box::into_raw(Box::new(RescopCopula { inner: c }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rescop_copula_free(copula: *mut RescopCopula) {
    if !copula.is_null() {
        drop(Box::from_raw(copula));
    }
}

#[no_mangle]
pub unsafe extern "C" fn rescop_tau_to_alpha(
    copula: *const RescopCopula,
    tau: f64,
    out: *mut f64,
) -> RescopStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(copula, "copula")?.inner.tau_to_alpha(tau)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rescop_alpha_to_tau(
    copula: *const RescopCopula,
    alpha: f64,
    out: *mut f64,
) -> RescopStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(copula, "copula")?.inner.alpha_to_tau(alpha)?;
        Ok(())
    })
}

/// Log density at one point `u` of length `dim`.
#[no_mangle]
pub unsafe extern "C" fn rescop_log_density(
    copula: *const RescopCopula,
    u: *const f64,
    alpha: f64,
    out: *mut f64,
) -> RescopStatus {
    guard(|| {
        let c = &handle(copula, "copula")?.inner;
        *out_ref(out, "out")? = c.log_density(slice_in(u, c.dim(), "u")?, alpha)?;
        Ok(())
    })
}

/// Derivative of the log density in `alpha` at one point `u`.
#[no_mangle]
pub unsafe extern "C" fn rescop_score(
    copula: *const RescopCopula,
    u: *const f64,
    alpha: f64,
    out: *mut f64,
) -> RescopStatus {
    guard(|| {
        let c = &handle(copula, "copula")?.inner;
        *out_ref(out, "out")? = c.score(slice_in(u, c.dim(), "u")?, alpha)?;
        Ok(())
    })
}

/// Draws `n` points into `out` (n * dim doubles) from a ChaCha8 stream seeded by `seed`.
#[no_mangle]
pub unsafe extern "C" fn rescop_sample(
    copula: *const RescopCopula,
    alpha: f64,
    n: usize,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> RescopStatus {
    guard(|| {
        let c = &handle(copula, "copula")?.inner;
        let need = checked_len(n, c.dim())?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if len < need {
            return Err(Failure::Buffer { need, have: len });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = c.sample(alpha, n, &mut rng)?;
        slice::from_raw_parts_mut(out, need).copy_from_slice(m.as_slice());
        Ok(())
    })
}

/// Runs a scenario given as JSON and returns the rendered table in `*out`,
/// to be released with [`rescop_string_free`].
#[no_mangle]
pub unsafe extern "C" fn rescop_simulate(
    scenario_json: *const c_char,
    format: RescopTableFormat,
    out: *mut *mut c_char,
) -> RescopStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if scenario_json.is_null() {
            return Err(Failure::Null("scenario_json"));
        }
        let text = CStr::from_ptr(scenario_json)
            .to_str()
            .map_err(|e| Failure::Argument(format!("scenario is not UTF-8: {e}")))?;
        let s = Scenario::from_json(text)?;
        let rows = run_scenario(&s)?;
        let f = match format {
            RescopTableFormat::Csv => TableFormat::Csv,
            RescopTableFormat::Markdown => TableFormat::Markdown,
        };
        let table = render_table(&rows, f)?;
        *out = CString::new(table)
            .map_err(|e| Failure::Argument(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rescop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

//! Per-margin location(-scale) regression and the error-law toolkit.

mod law;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use law::ErrorLaw;

use crate::dataset::ObservationSet;
use crate::error::{Error, Result};

/// Known increasing transformation applied to a response before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transformation {
    #[default]
    Identity,
    Log,
}

impl std::str::FromStr for Transformation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "id" | "none" => Ok(Transformation::Identity),
            "log" => Ok(Transformation::Log),
            other => Err(Error::InvalidScenario(format!(
                "unknown transformation `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationDesign {
    /// `theta_0 + theta_1 x_1 + ... + theta_q x_q`
    #[default]
    InterceptPlusLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDesign {
    /// Location-only adjustment; residuals are not divided by anything.
    #[default]
    ConstantOne,
    /// Two-stage fit: OLS of |location residual| on `[1, X]`, clamped at 1e-6.
    LinearPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub transformation: Transformation,
    pub location_design: LocationDesign,
    pub scale_design: ScaleDesign,
    /// Zero-based response column.
    pub margin_index: usize,
}

impl MarginalSpec {
    pub fn location_only(margin_index: usize) -> Self {
        Self {
            transformation: Transformation::Identity,
            location_design: LocationDesign::InterceptPlusLinear,
            scale_design: ScaleDesign::ConstantOne,
            margin_index,
        }
    }

    pub fn with_transformation(mut self, t: Transformation) -> Self {
        self.transformation = t;
        self
    }

    pub fn with_scale(mut self, s: ScaleDesign) -> Self {
        self.scale_design = s;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalFit {
    pub spec: MarginalSpec,
    /// Location coefficients (intercept first), followed by the scale
    /// coefficients when the scale is fitted.
    pub theta_hat: Vec<f64>,
    pub residuals: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;
const SCALE_FLOOR: f64 = 1e-6;

/// Least squares via Householder QR; `None` when the design is rank deficient.
fn least_squares(design: &DMatrix<f64>, response: &DVector<f64>) -> Option<DVector<f64>> {
    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_diag == 0.0 || r.diagonal().iter().any(|v| v.abs() <= RANK_TOL * max_diag) {
        return None;
    }
    let qtb = qr.q().transpose() * response;
    r.solve_upper_triangular(&qtb)
}

pub fn fit_marginal(data: &ObservationSet, spec: &MarginalSpec) -> Result<MarginalFit> {
    let j = spec.margin_index;
    if j >= data.d() {
        return Err(Error::ShapeMismatch(format!(
            "margin index {j} but data has {} responses",
            data.d()
        )));
    }
    let n = data.n();
    let q = data.q();
    let raw = data.response(j);
    let transformed: Vec<f64> = match spec.transformation {
        Transformation::Identity => raw,
        Transformation::Log => {
            if let Some((row, &value)) = raw.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(Error::NonPositiveResponseForLog {
                    margin: j + 1,
                    row: row + 1,
                    value,
                });
            }
            raw.iter().map(|v| v.ln()).collect()
        }
    };

    let design = DMatrix::from_fn(
        n,
        q + 1,
        |i, k| if k == 0 { 1.0 } else { data.x().get(i, k - 1) },
    );
    let response = DVector::from_vec(transformed);
    let loc =
        least_squares(&design, &response).ok_or(Error::RankDeficientDesign { margin: j + 1 })?;
    let fitted = &design * &loc;
    let mut residuals: Vec<f64> = response
        .iter()
        .zip(fitted.iter())
        .map(|(y, m)| y - m)
        .collect();
    let mut theta_hat: Vec<f64> = loc.iter().copied().collect();

    if spec.scale_design == ScaleDesign::LinearPositive {
        let abs_res = DVector::from_iterator(n, residuals.iter().map(|r| r.abs()));
        let sc =
            least_squares(&design, &abs_res).ok_or(Error::RankDeficientDesign { margin: j + 1 })?;
        let scale = &design * &sc;
        for (r, s) in residuals.iter_mut().zip(scale.iter()) {
            *r /= s.max(SCALE_FLOOR);
        }
        theta_hat.extend(sc.iter());
    }

    Ok(MarginalFit {
        spec: *spec,
        theta_hat,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::RowMatrix;

    fn obs(y1: &[f64], x: &[f64]) -> ObservationSet {
        let y2: Vec<f64> = x.iter().map(|v| v * 0.5 + 0.1 * v * v).collect();
        ObservationSet::new(
            RowMatrix::from_columns(&[y1.to_vec(), y2]).unwrap(),
            RowMatrix::from_columns(&[x.to_vec()]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn exact_linear_fit() {
        let data = obs(&[1.0, 3.0, 5.0], &[0.0, 1.0, 2.0]);
        let fit = fit_marginal(&data, &MarginalSpec::location_only(0)).unwrap();
        assert!((fit.theta_hat[0] - 1.0).abs() < 1e-12 && (fit.theta_hat[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn exact_fit_after_log() {
        let e = std::f64::consts::E;
        let data = obs(&[e, e.powi(3)], &[0.0, 1.0]);
        let spec = MarginalSpec::location_only(0).with_transformation(Transformation::Log);
        let fit = fit_marginal(&data, &spec).unwrap();
        assert!((fit.theta_hat[0] - 1.0).abs() < 1e-12 && (fit.theta_hat[1] - 2.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn constant_covariate_is_rank_deficient() {
        let data = obs(&[1.0, 2.0, 4.0], &[3.0, 3.0, 3.0]);
        assert!(matches!(
            fit_marginal(&data, &MarginalSpec::location_only(0)),
            Err(Error::RankDeficientDesign { margin: 1 })
        ));
    }

    #[test]
    fn log_needs_positive_responses() {
        let data = obs(&[1.0, -2.0, 4.0], &[0.0, 1.0, 2.0]);
        let spec = MarginalSpec::location_only(0).with_transformation(Transformation::Log);
        assert!(matches!(
            fit_marginal(&data, &spec),
            Err(Error::NonPositiveResponseForLog { row: 2, .. })
        ));
    }

    #[test]
    fn ols_residuals_sum_to_zero() {
        let data = obs(&[0.3, -1.2, 2.2, 0.1, 5.0], &[0.0, 1.5, -2.0, 0.7, 3.0]);
        let fit = fit_marginal(&data, &MarginalSpec::location_only(0)).unwrap();
        let s: f64 = fit.residuals.iter().sum();
        assert!(s.abs() < 1e-8 * 5.0 * 5.0);
    }

    #[test]
    fn scale_fit_divides_by_positive_scale() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| 1.0 + v + (1.0 + v) * if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        let data = obs(&y, &x);
        let spec = MarginalSpec::location_only(0).with_scale(ScaleDesign::LinearPositive);
        let fit = fit_marginal(&data, &spec).unwrap();
        assert_eq!(fit.theta_hat.len(), 4);
        assert!(fit.residuals.iter().all(|r| r.is_finite()));
        assert!(fit.theta_hat[3] > 0.0);
    }
}

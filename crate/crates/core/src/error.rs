use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell at row {row}, column `{col}`")]
    NonNumericCell { row: usize, col: String },
    #[error("non-finite value at row {row}, column `{col}`")]
    NonFiniteValue { row: usize, col: String },
    #[error("at least 2 rows are required, found {0}")]
    RowCountTooSmall(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("design matrix for margin {margin} is rank deficient")]
    RankDeficientDesign { margin: usize },
    #[error("log transformation needs positive responses; margin {margin} row {row} has {value}")]
    NonPositiveResponseForLog {
        margin: usize,
        row: usize,
        value: f64,
    },
    #[error("quantile argument {0} is outside (0, 1)")]
    QuantileArgumentOutOfRange(f64),
    #[error("invalid error law: {0}")]
    InvalidLaw(String),

    #[error("{count} tied value(s) detected; ranks are undefined under ties")]
    TiesDetected { count: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parameter {alpha} is outside the {family} domain {domain}")]
    ParameterOutOfDomain {
        family: &'static str,
        alpha: f64,
        domain: String,
    },
    #[error("point coordinate {value} is on or too close to the boundary of (0, 1)")]
    PointOnBoundary { value: f64 },
    #[error("Kendall's tau {tau} is not attainable by the {family} family")]
    TauOutOfRange { family: &'static str, tau: f64 },
    #[error("dimension {dim} is not supported: {reason}")]
    UnsupportedDimension { dim: usize, reason: String },

    #[error("no sign change of the score equation was found in the parameter domain")]
    NoBracketFound,
    #[error("root finder did not converge within {0} iterations")]
    MaxIterations(usize),
    #[error("every observation was removed by trimming (delta_n = {delta})")]
    AllPointsTrimmed { delta: f64 },
    #[error("invalid trim policy: {0}")]
    InvalidTrimPolicy(String),
    #[error("estimated Fisher information {0} is not positive")]
    SingularInformation(f64),

    #[error("empty input")]
    EmptyInput,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("estimator {estimator} converged in {converged}/{reps} replications (below 95%); failures: {failures}")]
    ScenarioUnstable {
        estimator: String,
        converged: usize,
        reps: usize,
        failures: String,
    },
    #[error("unknown copula family `{0}`")]
    UnknownFamily(String),
    #[error("unknown margin `{0}`")]
    UnknownMargin(String),
    #[error("law is not supported by the diagnostic: {0}")]
    UnsupportedLaw(String),
}

impl Error {
    /// Errors raised by the numerical machinery rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TauOutOfRange { .. }
                | Error::NoBracketFound
                | Error::MaxIterations(_)
                | Error::AllPointsTrimmed { .. }
                | Error::SingularInformation(_)
                | Error::ParameterOutOfDomain { .. }
                | Error::PointOnBoundary { .. }
                | Error::ScenarioUnstable { .. }
        )
    }

    /// Short stable tag, used by the FFI layer and in tallies.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumericCell { .. } => "non_numeric_cell",
            Error::NonFiniteValue { .. } => "non_finite_value",
            Error::RowCountTooSmall(_) => "row_count_too_small",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::RankDeficientDesign { .. } => "rank_deficient_design",
            Error::NonPositiveResponseForLog { .. } => "non_positive_response_for_log",
            Error::QuantileArgumentOutOfRange(_) => "quantile_argument_out_of_range",
            Error::InvalidLaw(_) => "invalid_law",
            Error::TiesDetected { .. } => "ties_detected",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ParameterOutOfDomain { .. } => "parameter_out_of_domain",
            Error::PointOnBoundary { .. } => "point_on_boundary",
            Error::TauOutOfRange { .. } => "tau_out_of_range",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::NoBracketFound => "no_bracket_found",
            Error::MaxIterations(_) => "max_iterations",
            Error::AllPointsTrimmed { .. } => "all_points_trimmed",
            Error::InvalidTrimPolicy(_) => "invalid_trim_policy",
            Error::SingularInformation(_) => "singular_information",
            Error::EmptyInput => "empty_input",
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::ScenarioUnstable { .. } => "scenario_unstable",
            Error::UnknownFamily(_) => "unknown_family",
            Error::UnknownMargin(_) => "unknown_margin",
            Error::UnsupportedLaw(_) => "unsupported_law",
        }
    }
}

use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite residual at index {index}")]
    NonFiniteResidual { index: usize },

    #[error("root bracketing failed to converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("underdetermined fit: {observed} observed cases for {params} parameters")]
    Underdetermined { observed: usize, params: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("no observed responses")]
    EmptyObservedSet,

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("constant {name} = {value:e} is numerically zero")]
    DegenerateConstant { name: &'static str, value: f64 },

    #[error("covariance of the regression gradient is singular")]
    SingularA0,

    #[error("density estimate at the median is not positive ({0:e})")]
    ZeroDensity(f64),

    #[error("the mean functional has no positive uniform breakdown point")]
    MeanHasNoUabp,

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("missing covariate at row {row}, column '{column}'")]
    MissingCovariate { row: usize, column: String },

    #[error("row {row}: indicator says observed but response is missing (or vice versa)")]
    IndicatorConflict { row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

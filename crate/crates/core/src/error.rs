use thiserror::Error;

/// Faults raised by the library. Infeasible or unbounded programs are *not*
/// faults; they are reported through [`crate::lp::Status`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("covariance is not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("no full-rank vertex solution: {0}")]
    NoVertexSolution(String),
    #[error("linear program is {0}")]
    LpStatus(String),
    #[error("empty cell: t = {t}, z = {z}")]
    EmptyCell { t: String, z: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::TooLarge(_) => "instance_too_large",
            Error::NotPsd(_) => "not_psd",
            Error::NoVertexSolution(_) => "no_vertex_solution",
            Error::LpStatus(_) => "lp_status",
            Error::EmptyCell { .. } => "empty_cell",
            Error::Unsupported(_) => "unsupported",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }

    /// Validation faults (bad input) as opposed to computational outcomes.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::LpStatus(_) | Error::Numerical(_) | Error::NoVertexSolution(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::DimensionMismatch(msg.into()))
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

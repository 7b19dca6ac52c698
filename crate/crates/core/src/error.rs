use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is infeasible: residual {residual:.3e} exceeds {tol:.3e}")]
    Infeasible { residual: f64, tol: f64 },

    #[error("zero direction has no cone-membership status")]
    ZeroDirection,

    #[error("pair does not span a flat segment of the nuclear-norm sphere")]
    NotFlat,

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("parse error in `{field}`: {msg}")]
    Parse { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, msg: impl ToString) -> Self {
        Error::Parse {
            field: field.into(),
            msg: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::specfun::SpecFunError;
use crate::wos::WosPath;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("walk exceeded the step cap of {cap} steps")]
    StepCap { cap: usize, partial: Option<Box<WosPath>> },
    #[error("non-finite {what} value at {point:?}")]
    NonFinite { what: &'static str, point: Vec<f64> },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::StepCap { .. }
                | Error::NonFinite { .. }
                | Error::SpecFun(SpecFunError::NoConvergence { .. })
        )
    }
}

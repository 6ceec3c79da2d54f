use std::path::PathBuf;

use num_complex::Complex64;

/// Errors raised by the library.
///
/// Configuration problems (`Domain`, `Dimension`, `Empty`, `SingularShift`,
/// `Capacity`) are distinguished from numerical failures (`Convergence`,
/// `NumericalFault`) so that callers can map them onto different exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` out of range: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("shift z = {z} leaves the operator singular: {reason}")]
    SingularShift { z: Complex64, reason: String },

    #[error("not enough candidates: {0}")]
    Capacity(String),

    #[error("{routine} failed to converge on a {n}x{n} input{}", dump_note(.dump))]
    Convergence {
        routine: &'static str,
        n: usize,
        dump: Option<PathBuf>,
    },

    #[error("numerical fault in {context}: {detail}{}", dump_note(.dump))]
    NumericalFault {
        context: &'static str,
        detail: String,
        dump: Option<PathBuf>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn dump_note(dump: &Option<PathBuf>) -> String {
    match dump {
        Some(p) => format!(" (offending input written to {})", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::NumericalFault { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

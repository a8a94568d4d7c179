use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which lobe-coverage rule a profile broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageConstraint {
    /// The angle spread of a lobe must fit inside its quantized range.
    SpreadWithinRange,
    /// The quantized ranges together must fit inside one full turn.
    CoverageWithinCircle,
    /// Quantized coverages of different lobes must not overlap.
    DisjointCoverage,
}

impl fmt::Display for CoverageConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoverageConstraint::SpreadWithinRange => "spread-within-range (angle spread <= quantized range)",
            CoverageConstraint::CoverageWithinCircle => {
                "coverage-within-circle (sum of quantized ranges <= 2*pi)"
            }
            CoverageConstraint::DisjointCoverage => {
                "disjoint-coverage (quantized coverages of distinct lobes must not overlap)"
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid profile: violates {constraint}: {detail}")]
    InvalidProfile {
        constraint: CoverageConstraint,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than runtime failures.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::InvalidProfile { .. }
            | Error::InvalidConfiguration(_)
            | Error::Json(_) => true,
            Error::Trial { source, .. } => source.is_config_error(),
            Error::Io { .. } | Error::Csv { .. } | Error::Numerical(_) => false,
        }
    }

    pub(crate) fn invalid_arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfiguration(msg.into())
    }
}

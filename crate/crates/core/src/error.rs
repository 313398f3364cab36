use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("quadrature did not reach relative tolerance {tolerance:e} (achieved {achieved:e})")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error(
        "grid not converged: coarse {coarse:.6} vs refined {refined:.6} (|diff| > {tolerance:e})"
    )]
    NotConverged {
        coarse: f64,
        refined: f64,
        tolerance: f64,
    },

    #[error("spin echo length {xi_nm} nm outside the wavelength band, admissible [{min_nm}, {max_nm}] nm")]
    OutOfBand { xi_nm: f64, min_nm: f64, max_nm: f64 },

    #[error("pattern grid too coarse near xi = {xi_nm} nm: spacing {spacing_nm} nm, need <= {required_nm} nm")]
    GridTooCoarse {
        xi_nm: f64,
        spacing_nm: f64,
        required_nm: f64,
    },

    #[error("background fit needs at least 2 local minima, found {0}")]
    TooFewMinima(usize),

    #[error("nothing to export")]
    EmptyResults,

    #[error("while computing {curve}: {source}")]
    Curve {
        curve: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, used by the CLI for exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) | Error::Validation(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::Quadrature { .. } | Error::NotConverged { .. } => "convergence",
            Error::OutOfBand { .. } | Error::GridTooCoarse { .. } | Error::TooFewMinima(_) => {
                "domain"
            }
            Error::EmptyResults | Error::Io { .. } => "io",
            Error::Curve { source, .. } => source.category(),
        }
    }

    pub(crate) fn in_curve(self, curve: &str) -> Error {
        Error::Curve {
            curve: curve.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

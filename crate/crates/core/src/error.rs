use std::path::PathBuf;

/// Errors produced by the library.
///
/// Variants are grouped by how the CLI reports them: configuration and
/// contract problems, numerical failures, and I/O or format failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix exponential input out of range: ‖A‖_F = {norm:.3e} exceeds {limit}")]
    ExpRange { norm: f64, limit: f64 },

    #[error("logarithm undefined at the cut locus (rotation angle {angle:.9} within {tol:e} of π)")]
    CutLocus { angle: f64, tol: f64 },

    #[error("logarithm undefined: eigenvalue {re:.3e}{im:+.3e}i lies on the closed negative real axis")]
    LogDomain { re: f64, im: f64 },

    #[error("matrix is singular or nearly singular (smallest singular value {sigma_min:.3e})")]
    Singular { sigma_min: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("generation failed: non-finite network output at step {step} of trajectory {trajectory}")]
    Generation { trajectory: usize, step: usize },

    #[error("prior draw hit the cut locus {attempts} times in a row")]
    RetriesExhausted { attempts: usize },

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("missing inputs: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingInputs(Vec<PathBuf>),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn parse(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Contract(_) | Error::Config(_) | Error::Incompatible(_) => 2,
            Error::ExpRange { .. }
            | Error::CutLocus { .. }
            | Error::LogDomain { .. }
            | Error::Singular { .. }
            | Error::Divergence { .. }
            | Error::Generation { .. }
            | Error::RetriesExhausted { .. } => 3,
            Error::Parse { .. } | Error::MissingInputs(_) | Error::Io { .. } => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Stage of the estimation pipeline at which a fit failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ScalarFit,
    Assembly,
    Recovery,
    SampleMoments,
    Likelihood,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::ScalarFit => "scalar fit",
            Stage::Assembly => "autocovariance assembly",
            Stage::Recovery => "reduced-form recovery",
            Stage::SampleMoments => "sample moments",
            Stage::Likelihood => "likelihood optimization",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("eigensolver did not converge on a {dim}x{dim} matrix")]
    NonConvergence { dim: usize },

    #[error("matrix spectrum is not real and strictly positive (offending eigenvalue {re} + {im}i)")]
    NotPositiveSpectrum { re: f64, im: f64 },

    #[error("no root of g^2 + a g + 1 = 0 inside the unit disk for eigenvalue a = {re} + {im}i")]
    NoInvertibleRoot { re: f64, im: f64 },

    #[error("{what} is not positive definite (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("{what} is singular")]
    Singular { what: &'static str },

    #[error("{what} is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { what: &'static str, asymmetry: f64 },

    #[error("MA coefficient matrix is not invertible (spectral radius {radius})")]
    NotInvertible { radius: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("series is constant; nothing to estimate")]
    DegenerateSeries,

    #[error("moments (gamma0 = {gamma0}, gamma1 = {gamma1}) are not those of an invertible MA(1)")]
    NotRepresentable { gamma0: f64, gamma1: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("series kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: &'static str, got: &'static str },

    #[error("unknown preset model {0} (expected 1..=4)")]
    UnknownModel(u32),

    #[error("no moments supplied for aggregation weight {0}")]
    MissingWeight(String),

    #[error("estimation failed during {stage}: {source}")]
    EstimationFailed {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("reference matrix has zero norm")]
    ZeroTruth,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::EstimationFailed {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

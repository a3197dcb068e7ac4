use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("register of {nuclei} nuclei exceeds the exact-diagonalization limit of {max}")]
    DimensionLimit { nuclei: usize, max: usize },

    #[error("lattice of radius {radius} Å would hold ~{estimated} sites (limit {limit})")]
    ResourceLimit { radius: f64, estimated: usize, limit: usize },

    #[error("second-moment sum needs at least {required} sites, got {got}")]
    InsufficientSites { got: usize, required: usize },

    #[error("fit did not converge after {iterations} iterations (last parameters {last:?}, gradient {gradient:e})")]
    NonConvergence { iterations: usize, last: Vec<f64>, gradient: f64 },

    #[error("signal is flat; nothing to fit")]
    FlatSignal,

    #[error("transition {i}<->{j} is degenerate ({gap_mhz:e} MHz gap); selective pulse is ambiguous")]
    Ambiguity { i: usize, j: usize, gap_mhz: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

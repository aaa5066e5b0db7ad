use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("species {species}: concentration {value:.3e} at cell ({i}, {j}) after step with dt = {dt:.3e}")]
    NegativeConcentration {
        species: usize,
        i: usize,
        j: usize,
        value: f64,
        dt: f64,
    },

    #[error("non-positive concentration {value:.3e} at cell ({i}, {j})")]
    NonPositiveConcentration { i: usize, j: usize, value: f64 },

    #[error("director length {len:.3e} at cell ({i}, {j}) is below 0.5")]
    DirectorCollapse { i: usize, j: usize, len: f64 },

    #[error("strain rate is not symmetric (off-diagonal mismatch {0:.3e})")]
    NonSymmetricStrain(f64),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run aborted at t = {t:.6e}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("snapshot format error at byte {offset}: {msg}")]
    Snapshot { offset: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Snapshot { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

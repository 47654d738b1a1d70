use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range; `key` names the offending field.
    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("malformed amplitude state: {0}")]
    MalformedState(String),

    #[error("step size underflow at t = {t} (state norm {norm})")]
    StepSizeUnderflow { t: f64, norm: f64 },

    #[error("non-finite amplitude encountered at t = {t} (state norm {norm})")]
    NonFinite { t: f64, norm: f64 },

    #[error("step budget exhausted at t = {t} (state norm {norm})")]
    TooManySteps { t: f64, norm: f64 },

    /// Truncation order search gave up. Usually means Raman-Nath parameters.
    #[error("truncation did not converge by n_max = {n_max}: last difference {difference:e}")]
    NotConverged { n_max: usize, difference: f64 },

    #[error("transition column at q = {q}: {source}")]
    Column { q: f64, source: Box<Error> },

    #[error("momentum grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no resonance: curve maximum {maximum:e} below threshold")]
    NoResonance { maximum: f64 },

    #[error("half-maximum crossing not bracketed within ±{half_range} hbar K")]
    UnbracketedWidth { half_range: f64 },

    #[error("objective is flat over the search interval (variation {variation:e})")]
    FlatObjective { variation: f64 },

    #[error("degenerate interference signal: amplitude {amplitude:e}")]
    DegenerateSignal { amplitude: f64 },

    #[error("misconfigured interferometer arm: {0}")]
    ArmMismatch(String),

    #[error("transition cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::StepSizeUnderflow { .. }
            | Error::NonFinite { .. }
            | Error::TooManySteps { .. }
            | Error::NotConverged { .. }
            | Error::NoResonance { .. }
            | Error::UnbracketedWidth { .. }
            | Error::FlatObjective { .. }
            | Error::DegenerateSignal { .. } => true,
            Error::Column { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

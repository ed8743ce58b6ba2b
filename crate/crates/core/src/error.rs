use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tone at {freq_hz} Hz aliases at sample rate {sample_rate_hz} Hz")]
    Aliasing { freq_hz: f64, sample_rate_hz: f64 },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("block length {0} is not a power of two >= 8")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("frequency {freq_hz} Hz outside [0, {nyquist_hz}] Hz")]
    OutOfRange { freq_hz: f64, nyquist_hz: f64 },

    #[error("SR integration diverged at t = {t} (x = {x}); step too large")]
    Divergence { t: f64, x: f64 },

    #[error("integration diverged at noise intensity D = {noise_d}: {source}")]
    DivergenceAt {
        noise_d: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("every grid point diverged")]
    AllDiverged,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

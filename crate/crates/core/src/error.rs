use thiserror::Error;

/// Errors raised by model construction and the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QfptError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid initial state: {0}")]
    InvalidState(String),

    #[error("systems are incompatible: {0}")]
    Mismatch(String),

    #[error("resolvent generator is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    NotHurwitz { abscissa: f64 },

    #[error("matrix is too ill-conditioned to invert (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("negative variance {variance:.3e} beyond clipping tolerance")]
    NegativeVariance { variance: f64 },

    #[error(
        "waiting-time root find did not converge after {iterations} iterations \
         (S(lo) = {s_lo:.6e}, S(hi) = {s_hi:.6e}, target {target:.6e})"
    )]
    RootFind {
        iterations: usize,
        s_lo: f64,
        s_hi: f64,
        target: f64,
    },

    #[error("quantum Fisher information did not converge: J(eps) = {coarse}, J(eps/2) = {fine}")]
    QfiNotConverged { coarse: f64, fine: f64 },

    #[error("not enough samples: {0}")]
    TooFewSamples(usize),

    #[error("unsupported observable: {0}")]
    UnsupportedObservable(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = QfptError> = std::result::Result<T, E>;

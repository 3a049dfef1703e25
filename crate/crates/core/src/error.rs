use thiserror::Error;

/// Errors produced while building or evaluating detection models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("velocity beta = {beta} is outside the allowed range |beta| < 1 - {guard:e}")]
    VelocityOutOfRange { beta: f64, guard: f64 },

    #[error("frequency must be finite and strictly positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("field scale must be finite and nonnegative, got {0}")]
    NegativeFieldScale(f64),

    #[error("linewidth kappa must be finite and strictly positive, got {0}")]
    NonPositiveWidth(f64),

    #[error("invalid susceptibility table: {0}")]
    InvalidTable(String),

    #[error("frequency {omega} lies outside the tabulated range [{lo}, {hi}]")]
    FrequencyOutOfTable { omega: f64, lo: f64, hi: f64 },

    #[error("both detection amplitudes vanish; the click effect is null")]
    NullEffect,

    #[error("invalid photon state: {0}")]
    InvalidState(String),

    #[error("amplitude ratio must be finite and strictly positive, got {0}")]
    NonPositiveRatio(f64),

    #[error("quality factor must be finite and strictly positive, got {0}")]
    NonPositiveQ(f64),

    #[error("gate duration must be finite and strictly positive, got {0}")]
    InvalidDuration(f64),

    #[error("quadrature needs at least {min} steps, got {got}")]
    TooFewSteps { got: usize, min: usize },

    #[error("analyzer beat {analyzer} does not match the kinematic splitting {expected}")]
    InconsistentBeat { analyzer: f64, expected: f64 },

    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    #[error("invalid simulation parameter: {0}")]
    InvalidParameter(String),

    #[error("rate ceiling is zero; nothing can be sampled")]
    DegenerateRate,

    #[error("record has {got} events, at least {min} are required")]
    TooFewEvents { got: usize, min: usize },

    #[error("periodogram maximum at {freq} sits on the boundary of the frequency grid")]
    BeatOutOfGrid { freq: f64 },

    #[error("beat frequency must be finite and strictly positive, got {0}")]
    NonPositiveBeat(f64),

    #[error("records were generated with different parameters: {0}")]
    MismatchedParams(String),

    #[error("least-squares fit is singular")]
    SingularFit,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

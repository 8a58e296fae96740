use thiserror::Error;

/// Errors produced anywhere in the receiver simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("duplicate transition {lower} -> {upper}")]
    DuplicateEntry { lower: String, upper: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("system has no unique steady state: {0}")]
    NoUniqueSteadyState(String),

    #[error("integration step {step:e} s is unstable ({reason})")]
    StepSize { step: f64, reason: String },

    #[error("no Autler-Townes splitting resolved: found {found} local maxima")]
    NoSplitting { found: usize },

    #[error("frequency grid does not bracket the -3 dB point")]
    Bracket,

    #[error("signal bandwidth {signal_hz:.3e} Hz exceeds {limit_hz:.3e} Hz allowed for quasi-static reception")]
    BandwidthViolation { signal_hz: f64, limit_hz: f64 },

    #[error("demodulator calibration error: {0}")]
    Calibration(String),

    #[error(
        "aliasing: intermediate frequency {offset_hz} Hz is not below Nyquist ({nyquist_hz} Hz)"
    )]
    Aliasing { offset_hz: f64, nyquist_hz: f64 },

    #[error("subcarrier grid is not orthogonal over the symbol duration: {0}")]
    Orthogonality(String),

    #[error("model domain error: {0}")]
    ModelDomain(String),

    #[error("channel matrix is rank deficient (rank {rank} < {users})")]
    Rank { rank: usize, users: usize },

    #[error("degenerate combining: all branch gains are zero")]
    DegenerateCombining,

    #[error("degenerate target: vibration amplitude is zero")]
    DegenerateTarget,

    #[error("topology error: {0}")]
    Topology(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors caused by bad user input (config, files, arguments)
    /// rather than by a failure while running an experiment.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Io(_)
                | Error::Validation(_)
                | Error::DuplicateEntry { .. }
                | Error::NotFound(_)
                | Error::Topology(_)
        )
    }
}

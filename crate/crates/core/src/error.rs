use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("latitude {0} rad is outside [-pi/2, pi/2]")]
    LatitudeOutOfRange(f64),
    #[error("transport rate is singular at latitude {0} rad")]
    NearPole(f64),
    #[error("tangent-plane displacement of {0:.1} m exceeds the 10 km limit")]
    DisplacementTooLarge(f64),
    #[error("invalid time step {0} s")]
    InvalidTimeStep(f64),
    #[error("attitude matrix is not a rotation (orthonormality error {0:e})")]
    NotOrthonormal(f64),
    #[error("covariance is not positive semi-definite")]
    NotPositiveSemiDefinite,
    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),
    #[error("misalignment correction of {0} rad exceeds the small-angle limit")]
    LargeMisalignment(f64),
    #[error("timestamp {new} s does not follow {last} s")]
    NonIncreasingTimestamp { last: f64, new: f64 },
    #[error("window holds {len} fixes but {needed} are required")]
    WindowNotFull { len: usize, needed: usize },
    #[error("least-squares design matrix is rank deficient")]
    RankDeficient,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}:{line}: timestamp is not strictly increasing", path.display())]
    NonMonotone { path: PathBuf, line: u64 },
    #[error("{}:{line}: non-finite value in column `{column}`", path.display())]
    NonFinite { path: PathBuf, line: u64, column: String },
    #[error("{}:{line}: unknown configuration key `{key}`", path.display())]
    UnknownKey { path: PathBuf, line: u64, key: String },
    #[error("configuration field `{field}`: {message}")]
    ConfigField { field: String, message: String },
    #[error("no truth stream available for evaluation")]
    MissingTruth,
    #[error("run with seed {seed} failed: {source}")]
    RunFailed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Whether the error stems from invalid user input (configuration, files)
    /// rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::NonMonotone { .. }
            | Error::NonFinite { .. }
            | Error::UnknownKey { .. }
            | Error::ConfigField { .. }
            | Error::Io { .. }
            | Error::MissingTruth => true,
            Error::RunFailed { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("Jacobi eigen-solver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("inconsistent distance matrix: retained eigenvalue {value:e} is below -{tolerance:e}")]
    NegativeEigenvalue { value: f64, tolerance: f64 },

    #[error("alignment underdetermined: {0}")]
    DegenerateGeometry(String),

    #[error("no feasible source distance on the search grid")]
    Infeasible,

    #[error("signal has {len} samples, need at least {need}")]
    SignalTooShort { len: usize, need: usize },

    #[error("position {0:?} lies outside the room")]
    OutsideRoom([f64; 3]),

    #[error("placement failed: {0}")]
    Placement(String),

    #[error("reflection calibration failed: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample rate mismatch in {path}: file has {found} Hz, expected {expected} Hz")]
    SampleRate {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("unsupported WAV format in {path}: {detail}")]
    WavFormat { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

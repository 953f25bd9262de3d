use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid FFT size {n_fft}: {reason}")]
    InvalidNfft { n_fft: usize, reason: &'static str },

    #[error("virtual array does not cover azimuth position {position} (half-wavelengths)")]
    CoverageGap { position: i64 },

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("phase-error table does not match the beamformer: {0}")]
    TableMismatch(String),

    #[error("angle {angle_deg:.3} deg lies outside the field of view")]
    AngleOutOfFov { angle_deg: f64 },

    #[error("search band {low_hz}..{high_hz} Hz is empty at sample rate {rate_hz} Hz")]
    BandEmpty {
        low_hz: f64,
        high_hz: f64,
        rate_hz: f64,
    },

    #[error("no spectral peak in the search band")]
    NoPeak,

    #[error("record too short: {have_s:.3} s available, {need_s:.3} s required")]
    TooShortRecord { have_s: f64, need_s: f64 },

    #[error("input signal is constant")]
    ConstantInput,

    #[error("bad magic: expected \"MVDC\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: u64 },

    #[error("unsupported cube file version {0}")]
    VersionUnsupported(u32),

    #[error("config error at `{path}`: {message}")]
    ConfigSchema { path: String, message: String },

    #[error("malformed data in {file}: {message}")]
    Malformed { file: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable kind, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvalidNfft { .. } => "invalid-nfft",
            Error::CoverageGap { .. } => "coverage-gap",
            Error::OutOfRange { .. } => "out-of-range",
            Error::TableMismatch(_) => "table-mismatch",
            Error::AngleOutOfFov { .. } => "angle-out-of-fov",
            Error::BandEmpty { .. } => "band-empty",
            Error::NoPeak => "no-peak",
            Error::TooShortRecord { .. } => "too-short-record",
            Error::ConstantInput => "constant-input",
            Error::BadMagic { .. } => "bad-magic",
            Error::TruncatedPayload { .. } => "truncated-payload",
            Error::VersionUnsupported(_) => "version-unsupported",
            Error::ConfigSchema { .. } => "config-schema",
            Error::Malformed { .. } => "malformed-data",
            Error::Io(_) => "io-error",
            Error::Csv(_) => "csv-error",
            Error::Json(_) => "json-error",
        }
    }
}

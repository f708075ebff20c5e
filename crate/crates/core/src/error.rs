use std::fmt;

use thiserror::Error;

/// A single failed configuration invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotPositive { field: &'static str, value: f64 },
    ChirpPeriod { chirp_period: f64, expected: f64 },
    SweepCoverage { bandwidth: f64, sampled: f64 },
    FrameTooShort { burst: f64, frame_period: f64 },
    ElementCount { role: &'static str, geometry: usize, config: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotPositive { field, value } => write!(f, "{field} must be positive (got {value})"),
            Violation::ChirpPeriod { chirp_period, expected } => write!(
                f,
                "chirp_period {chirp_period} s must equal chirp_interval x num_tx = {expected} s"
            ),
            Violation::SweepCoverage { bandwidth, sampled } => write!(
                f,
                "bandwidth {bandwidth} Hz does not match sampled sweep sweep_slope x samples_per_chirp / sample_rate = {sampled} Hz"
            ),
            Violation::FrameTooShort { burst, frame_period } => {
                write!(f, "chirp burst {burst} s exceeds frame_period {frame_period} s")
            }
            Violation::ElementCount { role, geometry, config } => {
                write!(f, "geometry lists {geometry} {role} antennas but config has {config}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trajectory leaves the unambiguous range at frame {frame}: {range:.3} m (limit {limit:.3} m)")]
    OutOfRange { frame: usize, range: f64, limit: f64 },
}

/// Errors raised while reading or writing binary files and manifests.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic at offset 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("config hash mismatch: file {file:016x}, expected {expected:016x}")]
    HashMismatch { file: u64, expected: u64 },
    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("invalid header field at offset {offset}: {reason}")]
    Header { offset: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("measurement noise covariance is not positive semi-definite (min eigenvalue {0:e})")]
    NonPsdNoise(f64),
    #[error("innovation covariance is singular")]
    Singular,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("class {class} needs at least one positive and one negative sample")]
    DegenerateLabels { class: &'static str },
    #[error("no scores supplied")]
    Empty,
    #[error("sample range {0} m falls outside every bin")]
    Unbinned(f64),
}

//! Vital-sign radar baseband processing.
//!
//! The pipeline mirrors a CW/FMCW slow-time chain: synthesize quadrature
//! baseband with time-varying impairments ([`signal_model`]), estimate and
//! remove per-channel DC offsets ([`calibration`]), recover the chest-motion
//! phase with HADCM and reference demodulators ([`demod`]), score the result
//! ([`metrics`]), and drive Monte-Carlo sweeps and trace files ([`harness`]).

pub mod calibration;
pub mod demod;
mod fft;
pub mod harness;
pub mod metrics;
pub mod signal_model;

pub use signal_model::IqSeries;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor or operation precondition was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A scalar argument fell outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Extrema search found fewer than one peak and one valley.
    #[error("insufficient extrema: {0}")]
    InsufficientExtrema(String),
    /// Circle fit normal equations were singular or near-singular.
    #[error("degenerate circle fit: {0}")]
    DegenerateCircleFit(String),
    /// A demodulator denominator collapsed below its stabilization floor.
    #[error("degenerate quadrature: {0}")]
    DegenerateQuadrature(String),
    /// The I/Q trajectory never moves far enough to define chord angles.
    #[error("stationary trajectory: {0}")]
    StationaryTrajectory(String),
    /// Trace file parse failure, with the 1-based offending line.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

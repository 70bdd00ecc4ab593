//! Error type shared by all modules.

use core::fmt;

/// Validation or domain failure raised by the analysis primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A real-valued parameter fell outside its documented domain.
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    /// Counts must satisfy n_error <= n_detected <= n_sent.
    CountOrdering {
        n_sent: u64,
        n_detected: u64,
        n_error: u64,
    },
    /// An operation that divides by the sent-pulse count got zero pulses.
    ZeroSent,
    /// The one-decoy formulas require 0 < nu < mu.
    IntensityOrdering { mu: f64, nu: f64 },
    /// Measurements are inconsistent with the channel model.
    InconsistentMeasurements(&'static str),
    /// Session or optimization configuration is invalid.
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfRange {
                name,
                value,
                expected,
            } => write!(f, "{name} = {value} outside {expected}"),
            Error::CountOrdering {
                n_sent,
                n_detected,
                n_error,
            } => write!(
                f,
                "counts must satisfy n_error <= n_detected <= n_sent, got {n_error}/{n_detected}/{n_sent}"
            ),
            Error::ZeroSent => write!(f, "sent-pulse count must be positive"),
            Error::IntensityOrdering { mu, nu } => {
                write!(f, "one-decoy protocol requires 0 < nu < mu, got nu = {nu}, mu = {mu}")
            }
            Error::InconsistentMeasurements(msg) => write!(f, "inconsistent measurements: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

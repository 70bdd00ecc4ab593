//! Domain types shared by the analysis, simulation, and optimizer layers.

use crate::{Error, Result};
use alloc::vec::Vec;

/// Role of a pulse intensity class within the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntensityLabel {
    /// Key-generating pulses at mean photon number mu.
    Signal,
    /// Channel-probing pulses at mean photon number nu.
    Decoy,
}

/// One source intensity class: label, mean photon number, and the fraction of
/// pulses sent at it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensitySetting {
    pub label: IntensityLabel,
    pub mean_photons: f64,
    pub send_fraction: f64,
}

impl IntensitySetting {
    /// Validated constructor: mean_photons >= 0, send_fraction in (0, 1].
    pub fn new(label: IntensityLabel, mean_photons: f64, send_fraction: f64) -> Result<Self> {
        if !(mean_photons >= 0.0) || !mean_photons.is_finite() {
            return Err(Error::OutOfRange {
                name: "mean_photons",
                value: mean_photons,
                expected: "[0, inf)",
            });
        }
        if !(send_fraction > 0.0) || send_fraction > 1.0 {
            return Err(Error::OutOfRange {
                name: "send_fraction",
                value: send_fraction,
                expected: "(0, 1]",
            });
        }
        Ok(Self {
            label,
            mean_photons,
            send_fraction,
        })
    }
}

/// Checks that the send fractions of a configuration sum to 1 (within 1e-9).
pub fn validate_send_fractions(settings: &[IntensitySetting]) -> Result<()> {
    let sum: f64 = settings.iter().map(|s| s.send_fraction).sum();
    if libm::fabs(sum - 1.0) > 1e-9 {
        return Err(Error::InvalidConfig("send fractions must sum to 1"));
    }
    Ok(())
}

/// Derives (gain, QBER) from raw counts: gain = n_detected/n_sent and
/// qber = n_error/n_detected, with the QBER defined as 0 when nothing was
/// detected (downstream formulas only consume the product E*Q).
pub fn gain_and_qber(n_sent: u64, n_detected: u64, n_error: u64) -> Result<(f64, f64)> {
    if n_sent == 0 {
        return Err(Error::ZeroSent);
    }
    if n_detected > n_sent || n_error > n_detected {
        return Err(Error::CountOrdering {
            n_sent,
            n_detected,
            n_error,
        });
    }
    let gain = n_detected as f64 / n_sent as f64;
    let qber = if n_detected == 0 {
        0.0
    } else {
        n_error as f64 / n_detected as f64
    };
    Ok((gain, qber))
}

/// Per-intensity measurement record: raw counts plus the derived gain Q and
/// QBER E actually consumed by the security bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedStatistics {
    pub intensity: IntensitySetting,
    pub n_sent: u64,
    pub n_detected: u64,
    pub n_error: u64,
    /// Q = n_detected / n_sent.
    pub gain: f64,
    /// E = n_error / n_detected (0 when nothing detected).
    pub qber: f64,
}

impl ObservedStatistics {
    /// Builds a record from raw counts, deriving gain and QBER.
    pub fn from_counts(
        intensity: IntensitySetting,
        n_sent: u64,
        n_detected: u64,
        n_error: u64,
    ) -> Result<Self> {
        let (gain, qber) = gain_and_qber(n_sent, n_detected, n_error)?;
        Ok(Self {
            intensity,
            n_sent,
            n_detected,
            n_error,
            gain,
            qber,
        })
    }

    /// Builds a record from exact rates, rounding the implied counts.
    ///
    /// Published datasets quote Q and E to fixed precision; this keeps those
    /// values exact while the counts stay consistent within +-0.5.
    pub fn from_rates(
        intensity: IntensitySetting,
        n_sent: u64,
        gain: f64,
        qber: f64,
    ) -> Result<Self> {
        if n_sent == 0 {
            return Err(Error::ZeroSent);
        }
        if !(0.0..=1.0).contains(&gain) {
            return Err(Error::OutOfRange {
                name: "gain",
                value: gain,
                expected: "[0, 1]",
            });
        }
        if !(0.0..=1.0).contains(&qber) {
            return Err(Error::OutOfRange {
                name: "qber",
                value: qber,
                expected: "[0, 1]",
            });
        }
        let n_detected = libm::round(gain * n_sent as f64) as u64;
        let n_error = libm::round(qber * n_detected as f64) as u64;
        Ok(Self {
            intensity,
            n_sent,
            n_detected,
            n_error,
            gain,
            qber,
        })
    }
}

/// Protocol-level constants of the key-rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Duty factor: fraction of raw pulses that survive sifting and protocol
    /// overheads; protocol-dependent, supplied by the experiment.
    pub q: f64,
    /// Bidirectional error-correction inefficiency, >= 1.
    pub f_ec: f64,
    /// Confidence band width in standard deviations for finite statistics.
    pub u_alpha: f64,
    /// Error rate of background detections, 1/2 by definition.
    pub e0: f64,
}

impl ProtocolParams {
    /// Validated constructor; e0 is pinned at 1/2.
    pub fn new(q: f64, f_ec: f64, u_alpha: f64) -> Result<Self> {
        if !(q > 0.0) || q > 1.0 {
            return Err(Error::OutOfRange {
                name: "q",
                value: q,
                expected: "(0, 1]",
            });
        }
        if !(f_ec >= 1.0) {
            return Err(Error::OutOfRange {
                name: "f_ec",
                value: f_ec,
                expected: "[1, inf)",
            });
        }
        if !(u_alpha >= 0.0) {
            return Err(Error::OutOfRange {
                name: "u_alpha",
                value: u_alpha,
                expected: "[0, inf)",
            });
        }
        Ok(Self {
            q,
            f_ec,
            u_alpha,
            e0: crate::E0,
        })
    }

    /// Same parameters with the fluctuation band removed (infinite-data mode).
    pub fn asymptotic(mut self) -> Self {
        self.u_alpha = 0.0;
        self
    }
}

impl Default for ProtocolParams {
    /// Operating point of the reference 15 km dataset.
    fn default() -> Self {
        Self {
            q: 0.4478,
            f_ec: 1.22,
            u_alpha: 10.0,
            e0: crate::E0,
        }
    }
}

/// Convenience pair (signal, decoy) lookup used by analysis entry points.
pub fn split_signal_decoy(
    stats: &[ObservedStatistics],
) -> Result<(&ObservedStatistics, &ObservedStatistics)> {
    let mut signal: Option<&ObservedStatistics> = None;
    let mut decoy: Option<&ObservedStatistics> = None;
    for s in stats {
        let slot: &mut Option<&ObservedStatistics> = match s.intensity.label {
            IntensityLabel::Signal => &mut signal,
            IntensityLabel::Decoy => &mut decoy,
        };
        if slot.is_some() {
            return Err(Error::InvalidConfig(
                "expected exactly one signal and one decoy record",
            ));
        }
        *slot = Some(s);
    }
    match (signal, decoy) {
        (Some(s), Some(d)) => Ok((s, d)),
        _ => Err(Error::InvalidConfig(
            "expected exactly one signal and one decoy record",
        )),
    }
}

/// Collects owned statistics into the (signal, decoy) pair.
pub fn split_signal_decoy_owned(
    stats: Vec<ObservedStatistics>,
) -> Result<(ObservedStatistics, ObservedStatistics)> {
    let (s, d) = split_signal_decoy(&stats)?;
    Ok((*s, *d))
}

//! GLLP key-rate bounds: single-photon gain/error estimation from one-decoy
//! statistics, the secure-rate lower bound, and the non-decoy baseline.

use crate::math::{h2, lower_confidence_gain};
use crate::types::{IntensityLabel, ObservedStatistics, ProtocolParams};
use crate::{Error, Result};
use libm::{exp, expm1};

/// Security-bound bundle produced by the one-decoy analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityBounds {
    /// Lower bound on the single-photon gain Q1; non-positive values mean the
    /// decoy data admit no single-photon contribution.
    pub q1_lower: f64,
    /// Upper bound on the single-photon error rate e1; None when q1_lower <= 0
    /// leaves it undefined.
    pub e1_upper: Option<f64>,
    /// Fluctuation-adjusted decoy gain fed into the estimate.
    pub q_nu_lower: f64,
    /// Secure key rate per sent pulse, clamped at 0.
    pub rate_lower: f64,
    /// True exactly when rate_lower > 0.
    pub secure: bool,
}

/// Key output: per-pulse rate scaled to session length and duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyYield {
    pub rate_per_pulse: f64,
    pub key_length_bits: f64,
    pub rate_per_second: f64,
}

/// Lower bound on the single-photon gain from one signal and one decoy
/// intensity:
///
/// Q1 >= mu^2 e^-mu / (mu nu - nu^2) *
///       (Qnu_l e^nu - Q_mu e^mu nu^2/mu^2 - E_mu Q_mu e^mu (mu^2-nu^2)/(e0 mu^2))
///
/// `q_nu_lower` is normally the fluctuation-adjusted decoy gain; a
/// non-positive value simply drives the result non-positive (no secure bound).
pub fn single_photon_gain_lower(
    mu: f64,
    nu: f64,
    q_mu: f64,
    e_mu: f64,
    q_nu_lower: f64,
    e0: f64,
) -> Result<f64> {
    if !(nu > 0.0) || nu >= mu {
        return Err(Error::IntensityOrdering { mu, nu });
    }
    if !(q_mu > 0.0) || q_mu > 1.0 {
        return Err(Error::OutOfRange {
            name: "q_mu",
            value: q_mu,
            expected: "(0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&e_mu) {
        return Err(Error::OutOfRange {
            name: "e_mu",
            value: e_mu,
            expected: "[0, 1]",
        });
    }
    if !(e0 > 0.0) {
        return Err(Error::OutOfRange {
            name: "e0",
            value: e0,
            expected: "(0, 1]",
        });
    }
    let mu2 = mu * mu;
    let nu2 = nu * nu;
    let premultiplier = mu2 * exp(-mu) / (mu * nu - nu2);
    let bracket = q_nu_lower * exp(nu)
        - q_mu * exp(mu) * nu2 / mu2
        - e_mu * q_mu * exp(mu) * (mu2 - nu2) / (e0 * mu2);
    Ok(premultiplier * bracket)
}

/// Upper bound on the single-photon error rate: e1 <= E_mu Q_mu / Q1_l.
///
/// Values >= 1/2 are returned as-is; they make the key-rate term non-positive
/// downstream.
pub fn single_photon_error_upper(e_mu: f64, q_mu: f64, q1_lower: f64) -> Result<f64> {
    if !(q1_lower > 0.0) {
        return Err(Error::OutOfRange {
            name: "q1_lower",
            value: q1_lower,
            expected: "(0, inf)",
        });
    }
    Ok(e_mu * q_mu / q1_lower)
}

/// GLLP key rate R = q * (-Q_mu f_ec H2(E_mu) + Q1 (1 - H2(e1))).
///
/// Returns the raw value, which may be negative; clamping is the caller's
/// policy decision.
pub fn key_rate_gllp(q: f64, q_mu: f64, e_mu: f64, f_ec: f64, q1: f64, e1: f64) -> Result<f64> {
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
    if !(0.0..=1.0).contains(&q_mu) {
        return Err(Error::OutOfRange {
            name: "q_mu",
            value: q_mu,
            expected: "[0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&e_mu) {
        return Err(Error::OutOfRange {
            name: "e_mu",
            value: e_mu,
            expected: "[0, 1]",
        });
    }
    if !(q1 >= 0.0) || !q1.is_finite() {
        return Err(Error::OutOfRange {
            name: "q1",
            value: q1,
            expected: "[0, inf)",
        });
    }
    if !(0.0..=1.0).contains(&e1) {
        return Err(Error::OutOfRange {
            name: "e1",
            value: e1,
            expected: "[0, 1]",
        });
    }
    Ok(q * (-q_mu * f_ec * h2(e_mu) + q1 * (1.0 - h2(e1))))
}

/// One-decoy security bounds from raw rates: composes the fluctuation bound,
/// the single-photon estimates, and the GLLP rate.
///
/// `n_nu` is the number of decoy pulses sent (the fluctuation band scales with
/// the expected decoy detections n_nu * q_nu).
pub fn one_decoy_bounds(
    mu: f64,
    nu: f64,
    q_mu: f64,
    e_mu: f64,
    q_nu: f64,
    n_nu: u64,
    params: &ProtocolParams,
) -> Result<SecurityBounds> {
    let q_nu_lower = lower_confidence_gain(q_nu, n_nu, params.u_alpha)?;
    let q1_lower = single_photon_gain_lower(mu, nu, q_mu, e_mu, q_nu_lower, params.e0)?;
    if q1_lower <= 0.0 {
        return Ok(SecurityBounds {
            q1_lower,
            e1_upper: None,
            q_nu_lower,
            rate_lower: 0.0,
            secure: false,
        });
    }
    let e1_upper = single_photon_error_upper(e_mu, q_mu, q1_lower)?;
    // H2 needs its argument in [0, 1]; estimates past 1 are already vacuous
    // and provably yield a non-positive rate for any physical E_mu <= 1/2.
    let raw = key_rate_gllp(
        params.q,
        q_mu,
        e_mu,
        params.f_ec,
        q1_lower,
        if e1_upper > 1.0 { 1.0 } else { e1_upper },
    )?;
    let secure = raw > 0.0 && q1_lower <= 1.0 && e1_upper < 0.5;
    Ok(SecurityBounds {
        q1_lower,
        e1_upper: Some(e1_upper),
        q_nu_lower,
        rate_lower: if secure { raw } else { 0.0 },
        secure,
    })
}

/// One-decoy security bounds from measurement records.
pub fn key_rate_lower_one_decoy(
    stats_signal: &ObservedStatistics,
    stats_decoy: &ObservedStatistics,
    params: &ProtocolParams,
) -> Result<SecurityBounds> {
    if stats_signal.intensity.label != IntensityLabel::Signal
        || stats_decoy.intensity.label != IntensityLabel::Decoy
    {
        return Err(Error::InvalidConfig(
            "one-decoy analysis takes a signal record and a decoy record",
        ));
    }
    one_decoy_bounds(
        stats_signal.intensity.mean_photons,
        stats_decoy.intensity.mean_photons,
        stats_signal.gain,
        stats_signal.qber,
        stats_decoy.gain,
        stats_decoy.n_sent,
        params,
    )
}

/// Non-decoy GLLP baseline: every multi-photon pulse is assumed tagged, so
/// Q1 >= Q_mu - (1 - e^-mu (1+mu)) and e1 <= E_mu Q_mu / Q1. Clamped at 0.
pub fn key_rate_nondecoy_gllp(
    q_mu: f64,
    e_mu: f64,
    mu: f64,
    params: &ProtocolParams,
) -> Result<f64> {
    if !(q_mu > 0.0) || q_mu > 1.0 {
        return Err(Error::OutOfRange {
            name: "q_mu",
            value: q_mu,
            expected: "(0, 1]",
        });
    }
    if !(mu > 0.0) {
        return Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            expected: "(0, inf)",
        });
    }
    // multi-photon emission probability, in cancellation-safe form
    let p_multi = -expm1(-mu) - mu * exp(-mu);
    let q1 = q_mu - p_multi;
    if q1 <= 0.0 {
        return Ok(0.0);
    }
    let e1 = e_mu * q_mu / q1;
    let raw = key_rate_gllp(
        params.q,
        q_mu,
        e_mu,
        params.f_ec,
        q1,
        if e1 > 1.0 { 1.0 } else { e1 },
    )?;
    Ok(if raw > 0.0 && e1 < 0.5 { raw } else { 0.0 })
}

/// Scales a per-pulse rate to a session: L = N * R and bits per second.
pub fn key_yield(bounds: &SecurityBounds, n_total: u64, session_seconds: f64) -> Result<KeyYield> {
    if n_total == 0 {
        return Err(Error::ZeroSent);
    }
    if !(session_seconds > 0.0) {
        return Err(Error::OutOfRange {
            name: "session_seconds",
            value: session_seconds,
            expected: "(0, inf)",
        });
    }
    let key_length_bits = bounds.rate_lower * n_total as f64;
    Ok(KeyYield {
        rate_per_pulse: bounds.rate_lower,
        key_length_bits,
        rate_per_second: key_length_bits / session_seconds,
    })
}

//! Entropy and statistical-confidence primitives.

use crate::{Error, Result};

/// Binary entropy H2(x) = -x log2 x - (1-x) log2 (1-x), with H2(0) = H2(1) = 0.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            expected: "[0, 1]",
        });
    }
    Ok(h2(x))
}

/// H2 without the domain check, for internal callers with pre-validated input.
pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * libm::log2(x) - (1.0 - x) * libm::log2(1.0 - x)
}

/// Statistical lower bound on a measured gain: Q(1 - u_alpha/sqrt(N*Q)).
///
/// May be negative for large `u_alpha`; a non-positive result means the data
/// admit no secure bound at that confidence.
pub fn lower_confidence_gain(q_nu: f64, n_nu: u64, u_alpha: f64) -> Result<f64> {
    if n_nu == 0 {
        return Err(Error::ZeroSent);
    }
    if !(q_nu > 0.0) || q_nu > 1.0 {
        return Err(Error::OutOfRange {
            name: "q_nu",
            value: q_nu,
            expected: "(0, 1]",
        });
    }
    if !(u_alpha >= 0.0) {
        return Err(Error::OutOfRange {
            name: "u_alpha",
            value: u_alpha,
            expected: "[0, inf)",
        });
    }
    Ok(q_nu * (1.0 - u_alpha / libm::sqrt(n_nu as f64 * q_nu)))
}

/// Two-sided Gaussian confidence level 1 - erfc(u_alpha/sqrt(2)).
///
/// Saturates to exactly 1.0 in f64 for u_alpha above ~9 (the complement drops
/// below one ulp); use [`confidence_complement_from_u_alpha`] when the tail
/// mass itself is needed.
pub fn confidence_from_u_alpha(u_alpha: f64) -> Result<f64> {
    Ok(1.0 - confidence_complement_from_u_alpha(u_alpha)?)
}

/// Two-sided Gaussian tail mass erfc(u_alpha/sqrt(2)), the complement of the
/// confidence level, exact deep into the tail.
pub fn confidence_complement_from_u_alpha(u_alpha: f64) -> Result<f64> {
    if !(u_alpha >= 0.0) {
        return Err(Error::OutOfRange {
            name: "u_alpha",
            value: u_alpha,
            expected: "[0, inf)",
        });
    }
    Ok(libm::erfc(u_alpha / core::f64::consts::SQRT_2))
}

//! Analytic source + fiber + detector model: yields, gains, and QBERs as
//! functions of distance, parameter fitting from two-intensity measurements,
//! the infinite-decoy rate limit, and secure-distance search.

use crate::bounds::{key_rate_gllp, key_rate_nondecoy_gllp, one_decoy_bounds};
use crate::types::{ObservedStatistics, ProtocolParams};
use crate::{Error, Result, E0};
use libm::{exp, expm1, log, pow};

/// Fiber + receiver channel parameters of a weak-coherent-pulse link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Fiber attenuation in dB/km.
    pub alpha_db_per_km: f64,
    /// Link length in km.
    pub distance_km: f64,
    /// Lumped receiver-side efficiency, detector included, in (0, 1].
    pub eta_receiver: f64,
    /// Background (dark-count) yield per pulse.
    pub y0: f64,
    /// Error probability of a detected signal photon (misalignment etc).
    pub e_det: f64,
    /// Error rate of background detections, 1/2 by definition.
    pub e0: f64,
}

impl ChannelModel {
    /// Validated constructor; e0 is pinned at 1/2.
    pub fn new(
        alpha_db_per_km: f64,
        distance_km: f64,
        eta_receiver: f64,
        y0: f64,
        e_det: f64,
    ) -> Result<Self> {
        if !(alpha_db_per_km >= 0.0) {
            return Err(Error::OutOfRange {
                name: "alpha_db_per_km",
                value: alpha_db_per_km,
                expected: "[0, inf)",
            });
        }
        if !(distance_km >= 0.0) {
            return Err(Error::OutOfRange {
                name: "distance_km",
                value: distance_km,
                expected: "[0, inf)",
            });
        }
        if !(eta_receiver > 0.0) || eta_receiver > 1.0 {
            return Err(Error::OutOfRange {
                name: "eta_receiver",
                value: eta_receiver,
                expected: "(0, 1]",
            });
        }
        if !(0.0..1.0).contains(&y0) {
            return Err(Error::OutOfRange {
                name: "y0",
                value: y0,
                expected: "[0, 1)",
            });
        }
        if !(0.0..0.5).contains(&e_det) {
            return Err(Error::OutOfRange {
                name: "e_det",
                value: e_det,
                expected: "[0, 0.5)",
            });
        }
        Ok(Self {
            alpha_db_per_km,
            distance_km,
            eta_receiver,
            y0,
            e_det,
            e0: E0,
        })
    }

    /// Same channel evaluated at a different distance.
    pub fn with_distance(mut self, distance_km: f64) -> Self {
        self.distance_km = distance_km;
        self
    }
}

/// Overall transmittance eta = eta_receiver * 10^(-alpha d / 10).
pub fn overall_transmittance(ch: &ChannelModel) -> f64 {
    ch.eta_receiver * pow(10.0, -ch.alpha_db_per_km * ch.distance_km / 10.0)
}

/// Yield of an n-photon pulse: Y_n = 1 - (1 - y0)(1 - eta)^n.
pub fn n_photon_yield(ch: &ChannelModel, n: u32) -> f64 {
    let eta = overall_transmittance(ch);
    1.0 - (1.0 - ch.y0) * pow(1.0 - eta, n as f64)
}

/// Gain of a Poissonian pulse of mean photon number mu:
/// Q_mu = sum_n P(n|mu) Y_n = 1 - (1 - y0) e^(-eta mu).
pub fn gain_analytic(ch: &ChannelModel, mu: f64) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            expected: "[0, inf)",
        });
    }
    let eta = overall_transmittance(ch);
    Ok(ch.y0 + (1.0 - ch.y0) * -expm1(-eta * mu))
}

/// QBER of a Poissonian pulse: background detections are random, transmitted
/// photons err at e_det:
/// E_mu = (e0 y0 + e_det (1 - e^(-eta mu))(1 - y0)) / Q_mu.
pub fn qber_analytic(ch: &ChannelModel, mu: f64) -> Result<f64> {
    let q = gain_analytic(ch, mu)?;
    if q <= 0.0 {
        return Err(Error::InconsistentMeasurements(
            "QBER undefined at zero gain",
        ));
    }
    let eta = overall_transmittance(ch);
    Ok((ch.e0 * ch.y0 + ch.e_det * -expm1(-eta * mu) * (1.0 - ch.y0)) / q)
}

/// Channel recovered from two-intensity measurements plus the diagnostic
/// residual of the unused decoy-QBER equation (measured minus model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFit {
    pub model: ChannelModel,
    pub decoy_qber_residual: f64,
}

/// Inverts the gain equations of a signal/decoy measurement pair for
/// (eta, y0), then e_det from the signal QBER.
///
/// The system 1-(1-y0)e^(-eta mu) = Q_mu, 1-(1-y0)e^(-eta nu) = Q_nu has the
/// closed-form solution eta = ln((1-Q_nu)/(1-Q_mu)) / (mu - nu). The supplied
/// attenuation and distance only split total eta into a receiver part; the
/// downstream physics depends on total eta alone.
pub fn fit_channel(
    stats_signal: &ObservedStatistics,
    stats_decoy: &ObservedStatistics,
    distance_km: f64,
    alpha_db_per_km: f64,
) -> Result<ChannelFit> {
    let mu = stats_signal.intensity.mean_photons;
    let nu = stats_decoy.intensity.mean_photons;
    if !(nu > 0.0) || nu >= mu {
        return Err(Error::IntensityOrdering { mu, nu });
    }
    let q_mu = stats_signal.gain;
    let q_nu = stats_decoy.gain;
    if !(q_mu > 0.0) || !(q_nu > 0.0) {
        return Err(Error::InconsistentMeasurements("gains must be positive"));
    }
    if q_nu >= q_mu {
        return Err(Error::InconsistentMeasurements(
            "decoy gain must lie below signal gain for nu < mu",
        ));
    }
    let eta = log((1.0 - q_nu) / (1.0 - q_mu)) / (mu - nu);
    if !(eta > 0.0) || eta > 1.0 {
        return Err(Error::InconsistentMeasurements(
            "implied transmittance outside (0, 1]",
        ));
    }
    let y0 = 1.0 - (1.0 - q_mu) * exp(eta * mu);
    if !(0.0..1.0).contains(&y0) {
        return Err(Error::InconsistentMeasurements(
            "implied background yield outside [0, 1)",
        ));
    }
    let e_det = (stats_signal.qber * q_mu - E0 * y0) / (-expm1(-eta * mu) * (1.0 - y0));
    if !(0.0..0.5).contains(&e_det) {
        return Err(Error::InconsistentMeasurements(
            "implied detection error outside [0, 0.5)",
        ));
    }
    let eta_receiver = eta * pow(10.0, alpha_db_per_km * distance_km / 10.0);
    if eta_receiver > 1.0 {
        return Err(Error::InconsistentMeasurements(
            "implied receiver efficiency above 1",
        ));
    }
    let model = ChannelModel::new(alpha_db_per_km, distance_km, eta_receiver, y0, e_det)?;
    let decoy_qber_residual = stats_decoy.qber - qber_analytic(&model, nu)?;
    Ok(ChannelFit {
        model,
        decoy_qber_residual,
    })
}

/// Key rate in the infinite-data, infinite-decoy limit: the GLLP formula with
/// the model-exact Q1 = mu e^-mu Y1 and e1 = (e0 y0 + e_det eta (1-y0)) / Y1.
/// Clamped at 0.
pub fn perfect_decoy_rate(ch: &ChannelModel, mu: f64, params: &ProtocolParams) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            expected: "(0, inf)",
        });
    }
    let eta = overall_transmittance(ch);
    let y1 = ch.y0 + (1.0 - ch.y0) * eta;
    let q1 = mu * exp(-mu) * y1;
    let e1 = (ch.e0 * ch.y0 + ch.e_det * eta * (1.0 - ch.y0)) / y1;
    let q_mu = gain_analytic(ch, mu)?;
    let e_mu = qber_analytic(ch, mu)?;
    let raw = key_rate_gllp(params.q, q_mu, e_mu, params.f_ec, q1, e1)?;
    Ok(if raw > 0.0 { raw } else { 0.0 })
}

/// Protocol selector for distance sweeps and reach computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// One weak decoy intensity; bounds from the decoy estimate.
    OneDecoy,
    /// No decoys; pessimistic GLLP baseline.
    NonDecoy,
    /// Infinite-decoy, infinite-data limit.
    PerfectDecoy,
}

/// One-decoy rate lower bound computed from the analytic statistics of a
/// channel. `n_nu` (decoy pulses sent) is required when params.u_alpha > 0;
/// expected counts regenerate the fluctuation band deterministically.
pub fn analytic_one_decoy_rate(
    ch: &ChannelModel,
    mu: f64,
    nu: f64,
    n_nu: Option<u64>,
    params: &ProtocolParams,
) -> Result<f64> {
    let q_mu = gain_analytic(ch, mu)?;
    let e_mu = qber_analytic(ch, mu)?;
    let q_nu = gain_analytic(ch, nu)?;
    let n_nu = match n_nu {
        Some(n) => n,
        // the fluctuation term vanishes at u_alpha = 0, any count works
        None if params.u_alpha == 0.0 => 1,
        None => {
            return Err(Error::InvalidConfig(
                "decoy pulse count required when u_alpha > 0",
            ))
        }
    };
    Ok(one_decoy_bounds(mu, nu, q_mu, e_mu, q_nu, n_nu, params)?.rate_lower)
}

/// Non-decoy rate of the analytic channel at a fixed mu.
pub fn analytic_nondecoy_rate(ch: &ChannelModel, mu: f64, params: &ProtocolParams) -> Result<f64> {
    let q_mu = gain_analytic(ch, mu)?;
    let e_mu = qber_analytic(ch, mu)?;
    key_rate_nondecoy_gllp(q_mu, e_mu, mu, params)
}

/// Non-decoy rate maximized over mu on a fixed geometric grid (deterministic).
pub fn analytic_nondecoy_rate_best_mu(ch: &ChannelModel, params: &ProtocolParams) -> Result<f64> {
    const POINTS: usize = 300;
    let (lo, hi) = (1e-4_f64, 1.0_f64);
    let step = log(hi / lo) / (POINTS - 1) as f64;
    let mut best = 0.0;
    for i in 0..POINTS {
        let mu = lo * exp(step * i as f64);
        let r = analytic_nondecoy_rate(ch, mu, params)?;
        if r > best {
            best = r;
        }
    }
    Ok(best)
}

/// Largest distance at which the clamped rate stays positive, by bisection to
/// 0.01 km. `mu = None` requests per-distance mu optimization (non-decoy
/// baseline only); the one-decoy and perfect-decoy paths need a fixed mu.
/// Returns 0 when the link is insecure even at zero distance.
pub fn secure_distance(
    ch_template: &ChannelModel,
    protocol: Protocol,
    mu: Option<f64>,
    nu: Option<f64>,
    n_nu: Option<u64>,
    params: &ProtocolParams,
) -> Result<f64> {
    let rate_at = |d: f64| -> Result<f64> {
        let ch = ch_template.with_distance(d);
        match protocol {
            Protocol::OneDecoy => {
                let mu = mu.ok_or(Error::InvalidConfig("one-decoy reach needs a fixed mu"))?;
                let nu = nu.ok_or(Error::InvalidConfig("one-decoy reach needs a fixed nu"))?;
                analytic_one_decoy_rate(&ch, mu, nu, n_nu, params)
            }
            Protocol::NonDecoy => match mu {
                Some(mu) => analytic_nondecoy_rate(&ch, mu, params),
                None => analytic_nondecoy_rate_best_mu(&ch, params),
            },
            Protocol::PerfectDecoy => {
                let mu = mu.ok_or(Error::InvalidConfig("perfect-decoy reach needs a fixed mu"))?;
                perfect_decoy_rate(&ch, mu, params)
            }
        }
    };
    if rate_at(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 100.0;
    while rate_at(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e5 {
            return Err(Error::InvalidConfig(
                "rate stays positive beyond 1e5 km; channel model degenerate",
            ));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

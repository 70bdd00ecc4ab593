//! Pulse-level Monte Carlo of a BB84 + one-decoy session: randomized
//! intensity pattern, Poissonian photon numbers, channel or eavesdropper
//! transmission, dark counts, double-click handling, sifting, and
//! decoy-consistency attack detection.
//!
//! Randomness is drawn from a per-pulse ChaCha8 stream (stream id = pulse
//! index), so a session tallies identically for any chunk partition and any
//! chunk evaluation order.

use crate::channel::{gain_analytic, overall_transmittance, qber_analytic, ChannelModel};
use crate::types::{validate_send_fractions, IntensityLabel, IntensitySetting, ObservedStatistics};
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use libm::{exp, expm1, fabs, sqrt};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Photon-number-splitting eavesdropper.
///
/// Single-photon pulses are discarded with probability
/// `block_fraction_single`. With `lossless_forward` the eavesdropper splits
/// one photon off every multi-photon pulse and delivers the remainder over a
/// perfect line; without it she has no better line than the fiber itself, so
/// multi-photon pulses pass untouched and only the single-photon blocking
/// acts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackModel {
    pub block_fraction_single: f64,
    pub lossless_forward: bool,
}

impl AttackModel {
    /// Validated constructor: block fraction in [0, 1].
    pub fn new(block_fraction_single: f64, lossless_forward: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&block_fraction_single) {
            return Err(Error::OutOfRange {
                name: "block_fraction_single",
                value: block_fraction_single,
                expected: "[0, 1]",
            });
        }
        Ok(Self {
            block_fraction_single,
            lossless_forward,
        })
    }
}

/// Full description of one simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub n_pulses: u64,
    pub intensities: Vec<IntensitySetting>,
    pub channel: ChannelModel,
    pub attack: Option<AttackModel>,
    pub rng_seed: u64,
    /// Probability a detection survives basis sifting.
    pub basis_match_prob: f64,
}

impl SessionConfig {
    /// Validated constructor with the standard 1/2 sifting probability.
    pub fn new(
        n_pulses: u64,
        intensities: Vec<IntensitySetting>,
        channel: ChannelModel,
        attack: Option<AttackModel>,
        rng_seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n_pulses,
            intensities,
            channel,
            attack,
            rng_seed,
            basis_match_prob: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks the invariants (fields are public).
    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::InvalidConfig("n_pulses must be positive"));
        }
        if self.intensities.is_empty() {
            return Err(Error::InvalidConfig("at least one intensity required"));
        }
        validate_send_fractions(&self.intensities)?;
        if !(0.0..=1.0).contains(&self.basis_match_prob) {
            return Err(Error::OutOfRange {
                name: "basis_match_prob",
                value: self.basis_match_prob,
                expected: "[0, 1]",
            });
        }
        if let Some(att) = &self.attack {
            AttackModel::new(att.block_fraction_single, att.lossless_forward)?;
        }
        Ok(())
    }
}

/// Aggregate outcome of a session (or of one chunk of it).
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTally {
    /// Per-intensity counts and derived gain/QBER, in config order.
    pub per_intensity: Vec<ObservedStatistics>,
    /// Slots where two click causes coincided (bit assigned at random).
    pub double_click_count: u64,
    /// Double-click slots that were tallied as errors.
    pub double_click_errors: u64,
    /// Post-sifting detection counts, in config order.
    pub sifted_lengths: Vec<u64>,
}

impl SessionTally {
    /// Merges two partial tallies; associative and commutative.
    pub fn merge(mut self, other: &SessionTally) -> Result<SessionTally> {
        if self.per_intensity.len() != other.per_intensity.len() {
            return Err(Error::InvalidConfig(
                "tallies to merge cover different intensity sets",
            ));
        }
        for (a, b) in self.per_intensity.iter_mut().zip(&other.per_intensity) {
            if a.intensity != b.intensity {
                return Err(Error::InvalidConfig(
                    "tallies to merge cover different intensity sets",
                ));
            }
            a.n_sent += b.n_sent;
            a.n_detected += b.n_detected;
            a.n_error += b.n_error;
            let (gain, qber) = ratios(a.n_sent, a.n_detected, a.n_error);
            a.gain = gain;
            a.qber = qber;
        }
        for (a, b) in self.sifted_lengths.iter_mut().zip(&other.sifted_lengths) {
            *a += b;
        }
        self.double_click_count += other.double_click_count;
        self.double_click_errors += other.double_click_errors;
        Ok(self)
    }
}

fn ratios(sent: u64, detected: u64, errors: u64) -> (f64, f64) {
    let gain = if sent == 0 {
        0.0
    } else {
        detected as f64 / sent as f64
    };
    let qber = if detected == 0 {
        0.0
    } else {
        errors as f64 / detected as f64
    };
    (gain, qber)
}

/// 53-bit uniform draw in [0, 1).
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Poisson sample by CDF inversion; exact for the mean photon numbers in use
/// (mu of order 1, tail cap far beyond representable probability).
fn sample_poisson(rng: &mut ChaCha8Rng, mu: f64) -> u32 {
    if mu == 0.0 {
        return 0;
    }
    let u = unit_f64(rng);
    let mut p = exp(-mu);
    let mut cum = p;
    let mut k = 0u32;
    while u >= cum && k < 64 {
        k += 1;
        p *= mu / k as f64;
        cum += p;
    }
    k
}

/// Simulates pulses [start, end) of the session into a fresh tally.
fn simulate_range(cfg: &SessionConfig, start: u64, end: u64) -> SessionTally {
    let k = cfg.intensities.len();
    let mut sent = vec![0u64; k];
    let mut detected = vec![0u64; k];
    let mut errors = vec![0u64; k];
    let mut sifted = vec![0u64; k];
    let mut double_clicks = 0u64;
    let mut double_click_errors = 0u64;

    let mut cum_fraction = Vec::with_capacity(k);
    let mut acc = 0.0;
    for s in &cfg.intensities {
        acc += s.send_fraction;
        cum_fraction.push(acc);
    }
    let eta = overall_transmittance(&cfg.channel);
    let y0 = cfg.channel.y0;
    let e_det = cfg.channel.e_det;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for pulse in start..end {
        // independent randomness per pulse: chunking cannot change outcomes
        rng.set_stream(pulse);
        rng.set_word_pos(0);

        let u = unit_f64(&mut rng);
        let idx = cum_fraction.iter().position(|&c| u < c).unwrap_or(k - 1);
        sent[idx] += 1;
        let n = sample_poisson(&mut rng, cfg.intensities[idx].mean_photons);

        let mut arrivals = 0u32;
        match (&cfg.attack, n) {
            (_, 0) => {}
            (Some(att), 1) => {
                let blocked = unit_f64(&mut rng) < att.block_fraction_single;
                // short-circuit: the lossless path must not consume a draw
                if !blocked && (att.lossless_forward || unit_f64(&mut rng) < eta) {
                    arrivals = 1;
                }
            }
            (Some(att), n) if att.lossless_forward => {
                // one photon split off and kept, the rest always arrive
                arrivals = n - 1;
            }
            (_, n) => {
                for _ in 0..n {
                    if unit_f64(&mut rng) < eta {
                        arrivals += 1;
                    }
                }
            }
        }

        let dark = unit_f64(&mut rng) < y0;
        if !dark && arrivals == 0 {
            continue;
        }
        detected[idx] += 1;

        let (error, is_double) = if dark {
            // a background click lands on either detector with equal chance
            // and, together with any arrivals, makes the slot ambiguous
            (unit_f64(&mut rng) < 0.5, arrivals > 0)
        } else {
            let mut wrong = 0u32;
            for _ in 0..arrivals {
                if unit_f64(&mut rng) < e_det {
                    wrong += 1;
                }
            }
            if wrong > 0 && wrong < arrivals {
                (unit_f64(&mut rng) < 0.5, true)
            } else {
                (wrong > 0, false)
            }
        };
        if error {
            errors[idx] += 1;
        }
        if is_double {
            double_clicks += 1;
            if error {
                double_click_errors += 1;
            }
        }
        if unit_f64(&mut rng) < cfg.basis_match_prob {
            sifted[idx] += 1;
        }
    }

    let per_intensity = cfg
        .intensities
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (gain, qber) = ratios(sent[i], detected[i], errors[i]);
            ObservedStatistics {
                intensity: *s,
                n_sent: sent[i],
                n_detected: detected[i],
                n_error: errors[i],
                gain,
                qber,
            }
        })
        .collect();
    SessionTally {
        per_intensity,
        double_click_count: double_clicks,
        double_click_errors,
        sifted_lengths: sifted,
    }
}

/// Runs a full session. Deterministic in the seed.
pub fn simulate_session(cfg: &SessionConfig) -> Result<SessionTally> {
    simulate_session_chunked(cfg, 1)
}

/// Runs a session split into `n_chunks` contiguous ranges and merges the
/// partial tallies. The result is identical for every chunk count.
pub fn simulate_session_chunked(cfg: &SessionConfig, n_chunks: u64) -> Result<SessionTally> {
    cfg.validate()?;
    if n_chunks == 0 {
        return Err(Error::InvalidConfig("n_chunks must be positive"));
    }
    let n_chunks = n_chunks.min(cfg.n_pulses);
    let chunk = cfg.n_pulses / n_chunks;
    let remainder = cfg.n_pulses % n_chunks;
    let mut tally: Option<SessionTally> = None;
    let mut start = 0u64;
    for i in 0..n_chunks {
        let len = chunk + u64::from(i < remainder);
        let part = simulate_range(cfg, start, start + len);
        start += len;
        tally = Some(match tally {
            None => part,
            Some(t) => t.merge(&part)?,
        });
    }
    Ok(tally.expect("n_chunks >= 1"))
}

/// Per-intensity deviation of observed gain and QBER from a channel model,
/// in standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScore {
    pub label: IntensityLabel,
    pub mean_photons: f64,
    pub gain_z: f64,
    pub qber_z: f64,
}

/// Outcome of the decoy-consistency check.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Clean,
    Anomalous(Vec<ZScore>),
}

/// Deviations of every intensity's observed gain and QBER from the expected
/// channel. Gain sigma is binomial over sent pulses; QBER sigma is binomial
/// over the expected detection count.
pub fn intensity_z_scores(tally: &SessionTally, expected: &ChannelModel) -> Result<Vec<ZScore>> {
    let mut out = Vec::with_capacity(tally.per_intensity.len());
    for s in &tally.per_intensity {
        if s.n_sent == 0 {
            return Err(Error::ZeroSent);
        }
        let mu = s.intensity.mean_photons;
        let q_exp = gain_analytic(expected, mu)?;
        let e_exp = qber_analytic(expected, mu)?;
        let n = s.n_sent as f64;
        let gain_z = z_value(s.gain, q_exp, q_exp * (1.0 - q_exp) / n);
        let qber_z = z_value(s.qber, e_exp, e_exp * (1.0 - e_exp) / (n * q_exp));
        out.push(ZScore {
            label: s.intensity.label,
            mean_photons: mu,
            gain_z,
            qber_z,
        });
    }
    Ok(out)
}

fn z_value(observed: f64, expected: f64, variance: f64) -> f64 {
    let diff = observed - expected;
    if variance <= 0.0 {
        return if diff == 0.0 {
            0.0
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    diff / sqrt(variance)
}

/// Flags the session as anomalous when any per-intensity gain or QBER sits
/// more than `u_alpha` standard deviations from the expected channel.
pub fn detect_attack(
    tally: &SessionTally,
    expected: &ChannelModel,
    u_alpha: f64,
) -> Result<Verdict> {
    if tally.per_intensity.len() < 2 {
        return Err(Error::InvalidConfig(
            "consistency check needs at least two intensities",
        ));
    }
    let scores = intensity_z_scores(tally, expected)?;
    let anomalous = scores
        .iter()
        .any(|z| fabs(z.gain_z) > u_alpha || fabs(z.qber_z) > u_alpha);
    Ok(if anomalous {
        Verdict::Anomalous(scores)
    } else {
        Verdict::Clean
    })
}

/// Expected gain of intensity `mu` under the photon-number-splitting attack,
/// in closed form (Poisson-weighted detection probabilities):
///
/// - n = 0: dark counts only, y0
/// - n = 1: blocked with probability beta, else delivered (surely when
///   lossless, else with probability eta), dark counts filling in
/// - n >= 2, lossless: one photon removed, the rest always arrive
/// - n >= 2, lossy: pulse passes untouched, each photon arrives w.p. eta
pub fn pns_expected_gain(ch: &ChannelModel, mu: f64, attack: &AttackModel) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            expected: "[0, inf)",
        });
    }
    let beta = attack.block_fraction_single;
    let y0 = ch.y0;
    let eta = overall_transmittance(ch);
    let p_single = if attack.lossless_forward { 1.0 } else { eta };
    let single_detect = beta * y0 + (1.0 - beta) * (1.0 - (1.0 - y0) * (1.0 - p_single));
    // multi-photon emission probability 1 - e^-mu (1 + mu), cancellation-safe
    let p_multi = -expm1(-mu) - mu * exp(-mu);
    let multi_detect = if attack.lossless_forward {
        p_multi
    } else {
        // sum_{n>=2} P(n|mu) (1 - (1-y0)(1-eta)^n)
        let om = 1.0 - eta;
        p_multi - (1.0 - y0) * exp(-mu) * (expm1(mu * om) - mu * om)
    };
    Ok(exp(-mu) * y0 + mu * exp(-mu) * single_detect + multi_detect)
}

/// Single-photon block fraction that makes the lossless attack reproduce the
/// honest gain at intensity `mu` exactly (the stealth calibration). None when
/// the multi-photon uplift exceeds the honest gain for every block fraction.
pub fn pns_stealth_block_fraction(ch: &ChannelModel, mu: f64) -> Result<Option<f64>> {
    if !(mu > 0.0) {
        return Err(Error::OutOfRange {
            name: "mu",
            value: mu,
            expected: "(0, inf)",
        });
    }
    let pass = AttackModel::new(0.0, true)?;
    let block = AttackModel::new(1.0, true)?;
    let g0 = pns_expected_gain(ch, mu, &pass)?;
    let g1 = pns_expected_gain(ch, mu, &block)?;
    let target = gain_analytic(ch, mu)?;
    if target < g1 || target > g0 {
        return Ok(None);
    }
    Ok(Some((g0 - target) / (g0 - g1)))
}

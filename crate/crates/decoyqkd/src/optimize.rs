//! Source-parameter optimization (mean photon numbers and decoy fraction)
//! and distance sweeps over the analytic channel model.
//!
//! The search is a coarse grid scan followed by shrinking refinement rounds
//! around the incumbent (10x narrower per round, clipped to the original
//! ranges, at least two rounds, continued until the rate stops improving).
//! Derivative-free search is deliberate: the rate surface has a kink where
//! the bound clamps to zero. Evaluation order is fixed and improvement is
//! strict, so ties break toward smaller mu, then smaller nu, then smaller
//! fraction, and the result is deterministic.

use crate::channel::{
    analytic_nondecoy_rate, analytic_nondecoy_rate_best_mu, analytic_one_decoy_rate,
    perfect_decoy_rate, ChannelModel, Protocol,
};
use crate::types::ProtocolParams;
use crate::{Error, Result};
use alloc::vec::Vec;
use libm::{exp, log};

/// Grid point counts per search axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridResolution {
    pub mu: usize,
    pub nu: usize,
    pub fraction: usize,
}

impl Default for GridResolution {
    fn default() -> Self {
        Self {
            mu: 40,
            nu: 40,
            fraction: 20,
        }
    }
}

/// Channel, pulse budget, protocol parameters, and search space.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationRequest {
    pub channel: ChannelModel,
    pub n_total: u64,
    pub params: ProtocolParams,
    /// Signal intensity search interval; upper end capped at 2 (weak-pulse
    /// regime, beyond which the multi-photon fraction defeats the protocol).
    pub mu_range: (f64, f64),
    pub nu_range: (f64, f64),
    pub fraction_range: (f64, f64),
    pub grid: GridResolution,
}

impl OptimizationRequest {
    /// Request with the default search space over a channel and pulse budget.
    pub fn new(channel: ChannelModel, n_total: u64, params: ProtocolParams) -> Self {
        Self {
            channel,
            n_total,
            params,
            mu_range: (0.05, 1.0),
            nu_range: (0.01, 0.5),
            fraction_range: (0.01, 0.5),
            grid: GridResolution::default(),
        }
    }

    /// Re-checks the invariants (fields are public).
    pub fn validate(&self) -> Result<()> {
        if self.n_total == 0 {
            return Err(Error::InvalidConfig("n_total must be positive"));
        }
        for (name, (lo, hi)) in [
            ("mu_range", self.mu_range),
            ("nu_range", self.nu_range),
            ("fraction_range", self.fraction_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
                return Err(Error::InvalidConfig(name));
            }
        }
        if self.mu_range.1 > 2.0 {
            return Err(Error::OutOfRange {
                name: "mu_range.1",
                value: self.mu_range.1,
                expected: "(0, 2]",
            });
        }
        if self.fraction_range.1 >= 1.0 {
            return Err(Error::OutOfRange {
                name: "fraction_range.1",
                value: self.fraction_range.1,
                expected: "(0, 1)",
            });
        }
        if self.grid.mu == 0 || self.grid.nu == 0 || self.grid.fraction == 0 {
            return Err(Error::InvalidConfig("grid resolutions must be positive"));
        }
        Ok(())
    }
}

/// Best parameter tuple found; all-zero when no grid point is secure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumPoint {
    pub mu: f64,
    pub nu: f64,
    pub fraction: f64,
    pub rate: f64,
}

const MIN_REFINE_ROUNDS: u32 = 2;
const MAX_REFINE_ROUNDS: u32 = 12;
const REFINE_CONVERGENCE: f64 = 1e-15;

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    };
    (0..n).map(move |i| lo + step * i as f64)
}

/// Maximizes the one-decoy rate lower bound over (mu, nu, decoy fraction).
/// Deterministic; the result is never below any coarse-grid evaluation.
pub fn optimize_intensities(req: &OptimizationRequest) -> Result<OptimumPoint> {
    req.validate()?;
    let evaluate = |mu: f64, nu: f64, fraction: f64| -> Result<f64> {
        let n_nu = (fraction * req.n_total as f64) as u64;
        if req.params.u_alpha > 0.0 && n_nu == 0 {
            return Ok(0.0);
        }
        analytic_one_decoy_rate(&req.channel, mu, nu, Some(n_nu), &req.params)
    };
    let scan = |mu_r: (f64, f64),
                nu_r: (f64, f64),
                fr_r: (f64, f64),
                mut best: OptimumPoint|
     -> Result<OptimumPoint> {
        for mu in linspace(mu_r.0, mu_r.1, req.grid.mu) {
            for nu in linspace(nu_r.0, nu_r.1, req.grid.nu) {
                if !(0.0 < nu && nu < mu) {
                    continue;
                }
                for fraction in linspace(fr_r.0, fr_r.1, req.grid.fraction) {
                    let rate = evaluate(mu, nu, fraction)?;
                    if rate > best.rate {
                        best = OptimumPoint {
                            mu,
                            nu,
                            fraction,
                            rate,
                        };
                    }
                }
            }
        }
        Ok(best)
    };

    let zero = OptimumPoint {
        mu: 0.0,
        nu: 0.0,
        fraction: 0.0,
        rate: 0.0,
    };
    let mut best = scan(req.mu_range, req.nu_range, req.fraction_range, zero)?;
    let mut denom = 1.0;
    for round in 1..=MAX_REFINE_ROUNDS {
        if best.rate == 0.0 {
            break;
        }
        denom *= 10.0;
        let shrink = |range: (f64, f64), center: f64| -> (f64, f64) {
            let half = 0.5 * (range.1 - range.0) / denom;
            (
                if center - half > range.0 {
                    center - half
                } else {
                    range.0
                },
                if center + half < range.1 {
                    center + half
                } else {
                    range.1
                },
            )
        };
        let before = best.rate;
        best = scan(
            shrink(req.mu_range, best.mu),
            shrink(req.nu_range, best.nu),
            shrink(req.fraction_range, best.fraction),
            best,
        )?;
        if round >= MIN_REFINE_ROUNDS && best.rate - before <= REFINE_CONVERGENCE {
            break;
        }
    }
    Ok(best)
}

/// Parameter policy for a distance sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// Evaluate every distance at the given tuple. Protocols without a decoy
    /// ignore `nu` and `decoy_fraction`.
    Fixed {
        mu: f64,
        nu: f64,
        decoy_fraction: f64,
    },
    /// Re-run the parameter search at every distance.
    Reoptimized,
}

/// Perfect-decoy rate maximized over mu on the same fixed geometric grid the
/// non-decoy baseline uses.
fn perfect_decoy_rate_best_mu(ch: &ChannelModel, params: &ProtocolParams) -> Result<f64> {
    const POINTS: usize = 300;
    let (lo, hi) = (1e-4_f64, 1.0_f64);
    let step = log(hi / lo) / (POINTS - 1) as f64;
    let mut best = 0.0;
    for i in 0..POINTS {
        let mu = lo * exp(step * i as f64);
        let r = perfect_decoy_rate(ch, mu, params)?;
        if r > best {
            best = r;
        }
    }
    Ok(best)
}

/// Rate-versus-distance curve: evaluates `d_min, d_min + step, ...` up to
/// `d_max` inclusive and returns (distance, rate) rows.
pub fn sweep_distance(
    req: &OptimizationRequest,
    d_min: f64,
    d_max: f64,
    step: f64,
    protocol: Protocol,
    mode: SweepMode,
) -> Result<Vec<(f64, f64)>> {
    req.validate()?;
    if !(d_min >= 0.0 && d_min <= d_max && d_min.is_finite() && d_max.is_finite()) {
        return Err(Error::InvalidConfig("need 0 <= d_min <= d_max"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::OutOfRange {
            name: "step",
            value: step,
            expected: "(0, inf)",
        });
    }
    if let SweepMode::Fixed { mu, nu, .. } = mode {
        if protocol == Protocol::OneDecoy && !(0.0 < nu && nu < mu) {
            return Err(Error::IntensityOrdering { mu, nu });
        }
    }
    // small slack so d_max itself survives accumulated rounding
    let n_steps = ((d_max - d_min) / step + 1e-9) as usize;
    let mut rows = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let d = d_min + step * i as f64;
        let ch = req.channel.with_distance(d);
        let rate = match (protocol, mode) {
            (
                Protocol::OneDecoy,
                SweepMode::Fixed {
                    mu,
                    nu,
                    decoy_fraction,
                },
            ) => {
                let n_nu = (decoy_fraction * req.n_total as f64) as u64;
                if req.params.u_alpha > 0.0 && n_nu == 0 {
                    0.0
                } else {
                    analytic_one_decoy_rate(&ch, mu, nu, Some(n_nu), &req.params)?
                }
            }
            (Protocol::OneDecoy, SweepMode::Reoptimized) => {
                let mut sub = req.clone();
                sub.channel = ch;
                optimize_intensities(&sub)?.rate
            }
            (Protocol::NonDecoy, SweepMode::Fixed { mu, .. }) => {
                analytic_nondecoy_rate(&ch, mu, &req.params)?
            }
            (Protocol::NonDecoy, SweepMode::Reoptimized) => {
                analytic_nondecoy_rate_best_mu(&ch, &req.params)?
            }
            (Protocol::PerfectDecoy, SweepMode::Fixed { mu, .. }) => {
                perfect_decoy_rate(&ch, mu, &req.params)?
            }
            (Protocol::PerfectDecoy, SweepMode::Reoptimized) => {
                perfect_decoy_rate_best_mu(&ch, &req.params)?
            }
        };
        rows.push((d, rate));
    }
    Ok(rows)
}

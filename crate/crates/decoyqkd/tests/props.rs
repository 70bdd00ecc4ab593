//! Property-based checks of the security-bound algebra, channel model,
//! fit inversion, and search/sweep monotonicities.

use decoyqkd::bounds::{key_rate_gllp, one_decoy_bounds};
use decoyqkd::channel::{
    analytic_nondecoy_rate_best_mu, analytic_one_decoy_rate, fit_channel, gain_analytic,
    qber_analytic, secure_distance, ChannelModel, Protocol,
};
use decoyqkd::math::{binary_entropy, confidence_from_u_alpha, lower_confidence_gain};
use decoyqkd::types::{IntensityLabel, IntensitySetting, ObservedStatistics, ProtocolParams};
use proptest::prelude::*;

fn channel_strategy() -> impl Strategy<Value = ChannelModel> {
    (
        0.1..0.3f64,
        0.0..40.0f64,
        0.05..0.3f64,
        1e-6..5e-5f64,
        0.002..0.012f64,
    )
        .prop_map(|(alpha, d, eta_rx, y0, e_det)| {
            ChannelModel::new(alpha, d, eta_rx, y0, e_det).unwrap()
        })
}

fn intensity_pair() -> impl Strategy<Value = (f64, f64)> {
    (0.4..1.0f64, 0.05..0.25f64).prop_filter("nu well below mu", |(mu, nu)| *nu < mu / 2.0)
}

fn finite_params(u_alpha: f64) -> ProtocolParams {
    ProtocolParams::new(0.4478, 1.22, u_alpha).unwrap()
}

/// Rate lower bound from analytic statistics of a channel at fixed counts.
fn rate_from_channel(
    ch: &ChannelModel,
    mu: f64,
    nu: f64,
    e_mu: Option<f64>,
    n_nu: u64,
    u_alpha: f64,
) -> f64 {
    let q_mu = gain_analytic(ch, mu).unwrap();
    let e_mu = e_mu.unwrap_or_else(|| qber_analytic(ch, mu).unwrap());
    let q_nu = gain_analytic(ch, nu).unwrap();
    one_decoy_bounds(mu, nu, q_mu, e_mu, q_nu, n_nu, &finite_params(u_alpha))
        .unwrap()
        .rate_lower
}

proptest! {
    #[test]
    fn entropy_is_symmetric(x in 0.0..=1.0f64) {
        let a = binary_entropy(x).unwrap();
        let b = binary_entropy(1.0 - x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn entropy_rejects_out_of_domain(x in prop_oneof![(-10.0..-1e-12f64), (1.0 + 1e-12..10.0f64)]) {
        prop_assert!(binary_entropy(x).is_err());
    }

    #[test]
    fn confidence_penalty_grows_with_u_alpha_and_shrinks_with_count(
        q_nu in 1e-4..0.2f64,
        (u1, u2) in (0.0..12.0f64, 0.0..12.0f64),
        (n1, n2) in (10_000u64..100_000_000, 10_000u64..100_000_000),
    ) {
        let (u_lo, u_hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        let (n_lo, n_hi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
        let a = lower_confidence_gain(q_nu, n_lo, u_lo).unwrap();
        let b = lower_confidence_gain(q_nu, n_lo, u_hi).unwrap();
        prop_assert!(a >= b, "wider band must not raise the lower bound");
        let c = lower_confidence_gain(q_nu, n_lo, u_hi).unwrap();
        let d = lower_confidence_gain(q_nu, n_hi, u_hi).unwrap();
        prop_assert!(c <= d, "more decoy data must not lower the bound");
        prop_assert!(d <= q_nu);
    }

    #[test]
    fn confidence_level_is_monotone(u1 in 0.0..12.0f64, u2 in 0.0..12.0f64) {
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        prop_assert!(confidence_from_u_alpha(lo).unwrap() <= confidence_from_u_alpha(hi).unwrap());
    }

    #[test]
    fn error_product_identity_holds(
        ch in channel_strategy(),
        (mu, nu) in intensity_pair(),
        n_nu in 10_000u64..100_000_000,
        u_alpha in 0.0..12.0f64,
    ) {
        let q_mu = gain_analytic(&ch, mu).unwrap();
        let e_mu = qber_analytic(&ch, mu).unwrap();
        let q_nu = gain_analytic(&ch, nu).unwrap();
        let b = one_decoy_bounds(mu, nu, q_mu, e_mu, q_nu, n_nu, &finite_params(u_alpha)).unwrap();
        if let Some(e1) = b.e1_upper {
            let product = e1 * b.q1_lower;
            let target = e_mu * q_mu;
            prop_assert!(
                ((product - target) / target).abs() <= 1e-12,
                "e1_upper * q1_lower = {product:e} vs e_mu * q_mu = {target:e}"
            );
        }
    }

    #[test]
    fn gain_closed_form_equals_poisson_sum(
        ch in channel_strategy(),
        mu in 0.01..1.5f64,
    ) {
        let eta = decoyqkd::channel::overall_transmittance(&ch);
        let mut sum = 0.0;
        let mut weight = (-mu).exp();
        for n in 0..=150u32 {
            if n > 0 {
                weight *= mu / n as f64;
            }
            sum += weight * (1.0 - (1.0 - ch.y0) * (1.0 - eta).powi(n as i32));
        }
        let closed = gain_analytic(&ch, mu).unwrap();
        prop_assert!((closed - sum).abs() <= 1e-10, "closed {closed:e} vs sum {sum:e}");
    }

    #[test]
    fn fit_inverts_the_forward_model(
        ch in channel_strategy(),
        (mu, nu) in intensity_pair(),
    ) {
        let signal = ObservedStatistics::from_rates(
            IntensitySetting::new(IntensityLabel::Signal, mu, 0.9).unwrap(),
            90_000_000,
            gain_analytic(&ch, mu).unwrap(),
            qber_analytic(&ch, mu).unwrap(),
        )
        .unwrap();
        let decoy = ObservedStatistics::from_rates(
            IntensitySetting::new(IntensityLabel::Decoy, nu, 0.1).unwrap(),
            10_000_000,
            gain_analytic(&ch, nu).unwrap(),
            qber_analytic(&ch, nu).unwrap(),
        )
        .unwrap();
        let fit = fit_channel(&signal, &decoy, ch.distance_km, ch.alpha_db_per_km).unwrap();
        let m = &fit.model;
        prop_assert!(((m.eta_receiver - ch.eta_receiver) / ch.eta_receiver).abs() <= 1e-8);
        prop_assert!(((m.y0 - ch.y0) / ch.y0).abs() <= 1e-8);
        prop_assert!(((m.e_det - ch.e_det) / ch.e_det).abs() <= 1e-8);
        prop_assert!(fit.decoy_qber_residual.abs() <= 1e-8);
    }

    #[test]
    fn rate_never_rises_with_error_rate(
        ch in channel_strategy(),
        (mu, nu) in intensity_pair(),
        (e1, e2) in (0.0..0.1f64, 0.0..0.1f64),
        n_nu in 10_000u64..100_000_000,
        u_alpha in 0.0..12.0f64,
    ) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let r_lo = rate_from_channel(&ch, mu, nu, Some(lo), n_nu, u_alpha);
        let r_hi = rate_from_channel(&ch, mu, nu, Some(hi), n_nu, u_alpha);
        prop_assert!(r_lo + 1e-15 >= r_hi, "rate({lo}) = {r_lo:e} < rate({hi}) = {r_hi:e}");
    }

    #[test]
    fn rate_never_rises_with_confidence_width(
        ch in channel_strategy(),
        (mu, nu) in intensity_pair(),
        (u1, u2) in (0.0..12.0f64, 0.0..12.0f64),
        n_nu in 10_000u64..100_000_000,
    ) {
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        let r_lo = rate_from_channel(&ch, mu, nu, None, n_nu, lo);
        let r_hi = rate_from_channel(&ch, mu, nu, None, n_nu, hi);
        prop_assert!(r_lo + 1e-15 >= r_hi);
    }

    #[test]
    fn rate_never_drops_with_decoy_count(
        ch in channel_strategy(),
        (mu, nu) in intensity_pair(),
        (n1, n2) in (10_000u64..100_000_000, 10_000u64..100_000_000),
        u_alpha in 0.0..12.0f64,
    ) {
        let (lo, hi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
        let r_lo = rate_from_channel(&ch, mu, nu, None, lo, u_alpha);
        let r_hi = rate_from_channel(&ch, mu, nu, None, hi, u_alpha);
        prop_assert!(r_hi + 1e-15 >= r_lo);
    }

    #[test]
    fn rate_never_rises_with_distance(
        ch in channel_strategy(),
        (d1, d2) in (0.0..60.0f64, 0.0..60.0f64),
    ) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let params = finite_params(10.0);
        let r_near =
            analytic_one_decoy_rate(&ch.with_distance(lo), 0.8, 0.12, Some(10_000_000), &params)
                .unwrap();
        let r_far =
            analytic_one_decoy_rate(&ch.with_distance(hi), 0.8, 0.12, Some(10_000_000), &params)
                .unwrap();
        prop_assert!(r_near + 1e-15 >= r_far);
    }

    #[test]
    fn gllp_rate_agrees_with_ratio_form(
        q in 0.1..1.0f64,
        q_mu in 1e-4..0.2f64,
        e_mu in 0.0..0.2f64,
        f_ec in 1.0..2.0f64,
        omega in 0.0..1.0f64,
        e1 in 0.0..0.5f64,
    ) {
        let q1 = omega * q_mu;
        let direct = key_rate_gllp(q, q_mu, e_mu, f_ec, q1, e1).unwrap();
        let h = |x: f64| binary_entropy(x).unwrap();
        let ratio_form = q * q_mu * (-f_ec * h(e_mu) + omega * (1.0 - h(e1)));
        prop_assert!(
            (direct - ratio_form).abs() <= 1e-12 * direct.abs().max(1.0),
            "direct {direct:e} vs ratio form {ratio_form:e}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    // bisection per case makes this one expensive; a few cases suffice on
    // top of the deterministic corner checks in the unit suites
    #[test]
    fn decoy_reach_dominates_nondecoy_reach(
        ch in channel_strategy(),
    ) {
        let params = ProtocolParams::default().asymptotic();
        let d_one = secure_distance(&ch, Protocol::OneDecoy, Some(0.8), Some(0.12), None, &params)
            .unwrap();
        let d_non = secure_distance(&ch, Protocol::NonDecoy, None, None, None, &params).unwrap();
        prop_assert!(
            d_one > d_non,
            "one-decoy reach {d_one} must beat non-decoy reach {d_non}"
        );
        let r_non_best = analytic_nondecoy_rate_best_mu(&ch, &params).unwrap();
        let r_one = analytic_one_decoy_rate(&ch, 0.8, 0.12, None, &params).unwrap();
        prop_assert!(r_one > 0.0 || r_non_best == 0.0);
    }
}

//! Weighted-MMSE reformulation of the per-user rate.
//!
//! For any weight `s > 0` and receiver `μ`,
//! `ln(1 + SINR_n) ≥ −s·mse_n(μ) + ln s + 1`, with equality at the MMSE
//! receiver and `s = 1/mmse_n`. Replacing each rate by this surrogate turns
//! the max-min energy-efficiency problem into one that is convex in `W` once
//! `(s, μ)` are frozen. The subtractive form
//! `g_n(η) = surrogate_n − η·(‖w_n‖² + overhead)` is what the inner solves
//! push up.

use crate::error::{invalid, Result};
use crate::model::{ee_ratio, BeamformerSet, ChannelSet, LinkGains, NetworkConfig, C64};

/// Receivers, weights, EE factor and inner objective carried between solves.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryState {
    pub mu: Vec<C64>,
    pub s: Vec<f64>,
    pub eta: f64,
    pub tau: f64,
}

impl AuxiliaryState {
    /// MMSE receivers first, then the weights they imply.
    pub fn closed_form(w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<Self> {
        Ok(Self::from_gains(&LinkGains::new(w, h, cfg)?))
    }

    pub(crate) fn from_gains(gains: &LinkGains) -> Self {
        let n = gains.users();
        let mu = (0..n).map(|u| gains.mmse_receiver(u)).collect();
        let s = (0..n).map(|u| 1.0 / gains.mmse_value(u)).collect();
        AuxiliaryState {
            mu,
            s,
            eta: 0.0,
            tau: 0.0,
        }
    }
}

fn check_weight(s_n: f64) -> Result<()> {
    if !(s_n > 0.0 && s_n.is_finite()) {
        return Err(invalid(format!("weight must be positive and finite, got {s_n}")));
    }
    Ok(())
}

fn check_user(n: usize, cfg: &NetworkConfig) -> Result<()> {
    if n >= cfg.users() {
        return Err(invalid(format!("user index {n} out of range 0..{}", cfg.users())));
    }
    Ok(())
}

/// Optimal weight `1/mmse_n` for the current beamformers; always `≥ 1`.
pub fn weight_update(n: usize, w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<f64> {
    check_user(n, cfg)?;
    Ok(1.0 / LinkGains::new(w, h, cfg)?.mmse_value(n))
}

pub(crate) fn surrogate(gains: &LinkGains, n: usize, s_n: f64, mu_n: C64) -> f64 {
    -s_n * gains.mse(n, mu_n) + s_n.ln() + 1.0
}

/// `−s_n·mse_n(μ_n) + ln s_n + 1`, a lower bound on the rate that is tight at
/// the closed-form `(s, μ)`.
pub fn surrogate_rate(
    n: usize,
    s_n: f64,
    mu_n: C64,
    w: &BeamformerSet,
    h: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<f64> {
    check_user(n, cfg)?;
    check_weight(s_n)?;
    Ok(surrogate(&LinkGains::new(w, h, cfg)?, n, s_n, mu_n))
}

/// `g_n(η)` term by term: interference, own-power, distortion, log weight,
/// noise and overhead contributions.
pub(crate) fn g_expanded(
    gains: &LinkGains,
    n: usize,
    eta: f64,
    s_n: f64,
    mu_n: C64,
    user_power: f64,
    overhead: f64,
) -> f64 {
    let mu2 = mu_n.norm_sqr();
    let distortion = (C64::new(1.0, 0.0) - mu_n * gains.cross(n, n)).norm_sqr();
    -s_n * mu2 * gains.interference(n) - eta * user_power - s_n * distortion + s_n.ln() + 1.0
        - s_n * mu2 * gains.noise(n)
        - eta * overhead
}

pub(crate) fn g_compact(
    gains: &LinkGains,
    n: usize,
    eta: f64,
    s_n: f64,
    mu_n: C64,
    user_power: f64,
    overhead: f64,
) -> f64 {
    surrogate(gains, n, s_n, mu_n) - eta * (user_power + overhead)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid(format!("EE factor must be non-negative, got {eta}")));
    }
    Ok(())
}

/// Parameterized subtractive objective `g_n(η)` through its expanded form.
#[allow(clippy::too_many_arguments)]
pub fn g_value(
    n: usize,
    eta: f64,
    s_n: f64,
    mu_n: C64,
    w: &BeamformerSet,
    h: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<f64> {
    check_user(n, cfg)?;
    check_weight(s_n)?;
    check_eta(eta)?;
    let gains = LinkGains::new(w, h, cfg)?;
    Ok(g_expanded(&gains, n, eta, s_n, mu_n, w.user_power(n), cfg.overhead()))
}

/// `g_n(η)` as `surrogate − η·(‖w_n‖² + overhead)`.
#[allow(clippy::too_many_arguments)]
pub fn g_value_compact(
    n: usize,
    eta: f64,
    s_n: f64,
    mu_n: C64,
    w: &BeamformerSet,
    h: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<f64> {
    check_user(n, cfg)?;
    check_weight(s_n)?;
    check_eta(eta)?;
    let gains = LinkGains::new(w, h, cfg)?;
    Ok(g_compact(&gains, n, eta, s_n, mu_n, w.user_power(n), cfg.overhead()))
}

pub(crate) fn ee_factor_with(
    gains: &LinkGains,
    w: &BeamformerSet,
    s: &[f64],
    mu: &[C64],
    overhead: f64,
) -> Result<f64> {
    let mut eta = f64::INFINITY;
    for n in 0..gains.users() {
        let ratio = ee_ratio(surrogate(gains, n, s[n], mu[n]), w.user_power(n), overhead)?;
        eta = eta.min(ratio);
    }
    Ok(eta.max(0.0))
}

/// Smallest surrogate energy efficiency across users, clamped at zero.
pub fn ee_factor(
    w: &BeamformerSet,
    s: &[f64],
    mu: &[C64],
    h: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<f64> {
    let n = cfg.users();
    if s.len() != n || mu.len() != n {
        return Err(invalid(format!("expected {n} weights and receivers")));
    }
    for &s_n in s {
        check_weight(s_n)?;
    }
    let gains = LinkGains::new(w, h, cfg)?;
    ee_factor_with(&gains, w, s, mu, cfg.overhead())
}

/// Both orderings of the minimax in the parameterized EE problem.
///
/// Returns `(min_n max_{s_n,μ_n} f_n, max_{s,μ} min_n f_n)`. Each `f_n`
/// depends only on `(s_n, μ_n)`, so the joint maximizer is the stack of the
/// per-user closed forms.
pub fn lemma1_sides(w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<(f64, f64)> {
    let gains = LinkGains::new(w, h, cfg)?;
    let n = cfg.users();
    let ratio = |u: usize, s_u: f64, mu_u: C64| {
        ee_ratio(surrogate(&gains, u, s_u, mu_u), w.user_power(u), cfg.overhead())
    };

    let mut min_of_max = f64::INFINITY;
    for u in 0..n {
        let mu_u = gains.mmse_receiver(u);
        let s_u = 1.0 / gains.mmse_value(u);
        min_of_max = min_of_max.min(ratio(u, s_u, mu_u)?);
    }

    let joint = AuxiliaryState::from_gains(&gains);
    let mut max_of_min = f64::INFINITY;
    for u in 0..n {
        max_of_min = max_of_min.min(ratio(u, joint.s[u], joint.mu[u])?);
    }
    Ok((min_of_max, max_of_min))
}

/// True when both minimax orderings coincide with `min_n user_ee(n)` to 1e-9.
pub fn lemma1_check(w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<bool> {
    let (lhs, rhs) = lemma1_sides(w, h, cfg)?;
    let gains = LinkGains::new(w, h, cfg)?;
    let mut min_ee = f64::INFINITY;
    for n in 0..cfg.users() {
        min_ee = min_ee.min(ee_ratio(gains.rate(n), w.user_power(n), cfg.overhead())?);
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    Ok(close(lhs, rhs) && close(lhs, min_ee) && close(rhs, min_ee))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rate, user_ee};
    use crate::testutil::random_instance;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(w: f64) -> (BeamformerSet, ChannelSet, NetworkConfig) {
        let cfg = NetworkConfig::uniform(1, 1, 1, 100.0, 1.0, 10.0, 1.0).unwrap();
        let h = ChannelSet::from_rows(DMatrix::from_element(1, 1, C64::new(1.0, 0.0))).unwrap();
        (BeamformerSet::new(DMatrix::from_element(1, 1, C64::new(w, 0.0))), h, cfg)
    }

    fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - r * (hi - lo);
        let mut b = lo + r * (hi - lo);
        let (mut fa, mut fb) = (f(a), f(b));
        for _ in 0..200 {
            if fa < fb {
                lo = a;
                a = b;
                fa = fb;
                b = lo + r * (hi - lo);
                fb = f(b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - r * (hi - lo);
                fa = f(a);
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn weight_update_examples() {
        let (w, h, cfg) = single(0.0);
        assert_eq!(weight_update(0, &w, &h, &cfg).unwrap(), 1.0);
        let (w, h, cfg) = single(3f64.sqrt());
        assert_relative_eq!(weight_update(0, &w, &h, &cfg).unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn weight_update_maximizes_surrogate_on_a_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (w, h, cfg) = random_instance(&mut rng, 2, 2, 1);
            let gains = LinkGains::new(&w, &h, &cfg).unwrap();
            for n in 0..cfg.users() {
                let mu = gains.mmse_receiver(n);
                let s_opt = weight_update(n, &w, &h, &cfg).unwrap();
                let at_opt = surrogate(&gains, n, s_opt, mu);
                assert_relative_eq!(at_opt, rate(n, &w, &h, &cfg).unwrap(), max_relative = 1e-12);
                let grid_best = (1..=20_000)
                    .map(|i| surrogate(&gains, n, 0.01 * i as f64 * s_opt / 100.0, mu))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(grid_best <= at_opt + 1e-14);
                assert!(at_opt - grid_best < 1e-6);
            }
        }
    }

    #[test]
    fn surrogate_examples() {
        let (w, h, cfg) = single(1.0);
        assert_eq!(surrogate_rate(0, 1.0, C64::new(0.0, 0.0), &w, &h, &cfg).unwrap(), 0.0);
        assert!(surrogate_rate(0, 0.0, C64::new(0.0, 0.0), &w, &h, &cfg).is_err());
        assert!(surrogate_rate(0, -1.0, C64::new(0.0, 0.0), &w, &h, &cfg).is_err());
        let s = weight_update(0, &w, &h, &cfg).unwrap();
        let mu = crate::model::mmse_receiver(0, &w, &h, &cfg).unwrap();
        assert_relative_eq!(
            surrogate_rate(0, s, mu, &w, &h, &cfg).unwrap(),
            rate(0, &w, &h, &cfg).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn surrogate_argmax_in_weight_is_inverse_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (w, h, cfg) = random_instance(&mut rng, 1, 3, 2);
            let gains = LinkGains::new(&w, &h, &cfg).unwrap();
            for n in 0..cfg.users() {
                let mu = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let expected = 1.0 / gains.mse(n, mu);
                let found = golden_max(|s| surrogate(&gains, n, s, mu), 1e-6, 10.0 * expected);
                assert_relative_eq!(found, expected, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn g_value_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let (w, h, cfg) = random_instance(&mut rng, 2, 2, 1);
            let aux = AuxiliaryState::closed_form(&w, &h, &cfg).unwrap();
            for n in 0..cfg.users() {
                let r = rate(n, &w, &h, &cfg).unwrap();
                let g0 = g_value(n, 0.0, aux.s[n], aux.mu[n], &w, &h, &cfg).unwrap();
                assert_relative_eq!(g0, r, max_relative = 1e-12);

                let ee = user_ee(n, &w, &h, &cfg).unwrap();
                let root = g_value(n, ee, aux.s[n], aux.mu[n], &w, &h, &cfg).unwrap();
                assert!(root.abs() < 1e-12 * r.max(1.0));

                let big = g_value(n, 10.0 * ee + 1e-3, aux.s[n], aux.mu[n], &w, &h, &cfg).unwrap();
                assert!(big < 0.0);
            }
        }
        let (w, h, cfg) = single(1.0);
        assert!(g_value(0, -1.0, 1.0, C64::new(0.0, 0.0), &w, &h, &cfg).is_err());
    }

    #[test]
    fn ee_factor_examples() {
        let (w, h, cfg) = single(1.0);
        let aux = AuxiliaryState::closed_form(&w, &h, &cfg).unwrap();
        assert_relative_eq!(
            ee_factor(&w, &aux.s, &aux.mu, &h, &cfg).unwrap(),
            user_ee(0, &w, &h, &cfg).unwrap(),
            epsilon = 1e-15
        );

        // Two identical users on orthogonal unit channels.
        let cfg = NetworkConfig::uniform(2, 1, 1, 4.0, 1.0, 1.0, 1.0).unwrap();
        let h = ChannelSet::from_rows(DMatrix::identity(2, 2).map(|v: f64| C64::new(v, 0.0))).unwrap();
        let w = BeamformerSet::new(DMatrix::identity(2, 2).map(|v: f64| C64::new(1.5 * v, 0.0)));
        let aux = AuxiliaryState::closed_form(&w, &h, &cfg).unwrap();
        let common = user_ee(0, &w, &h, &cfg).unwrap();
        assert_relative_eq!(user_ee(1, &w, &h, &cfg).unwrap(), common, epsilon = 1e-15);
        assert_relative_eq!(ee_factor(&w, &aux.s, &aux.mu, &h, &cfg).unwrap(), common, epsilon = 1e-15);
    }

    #[test]
    fn ee_factor_under_estimates_with_suboptimal_auxiliaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..50 {
            let (w, h, cfg) = random_instance(&mut rng, 2, 2, 1);
            let n = cfg.users();
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
            let mu: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let min_ee = (0..n)
                .map(|u| user_ee(u, &w, &h, &cfg).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(ee_factor(&w, &s, &mu, &h, &cfg).unwrap() <= min_ee + 1e-15);
        }
    }

    #[test]
    fn lemma1_holds_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (w, h, cfg) = random_instance(&mut rng, 2, 2, 1);
            assert!(lemma1_check(&w, &h, &cfg).unwrap());
        }
        let (w, h, cfg) = single(2.0);
        let (lhs, rhs) = lemma1_sides(&w, &h, &cfg).unwrap();
        let ee = user_ee(0, &w, &h, &cfg).unwrap();
        assert_relative_eq!(lhs, ee, epsilon = 1e-15);
        assert_relative_eq!(rhs, ee, epsilon = 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, proptest};

        proptest! {
            #[test]
            fn surrogate_never_exceeds_rate(seed in any::<u64>(), s in 1e-3f64..1e3, re in -5.0f64..5.0, im in -5.0f64..5.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (w, h, cfg) = random_instance(&mut rng, 2, 2, 1);
                for n in 0..cfg.users() {
                    let r = rate(n, &w, &h, &cfg).unwrap();
                    let sur = surrogate_rate(n, s, C64::new(re, im), &w, &h, &cfg).unwrap();
                    prop_assert!(sur <= r + 1e-12 * r.max(1.0));
                }
            }

            #[test]
            fn g_is_affine_decreasing_and_routes_agree(seed in any::<u64>(), s in 1e-2f64..1e2, eta in 0.0f64..10.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (w, h, cfg) = random_instance(&mut rng, 2, 2, 1);
                let mu = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                for n in 0..cfg.users() {
                    let a = g_value(n, eta, s, mu, &w, &h, &cfg).unwrap();
                    let b = g_value_compact(n, eta, s, mu, &w, &h, &cfg).unwrap();
                    prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
                    let slope = w.user_power(n) + cfg.overhead();
                    let later = g_value(n, eta + 1.0, s, mu, &w, &h, &cfg).unwrap();
                    prop_assert!(later < a);
                    prop_assert!(((a - later) - slope).abs() <= 1e-10 * slope.max(1.0));
                }
            }
        }
    }
}

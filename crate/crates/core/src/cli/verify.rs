//! Randomized property suites behind `maxmin-ee verify`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{maxmin_ee, oracle_single_user_ee, SolveOptions};
use crate::error::Result;
use crate::model::{mmse_receiver, rate, user_ee, BeamformerSet, ChannelSet, LinkGains, NetworkConfig, C64};
use crate::wmmse::{g_value, g_value_compact, lemma1_sides, surrogate_rate, weight_update};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Identities,
    Monotonic,
    Oracle,
    Lemma1,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Monotonic => "monotonic",
            Suite::Oracle => "oracle",
            Suite::Lemma1 => "lemma1",
            Suite::All => "all",
        }
    }
}

/// Worst deviation of one property over all trials.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyReport {
    pub suite: &'static str,
    pub property: &'static str,
    pub worst: f64,
    pub limit: f64,
    pub trials: usize,
    /// Seed of the first failing trial; rerunning with it and one trial
    /// reproduces the failure.
    pub failing_seed: Option<u64>,
}

impl PropertyReport {
    fn new(suite: &'static str, property: &'static str, limit: f64) -> Self {
        PropertyReport {
            suite,
            property,
            worst: 0.0,
            limit,
            trials: 0,
            failing_seed: None,
        }
    }

    fn record(&mut self, value: f64, seed: u64) {
        self.trials += 1;
        // NaN counts as a failure.
        if !(value <= self.worst) {
            self.worst = if value.is_nan() { f64::INFINITY } else { value };
        }
        if !(value <= self.limit) && self.failing_seed.is_none() {
            self.failing_seed = Some(seed);
        }
    }

    pub fn passed(&self) -> bool {
        self.failing_seed.is_none()
    }

    pub fn line(&self) -> String {
        let mut line = format!(
            "{} {}.{} worst={:.3e} limit={:.0e} trials={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.property,
            self.worst,
            self.limit,
            self.trials
        );
        if let Some(seed) = self.failing_seed {
            line.push_str(&format!(" reproduce: --suite {} --seed {seed} --trials 1", self.suite));
        }
        line
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Relative error measured against at least `floor`. Near-zero rates cancel
/// to about 1e-16 absolute in the surrogate.
fn rel_floor(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn rate_rel(a: f64, b: f64) -> f64 {
    rel_floor(a, b, 1.0)
}

fn uniform_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random network with entries of `H` and `W` uniform on the unit square,
/// budgets in `[0.5, 5]` W, noise in `[0.1, 2]` W, `P_c = 0.1` W and
/// `P_0 = 1` W.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    k: usize,
    mt: usize,
    nt: usize,
) -> Result<(BeamformerSet, ChannelSet, NetworkConfig)> {
    let cfg = NetworkConfig::new(
        k,
        mt,
        nt,
        (0..k).map(|_| rng.random_range(0.5..5.0)).collect(),
        0.1,
        1.0,
        (0..k * nt).map(|_| rng.random_range(0.1..2.0)).collect(),
    )?;
    let (m, n) = (cfg.antennas(), cfg.users());
    let h = DMatrix::from_fn(n, m, |_, _| uniform_c64(rng));
    let w = DMatrix::from_fn(m, n, |_, _| uniform_c64(rng));
    Ok((BeamformerSet::new(w), ChannelSet::from_rows(h)?, cfg))
}

fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=2))
}

fn trial_seeds(seed: u64, trials: usize) -> impl Iterator<Item = u64> {
    (0..trials as u64).map(move |t| seed.wrapping_add(t))
}

fn identities(seed: u64, trials: usize) -> Result<Vec<PropertyReport>> {
    let mut rate_mmse = PropertyReport::new("identities", "rate_equals_neg_ln_mmse", 1e-10);
    let mut tight = PropertyReport::new("identities", "surrogate_tight_at_closed_form", 1e-10);
    let mut bound = PropertyReport::new("identities", "surrogate_below_rate", 1e-12);
    let mut routes = PropertyReport::new("identities", "g_expanded_equals_compact", 1e-10);
    for ts in trial_seeds(seed, trials) {
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let (k, mt, nt) = random_shape(&mut rng);
        let (w, h, cfg) = random_instance(&mut rng, k, mt, nt)?;
        let gains = LinkGains::new(&w, &h, &cfg)?;
        let (mut d_rate, mut d_tight, mut d_bound, mut d_routes) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
        for n in 0..cfg.users() {
            let r = rate(n, &w, &h, &cfg)?;
            d_rate = d_rate.max(rate_rel(r, -gains.mmse_value(n).ln()));
            let s = weight_update(n, &w, &h, &cfg)?;
            let mu = mmse_receiver(n, &w, &h, &cfg)?;
            d_tight = d_tight.max(rate_rel(surrogate_rate(n, s, mu, &w, &h, &cfg)?, r));
            let s_any = rng.random_range(0.2..5.0);
            let mu_any = uniform_c64(&mut rng);
            d_bound = d_bound.max(surrogate_rate(n, s_any, mu_any, &w, &h, &cfg)? - r);
            let eta = rng.random_range(0.0..2.0);
            let a = g_value(n, eta, s_any, mu_any, &w, &h, &cfg)?;
            let b = g_value_compact(n, eta, s_any, mu_any, &w, &h, &cfg)?;
            d_routes = d_routes.max(rate_rel(a, b));
        }
        rate_mmse.record(d_rate, ts);
        tight.record(d_tight, ts);
        bound.record(d_bound, ts);
        routes.record(d_routes, ts);
    }
    Ok(vec![rate_mmse, tight, bound, routes])
}

fn lemma1(seed: u64, trials: usize) -> Result<Vec<PropertyReport>> {
    let mut orderings = PropertyReport::new("lemma1", "minimax_orderings_agree", 1e-10);
    let mut value = PropertyReport::new("lemma1", "minimax_equals_min_ee", 1e-10);
    for ts in trial_seeds(seed, trials) {
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let (k, mt, nt) = random_shape(&mut rng);
        let (w, h, cfg) = random_instance(&mut rng, k, mt, nt)?;
        let (lhs, rhs) = lemma1_sides(&w, &h, &cfg)?;
        let min_ee = (0..cfg.users())
            .map(|n| user_ee(n, &w, &h, &cfg))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        orderings.record(rel_floor(lhs, rhs, 1e-3), ts);
        value.record(rel_floor(lhs, min_ee, 1e-3).max(rel_floor(rhs, min_ee, 1e-3)), ts);
    }
    Ok(vec![orderings, value])
}

fn monotonic(seed: u64, trials: usize) -> Result<Vec<PropertyReport>> {
    let mut tau = PropertyReport::new("monotonic", "inner_tau_non_decreasing", 1e-6);
    let mut eta = PropertyReport::new("monotonic", "outer_eta_non_decreasing", 1e-6);
    let mut root = PropertyReport::new("monotonic", "final_g_within_eps", 1e-4);
    let mut converged = PropertyReport::new("monotonic", "runs_not_converged", 0.0);
    let opts = SolveOptions::default();
    for ts in trial_seeds(seed, trials) {
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let k = rng.random_range(1..=2);
        let mt = rng.random_range(1..=2);
        let (_, h, cfg) = random_instance(&mut rng, k, mt, 1)?;
        let res = maxmin_ee(&h, &cfg, &opts)?;
        let (d_tau, d_eta) = res.trace.worst_decrease();
        tau.record(d_tau.max(0.0), ts);
        eta.record(d_eta.max(0.0), ts);
        converged.record(if res.converged() { 0.0 } else { 1.0 }, ts);
        if res.converged() {
            let g = res.trace.outer.last().map_or(f64::INFINITY, |o| o.g.abs());
            root.record(g, ts);
        }
    }
    Ok(vec![tau, eta, root, converged])
}

fn oracle(seed: u64, trials: usize) -> Result<Vec<PropertyReport>> {
    let mut gap = PropertyReport::new("oracle", "single_user_relative_gap", 1e-3);
    let opts = SolveOptions::default();
    for ts in trial_seeds(seed, trials) {
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let mt = rng.random_range(1..=4);
        let (_, h, cfg) = random_instance(&mut rng, 1, mt, 1)?;
        let res = maxmin_ee(&h, &cfg, &opts)?;
        let (_, best) = oracle_single_user_ee(&h, &cfg)?;
        gap.record(if res.converged() { rel(res.min_ee, best) } else { f64::INFINITY }, ts);
    }
    Ok(vec![gap])
}

/// Runs `suite` on `trials` instances; trial `t` draws from seed `seed + t`.
pub fn run_suite(suite: Suite, seed: u64, trials: usize) -> Result<Vec<PropertyReport>> {
    Ok(match suite {
        Suite::Identities => identities(seed, trials)?,
        Suite::Monotonic => monotonic(seed, trials)?,
        Suite::Oracle => oracle(seed, trials)?,
        Suite::Lemma1 => lemma1(seed, trials)?,
        Suite::All => {
            let mut all = identities(seed, trials)?;
            all.extend(monotonic(seed, trials)?);
            all.extend(oracle(seed, trials)?);
            all.extend(lemma1(seed, trials)?);
            all
        }
    })
}

use std::time::Instant;

use super::{
    initial_beamformers, project_onto_budgets, InnerRecord, IterationTrace, OuterRecord, RunStatus,
    SolveOptions, SolveResult,
};
use crate::conic::{build_rate_socp, solve_socp_with};
use crate::error::Result;
use crate::model::{ChannelSet, LinkGains, NetworkConfig};
use crate::wmmse::{ee_factor_with, surrogate, AuxiliaryState};

/// Max-min rate by WMMSE alternation: closed-form `(μ, s)` at the current
/// beamformers, then the conic max-min surrogate problem for `W`. Stops when
/// the surrogate objective moves by at most `eps_inner`; `max_inner` caps the
/// iterations.
pub fn maxmin_rate(h: &ChannelSet, cfg: &NetworkConfig, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    let mut w = initial_beamformers(&opts.init, h, cfg)?;
    let mut gains = LinkGains::new(&w, h, cfg)?;
    let mut current = (0..cfg.users()).map(|n| gains.rate(n)).fold(f64::INFINITY, f64::min);
    let mut prev = current;
    let mut trace = IterationTrace::default();
    let mut status = RunStatus::IterationCap;

    for it in 0..opts.max_inner {
        let aux = AuxiliaryState::from_gains(&gains);
        let socp = build_rate_socp(&aux.s, &aux.mu, h, cfg)?;
        let start = Instant::now();
        let sol = solve_socp_with(&socp.problem, &opts.solver)?;
        let seconds = start.elapsed().as_secs_f64();

        let mut cand = socp.layout.extract(&sol.x);
        project_onto_budgets(&mut cand, cfg);
        let cand_gains = LinkGains::new_unchecked(&cand, h, cfg);
        let r = (0..cfg.users())
            .map(|n| surrogate(&cand_gains, n, aux.s[n], aux.mu[n]))
            .fold(f64::INFINITY, f64::min);
        if !sol.is_optimal() && !(r >= current) {
            break;
        }
        let surrogate_ee = ee_factor_with(&cand_gains, &cand, &aux.s, &aux.mu, cfg.overhead())?;
        w = cand;
        gains = cand_gains;
        current = r;
        trace.inner.push(InnerRecord {
            outer: 0,
            inner: it,
            eta: 0.0,
            tau: r,
            min_surrogate_ee: surrogate_ee,
            bs_powers: w.per_bs_powers(cfg),
            solver_iterations: sol.iterations,
            solve_seconds: seconds,
        });
        if it >= 1 && (r - prev).abs() <= opts.eps_inner {
            status = RunStatus::Converged;
            break;
        }
        prev = r;
    }
    trace.outer.push(OuterRecord {
        eta: 0.0,
        g: current,
        inner_iterations: trace.inner.len(),
    });
    SolveResult::assemble(w, h, cfg, current, status, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::C64;
    use crate::testutil::random_instance;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_user_uses_full_power_mrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let (_, h, cfg) = random_instance(&mut rng, 1, 3, 1);
            let res = maxmin_rate(&h, &cfg, &SolveOptions::default()).unwrap();
            assert!(res.converged());
            let p = cfg.power_budget(0);
            let expect = (p * h.gain(0) / cfg.noise(0)).ln_1p();
            assert!((res.min_rate - expect).abs() <= 1e-4, "{} vs {expect}", res.min_rate);
        }
    }

    #[test]
    fn symmetric_pair_gets_equal_rates() {
        let cfg = NetworkConfig::uniform(2, 2, 1, 2.0, 0.1, 1.0, 0.5).unwrap();
        let a = C64::new(0.8, 0.1);
        let b = C64::new(0.3, -0.2);
        let z = C64::new(0.0, 0.0);
        let h = ChannelSet::from_channels(&[
            DVector::from_vec(vec![a, b, z, z]),
            DVector::from_vec(vec![z, z, a, b]),
        ])
        .unwrap();
        let res = maxmin_rate(&h, &cfg, &SolveOptions::default()).unwrap();
        assert!(res.converged());
        assert!((res.rates[0] - res.rates[1]).abs() <= 1e-4);
    }

    #[test]
    fn surrogate_objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let (_, h, cfg) = random_instance(&mut rng, 2, 2, 1);
        let res = maxmin_rate(&h, &cfg, &SolveOptions::default()).unwrap();
        let (tau, _) = res.trace.worst_decrease();
        assert!(tau <= 1e-6);
        assert!((res.objective - res.min_rate).abs() <= 1e-3);
    }
}

use super::{project_onto_budgets, IterationTrace, RunStatus, SolveResult};
use crate::conic::{build_powermin_socp, solve_socp_with, SolveStatus, SolverSettings};
use crate::error::{invalid, Result};
use crate::model::{BeamformerSet, ChannelSet, NetworkConfig};

/// Relative back-off applied to rate targets. Targets read off a max-min
/// solution sit on the boundary of the achievable region, where the feasible
/// set has no interior and the conic solve stalls.
pub const TARGET_BACKOFF: f64 = 1e-6;

/// Residual level at which an iteration-capped solve is still accepted.
const REDUCED_ACCURACY: f64 = 1e-6;

/// Minimum total power meeting per-user rate targets under the per-BS
/// budgets. Rates convert to SINR targets as `γ = eʳ − 1` after scaling by
/// `1 − TARGET_BACKOFF`. The objective of the result is the minimized total
/// power.
pub fn power_min_baseline(targets: &[f64], h: &ChannelSet, cfg: &NetworkConfig) -> Result<SolveResult> {
    if targets.len() != cfg.users() {
        return Err(invalid(format!(
            "expected {} rate targets, got {}",
            cfg.users(),
            targets.len()
        )));
    }
    if targets.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("rate targets must be positive and finite"));
    }
    let gamma: Vec<f64> = targets.iter().map(|r| (r * (1.0 - TARGET_BACKOFF)).exp_m1()).collect();
    let socp = build_powermin_socp(&gamma, h, cfg, true)?;
    let settings = SolverSettings {
        tol: 1e-9,
        ..SolverSettings::default()
    };
    let sol = solve_socp_with(&socp.problem, &settings)?;
    let (mut w, status) = match sol.status {
        SolveStatus::Optimal => (socp.layout.extract(&sol.x), RunStatus::Converged),
        SolveStatus::MaxIters if sol.max_residual() <= REDUCED_ACCURACY => {
            (socp.layout.extract(&sol.x), RunStatus::Converged)
        }
        SolveStatus::MaxIters => (socp.layout.extract(&sol.x), RunStatus::IterationCap),
        SolveStatus::Infeasible | SolveStatus::Unbounded => (
            BeamformerSet::zeros(cfg.antennas(), cfg.users()),
            RunStatus::Infeasible,
        ),
    };
    project_onto_budgets(&mut w, cfg);
    let total = w.total_power();
    SolveResult::assemble(w, h, cfg, total, status, IterationTrace::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{initial_beamformers, Init};
    use crate::model::UserMetrics;
    use crate::testutil::random_instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_user_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for r in [0.01, 0.5, 1.5] {
            let (_, h, cfg) = random_instance(&mut rng, 1, 2, 1);
            let cfg = cfg.with_power_budgets(vec![1e3]).unwrap();
            let res = power_min_baseline(&[r], &h, &cfg).unwrap();
            assert!(res.converged());
            let expect = (r * (1.0 - TARGET_BACKOFF)).exp_m1() * cfg.noise(0) / h.gain(0);
            assert!((res.objective - expect).abs() <= 1e-6 * expect);
            let exact = r.exp_m1() * cfg.noise(0) / h.gain(0);
            assert!((res.objective - exact).abs() <= 1e-5 * exact);
            assert!((res.rates[0] - r).abs() <= 2e-6 * r.max(1.0));
        }
    }

    #[test]
    fn targets_from_a_feasible_point_need_no_more_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let (_, h, cfg) = random_instance(&mut rng, 2, 2, 1);
            let w = initial_beamformers(&Init::Random(7), &h, &cfg).unwrap();
            let rates = UserMetrics::evaluate(&w, &h, &cfg).unwrap().rates;
            let res = power_min_baseline(&rates, &h, &cfg).unwrap();
            assert!(res.converged());
            assert!(res.objective <= w.total_power() * (1.0 + 1e-6));
        }
    }

    #[test]
    fn unreachable_targets_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let (_, h, cfg) = random_instance(&mut rng, 1, 2, 1);
        let res = power_min_baseline(&[60.0], &h, &cfg).unwrap();
        assert_eq!(res.status, RunStatus::Infeasible);
        assert!(power_min_baseline(&[0.0], &h, &cfg).is_err());
        assert!(power_min_baseline(&[1.0, 1.0], &h, &cfg).is_err());
    }
}

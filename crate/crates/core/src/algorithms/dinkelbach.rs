use std::time::Instant;

use super::{
    initial_beamformers, project_onto_budgets, InnerRecord, IterationTrace, OuterRecord, RunStatus,
    SolveOptions, SolveResult,
};
use crate::conic::{build_inner_socp, solve_socp_with};
use crate::error::Result;
use crate::model::{BeamformerSet, ChannelSet, LinkGains, NetworkConfig};
use crate::wmmse::{ee_factor_with, g_compact, AuxiliaryState};

/// `min_n g_n(η)` at `(W, s, μ)`.
fn min_g(gains: &LinkGains, w: &BeamformerSet, eta: f64, aux: &AuxiliaryState, overhead: f64) -> f64 {
    (0..gains.users())
        .map(|n| g_compact(gains, n, eta, aux.s[n], aux.mu[n], w.user_power(n), overhead))
        .fold(f64::INFINITY, f64::min)
}

/// Max-min energy efficiency by Dinkelbach iterations on `η` around a
/// WMMSE block-ascent inner loop.
///
/// Each inner iteration solves the conic subproblem for `W` at frozen
/// `(s, μ)`, then refreshes `μ` and `s` in closed form; `τ = min_n g_n(η)` is
/// non-decreasing along the way. The inner loop stops once `τ` moves by at
/// most `eps_inner` (after at least two iterations), and the outer loop once
/// `|g(η)| ≤ eps_outer`.
pub fn maxmin_ee(h: &ChannelSet, cfg: &NetworkConfig, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    let overhead = cfg.overhead();
    let mut w = initial_beamformers(&opts.init, h, cfg)?;
    let mut gains = LinkGains::new(&w, h, cfg)?;
    let mut aux = AuxiliaryState::from_gains(&gains);
    let mut eta = ee_factor_with(&gains, &w, &aux.s, &aux.mu, overhead)?;
    let mut trace = IterationTrace::default();
    let mut status = RunStatus::IterationCap;

    for outer in 0..opts.max_outer {
        let mut current = min_g(&gains, &w, eta, &aux, overhead);
        let mut tau_prev = 0.0;
        let mut count = 0;
        for inner in 0..opts.max_inner {
            let socp = build_inner_socp(eta, &aux.s, &aux.mu, h, cfg)?;
            let start = Instant::now();
            let sol = solve_socp_with(&socp.problem, &opts.solver)?;
            let seconds = start.elapsed().as_secs_f64();

            let mut cand = socp.layout.extract(&sol.x);
            project_onto_budgets(&mut cand, cfg);
            let cand_gains = LinkGains::new_unchecked(&cand, h, cfg);
            let surrogate_ee = ee_factor_with(&cand_gains, &cand, &aux.s, &aux.mu, overhead)?;
            let cand_aux = AuxiliaryState::from_gains(&cand_gains);
            let tau = min_g(&cand_gains, &cand, eta, &cand_aux, overhead);
            if !sol.is_optimal() && !(tau >= current) {
                // An unconverged solve that does not improve is discarded.
                break;
            }
            w = cand;
            gains = cand_gains;
            aux = cand_aux;
            current = tau;
            count += 1;
            trace.inner.push(InnerRecord {
                outer,
                inner,
                eta,
                tau,
                min_surrogate_ee: surrogate_ee,
                bs_powers: w.per_bs_powers(cfg),
                solver_iterations: sol.iterations,
                solve_seconds: seconds,
            });
            if inner >= 1 && (tau - tau_prev).abs() <= opts.eps_inner {
                break;
            }
            tau_prev = tau;
        }
        trace.outer.push(OuterRecord {
            eta,
            g: current,
            inner_iterations: count,
        });
        if current.abs() <= opts.eps_outer {
            status = RunStatus::Converged;
            break;
        }
        let next = ee_factor_with(&gains, &w, &aux.s, &aux.mu, overhead)?;
        if count == 0 && next <= eta {
            // No progress is possible from here.
            break;
        }
        eta = next;
    }

    SolveResult::assemble(w, h, cfg, eta, status, trace)
}

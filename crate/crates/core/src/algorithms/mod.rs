//! Iterative beamforming drivers, the power-minimization baselines and the
//! small-scale oracles used to check them.

mod dinkelbach;
mod oracle;
mod powermin;
mod rate;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::conic::SolverSettings;
use crate::error::{invalid, Result};
use crate::model::{BeamformerSet, ChannelSet, NetworkConfig, UserMetrics, C64};

pub use dinkelbach::maxmin_ee;
pub use oracle::{oracle_grid_lower_bound, oracle_single_user_ee};
pub use powermin::power_min_baseline;
pub use rate::maxmin_rate;

/// Slack allowed on per-BS budgets when checking a starting point.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Starting beamformers.
#[derive(Clone, Debug)]
pub enum Init {
    /// Per-user MRT directions with equal power, scaled onto the tightest
    /// per-BS budget.
    Mrt,
    /// Complex Gaussian directions scaled to a random fraction of the
    /// budgets.
    Random(u64),
    Given(BeamformerSet),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub eps_inner: f64,
    pub eps_outer: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub init: Init,
    pub solver: SolverSettings,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_inner: 1e-4,
            eps_outer: 1e-4,
            max_outer: 50,
            max_inner: 200,
            init: Init::Mrt,
            solver: SolverSettings {
                tol: 1e-8,
                ..SolverSettings::default()
            },
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        for (name, eps) in [("inner", self.eps_inner), ("outer", self.eps_outer)] {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(invalid(format!("{name} tolerance must be positive, got {eps}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid("iteration caps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    IterationCap,
    Infeasible,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::IterationCap => "iteration_cap",
            RunStatus::Infeasible => "infeasible",
        }
    }
}

/// One inner iteration: conic solve, receiver update, weight update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InnerRecord {
    pub outer: usize,
    pub inner: usize,
    pub eta: f64,
    pub tau: f64,
    pub min_surrogate_ee: f64,
    pub bs_powers: Vec<f64>,
    pub solver_iterations: usize,
    pub solve_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuterRecord {
    pub eta: f64,
    pub g: f64,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    pub outer: Vec<OuterRecord>,
    pub inner: Vec<InnerRecord>,
}

impl IterationTrace {
    pub fn total_inner(&self) -> usize {
        self.inner.len()
    }

    /// One JSON object per inner iteration.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.inner {
            let line = serde_json::to_string(rec).expect("trace records always serialize");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Worst decrease of `τ` between consecutive inner iterations of the same
    /// outer iteration, and of `η` across outer iterations, each divided by
    /// `1 + |previous|`. Non-positive means monotone.
    pub fn worst_decrease(&self) -> (f64, f64) {
        let mut tau_worst = f64::NEG_INFINITY;
        for pair in self.inner.windows(2) {
            if pair[0].outer == pair[1].outer {
                let drop = (pair[0].tau - pair[1].tau) / (1.0 + pair[0].tau.abs());
                tau_worst = tau_worst.max(drop);
            }
        }
        let mut eta_worst = f64::NEG_INFINITY;
        for pair in self.outer.windows(2) {
            let drop = (pair[0].eta - pair[1].eta) / (1.0 + pair[0].eta.abs());
            eta_worst = eta_worst.max(drop);
        }
        (tau_worst, eta_worst)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub w: BeamformerSet,
    pub rates: Vec<f64>,
    pub ees: Vec<f64>,
    pub powers: Vec<f64>,
    pub min_ee: f64,
    pub min_rate: f64,
    /// Final EE factor (max-min EE), final surrogate objective (max-min
    /// rate) or minimized total power (power minimization).
    pub objective: f64,
    pub status: RunStatus,
    pub trace: IterationTrace,
}

impl SolveResult {
    pub(crate) fn assemble(
        w: BeamformerSet,
        h: &ChannelSet,
        cfg: &NetworkConfig,
        objective: f64,
        status: RunStatus,
        trace: IterationTrace,
    ) -> Result<Self> {
        let metrics = UserMetrics::evaluate(&w, h, cfg)?;
        Ok(SolveResult {
            min_ee: metrics.min_ee(),
            min_rate: metrics.min_rate(),
            rates: metrics.rates,
            ees: metrics.ees,
            powers: metrics.powers,
            w,
            objective,
            status,
            trace,
        })
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }
}

/// Unit-norm MRT direction for every user.
pub(crate) fn mrt_directions(h: &ChannelSet) -> Result<DMatrix<C64>> {
    let mut dirs = DMatrix::zeros(h.antennas(), h.users());
    for n in 0..h.users() {
        let ch = h.channel(n);
        let norm = ch.norm();
        if norm == 0.0 {
            return Err(invalid(format!("user {n} has an all-zero channel")));
        }
        dirs.set_column(n, &(ch / C64::new(norm, 0.0)));
    }
    Ok(dirs)
}

/// Scales `w` uniformly so the most loaded base station sits at `fraction`
/// of its budget.
fn scale_to_budget(w: DMatrix<C64>, cfg: &NetworkConfig, fraction: f64) -> BeamformerSet {
    let w = BeamformerSet::new(w);
    let load = w
        .per_bs_powers(cfg)
        .iter()
        .zip(cfg.power_budgets())
        .map(|(p, cap)| p / cap)
        .fold(0.0, f64::max);
    if load == 0.0 {
        return w;
    }
    let scale = C64::new((fraction / load).sqrt(), 0.0);
    BeamformerSet::new(w.into_matrix() * scale)
}

pub fn initial_beamformers(init: &Init, h: &ChannelSet, cfg: &NetworkConfig) -> Result<BeamformerSet> {
    let w = match init {
        Init::Mrt => scale_to_budget(mrt_directions(h)?, cfg, 1.0),
        Init::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let raw = DMatrix::from_fn(cfg.antennas(), cfg.users(), |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            });
            let fraction = rand::Rng::random_range(&mut rng, 0.1..=1.0);
            scale_to_budget(raw, cfg, fraction)
        }
        Init::Given(w) => {
            if w.antennas() != cfg.antennas() || w.users() != cfg.users() {
                return Err(invalid(format!(
                    "initial beamformers are {}x{}, expected {}x{}",
                    w.antennas(),
                    w.users(),
                    cfg.antennas(),
                    cfg.users()
                )));
            }
            w.clone()
        }
    };
    if !w.is_feasible(cfg, FEASIBILITY_TOL) {
        return Err(invalid("initial beamformers violate a per-BS power budget"));
    }
    if w.matrix().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(invalid("initial beamformers must be finite"));
    }
    Ok(w)
}

/// Pulls each base station's rows back onto its budget when the conic solve
/// lands marginally outside.
pub(crate) fn project_onto_budgets(w: &mut BeamformerSet, cfg: &NetworkConfig) {
    let powers = w.per_bs_powers(cfg);
    for (k, p) in powers.iter().enumerate() {
        let cap = cfg.power_budget(k);
        if *p > cap {
            let scale = (cap / p).sqrt();
            for a in cfg.bs_rows(k) {
                for v in w.matrix_mut().row_mut(a).iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

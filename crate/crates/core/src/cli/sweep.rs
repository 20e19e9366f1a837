//! Monte Carlo SNR sweeps over paired drops.

use std::fmt::Write as _;

use crate::algorithms::{maxmin_ee, maxmin_rate, power_min_baseline, SolveOptions, SolveResult};
use crate::error::{invalid, Result};
use crate::model::{ChannelSet, NetworkConfig};
use crate::scenario::{generate_drop, ScenarioSpec};

/// Version of the CSV layout written by [`SweepResult::to_csv`].
pub const CSV_SCHEMA: u32 = 1;

pub const CSV_HEADER: &str = "snr_db,algorithm,mean_min_ee,ci_half_width,mean_min_rate,drops_ok,drops_failed";

/// Normal quantile for two-sided 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Algorithm {
    #[value(name = "maxmin_ee")]
    MaxminEe,
    #[value(name = "maxmin_rate")]
    MaxminRate,
    /// Minimum power meeting the rates of `maxmin_ee`.
    #[value(name = "powermin_I")]
    PowerminI,
    /// Minimum power meeting the rates of `maxmin_rate`.
    #[value(name = "powermin_II")]
    PowerminII,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::MaxminEe,
        Algorithm::MaxminRate,
        Algorithm::PowerminI,
        Algorithm::PowerminII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MaxminEe => "maxmin_ee",
            Algorithm::MaxminRate => "maxmin_rate",
            Algorithm::PowerminI => "powermin_I",
            Algorithm::PowerminII => "powermin_II",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Min-EE and min-rate of one converged run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub min_ee: f64,
    pub min_rate: f64,
}

/// Results of all four algorithms on one drop; `None` marks a failed run.
#[derive(Clone, Debug, PartialEq)]
pub struct DropOutcome {
    pub drop_index: u64,
    pub results: [Option<Outcome>; 4],
}

impl DropOutcome {
    pub fn get(&self, alg: Algorithm) -> Option<Outcome> {
        self.results[alg.index()]
    }
}

fn outcome(res: &Result<SolveResult>) -> Option<Outcome> {
    match res {
        Ok(r) if r.converged() => Some(Outcome {
            min_ee: r.min_ee,
            min_rate: r.min_rate,
        }),
        _ => None,
    }
}

/// Runs the two max-min algorithms, then each power-minimization baseline on
/// the rates its partner reached. A baseline whose partner failed fails too.
pub fn solve_all(h: &ChannelSet, cfg: &NetworkConfig, opts: &SolveOptions) -> [Option<Outcome>; 4] {
    let ee = maxmin_ee(h, cfg, opts);
    let rate = maxmin_rate(h, cfg, opts);
    let baseline = |partner: &Result<SolveResult>| match partner {
        Ok(r) if r.converged() => outcome(&power_min_baseline(&r.rates, h, cfg)),
        _ => None,
    };
    [outcome(&ee), outcome(&rate), baseline(&ee), baseline(&rate)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    /// In drop-index order.
    pub drops: Vec<DropOutcome>,
}

/// One CSV data row.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub algorithm: Algorithm,
    pub mean_min_ee: f64,
    pub ci_half_width: f64,
    pub mean_min_rate: f64,
    pub drops_ok: usize,
    pub drops_failed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub spec_hash: String,
    pub master_seed: u64,
    pub drops: usize,
    pub eps_inner: f64,
    pub eps_outer: f64,
    pub solver_tol: f64,
    pub points: Vec<SweepPoint>,
}

/// Sample mean and 95% half-width; the half-width is zero below two samples.
fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for point in &self.points {
            for alg in Algorithm::ALL {
                let ok: Vec<Outcome> = point.drops.iter().filter_map(|d| d.get(alg)).collect();
                let ees: Vec<f64> = ok.iter().map(|o| o.min_ee).collect();
                let rates: Vec<f64> = ok.iter().map(|o| o.min_rate).collect();
                let (mean_min_ee, ci_half_width) = mean_ci(&ees);
                rows.push(SweepRow {
                    snr_db: point.snr_db,
                    algorithm: alg,
                    mean_min_ee,
                    ci_half_width,
                    mean_min_rate: mean_ci(&rates).0,
                    drops_ok: ok.len(),
                    drops_failed: point.drops.len() - ok.len(),
                });
            }
        }
        rows
    }

    /// Share of failed (drop, algorithm) runs.
    pub fn failure_rate(&self) -> f64 {
        let total: usize = self.points.iter().map(|p| p.drops.len() * Algorithm::ALL.len()).sum();
        if total == 0 {
            return 0.0;
        }
        let failed: usize = self
            .points
            .iter()
            .flat_map(|p| &p.drops)
            .map(|d| d.results.iter().filter(|r| r.is_none()).count())
            .sum();
        failed as f64 / total as f64
    }

    /// `#` metadata lines, the header, then one row per (SNR, algorithm).
    /// Means carry seven significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let snrs: Vec<String> = self.points.iter().map(|p| p.snr_db.to_string()).collect();
        let _ = writeln!(out, "# maxmin-ee sweep");
        let _ = writeln!(out, "# schema: {CSV_SCHEMA}");
        let _ = writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# spec_hash: {}", self.spec_hash);
        let _ = writeln!(out, "# master_seed: {}", self.master_seed);
        let _ = writeln!(out, "# snr_db: {}", snrs.join(" "));
        let _ = writeln!(out, "# drops_per_point: {}", self.drops);
        let _ = writeln!(
            out,
            "# tolerances: eps_inner={:e} eps_outer={:e} solver_tol={:e}",
            self.eps_inner, self.eps_outer, self.solver_tol
        );
        let _ = writeln!(out, "# failure_rate: {:.6}", self.failure_rate());
        let _ = writeln!(out, "# units: min_ee nats/Hz/J, min_rate nats/s/Hz; ci_half_width is 1.96 standard errors");
        let _ = writeln!(out, "{CSV_HEADER}");
        for row in self.rows() {
            let _ = writeln!(
                out,
                "{},{},{:.6e},{:.6e},{:.6e},{},{}",
                row.snr_db,
                row.algorithm.name(),
                row.mean_min_ee,
                row.ci_half_width,
                row.mean_min_rate,
                row.drops_ok,
                row.drops_failed
            );
        }
        out
    }
}

fn run_point(spec: &ScenarioSpec, drops: usize, opts: &SolveOptions) -> Result<Vec<DropOutcome>> {
    let channels = (0..drops as u64)
        .map(|i| generate_drop(spec, i))
        .collect::<Result<Vec<_>>>()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(drops.max(1));
    let mut slots: Vec<Option<DropOutcome>> = vec![None; drops];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|wk| {
                let channels = &channels;
                scope.spawn(move || {
                    channels
                        .iter()
                        .skip(wk)
                        .step_by(workers)
                        .map(|d| DropOutcome {
                            drop_index: d.drop_index,
                            results: solve_all(&d.channels, &d.config, opts),
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for handle in handles {
            for out in handle.join().expect("sweep worker panicked") {
                let idx = out.drop_index as usize;
                slots[idx] = Some(out);
            }
        }
    });
    Ok(slots.into_iter().map(|s| s.expect("every drop is solved")).collect())
}

/// Runs every algorithm on drops `0..drops` at each SNR point. Drops are
/// spread over worker threads and collected in index order, so the result
/// does not depend on scheduling.
pub fn run_sweep(spec: &ScenarioSpec, snrs: &[f64], drops: usize, opts: &SolveOptions) -> Result<SweepResult> {
    if drops == 0 {
        return Err(invalid("a sweep needs at least one drop"));
    }
    if snrs.is_empty() {
        return Err(invalid("a sweep needs at least one SNR point"));
    }
    if let Some(bad) = snrs.iter().find(|s| !s.is_finite()) {
        return Err(invalid(format!("SNR points must be finite, got {bad}")));
    }
    spec.validate()?;
    let mut points = Vec::with_capacity(snrs.len());
    for &snr_db in snrs {
        let at = ScenarioSpec {
            snr_db,
            ..spec.clone()
        };
        points.push(SweepPoint {
            snr_db,
            drops: run_point(&at, drops, opts)?,
        });
    }
    Ok(SweepResult {
        spec_hash: spec.hash(),
        master_seed: spec.master_seed,
        drops,
        eps_inner: opts.eps_inner,
        eps_outer: opts.eps_outer,
        solver_tol: opts.solver.tol,
        points,
    })
}

//! Command-line front end: `generate`, `solve`, `sweep` and `verify`.

pub mod sweep;
pub mod verify;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::algorithms::{maxmin_ee, maxmin_rate, power_min_baseline, SolveOptions, SolveResult};
use crate::error::{Error, Result};
use crate::scenario::{generate_drop, ScenarioSpec};

pub use sweep::{run_sweep, Algorithm, SweepResult};
pub use verify::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
/// Runtime errors and failed verification properties.
pub const EXIT_FAILURE: i32 = 1;
/// Unreadable or malformed configuration, or bad arguments.
pub const EXIT_CONFIG: i32 = 2;
/// The solve finished without converging.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "maxmin-ee", version, about = "Max-min energy-efficient multicell beamforming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one drop and print it as JSON.
    Generate {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        drop: u64,
        /// Overrides `master_seed` from the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one drop and print per-user rates, efficiencies and powers.
    Solve {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "maxmin_ee")]
        algorithm: Algorithm,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        drop: u64,
        /// Write one JSON record per inner iteration here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        max_outer: usize,
        #[arg(long, default_value_t = 200)]
        max_inner: usize,
    },
    /// Average all four algorithms over paired drops at each SNR point.
    Sweep {
        config: PathBuf,
        /// Comma-separated SNR points in dB; defaults to `snr_db` from the
        /// configuration.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr_list: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        drops: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run randomized property suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

fn load(config: &Path, seed: Option<u64>) -> Result<ScenarioSpec> {
    let mut spec = ScenarioSpec::load(config)?;
    if let Some(seed) = seed {
        spec.master_seed = seed;
    }
    Ok(spec)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs `algorithm` on one channel set. Power minimization first solves its
/// partner problem for the rate targets.
pub fn solve_with(
    algorithm: Algorithm,
    h: &crate::model::ChannelSet,
    cfg: &crate::model::NetworkConfig,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    match algorithm {
        Algorithm::MaxminEe => maxmin_ee(h, cfg, opts),
        Algorithm::MaxminRate => maxmin_rate(h, cfg, opts),
        Algorithm::PowerminI | Algorithm::PowerminII => {
            let partner = if algorithm == Algorithm::PowerminI {
                maxmin_ee(h, cfg, opts)?
            } else {
                maxmin_rate(h, cfg, opts)?
            };
            let mut res = power_min_baseline(&partner.rates, h, cfg)?;
            if !partner.converged() {
                res.status = partner.status;
            }
            Ok(res)
        }
    }
}

fn report(algorithm: Algorithm, spec: &ScenarioSpec, drop: u64, res: &SolveResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("algorithm: {}\n", algorithm.name()));
    out.push_str(&format!("spec_hash: {}\n", spec.hash()));
    out.push_str(&format!("master_seed: {}\ndrop: {drop}\nsnr_db: {}\n", spec.master_seed, spec.snr_db));
    out.push_str(&format!("status: {}\n", res.status.as_str()));
    out.push_str("user rate_nats ee_nats_per_joule power_w\n");
    for n in 0..res.rates.len() {
        out.push_str(&format!(
            "{n} {:.9e} {:.9e} {:.9e}\n",
            res.rates[n], res.ees[n], res.powers[n]
        ));
    }
    out.push_str(&format!("min_ee: {:.9e}\nmin_rate: {:.9e}\n", res.min_ee, res.min_rate));
    let label = match algorithm {
        Algorithm::MaxminEe => "eta_final",
        Algorithm::MaxminRate => "min_surrogate_rate",
        Algorithm::PowerminI | Algorithm::PowerminII => "total_power_w",
    };
    out.push_str(&format!("{label}: {:.9e}\n", res.objective));
    out.push_str(&format!(
        "outer_iterations: {}\ninner_iterations: {}\n",
        res.trace.outer.len(),
        res.trace.total_inner()
    ));
    out
}

fn exec(command: Command) -> Result<i32> {
    match command {
        Command::Generate { config, drop, seed, out } => {
            let spec = load(&config, seed)?;
            let d = generate_drop(&spec, drop)?;
            write_output(out.as_deref(), &format!("{}\n", d.to_json()))?;
            Ok(EXIT_OK)
        }
        Command::Solve {
            config,
            algorithm,
            seed,
            drop,
            trace,
            max_outer,
            max_inner,
        } => {
            let spec = load(&config, seed)?;
            let d = generate_drop(&spec, drop)?;
            let opts = SolveOptions {
                max_outer,
                max_inner,
                ..SolveOptions::default()
            };
            let res = solve_with(algorithm, &d.channels, &d.config, &opts)?;
            print!("{}", report(algorithm, &spec, drop, &res));
            if let Some(path) = trace {
                write_output(Some(&path), &res.trace.to_jsonl())?;
            }
            Ok(if res.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Sweep {
            config,
            snr_list,
            drops,
            seed,
            out,
        } => {
            let spec = load(&config, seed)?;
            let snrs = if snr_list.is_empty() { vec![spec.snr_db] } else { snr_list };
            let res = run_sweep(&spec, &snrs, drops, &SolveOptions::default())?;
            write_output(out.as_deref(), &res.to_csv())?;
            Ok(EXIT_OK)
        }
        Command::Verify { suite, seed, trials } => {
            let reports = run_suite(suite, seed, trials)?;
            for r in &reports {
                println!("{}", r.line());
            }
            Ok(if reports.iter().all(|r| r.passed()) { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match exec(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Read { .. } | Error::Config { .. } => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            }
        }
    }
}

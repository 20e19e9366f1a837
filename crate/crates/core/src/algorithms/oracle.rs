use nalgebra::DMatrix;

use super::mrt_directions;
use crate::error::{invalid, Result};
use crate::model::{ChannelSet, NetworkConfig, C64};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Best single-user energy efficiency: MRT is the optimal direction, leaving
/// a one-dimensional quasi-concave ratio `ln(1 + p·g)/(p + overhead)` over
/// `p ∈ [0, P]` with `g = ‖h‖²/σ²`. Returns `(power, efficiency)`.
pub fn oracle_single_user_ee(h: &ChannelSet, cfg: &NetworkConfig) -> Result<(f64, f64)> {
    if cfg.users() != 1 || h.users() != 1 {
        return Err(invalid("the single-user oracle needs exactly one user"));
    }
    if h.antennas() != cfg.antennas() {
        return Err(invalid("channel width does not match the antenna count"));
    }
    let g = h.gain(0) / cfg.noise(0);
    let overhead = cfg.overhead();
    let cap = cfg.power_budget(0);
    let f = |p: f64| {
        if p == 0.0 {
            if overhead > 0.0 {
                0.0
            } else {
                g
            }
        } else {
            (p * g).ln_1p() / (p + overhead)
        }
    };

    let (mut lo, mut hi) = (0.0, cap);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 * cap.max(1e-300) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    let best = [(mid, f(mid)), (cap, f(cap)), (0.0, f(0.0))]
        .into_iter()
        .fold((0.0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    Ok(best)
}

/// Zero-forcing directions `Hᴴ(HHᴴ)⁻¹`, column-normalized; `None` when the
/// users' channels are linearly dependent.
fn zf_directions(h: &ChannelSet) -> Option<DMatrix<C64>> {
    let hm = h.matrix();
    if hm.nrows() > hm.ncols() {
        return None;
    }
    let hh = hm.adjoint();
    let gram = hm * &hh;
    let inv = gram.try_inverse()?;
    let mut dirs = hh * inv;
    for mut col in dirs.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        col /= C64::new(norm, 0.0);
    }
    Some(dirs)
}

/// Best min-EE found by exhaustive search over per-user powers with the
/// beam directions fixed to MRT and to zero-forcing. Each user's power runs
/// over `grid` evenly spaced levels up to the most it could use alone under
/// the per-BS budgets. Any grid point is achievable, so the value is a lower
/// bound on the optimum.
pub fn oracle_grid_lower_bound(h: &ChannelSet, cfg: &NetworkConfig, grid: usize) -> Result<f64> {
    let n = cfg.users();
    if n > 3 {
        return Err(invalid(format!("grid search supports at most 3 users, got {n}")));
    }
    if grid == 0 {
        return Err(invalid("grid needs at least one level"));
    }
    if h.users() != n || h.antennas() != cfg.antennas() {
        return Err(invalid("channel set does not match the configuration"));
    }
    let overhead = cfg.overhead();
    let mut candidates = vec![mrt_directions(h)?];
    candidates.extend(zf_directions(h));

    let mut best: f64 = 0.0;
    for dirs in &candidates {
        // loads[k][u]: share of BS k's budget used per watt given to user u.
        let loads: Vec<Vec<f64>> = (0..cfg.cells())
            .map(|k| {
                (0..n)
                    .map(|u| cfg.bs_rows(k).map(|a| dirs[(a, u)].norm_sqr()).sum())
                    .collect()
            })
            .collect();
        let coupling: Vec<Vec<f64>> = (0..n)
            .map(|u| (0..n).map(|m| h.apply(u, &dirs.column(m).into_owned()).norm_sqr()).collect())
            .collect();
        let pmax: Vec<f64> = (0..n)
            .map(|u| {
                (0..cfg.cells())
                    .filter(|&k| loads[k][u] > 0.0)
                    .map(|k| cfg.power_budget(k) / loads[k][u])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();

        let mut idx = vec![1usize; n];
        loop {
            let p: Vec<f64> = (0..n).map(|u| pmax[u] * idx[u] as f64 / grid as f64).collect();
            let feasible = (0..cfg.cells()).all(|k| {
                let used: f64 = (0..n).map(|u| loads[k][u] * p[u]).sum();
                used <= cfg.power_budget(k) * (1.0 + 1e-12)
            });
            if feasible {
                let mut worst = f64::INFINITY;
                for u in 0..n {
                    let interference: f64 = (0..n).filter(|&m| m != u).map(|m| coupling[u][m] * p[m]).sum();
                    let sinr = coupling[u][u] * p[u] / (interference + cfg.noise(u));
                    worst = worst.min(sinr.ln_1p() / (p[u] + overhead));
                }
                best = best.max(worst);
            }
            let mut pos = 0;
            while pos < n && idx[pos] == grid {
                idx[pos] = 1;
                pos += 1;
            }
            if pos == n {
                break;
            }
            idx[pos] += 1;
        }
    }
    Ok(best)
}

//! System model of the cooperative multicell downlink.
//!
//! All `K` base stations share user data, so the network behaves as one
//! broadcast channel with `M = K·M̃` transmit antennas and `N = K·Ñ`
//! single-antenna users. Antenna rows `[k·M̃, (k+1)·M̃)` belong to base
//! station `k`; users `[k·Ñ, (k+1)·Ñ)` are served by cell `k`.
//!
//! Every quantity here is a closed-form function of the beamformers `W`
//! (an `M×N` matrix whose column `n` is `w_n`) and the channels `H` (an
//! `N×M` matrix whose row `n` is `h_nᴴ`). Rates are in nats/s/Hz.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Network dimensions, power budgets and noise levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetworkConfig", into = "RawNetworkConfig")]
pub struct NetworkConfig {
    cells: usize,
    antennas_per_bs: usize,
    users_per_cell: usize,
    power_budgets: Vec<f64>,
    circuit_power: f64,
    base_power: f64,
    noise: Vec<f64>,
    overhead: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawNetworkConfig {
    cells: usize,
    antennas_per_bs: usize,
    users_per_cell: usize,
    power_budgets: Vec<f64>,
    circuit_power: f64,
    base_power: f64,
    noise: Vec<f64>,
}

impl TryFrom<RawNetworkConfig> for NetworkConfig {
    type Error = Error;

    fn try_from(raw: RawNetworkConfig) -> Result<Self> {
        NetworkConfig::new(
            raw.cells,
            raw.antennas_per_bs,
            raw.users_per_cell,
            raw.power_budgets,
            raw.circuit_power,
            raw.base_power,
            raw.noise,
        )
    }
}

impl From<NetworkConfig> for RawNetworkConfig {
    fn from(cfg: NetworkConfig) -> Self {
        RawNetworkConfig {
            cells: cfg.cells,
            antennas_per_bs: cfg.antennas_per_bs,
            users_per_cell: cfg.users_per_cell,
            power_budgets: cfg.power_budgets,
            circuit_power: cfg.circuit_power,
            base_power: cfg.base_power,
            noise: cfg.noise,
        }
    }
}

impl NetworkConfig {
    /// Builds a configuration. `power_budgets` has one entry per cell (watts),
    /// `noise` one variance per user (watts).
    pub fn new(
        cells: usize,
        antennas_per_bs: usize,
        users_per_cell: usize,
        power_budgets: Vec<f64>,
        circuit_power: f64,
        base_power: f64,
        noise: Vec<f64>,
    ) -> Result<Self> {
        if cells == 0 || antennas_per_bs == 0 || users_per_cell == 0 {
            return Err(invalid("cell, antenna and user counts must be at least 1"));
        }
        if power_budgets.len() != cells {
            return Err(invalid(format!(
                "expected {cells} power budgets, got {}",
                power_budgets.len()
            )));
        }
        let users = cells * users_per_cell;
        if noise.len() != users {
            return Err(invalid(format!(
                "expected {users} noise variances, got {}",
                noise.len()
            )));
        }
        if power_budgets.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid("power budgets must be finite and positive"));
        }
        if noise.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("noise variances must be finite and positive"));
        }
        if !(circuit_power.is_finite() && circuit_power >= 0.0)
            || !(base_power.is_finite() && base_power >= 0.0)
        {
            return Err(invalid("circuit and base power must be finite and non-negative"));
        }
        let antennas = cells * antennas_per_bs;
        let overhead =
            (antennas as f64 * circuit_power + cells as f64 * base_power) / users as f64;
        Ok(NetworkConfig {
            cells,
            antennas_per_bs,
            users_per_cell,
            power_budgets,
            circuit_power,
            base_power,
            noise,
            overhead,
        })
    }

    /// Same budget for every base station and same noise at every user.
    pub fn uniform(
        cells: usize,
        antennas_per_bs: usize,
        users_per_cell: usize,
        power_budget: f64,
        circuit_power: f64,
        base_power: f64,
        noise: f64,
    ) -> Result<Self> {
        Self::new(
            cells,
            antennas_per_bs,
            users_per_cell,
            vec![power_budget; cells],
            circuit_power,
            base_power,
            vec![noise; cells * users_per_cell],
        )
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn antennas_per_bs(&self) -> usize {
        self.antennas_per_bs
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    /// Total transmit antennas `M`.
    pub fn antennas(&self) -> usize {
        self.cells * self.antennas_per_bs
    }

    /// Total users `N`.
    pub fn users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn power_budget(&self, k: usize) -> f64 {
        self.power_budgets[k]
    }

    pub fn power_budgets(&self) -> &[f64] {
        &self.power_budgets
    }

    pub fn circuit_power(&self) -> f64 {
        self.circuit_power
    }

    pub fn base_power(&self) -> f64 {
        self.base_power
    }

    pub fn noise(&self, n: usize) -> f64 {
        self.noise[n]
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise
    }

    /// Static power charged to every user: `(M·P_c + K·P_0)/N`.
    pub fn overhead(&self) -> f64 {
        self.overhead
    }

    /// Antenna rows driven by base station `k`.
    pub fn bs_rows(&self, k: usize) -> Range<usize> {
        k * self.antennas_per_bs..(k + 1) * self.antennas_per_bs
    }

    /// Serving cell of user `n`.
    pub fn serving_cell(&self, n: usize) -> usize {
        n / self.users_per_cell
    }

    pub fn with_power_budgets(&self, power_budgets: Vec<f64>) -> Result<Self> {
        Self::new(
            self.cells,
            self.antennas_per_bs,
            self.users_per_cell,
            power_budgets,
            self.circuit_power,
            self.base_power,
            self.noise.clone(),
        )
    }
}

/// Channel coefficients; row `n` holds `h_nᴴ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    rows: DMatrix<C64>,
}

impl ChannelSet {
    /// Wraps an `N×M` matrix whose rows are the conjugate-transposed channels.
    pub fn from_rows(rows: DMatrix<C64>) -> Result<Self> {
        if rows.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("channel coefficients must be finite"));
        }
        Ok(ChannelSet { rows })
    }

    /// Builds the set from the channel vectors `h_n` themselves.
    pub fn from_channels(channels: &[DVector<C64>]) -> Result<Self> {
        let m = channels.first().map_or(0, |h| h.len());
        if channels.iter().any(|h| h.len() != m) {
            return Err(invalid("channel vectors must share one length"));
        }
        let rows = DMatrix::from_fn(channels.len(), m, |n, a| channels[n][a].conj());
        Self::from_rows(rows)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rows
    }

    pub fn users(&self) -> usize {
        self.rows.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.rows.ncols()
    }

    /// The channel vector `h_n` (not conjugated).
    pub fn channel(&self, n: usize) -> DVector<C64> {
        DVector::from_iterator(self.antennas(), self.rows.row(n).iter().map(|v| v.conj()))
    }

    /// `‖h_n‖²`.
    pub fn gain(&self, n: usize) -> f64 {
        self.rows.row(n).iter().map(|v| v.norm_sqr()).sum()
    }

    /// `h_nᴴ w` for an arbitrary vector `w`.
    pub fn apply(&self, n: usize, w: &DVector<C64>) -> C64 {
        self.rows.row(n).iter().zip(w.iter()).map(|(h, w)| h * w).sum()
    }

    /// The block `h_{n,k}` restricted to base station `k`'s antennas.
    pub fn block(&self, n: usize, k: usize, cfg: &NetworkConfig) -> DVector<C64> {
        let rows = cfg.bs_rows(k);
        DVector::from_iterator(rows.len(), rows.map(|a| self.rows[(n, a)].conj()))
    }
}

/// Cascaded beamforming matrix `W = [w_1, …, w_N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerSet {
    w: DMatrix<C64>,
}

impl BeamformerSet {
    pub fn new(w: DMatrix<C64>) -> Self {
        BeamformerSet { w }
    }

    pub fn zeros(antennas: usize, users: usize) -> Self {
        BeamformerSet {
            w: DMatrix::zeros(antennas, users),
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.w
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.w
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.w
    }

    pub fn antennas(&self) -> usize {
        self.w.nrows()
    }

    pub fn users(&self) -> usize {
        self.w.ncols()
    }

    pub fn column(&self, n: usize) -> DVector<C64> {
        self.w.column(n).into_owned()
    }

    /// Transmit power of user `n`, `‖w_n‖²`.
    pub fn user_power(&self, n: usize) -> f64 {
        self.w.column(n).iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Powers radiated by each base station.
    pub fn per_bs_powers(&self, cfg: &NetworkConfig) -> Vec<f64> {
        (0..cfg.cells())
            .map(|k| {
                cfg.bs_rows(k)
                    .map(|a| self.w.row(a).iter().map(|v| v.norm_sqr()).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    /// Whether every base station stays within its budget up to `tol` watts.
    pub fn is_feasible(&self, cfg: &NetworkConfig, tol: f64) -> bool {
        self.per_bs_powers(cfg)
            .iter()
            .zip(cfg.power_budgets())
            .all(|(p, cap)| *p <= cap + tol)
    }
}

pub(crate) fn check_dims(w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<()> {
    let (m, n) = (cfg.antennas(), cfg.users());
    if h.users() != n || h.antennas() != m {
        return Err(invalid(format!(
            "channel set is {}x{}, configuration expects {n}x{m}",
            h.users(),
            h.antennas()
        )));
    }
    if w.antennas() != m || w.users() != n {
        return Err(invalid(format!(
            "beamformer set is {}x{}, configuration expects {m}x{n}",
            w.antennas(),
            w.users()
        )));
    }
    Ok(())
}

fn check_user(n: usize, cfg: &NetworkConfig) -> Result<()> {
    if n >= cfg.users() {
        return Err(invalid(format!("user index {n} out of range 0..{}", cfg.users())));
    }
    Ok(())
}

/// Cross gains `h_nᴴ w_m` for all user pairs, computed once and reused by
/// every per-user quantity.
#[derive(Clone, Debug)]
pub struct LinkGains {
    gains: DMatrix<C64>,
    noise: Vec<f64>,
}

impl LinkGains {
    pub fn new(w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<Self> {
        check_dims(w, h, cfg)?;
        Ok(Self::new_unchecked(w, h, cfg))
    }

    pub(crate) fn new_unchecked(w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Self {
        LinkGains {
            gains: h.matrix() * w.matrix(),
            noise: cfg.noise_variances().to_vec(),
        }
    }

    pub fn users(&self) -> usize {
        self.gains.nrows()
    }

    /// `h_nᴴ w_m`.
    pub fn cross(&self, n: usize, m: usize) -> C64 {
        self.gains[(n, m)]
    }

    /// `|h_nᴴ w_n|²`.
    pub fn signal(&self, n: usize) -> f64 {
        self.gains[(n, n)].norm_sqr()
    }

    /// `Σ_{m≠n} |h_nᴴ w_m|²`.
    pub fn interference(&self, n: usize) -> f64 {
        (0..self.users())
            .filter(|&m| m != n)
            .map(|m| self.gains[(n, m)].norm_sqr())
            .sum()
    }

    pub fn noise(&self, n: usize) -> f64 {
        self.noise[n]
    }

    pub fn sinr(&self, n: usize) -> f64 {
        let signal = self.signal(n);
        if signal == 0.0 {
            return 0.0;
        }
        signal / (self.interference(n) + self.noise[n])
    }

    pub fn rate(&self, n: usize) -> f64 {
        self.sinr(n).ln_1p()
    }

    pub fn mse(&self, n: usize, mu: C64) -> f64 {
        let g = self.gains[(n, n)];
        mu.norm_sqr() * (self.interference(n) + self.noise[n]) + (C64::new(1.0, 0.0) - mu * g).norm_sqr()
    }

    pub fn mmse_receiver(&self, n: usize) -> C64 {
        let g = self.gains[(n, n)];
        g.conj() / (self.signal(n) + self.interference(n) + self.noise[n])
    }

    /// Minimum MSE, evaluated as `(I + σ²)/(S + I + σ²)` which equals
    /// `1 − S/(S + I + σ²)` without the cancellation.
    pub fn mmse_value(&self, n: usize) -> f64 {
        let rest = self.interference(n) + self.noise[n];
        rest / (self.signal(n) + rest)
    }
}

/// SINR of user `n`.
pub fn sinr(n: usize, w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<f64> {
    check_user(n, cfg)?;
    Ok(LinkGains::new(w, h, cfg)?.sinr(n))
}

/// Achievable rate `ln(1 + SINR_n)` in nats/s/Hz.
pub fn rate(n: usize, w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<f64> {
    check_user(n, cfg)?;
    Ok(LinkGains::new(w, h, cfg)?.rate(n))
}

/// Energy efficiency of user `n`: its rate over its own transmit power plus
/// its share of the static overhead.
pub fn user_ee(n: usize, w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<f64> {
    check_user(n, cfg)?;
    let gains = LinkGains::new(w, h, cfg)?;
    ee_ratio(gains.rate(n), w.user_power(n), cfg.overhead())
}

pub(crate) fn ee_ratio(rate: f64, power: f64, overhead: f64) -> Result<f64> {
    let denom = power + overhead;
    if denom == 0.0 {
        return Err(Error::DegenerateInput(
            "zero beamformer with zero circuit and base power".into(),
        ));
    }
    Ok(rate / denom)
}

/// Mean square error of user `n` under receiver scalar `mu`.
pub fn mse(n: usize, mu: C64, w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<f64> {
    check_user(n, cfg)?;
    Ok(LinkGains::new(w, h, cfg)?.mse(n, mu))
}

/// MSE-minimising receiver scalar for fixed beamformers.
pub fn mmse_receiver(n: usize, w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<C64> {
    check_user(n, cfg)?;
    Ok(LinkGains::new(w, h, cfg)?.mmse_receiver(n))
}

/// Minimum MSE, in `(0, 1]`; equals `1/(1 + SINR_n)`.
pub fn mmse_value(n: usize, w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<f64> {
    check_user(n, cfg)?;
    Ok(LinkGains::new(w, h, cfg)?.mmse_value(n))
}

/// Power radiated by base station `k`, i.e. `tr(B_k Σ_n w_n w_nᴴ)`.
pub fn per_bs_power(w: &BeamformerSet, k: usize, cfg: &NetworkConfig) -> Result<f64> {
    if k >= cfg.cells() {
        return Err(invalid(format!("cell index {k} out of range 0..{}", cfg.cells())));
    }
    if w.antennas() != cfg.antennas() {
        return Err(invalid("beamformer row count does not match the antenna count"));
    }
    Ok(cfg
        .bs_rows(k)
        .map(|a| w.matrix().row(a).iter().map(|v| v.norm_sqr()).sum::<f64>())
        .sum())
}

/// Per-user rates and energy efficiencies for one beamformer set.
#[derive(Clone, Debug, PartialEq)]
pub struct UserMetrics {
    pub rates: Vec<f64>,
    pub ees: Vec<f64>,
    pub powers: Vec<f64>,
}

impl UserMetrics {
    pub fn evaluate(w: &BeamformerSet, h: &ChannelSet, cfg: &NetworkConfig) -> Result<Self> {
        let gains = LinkGains::new(w, h, cfg)?;
        let n = cfg.users();
        let rates: Vec<f64> = (0..n).map(|u| gains.rate(u)).collect();
        let powers: Vec<f64> = (0..n).map(|u| w.user_power(u)).collect();
        let ees = rates
            .iter()
            .zip(&powers)
            .map(|(r, p)| ee_ratio(*r, *p, cfg.overhead()))
            .collect::<Result<Vec<_>>>()?;
        Ok(UserMetrics { rates, ees, powers })
    }

    pub fn min_ee(&self) -> f64 {
        self.ees.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

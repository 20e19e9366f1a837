//! Reductions of the beamforming subproblems to standard conic form.
//!
//! Complex beamformer entries are realified as interleaved `(re, im)` pairs:
//! entry `(a, n)` of `W` maps to reals `2(n·M + a)` and `2(n·M + a) + 1`.
//! A complex affine expression `r·w_m + κ` contributes two slack rows,
//! `Re` first.

use nalgebra::{DMatrix, DVector};

use super::{Cone, ConicProblem};
use crate::error::{invalid, Result};
use crate::model::{BeamformerSet, ChannelSet, NetworkConfig, C64};

/// Where the beamformer lives inside a conic variable vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BeamformerLayout {
    pub antennas: usize,
    pub users: usize,
    pub offset: usize,
}

impl BeamformerLayout {
    pub fn re(&self, antenna: usize, user: usize) -> usize {
        self.offset + 2 * (user * self.antennas + antenna)
    }

    pub fn im(&self, antenna: usize, user: usize) -> usize {
        self.re(antenna, user) + 1
    }

    pub fn num_reals(&self) -> usize {
        2 * self.antennas * self.users
    }

    pub fn extract(&self, x: &DVector<f64>) -> BeamformerSet {
        BeamformerSet::new(DMatrix::from_fn(self.antennas, self.users, |a, n| {
            C64::new(x[self.re(a, n)], x[self.im(a, n)])
        }))
    }

    pub fn write(&self, w: &BeamformerSet, x: &mut DVector<f64>) {
        for n in 0..self.users {
            for a in 0..self.antennas {
                let v = w.matrix()[(a, n)];
                x[self.re(a, n)] = v.re;
                x[self.im(a, n)] = v.im;
            }
        }
    }
}

/// Incrementally fills the rows of `A x + s = b` so that `s` equals a chosen
/// affine expression of `x`.
struct RowWriter {
    a: DMatrix<f64>,
    b: DVector<f64>,
    row: usize,
    layout: BeamformerLayout,
}

impl RowWriter {
    fn new(rows: usize, vars: usize, layout: BeamformerLayout) -> Self {
        RowWriter {
            a: DMatrix::zeros(rows, vars),
            b: DVector::zeros(rows),
            row: 0,
            layout,
        }
    }

    /// `s_row = Σ_j coef_j x_j + constant`.
    fn real(&mut self, terms: &[(usize, f64)], constant: f64) {
        for &(j, v) in terms {
            self.a[(self.row, j)] -= v;
        }
        self.b[self.row] = constant;
        self.row += 1;
    }

    /// Two rows for `Σ_a coefs[a]·W[a, user] + constant`.
    fn complex(&mut self, coefs: &[C64], user: usize, constant: C64) {
        let (re_row, im_row) = (self.row, self.row + 1);
        for (a, r) in coefs.iter().enumerate() {
            let (xr, xi) = (self.layout.re(a, user), self.layout.im(a, user));
            self.a[(re_row, xr)] -= r.re;
            self.a[(re_row, xi)] += r.im;
            self.a[(im_row, xr)] -= r.im;
            self.a[(im_row, xi)] -= r.re;
        }
        self.b[re_row] = constant.re;
        self.b[im_row] = constant.im;
        self.row += 2;
    }

    /// Radius row `√cap` followed by every entry of base station `k`'s block.
    fn power_cone(&mut self, cfg: &NetworkConfig, k: usize) {
        self.real(&[], cfg.power_budget(k).sqrt());
        let layout = self.layout;
        for n in 0..layout.users {
            for a in cfg.bs_rows(k) {
                self.real(&[(layout.re(a, n), 1.0)], 0.0);
                self.real(&[(layout.im(a, n), 1.0)], 0.0);
            }
        }
    }

    fn finish(self) -> (DMatrix<f64>, DVector<f64>) {
        debug_assert_eq!(self.row, self.b.len());
        (self.a, self.b)
    }
}

fn check_channels(h: &ChannelSet, cfg: &NetworkConfig) -> Result<()> {
    if h.users() != cfg.users() || h.antennas() != cfg.antennas() {
        return Err(invalid(format!(
            "channel set is {}x{}, configuration expects {}x{}",
            h.users(),
            h.antennas(),
            cfg.users(),
            cfg.antennas()
        )));
    }
    Ok(())
}

/// The per-user max-min subproblem for frozen `(s, μ, η)` together with its
/// variable map.
#[derive(Clone, Debug)]
pub struct InnerSocp {
    pub problem: ConicProblem,
    pub layout: BeamformerLayout,
    pub tau_index: usize,
    /// Constant part `c_n` of each user's bound `‖u_n‖² ≤ τ − c_n`.
    pub offsets: Vec<f64>,
}

/// Builds `min τ s.t. per-BS power caps and −g_n(η) ≤ τ for every user`.
///
/// With `u_n` stacking `√s_n|μ_n|·h_nᴴw_m` (`m ≠ n`), `√η·w_n` and
/// `√s_n(1 − μ_n h_nᴴ w_n)`, the user constraint is `‖u_n‖² ≤ τ − c_n` where
/// `c_n = −ln s_n − 1 + s_n|μ_n|²σ_n² + η·overhead`. It enters as the cone
/// `‖(2u_n, t − 1)‖ ≤ t + 1` with `t = τ − c_n`.
pub fn build_inner_socp(
    eta: f64,
    s: &[f64],
    mu: &[C64],
    h: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<InnerSocp> {
    build_subtractive(eta, s, mu, h, cfg, cfg.overhead())
}

/// The max-min surrogate-rate subproblem: the same reduction at `η = 0`
/// with no overhead constant.
pub fn build_rate_socp(s: &[f64], mu: &[C64], h: &ChannelSet, cfg: &NetworkConfig) -> Result<InnerSocp> {
    build_subtractive(0.0, s, mu, h, cfg, 0.0)
}

fn build_subtractive(
    eta: f64,
    s: &[f64],
    mu: &[C64],
    h: &ChannelSet,
    cfg: &NetworkConfig,
    overhead: f64,
) -> Result<InnerSocp> {
    check_channels(h, cfg)?;
    let (m, n) = (cfg.antennas(), cfg.users());
    if s.len() != n || mu.len() != n {
        return Err(invalid(format!("expected {n} weights and {n} receivers")));
    }
    if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("weights must be positive and finite"));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid(format!("EE factor must be non-negative, got {eta}")));
    }
    let layout = BeamformerLayout {
        antennas: m,
        users: n,
        offset: 0,
    };
    let tau = layout.num_reals();
    let vars = tau + 1;
    let power_dim = 2 * cfg.antennas_per_bs() * n + 1;
    let user_dim = 2 * (n - 1) + 2 * m + 4;
    let rows = cfg.cells() * power_dim + n * user_dim;
    let mut cones = Vec::with_capacity(cfg.cells() + n);
    let mut w = RowWriter::new(rows, vars, layout);

    for k in 0..cfg.cells() {
        w.power_cone(cfg, k);
        cones.push(Cone::soc(power_dim));
    }

    let sqrt_eta = eta.sqrt();
    let zero = C64::new(0.0, 0.0);
    let mut offsets = Vec::with_capacity(n);
    for u in 0..n {
        let row: Vec<C64> = h.matrix().row(u).iter().copied().collect();
        let sq = s[u].sqrt();
        let c_u = -s[u].ln() - 1.0 + s[u] * mu[u].norm_sqr() * cfg.noise(u) + eta * overhead;
        offsets.push(c_u);

        w.real(&[(tau, 1.0)], 1.0 - c_u);
        let leak = 2.0 * sq * mu[u].norm();
        let leak_coefs: Vec<C64> = row.iter().map(|v| v * leak).collect();
        for other in (0..n).filter(|&o| o != u) {
            w.complex(&leak_coefs, other, zero);
        }
        for a in 0..m {
            w.real(&[(layout.re(a, u), 2.0 * sqrt_eta)], 0.0);
            w.real(&[(layout.im(a, u), 2.0 * sqrt_eta)], 0.0);
        }
        let distortion: Vec<C64> = row.iter().map(|v| -2.0 * sq * mu[u] * v).collect();
        w.complex(&distortion, u, C64::new(2.0 * sq, 0.0));
        w.real(&[(tau, 1.0)], -1.0 - c_u);
        cones.push(Cone::soc(user_dim));
    }

    let (a, b) = w.finish();
    let mut c = DVector::zeros(vars);
    c[tau] = 1.0;
    Ok(InnerSocp {
        problem: ConicProblem::new(c, a, b, cones)?,
        layout,
        tau_index: tau,
        offsets,
    })
}

/// Total-power minimization under SINR targets.
#[derive(Clone, Debug)]
pub struct PowerMinSocp {
    pub problem: ConicProblem,
    pub layout: BeamformerLayout,
    /// Index of `t ≥ ‖W‖_F`; the optimal total power is `t²`.
    pub norm_index: usize,
}

/// Builds `min ‖W‖_F` subject to `SINR_n ≥ γ_n` for all users, written as
/// `√(1 + 1/γ_n)·Re(h̃_nᴴw_n) ≥ ‖(h̃_nᴴw_1, …, h̃_nᴴw_N, 1)‖` with
/// `Im(h̃_nᴴ w_n) = 0`, where `h̃_n = h_n/σ_n`. Per-BS caps are added when
/// `include_caps` is set.
pub fn build_powermin_socp(
    gamma: &[f64],
    h: &ChannelSet,
    cfg: &NetworkConfig,
    include_caps: bool,
) -> Result<PowerMinSocp> {
    check_channels(h, cfg)?;
    let (m, n) = (cfg.antennas(), cfg.users());
    if gamma.len() != n {
        return Err(invalid(format!("expected {n} SINR targets, got {}", gamma.len())));
    }
    if gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(invalid("SINR targets must be positive and finite"));
    }
    let layout = BeamformerLayout {
        antennas: m,
        users: n,
        offset: 0,
    };
    let t = layout.num_reals();
    let vars = t + 1;
    let epi_dim = layout.num_reals() + 1;
    let user_dim = 2 * n + 2;
    let power_dim = 2 * cfg.antennas_per_bs() * n + 1;
    let rows = epi_dim + n * (1 + user_dim) + if include_caps { cfg.cells() * power_dim } else { 0 };
    let mut cones = Vec::new();
    let mut w = RowWriter::new(rows, vars, layout);

    w.real(&[(t, 1.0)], 0.0);
    for u in 0..n {
        for a in 0..m {
            w.real(&[(layout.re(a, u), 1.0)], 0.0);
            w.real(&[(layout.im(a, u), 1.0)], 0.0);
        }
    }
    cones.push(Cone::soc(epi_dim));

    let zero = C64::new(0.0, 0.0);
    for u in 0..n {
        let inv_sigma = 1.0 / cfg.noise(u).sqrt();
        let row: Vec<C64> = h.matrix().row(u).iter().map(|v| v * inv_sigma).collect();
        // Imaginary part of h̃ᵤᴴwᵤ only: coefficients of Im(r·w).
        let im_terms: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .flat_map(|(a, r)| [(layout.re(a, u), r.im), (layout.im(a, u), r.re)])
            .collect();
        w.real(&im_terms, 0.0);
        cones.push(Cone::zero(1));

        let lead = (1.0 + 1.0 / gamma[u]).sqrt();
        let re_terms: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .flat_map(|(a, r)| [(layout.re(a, u), lead * r.re), (layout.im(a, u), -lead * r.im)])
            .collect();
        w.real(&re_terms, 0.0);
        for other in 0..n {
            w.complex(&row, other, zero);
        }
        w.real(&[], 1.0);
        cones.push(Cone::soc(user_dim));
    }

    if include_caps {
        for k in 0..cfg.cells() {
            w.power_cone(cfg, k);
            cones.push(Cone::soc(power_dim));
        }
    }

    let (a, b) = w.finish();
    let mut c = DVector::zeros(vars);
    c[t] = 1.0;
    Ok(PowerMinSocp {
        problem: ConicProblem::new(c, a, b, cones)?,
        layout,
        norm_index: t,
    })
}

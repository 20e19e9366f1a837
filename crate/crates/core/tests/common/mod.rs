//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use maxmin_ee::conic::{Cone, ConeKind, ConicProblem};
use maxmin_ee::{ChannelSet, NetworkConfig, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random bounded SOCP with `n` variables and a known strictly feasible
/// point: a few equalities, a few linear inequalities, one to four random
/// second-order cones and a ball `‖x‖ ≤ R` around the origin.
pub fn random_socp(rng: &mut ChaCha8Rng, n: usize) -> (ConicProblem, DVector<f64>) {
    let x0 = DVector::from_fn(n, |_, _| gauss(rng));
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut cones = Vec::new();

    let p = rng.random_range(0..=n.saturating_sub(1).min(3));
    for _ in 0..p {
        let a = DVector::from_fn(n, |_, _| gauss(rng));
        let b = a.dot(&x0);
        rows.push((a, b));
    }
    if p > 0 {
        cones.push(Cone::zero(p));
    }
    let q = rng.random_range(0..=4);
    for _ in 0..q {
        let a = DVector::from_fn(n, |_, _| gauss(rng));
        let b = a.dot(&x0) + rng.random_range(0.1..1.0);
        rows.push((a, b));
    }
    if q > 0 {
        cones.push(Cone::nonneg(q));
    }
    for _ in 0..rng.random_range(1..=4) {
        let d = rng.random_range(2..=6);
        let u = DVector::from_fn(d - 1, |_, _| gauss(rng));
        let mut slack = vec![u.norm() + rng.random_range(0.1..1.0)];
        slack.extend(u.iter());
        for s in slack {
            let a = DVector::from_fn(n, |_, _| gauss(rng));
            let b = a.dot(&x0) + s;
            rows.push((a, b));
        }
        cones.push(Cone::soc(d));
    }
    let radius = x0.norm() + rng.random_range(1.0..5.0);
    rows.push((DVector::zeros(n), radius));
    for i in 0..n {
        let mut a = DVector::zeros(n);
        a[i] = -1.0;
        rows.push((a, 0.0));
    }
    cones.push(Cone::soc(n + 1));

    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let c = DVector::from_fn(n, |_, _| gauss(rng));
    (ConicProblem::new(c, a, b, cones).unwrap(), x0)
}

/// Orthonormal basis of the null space of the zero-cone rows.
pub fn equality_null_space(problem: &ConicProblem) -> DMatrix<f64> {
    let n = problem.num_vars();
    let mut eq = Vec::new();
    let mut row = 0;
    for cone in &problem.cones {
        if cone.kind == ConeKind::Zero {
            eq.extend(row..row + cone.dim);
        }
        row += cone.dim;
    }
    if eq.is_empty() {
        return DMatrix::identity(n, n);
    }
    let a = DMatrix::from_fn(eq.len(), n, |i, j| problem.a[(eq[i], j)]);
    let pinv = a.clone().pseudo_inverse(1e-12).unwrap();
    let proj = DMatrix::identity(n, n) - pinv * a;
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    DMatrix::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
}

/// Largest cone violation at `x` and a subgradient of that block's
/// violation function (`‖v̄‖ − v₀` or `−v_j` with `v = b − A x`).
pub fn worst_violation(problem: &ConicProblem, x: &DVector<f64>) -> (f64, DVector<f64>) {
    let slack = &problem.b - &problem.a * x;
    let mut worst = 0.0;
    let mut grad = DVector::zeros(x.len());
    let mut row = 0;
    for cone in &problem.cones {
        match cone.kind {
            ConeKind::Zero => {}
            ConeKind::Nonneg => {
                for i in row..row + cone.dim {
                    if -slack[i] > worst {
                        worst = -slack[i];
                        grad = problem.a.row(i).transpose();
                    }
                }
            }
            ConeKind::Soc => {
                let tail = slack.rows(row + 1, cone.dim - 1);
                let norm = tail.norm();
                if norm - slack[row] > worst {
                    worst = norm - slack[row];
                    grad = problem.a.row(row).transpose();
                    for (k, t) in tail.iter().enumerate() {
                        grad -= problem.a.row(row + 1 + k).transpose() * (t / norm);
                    }
                }
            }
        }
        row += cone.dim;
    }
    (worst, grad)
}

/// Bracket `[lower, upper]` on the optimal value from the central-cut
/// ellipsoid method driven by subgradients: violated cones give feasibility
/// cuts, feasible centers give objective cuts, an upper bound and the lower
/// bound `f(y) − √(gᵀPg)`. Works in coordinates of the equality-constrained
/// affine set through `x0` and starts from the ball `‖x‖ ≤ radius`.
pub fn subgradient_oracle(
    problem: &ConicProblem,
    x0: &DVector<f64>,
    radius: f64,
    rel_gap: f64,
    max_iters: usize,
) -> (f64, f64) {
    let z = equality_null_space(problem);
    let d = z.ncols();
    let mut y = -(z.transpose() * x0);
    let mut p = DMatrix::identity(d, d) * (radius * radius * 1.01);
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    let zc = z.transpose() * &problem.c;
    for _ in 0..max_iters {
        let x = x0 + &z * &y;
        let (viol, grad) = worst_violation(problem, &x);
        let g = if viol > 0.0 {
            z.transpose() * grad
        } else {
            let f = problem.c.dot(&x);
            upper = upper.min(f);
            let width = zc.dot(&(&p * &zc)).max(0.0).sqrt();
            lower = lower.max(f - width);
            zc.clone()
        };
        if upper.is_finite() && upper - lower <= rel_gap * upper.abs().max(1.0) {
            break;
        }
        let pg = &p * &g;
        let gpg = g.dot(&pg);
        if !(gpg > 0.0) {
            break;
        }
        let pg = pg / gpg.sqrt();
        if d == 1 {
            y -= &pg * 0.5;
            p *= 0.25;
            continue;
        }
        let df = d as f64;
        y -= &pg / (df + 1.0);
        p = (&p - &pg * pg.transpose() * (2.0 / (df + 1.0))) * (df * df / (df * df - 1.0));
        p = (&p + p.transpose()) * 0.5;
    }
    (lower, upper)
}

/// Relative KKT residuals of a claimed primal-dual pair: primal and dual
/// feasibility, duality gap, complementarity and cone membership of `s` and
/// `y`. Returns the largest.
pub fn kkt_residual(
    problem: &ConicProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    s: &DVector<f64>,
) -> f64 {
    let pobj = problem.c.dot(x);
    let scale = 1.0 + pobj.abs();
    let primal = (&problem.b - &problem.a * x - s).norm() / (1.0 + problem.b.norm());
    let dual = (problem.a.transpose() * y + &problem.c).norm() / (1.0 + problem.c.norm());
    let gap = (pobj + problem.b.dot(y)).abs() / scale;
    let comp = s.dot(y).abs() / scale;
    let mut cone = 0.0f64;
    let mut row = 0;
    for c in &problem.cones {
        let sv = s.rows(row, c.dim);
        let yv = y.rows(row, c.dim);
        let viol = match c.kind {
            ConeKind::Zero => sv.amax(),
            ConeKind::Nonneg => sv.iter().chain(yv.iter()).map(|v| (-v).max(0.0)).fold(0.0, f64::max),
            ConeKind::Soc => (sv.rows(1, c.dim - 1).norm() - sv[0])
                .max(yv.rows(1, c.dim - 1).norm() - yv[0])
                .max(0.0),
        };
        cone = cone.max(viol / scale);
        row += c.dim;
    }
    primal.max(dual).max(gap).max(comp).max(cone)
}

/// Minimum total power for SINR targets `gamma` without per-BS caps, by the
/// uplink-downlink duality fixed point
/// `λ_n = 1 / ((1 + 1/γ_n)·h_nᴴ (I + Σ_m λ_m h_m h_mᴴ)⁻¹ h_n)`; the optimum
/// is `Σ_n λ_n σ_n²`.
pub fn duality_fixed_point_power(gamma: &[f64], h: &ChannelSet, noise: &[f64]) -> f64 {
    let (m, n) = (h.antennas(), h.users());
    let channels: Vec<DVector<C64>> = (0..n).map(|u| h.channel(u)).collect();
    let mut lambda = vec![0.0; n];
    for _ in 0..100_000 {
        let mut cov = DMatrix::<C64>::identity(m, m);
        for u in 0..n {
            cov += &channels[u] * channels[u].adjoint() * C64::new(lambda[u], 0.0);
        }
        let inv = cov.try_inverse().expect("covariance is positive definite");
        let next: Vec<f64> = (0..n)
            .map(|u| {
                let q = (channels[u].adjoint() * &inv * &channels[u])[(0, 0)].re;
                1.0 / ((1.0 + 1.0 / gamma[u]) * q)
            })
            .collect();
        let change = next
            .iter()
            .zip(&lambda)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
            .fold(0.0, f64::max);
        lambda = next;
        if change < 1e-14 {
            break;
        }
    }
    lambda.iter().zip(noise).map(|(l, s)| l * s).sum()
}

/// Network with i.i.d. `CN(0, 1)` channels and the given budgets and noise.
pub fn gaussian_instance(
    rng: &mut ChaCha8Rng,
    k: usize,
    mt: usize,
    nt: usize,
    budget: f64,
    noise: f64,
) -> (ChannelSet, NetworkConfig) {
    let cfg = NetworkConfig::uniform(k, mt, nt, budget, 0.1, 1.0, noise).unwrap();
    let h = DMatrix::from_fn(cfg.users(), cfg.antennas(), |_, _| {
        C64::new(gauss(rng), gauss(rng)) * std::f64::consts::FRAC_1_SQRT_2
    });
    (ChannelSet::from_rows(h).unwrap(), cfg)
}

/// Per-user `(rate, power)` straight from `H` and `W`:
/// `ln(1 + |h_nᴴw_n|² / (Σ_{m≠n} |h_nᴴw_m|² + σ_n²))` and `‖w_n‖²`.
pub fn direct_rates(w: &DMatrix<C64>, h: &ChannelSet, noise: &[f64]) -> Vec<(f64, f64)> {
    let hw = h.matrix() * w;
    (0..hw.nrows())
        .map(|n| {
            let total: f64 = hw.row(n).iter().map(|v| v.norm_sqr()).sum::<f64>() + noise[n];
            let signal = hw[(n, n)].norm_sqr();
            let rate = (signal / (total - signal)).ln_1p();
            (rate, w.column(n).norm_squared())
        })
        .collect()
}

/// `min_n rate_n / (‖w_n‖² + overhead)` from [`direct_rates`].
pub fn direct_min_ee(w: &DMatrix<C64>, h: &ChannelSet, cfg: &NetworkConfig) -> f64 {
    direct_rates(w, h, cfg.noise_variances())
        .into_iter()
        .map(|(r, p)| r / (p + cfg.overhead()))
        .fold(f64::INFINITY, f64::min)
}

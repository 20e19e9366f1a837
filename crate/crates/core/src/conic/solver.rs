//! Dense primal-dual interior-point method on the homogeneous self-dual
//! embedding, with Nesterov–Todd scaling and Mehrotra predictor-corrector
//! steps.
//!
//! Zero-cone rows are split off as equalities `A_eq x = b_eq`; the remaining
//! rows form `G x + s = h` with `s` in a product of orthants and
//! second-order cones. Each Newton system is reduced to the normal matrix
//! `Gᵀ W⁻² G` bordered by the equalities.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};

use super::cones::{Block, ConeSet, Scaling};
use super::{ConeKind, ConicProblem, ConicSolution, SolveStatus};
use crate::error::{invalid, Result};

pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub equilibrate: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: DEFAULT_TOL,
            max_iters: 100,
            equilibrate: true,
        }
    }
}

const STEP_FRACTION: f64 = 0.99;
const STATIC_REG: f64 = 1e-11;
const REFINE_STEPS: usize = 8;
const RUIZ_PASSES: usize = 15;
/// Iterations without a better iterate before giving up.
const STALL_ITERS: usize = 8;

/// Solves `problem` to relative accuracy `tol`.
pub fn solve_socp(problem: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    solve_socp_with(
        problem,
        &SolverSettings {
            tol,
            ..SolverSettings::default()
        },
    )
}

pub fn solve_socp_with(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    problem.validate()?;
    if !(settings.tol > 0.0 && settings.tol <= 1e-2) {
        return Err(invalid(format!("tolerance {} outside (0, 1e-2]", settings.tol)));
    }
    let split = Split::new(problem);
    let scaled = split.equilibrated(settings.equilibrate);
    let mut ipm = Ipm::new(&split, &scaled);
    Ok(ipm.run(&split, &scaled, settings))
}

/// Problem rewritten as equalities plus conic rows, with the row maps back to
/// the original ordering.
#[derive(Clone)]
struct Split {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cones: ConeSet,
    eq_rows: Vec<usize>,
    cone_rows: Vec<usize>,
    total_rows: usize,
}

impl Split {
    fn new(problem: &ConicProblem) -> Self {
        let mut eq_rows = Vec::new();
        let mut cone_rows = Vec::new();
        let mut blocks = Vec::new();
        let mut row = 0;
        for cone in &problem.cones {
            let range = row..row + cone.dim;
            match cone.kind {
                ConeKind::Zero => eq_rows.extend(range),
                ConeKind::Nonneg | ConeKind::Soc => {
                    let start = cone_rows.len();
                    cone_rows.extend(range);
                    let local = start..cone_rows.len();
                    blocks.push(if cone.kind == ConeKind::Soc {
                        Block::Soc(local)
                    } else {
                        Block::Nonneg(local)
                    });
                }
            }
            row += cone.dim;
        }
        let n = problem.num_vars();
        let a = DMatrix::from_fn(eq_rows.len(), n, |i, j| problem.a[(eq_rows[i], j)]);
        let b = DVector::from_fn(eq_rows.len(), |i, _| problem.b[eq_rows[i]]);
        let g = DMatrix::from_fn(cone_rows.len(), n, |i, j| problem.a[(cone_rows[i], j)]);
        let h = DVector::from_fn(cone_rows.len(), |i, _| problem.b[cone_rows[i]]);
        let dim = cone_rows.len();
        Split {
            c: problem.c.clone(),
            a,
            b,
            g,
            h,
            cones: ConeSet { blocks, dim },
            eq_rows,
            cone_rows,
            total_rows: problem.num_rows(),
        }
    }

    /// Ruiz equilibration. Rows of one second-order block share a factor so
    /// the cone is preserved.
    fn equilibrated(&self, enabled: bool) -> Scaled {
        let n = self.c.len();
        let (p, m) = (self.a.nrows(), self.g.nrows());
        let mut col = DVector::from_element(n, 1.0);
        let mut row_eq = DVector::from_element(p, 1.0);
        let mut row_g = DVector::from_element(m, 1.0);
        let mut a = self.a.clone();
        let mut g = self.g.clone();
        if enabled {
            let clamp = |v: f64| if v > 0.0 && v.is_finite() { 1.0 / v.sqrt() } else { 1.0 };
            for _ in 0..RUIZ_PASSES {
                let cfac = DVector::from_fn(n, |j, _| {
                    let amax = if p > 0 { a.column(j).amax() } else { 0.0 };
                    let gmax = if m > 0 { g.column(j).amax() } else { 0.0 };
                    clamp(amax.max(gmax))
                });
                let efac = DVector::from_fn(p, |i, _| clamp(a.row(i).amax()));
                let mut gfac = DVector::from_element(m, 1.0);
                for block in &self.cones.blocks {
                    match block {
                        Block::Nonneg(r) => {
                            for i in r.clone() {
                                gfac[i] = clamp(g.row(i).amax());
                            }
                        }
                        Block::Soc(r) => {
                            let f = clamp(g.rows(r.start, r.len()).amax());
                            r.clone().for_each(|i| gfac[i] = f);
                        }
                    }
                }
                for j in 0..n {
                    a.column_mut(j).scale_mut(cfac[j]);
                    g.column_mut(j).scale_mut(cfac[j]);
                }
                for i in 0..p {
                    a.row_mut(i).scale_mut(efac[i]);
                }
                for i in 0..m {
                    g.row_mut(i).scale_mut(gfac[i]);
                }
                col.component_mul_assign(&cfac);
                row_eq.component_mul_assign(&efac);
                row_g.component_mul_assign(&gfac);
            }
        }
        Scaled {
            c: self.c.component_mul(&col),
            b: self.b.component_mul(&row_eq),
            h: self.h.component_mul(&row_g),
            a,
            g,
            col,
            row_eq,
            row_g,
        }
    }
}

struct Scaled {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    col: DVector<f64>,
    row_eq: DVector<f64>,
    row_g: DVector<f64>,
}

enum Factor {
    Chol(Cholesky<f64, Dyn>),
    Lu(LU<f64, Dyn, Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(c) => Some(c.solve(rhs)),
            Factor::Lu(l) => l.solve(rhs),
        }
    }
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Ipm {
    cones: ConeSet,
    gram: DMatrix<f64>,
}

/// Unscaled quality measures of the current iterate.
struct Quality {
    pres: f64,
    dres: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
}

impl Ipm {
    fn new(split: &Split, sc: &Scaled) -> Self {
        let cones = split.cones.clone();
        Ipm {
            cones,
            gram: sc.g.tr_mul(&sc.g),
        }
    }

    fn run(&mut self, split: &Split, sc: &Scaled, settings: &SolverSettings) -> ConicSolution {
        let n = sc.c.len();
        let p = sc.a.nrows();
        let tol = settings.tol;
        let degree = self.cones.degree() as f64;

        let mut it = match self.initial_point(sc) {
            Some(it) => it,
            None => {
                let it = Iterate {
                    x: DVector::zeros(n),
                    y: DVector::zeros(p),
                    z: self.cones.identity(),
                    s: self.cones.identity(),
                    tau: 1.0,
                    kappa: 1.0,
                };
                return self.finish(split, sc, &it, SolveStatus::MaxIters, 0);
            }
        };

        let mut best: Option<(f64, Iterate)> = None;
        let mut since_best = 0;
        let mut iterations = 0;
        for iter in 0..settings.max_iters {
            iterations = iter;
            let q = self.quality(split, sc, &it);
            if q.pres <= tol && q.dres <= tol && q.gap <= tol {
                return self.finish(split, sc, &it, SolveStatus::Optimal, iter);
            }
            let merit = q.pres.max(q.dres).max(q.gap);
            if best.as_ref().is_none_or(|(b, _)| merit < *b) {
                best = Some((merit, clone_it(&it)));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= STALL_ITERS {
                    break;
                }
            }
            if it.tau < it.kappa {
                if let Some(status) = self.certificate(split, sc, &it, tol) {
                    return self.finish(split, sc, &it, status, iter);
                }
            }

            let rx = sc.a.tr_mul(&it.y) + sc.g.tr_mul(&it.z) + &sc.c * it.tau;
            let ry = &sc.a * &it.x - &sc.b * it.tau;
            let rz = &it.s + &sc.g * &it.x - &sc.h * it.tau;
            let rt = it.kappa + sc.c.dot(&it.x) + sc.b.dot(&it.y) + sc.h.dot(&it.z);
            let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (degree + 1.0);

            let Some(scal) = self.cones.scalings(&it.s, &it.z) else {
                break;
            };
            let lambda = self.cones.apply_w(&scal, &it.z);
            let Some(kkt) = self.factor(sc, &scal) else {
                break;
            };

            let Some((x1, y1, z1)) = self.solve3(sc, &scal, &kkt, &(-&sc.c), &sc.b, &sc.h) else {
                break;
            };
            let denom = sc.c.dot(&x1) + sc.b.dot(&y1) + sc.h.dot(&z1) - it.kappa / it.tau;

            // Predictor.
            let rz_aff = -&rz + &it.s;
            let Some((x2, y2, z2)) = self.solve3(sc, &scal, &kkt, &(-&rx), &(-&ry), &rz_aff) else {
                break;
            };
            let rk_aff = -it.tau * it.kappa;
            let dtau_a = (-rt - sc.c.dot(&x2) - sc.b.dot(&y2) - sc.h.dot(&z2) - rk_aff / it.tau) / denom;
            let dz_a = &z2 + &z1 * dtau_a;
            let xi_a = -&lambda;
            let ds_a = self
                .cones
                .apply_w(&scal, &(&xi_a - self.cones.apply_w(&scal, &dz_a)));
            let dkappa_a = (rk_aff - it.kappa * dtau_a) / it.tau;
            let alpha_a = self.step_length(&it, &ds_a, &dz_a, dtau_a, dkappa_a, 1.0);
            let sigma = (1.0 - alpha_a).powi(3).clamp(1e-10, 1.0);

            // Corrector.
            let ws = self.cones.apply_w_inv(&scal, &ds_a);
            let wz = self.cones.apply_w(&scal, &dz_a);
            let rs = -self.cones.jordan(&lambda, &lambda) - self.cones.jordan(&ws, &wz)
                + self.cones.identity() * (sigma * mu);
            let xi = self.cones.jordan_div(&lambda, &rs);
            let eta = 1.0 - sigma;
            let rz_c = -&rz * eta - self.cones.apply_w(&scal, &xi);
            let Some((x2, y2, z2)) = self.solve3(sc, &scal, &kkt, &(-&rx * eta), &(-&ry * eta), &rz_c)
            else {
                break;
            };
            let rk = -it.tau * it.kappa - dtau_a * dkappa_a + sigma * mu;
            let dtau = (-eta * rt - sc.c.dot(&x2) - sc.b.dot(&y2) - sc.h.dot(&z2) - rk / it.tau) / denom;
            let dx = &x2 + &x1 * dtau;
            let dy = &y2 + &y1 * dtau;
            let dz = &z2 + &z1 * dtau;
            let ds = self.cones.apply_w(&scal, &(&xi - self.cones.apply_w(&scal, &dz)));
            let dkappa = (rk - it.kappa * dtau) / it.tau;

            let alpha = STEP_FRACTION * self.step_length(&it, &ds, &dz, dtau, dkappa, 1.0 / STEP_FRACTION);
            let alpha = alpha.min(1.0);
            if !(alpha.is_finite() && dtau.is_finite()) || alpha < 1e-13 {
                break;
            }
            it.x += &dx * alpha;
            it.y += &dy * alpha;
            it.z += &dz * alpha;
            it.s += &ds * alpha;
            it.tau += alpha * dtau;
            it.kappa += alpha * dkappa;
            if !(it.tau > 0.0 && it.kappa > 0.0) || it.x.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        let q = self.quality(split, sc, &it);
        if q.pres <= tol && q.dres <= tol && q.gap <= tol {
            return self.finish(split, sc, &it, SolveStatus::Optimal, iterations + 1);
        }
        let final_it = match best {
            Some((merit, b)) if merit < q.pres.max(q.dres).max(q.gap) || !q.pres.is_finite() => b,
            _ => it,
        };
        self.finish(split, sc, &final_it, SolveStatus::MaxIters, iterations + 1)
    }

    fn initial_point(&self, sc: &Scaled) -> Option<Iterate> {
        let n = sc.c.len();
        let p = sc.a.nrows();
        let mut hess = self.gram.clone();
        for i in 0..n {
            hess[(i, i)] += 1e-8;
        }
        let kkt = self.factor_matrix(sc, hess)?;
        let rhs = stack(&sc.g.tr_mul(&sc.h), &sc.b);
        let sol = kkt.solve(&rhs)?;
        let x = sol.rows(0, n).into_owned();
        let mut s = &sc.h - &sc.g * &x;
        self.cones.shift_inside(&mut s);

        let rhs = stack(&sc.c, &DVector::zeros(p));
        let sol = kkt.solve(&rhs)?;
        let v = sol.rows(0, n).into_owned();
        let y = -sol.rows(n, p).into_owned();
        let mut z = -(&sc.g * &v);
        self.cones.shift_inside(&mut z);
        if x.iter().chain(s.iter()).chain(z.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some(Iterate {
            x,
            y,
            z,
            s,
            tau: 1.0,
            kappa: 1.0,
        })
    }

    fn factor(&self, sc: &Scaled, scal: &[Scaling]) -> Option<Factor> {
        let n = sc.c.len();
        let mut hess = DMatrix::zeros(n, n);
        self.cones.add_normal_matrix(scal, &sc.g, &mut hess);
        self.factor_matrix(sc, hess)
    }

    /// Factors the reduced system, adding static regularization only when
    /// the plain factorization breaks down.
    fn factor_matrix(&self, sc: &Scaled, hess: DMatrix<f64>) -> Option<Factor> {
        let scale = hess.diagonal().amax().max(1.0);
        for reg in [0.0, STATIC_REG, 1e3 * STATIC_REG] {
            if let Some(f) = self.try_factor(sc, &hess, reg * scale) {
                return Some(f);
            }
        }
        None
    }

    fn try_factor(&self, sc: &Scaled, hess: &DMatrix<f64>, reg: f64) -> Option<Factor> {
        let n = sc.c.len();
        let p = sc.a.nrows();
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += reg;
        }
        if p == 0 {
            return Cholesky::new(h).map(Factor::Chol);
        }
        let mut k = DMatrix::zeros(n + p, n + p);
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        k.view_mut((n, 0), (p, n)).copy_from(&sc.a);
        k.view_mut((0, n), (n, p)).copy_from(&sc.a.transpose());
        for i in 0..p {
            k[(n + i, n + i)] = -reg;
        }
        let lu = LU::new(k);
        let diag = lu.u().diagonal();
        let (big, small) = diag.iter().fold((0.0f64, f64::INFINITY), |(b, s), v| (b.max(v.abs()), s.min(v.abs())));
        (small > 1e-15 * big).then_some(Factor::Lu(lu))
    }

    /// Solves
    /// `Aᵀdy + Gᵀdz = rx,  A dx = ry,  G dx − W² dz = rz`
    /// through the factored reduced system, with iterative refinement.
    fn solve3(
        &self,
        sc: &Scaled,
        scal: &[Scaling],
        kkt: &Factor,
        rx: &DVector<f64>,
        ry: &DVector<f64>,
        rz: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let n = sc.c.len();
        let p = sc.a.nrows();
        let w2inv = |v: &DVector<f64>| self.cones.apply_w_inv(scal, &self.cones.apply_w_inv(scal, v));
        let w2 = |v: &DVector<f64>| self.cones.apply_w(scal, &self.cones.apply_w(scal, v));

        let reduced = |ex: &DVector<f64>, ey: &DVector<f64>, ez: &DVector<f64>| {
            let r1 = ex + sc.g.tr_mul(&w2inv(ez));
            let sol = kkt.solve(&stack(&r1, ey))?;
            let dx = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, p).into_owned();
            let dz = w2inv(&(&sc.g * &dx - ez));
            Some((dx, dy, dz))
        };

        let (mut dx, mut dy, mut dz) = reduced(rx, ry, rz)?;
        for _ in 0..REFINE_STEPS {
            let ex = rx - (sc.a.tr_mul(&dy) + sc.g.tr_mul(&dz));
            let ey = ry - &sc.a * &dx;
            let ez = rz - (&sc.g * &dx - w2(&dz));
            let err = ex.amax().max(if p > 0 { ey.amax() } else { 0.0 }).max(if ez.is_empty() { 0.0 } else { ez.amax() });
            let scale = rx.amax().max(if p > 0 { ry.amax() } else { 0.0 }).max(if rz.is_empty() { 0.0 } else { rz.amax() }).max(1e-300);
            if err <= 1e-14 * scale {
                break;
            }
            let (cx, cy, cz) = reduced(&ex, &ey, &ez)?;
            dx += cx;
            dy += cy;
            dz += cz;
        }
        let ok = dx.iter().chain(dy.iter()).chain(dz.iter()).all(|v| v.is_finite());
        ok.then_some((dx, dy, dz))
    }

    fn step_length(
        &self,
        it: &Iterate,
        ds: &DVector<f64>,
        dz: &DVector<f64>,
        dtau: f64,
        dkappa: f64,
        cap: f64,
    ) -> f64 {
        let mut alpha = cap;
        alpha = alpha.min(self.cones.max_step(&it.s, ds, cap));
        alpha = alpha.min(self.cones.max_step(&it.z, dz, cap));
        if dtau < 0.0 {
            alpha = alpha.min(-it.tau / dtau);
        }
        if dkappa < 0.0 {
            alpha = alpha.min(-it.kappa / dkappa);
        }
        alpha.max(0.0)
    }

    fn unscale(&self, split: &Split, sc: &Scaled, it: &Iterate) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let x = it.x.component_mul(&sc.col);
        let y_eq = it.y.component_mul(&sc.row_eq);
        let z = it.z.component_mul(&sc.row_g);
        let s = it.s.component_div(&sc.row_g);
        let _ = split;
        (x, y_eq, z, s)
    }

    fn quality(&self, split: &Split, sc: &Scaled, it: &Iterate) -> Quality {
        let (x, y_eq, z, s) = self.unscale(split, sc, it);
        let inv = 1.0 / it.tau;
        let (x, y_eq, z, s) = (x * inv, y_eq * inv, z * inv, s * inv);
        let pa = &split.a * &x - &split.b;
        let pg = &split.g * &x + &s - &split.h;
        let pres = (pa.norm_squared() + pg.norm_squared()).sqrt()
            / (1.0 + (split.b.norm_squared() + split.h.norm_squared()).sqrt());
        let dvec = split.a.tr_mul(&y_eq) + split.g.tr_mul(&z) + &split.c;
        let dres = dvec.norm() / (1.0 + split.c.norm());
        let pobj = split.c.dot(&x);
        let dobj = -split.b.dot(&y_eq) - split.h.dot(&z);
        let gap = (pobj - dobj).abs().max(s.dot(&z).abs()) / (1.0 + pobj.abs());

        let mut y = DVector::zeros(split.total_rows);
        let mut s_full = DVector::zeros(split.total_rows);
        for (i, &r) in split.eq_rows.iter().enumerate() {
            y[r] = y_eq[i];
        }
        for (i, &r) in split.cone_rows.iter().enumerate() {
            y[r] = z[i];
            s_full[r] = s[i];
        }
        Quality {
            pres,
            dres,
            gap,
            pobj,
            dobj,
            x,
            y,
            s: s_full,
        }
    }

    /// Farkas-type certificates, checked on the unscaled data.
    fn certificate(&self, split: &Split, sc: &Scaled, it: &Iterate, tol: f64) -> Option<SolveStatus> {
        let (x, y_eq, z, s) = self.unscale(split, sc, it);
        let by = split.b.dot(&y_eq) + split.h.dot(&z);
        if by < 0.0 {
            let res = (split.a.tr_mul(&y_eq) + split.g.tr_mul(&z)).norm();
            if res <= tol * -by {
                return Some(SolveStatus::Infeasible);
            }
        }
        let cx = split.c.dot(&x);
        if cx < 0.0 {
            let pa = &split.a * &x;
            let pg = &split.g * &x + &s;
            let res = (pa.norm_squared() + pg.norm_squared()).sqrt();
            if res <= tol * -cx {
                return Some(SolveStatus::Unbounded);
            }
        }
        None
    }

    fn finish(&self, split: &Split, sc: &Scaled, it: &Iterate, status: SolveStatus, iterations: usize) -> ConicSolution {
        match status {
            SolveStatus::Infeasible | SolveStatus::Unbounded => {
                let (x, y_eq, z, s) = self.unscale(split, sc, it);
                let mut y = DVector::zeros(split.total_rows);
                let mut s_full = DVector::zeros(split.total_rows);
                for (i, &r) in split.eq_rows.iter().enumerate() {
                    y[r] = y_eq[i];
                }
                for (i, &r) in split.cone_rows.iter().enumerate() {
                    y[r] = z[i];
                    s_full[r] = s[i];
                }
                ConicSolution {
                    x,
                    y,
                    s: s_full,
                    status,
                    primal_objective: f64::NAN,
                    dual_objective: f64::NAN,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    duality_gap: f64::NAN,
                    iterations,
                }
            }
            _ => {
                let q = self.quality(split, sc, it);
                ConicSolution {
                    x: q.x,
                    y: q.y,
                    s: q.s,
                    status,
                    primal_objective: q.pobj,
                    dual_objective: q.dobj,
                    primal_residual: q.pres,
                    dual_residual: q.dres,
                    duality_gap: q.gap,
                    iterations,
                }
            }
        }
    }
}

fn clone_it(it: &Iterate) -> Iterate {
    Iterate {
        x: it.x.clone(),
        y: it.y.clone(),
        z: it.z.clone(),
        s: it.s.clone(),
        tau: it.tau,
        kappa: it.kappa,
    }
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

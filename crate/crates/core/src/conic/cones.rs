//! Cone algebra for the interior-point iterations: Nesterov–Todd scalings,
//! Jordan products and step-to-boundary computations over a product of
//! non-negative orthants and second-order cones.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

/// One block of the conic part (zero cones are handled as equalities).
#[derive(Clone, Debug)]
pub(crate) enum Block {
    Nonneg(Range<usize>),
    Soc(Range<usize>),
}

impl Block {
    pub(crate) fn range(&self) -> Range<usize> {
        match self {
            Block::Nonneg(r) | Block::Soc(r) => r.clone(),
        }
    }
}

/// NT scaling of one block, stored so that `W`, `W⁻¹` and `W²` can be applied
/// without forming matrices.
#[derive(Clone, Debug)]
pub(crate) enum Scaling {
    /// `W = diag(d)` with `d = sqrt(s/z)`.
    Nonneg(Vec<f64>),
    /// `W = η(2 v vᵀ − J)` with `vᵀ J v = 1`.
    Soc { eta: f64, v: Vec<f64> },
}

#[derive(Clone, Debug)]
pub(crate) struct ConeSet {
    pub blocks: Vec<Block>,
    pub dim: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `vᵀ J v` for a cone vector.
fn jnorm2(v: &[f64]) -> f64 {
    v[0] * v[0] - dot(&v[1..], &v[1..])
}

impl ConeSet {
    /// Barrier degree: one per non-negative row plus one per second-order cone.
    pub(crate) fn degree(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Nonneg(r) => r.len(),
                Block::Soc(_) => 1,
            })
            .sum()
    }

    /// Identity element `e`.
    pub(crate) fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim);
        for b in &self.blocks {
            match b {
                Block::Nonneg(r) => r.clone().for_each(|i| e[i] = 1.0),
                Block::Soc(r) => e[r.start] = 1.0,
            }
        }
        e
    }

    /// Largest `α` such that `v − α e` stays in the cone, i.e. the minimum
    /// spectral value of `v`.
    pub(crate) fn min_eigenvalue(&self, v: &DVector<f64>) -> f64 {
        let mut min = f64::INFINITY;
        for b in &self.blocks {
            match b {
                Block::Nonneg(r) => r.clone().for_each(|i| min = min.min(v[i])),
                Block::Soc(r) => {
                    let x = &v.as_slice()[r.clone()];
                    min = min.min(x[0] - dot(&x[1..], &x[1..]).sqrt());
                }
            }
        }
        min
    }

    /// Pushes `v` into the interior the way the standard initialization does.
    pub(crate) fn shift_inside(&self, v: &mut DVector<f64>) {
        if self.blocks.is_empty() {
            return;
        }
        let alpha = -self.min_eigenvalue(v);
        if alpha >= 0.0 {
            *v += self.identity() * (1.0 + alpha);
        }
    }

    pub(crate) fn scalings(&self, s: &DVector<f64>, z: &DVector<f64>) -> Option<Vec<Scaling>> {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Nonneg(r) => {
                    let d: Vec<f64> = r.clone().map(|i| (s[i] / z[i]).sqrt()).collect();
                    d.iter().all(|v| v.is_finite() && *v > 0.0).then_some(Scaling::Nonneg(d))
                }
                Block::Soc(r) => {
                    let sv = &s.as_slice()[r.clone()];
                    let zv = &z.as_slice()[r.clone()];
                    let (sj, zj) = (jnorm2(sv), jnorm2(zv));
                    if !(sj > 0.0 && zj > 0.0 && sv[0] > 0.0 && zv[0] > 0.0) {
                        return None;
                    }
                    let (sn, zn) = (sj.sqrt(), zj.sqrt());
                    let sbar: Vec<f64> = sv.iter().map(|v| v / sn).collect();
                    let zbar: Vec<f64> = zv.iter().map(|v| v / zn).collect();
                    let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
                    // w̄ = (s̄ + J z̄)/(2γ) satisfies W² = η²(2 w̄ w̄ᵀ − J).
                    let wbar: Vec<f64> = sbar
                        .iter()
                        .zip(&zbar)
                        .enumerate()
                        .map(|(i, (a, b))| (if i == 0 { a + b } else { a - b }) / (2.0 * gamma))
                        .collect();
                    let denom = (2.0 * (wbar[0] + 1.0)).sqrt();
                    let mut v: Vec<f64> = wbar.iter().map(|x| x / denom).collect();
                    v[0] += 1.0 / denom;
                    // Renormalize onto the hyperboloid to absorb rounding.
                    let vj = jnorm2(&v);
                    if !(vj > 0.0) {
                        return None;
                    }
                    let vn = vj.sqrt();
                    v.iter_mut().for_each(|x| *x /= vn);
                    let eta = (sj / zj).powf(0.25);
                    eta.is_finite().then_some(Scaling::Soc { eta, v })
                }
            })
            .collect()
    }

    /// `W v`.
    pub(crate) fn apply_w(&self, sc: &[Scaling], v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (b, scale) in self.blocks.iter().zip(sc) {
            let r = b.range();
            match scale {
                Scaling::Nonneg(d) => {
                    for (j, i) in r.enumerate() {
                        out[i] = d[j] * v[i];
                    }
                }
                Scaling::Soc { eta, v: w } => {
                    let x = &v.as_slice()[r.clone()];
                    let wx = dot(w, x);
                    for (j, i) in r.enumerate() {
                        let jx = if j == 0 { x[0] } else { -x[j] };
                        out[i] = eta * (2.0 * w[j] * wx - jx);
                    }
                }
            }
        }
        out
    }

    /// `W⁻¹ v`, using `W⁻¹ = η⁻¹(2 J v vᵀ J − J)`.
    pub(crate) fn apply_w_inv(&self, sc: &[Scaling], v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (b, scale) in self.blocks.iter().zip(sc) {
            let r = b.range();
            match scale {
                Scaling::Nonneg(d) => {
                    for (j, i) in r.enumerate() {
                        out[i] = v[i] / d[j];
                    }
                }
                Scaling::Soc { eta, v: w } => {
                    let x = &v.as_slice()[r.clone()];
                    // u = J w, so uᵀx = w₀x₀ − w₁ᵀx₁.
                    let ux = w[0] * x[0] - dot(&w[1..], &x[1..]);
                    for (j, i) in r.enumerate() {
                        let (uj, jx) = if j == 0 { (w[0], x[0]) } else { (-w[j], -x[j]) };
                        out[i] = (2.0 * uj * ux - jx) / eta;
                    }
                }
            }
        }
        out
    }

    /// Adds `Gᵀ W⁻² G` to `hess`, formed as `(W⁻¹G)ᵀ(W⁻¹G)` so the result
    /// stays positive semidefinite in floating point.
    pub(crate) fn add_normal_matrix(&self, sc: &[Scaling], g: &DMatrix<f64>, hess: &mut DMatrix<f64>) {
        let mut scaled = DMatrix::zeros(self.dim, g.ncols());
        for j in 0..g.ncols() {
            let col = self.apply_w_inv(sc, &g.column(j).into_owned());
            scaled.set_column(j, &col);
        }
        hess.gemm_tr(1.0, &scaled, &scaled, 1.0);
    }

    /// Jordan product `x ∘ y`.
    pub(crate) fn jordan(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for b in &self.blocks {
            match b {
                Block::Nonneg(r) => r.clone().for_each(|i| out[i] = x[i] * y[i]),
                Block::Soc(r) => {
                    let xs = &x.as_slice()[r.clone()];
                    let ys = &y.as_slice()[r.clone()];
                    out[r.start] = dot(xs, ys);
                    for j in 1..r.len() {
                        out[r.start + j] = xs[0] * ys[j] + ys[0] * xs[j];
                    }
                }
            }
        }
        out
    }

    /// Solves `λ ∘ v = r` for `v`.
    pub(crate) fn jordan_div(&self, lambda: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for b in &self.blocks {
            match b {
                Block::Nonneg(rg) => rg.clone().for_each(|i| out[i] = r[i] / lambda[i]),
                Block::Soc(rg) => {
                    let l = &lambda.as_slice()[rg.clone()];
                    let rv = &r.as_slice()[rg.clone()];
                    let rho = jnorm2(l);
                    let v0 = (l[0] * rv[0] - dot(&l[1..], &rv[1..])) / rho;
                    out[rg.start] = v0;
                    for j in 1..rg.len() {
                        out[rg.start + j] = (rv[j] - v0 * l[j]) / l[0];
                    }
                }
            }
        }
        out
    }

    /// Largest `α ≥ 0` (capped at `cap`) with `v + α d` in the cone.
    pub(crate) fn max_step(&self, v: &DVector<f64>, d: &DVector<f64>, cap: f64) -> f64 {
        let mut alpha = cap;
        for b in &self.blocks {
            match b {
                Block::Nonneg(r) => {
                    for i in r.clone() {
                        if d[i] < 0.0 {
                            alpha = alpha.min(-v[i] / d[i]);
                        }
                    }
                }
                Block::Soc(r) => {
                    let vs = &v.as_slice()[r.clone()];
                    let ds = &d.as_slice()[r.clone()];
                    alpha = alpha.min(soc_step(vs, ds));
                }
            }
        }
        alpha.max(0.0)
    }
}

/// First exit of `v + α d` from the second-order cone, `∞` if none.
fn soc_step(v: &[f64], d: &[f64]) -> f64 {
    let a = jnorm2(d);
    let b = v[0] * d[0] - dot(&v[1..], &d[1..]);
    let c = jnorm2(v).max(0.0);
    // f(α) = aα² + 2bα + c, f(0) = c ≥ 0.
    let mut alpha = f64::INFINITY;
    if a == 0.0 {
        if b < 0.0 {
            alpha = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(b + b.signum() * sq);
            let roots = [if a != 0.0 { q / a } else { f64::INFINITY }, if q != 0.0 { c / q } else { f64::INFINITY }];
            for r in roots {
                if r > 0.0 && r.is_finite() {
                    alpha = alpha.min(r);
                }
            }
        }
    }
    if d[0] < 0.0 {
        alpha = alpha.min(-v[0] / d[0]);
    }
    alpha
}

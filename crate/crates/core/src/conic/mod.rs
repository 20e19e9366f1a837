//! Second-order cone programming in standard form
//!
//! ```text
//! minimize    cᵀx
//! subject to  A x + s = b,   s ∈ K = K₁ × … × K_p
//! ```
//!
//! where each `K_i` is the zero cone, a non-negative orthant or a
//! second-order cone `{(t, v) : ‖v‖ ≤ t}` whose first row is the radius. The
//! dual is `maximize −bᵀy  s.t. Aᵀy + c = 0, y ∈ K*`.

mod cones;
mod reduction;
mod solver;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub use reduction::{
    build_inner_socp, build_powermin_socp, build_rate_socp, BeamformerLayout, InnerSocp,
    PowerMinSocp,
};
pub use solver::{solve_socp, solve_socp_with, SolverSettings, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Nonneg,
    Soc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cone {
    pub kind: ConeKind,
    pub dim: usize,
}

impl Cone {
    pub fn zero(dim: usize) -> Self {
        Cone { kind: ConeKind::Zero, dim }
    }

    pub fn nonneg(dim: usize) -> Self {
        Cone { kind: ConeKind::Nonneg, dim }
    }

    pub fn soc(dim: usize) -> Self {
        Cone { kind: ConeKind::Soc, dim }
    }
}

/// Dense conic program data.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn new(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>, cones: Vec<Cone>) -> Result<Self> {
        let problem = ConicProblem { c, a, b, cones };
        problem.validate()?;
        Ok(problem)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.b.len(), self.c.len());
        if self.a.nrows() != m || self.a.ncols() != n {
            return Err(invalid(format!(
                "constraint matrix is {}x{}, expected {m}x{n}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        let total: usize = self.cones.iter().map(|c| c.dim).sum();
        if total != m {
            return Err(invalid(format!("cone dimensions sum to {total}, expected {m}")));
        }
        if let Some(cone) = self.cones.iter().find(|c| c.dim == 0) {
            return Err(invalid(format!("empty {:?} cone", cone.kind)));
        }
        if self.cones.iter().any(|c| c.kind == ConeKind::Soc && c.dim < 2) {
            return Err(invalid("second-order cones need dimension at least 2"));
        }
        let finite = self.c.iter().chain(self.a.iter()).chain(self.b.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(invalid("problem data must be finite"));
        }
        Ok(())
    }

    /// Distance of `b − A x` from the cone, in the worst block: equality
    /// violation for zero cones, negative part for the others.
    pub fn cone_violation(&self, x: &DVector<f64>) -> f64 {
        let slack = &self.b - &self.a * x;
        let mut worst: f64 = 0.0;
        let mut row = 0;
        for cone in &self.cones {
            let v = slack.rows(row, cone.dim);
            let viol = match cone.kind {
                ConeKind::Zero => v.amax(),
                ConeKind::Nonneg => v.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max),
                ConeKind::Soc => (v.rows(1, cone.dim - 1).norm() - v[0]).max(0.0),
            };
            worst = worst.max(viol);
            row += cone.dim;
        }
        worst
    }

    /// Plain-text dump in a coordinate (Matrix Market–like) layout for
    /// cross-checking with external solvers.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let nnz = self.a.iter().filter(|v| **v != 0.0).count();
        let _ = writeln!(out, "%%ConicProblem coordinate real general");
        let _ = writeln!(out, "% rows cols nonzeros");
        let _ = writeln!(out, "{} {} {}", self.num_rows(), self.num_vars(), nnz);
        let _ = writeln!(out, "% A (1-based row col value)");
        for j in 0..self.a.ncols() {
            for i in 0..self.a.nrows() {
                let v = self.a[(i, j)];
                if v != 0.0 {
                    let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
                }
            }
        }
        let _ = writeln!(out, "% b");
        for v in self.b.iter() {
            let _ = writeln!(out, "{v:e}");
        }
        let _ = writeln!(out, "% c");
        for v in self.c.iter() {
            let _ = writeln!(out, "{v:e}");
        }
        let _ = writeln!(out, "% cones (kind dim)");
        for cone in &self.cones {
            let kind = match cone.kind {
                ConeKind::Zero => "zero",
                ConeKind::Nonneg => "nonneg",
                ConeKind::Soc => "soc",
            };
            let _ = writeln!(out, "{kind} {}", cone.dim);
        }
        out
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
}

/// Solver output. Residuals are relative:
/// `‖Ax + s − b‖/(1 + ‖b‖)`, `‖Aᵀy + c‖/(1 + ‖c‖)` and
/// `max(|cᵀx + bᵀy|, sᵀy)/(1 + |cᵀx|)`.
#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub status: SolveStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn max_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.duality_gap)
    }
}

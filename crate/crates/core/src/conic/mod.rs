//! Standard-form conic programs over products of Hermitian PSD cones and
//! nonnegative orthants, with a homogeneous self-dual interior-point solver.
//!
//! The primal is
//!
//! ```text
//! minimize  c'x   subject to  A x = b,  x in K
//! ```
//!
//! and the dual is `maximize b'y subject to A'y + s = c, s in K` (every cone
//! used here is self-dual). A PSD block of size `d` occupies `d*d` real
//! coordinates in the scaled layout of [`HermitianOperator::to_svec`], so the
//! Euclidean pairing of two blocks is the trace pairing of the operators.
//!
//! [`HermitianOperator::to_svec`]: crate::linalg::HermitianOperator::to_svec

mod builder;
mod cones;
mod presolve;
mod solver;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;

pub use builder::{ProgramBuilder, RowGroup, VarBlock};
pub use solver::{solve, solve_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    /// Complex Hermitian `d x d` positive semidefinite matrices.
    Psd(usize),
    /// The orthant `R^n_+`.
    NonNeg(usize),
}

impl Block {
    pub fn len(&self) -> usize {
        cones::block_len(self)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Barrier degree contributed by this block.
    pub fn degree(&self) -> usize {
        match *self {
            Block::Psd(d) => d,
            Block::NonNeg(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    blocks: Vec<Block>,
}

impl ConeSpec {
    pub fn new(blocks: Vec<Block>) -> Result<Self, ConicError> {
        if blocks.is_empty() {
            return Err(ConicError::EmptyCone);
        }
        if blocks.iter().any(|b| b.is_empty()) {
            return Err(ConicError::EmptyCone);
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Total number of real coordinates.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::len).sum()
    }

    pub fn degree(&self) -> usize {
        self.blocks.iter().map(Block::degree).sum()
    }

    /// Start offset of every block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.len();
                o
            })
            .collect()
    }

    /// Smallest eigenvalue over all blocks; nonnegative iff `x` is in the
    /// cone.
    pub fn min_eig(&self, x: &[f64]) -> Result<f64, LinalgError> {
        let mut worst = f64::INFINITY;
        for (b, o) in self.blocks.iter().zip(self.offsets()) {
            worst = worst.min(cones::min_eig(b, &x[o..o + b.len()])?);
        }
        Ok(worst)
    }

    /// Cone identity element.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        for (b, o) in self.blocks.iter().zip(self.offsets()) {
            cones::identity_into(b, &mut e[o..o + b.len()]);
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-9,
            tol_feas: 1e-9,
            max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    /// Primal infeasible. The certificate `y` has `b'y = 1` and `-A'y` in
    /// the cone.
    Infeasible,
    /// Dual infeasible. The certificate `x` is in the cone with `A x = 0`
    /// and `c'x = -1`.
    Unbounded,
    MaxIterations,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("cone must contain at least one nonempty block")]
    EmptyCone,
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("singular Newton system at iteration {iteration}")]
    NumericalBreakdown { iteration: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub cone: ConeSpec,
    pub c: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
}

impl ConicProgram {
    pub fn new(cone: ConeSpec, c: Vec<f64>, a: DMatrix<f64>, b: Vec<f64>) -> Result<Self, ConicError> {
        let n = cone.dim();
        if c.len() != n {
            return Err(ConicError::DimensionMismatch {
                what: "objective",
                expected: n,
                got: c.len(),
            });
        }
        if a.ncols() != n {
            return Err(ConicError::DimensionMismatch {
                what: "constraint columns",
                expected: n,
                got: a.ncols(),
            });
        }
        if a.nrows() != b.len() {
            return Err(ConicError::DimensionMismatch {
                what: "right-hand side",
                expected: a.nrows(),
                got: b.len(),
            });
        }
        Ok(Self { cone, c, a, b })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.a.nrows())
            .map(|i| self.a.row(i).iter().copied().collect())
            .collect();
        serde_json::json!({
            "blocks": self.cone.blocks(),
            "c": self.c,
            "A": rows,
            "b": self.b,
        })
    }

    /// Writes the program as JSON for offline inspection.
    pub fn dump_json(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct Raw {
            blocks: Vec<Block>,
            c: Vec<f64>,
            #[serde(rename = "A")]
            a: Vec<Vec<f64>>,
            b: Vec<f64>,
        }
        let raw: Raw = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let cone = ConeSpec::new(raw.blocks).map_err(|e| e.to_string())?;
        let n = cone.dim();
        let m = raw.a.len();
        if raw.a.iter().any(|r| r.len() != n) {
            return Err(format!("every row of A must have {n} entries"));
        }
        let a = DMatrix::from_fn(m, n, |i, j| raw.a[i][j]);
        Self::new(cone, raw.c, a, raw.b).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal_value - dual_value|`.
    pub gap: f64,
    pub iterations: usize,
    /// Farkas-type ray for `Infeasible` (a `y`) or `Unbounded` (an `x`).
    pub certificate: Option<Vec<f64>>,
    /// Equality rows removed by presolve as linearly dependent.
    pub dropped_rows: Vec<usize>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Residuals of a candidate primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    /// `max(|A x - b|_inf, cone violation of x)`.
    pub primal_residual: f64,
    /// `max(|c - A'y - s|_inf, cone violation of s)`.
    pub dual_residual: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `primal_value - dual_value`.
    pub gap: f64,
    pub primal_ok: bool,
    pub dual_ok: bool,
    pub gap_ok: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.primal_ok && self.dual_ok && self.gap_ok
    }
}

pub fn verify_solution(prog: &ConicProgram, sol: &Solution, tol: f64) -> Result<VerifyReport, ConicError> {
    let ax = &prog.a * nalgebra::DVector::from_column_slice(&sol.x);
    let eq = ax
        .iter()
        .zip(&prog.b)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max);
    let cone_x = (-prog.cone.min_eig(&sol.x)?).max(0.0);
    let aty = prog.a.transpose() * nalgebra::DVector::from_column_slice(&sol.y);
    let dual_eq = (0..prog.num_vars())
        .map(|j| (prog.c[j] - aty[j] - sol.s[j]).abs())
        .fold(0.0, f64::max);
    let cone_s = (-prog.cone.min_eig(&sol.s)?).max(0.0);
    let primal_value = dot(&prog.c, &sol.x);
    let dual_value = dot(&prog.b, &sol.y);
    let primal_residual = eq.max(cone_x);
    let dual_residual = dual_eq.max(cone_s);
    let gap = primal_value - dual_value;
    Ok(VerifyReport {
        primal_residual,
        dual_residual,
        primal_value,
        dual_value,
        gap,
        primal_ok: primal_residual <= tol,
        dual_ok: dual_residual <= tol,
        gap_ok: gap.abs() <= tol * primal_value.abs().max(1.0),
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

//! Incremental construction of programs whose constraints are mostly
//! equalities between Hermitian operators.

use nalgebra::DMatrix;

use super::{Block, ConeSpec, ConicError, ConicProgram, Solution};
use crate::linalg::HermitianOperator;

/// A variable block: its cone and where its coordinates start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarBlock {
    pub block: Block,
    pub offset: usize,
}

impl VarBlock {
    pub fn len(&self) -> usize {
        self.block.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate index of entry `i` (orthant blocks only make sense here).
    pub fn at(&self, i: usize) -> usize {
        debug_assert!(i < self.len());
        self.offset + i
    }

    /// Reads a PSD block out of a primal or slack vector.
    pub fn operator(&self, v: &[f64]) -> HermitianOperator {
        match self.block {
            Block::Psd(d) => HermitianOperator::from_svec(d, &v[self.offset..self.offset + d * d])
                .expect("block length matches"),
            Block::NonNeg(_) => panic!("operator() on an orthant block"),
        }
    }

    pub fn values<'v>(&self, v: &'v [f64]) -> &'v [f64] {
        &v[self.offset..self.offset + self.len()]
    }
}

/// A contiguous range of equality rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowGroup {
    pub start: usize,
    pub len: usize,
    /// Set when the rows encode a Hermitian equality of this size.
    pub hermitian_dim: Option<usize>,
}

impl RowGroup {
    /// Dual multiplier of a Hermitian equality, as an operator.
    pub fn dual_operator(&self, sol: &Solution) -> HermitianOperator {
        let d = self.hermitian_dim.expect("not a Hermitian equality");
        HermitianOperator::from_svec(d, &sol.y[self.start..self.start + self.len]).expect("group length matches")
    }

    pub fn dual_values<'s>(&self, sol: &'s Solution) -> &'s [f64] {
        &sol.y[self.start..self.start + self.len]
    }
}

#[derive(Debug, Default, Clone)]
pub struct ProgramBuilder {
    blocks: Vec<Block>,
    dim: usize,
    c: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, block: Block) -> VarBlock {
        let v = VarBlock {
            block,
            offset: self.dim,
        };
        self.dim += block.len();
        self.c.resize(self.dim, 0.0);
        self.blocks.push(block);
        v
    }

    pub fn psd(&mut self, d: usize) -> VarBlock {
        self.push(Block::Psd(d))
    }

    pub fn nonneg(&mut self, n: usize) -> VarBlock {
        self.push(Block::NonNeg(n))
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn add_cost(&mut self, index: usize, coeff: f64) {
        self.c[index] += coeff;
    }

    /// Adds `coeff * tr[op X]` to the objective for a PSD block `X`.
    pub fn add_cost_operator(&mut self, var: VarBlock, op: &HermitianOperator, coeff: f64) {
        for (k, v) in op.to_svec().into_iter().enumerate() {
            self.c[var.offset + k] += coeff * v;
        }
    }

    /// Adds one scalar equality `sum coeff * x[index] = rhs`.
    pub fn add_row(&mut self, terms: &[(usize, f64)], rhs: f64) -> RowGroup {
        let start = self.b.len();
        self.rows.push(terms.to_vec());
        self.b.push(rhs);
        RowGroup {
            start,
            len: 1,
            hermitian_dim: None,
        }
    }

    /// Adds the operator equality
    /// `sum_i w_i X_i + sum_j x[k_j] B_j = rhs`
    /// for PSD blocks `X_i` of size `d` and scalar coordinates `x[k_j]`
    /// multiplying fixed operators `B_j`.
    pub fn add_hermitian_eq(
        &mut self,
        d: usize,
        blocks: &[(VarBlock, f64)],
        scalars: &[(usize, &HermitianOperator)],
        rhs: &HermitianOperator,
    ) -> RowGroup {
        let n = d * d;
        let start = self.b.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(var, w) in blocks {
            assert_eq!(var.block, Block::Psd(d), "operator equality over mismatched block");
            for (k, row) in rows.iter_mut().enumerate() {
                row.push((var.offset + k, w));
            }
        }
        for &(idx, op) in scalars {
            assert_eq!(op.dim(), d);
            for (k, v) in op.to_svec().into_iter().enumerate() {
                if v != 0.0 {
                    rows[k].push((idx, v));
                }
            }
        }
        assert_eq!(rhs.dim(), d);
        self.b.extend(rhs.to_svec());
        self.rows.extend(rows);
        RowGroup {
            start,
            len: n,
            hermitian_dim: Some(d),
        }
    }

    pub fn build(self) -> Result<ConicProgram, ConicError> {
        let cone = ConeSpec::new(self.blocks)?;
        let m = self.b.len();
        let mut a = DMatrix::zeros(m, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                a[(i, j)] += v;
            }
        }
        ConicProgram::new(cone, self.c, a, self.b)
    }
}

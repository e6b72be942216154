//! Per-block cone arithmetic for the interior-point iterations: Jordan
//! products, Nesterov-Todd scaling, and step-length limits.

use nalgebra::DMatrix;

use super::Block;
use crate::linalg::{hermitian_eig, Complex64, ComplexMatrix, HermitianOperator, LinalgError};

pub(crate) fn block_len(b: &Block) -> usize {
    match *b {
        Block::Psd(d) => d * d,
        Block::NonNeg(n) => n,
    }
}

pub(crate) fn identity_into(b: &Block, out: &mut [f64]) {
    match *b {
        Block::Psd(d) => {
            out.iter_mut().for_each(|v| *v = 0.0);
            let mut k = 0;
            for i in 0..d {
                out[k] = 1.0;
                k += 2 * (d - i) - 1;
            }
        }
        Block::NonNeg(_) => out.iter_mut().for_each(|v| *v = 1.0),
    }
}

fn to_na(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn from_na(m: &DMatrix<Complex64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn cholesky_factor(h: &HermitianOperator) -> Result<DMatrix<Complex64>, LinalgError> {
    match to_na(h.matrix()).cholesky() {
        Some(c) => Ok(c.unpack()),
        None => {
            // fall back to the spectral square root for borderline iterates
            let e = hermitian_eig(h)?;
            Ok(to_na(e.reconstruct_with(|l| l.max(0.0).sqrt()).matrix()))
        }
    }
}

fn herm(d: usize, v: &[f64]) -> HermitianOperator {
    HermitianOperator::from_svec(d, v).expect("svec length checked by caller")
}

/// Smallest "eigenvalue" of a block vector: spectral for PSD, entrywise for
/// the orthant.
pub(crate) fn min_eig(b: &Block, v: &[f64]) -> Result<f64, LinalgError> {
    match *b {
        Block::Psd(d) => Ok(hermitian_eig(&herm(d, v))?.min()),
        Block::NonNeg(_) => Ok(v.iter().copied().fold(f64::INFINITY, f64::min)),
    }
}

/// Jordan product `(UV + VU)/2`, or the entrywise product.
pub(crate) fn jordan(b: &Block, u: &[f64], v: &[f64]) -> Vec<f64> {
    match *b {
        Block::Psd(d) => {
            let um = herm(d, u);
            let vm = herm(d, v);
            let uv = um.matrix() * vm.matrix();
            let vu = vm.matrix() * um.matrix();
            HermitianOperator::from_matrix_unchecked((&uv + &vu).scale(0.5)).to_svec()
        }
        Block::NonNeg(_) => u.iter().zip(v).map(|(a, b)| a * b).collect(),
    }
}

/// Nesterov-Todd scaling of one block at the pair `(x, s)`.
pub(crate) enum Scaling {
    Psd {
        d: usize,
        r: ComplexMatrix,
        lambda: Vec<f64>,
    },
    Lp {
        x: Vec<f64>,
        s: Vec<f64>,
        lambda: Vec<f64>,
    },
}

impl Scaling {
    pub(crate) fn new(b: &Block, x: &[f64], s: &[f64]) -> Result<Self, LinalgError> {
        match *b {
            Block::NonNeg(_) => Ok(Scaling::Lp {
                x: x.to_vec(),
                s: s.to_vec(),
                lambda: x.iter().zip(s).map(|(a, b)| (a * b).sqrt()).collect(),
            }),
            Block::Psd(d) => {
                // L_x L_x^H = X, L_s L_s^H = S, L_s^H L_x = U diag(lambda) V^H,
                // R = L_x V diag(lambda)^{-1/2}. Then W(X) = R^{-1} X R^{-H}
                // and W^{-T}(S) = R^H S R both equal diag(lambda).
                let lx = cholesky_factor(&herm(d, x))?;
                let ls = cholesky_factor(&herm(d, s))?;
                let prod = ls.adjoint() * &lx;
                let svd = prod.svd(false, true);
                let v_t = svd.v_t.expect("requested");
                let lambda: Vec<f64> = svd.singular_values.iter().map(|v| v.max(1e-300)).collect();
                let mut r = &lx * v_t.adjoint();
                for j in 0..d {
                    r.column_mut(j).scale_mut(1.0 / lambda[j].sqrt());
                }
                let r = from_na(&r);
                Ok(Scaling::Psd { d, r, lambda })
            }
        }
    }

    pub(crate) fn lambda_vec(&self) -> Vec<f64> {
        match self {
            Scaling::Psd { lambda, .. } => HermitianOperator::from_real_diagonal(lambda).to_svec(),
            Scaling::Lp { lambda, .. } => lambda.clone(),
        }
    }

    /// `W^{-1} v`, mapping a scaled direction back to the primal space.
    pub(crate) fn unscale_primal(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { d, r, .. } => herm(*d, v).congruence(&r.adjoint()).to_svec(),
            Scaling::Lp { x, lambda, .. } => v.iter().zip(x).zip(lambda).map(|((a, x), l)| a * x / l).collect(),
        }
    }

    /// `W^{-T} v`.
    pub(crate) fn scale_dual(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Psd { d, r, .. } => herm(*d, v).congruence(r).to_svec(),
            Scaling::Lp { s, lambda, .. } => v.iter().zip(s).zip(lambda).map(|((a, s), l)| a * l / s).collect(),
        }
    }

    /// Solves `lambda o u = xi` for `u`.
    pub(crate) fn lambda_solve(&self, xi: &[f64]) -> Vec<f64> {
        match self {
            Scaling::Lp { lambda, .. } => xi.iter().zip(lambda).map(|(a, l)| a / l).collect(),
            Scaling::Psd { d, lambda, .. } => {
                let m = herm(*d, xi);
                let out = ComplexMatrix::from_fn(*d, *d, |i, j| m.matrix()[(i, j)] * (2.0 / (lambda[i] + lambda[j])));
                HermitianOperator::from_matrix_unchecked(out).to_svec()
            }
        }
    }

    /// Largest `a` with `lambda + a * dir` in the cone (infinite if never
    /// leaving).
    pub(crate) fn max_step(&self, dir: &[f64]) -> Result<f64, LinalgError> {
        match self {
            Scaling::Lp { lambda, .. } => Ok(dir
                .iter()
                .zip(lambda)
                .filter(|(d, _)| **d < 0.0)
                .map(|(d, l)| -l / d)
                .fold(f64::INFINITY, f64::min)),
            Scaling::Psd { d, lambda, .. } => {
                let m = herm(*d, dir);
                let scaled = ComplexMatrix::from_fn(*d, *d, |i, j| {
                    m.matrix()[(i, j)] / (lambda[i].sqrt() * lambda[j].sqrt())
                });
                let lmin = hermitian_eig(&HermitianOperator::from_matrix_unchecked(scaled))?.min();
                Ok(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
            }
        }
    }
}

/// Shifts a block vector along the cone's identity until its smallest
/// eigenvalue is at least `margin`.
pub(crate) fn shift_interior(b: &Block, v: &mut [f64], margin: f64) -> Result<(), LinalgError> {
    let m = min_eig(b, v)?;
    if m < margin {
        let mut e = vec![0.0; v.len()];
        identity_into(b, &mut e);
        let shift = margin - m;
        v.iter_mut().zip(&e).for_each(|(a, e)| *a += shift * e);
    }
    Ok(())
}

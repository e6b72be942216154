//! Dense complex linear algebra for the small operators used throughout the
//! crate: states, effects, witnesses and Choi matrices.
//!
//! Matrices are stored row-major. Everything here is sized for `d <= 64`;
//! nothing attempts to be clever about cache behaviour.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub use num_complex::Complex64;

use thiserror::Error;

/// Asymmetry above which a matrix is refused as Hermitian.
pub const HERMITIAN_REJECT_TOL: f64 = 1e-6;
/// Asymmetry above which symmetrization logs a warning.
pub const HERMITIAN_WARN_TOL: f64 = 1e-9;
/// Default absolute tolerance for PSD and equality checks.
pub const DEFAULT_TOL: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |A - A^H| = {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension {dim} does not factor as {d_a} x {d_b}")]
    NonFactorable { dim: usize, d_a: usize, d_b: usize },
    #[error("Jacobi eigensolver did not converge after {iterations} sweeps")]
    NoConvergence { iterations: usize },
    #[error("expected {expected} entries, got {got}")]
    BadLength { expected: usize, got: usize },
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `A - A^H`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// A complex self-adjoint `d x d` matrix.
///
/// Construction symmetrizes the input as `(A + A^H) / 2`, so every value of
/// this type is exactly Hermitian.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator(ComplexMatrix);

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl HermitianOperator {
    /// Accepts `m` if it is Hermitian up to [`HERMITIAN_REJECT_TOL`].
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let asym = m.hermitian_asymmetry();
        if asym > HERMITIAN_REJECT_TOL {
            return Err(LinalgError::NotHermitian { asymmetry: asym });
        }
        if asym > HERMITIAN_WARN_TOL {
            log::warn!("symmetrizing matrix with asymmetry {asym:.3e}");
        }
        Ok(Self::symmetrize(m))
    }

    fn symmetrize(m: ComplexMatrix) -> Self {
        let n = m.rows;
        let h = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(m[(i, i)].re, 0.0)
            } else {
                (m[(i, j)] + m[(j, i)].conj()) * 0.5
            }
        });
        Self(h)
    }

    /// Symmetrizes unconditionally. For internal arithmetic whose result is
    /// Hermitian up to rounding.
    pub(crate) fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        debug_assert!(m.is_square());
        Self::symmetrize(m)
    }

    pub fn zeros(d: usize) -> Self {
        Self(ComplexMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(ComplexMatrix::identity(d))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diagonal(diag))
    }

    /// `|v><v|` for a (not necessarily normalized) vector.
    pub fn projector(v: &[Complex64]) -> Self {
        let n = v.len();
        Self(ComplexMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()))
    }

    /// Builds from real and imaginary parts given row-major.
    pub fn from_parts(d: usize, re: &[f64], im: &[f64]) -> Result<Self, LinalgError> {
        if re.len() != d * d || im.len() != d * d {
            return Err(LinalgError::BadLength {
                expected: d * d,
                got: re.len().min(im.len()),
            });
        }
        let data = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Self::new(ComplexMatrix::from_row_major(d, d, data)?)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        let data = self
            .0
            .data
            .iter()
            .zip(&other.0.data)
            .map(|(a, b)| a + b * s)
            .collect();
        Self(ComplexMatrix {
            rows: self.0.rows,
            cols: self.0.cols,
            data,
        })
    }

    /// `B^H A B` for square `B`.
    pub fn congruence(&self, b: &ComplexMatrix) -> Self {
        Self::from_matrix_unchecked(&(&b.adjoint() * &self.0) * b)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Applies `f` to the spectrum: `V f(diag(lambda)) V^H`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self, LinalgError> {
        let eig = hermitian_eig(self)?;
        Ok(eig.reconstruct_with(f))
    }

    /// Number of real parameters, `d^2`.
    pub fn real_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    /// Scaled vectorization: diagonal entries, then `sqrt(2) Re`, `sqrt(2) Im`
    /// of each upper off-diagonal entry, walking the upper triangle row by
    /// row. The Euclidean inner product of two such vectors equals
    /// `tr[A B]`.
    pub fn to_svec(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in i..d {
                let z = self.0[(i, j)];
                if i == j {
                    out.push(z.re);
                } else {
                    out.push(std::f64::consts::SQRT_2 * z.re);
                    out.push(std::f64::consts::SQRT_2 * z.im);
                }
            }
        }
        out
    }

    pub fn from_svec(d: usize, v: &[f64]) -> Result<Self, LinalgError> {
        if v.len() != d * d {
            return Err(LinalgError::BadLength {
                expected: d * d,
                got: v.len(),
            });
        }
        let mut m = ComplexMatrix::zeros(d, d);
        let mut k = 0;
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..d {
            for j in i..d {
                if i == j {
                    m[(i, i)] = Complex64::new(v[k], 0.0);
                    k += 1;
                } else {
                    let z = Complex64::new(v[k] * inv, v[k + 1] * inv);
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                    k += 2;
                }
            }
        }
        Ok(Self(m))
    }
}

/// Spectral decomposition `H = V diag(values) V^H`, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)].conj();
            }
            acc
        });
        HermitianOperator::from_matrix_unchecked(m)
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.reconstruct_with(|l| l)
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn column(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.rows()).map(|i| self.vectors[(i, k)]).collect()
    }
}

/// Cyclic complex Jacobi eigensolver.
pub fn hermitian_eig(h: &HermitianOperator) -> Result<Eigen, LinalgError> {
    let n = h.dim();
    let mut a = h.0.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut converged = n <= 1;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            iterations: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(Eigen { values, vectors })
}

// One complex Jacobi rotation annihilating a[p][q]. The phase of a[p][q] is
// absorbed into column q first, after which the real symmetric Schur
// rotation applies.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let n = a.rows;
    let apq = a[(p, q)];
    let r = apq.norm();
    if r < 1e-300 {
        return;
    }
    let phase = apq / r;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let ph_conj = phase.conj();

    // A <- A V, V = [[c, s], [-s conj(e), c conj(e)]] on columns (p, q).
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * ph_conj * s;
        a[(k, q)] = akp * s + akq * ph_conj * c;
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * ph_conj * s;
        v[(k, q)] = vkp * s + vkq * ph_conj * c;
    }
    // A <- V^H A on rows (p, q).
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;
}

/// `max_i |lambda_i(H)|`, equal to the largest `|tr[H rho]|` over states.
pub fn operator_norm(h: &HermitianOperator) -> Result<f64, LinalgError> {
    let eig = hermitian_eig(h)?;
    Ok(eig.max().abs().max(eig.min().abs()))
}

pub fn lambda_min(h: &HermitianOperator) -> Result<f64, LinalgError> {
    Ok(hermitian_eig(h)?.min())
}

pub fn lambda_max(h: &HermitianOperator) -> Result<f64, LinalgError> {
    Ok(hermitian_eig(h)?.max())
}

/// True iff `lambda_min(H) >= -tol`.
pub fn is_psd(h: &HermitianOperator, tol: f64) -> Result<bool, LinalgError> {
    Ok(lambda_min(h)? >= -tol)
}

/// Hilbert-Schmidt pairing `tr[A B]`, real for Hermitian arguments.
pub fn trace_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    // tr[AB] = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
    let s: f64 = a
        .0
        .data
        .iter()
        .zip(&b.0.data)
        .map(|(x, y)| (x * y.conj()).re)
        .sum();
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Traces out `traced` from an operator on `H_A (x) H_B`, ordered so that
/// the basis index is `i_a * d_b + i_b`.
pub fn partial_trace(
    m: &HermitianOperator,
    d_a: usize,
    d_b: usize,
    traced: Subsystem,
) -> Result<HermitianOperator, LinalgError> {
    if d_a * d_b != m.dim() || d_a == 0 || d_b == 0 {
        return Err(LinalgError::NonFactorable {
            dim: m.dim(),
            d_a,
            d_b,
        });
    }
    let x = &m.0;
    let out = match traced {
        Subsystem::B => ComplexMatrix::from_fn(d_a, d_a, |i, j| {
            (0..d_b).map(|k| x[(i * d_b + k, j * d_b + k)]).sum()
        }),
        Subsystem::A => ComplexMatrix::from_fn(d_b, d_b, |i, j| {
            (0..d_a).map(|k| x[(k * d_b + i, k * d_b + j)]).sum()
        }),
    };
    Ok(HermitianOperator::from_matrix_unchecked(out))
}

/// Pauli matrices, handy for tests and fixtures.
pub mod pauli {
    use super::{Complex64, ComplexMatrix, HermitianOperator};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn x() -> HermitianOperator {
        HermitianOperator::new(
            ComplexMatrix::from_row_major(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap(),
        )
        .unwrap()
    }

    pub fn y() -> HermitianOperator {
        HermitianOperator::new(
            ComplexMatrix::from_row_major(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap(),
        )
        .unwrap()
    }

    pub fn z() -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&[1.0, -1.0])
    }
}

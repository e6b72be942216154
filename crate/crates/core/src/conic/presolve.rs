//! Removal of linearly dependent equality rows.

use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold below which a row counts as dependent.
pub(crate) const PIVOT_TOL: f64 = 1e-11;

pub(crate) enum Presolved {
    /// Independent rows, in their original order.
    Reduced { kept: Vec<usize>, dropped: Vec<usize> },
    /// A dependent row contradicts the kept ones. `y` is a Farkas ray with
    /// `A'y = 0` and `b'y = 1`.
    Inconsistent { y: Vec<f64>, dropped: Vec<usize> },
}

/// Row-pivoted Gram-Schmidt QR of `A`: repeatedly takes the remaining row
/// with the largest residual norm and orthogonalizes the rest against it,
/// stopping when every residual falls under the threshold.
pub(crate) fn presolve(a: &DMatrix<f64>, b: &[f64]) -> Presolved {
    let m = a.nrows();
    if m == 0 {
        return Presolved::Reduced {
            kept: vec![],
            dropped: vec![],
        };
    }
    let mut resid: Vec<DVector<f64>> = (0..m).map(|i| a.row(i).transpose()).collect();
    let scale = resid.iter().map(|r| r.norm()).fold(0.0, f64::max).max(1.0);
    let mut chosen = vec![false; m];
    let mut kept = Vec::new();
    loop {
        let mut best = None;
        let mut best_norm = PIVOT_TOL * scale;
        for i in 0..m {
            if !chosen[i] {
                let nrm = resid[i].norm();
                if nrm > best_norm {
                    best_norm = nrm;
                    best = Some(i);
                }
            }
        }
        let Some(p) = best else { break };
        chosen[p] = true;
        kept.push(p);
        let q = &resid[p] / best_norm;
        for i in 0..m {
            if !chosen[i] {
                let proj = q.dot(&resid[i]);
                resid[i] -= &q * proj;
                // second pass keeps the basis orthogonal in floating point
                let proj = q.dot(&resid[i]);
                resid[i] -= &q * proj;
            }
        }
    }
    kept.sort_unstable();
    let dropped: Vec<usize> = (0..m).filter(|i| !chosen[*i]).collect();
    if dropped.is_empty() {
        return Presolved::Reduced { kept, dropped };
    }

    // Express each dropped row through the kept ones and compare right-hand
    // sides.
    let ak = DMatrix::from_fn(kept.len(), a.ncols(), |i, j| a[(kept[i], j)]);
    let gram = &ak * ak.transpose();
    let chol = gram.clone().cholesky();
    let bk = DVector::from_iterator(kept.len(), kept.iter().map(|&i| b[i]));
    for &r in &dropped {
        let row = a.row(r).transpose();
        let rhs = &ak * &row;
        let w = match &chol {
            Some(c) => c.solve(&rhs),
            None => gram.clone().lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(kept.len())),
        };
        let predicted = w.dot(&bk);
        let mag = 1.0 + b[r].abs() + w.iter().zip(bk.iter()).map(|(x, y)| (x * y).abs()).sum::<f64>();
        let mismatch = b[r] - predicted;
        if mismatch.abs() > 1e-8 * mag {
            let mut y = vec![0.0; m];
            y[r] = 1.0;
            for (k, &i) in kept.iter().enumerate() {
                y[i] = -w[k];
            }
            y.iter_mut().for_each(|v| *v /= mismatch);
            return Presolved::Inconsistent { y, dropped };
        }
    }
    Presolved::Reduced { kept, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_duplicate_row() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        match presolve(&a, &[1.0, 2.0, 3.0]) {
            Presolved::Reduced { kept, dropped } => {
                assert_eq!(kept.len(), 2);
                assert_eq!(dropped.len(), 1);
            }
            _ => panic!("consistent system flagged"),
        }
    }

    #[test]
    fn flags_contradiction() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let b = [1.0, 3.0];
        match presolve(&a, &b) {
            Presolved::Inconsistent { y, .. } => {
                let aty: f64 = y[0] * 1.0 + y[1] * 2.0;
                let bty: f64 = y[0] * b[0] + y[1] * b[1];
                assert!(aty.abs() < 1e-12);
                assert!((bty - 1.0).abs() < 1e-12);
            }
            _ => panic!("contradiction missed"),
        }
    }
}

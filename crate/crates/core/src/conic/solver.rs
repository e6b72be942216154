//! Mehrotra predictor-corrector on the homogeneous self-dual embedding with
//! Nesterov-Todd scaling.

use nalgebra::{DMatrix, DVector};

use super::cones::{self, Scaling};
use super::presolve::{presolve, Presolved};
use super::{dot, norm, Block, ConicError, ConicProgram, Settings, Solution, Status};

const STEP_FRACTION: f64 = 0.99;

/// Solves `prog` from the cone's identity as starting point.
pub fn solve(prog: &ConicProgram, settings: &Settings) -> Result<Solution, ConicError> {
    solve_from(prog, settings, None)
}

/// Solves `prog`, optionally starting from a primal guess. The guess is
/// shifted into the interior of the cone before use.
pub fn solve_from(prog: &ConicProgram, settings: &Settings, x0: Option<&[f64]>) -> Result<Solution, ConicError> {
    let n = prog.num_vars();
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(ConicError::DimensionMismatch {
                what: "starting point",
                expected: n,
                got: x0.len(),
            });
        }
    }
    let (kept, dropped) = match presolve(&prog.a, &prog.b) {
        Presolved::Reduced { kept, dropped } => (kept, dropped),
        Presolved::Inconsistent { y, dropped } => {
            return Ok(Solution {
                status: Status::Infeasible,
                x: vec![0.0; n],
                y: y.clone(),
                s: vec![0.0; n],
                primal_value: f64::NAN,
                dual_value: f64::NAN,
                gap: f64::NAN,
                iterations: 0,
                certificate: Some(y),
                dropped_rows: dropped,
            })
        }
    };
    let a = DMatrix::from_fn(kept.len(), n, |i, j| prog.a[(kept[i], j)]);
    let b: Vec<f64> = kept.iter().map(|&i| prog.b[i]).collect();
    let mut ipm = Ipm::new(prog, a, b, x0)?;
    let mut sol = ipm.run(settings)?;

    // expand y back to the original row set
    let mut y_full = vec![0.0; prog.num_rows()];
    for (k, &i) in kept.iter().enumerate() {
        y_full[i] = sol.y[k];
    }
    sol.y = y_full;
    if sol.status == Status::Infeasible {
        sol.certificate = Some(sol.y.clone());
    }
    sol.dropped_rows = dropped;
    Ok(sol)
}

struct Ipm<'a> {
    blocks: &'a [Block],
    offsets: Vec<usize>,
    a: DMatrix<f64>,
    at: DMatrix<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    tau: f64,
    kappa: f64,
    nu: f64,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
    /// `W dx` and `W^{-T} ds`
    wdx: Vec<f64>,
    wds: Vec<f64>,
}

// Newton systems are solved in NT-scaled primal coordinates, where the
// Hessian block becomes the identity:
//
//   At' = (A W^{-1})' = QR,   (A W^{-1})(A W^{-1})' = R'R.
struct Newton {
    scalings: Vec<Scaling>,
    at_scaled: DMatrix<f64>,
    r: DMatrix<f64>,
    c_scaled: Vec<f64>,
    dy2: Vec<f64>,
    dxs2: Vec<f64>,
    den: f64,
    lambda: Vec<f64>,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<f64>,
    rg: f64,
    pres: f64,
    dres: f64,
    pobj: f64,
    dobj: f64,
    mu: f64,
}

impl<'a> Ipm<'a> {
    fn new(prog: &'a ConicProgram, a: DMatrix<f64>, b: Vec<f64>, x0: Option<&[f64]>) -> Result<Self, ConicError> {
        let blocks = prog.cone.blocks();
        let offsets = prog.cone.offsets();
        let e = prog.cone.identity();
        let mut x = match x0 {
            Some(v) => v.to_vec(),
            None => e.clone(),
        };
        if x0.is_some() {
            for (blk, &o) in blocks.iter().zip(&offsets) {
                cones::shift_interior(blk, &mut x[o..o + blk.len()], 1e-3)?;
            }
        }
        let at = a.transpose();
        let m = b.len();
        Ok(Self {
            blocks,
            offsets,
            a,
            at,
            b,
            c: prog.c.clone(),
            x,
            s: e,
            y: vec![0.0; m],
            tau: 1.0,
            kappa: 1.0,
            nu: prog.cone.degree() as f64,
        })
    }

    fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        if m.ncols() == 0 || m.nrows() == 0 {
            return vec![0.0; m.nrows()];
        }
        (m * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    fn residuals(&self) -> Residuals {
        let ax = Self::mat_vec(&self.a, &self.x);
        let aty = Self::mat_vec(&self.at, &self.y);
        let rp: Vec<f64> = self.b.iter().zip(&ax).map(|(b, ax)| b * self.tau - ax).collect();
        let rd: Vec<f64> = (0..self.c.len())
            .map(|j| self.c[j] * self.tau - aty[j] - self.s[j])
            .collect();
        let cx = dot(&self.c, &self.x);
        let by = dot(&self.b, &self.y);
        let rg = self.kappa + cx - by;
        let pres = norm(&rp) / self.tau / norm(&self.b).max(1.0);
        let dres = norm(&rd) / self.tau / norm(&self.c).max(1.0);
        let mu = (dot(&self.x, &self.s) + self.tau * self.kappa) / (self.nu + 1.0);
        Residuals {
            rp,
            rd,
            rg,
            pres,
            dres,
            pobj: cx / self.tau,
            dobj: by / self.tau,
            mu,
        }
    }

    fn blocks_iter(&self) -> impl Iterator<Item = (usize, &Block, std::ops::Range<usize>)> + '_ {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .enumerate()
            .map(|(k, (b, &o))| (k, b, o..o + b.len()))
    }

    fn per_block(&self, v: &[f64], f: impl Fn(usize, &[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (k, _, r) in self.blocks_iter() {
            let seg = f(k, &v[r.clone()]);
            out[r].copy_from_slice(&seg);
        }
        out
    }

    /// Solves `R'R z = rhs`.
    fn normal_solve(nt: &Newton, rhs: &[f64]) -> Option<Vec<f64>> {
        if rhs.is_empty() {
            return Some(vec![]);
        }
        let mut z = DVector::from_column_slice(rhs);
        if !nt.r.tr_solve_upper_triangular_mut(&mut z) || !nt.r.solve_upper_triangular_mut(&mut z) {
            return None;
        }
        z.iter().all(|v| v.is_finite()).then(|| z.as_slice().to_vec())
    }

    fn prepare(&self) -> Result<Option<Newton>, ConicError> {
        let mut scalings = Vec::with_capacity(self.blocks.len());
        let mut lambda = vec![0.0; self.x.len()];
        for (_, blk, r) in self.blocks_iter() {
            let sc = Scaling::new(blk, &self.x[r.clone()], &self.s[r.clone()])?;
            lambda[r.clone()].copy_from_slice(&sc.lambda_vec());
            scalings.push(sc);
        }
        let n = self.x.len();
        let m = self.b.len();
        // rows of A W^{-1} are W^{-T} a_i
        let mut at_scaled = DMatrix::zeros(n, m);
        for i in 0..m {
            let row: Vec<f64> = self.a.row(i).iter().copied().collect();
            let scaled = self.per_block(&row, |k, seg| scalings[k].scale_dual(seg));
            at_scaled.column_mut(i).copy_from_slice(&scaled);
        }
        let r = if m > 0 {
            let qr = at_scaled.clone().qr();
            qr.r()
        } else {
            DMatrix::zeros(0, 0)
        };
        if (0..m).any(|i| r[(i, i)] == 0.0 || !r[(i, i)].is_finite()) {
            return Ok(None);
        }
        let c_scaled = self.per_block(&self.c, |k, seg| scalings[k].scale_dual(seg));
        let mut nt = Newton {
            scalings,
            at_scaled,
            r,
            c_scaled,
            dy2: vec![],
            dxs2: vec![],
            den: 0.0,
            lambda,
        };
        // second right-hand side, shared by predictor and corrector:
        // At dxs2 = b, -dxs2 + At' dy2 = c~
        let Some((dxs2, dy2)) = self.solve_reduced(&nt, &self.b, &nt.c_scaled.clone()) else {
            return Ok(None);
        };
        nt.den = dot(&dxs2, &dxs2);
        nt.dxs2 = dxs2;
        nt.dy2 = dy2;
        Ok(Some(nt))
    }

    /// Solves `At dxs = r1, -dxs + At' dy = r2` with one refinement step.
    fn solve_reduced(&self, nt: &Newton, r1: &[f64], r2: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let once = |r1: &[f64], r2: &[f64]| -> Option<(Vec<f64>, Vec<f64>)> {
            // At At' dy = r1 + At r2
            let at_r2 = Self::mat_vec_t(&nt.at_scaled, r2);
            let rhs: Vec<f64> = r1.iter().zip(&at_r2).map(|(a, b)| a + b).collect();
            let dy = Self::normal_solve(nt, &rhs)?;
            let atdy = Self::mat_vec(&nt.at_scaled, &dy);
            let dxs = atdy.iter().zip(r2).map(|(a, b)| a - b).collect();
            Some((dxs, dy))
        };
        let (mut dxs, mut dy) = once(r1, r2)?;
        for _ in 0..2 {
            let e1: Vec<f64> = {
                let v = Self::mat_vec_t(&nt.at_scaled, &dxs);
                r1.iter().zip(&v).map(|(a, b)| a - b).collect()
            };
            let e2: Vec<f64> = {
                let v = Self::mat_vec(&nt.at_scaled, &dy);
                (0..r2.len()).map(|j| r2[j] - (v[j] - dxs[j])).collect()
            };
            let err = norm(&e1).max(norm(&e2));
            if err <= 1e-15 * norm(r1).max(norm(r2)).max(1e-300) {
                break;
            }
            let (cx, cy) = once(&e1, &e2)?;
            dxs.iter_mut().zip(&cx).for_each(|(a, b)| *a += b);
            dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
        }
        Some((dxs, dy))
    }

    fn mat_vec_t(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        if m.ncols() == 0 || m.nrows() == 0 {
            return vec![0.0; m.ncols()];
        }
        (m.tr_mul(&DVector::from_column_slice(v))).as_slice().to_vec()
    }

    fn direction(&self, nt: &Newton, res: &Residuals, eta: f64, xi: &[f64], xi_tk: f64) -> Option<Direction> {
        // scaled system, with dxs = W dx:
        //   At dxs - b dtau = eta rp
        //   -dxs + At' dy - c~ dtau = W^{-T}(eta rd) - lambda \ xi
        //   -c~'dxs + b'dy + (kappa/tau) dtau = eta rg + xi_tk / tau
        let r1: Vec<f64> = res.rp.iter().map(|r| eta * r).collect();
        let rd_s = self.per_block(&res.rd, |k, seg| nt.scalings[k].scale_dual(seg));
        let lxi = self.per_block(xi, |k, seg| nt.scalings[k].lambda_solve(seg));
        let r2: Vec<f64> = rd_s.iter().zip(&lxi).map(|(r, l)| eta * r - l).collect();
        let r3 = eta * res.rg + xi_tk / self.tau;

        let (dxs1, dy1) = self.solve_reduced(nt, &r1, &r2)?;
        let num = r3 - dot(&self.b, &dy1) + dot(&nt.c_scaled, &dxs1);
        let den = nt.den + self.kappa / self.tau;
        if !den.is_finite() || den <= 0.0 {
            return None;
        }
        let dtau = num / den;
        let dy: Vec<f64> = dy1.iter().zip(&nt.dy2).map(|(a, b)| a + dtau * b).collect();
        let wdx: Vec<f64> = dxs1.iter().zip(&nt.dxs2).map(|(a, b)| a + dtau * b).collect();
        let dx = self.per_block(&wdx, |k, seg| nt.scalings[k].unscale_primal(seg));

        // ds from the dual equation keeps the dual residual on its path
        let atdy = Self::mat_vec(&self.at, &dy);
        let ds: Vec<f64> = (0..dx.len())
            .map(|j| eta * res.rd[j] - atdy[j] + self.c[j] * dtau)
            .collect();
        let wds = self.per_block(&ds, |k, seg| nt.scalings[k].scale_dual(seg));
        let dkappa = (xi_tk - self.kappa * dtau) / self.tau;
        if dx.iter().chain(&dy).chain(&ds).any(|v| !v.is_finite()) || !dtau.is_finite() {
            return None;
        }
        Some(Direction {
            dx,
            dy,
            ds,
            dtau,
            dkappa,
            wdx,
            wds,
        })
    }

    fn max_step(&self, nt: &Newton, d: &Direction) -> Result<f64, ConicError> {
        let mut alpha = f64::INFINITY;
        for (k, _, r) in self.blocks_iter() {
            alpha = alpha.min(nt.scalings[k].max_step(&d.wdx[r.clone()])?);
            alpha = alpha.min(nt.scalings[k].max_step(&d.wds[r])?);
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        Ok(alpha)
    }

    fn finish(&self, status: Status, iterations: usize, res: &Residuals) -> Solution {
        let t = self.tau;
        let (x, y, s, certificate, pv, dv) = match status {
            Status::Infeasible => {
                let by = dot(&self.b, &self.y);
                let y: Vec<f64> = self.y.iter().map(|v| v / by).collect();
                let s: Vec<f64> = self.s.iter().map(|v| v / by).collect();
                (vec![0.0; self.x.len()], y.clone(), s, Some(y), f64::NAN, f64::NAN)
            }
            Status::Unbounded => {
                let cx = -dot(&self.c, &self.x);
                let x: Vec<f64> = self.x.iter().map(|v| v / cx).collect();
                (x.clone(), vec![0.0; self.y.len()], vec![0.0; self.s.len()], Some(x), f64::NAN, f64::NAN)
            }
            _ => (
                self.x.iter().map(|v| v / t).collect(),
                self.y.iter().map(|v| v / t).collect(),
                self.s.iter().map(|v| v / t).collect(),
                None,
                res.pobj,
                res.dobj,
            ),
        };
        Solution {
            status,
            x,
            y,
            s,
            primal_value: pv,
            dual_value: dv,
            gap: (pv - dv).abs(),
            iterations,
            certificate,
            dropped_rows: vec![],
        }
    }

    fn converged(res: &Residuals, settings: &Settings) -> bool {
        res.pres <= settings.tol_feas
            && res.dres <= settings.tol_feas
            && (res.pobj - res.dobj).abs() <= settings.tol_gap * res.pobj.abs().max(1.0)
    }

    // Accuracy still good enough for the Optimal invariants when progress
    // stalls.
    fn nearly_converged(res: &Residuals) -> bool {
        res.pres <= 1e-8 && res.dres <= 1e-8 && (res.pobj - res.dobj).abs() <= 1e-7 * res.pobj.abs().max(1.0)
    }

    fn infeasibility(&self, settings: &Settings) -> Option<Status> {
        if self.tau >= self.kappa {
            return None;
        }
        let by = dot(&self.b, &self.y);
        if by > 0.0 {
            let aty = Self::mat_vec(&self.at, &self.y);
            let r: Vec<f64> = aty.iter().zip(&self.s).map(|(a, s)| a + s).collect();
            if norm(&r) <= settings.tol_feas * by * norm(&self.c).max(1.0) {
                return Some(Status::Infeasible);
            }
        }
        let cx = dot(&self.c, &self.x);
        if cx < 0.0 {
            let ax = Self::mat_vec(&self.a, &self.x);
            if norm(&ax) <= settings.tol_feas * (-cx) * norm(&self.b).max(1.0) {
                return Some(Status::Unbounded);
            }
        }
        None
    }

    fn run(&mut self, settings: &Settings) -> Result<Solution, ConicError> {
        let mut stalls = 0;
        for iter in 0..settings.max_iters {
            let res = self.residuals();
            log::trace!(
                "{iter:3} pres={:.2e} dres={:.2e} p={:.10} d={:.10} mu={:.2e} tau={:.2e} kappa={:.2e}",
                res.pres,
                res.dres,
                res.pobj,
                res.dobj,
                res.mu,
                self.tau,
                self.kappa
            );
            if Self::converged(&res, settings) {
                return Ok(self.finish(Status::Optimal, iter, &res));
            }
            if let Some(st) = self.infeasibility(settings) {
                return Ok(self.finish(st, iter, &res));
            }

            let Some(nt) = self.prepare()? else {
                return self.breakdown(iter, &res);
            };

            // predictor
            let lam = &nt.lambda;
            let lam_sq = self.per_block(lam, |k, seg| cones::jordan(&self.blocks[k], seg, seg));
            let xi_aff: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
            let xi_tk_aff = -self.tau * self.kappa;
            let Some(aff) = self.direction(&nt, &res, 1.0, &xi_aff, xi_tk_aff) else {
                return self.breakdown(iter, &res);
            };
            let a_aff = self.max_step(&nt, &aff)?.min(1.0);
            let sigma = (1.0 - a_aff).powi(3).clamp(0.0, 1.0);

            // corrector
            let corr = self.per_block(&aff.wdx, |k, seg| {
                let r = self.offsets[k]..self.offsets[k] + seg.len();
                cones::jordan(&self.blocks[k], seg, &aff.wds[r])
            });
            let e = {
                let mut e = vec![0.0; self.x.len()];
                for (_, blk, r) in self.blocks_iter() {
                    cones::identity_into(blk, &mut e[r]);
                }
                e
            };
            let smu = sigma * res.mu;
            let xi: Vec<f64> = (0..self.x.len())
                .map(|i| -lam_sq[i] + smu * e[i] - corr[i])
                .collect();
            let xi_tk = -self.tau * self.kappa + smu - aff.dtau * aff.dkappa;
            let Some(dir) = self.direction(&nt, &res, 1.0 - sigma, &xi, xi_tk) else {
                return self.breakdown(iter, &res);
            };
            let amax = self.max_step(&nt, &dir)?;
            let alpha = (STEP_FRACTION * amax).min(1.0);
            if alpha < 1e-10 {
                stalls += 1;
                if stalls >= 3 {
                    return self.breakdown(iter, &res);
                }
            } else {
                stalls = 0;
            }
            for (v, d) in self.x.iter_mut().zip(&dir.dx) {
                *v += alpha * d;
            }
            for (v, d) in self.y.iter_mut().zip(&dir.dy) {
                *v += alpha * d;
            }
            for (v, d) in self.s.iter_mut().zip(&dir.ds) {
                *v += alpha * d;
            }
            self.tau += alpha * dir.dtau;
            self.kappa += alpha * dir.dkappa;
            if !(self.tau.is_finite() && self.tau > 0.0) {
                return Err(ConicError::NumericalBreakdown { iteration: iter });
            }
        }
        let res = self.residuals();
        if Self::converged(&res, settings) {
            return Ok(self.finish(Status::Optimal, settings.max_iters, &res));
        }
        if let Some(st) = self.infeasibility(settings) {
            return Ok(self.finish(st, settings.max_iters, &res));
        }
        if Self::nearly_converged(&res) {
            return Ok(self.finish(Status::Optimal, settings.max_iters, &res));
        }
        Ok(self.finish(Status::MaxIterations, settings.max_iters, &res))
    }

    fn breakdown(&self, iter: usize, res: &Residuals) -> Result<Solution, ConicError> {
        if Self::nearly_converged(res) {
            Ok(self.finish(Status::Optimal, iter, res))
        } else {
            Err(ConicError::NumericalBreakdown { iteration: iter })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::linalg::{lambda_max, HermitianOperator};
    use nalgebra::DMatrix;

    fn lp(c: Vec<f64>, a: DMatrix<f64>, b: Vec<f64>) -> ConicProgram {
        let n = c.len();
        ConicProgram::new(ConeSpec::new(vec![Block::NonNeg(n)]).unwrap(), c, a, b).unwrap()
    }

    #[test]
    fn scalar_lp() {
        let prog = lp(vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![1.0]);
        let sol = solve(&prog, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-9);
        let rep = verify_solution(&prog, &sol, 1e-8).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn infeasible_scalar() {
        let prog = lp(vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![-1.0]);
        let sol = solve(&prog, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        let y = sol.certificate.unwrap();
        assert!((y[0] * -1.0 - 1.0).abs() < 1e-6);
        assert!(-y[0] >= 0.0);
    }

    #[test]
    fn unbounded_lp() {
        // minimize -x1 subject to x1 - x2 = 0
        let prog = lp(vec![-1.0, 0.0], DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), vec![0.0]);
        let sol = solve(&prog, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Unbounded);
    }

    #[test]
    fn lambda_max_by_sdp() {
        // minimize t subject to t I - X = Z, X psd.
        let z = HermitianOperator::from_parts(2, &[0.3, -0.4, -0.4, -1.0], &[0.0, 0.7, -0.7, 0.0]).unwrap();
        let mut pb = ProgramBuilder::new();
        let t = pb.nonneg(1);
        let x = pb.psd(2);
        pb.add_cost(t.offset, 1.0);
        pb.add_hermitian_eq(2, &[(x, -1.0)], &[(t.offset, &HermitianOperator::identity(2))], &z);
        let prog = pb.build().unwrap();
        let sol = solve(&prog, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let oracle = lambda_max(&z).unwrap();
        assert!((sol.primal_value - oracle).abs() < 1e-8, "{} vs {}", sol.primal_value, oracle);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let prog = lp(vec![1.0, 2.0], a, vec![1.0, 2.0]);
        let sol = solve(&prog, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert_eq!(sol.dropped_rows.len(), 1);
        assert!((sol.primal_value - 1.0).abs() < 1e-8);
    }
}

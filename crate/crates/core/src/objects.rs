//! States, measurement sets, subchannels, instruments and classical
//! strategies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{
    hermitian_eig, lambda_max, lambda_min, operator_norm, partial_trace, trace_inner, Complex64, ComplexMatrix,
    HermitianOperator, LinalgError, Subsystem,
};

/// Tolerance for PSD, trace and completeness checks on objects.
pub const OBJECT_TOL: f64 = 1e-9;
/// Tolerance for probability vectors.
pub const PMF_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("operator is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },
    #[error("state trace is {trace}, expected 1")]
    BadTrace { trace: f64 },
    #[error("effects of setting {setting} do not sum to the identity (deviation {deviation:.3e})")]
    Incomplete { setting: usize, deviation: f64 },
    #[error("dimension mismatch: {what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("subchannel increases trace (bound {bound:.6})")]
    TraceIncreasing { bound: f64 },
    #[error("instrument for setting {setting} is not trace preserving (deviation {deviation:.3e})")]
    NotTracePreserving { setting: usize, deviation: f64 },
    #[error("invalid probability vector: {0}")]
    BadPmf(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
}

fn check_psd(h: &HermitianOperator, tol: f64) -> Result<(), ObjectError> {
    let m = lambda_min(h)?;
    if m < -tol {
        return Err(ObjectError::NotPsd { min_eig: m });
    }
    Ok(())
}

/// A density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    matrix: HermitianOperator,
}

impl State {
    pub fn new(matrix: HermitianOperator) -> Result<Self, ObjectError> {
        check_psd(&matrix, OBJECT_TOL)?;
        let tr = matrix.trace();
        if (tr - 1.0).abs() > OBJECT_TOL {
            return Err(ObjectError::BadTrace { trace: tr });
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: HermitianOperator::identity(d).scale(1.0 / d as f64),
        }
    }

    /// `|psi><psi|`, normalizing `psi`.
    pub fn pure(psi: &[Complex64]) -> Result<Self, ObjectError> {
        let n: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(ObjectError::Empty("state vector"));
        }
        let v: Vec<Complex64> = psi.iter().map(|c| c / n).collect();
        Self::new(HermitianOperator::projector(&v))
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut diag = vec![0.0; d];
        diag[i] = 1.0;
        Self {
            matrix: HermitianOperator::from_real_diagonal(&diag),
        }
    }

    pub fn diagonal(p: &[f64]) -> Result<Self, ObjectError> {
        Self::new(HermitianOperator::from_real_diagonal(p))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermitianOperator {
        &self.matrix
    }

    /// Convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, w: f64, other: &State) -> Result<State, ObjectError> {
        State::new(self.matrix.scale(w).add(&other.matrix.scale(1.0 - w)))
    }
}

/// Indexed family of POVMs `M_{a|x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct POVMSet {
    dim: usize,
    effects: Vec<Vec<HermitianOperator>>,
}

impl POVMSet {
    /// `effects[x][a]`.
    pub fn new(effects: Vec<Vec<HermitianOperator>>) -> Result<Self, ObjectError> {
        Self::with_tolerance(effects, OBJECT_TOL)
    }

    pub fn with_tolerance(effects: Vec<Vec<HermitianOperator>>, tol: f64) -> Result<Self, ObjectError> {
        let Some(first) = effects.first().and_then(|s| s.first()) else {
            return Err(ObjectError::Empty("measurement set"));
        };
        let dim = first.dim();
        let l = effects[0].len();
        let id = HermitianOperator::identity(dim);
        for (x, setting) in effects.iter().enumerate() {
            if setting.len() != l {
                return Err(ObjectError::DimensionMismatch {
                    what: "outcome count",
                    expected: l,
                    got: setting.len(),
                });
            }
            let mut sum = HermitianOperator::zeros(dim);
            for e in setting {
                if e.dim() != dim {
                    return Err(ObjectError::DimensionMismatch {
                        what: "effect",
                        expected: dim,
                        got: e.dim(),
                    });
                }
                check_psd(e, tol)?;
                sum = sum.add(e);
            }
            let dev = sum.max_abs_diff(&id);
            if dev > tol {
                return Err(ObjectError::Incomplete { setting: x, deviation: dev });
            }
        }
        Ok(Self { dim, effects })
    }

    /// Every setting is the trivial measurement `{I/l, ..., I/l}`.
    pub fn trivial(dim: usize, settings: usize, outcomes: usize) -> Self {
        let e = HermitianOperator::identity(dim).scale(1.0 / outcomes as f64);
        Self {
            dim,
            effects: vec![vec![e; outcomes]; settings],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> usize {
        self.effects.len()
    }

    pub fn outcomes(&self) -> usize {
        self.effects[0].len()
    }

    pub fn effect(&self, x: usize, a: usize) -> &HermitianOperator {
        &self.effects[x][a]
    }

    pub fn effects(&self) -> &[Vec<HermitianOperator>] {
        &self.effects
    }

    pub fn max_abs_diff(&self, other: &POVMSet) -> f64 {
        self.effects
            .iter()
            .flatten()
            .zip(other.effects.iter().flatten())
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// A completely positive trace-nonincreasing map.
#[derive(Debug, Clone, PartialEq)]
pub enum Subchannel {
    /// `eta -> tr[E eta] K`.
    MeasurePrepare { e: HermitianOperator, k: HermitianOperator },
    /// Choi operator `C = sum |i><j| (x) phi(|i><j|)` on input (x) output.
    Choi {
        c: HermitianOperator,
        d_in: usize,
        d_out: usize,
    },
}

impl Subchannel {
    pub fn measure_prepare(e: HermitianOperator, k: HermitianOperator) -> Result<Self, ObjectError> {
        check_psd(&e, OBJECT_TOL)?;
        check_psd(&k, OBJECT_TOL)?;
        let bound = operator_norm(&e)? * k.trace();
        if bound > 1.0 + OBJECT_TOL {
            return Err(ObjectError::TraceIncreasing { bound });
        }
        Ok(Subchannel::MeasurePrepare { e, k })
    }

    pub fn choi(c: HermitianOperator, d_in: usize) -> Result<Self, ObjectError> {
        if d_in == 0 || c.dim() % d_in != 0 {
            return Err(ObjectError::DimensionMismatch {
                what: "Choi operator",
                expected: d_in,
                got: c.dim(),
            });
        }
        let d_out = c.dim() / d_in;
        check_psd(&c, OBJECT_TOL)?;
        let t = partial_trace(&c, d_in, d_out, Subsystem::B)?;
        let bound = lambda_max(&t)?;
        if bound > 1.0 + OBJECT_TOL {
            return Err(ObjectError::TraceIncreasing { bound });
        }
        Ok(Subchannel::Choi { c, d_in, d_out })
    }

    /// The identity channel on dimension `d`.
    pub fn identity(d: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            v[i * d + i] = Complex64::new(1.0, 0.0);
        }
        Subchannel::Choi {
            c: HermitianOperator::projector(&v),
            d_in: d,
            d_out: d,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Subchannel::MeasurePrepare { e, .. } => e.dim(),
            Subchannel::Choi { d_in, .. } => *d_in,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Subchannel::MeasurePrepare { k, .. } => k.dim(),
            Subchannel::Choi { d_out, .. } => *d_out,
        }
    }

    pub fn to_choi(&self) -> HermitianOperator {
        match self {
            Subchannel::MeasurePrepare { e, k } => e.transpose().kron(k),
            Subchannel::Choi { c, .. } => c.clone(),
        }
    }

    /// Applies the map to any Hermitian input (linear extension).
    pub fn apply_operator(&self, rho: &HermitianOperator) -> Result<HermitianOperator, ObjectError> {
        if rho.dim() != self.input_dim() {
            return Err(ObjectError::DimensionMismatch {
                what: "subchannel input",
                expected: self.input_dim(),
                got: rho.dim(),
            });
        }
        match self {
            Subchannel::MeasurePrepare { e, k } => Ok(k.scale(trace_inner(e, rho)?)),
            Subchannel::Choi { c, d_in, d_out } => {
                // entry (k,l) of the output is sum_{ij} rho_{ij} C_{(i,k),(j,l)}
                let (di, dout) = (*d_in, *d_out);
                let cm = c.matrix();
                let rm = rho.matrix();
                let out = ComplexMatrix::from_fn(dout, dout, |k, l| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..di {
                        for j in 0..di {
                            acc += rm[(i, j)] * cm[(i * dout + k, j * dout + l)];
                        }
                    }
                    acc
                });
                Ok(HermitianOperator::from_matrix_unchecked(out))
            }
        }
    }

    /// Unnormalized output on a state.
    pub fn apply(&self, rho: &State) -> Result<HermitianOperator, ObjectError> {
        self.apply_operator(rho.matrix())
    }

    fn validate(&self) -> Result<(), ObjectError> {
        match self {
            Subchannel::MeasurePrepare { e, k } => {
                Subchannel::measure_prepare(e.clone(), k.clone())?;
            }
            Subchannel::Choi { c, d_in, .. } => {
                Subchannel::choi(c.clone(), *d_in)?;
            }
        }
        Ok(())
    }
}

/// A subchannel standing for `multiplicity` identical outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeGroup {
    pub map: Subchannel,
    pub multiplicity: u64,
}

impl OutcomeGroup {
    pub fn single(map: Subchannel) -> Self {
        Self { map, multiplicity: 1 }
    }
}

/// Instruments `phi_{b|y}` indexed by setting `y`. Outcomes are listed as
/// groups so that many identical subchannels cost one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSet {
    d_in: usize,
    d_out: usize,
    groups: Vec<Vec<OutcomeGroup>>,
}

/// Real orthonormal basis of the Hermitian `d x d` matrices.
pub fn hermitian_basis(d: usize) -> Vec<HermitianOperator> {
    (0..d * d)
        .map(|k| {
            let mut v = vec![0.0; d * d];
            v[k] = 1.0;
            HermitianOperator::from_svec(d, &v).expect("length d^2")
        })
        .collect()
}

impl InstrumentSet {
    pub fn new(groups: Vec<Vec<OutcomeGroup>>) -> Result<Self, ObjectError> {
        let Some(first) = groups.first().and_then(|g| g.first()) else {
            return Err(ObjectError::Empty("instrument set"));
        };
        let d_in = first.map.input_dim();
        let d_out = first.map.output_dim();
        let m = groups[0].iter().map(|g| g.multiplicity).sum::<u64>();
        let basis = hermitian_basis(d_in);
        for (y, row) in groups.iter().enumerate() {
            if row.iter().map(|g| g.multiplicity).sum::<u64>() != m {
                return Err(ObjectError::DimensionMismatch {
                    what: "outcome count",
                    expected: m as usize,
                    got: row.len(),
                });
            }
            for g in row {
                if g.multiplicity == 0 {
                    return Err(ObjectError::BadParameter("zero multiplicity".into()));
                }
                if g.map.input_dim() != d_in || g.map.output_dim() != d_out {
                    return Err(ObjectError::DimensionMismatch {
                        what: "subchannel",
                        expected: d_in,
                        got: g.map.input_dim(),
                    });
                }
                g.map.validate()?;
            }
            // trace preservation on a spanning set of inputs
            let mut dev = 0.0f64;
            for b in &basis {
                let mut t = 0.0;
                for g in row {
                    t += g.multiplicity as f64 * g.map.apply_operator(b)?.trace();
                }
                dev = dev.max((t - b.trace()).abs());
            }
            if dev > OBJECT_TOL {
                return Err(ObjectError::NotTracePreserving { setting: y, deviation: dev });
            }
        }
        Ok(Self { d_in, d_out, groups })
    }

    /// One-outcome instrument family whose only subchannel is the identity.
    pub fn identity(d: usize, settings: usize) -> Self {
        Self {
            d_in: d,
            d_out: d,
            groups: vec![vec![OutcomeGroup::single(Subchannel::identity(d))]; settings],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d_in
    }

    pub fn output_dim(&self) -> usize {
        self.d_out
    }

    pub fn settings(&self) -> usize {
        self.groups.len()
    }

    /// Number of outcomes per setting, counting multiplicities.
    pub fn outcomes(&self) -> u64 {
        self.groups[0].iter().map(|g| g.multiplicity).sum()
    }

    pub fn groups(&self, y: usize) -> &[OutcomeGroup] {
        &self.groups[y]
    }

    pub fn all_groups(&self) -> &[Vec<OutcomeGroup>] {
        &self.groups
    }

    /// Sum of the trace of all outputs for setting `y` on `rho`.
    pub fn total_trace(&self, y: usize, rho: &HermitianOperator) -> Result<f64, ObjectError> {
        let mut t = 0.0;
        for g in &self.groups[y] {
            t += g.multiplicity as f64 * g.map.apply_operator(rho)?.trace();
        }
        Ok(t)
    }
}

fn check_pmf(p: &[f64], what: &str) -> Result<(), ObjectError> {
    if p.is_empty() {
        return Err(ObjectError::BadPmf(format!("{what} is empty")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ObjectError::BadPmf(format!("{what} has a negative entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PMF_TOL {
        return Err(ObjectError::BadPmf(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// Prior over instrument labels together with the instruments.
#[derive(Debug, Clone, PartialEq)]
pub struct GameEnsemble {
    prior: Vec<f64>,
    instruments: InstrumentSet,
}

impl GameEnsemble {
    pub fn new(prior: Vec<f64>, instruments: InstrumentSet) -> Result<Self, ObjectError> {
        check_pmf(&prior, "prior")?;
        if prior.iter().any(|&p| p <= 0.0) {
            return Err(ObjectError::BadPmf("prior has a zero entry".into()));
        }
        if prior.len() != instruments.settings() {
            return Err(ObjectError::DimensionMismatch {
                what: "prior",
                expected: instruments.settings(),
                got: prior.len(),
            });
        }
        Ok(Self { prior, instruments })
    }

    pub fn uniform(instruments: InstrumentSet) -> Self {
        let t = instruments.settings();
        Self {
            prior: vec![1.0 / t as f64; t],
            instruments,
        }
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn instruments(&self) -> &InstrumentSet {
        &self.instruments
    }
}

/// Classical pre- and post-processing with shared randomness:
/// `q(z)`, `r(x|y,z)` as `r[z][y][x]`, `s(g|a,y,z)` as `s[z][y][a][g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub q: Vec<f64>,
    pub r: Vec<Vec<Vec<f64>>>,
    pub s: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Strategy {
    pub fn new(q: Vec<f64>, r: Vec<Vec<Vec<f64>>>, s: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self, ObjectError> {
        check_pmf(&q, "q")?;
        if r.len() != q.len() || s.len() != q.len() {
            return Err(ObjectError::BadPmf("r and s must be indexed by every z".into()));
        }
        for (z, rz) in r.iter().enumerate() {
            for (y, ry) in rz.iter().enumerate() {
                check_pmf(ry, &format!("r(.|y={y},z={z})"))?;
            }
        }
        for (z, sz) in s.iter().enumerate() {
            for (y, sy) in sz.iter().enumerate() {
                for (a, sa) in sy.iter().enumerate() {
                    check_pmf(sa, &format!("s(.|a={a},y={y},z={z})"))?;
                }
            }
        }
        Ok(Self { q, r, s })
    }

    /// `r(x|y) = [x == y]`, `s(g|a) = [g == a]`.
    pub fn identity(settings: usize, outcomes: usize) -> Self {
        let r = vec![(0..settings)
            .map(|y| (0..settings).map(|x| if x == y { 1.0 } else { 0.0 }).collect())
            .collect()];
        let s = vec![vec![
            (0..outcomes)
                .map(|a| (0..outcomes).map(|g| if g == a { 1.0 } else { 0.0 }).collect())
                .collect();
            settings
        ]];
        Self { q: vec![1.0], r, s }
    }

    pub fn from_deterministic(d: &DeterministicStrategy, settings: usize, outcomes: usize, labels: usize) -> Self {
        let r = vec![d
            .x_of_y
            .iter()
            .map(|&x| (0..settings).map(|i| if i == x { 1.0 } else { 0.0 }).collect())
            .collect()];
        let s = vec![d
            .g_of_ay
            .iter()
            .map(|row| {
                (0..outcomes)
                    .map(|a| (0..labels).map(|g| if g == row[a] { 1.0 } else { 0.0 }).collect())
                    .collect()
            })
            .collect()];
        Self { q: vec![1.0], r, s }
    }

    pub fn randomness(&self) -> usize {
        self.q.len()
    }

    pub fn output_settings(&self) -> usize {
        self.r[0].len()
    }

    pub fn input_settings(&self) -> usize {
        self.r[0][0].len()
    }

    pub fn input_outcomes(&self) -> usize {
        self.s[0][0].len()
    }

    pub fn output_outcomes(&self) -> usize {
        self.s[0][0][0].len()
    }

    /// Random strategy with `nz` values of shared randomness.
    pub fn random(nz: usize, tau: usize, kappa: usize, l: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pmf = |n: usize| -> Vec<f64> {
            let v: Vec<f64> = (0..n)
                .map(|_| {
                    let u: f64 = rand::Rng::random(&mut rng);
                    -(1.0 - u).ln()
                })
                .collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        };
        let q = pmf(nz);
        let r = (0..nz).map(|_| (0..tau).map(|_| pmf(kappa)).collect()).collect();
        let s = (0..nz)
            .map(|_| (0..tau).map(|_| (0..l).map(|_| pmf(m)).collect()).collect())
            .collect();
        Self { q, r, s }
    }

    /// Composition: `self` maps `M` to an intermediate set and `outer`
    /// post-processes that set; the result acts directly on `M`.
    ///
    /// The intermediate setting chosen for each final setting `y` is drawn
    /// independently into the shared randomness, so the randomness grows as
    /// `|z_outer| * |z_self| * settings^tau`.
    pub fn compose(&self, outer: &Strategy) -> Strategy {
        let tau = outer.output_settings();
        let mid = outer.input_settings();
        let kappa = self.input_settings();
        let l = self.input_outcomes();
        let mid_outcomes = self.output_outcomes();
        let m = outer.output_outcomes();
        let mut q = Vec::new();
        let mut r = Vec::new();
        let mut s = Vec::new();
        let combos = mid.pow(tau as u32);
        for z2 in 0..outer.randomness() {
            for z1 in 0..self.randomness() {
                for code in 0..combos {
                    let mut w = Vec::with_capacity(tau);
                    let mut c = code;
                    for _ in 0..tau {
                        w.push(c % mid);
                        c /= mid;
                    }
                    let mut weight = outer.q[z2] * self.q[z1];
                    for (y, &wy) in w.iter().enumerate() {
                        weight *= outer.r[z2][y][wy];
                    }
                    if weight == 0.0 {
                        continue;
                    }
                    q.push(weight);
                    r.push((0..tau).map(|y| self.r[z1][w[y]][..kappa].to_vec()).collect());
                    s.push(
                        (0..tau)
                            .map(|y| {
                                (0..l)
                                    .map(|a| {
                                        (0..m)
                                            .map(|g| {
                                                (0..mid_outcomes)
                                                    .map(|b| self.s[z1][w[y]][a][b] * outer.s[z2][y][b][g])
                                                    .sum()
                                            })
                                            .collect()
                                    })
                                    .collect()
                            })
                            .collect(),
                    );
                }
            }
        }
        Strategy { q, r, s }
    }
}

/// A vertex of the strategy polytope: a setting choice per instrument label
/// and a guess per (outcome, label).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    pub x_of_y: Vec<usize>,
    /// `g_of_ay[y][a]`
    pub g_of_ay: Vec<Vec<usize>>,
}

/// `N_{b|y} = sum_{a,x,z} s(b|a,y,z) r(x|y,z) q(z) M_{a|x}`.
pub fn simulate(m: &POVMSet, strat: &Strategy, out_settings: usize, out_outcomes: usize) -> Result<POVMSet, ObjectError> {
    let (kappa, l) = (m.settings(), m.outcomes());
    if strat.output_settings() != out_settings
        || strat.input_settings() != kappa
        || strat.input_outcomes() != l
        || strat.output_outcomes() != out_outcomes
    {
        return Err(ObjectError::OutOfRange(format!(
            "strategy shape ({}, {}, {}, {}) does not match ({out_settings}, {kappa}, {l}, {out_outcomes})",
            strat.output_settings(),
            strat.input_settings(),
            strat.input_outcomes(),
            strat.output_outcomes()
        )));
    }
    let d = m.dim();
    let mut effects = vec![vec![HermitianOperator::zeros(d); out_outcomes]; out_settings];
    for (z, &qz) in strat.q.iter().enumerate() {
        if qz == 0.0 {
            continue;
        }
        for y in 0..out_settings {
            for x in 0..kappa {
                let rx = strat.r[z][y][x];
                if rx == 0.0 {
                    continue;
                }
                for a in 0..l {
                    for b in 0..out_outcomes {
                        let w = qz * rx * strat.s[z][y][a][b];
                        if w != 0.0 {
                            effects[y][b] = effects[y][b].add_scaled(w, m.effect(x, a));
                        }
                    }
                }
            }
        }
    }
    POVMSet::new(effects)
}

/// Merges outcomes `k..` into outcome `k - 1` (1-based: outcomes `K+1..`
/// join outcome `K`).
pub fn merge_tail_outcomes(n: &POVMSet, k: usize) -> Result<POVMSet, ObjectError> {
    if k == 0 || k > n.outcomes() {
        return Err(ObjectError::OutOfRange(format!(
            "cannot keep {k} of {} outcomes",
            n.outcomes()
        )));
    }
    let effects = n
        .effects()
        .iter()
        .map(|setting| {
            let mut out: Vec<HermitianOperator> = setting[..k].to_vec();
            for e in &setting[k..] {
                out[k - 1] = out[k - 1].add(e);
            }
            out
        })
        .collect();
    POVMSet::new(effects)
}

/// Two unsharp qubit measurements along Z and X with sharpness `eta`.
pub fn noisy_mub_pair(eta: f64) -> Result<POVMSet, ObjectError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(ObjectError::BadParameter(format!("sharpness {eta} outside [0, 1]")));
    }
    let id = HermitianOperator::identity(2);
    let z = crate::linalg::pauli::z();
    let x = crate::linalg::pauli::x();
    let effect = |sign: f64, p: &HermitianOperator| id.add_scaled(sign * eta, p).scale(0.5);
    POVMSet::new(vec![
        vec![effect(1.0, &z), effect(-1.0, &z)],
        vec![effect(1.0, &x), effect(-1.0, &x)],
    ])
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> HermitianOperator {
    let g = gaussian_matrix(rng, d, d);
    HermitianOperator::from_matrix_unchecked(&g * &g.adjoint())
}

/// `T^{-1/2}` of a positive definite operator.
fn inverse_sqrt(t: &HermitianOperator) -> HermitianOperator {
    hermitian_eig(t)
        .expect("Jacobi converges on small matrices")
        .reconstruct_with(|l| 1.0 / l.sqrt())
}

/// Random full-rank density matrix `G G^H / tr[G G^H]` with Gaussian `G`.
pub fn random_state(d: usize, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_psd(&mut rng, d);
    let t = p.trace();
    State { matrix: p.scale(1.0 / t) }
}

/// Random pure state with Gaussian amplitudes.
pub fn random_pure_state(d: usize, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<Complex64> = (0..d)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    State::pure(&v).expect("nonzero with probability one")
}

/// Random POVM set: per setting, Gaussian PSD blocks `P_a` normalized as
/// `T^{-1/2} P_a T^{-1/2}` with `T = sum_a P_a`.
pub fn random_povm_set(d: usize, settings: usize, outcomes: usize, seed: u64) -> POVMSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let effects = (0..settings)
        .map(|_| random_povm(&mut rng, d, outcomes))
        .collect();
    POVMSet { dim: d, effects }
}

fn random_povm(rng: &mut ChaCha8Rng, d: usize, outcomes: usize) -> Vec<HermitianOperator> {
    let blocks: Vec<HermitianOperator> = (0..outcomes).map(|_| random_psd(rng, d)).collect();
    let total = blocks.iter().fold(HermitianOperator::zeros(d), |acc, b| acc.add(b));
    let n = inverse_sqrt(&total);
    blocks.iter().map(|b| b.congruence(n.matrix())).collect()
}

/// Random instruments with Choi-form subchannels normalized on the input
/// factor so every setting is trace preserving.
pub fn random_instrument_set(d: usize, settings: usize, outcomes: usize, seed: u64) -> InstrumentSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = (0..settings)
        .map(|_| {
            let blocks: Vec<HermitianOperator> = (0..outcomes).map(|_| random_psd(&mut rng, d * d)).collect();
            let total = blocks.iter().fold(HermitianOperator::zeros(d), |acc, c| {
                acc.add(&partial_trace(c, d, d, Subsystem::B).expect("square"))
            });
            let n = inverse_sqrt(&total).kron(&HermitianOperator::identity(d));
            blocks
                .iter()
                .map(|c| {
                    OutcomeGroup::single(Subchannel::Choi {
                        c: c.congruence(n.matrix()),
                        d_in: d,
                        d_out: d,
                    })
                })
                .collect()
        })
        .collect();
    InstrumentSet {
        d_in: d,
        d_out: d,
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn measure_prepare_half_effect() {
        let k = HermitianOperator::from_real_diagonal(&[1.0, 0.0]);
        let sc = Subchannel::measure_prepare(HermitianOperator::identity(2).scale(0.5), k.clone()).unwrap();
        let out = sc.apply(&random_state(2, 4)).unwrap();
        assert!(out.max_abs_diff(&k.scale(0.5)) < 1e-12);
    }

    #[test]
    fn identity_choi_is_identity() {
        let rho = random_state(3, 11);
        let out = Subchannel::identity(3).apply(&rho).unwrap();
        assert!(out.max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn orthogonal_effect_gives_zero() {
        let e = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let sc = Subchannel::measure_prepare(e, HermitianOperator::identity(2).scale(0.5)).unwrap();
        let out = sc.apply(&State::basis(2, 0)).unwrap();
        assert!(out.max_abs_diff(&HermitianOperator::zeros(2)) < 1e-15);
    }

    #[test]
    fn measure_prepare_choi_agrees() {
        let m = random_povm_set(2, 1, 2, 5);
        let sc = Subchannel::measure_prepare(m.effect(0, 0).clone(), random_state(2, 6).matrix().clone()).unwrap();
        let choi = Subchannel::choi(sc.to_choi(), 2).unwrap();
        let rho = random_state(2, 7);
        assert!(sc.apply(&rho).unwrap().max_abs_diff(&choi.apply(&rho).unwrap()) < 1e-12);
    }

    #[test]
    fn rejects_trace_increasing() {
        let e = HermitianOperator::identity(2);
        let k = HermitianOperator::identity(2);
        assert!(matches!(
            Subchannel::measure_prepare(e, k),
            Err(ObjectError::TraceIncreasing { .. })
        ));
    }

    #[test]
    fn identity_strategy_reproduces_set() {
        let m = random_povm_set(2, 3, 2, 1);
        let n = simulate(&m, &Strategy::identity(3, 2), 3, 2).unwrap();
        assert!(n.max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn constant_guess_is_trivial() {
        let m = random_povm_set(2, 2, 3, 2);
        let det = DeterministicStrategy {
            x_of_y: vec![0, 1],
            g_of_ay: vec![vec![0; 3]; 2],
        };
        let n = simulate(&m, &Strategy::from_deterministic(&det, 2, 3, 2), 2, 2).unwrap();
        for y in 0..2 {
            assert!(n.effect(y, 0).max_abs_diff(&HermitianOperator::identity(2)) < 1e-12);
            assert!(n.effect(y, 1).max_abs_diff(&HermitianOperator::zeros(2)) < 1e-12);
        }
    }

    #[test]
    fn merge_tail() {
        let m = random_povm_set(2, 1, 5, 9);
        let n = merge_tail_outcomes(&m, 3).unwrap();
        assert_eq!(n.outcomes(), 3);
        assert!(n.effect(0, 0).max_abs_diff(m.effect(0, 0)) < 1e-15);
        let whole = merge_tail_outcomes(&noisy_mub_pair(0.7).unwrap(), 1).unwrap();
        assert!(whole.effect(1, 0).max_abs_diff(&HermitianOperator::identity(2)) < 1e-12);
        assert!(merge_tail_outcomes(&m, 6).is_err());
    }

    #[test]
    fn mub_pair_endpoints() {
        let trivial = noisy_mub_pair(0.0).unwrap();
        assert!(trivial.max_abs_diff(&POVMSet::trivial(2, 2, 2)) < 1e-15);
        let sharp = noisy_mub_pair(1.0).unwrap();
        assert!(sharp.effect(0, 0).max_abs_diff(&HermitianOperator::from_real_diagonal(&[1.0, 0.0])) < 1e-15);
        let plus = HermitianOperator::projector(&[c(0.5f64.sqrt()), c(0.5f64.sqrt())]);
        assert!(sharp.effect(1, 0).max_abs_diff(&plus) < 1e-15);
        assert!(noisy_mub_pair(1.5).is_err());
    }

    #[test]
    fn random_objects_are_valid_and_deterministic() {
        assert_eq!(random_state(2, 7), random_state(2, 7));
        State::new(random_state(4, 1).matrix().clone()).unwrap();
        POVMSet::new(random_povm_set(2, 2, 2, 1).effects().to_vec()).unwrap();
        let inst = random_instrument_set(2, 1, 2, 3);
        InstrumentSet::new(inst.all_groups().to_vec()).unwrap();
    }

    #[test]
    fn zero_prior_rejected() {
        let inst = InstrumentSet::identity(2, 2);
        assert!(GameEnsemble::new(vec![1.0, 0.0], inst.clone()).is_err());
        assert!(GameEnsemble::new(vec![0.25, 0.75], inst).is_ok());
    }

    #[test]
    fn composition_matches_two_step_simulation() {
        let m = random_povm_set(2, 3, 2, 21);
        let first = Strategy::random(2, 2, 3, 2, 3, 22);
        let second = Strategy::random(2, 2, 2, 3, 2, 23);
        let n = simulate(&m, &first, 2, 3).unwrap();
        let p = simulate(&n, &second, 2, 2).unwrap();
        let direct = simulate(&m, &first.compose(&second), 2, 2).unwrap();
        assert!(p.max_abs_diff(&direct) < 1e-10);
    }
}

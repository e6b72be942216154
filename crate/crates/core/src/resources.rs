//! Free sets and the four quantifiers: generalised robustness and weight of
//! states and of measurement sets, with their dual witnesses.

use serde::Serialize;
use thiserror::Error;

use crate::conic::{
    self, verify_solution, Block, ConicError, ConicProgram, ProgramBuilder, Settings, Solution, Status, VarBlock,
};
use crate::json::MatrixJson;
use crate::linalg::{hermitian_eig, trace_inner, HermitianOperator, LinalgError};
use crate::objects::{hermitian_basis, ObjectError, POVMSet, State};

/// Largest number of deterministic response functions enumerated.
pub const MAX_RESPONSE_FUNCTIONS: usize = 4096;
/// Default tolerance of [`is_compatible`].
pub const COMPATIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResourceError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error("solver stopped with status {0:?}")]
    Solver(Status),
    #[error("the free set is empty")]
    EmptyFreeSet,
    #[error("{count} response functions exceed the cap of {MAX_RESPONSE_FUNCTIONS}")]
    EnumerationCap { count: u128 },
    #[error("degenerate witness: normalization {mu:.3e} is not positive")]
    DegenerateWitness { mu: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Free cone given as the image of a product cone under a linear map:
/// coordinate `k` of the product cone maps to `images[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomStateCone {
    pub blocks: Vec<Block>,
    pub images: Vec<HermitianOperator>,
    /// Extreme rays of the free cone, if known. Used for checks and sampling.
    pub generators: Option<Vec<HermitianOperator>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FreeStateSet {
    /// Only the maximally mixed state is free.
    MaxMixedCone,
    /// States diagonal in the computational basis.
    Incoherent,
    CustomConic(CustomStateCone),
}

impl FreeStateSet {
    /// Finite generating set of free states, when one is available.
    pub fn generators(&self, d: usize) -> Option<Vec<State>> {
        match self {
            FreeStateSet::MaxMixedCone => Some(vec![State::maximally_mixed(d)]),
            FreeStateSet::Incoherent => Some((0..d).map(|i| State::basis(d, i)).collect()),
            FreeStateSet::CustomConic(c) => c.generators.as_ref().map(|g| {
                g.iter()
                    .filter(|h| h.trace() > 0.0)
                    .filter_map(|h| State::new(h.scale(1.0 / h.trace())).ok())
                    .collect()
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FreeStateSet::MaxMixedCone => "max-mixed",
            FreeStateSet::Incoherent => "incoherent",
            FreeStateSet::CustomConic(_) => "custom",
        }
    }
}

/// Free cone of measurement sets as a linear image: coordinate `k` maps to
/// the effect array `images[k][x][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomPovmCone {
    pub blocks: Vec<Block>,
    pub images: Vec<Vec<Vec<HermitianOperator>>>,
    pub generators: Option<Vec<POVMSet>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FreePOVMSetFamily {
    /// Jointly measurable sets.
    Compatible,
    CustomConic(CustomPovmCone),
}

impl FreePOVMSetFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FreePOVMSetFamily::Compatible => "compatible",
            FreePOVMSetFamily::CustomConic(_) => "custom",
        }
    }
}

/// All deterministic response functions `lambda: x -> a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompatibilityModel {
    settings: usize,
    outcomes: usize,
    /// `functions[lambda][x]` is the outcome assigned to setting `x`.
    functions: Vec<Vec<usize>>,
}

impl CompatibilityModel {
    pub fn new(settings: usize, outcomes: usize) -> Result<Self, ResourceError> {
        let count = (outcomes as u128).checked_pow(settings as u32).unwrap_or(u128::MAX);
        if count > MAX_RESPONSE_FUNCTIONS as u128 {
            return Err(ResourceError::EnumerationCap { count });
        }
        let functions = (0..count as usize)
            .map(|mut code| {
                (0..settings)
                    .map(|_| {
                        let a = code % outcomes;
                        code /= outcomes;
                        a
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            settings,
            outcomes,
            functions,
        })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    /// `D(a|x, lambda)` as 0 or 1.
    pub fn response(&self, a: usize, x: usize, lambda: usize) -> f64 {
        if self.functions[lambda][x] == a {
            1.0
        } else {
            0.0
        }
    }

    pub fn function(&self, lambda: usize) -> &[usize] {
        &self.functions[lambda]
    }

    /// Effects `sum_lambda D(a|x,lambda) G_lambda` of a parent POVM.
    pub fn marginals(&self, parent: &[HermitianOperator]) -> Vec<Vec<HermitianOperator>> {
        let d = parent[0].dim();
        let mut out = vec![vec![HermitianOperator::zeros(d); self.outcomes]; self.settings];
        for (lambda, g) in parent.iter().enumerate() {
            for (x, &a) in self.functions[lambda].iter().enumerate() {
                out[x][a] = out[x][a].add(g);
            }
        }
        out
    }

    /// `W_lambda = sum_{a,x} D(a|x,lambda) Z_{a,x}` for a witness `z[x][a]`.
    pub fn pulled_back(&self, z: &[Vec<HermitianOperator>]) -> Vec<HermitianOperator> {
        self.functions
            .iter()
            .map(|f| {
                f.iter()
                    .enumerate()
                    .fold(HermitianOperator::zeros(z[0][0].dim()), |acc, (x, &a)| acc.add(&z[x][a]))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuantifierKind {
    RobustnessState,
    RobustnessPOVMSet,
    WeightState,
    WeightPOVMSet,
}

impl QuantifierKind {
    pub fn is_robustness(&self) -> bool {
        matches!(self, QuantifierKind::RobustnessState | QuantifierKind::RobustnessPOVMSet)
    }
}

/// An operator for states, or an array indexed `[x][a]` for measurement sets.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorData {
    State(HermitianOperator),
    PovmSet(Vec<Vec<HermitianOperator>>),
}

impl OperatorData {
    pub fn scale(&self, s: f64) -> Self {
        match self {
            OperatorData::State(h) => OperatorData::State(h.scale(s)),
            OperatorData::PovmSet(z) => {
                OperatorData::PovmSet(z.iter().map(|r| r.iter().map(|h| h.scale(s)).collect()).collect())
            }
        }
    }

    pub fn as_state(&self) -> Option<&HermitianOperator> {
        match self {
            OperatorData::State(h) => Some(h),
            OperatorData::PovmSet(_) => None,
        }
    }

    pub fn as_povm_set(&self) -> Option<&[Vec<HermitianOperator>]> {
        match self {
            OperatorData::State(_) => None,
            OperatorData::PovmSet(z) => Some(z),
        }
    }

    /// Trace pairing `tr[Z rho]` or `sum_{a,x} tr[Z_{a,x} M_{a|x}]`.
    pub fn pairing(&self, other: &OperatorData) -> Result<f64, ResourceError> {
        match (self, other) {
            (OperatorData::State(a), OperatorData::State(b)) => Ok(trace_inner(a, b)?),
            (OperatorData::PovmSet(a), OperatorData::PovmSet(b)) => pairing_sets(a, b),
            _ => Err(ResourceError::DimensionMismatch("state paired with a measurement set".into())),
        }
    }

    /// Smallest eigenvalue over all operators.
    pub fn min_eig(&self) -> Result<f64, ResourceError> {
        let ops: Vec<&HermitianOperator> = match self {
            OperatorData::State(h) => vec![h],
            OperatorData::PovmSet(z) => z.iter().flatten().collect(),
        };
        let mut m = f64::INFINITY;
        for h in ops {
            m = m.min(crate::linalg::lambda_min(h)?);
        }
        Ok(m)
    }
}

pub(crate) fn pairing_sets(a: &[Vec<HermitianOperator>], b: &[Vec<HermitianOperator>]) -> Result<f64, ResourceError> {
    if a.len() != b.len() || a.iter().zip(b).any(|(r, s)| r.len() != s.len()) {
        return Err(ResourceError::DimensionMismatch("witness and measurement set shapes differ".into()));
    }
    let mut acc = 0.0;
    for (r, s) in a.iter().zip(b) {
        for (z, m) in r.iter().zip(s) {
            acc += trace_inner(z, m)?;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Factor the witness was divided by, once normalized.
    pub normalization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantifierResult {
    pub kind: QuantifierKind,
    pub value: f64,
    /// `Z` or `{Z_{a,x}}` for robustness, `Y` or `{Y_{a,x}}` for weight.
    pub witness: OperatorData,
    /// The optimal free object of the decomposition.
    pub free_object: OperatorData,
    /// The general (resourceful) part of the decomposition, when nonzero.
    pub general_object: Option<OperatorData>,
    pub diagnostics: Diagnostics,
}

impl QuantifierResult {
    pub fn is_normalized(&self) -> bool {
        self.diagnostics.normalization.is_some()
    }

    /// The free state as a valid [`State`], cleaned of solver round-off.
    pub fn free_state(&self) -> Option<State> {
        self.free_object.as_state().map(|h| clean_state(h))
    }

    /// The free measurement set as a valid [`POVMSet`], cleaned of solver
    /// round-off.
    pub fn free_povm_set(&self) -> Option<POVMSet> {
        self.free_object.as_povm_set().map(clean_povm_set)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "value": self.value,
            "witness": data_json(&self.witness),
            "free_object": data_json(&self.free_object),
            "general_object": self.general_object.as_ref().map(data_json),
            "diagnostics": self.diagnostics,
        })
    }
}

fn data_json(d: &OperatorData) -> serde_json::Value {
    match d {
        OperatorData::State(h) => serde_json::to_value(MatrixJson::from_operator(h)).expect("plain data"),
        OperatorData::PovmSet(z) => serde_json::to_value(
            z.iter()
                .map(|r| r.iter().map(MatrixJson::from_operator).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        )
        .expect("plain data"),
    }
}

/// Clips negative eigenvalues and renormalizes the trace.
pub fn clean_state(h: &HermitianOperator) -> State {
    let clipped = hermitian_eig(h)
        .map(|e| e.reconstruct_with(|l| l.max(0.0)))
        .unwrap_or_else(|_| h.clone());
    let t = clipped.trace();
    let d = h.dim();
    State::new(clipped.scale(1.0 / t)).unwrap_or_else(|_| State::maximally_mixed(d))
}

/// Clips negative eigenvalues of every effect and restores completeness by
/// the congruence `T^{-1/2} E T^{-1/2}` with `T` the sum of each POVM.
pub fn clean_povm_set(effects: &[Vec<HermitianOperator>]) -> POVMSet {
    let d = effects[0][0].dim();
    let fixed: Vec<Vec<HermitianOperator>> = effects
        .iter()
        .map(|row| {
            let clipped: Vec<HermitianOperator> = row
                .iter()
                .map(|e| {
                    hermitian_eig(e)
                        .map(|eig| eig.reconstruct_with(|l| l.max(0.0)))
                        .unwrap_or_else(|_| e.clone())
                })
                .collect();
            let total = clipped.iter().fold(HermitianOperator::zeros(d), |acc, e| acc.add(e));
            let n = hermitian_eig(&total)
                .map(|eig| eig.reconstruct_with(|l| 1.0 / l.max(1e-300).sqrt()))
                .unwrap_or_else(|_| HermitianOperator::identity(d));
            clipped.iter().map(|e| e.congruence(n.matrix())).collect()
        })
        .collect();
    POVMSet::with_tolerance(fixed.clone(), 1e-7).unwrap_or_else(|_| POVMSet::trivial(d, effects.len(), effects[0].len()))
}

fn run(prog: &ConicProgram) -> Result<Solution, ResourceError> {
    let sol = conic::solve(prog, &Settings::default())?;
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::Infeasible => Err(ResourceError::EmptyFreeSet),
        s => Err(ResourceError::Solver(s)),
    }
}

fn diagnostics(prog: &ConicProgram, sol: &Solution) -> Result<Diagnostics, ResourceError> {
    let rep = verify_solution(prog, sol, 1e-7)?;
    Ok(Diagnostics {
        primal_value: sol.primal_value,
        dual_value: sol.dual_value,
        gap: sol.gap,
        primal_residual: rep.primal_residual,
        dual_residual: rep.dual_residual,
        iterations: sol.iterations,
        normalization: None,
    })
}

/// Scalar coordinates with the operator each contributes to the free
/// element.
struct StateParam {
    terms: Vec<(usize, HermitianOperator)>,
}

impl StateParam {
    fn add(pb: &mut ProgramBuilder, free: &FreeStateSet, d: usize) -> Result<Self, ResourceError> {
        let terms = match free {
            FreeStateSet::MaxMixedCone => {
                let u = pb.nonneg(1);
                vec![(u.at(0), HermitianOperator::identity(d).scale(1.0 / d as f64))]
            }
            FreeStateSet::Incoherent => {
                let v = pb.nonneg(d);
                (0..d)
                    .map(|i| {
                        let mut diag = vec![0.0; d];
                        diag[i] = 1.0;
                        (v.at(i), HermitianOperator::from_real_diagonal(&diag))
                    })
                    .collect()
            }
            FreeStateSet::CustomConic(c) => {
                let total: usize = c.blocks.iter().map(Block::len).sum();
                if total != c.images.len() {
                    return Err(ResourceError::DimensionMismatch(format!(
                        "{} images for {total} cone coordinates",
                        c.images.len()
                    )));
                }
                if c.images.iter().any(|h| h.dim() != d) {
                    return Err(ResourceError::DimensionMismatch("free cone image dimension".into()));
                }
                let mut terms = Vec::with_capacity(total);
                let mut k = 0;
                for b in &c.blocks {
                    let var = match *b {
                        Block::Psd(n) => pb.psd(n),
                        Block::NonNeg(n) => pb.nonneg(n),
                    };
                    for i in 0..var.len() {
                        terms.push((var.offset + i, c.images[k].clone()));
                        k += 1;
                    }
                }
                terms
            }
        };
        Ok(Self { terms })
    }

    fn refs(&self) -> Vec<(usize, &HermitianOperator)> {
        self.terms.iter().map(|(i, h)| (*i, h)).collect()
    }

    fn value(&self, x: &[f64], d: usize) -> HermitianOperator {
        self.terms
            .iter()
            .fold(HermitianOperator::zeros(d), |acc, (i, h)| acc.add_scaled(x[*i], h))
    }
}

fn state_quantifier(rho: &State, free: &FreeStateSet, robustness: bool) -> Result<QuantifierResult, ResourceError> {
    let d = rho.dim();
    let mut pb = ProgramBuilder::new();
    let general = pb.psd(d);
    let param = StateParam::add(&mut pb, free, d)?;
    let sign = if robustness { 1.0 } else { -1.0 };
    for (i, h) in &param.terms {
        pb.add_cost(*i, sign * h.trace());
    }
    // robustness: free - general = rho; weight: free + general = rho
    pb.add_hermitian_eq(d, &[(general, -sign)], &param.refs(), rho.matrix());
    let prog = pb.build()?;
    let sol = run(&prog)?;
    let free_part = param.value(&sol.x, d);
    let general_part = general.operator(&sol.x);
    let t = free_part.trace();
    let (kind, value, general_weight) = if robustness {
        (QuantifierKind::RobustnessState, (t - 1.0).max(0.0), t - 1.0)
    } else {
        (QuantifierKind::WeightState, (1.0 - t).clamp(0.0, 1.0), 1.0 - t)
    };
    Ok(QuantifierResult {
        kind,
        value,
        witness: OperatorData::State(general.operator(&sol.s)),
        free_object: OperatorData::State(if t > 0.0 { free_part.scale(1.0 / t) } else { free_part }),
        general_object: (general_weight > 1e-12).then(|| OperatorData::State(general_part.scale(1.0 / general_weight))),
        diagnostics: diagnostics(&prog, &sol)?,
    })
}

/// Generalised robustness: the least `r` with `rho + r rho_g = (1 + r) sigma`
/// for a state `rho_g` and a free `sigma`.
pub fn robustness_state(rho: &State, free: &FreeStateSet) -> Result<QuantifierResult, ResourceError> {
    state_quantifier(rho, free, true)
}

/// Weight of resource: the least `w` with `rho = (1 - w) sigma + w rho_g`
/// for a state `rho_g` and a free `sigma`.
pub fn weight_state(rho: &State, free: &FreeStateSet) -> Result<QuantifierResult, ResourceError> {
    state_quantifier(rho, free, false)
}

/// Parametrization of the free cone of measurement sets.
struct PovmParam {
    d: usize,
    settings: usize,
    outcomes: usize,
    /// PSD blocks entering effect `[x][a]` with unit weight.
    blocks: Vec<Vec<Vec<VarBlock>>>,
    /// Scalar coordinates entering effect `[x][a]`.
    scalars: Vec<Vec<Vec<(usize, HermitianOperator)>>>,
    /// One completeness row per entry: blocks and scalars summing to `t I`.
    completeness: Vec<(Vec<VarBlock>, Vec<(usize, HermitianOperator)>)>,
}

impl PovmParam {
    fn add(
        pb: &mut ProgramBuilder,
        family: &FreePOVMSetFamily,
        d: usize,
        settings: usize,
        outcomes: usize,
    ) -> Result<Self, ResourceError> {
        let mut blocks = vec![vec![Vec::new(); outcomes]; settings];
        let mut scalars = vec![vec![Vec::new(); outcomes]; settings];
        match family {
            FreePOVMSetFamily::Compatible => {
                let model = CompatibilityModel::new(settings, outcomes)?;
                let parent: Vec<VarBlock> = (0..model.len()).map(|_| pb.psd(d)).collect();
                for (lambda, g) in parent.iter().enumerate() {
                    for (x, &a) in model.function(lambda).iter().enumerate() {
                        blocks[x][a].push(*g);
                    }
                }
                let completeness = vec![(parent.clone(), Vec::new())];
                Ok(Self {
                    d,
                    settings,
                    outcomes,
                    blocks,
                    scalars,
                    completeness,
                })
            }
            FreePOVMSetFamily::CustomConic(c) => {
                let total: usize = c.blocks.iter().map(Block::len).sum();
                if total != c.images.len() {
                    return Err(ResourceError::DimensionMismatch(format!(
                        "{} images for {total} cone coordinates",
                        c.images.len()
                    )));
                }
                for img in &c.images {
                    if img.len() != settings
                        || img.iter().any(|r| r.len() != outcomes || r.iter().any(|h| h.dim() != d))
                    {
                        return Err(ResourceError::DimensionMismatch("free cone image shape".into()));
                    }
                }
                let mut completeness: Vec<(Vec<VarBlock>, Vec<(usize, HermitianOperator)>)> =
                    vec![(Vec::new(), Vec::new()); settings];
                let mut k = 0;
                for b in &c.blocks {
                    let var = match *b {
                        Block::Psd(n) => pb.psd(n),
                        Block::NonNeg(n) => pb.nonneg(n),
                    };
                    for i in 0..var.len() {
                        let idx = var.offset + i;
                        for x in 0..settings {
                            let mut sum = HermitianOperator::zeros(d);
                            for a in 0..outcomes {
                                let h = &c.images[k][x][a];
                                if h.max_abs_diff(&HermitianOperator::zeros(d)) > 0.0 {
                                    scalars[x][a].push((idx, h.clone()));
                                    sum = sum.add(h);
                                }
                            }
                            completeness[x].1.push((idx, sum));
                        }
                        k += 1;
                    }
                }
                Ok(Self {
                    d,
                    settings,
                    outcomes,
                    blocks,
                    scalars,
                    completeness,
                })
            }
        }
    }

    fn effects(&self, x: &[f64]) -> Vec<Vec<HermitianOperator>> {
        (0..self.settings)
            .map(|xs| {
                (0..self.outcomes)
                    .map(|a| {
                        let mut e = HermitianOperator::zeros(self.d);
                        for v in &self.blocks[xs][a] {
                            e = e.add(&v.operator(x));
                        }
                        for (i, h) in &self.scalars[xs][a] {
                            e = e.add_scaled(x[*i], h);
                        }
                        e
                    })
                    .collect()
            })
            .collect()
    }

    /// Adds `sum_a N_{a|x} = t I` (or `= I` when `t` is `None`).
    fn add_completeness(&self, pb: &mut ProgramBuilder, t: Option<usize>) {
        let minus_id = HermitianOperator::identity(self.d).scale(-1.0);
        let zero = HermitianOperator::zeros(self.d);
        let id = HermitianOperator::identity(self.d);
        for (blocks, scalars) in &self.completeness {
            let bw: Vec<(VarBlock, f64)> = blocks.iter().map(|b| (*b, 1.0)).collect();
            let mut sc: Vec<(usize, &HermitianOperator)> = scalars.iter().map(|(i, h)| (*i, h)).collect();
            match t {
                Some(ti) => {
                    sc.push((ti, &minus_id));
                    pb.add_hermitian_eq(self.d, &bw, &sc, &zero);
                }
                None => {
                    pb.add_hermitian_eq(self.d, &bw, &sc, &id);
                }
            }
        }
    }
}

fn povm_quantifier(
    m: &POVMSet,
    family: &FreePOVMSetFamily,
    robustness: bool,
) -> Result<QuantifierResult, ResourceError> {
    let (d, kappa, l) = (m.dim(), m.settings(), m.outcomes());
    let mut pb = ProgramBuilder::new();
    let param = PovmParam::add(&mut pb, family, d, kappa, l)?;
    let general: Vec<Vec<VarBlock>> = (0..kappa).map(|_| (0..l).map(|_| pb.psd(d)).collect()).collect();
    let t = pb.nonneg(1);
    let sign = if robustness { 1.0 } else { -1.0 };
    pb.add_cost(t.at(0), sign);
    for x in 0..kappa {
        for a in 0..l {
            let mut bw: Vec<(VarBlock, f64)> = param.blocks[x][a].iter().map(|b| (*b, 1.0)).collect();
            bw.push((general[x][a], -sign));
            let sc: Vec<(usize, &HermitianOperator)> = param.scalars[x][a].iter().map(|(i, h)| (*i, h)).collect();
            pb.add_hermitian_eq(d, &bw, &sc, m.effect(x, a));
        }
    }
    param.add_completeness(&mut pb, Some(t.at(0)));
    let prog = pb.build()?;
    let sol = run(&prog)?;
    let tv = sol.x[t.at(0)];
    let free = param.effects(&sol.x);
    let gen: Vec<Vec<HermitianOperator>> = general
        .iter()
        .map(|r| r.iter().map(|v| v.operator(&sol.x)).collect())
        .collect();
    let witness: Vec<Vec<HermitianOperator>> = general
        .iter()
        .map(|r| r.iter().map(|v| v.operator(&sol.s)).collect())
        .collect();
    let (kind, value, general_weight) = if robustness {
        (QuantifierKind::RobustnessPOVMSet, (tv - 1.0).max(0.0), tv - 1.0)
    } else {
        (QuantifierKind::WeightPOVMSet, (1.0 - tv).clamp(0.0, 1.0), 1.0 - tv)
    };
    let scale_all = |z: &[Vec<HermitianOperator>], s: f64| -> Vec<Vec<HermitianOperator>> {
        z.iter().map(|r| r.iter().map(|h| h.scale(s)).collect()).collect()
    };
    Ok(QuantifierResult {
        kind,
        value,
        witness: OperatorData::PovmSet(witness),
        free_object: OperatorData::PovmSet(if tv > 0.0 { scale_all(&free, 1.0 / tv) } else { free }),
        general_object: (general_weight > 1e-12).then(|| OperatorData::PovmSet(scale_all(&gen, 1.0 / general_weight))),
        diagnostics: diagnostics(&prog, &sol)?,
    })
}

/// Generalised robustness of a measurement set against a free family.
pub fn robustness_povmset(m: &POVMSet, family: &FreePOVMSetFamily) -> Result<QuantifierResult, ResourceError> {
    povm_quantifier(m, family, true)
}

/// Weight of resource of a measurement set against a free family.
pub fn weight_povmset(m: &POVMSet, family: &FreePOVMSetFamily) -> Result<QuantifierResult, ResourceError> {
    povm_quantifier(m, family, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// Free family of states or measurement sets.
#[derive(Debug, Clone, Copy)]
pub enum FamilyRef<'a> {
    States(&'a FreeStateSet),
    PovmSets(&'a FreePOVMSetFamily),
}

impl<'a> From<&'a FreeStateSet> for FamilyRef<'a> {
    fn from(f: &'a FreeStateSet) -> Self {
        FamilyRef::States(f)
    }
}

impl<'a> From<&'a FreePOVMSetFamily> for FamilyRef<'a> {
    fn from(f: &'a FreePOVMSetFamily) -> Self {
        FamilyRef::PovmSets(f)
    }
}

/// Max or min of the witness pairing over the normalized free objects.
///
/// Finite generator descriptions are evaluated directly. Otherwise an
/// auxiliary program is solved and the returned bound is the conservative
/// one of its primal and dual values (an upper bound for `Max`, a lower bound
/// for `Min`).
pub fn free_pairing<'a>(
    witness: &OperatorData,
    family: impl Into<FamilyRef<'a>>,
    extremum: Extremum,
) -> Result<f64, ResourceError> {
    let pick = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        match extremum {
            Extremum::Max => vals.fold(f64::NEG_INFINITY, f64::max),
            Extremum::Min => vals.fold(f64::INFINITY, f64::min),
        }
    };
    match (family.into(), witness) {
        (FamilyRef::States(free), OperatorData::State(z)) => {
            let d = z.dim();
            if let Some(gens) = free.generators(d) {
                if gens.is_empty() {
                    return Err(ResourceError::EmptyFreeSet);
                }
                let vals: Vec<f64> = gens
                    .iter()
                    .map(|s| trace_inner(z, s.matrix()))
                    .collect::<Result<_, _>>()?;
                return Ok(pick(&mut vals.into_iter()));
            }
            let mut pb = ProgramBuilder::new();
            let param = StateParam::add(&mut pb, free, d)?;
            let sign = if extremum == Extremum::Max { -1.0 } else { 1.0 };
            let mut row = Vec::new();
            for (i, h) in &param.terms {
                pb.add_cost(*i, sign * trace_inner(z, h)?);
                row.push((*i, h.trace()));
            }
            pb.add_row(&row, 1.0);
            aux_bound(pb.build()?, sign)
        }
        (FamilyRef::PovmSets(family), OperatorData::PovmSet(z)) => {
            let (d, kappa, l) = (z[0][0].dim(), z.len(), z[0].len());
            if let FreePOVMSetFamily::CustomConic(CustomPovmCone {
                generators: Some(gens), ..
            }) = family
            {
                if gens.is_empty() {
                    return Err(ResourceError::EmptyFreeSet);
                }
                let vals: Vec<f64> = gens
                    .iter()
                    .map(|n| pairing_sets(z, n.effects()))
                    .collect::<Result<_, _>>()?;
                return Ok(pick(&mut vals.into_iter()));
            }
            let mut pb = ProgramBuilder::new();
            let param = PovmParam::add(&mut pb, family, d, kappa, l)?;
            let sign = if extremum == Extremum::Max { -1.0 } else { 1.0 };
            for x in 0..kappa {
                for a in 0..l {
                    for v in &param.blocks[x][a] {
                        pb.add_cost_operator(*v, &z[x][a], sign);
                    }
                    for (i, h) in &param.scalars[x][a] {
                        pb.add_cost(*i, sign * trace_inner(&z[x][a], h)?);
                    }
                }
            }
            param.add_completeness(&mut pb, None);
            aux_bound(pb.build()?, sign)
        }
        _ => Err(ResourceError::DimensionMismatch("witness does not match the family".into())),
    }
}

fn aux_bound(prog: ConicProgram, sign: f64) -> Result<f64, ResourceError> {
    let sol = run(&prog)?;
    // objective is sign * pairing; undo the sign on both bounds
    let (p, q) = (sign * sol.primal_value, sign * sol.dual_value);
    Ok(if sign < 0.0 { p.max(q) } else { p.min(q) })
}

/// Rescales a witness so that its free-set constraint is tight: robustness
/// witnesses by `1 / max_free pairing`, weight witnesses by
/// `1 / min_free pairing`.
pub fn normalize_witness<'a>(
    result: &QuantifierResult,
    family: impl Into<FamilyRef<'a>>,
) -> Result<QuantifierResult, ResourceError> {
    let ext = if result.kind.is_robustness() {
        Extremum::Max
    } else {
        Extremum::Min
    };
    let raw = match result.diagnostics.normalization {
        Some(mu) => result.witness.scale(mu),
        None => result.witness.clone(),
    };
    let mu = free_pairing(&raw, family, ext)?;
    if !(mu > 0.0) {
        return Err(ResourceError::DegenerateWitness { mu });
    }
    let mut out = result.clone();
    out.witness = raw.scale(1.0 / mu);
    out.diagnostics.normalization = Some(mu);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub compatible: bool,
    /// Parent POVM `G_lambda` indexed by [`CompatibilityModel`] functions.
    pub parent: Option<Vec<HermitianOperator>>,
    /// Normalized robustness witness separating the set from the
    /// compatible ones.
    pub witness: Option<Vec<Vec<HermitianOperator>>>,
    /// `max |sum_lambda D G_lambda - M|` of the returned parent.
    pub residual: f64,
    pub robustness: f64,
}

/// Decides joint measurability by solving the robustness program.
pub fn is_compatible(m: &POVMSet, tol: f64) -> Result<CompatibilityReport, ResourceError> {
    let (d, kappa, l) = (m.dim(), m.settings(), m.outcomes());
    let model = CompatibilityModel::new(kappa, l)?;
    let mut pb = ProgramBuilder::new();
    let parent: Vec<VarBlock> = (0..model.len()).map(|_| pb.psd(d)).collect();
    let general: Vec<Vec<VarBlock>> = (0..kappa).map(|_| (0..l).map(|_| pb.psd(d)).collect()).collect();
    let t = pb.nonneg(1);
    pb.add_cost(t.at(0), 1.0);
    for x in 0..kappa {
        for a in 0..l {
            let mut bw: Vec<(VarBlock, f64)> = (0..model.len())
                .filter(|&lam| model.function(lam)[x] == a)
                .map(|lam| (parent[lam], 1.0))
                .collect();
            bw.push((general[x][a], -1.0));
            pb.add_hermitian_eq(d, &bw, &[], m.effect(x, a));
        }
    }
    let minus_id = HermitianOperator::identity(d).scale(-1.0);
    let bw: Vec<(VarBlock, f64)> = parent.iter().map(|g| (*g, 1.0)).collect();
    pb.add_hermitian_eq(d, &bw, &[(t.at(0), &minus_id)], &HermitianOperator::zeros(d));
    let prog = pb.build()?;
    let sol = run(&prog)?;
    let tv = sol.x[t.at(0)];
    let g: Vec<HermitianOperator> = parent.iter().map(|v| v.operator(&sol.x).scale(1.0 / tv)).collect();
    let marg = model.marginals(&g);
    let residual = marg
        .iter()
        .flatten()
        .zip(m.effects().iter().flatten())
        .map(|(a, b)| a.max_abs_diff(b))
        .fold(0.0, f64::max);
    let robustness = (tv - 1.0).max(0.0);
    if residual <= tol {
        return Ok(CompatibilityReport {
            compatible: true,
            parent: Some(g),
            witness: None,
            residual,
            robustness,
        });
    }
    let z: Vec<Vec<HermitianOperator>> = general
        .iter()
        .map(|r| r.iter().map(|v| v.operator(&sol.s)).collect())
        .collect();
    let mu = free_pairing(&OperatorData::PovmSet(z.clone()), &FreePOVMSetFamily::Compatible, Extremum::Max)?;
    if !(mu > 0.0) {
        return Err(ResourceError::DegenerateWitness { mu });
    }
    Ok(CompatibilityReport {
        compatible: false,
        parent: None,
        witness: Some(z.iter().map(|r| r.iter().map(|h| h.scale(1.0 / mu)).collect()).collect()),
        residual,
        robustness,
    })
}

/// A full custom cone equal to the PSD cone: every state is free.
pub fn all_states_cone(d: usize) -> CustomStateCone {
    CustomStateCone {
        blocks: vec![Block::Psd(d)],
        images: hermitian_basis(d),
        generators: None,
    }
}

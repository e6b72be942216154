//! Polytopic general probabilistic theories: states, effects, measurement
//! sets and instruments over a polyhedral state cone, the linear-program
//! versions of the quantifiers, and the corresponding games.
//!
//! Vectors of the ambient space `V = R^n` carry both states and effects; an
//! effect `e` acts on a state `w` through the Euclidean pairing `<e, w>`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{self, verify_solution, ConicError, ConicProgram, ProgramBuilder, Settings, Solution, Status};
use crate::games::{
    ms, optimize_table, random_pmf, sub_seeds, uniform, GameValue, GenericGameCheck, Goal, Timings,
    VerificationReport, DEFAULT_GENERIC_GAMES, DEFAULT_J, FREE_TOL,
};
use crate::linalg::{trace_inner, HermitianOperator};
use crate::objects::{GameEnsemble, POVMSet, State, Subchannel};
use crate::resources::{CompatibilityModel, Diagnostics, QuantifierKind, ResourceError};

/// Largest number of polytope vertices accepted.
pub const MAX_VERTICES: usize = 64;
/// Tolerance for cone membership and effect bounds.
pub const GPT_TOL: f64 = 1e-9;
/// Tolerance for the unit normalization of user-supplied states.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GptError {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("invalid effect: {0}")]
    Effect(String),
    #[error("invalid measurement set: {0}")]
    Measurement(String),
    #[error("invalid subchannel: {0}")]
    Subchannel(String),
    #[error("instrument for setting {setting} is not a channel (deviation {deviation:.3e})")]
    NotChannel { setting: usize, deviation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error("solver stopped with status {0:?}")]
    Solver(Status),
    #[error("both inputs are free; the witness game is undefined")]
    FreeInputGame,
    #[error("exclusion needs at least two outcomes")]
    TooFewOutcomes,
    #[error("degenerate witness: normalization {0:.3e} is not positive")]
    DegenerateWitness(f64),
    #[error("invalid probability vector: {0}")]
    BadPmf(String),
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(acc: &mut [f64], s: f64, v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, x)| *a += s * x);
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn rank(rows: &[&[f64]], n: usize, tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    m.svd(false, false).rank(tol)
}

/// Extreme rays of the cone `{z : <a_i, z> >= 0 for all i}` by the double
/// description method. The rows must span `R^n` so the cone is pointed.
pub fn dual_generators(rows: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>, GptError> {
    // initial basis of n independent rows
    let mut basis: Vec<usize> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut cand: Vec<&[f64]> = basis.iter().map(|&k| rows[k].as_slice()).collect();
        cand.push(r);
        if rank(&cand, n, 1e-10) == cand.len() {
            basis.push(i);
            if basis.len() == n {
                break;
            }
        }
    }
    if basis.len() < n {
        return Err(GptError::Model("vertices do not span the ambient space".into()));
    }
    let a0 = DMatrix::from_fn(n, n, |i, j| rows[basis[i]][j]);
    let inv = a0
        .try_inverse()
        .ok_or_else(|| GptError::Model("singular initial basis".into()))?;
    let mut rays: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let c: Vec<f64> = inv.column(k).iter().copied().collect();
            scaled(&c, 1.0 / norm(&c))
        })
        .collect();
    let mut processed = basis.clone();
    for (i, a) in rows.iter().enumerate() {
        if basis.contains(&i) {
            continue;
        }
        let scale = norm(a).max(1e-300);
        let vals: Vec<f64> = rays.iter().map(|r| dot(a, r) / scale).collect();
        let tol = 1e-10;
        let plus: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] > tol).collect();
        let zero: Vec<usize> = (0..rays.len()).filter(|&k| vals[k].abs() <= tol).collect();
        let minus: Vec<usize> = (0..rays.len()).filter(|&k| vals[k] < -tol).collect();
        if minus.is_empty() {
            processed.push(i);
            continue;
        }
        let active = |r: &[f64]| -> Vec<usize> {
            processed
                .iter()
                .copied()
                .filter(|&j| dot(&rows[j], r).abs() <= 1e-9 * norm(&rows[j]).max(1e-300))
                .collect()
        };
        let mut next: Vec<Vec<f64>> = plus.iter().chain(&zero).map(|&k| rays[k].clone()).collect();
        for &p in &plus {
            let ap = active(&rays[p]);
            for &q in &minus {
                let aq = active(&rays[q]);
                let common: Vec<&[f64]> = ap
                    .iter()
                    .filter(|j| aq.contains(j))
                    .map(|&j| rows[j].as_slice())
                    .collect();
                // algebraic adjacency: the shared active rows leave a
                // two-dimensional face
                if common.len() + 2 < n || rank(&common, n, 1e-9) != n - 2 {
                    continue;
                }
                let mut r = scaled(&rays[q], vals[p]);
                axpy(&mut r, -vals[q], &rays[p]);
                let nr = norm(&r);
                next.push(scaled(&r, 1.0 / nr));
            }
        }
        rays = next;
        processed.push(i);
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in rays {
        if !out.iter().any(|o| o.iter().zip(&r).all(|(x, y)| (x - y).abs() < 1e-9)) {
            out.push(r);
        }
    }
    Ok(out)
}

/// A polytopic state space.
#[derive(Debug, Clone, PartialEq)]
pub struct GPTModel {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    unit: Vec<f64>,
    /// Generators of the dual of the state cone, i.e. of the effect cone.
    dual: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPTModelJson {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub unit: Vec<f64>,
}

impl GPTModel {
    pub fn new(vertices: Vec<Vec<f64>>, unit: Vec<f64>) -> Result<Self, GptError> {
        let n = unit.len();
        if vertices.is_empty() || vertices.len() > MAX_VERTICES {
            return Err(GptError::Model(format!(
                "{} vertices; between 1 and {MAX_VERTICES} supported",
                vertices.len()
            )));
        }
        for v in &vertices {
            if v.len() != n {
                return Err(GptError::Model(format!("vertex of length {} in dimension {n}", v.len())));
            }
            let uv = dot(&unit, v);
            if (uv - 1.0).abs() > UNIT_TOL {
                return Err(GptError::Model(format!("unit functional gives {uv} on a vertex")));
            }
        }
        let dual = dual_generators(&vertices, n)?;
        Ok(Self {
            dim: n,
            vertices,
            unit,
            dual,
        })
    }

    pub fn from_json(j: &GPTModelJson) -> Result<Self, GptError> {
        if j.unit.len() != j.dim {
            return Err(GptError::Model("unit length differs from dim".into()));
        }
        Self::new(j.vertices.clone(), j.unit.clone())
    }

    pub fn to_json(&self) -> GPTModelJson {
        GPTModelJson {
            dim: self.dim,
            vertices: self.vertices.clone(),
            unit: self.unit.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn unit(&self) -> &[f64] {
        &self.unit
    }

    pub fn dual_generators(&self) -> &[Vec<f64>] {
        &self.dual
    }

    pub fn barycenter(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for v in &self.vertices {
            axpy(&mut c, 1.0 / self.vertices.len() as f64, v);
        }
        c
    }

    /// Smallest value of a facet functional on `w`; nonnegative iff `w` is
    /// in the state cone.
    pub fn cone_margin(&self, w: &[f64]) -> f64 {
        self.dual.iter().map(|h| dot(h, w)).fold(f64::INFINITY, f64::min)
    }

    pub fn in_state_cone(&self, w: &[f64], tol: f64) -> bool {
        self.cone_margin(w) >= -tol * norm(w).max(1.0)
    }

    /// Smallest value of `e` on the vertices; nonnegative iff `e` is in the
    /// effect cone.
    pub fn effect_margin(&self, e: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(e, v)).fold(f64::INFINITY, f64::min)
    }

    pub fn state(&self, w: Vec<f64>) -> Result<GptState, GptError> {
        self.state_with_tolerance(w, UNIT_TOL)
    }

    pub fn state_with_tolerance(&self, w: Vec<f64>, unit_tol: f64) -> Result<GptState, GptError> {
        if w.len() != self.dim {
            return Err(GptError::DimensionMismatch(format!("state of length {}", w.len())));
        }
        let uw = dot(&self.unit, &w);
        if (uw - 1.0).abs() > unit_tol {
            return Err(GptError::State(format!("unit functional gives {uw}")));
        }
        if !self.in_state_cone(&w, GPT_TOL) {
            return Err(GptError::State(format!("outside the state cone (margin {:.3e})", self.cone_margin(&w))));
        }
        Ok(GptState(w))
    }

    pub fn check_effect(&self, e: &[f64]) -> Result<(), GptError> {
        if e.len() != self.dim {
            return Err(GptError::DimensionMismatch(format!("effect of length {}", e.len())));
        }
        for v in &self.vertices {
            let p = dot(e, v);
            if !(-GPT_TOL..=1.0 + GPT_TOL).contains(&p) {
                return Err(GptError::Effect(format!("value {p} on a vertex")));
            }
        }
        Ok(())
    }

    pub fn measurement_set(&self, effects: Vec<Vec<Vec<f64>>>) -> Result<GptMeasurementSet, GptError> {
        self.measurement_set_with_tolerance(effects, 1e-12)
    }

    pub fn measurement_set_with_tolerance(
        &self,
        effects: Vec<Vec<Vec<f64>>>,
        completeness_tol: f64,
    ) -> Result<GptMeasurementSet, GptError> {
        let Some(l) = effects.first().map(Vec::len) else {
            return Err(GptError::Measurement("no settings".into()));
        };
        if l == 0 {
            return Err(GptError::Measurement("no outcomes".into()));
        }
        for (x, row) in effects.iter().enumerate() {
            if row.len() != l {
                return Err(GptError::Measurement(format!("setting {x} has {} outcomes, expected {l}", row.len())));
            }
            let mut sum = vec![0.0; self.dim];
            for e in row {
                self.check_effect(e)?;
                axpy(&mut sum, 1.0, e);
            }
            let dev = sum.iter().zip(&self.unit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dev > completeness_tol {
                return Err(GptError::Measurement(format!("setting {x} misses the unit by {dev:.3e}")));
            }
        }
        Ok(GptMeasurementSet { effects })
    }

    /// `max_v |<z, v>|` over the vertices.
    pub fn order_unit_norm(&self, z: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(z, v).abs()).fold(0.0, f64::max)
    }

    pub fn subchannel(&self, map: GptSubchannel) -> Result<GptSubchannel, GptError> {
        for v in &self.vertices {
            let out = map.apply(v);
            if out.len() != self.dim {
                return Err(GptError::DimensionMismatch("subchannel output".into()));
            }
            if !self.in_state_cone(&out, GPT_TOL) {
                return Err(GptError::Subchannel("maps a vertex outside the state cone".into()));
            }
            let t = dot(&self.unit, &out);
            if t > 1.0 + GPT_TOL {
                return Err(GptError::Subchannel(format!("increases the unit value to {t}")));
            }
        }
        Ok(map)
    }

    pub fn instrument_set(&self, groups: Vec<Vec<GptOutcomeGroup>>) -> Result<GptInstrumentSet, GptError> {
        let Some(first) = groups.first() else {
            return Err(GptError::Subchannel("no settings".into()));
        };
        let m: u64 = first.iter().map(|g| g.multiplicity).sum();
        for (y, row) in groups.iter().enumerate() {
            if row.iter().map(|g| g.multiplicity).sum::<u64>() != m || row.iter().any(|g| g.multiplicity == 0) {
                return Err(GptError::Subchannel(format!("setting {y} has a different outcome count")));
            }
            for g in row {
                self.subchannel(g.map.clone())?;
            }
            let mut dev = 0.0f64;
            for v in &self.vertices {
                let t: f64 = row
                    .iter()
                    .map(|g| g.multiplicity as f64 * dot(&self.unit, &g.map.apply(v)))
                    .sum();
                dev = dev.max((t - 1.0).abs());
            }
            if dev > GPT_TOL {
                return Err(GptError::NotChannel { setting: y, deviation: dev });
            }
        }
        Ok(GptInstrumentSet { groups })
    }
}

/// A normalized element of the state cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GptState(pub Vec<f64>);

impl GptState {
    pub fn vector(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GptMeasurementSet {
    /// `effects[x][a]`
    effects: Vec<Vec<Vec<f64>>>,
}

impl GptMeasurementSet {
    pub fn settings(&self) -> usize {
        self.effects.len()
    }

    pub fn outcomes(&self) -> usize {
        self.effects[0].len()
    }

    pub fn effect(&self, x: usize, a: usize) -> &[f64] {
        &self.effects[x][a]
    }

    pub fn effects(&self) -> &[Vec<Vec<f64>>] {
        &self.effects
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum GptSubchannel {
    /// `w -> L w` with `L` given row by row.
    #[serde(rename = "linear")]
    Linear { matrix: Vec<Vec<f64>> },
    /// `w -> <effect, w> output`.
    #[serde(rename = "mp")]
    MeasurePrepare { effect: Vec<f64>, output: Vec<f64> },
}

impl GptSubchannel {
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        match self {
            GptSubchannel::Linear { matrix } => matrix.iter().map(|row| dot(row, w)).collect(),
            GptSubchannel::MeasurePrepare { effect, output } => scaled(output, dot(effect, w)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GptOutcomeGroup {
    pub map: GptSubchannel,
    #[serde(default = "one")]
    pub multiplicity: u64,
}

fn one() -> u64 {
    1
}

impl GptOutcomeGroup {
    pub fn single(map: GptSubchannel) -> Self {
        Self { map, multiplicity: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GptInstrumentSet {
    groups: Vec<Vec<GptOutcomeGroup>>,
}

impl GptInstrumentSet {
    pub fn settings(&self) -> usize {
        self.groups.len()
    }

    pub fn outcomes(&self) -> u64 {
        self.groups[0].iter().map(|g| g.multiplicity).sum()
    }

    pub fn groups(&self, y: usize) -> &[GptOutcomeGroup] {
        &self.groups[y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GptGame {
    prior: Vec<f64>,
    instruments: GptInstrumentSet,
}

impl GptGame {
    pub fn new(prior: Vec<f64>, instruments: GptInstrumentSet) -> Result<Self, GptError> {
        if prior.len() != instruments.settings() {
            return Err(GptError::DimensionMismatch("prior length".into()));
        }
        if prior.iter().any(|p| !(*p > 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(GptError::BadPmf("prior must be strictly positive and sum to 1".into()));
        }
        Ok(Self { prior, instruments })
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn instruments(&self) -> &GptInstrumentSet {
        &self.instruments
    }
}

/// The square state space: vertices `(+-1, +-1, 1)`, unit `(0, 0, 1)`.
pub fn gbit() -> GPTModel {
    let vertices = vec![
        vec![1.0, 1.0, 1.0],
        vec![1.0, -1.0, 1.0],
        vec![-1.0, 1.0, 1.0],
        vec![-1.0, -1.0, 1.0],
    ];
    GPTModel::new(vertices, vec![0.0, 0.0, 1.0]).expect("square is a valid model")
}

/// The two sharp coordinate measurements of the gbit:
/// `{(1 +- x)/2}` and `{(1 +- y)/2}`.
pub fn gbit_coordinate_pair(model: &GPTModel) -> GptMeasurementSet {
    model
        .measurement_set(vec![
            vec![vec![0.5, 0.0, 0.5], vec![-0.5, 0.0, 0.5]],
            vec![vec![0.0, 0.5, 0.5], vec![0.0, -0.5, 0.5]],
        ])
        .expect("coordinate effects are valid")
}

pub fn order_unit_norm(model: &GPTModel, z: &[f64]) -> f64 {
    model.order_unit_norm(z)
}

fn check_game_shapes(model: &GPTModel, game: &GptGame, w: &GptState, e: &GptMeasurementSet) -> Result<(), GptError> {
    if w.0.len() != model.dim || e.effects.iter().flatten().any(|v| v.len() != model.dim) {
        return Err(GptError::DimensionMismatch("vectors must match the model dimension".into()));
    }
    if game.instruments.groups.is_empty() {
        return Err(GptError::DimensionMismatch("empty game".into()));
    }
    Ok(())
}

fn gpt_optimize(
    model: &GPTModel,
    game: &GptGame,
    w: &GptState,
    e: &GptMeasurementSet,
    goal: Goal,
) -> Result<GameValue, GptError> {
    check_game_shapes(model, game, w, e)?;
    if goal == Goal::Exclude && game.instruments.outcomes() < 2 {
        return Err(GptError::TooFewOutcomes);
    }
    let table: Vec<Vec<Vec<Vec<f64>>>> = game
        .instruments
        .groups
        .iter()
        .map(|row| {
            let outs: Vec<Vec<f64>> = row.iter().map(|g| g.map.apply(&w.0)).collect();
            e.effects
                .iter()
                .map(|setting| setting.iter().map(|eff| outs.iter().map(|o| dot(eff, o)).collect()).collect())
                .collect()
        })
        .collect();
    let mults: Vec<Vec<u64>> = game
        .instruments
        .groups
        .iter()
        .map(|row| row.iter().map(|g| g.multiplicity).collect())
        .collect();
    Ok(optimize_table(&game.prior, &table, &mults, goal))
}

pub fn gpt_succ_probability(
    model: &GPTModel,
    game: &GptGame,
    w: &GptState,
    e: &GptMeasurementSet,
) -> Result<GameValue, GptError> {
    gpt_optimize(model, game, w, e, Goal::Discriminate)
}

pub fn gpt_err_probability(
    model: &GPTModel,
    game: &GptGame,
    w: &GptState,
    e: &GptMeasurementSet,
) -> Result<GameValue, GptError> {
    gpt_optimize(model, game, w, e, Goal::Exclude)
}

/// Free states: the convex hull of the given states.
#[derive(Debug, Clone, PartialEq)]
pub struct GptFreeStates {
    generators: Vec<Vec<f64>>,
}

impl GptFreeStates {
    pub fn new(model: &GPTModel, generators: Vec<Vec<f64>>) -> Result<Self, GptError> {
        if generators.is_empty() {
            return Err(GptError::Model("empty free state set".into()));
        }
        for g in &generators {
            model.state(g.clone())?;
        }
        Ok(Self { generators })
    }

    /// Only the barycenter of the state space is free.
    pub fn center(model: &GPTModel) -> Self {
        Self {
            generators: vec![model.barycenter()],
        }
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }
}

/// Free measurement sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GptFreeMeasurements {
    /// Post-processings of a single parent measurement.
    Compatible,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GptData {
    State(Vec<f64>),
    MeasurementSet(Vec<Vec<Vec<f64>>>),
}

impl GptData {
    pub fn as_state(&self) -> Option<&[f64]> {
        match self {
            GptData::State(v) => Some(v),
            GptData::MeasurementSet(_) => None,
        }
    }

    pub fn as_measurement_set(&self) -> Option<&[Vec<Vec<f64>>]> {
        match self {
            GptData::State(_) => None,
            GptData::MeasurementSet(z) => Some(z),
        }
    }

    fn scale(&self, s: f64) -> Self {
        match self {
            GptData::State(v) => GptData::State(scaled(v, s)),
            GptData::MeasurementSet(z) => {
                GptData::MeasurementSet(z.iter().map(|r| r.iter().map(|v| scaled(v, s)).collect()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GptQuantifierResult {
    pub kind: QuantifierKind,
    pub value: f64,
    /// `z` / `{z_{a,x}}` for robustness, `y` / `{y_{a,x}}` for weight.
    pub witness: GptData,
    pub free_object: GptData,
    pub diagnostics: Diagnostics,
}

impl GptQuantifierResult {
    pub fn to_json(&self) -> serde_json::Value {
        let data = |d: &GptData| match d {
            GptData::State(v) => serde_json::json!(v),
            GptData::MeasurementSet(z) => serde_json::json!(z),
        };
        serde_json::json!({
            "kind": self.kind,
            "value": self.value,
            "witness": data(&self.witness),
            "free_object": data(&self.free_object),
            "diagnostics": self.diagnostics,
        })
    }
}

fn run(prog: &ConicProgram) -> Result<Solution, GptError> {
    let sol = conic::solve(prog, &Settings::default())?;
    match sol.status {
        Status::Optimal => Ok(sol),
        s => Err(GptError::Solver(s)),
    }
}

fn diagnostics(prog: &ConicProgram, sol: &Solution) -> Result<Diagnostics, GptError> {
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

/// Rows `sum_k coeff_k x[idx_k] vec_k = rhs` for vectors in `R^n`.
struct VecRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl VecRows {
    fn new(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    fn push(&mut self, idx: usize, coeff: f64, v: &[f64]) {
        for (row, x) in self.rows.iter_mut().zip(v) {
            if *x != 0.0 {
                row.push((idx, coeff * x));
            }
        }
    }

    fn finish(self, pb: &mut ProgramBuilder, rhs: &[f64]) -> usize {
        let start = pb.num_rows();
        for (row, b) in self.rows.into_iter().zip(rhs) {
            pb.add_row(&row, *b);
        }
        start
    }
}

fn state_lp(
    model: &GPTModel,
    w: &GptState,
    free: &GptFreeStates,
    robustness: bool,
) -> Result<GptQuantifierResult, GptError> {
    let n = model.dim;
    let mut pb = ProgramBuilder::new();
    let u = pb.nonneg(free.generators.len());
    let lam = pb.nonneg(model.vertices.len());
    let sign = if robustness { 1.0 } else { -1.0 };
    let mut rows = VecRows::new(n);
    for (k, f) in free.generators.iter().enumerate() {
        pb.add_cost(u.at(k), sign * dot(&model.unit, f));
        rows.push(u.at(k), 1.0, f);
    }
    for (i, v) in model.vertices.iter().enumerate() {
        rows.push(lam.at(i), -sign, v);
    }
    let start = rows.finish(&mut pb, &w.0);
    let prog = pb.build()?;
    let sol = run(&prog)?;
    let mut free_part = vec![0.0; n];
    for (k, f) in free.generators.iter().enumerate() {
        axpy(&mut free_part, sol.x[u.at(k)], f);
    }
    let t = dot(&model.unit, &free_part);
    let witness = scaled(&sol.y[start..start + n], sign);
    let (kind, value) = if robustness {
        (QuantifierKind::RobustnessState, (t - 1.0).max(0.0))
    } else {
        (QuantifierKind::WeightState, (1.0 - t).clamp(0.0, 1.0))
    };
    Ok(GptQuantifierResult {
        kind,
        value,
        witness: GptData::State(witness),
        free_object: GptData::State(if t > 0.0 { scaled(&free_part, 1.0 / t) } else { free_part }),
        diagnostics: diagnostics(&prog, &sol)?,
    })
}

pub fn gpt_robustness_state(
    model: &GPTModel,
    w: &GptState,
    free: &GptFreeStates,
) -> Result<GptQuantifierResult, GptError> {
    state_lp(model, w, free, true)
}

pub fn gpt_weight_state(model: &GPTModel, w: &GptState, free: &GptFreeStates) -> Result<GptQuantifierResult, GptError> {
    state_lp(model, w, free, false)
}

fn mset_lp(model: &GPTModel, e: &GptMeasurementSet, robustness: bool) -> Result<GptQuantifierResult, GptError> {
    let (n, kappa, l) = (model.dim, e.settings(), e.outcomes());
    let cm = CompatibilityModel::new(kappa, l)?;
    let h = &model.dual;
    let mut pb = ProgramBuilder::new();
    let parents: Vec<_> = (0..cm.len()).map(|_| pb.nonneg(h.len())).collect();
    let general: Vec<Vec<_>> = (0..kappa).map(|_| (0..l).map(|_| pb.nonneg(h.len())).collect()).collect();
    let t = pb.nonneg(1);
    let sign = if robustness { 1.0 } else { -1.0 };
    pb.add_cost(t.at(0), sign);
    let mut starts = vec![vec![0; l]; kappa];
    for x in 0..kappa {
        for a in 0..l {
            let mut rows = VecRows::new(n);
            for (lam, g) in parents.iter().enumerate() {
                if cm.function(lam)[x] == a {
                    for (k, hk) in h.iter().enumerate() {
                        rows.push(g.at(k), 1.0, hk);
                    }
                }
            }
            for (k, hk) in h.iter().enumerate() {
                rows.push(general[x][a].at(k), -sign, hk);
            }
            starts[x][a] = rows.finish(&mut pb, e.effect(x, a));
        }
    }
    let mut rows = VecRows::new(n);
    for g in &parents {
        for (k, hk) in h.iter().enumerate() {
            rows.push(g.at(k), 1.0, hk);
        }
    }
    rows.push(t.at(0), -1.0, &model.unit);
    rows.finish(&mut pb, &vec![0.0; n]);
    let prog = pb.build()?;
    let sol = run(&prog)?;
    let tv = sol.x[t.at(0)];
    let parent_vecs: Vec<Vec<f64>> = parents
        .iter()
        .map(|g| {
            let mut v = vec![0.0; n];
            for (k, hk) in h.iter().enumerate() {
                axpy(&mut v, sol.x[g.at(k)], hk);
            }
            v
        })
        .collect();
    let mut free = vec![vec![vec![0.0; n]; l]; kappa];
    for (lam, g) in parent_vecs.iter().enumerate() {
        for (x, &a) in cm.function(lam).iter().enumerate() {
            axpy(&mut free[x][a], 1.0 / tv, g);
        }
    }
    let witness: Vec<Vec<Vec<f64>>> = starts
        .iter()
        .map(|r| r.iter().map(|&s| scaled(&sol.y[s..s + n], sign)).collect())
        .collect();
    let (kind, value) = if robustness {
        (QuantifierKind::RobustnessPOVMSet, (tv - 1.0).max(0.0))
    } else {
        (QuantifierKind::WeightPOVMSet, (1.0 - tv).clamp(0.0, 1.0))
    };
    Ok(GptQuantifierResult {
        kind,
        value,
        witness: GptData::MeasurementSet(witness),
        free_object: GptData::MeasurementSet(free),
        diagnostics: diagnostics(&prog, &sol)?,
    })
}

pub fn gpt_robustness_mset(
    model: &GPTModel,
    e: &GptMeasurementSet,
    _free: GptFreeMeasurements,
) -> Result<GptQuantifierResult, GptError> {
    mset_lp(model, e, true)
}

pub fn gpt_weight_mset(
    model: &GPTModel,
    e: &GptMeasurementSet,
    _free: GptFreeMeasurements,
) -> Result<GptQuantifierResult, GptError> {
    mset_lp(model, e, false)
}

/// Max (robustness) or min (weight) of the witness pairing over the free
/// objects; the auxiliary LP returns its conservative bound.
pub fn gpt_free_pairing(
    model: &GPTModel,
    witness: &GptData,
    free_states: &GptFreeStates,
    maximize: bool,
) -> Result<f64, GptError> {
    let pick = |it: &mut dyn Iterator<Item = f64>| {
        if maximize {
            it.fold(f64::NEG_INFINITY, f64::max)
        } else {
            it.fold(f64::INFINITY, f64::min)
        }
    };
    match witness {
        GptData::State(z) => Ok(pick(&mut free_states.generators.iter().map(|f| dot(z, f)))),
        GptData::MeasurementSet(z) => {
            let (n, kappa, l) = (model.dim, z.len(), z[0].len());
            let cm = CompatibilityModel::new(kappa, l)?;
            let h = &model.dual;
            let mut pb = ProgramBuilder::new();
            let sign = if maximize { -1.0 } else { 1.0 };
            let mut rows = VecRows::new(n);
            for lam in 0..cm.len() {
                let g = pb.nonneg(h.len());
                let mut w = vec![0.0; n];
                for (x, &a) in cm.function(lam).iter().enumerate() {
                    axpy(&mut w, 1.0, &z[x][a]);
                }
                for (k, hk) in h.iter().enumerate() {
                    pb.add_cost(g.at(k), sign * dot(&w, hk));
                    rows.push(g.at(k), 1.0, hk);
                }
            }
            rows.finish(&mut pb, &model.unit);
            let sol = run(&pb.build()?)?;
            let (p, q) = (sign * sol.primal_value, sign * sol.dual_value);
            Ok(if maximize { p.max(q) } else { p.min(q) })
        }
    }
}

pub fn gpt_normalize_witness(
    model: &GPTModel,
    result: &GptQuantifierResult,
    free_states: &GptFreeStates,
) -> Result<GptQuantifierResult, GptError> {
    let raw = match result.diagnostics.normalization {
        Some(mu) => result.witness.scale(mu),
        None => result.witness.clone(),
    };
    let mu = gpt_free_pairing(model, &raw, free_states, result.kind.is_robustness())?;
    if !(mu > 0.0) {
        return Err(GptError::DegenerateWitness(mu));
    }
    let mut out = result.clone();
    out.witness = raw.scale(1.0 / mu);
    out.diagnostics.normalization = Some(mu);
    Ok(out)
}

/// Worst violation of the witness cone constraints: the state witness must
/// be nonnegative on the vertices, the measurement witnesses must lie in the
/// state cone.
pub fn gpt_witness_cone_violation(model: &GPTModel, witness: &GptData) -> f64 {
    match witness {
        GptData::State(z) => (-model.effect_margin(z)).max(0.0),
        GptData::MeasurementSet(z) => z
            .iter()
            .flatten()
            .map(|v| (-model.cone_margin(v)).max(0.0))
            .fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GptGameCertificate {
    /// `alpha` or `beta`.
    pub coefficient: f64,
    pub j: Option<u64>,
    pub state: GptQuantifierResult,
    pub measurement_set: GptQuantifierResult,
    pub target: f64,
}

fn witness_parts<'r>(
    state: &'r GptQuantifierResult,
    mset: &'r GptQuantifierResult,
) -> Result<(&'r [f64], &'r [Vec<Vec<f64>>]), GptError> {
    if state.value <= FREE_TOL && mset.value <= FREE_TOL {
        return Err(GptError::FreeInputGame);
    }
    let z = state
        .witness
        .as_state()
        .ok_or_else(|| GptError::DimensionMismatch("state witness expected".into()))?;
    let zm = mset
        .witness
        .as_measurement_set()
        .ok_or_else(|| GptError::DimensionMismatch("measurement witness expected".into()))?;
    Ok((z, zm))
}

/// Discrimination game from normalized robustness witnesses.
pub fn build_gpt_disc_game_from(
    model: &GPTModel,
    state: &GptQuantifierResult,
    mset: &GptQuantifierResult,
    p_x: &[f64],
    j: u64,
    chi: &GptState,
) -> Result<(GptGame, GptGameCertificate), GptError> {
    let (z, zm) = witness_parts(state, mset)?;
    if p_x.len() != zm.len() {
        return Err(GptError::DimensionMismatch("p_X length".into()));
    }
    if j == 0 {
        return Err(GptError::BadPmf("J must be positive".into()));
    }
    let norm_z = model.order_unit_norm(z);
    let total: f64 = zm
        .iter()
        .zip(p_x)
        .map(|(row, p)| row.iter().map(|v| dot(&model.unit, v)).sum::<f64>() / p)
        .sum();
    if !(norm_z > 0.0 && total > 0.0) {
        return Err(GptError::FreeInputGame);
    }
    let alpha = 1.0 / (norm_z * total);
    let e = scaled(z, alpha);
    let mut groups = Vec::with_capacity(zm.len());
    for (y, row) in zm.iter().enumerate() {
        let mut g: Vec<GptOutcomeGroup> = row
            .iter()
            .map(|zb| {
                GptOutcomeGroup::single(GptSubchannel::MeasurePrepare {
                    effect: e.clone(),
                    output: scaled(zb, 1.0 / p_x[y]),
                })
            })
            .collect();
        let c = row.iter().map(|v| dot(&model.unit, v)).sum::<f64>() / p_x[y];
        let mut garbage = model.unit.clone();
        axpy(&mut garbage, -alpha * c, z);
        g.push(GptOutcomeGroup {
            map: GptSubchannel::MeasurePrepare {
                effect: scaled(&garbage, 1.0 / j as f64),
                output: chi.0.clone(),
            },
            multiplicity: j,
        });
        groups.push(g);
    }
    let game = GptGame::new(p_x.to_vec(), model.instrument_set(groups)?)?;
    let target = (1.0 + state.value) * (1.0 + mset.value);
    Ok((
        game,
        GptGameCertificate {
            coefficient: alpha,
            j: Some(j),
            state: state.clone(),
            measurement_set: mset.clone(),
            target,
        },
    ))
}

/// Exclusion game from normalized weight witnesses, transliterated from the
/// quantum construction with the order unit norm.
pub fn build_gpt_excl_game_from(
    model: &GPTModel,
    state: &GptQuantifierResult,
    mset: &GptQuantifierResult,
    p_x: &[f64],
    pb_given_y: &[Vec<f64>],
) -> Result<(GptGame, GptGameCertificate), GptError> {
    let (y_state, ym) = witness_parts(state, mset)?;
    if p_x.len() != ym.len() || pb_given_y.len() != ym.len() {
        return Err(GptError::DimensionMismatch("p_X or p(b|y) length".into()));
    }
    let norm_y = model.order_unit_norm(y_state);
    let total: f64 = ym
        .iter()
        .zip(p_x)
        .map(|(row, p)| row.iter().map(|v| dot(&model.unit, v)).sum::<f64>() / p)
        .sum();
    if !(norm_y > 0.0 && total > 0.0) {
        return Err(GptError::FreeInputGame);
    }
    let beta = 1.0 / (2.0 * norm_y * total);
    let e = scaled(y_state, beta);
    let mut groups = Vec::with_capacity(ym.len());
    for (y, row) in ym.iter().enumerate() {
        let mut g: Vec<GptOutcomeGroup> = row
            .iter()
            .map(|yb| {
                GptOutcomeGroup::single(GptSubchannel::MeasurePrepare {
                    effect: e.clone(),
                    output: scaled(yb, 1.0 / p_x[y]),
                })
            })
            .collect();
        let den: f64 = row.iter().zip(&pb_given_y[y]).map(|(v, p)| p * dot(&model.unit, v)).sum();
        let xi = if den < 1e-12 {
            model.barycenter()
        } else {
            let mut acc = vec![0.0; model.dim];
            for (v, p) in row.iter().zip(&pb_given_y[y]) {
                axpy(&mut acc, p / den, v);
            }
            acc
        };
        let c = row.iter().map(|v| dot(&model.unit, v)).sum::<f64>() / p_x[y];
        let mut rest = model.unit.clone();
        axpy(&mut rest, -beta * c, y_state);
        g.push(GptOutcomeGroup::single(GptSubchannel::MeasurePrepare {
            effect: rest,
            output: xi,
        }));
        groups.push(g);
    }
    let game = GptGame::new(p_x.to_vec(), model.instrument_set(groups)?)?;
    let target = (1.0 - state.value) * (1.0 - mset.value);
    Ok((
        game,
        GptGameCertificate {
            coefficient: beta,
            j: None,
            state: state.clone(),
            measurement_set: mset.clone(),
            target,
        },
    ))
}

/// Random state: a random convex combination of the given points.
fn random_mixture(points: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = random_pmf(rng, points.len());
    let mut out = vec![0.0; points[0].len()];
    for (p, wi) in points.iter().zip(&w) {
        axpy(&mut out, *wi, p);
    }
    out
}

/// Random state: a random mixture of the vertices, deterministic per seed.
pub fn random_gpt_state(model: &GPTModel, seed: u64) -> GptState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GptState(random_mixture(&model.vertices, &mut rng))
}

/// Random measurement with `k` outcomes: random effect-cone elements scaled
/// under the unit, completed by the remainder.
pub fn random_gpt_measurement(model: &GPTModel, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut effects: Vec<Vec<f64>> = (0..k.saturating_sub(1).max(1))
        .map(|_| {
            let w = random_pmf(rng, model.dual.len());
            let mut e = vec![0.0; model.dim];
            for (h, wi) in model.dual.iter().zip(&w) {
                axpy(&mut e, *wi, h);
            }
            e
        })
        .collect();
    if k == 1 {
        return vec![model.unit.clone()];
    }
    let mut sum = vec![0.0; model.dim];
    for e in &effects {
        axpy(&mut sum, 1.0, e);
    }
    let peak = model.vertices.iter().map(|v| dot(&sum, v)).fold(0.0, f64::max);
    let s = rng.random_range(0.5..1.0) / peak;
    for e in effects.iter_mut() {
        e.iter_mut().for_each(|x| *x *= s);
    }
    let mut rest = model.unit.clone();
    for e in &effects {
        axpy(&mut rest, -1.0, e);
    }
    effects.push(rest);
    effects
}

/// Random measure-and-prepare instruments with a uniform prior.
pub fn random_gpt_game(model: &GPTModel, settings: usize, outcomes: usize, seed: u64) -> GptGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = (0..settings)
        .map(|_| {
            random_gpt_measurement(model, outcomes, &mut rng)
                .into_iter()
                .map(|effect| {
                    GptOutcomeGroup::single(GptSubchannel::MeasurePrepare {
                        effect,
                        output: random_mixture(&model.vertices, &mut rng),
                    })
                })
                .collect()
        })
        .collect();
    GptGame::new(uniform(settings), GptInstrumentSet { groups }).expect("uniform prior")
}

/// Random free pairs: mixtures of free states and post-processed random
/// parent measurements.
pub fn sample_gpt_free_pairs(
    model: &GPTModel,
    free: &GptFreeStates,
    kappa: usize,
    l: usize,
    n: usize,
    seed: u64,
) -> Vec<(GptState, GptMeasurementSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_k = CompatibilityModel::new(kappa, l).map(|m| m.len()).unwrap_or(l).max(l);
    (0..n)
        .map(|_| {
            let s = random_mixture(&free.generators, &mut rng);
            let k = rng.random_range(l..=max_k);
            let parent = random_gpt_measurement(model, k, &mut rng);
            let mut effects = vec![vec![vec![0.0; model.dim]; l]; kappa];
            for row in effects.iter_mut() {
                for p in &parent {
                    let a = rng.random_range(0..l);
                    axpy(&mut row[a], 1.0, p);
                }
            }
            (GptState(s), GptMeasurementSet { effects })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Result3Report {
    pub discrimination: VerificationReport,
    pub exclusion: VerificationReport,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GptVerifyOptions {
    pub j: u64,
    pub n_samples: usize,
    pub n_games: usize,
    pub seed: u64,
    /// Defaults to the barycenter.
    pub chi: Option<GptState>,
}

impl Default for GptVerifyOptions {
    fn default() -> Self {
        Self {
            j: DEFAULT_J,
            n_samples: 200,
            n_games: DEFAULT_GENERIC_GAMES,
            seed: 0,
            chi: None,
        }
    }
}

fn optimizer_pair(
    model: &GPTModel,
    state: &GptQuantifierResult,
    mset: &GptQuantifierResult,
) -> Result<(GptState, GptMeasurementSet), GptError> {
    let s = state.free_object.as_state().expect("state result").to_vec();
    let u = dot(&model.unit, &s);
    let m = mset.free_object.as_measurement_set().expect("measurement result").to_vec();
    Ok((GptState(scaled(&s, 1.0 / u)), GptMeasurementSet { effects: m }))
}

#[allow(clippy::too_many_arguments)]
fn gpt_branch(
    model: &GPTModel,
    w: &GptState,
    e: &GptMeasurementSet,
    free: &GptFreeStates,
    opts: &GptVerifyOptions,
    goal: Goal,
) -> Result<VerificationReport, GptError> {
    let t0 = Instant::now();
    let robust = goal == Goal::Discriminate;
    let (rs, rm) = if robust {
        (
            gpt_robustness_state(model, w, free)?,
            gpt_robustness_mset(model, e, GptFreeMeasurements::Compatible)?,
        )
    } else {
        (
            gpt_weight_state(model, w, free)?,
            gpt_weight_mset(model, e, GptFreeMeasurements::Compatible)?,
        )
    };
    let rs = gpt_normalize_witness(model, &rs, free)?;
    let rm = gpt_normalize_witness(model, &rm, free)?;
    let quantifiers_ms = ms(t0);
    let p_x = uniform(e.settings());
    let (game, cert) = if robust {
        let chi = match &opts.chi {
            Some(c) => c.clone(),
            None => GptState(model.barycenter()),
        };
        build_gpt_disc_game_from(model, &rs, &rm, &p_x, opts.j, &chi)?
    } else {
        let pb = vec![uniform(e.outcomes()); e.settings()];
        build_gpt_excl_game_from(model, &rs, &rm, &p_x, &pb)?
    };
    let eval = |g: &GptGame, s: &GptState, m: &GptMeasurementSet| -> Result<f64, GptError> {
        Ok(gpt_optimize(model, g, s, m, goal)?.value)
    };
    let coefficient = cert.coefficient;
    let target = cert.target;
    let numerator = eval(&game, w, e)?;
    let certificate_bound = coefficient * target;
    let analytic = if robust {
        coefficient + 1.0 / opts.j as f64
    } else {
        coefficient
    };

    let t1 = Instant::now();
    let mut pairs = vec![optimizer_pair(model, &rs, &rm)?];
    pairs.extend(sample_gpt_free_pairs(
        model,
        free,
        e.settings(),
        e.outcomes(),
        opts.n_samples,
        opts.seed,
    ));
    let sample_values: Vec<f64> = pairs
        .par_iter()
        .map(|(s, m)| eval(&game, s, m))
        .collect::<Result<_, _>>()?;
    let samples_ms = ms(t1);

    let t2 = Instant::now();
    let generic: Vec<GenericGameCheck> = sub_seeds(opts.seed ^ 0x9e37_79b9_7f4a_7c15, opts.n_games)
        .into_par_iter()
        .map(|s| {
            let g = random_gpt_game(model, e.settings(), e.outcomes().max(2), s);
            let resource_value = eval(&g, w, e)?;
            let vals: Vec<f64> = pairs.iter().map(|(a, b)| eval(&g, a, b)).collect::<Result<_, _>>()?;
            let (free_value, ok) = if robust {
                let f = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (f, resource_value <= target * f * (1.0 + 1e-6))
            } else {
                let f = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                (f, resource_value >= target * f - 1e-6)
            };
            Ok(GenericGameCheck {
                seed: s,
                resource_value,
                free_value,
                ok,
            })
        })
        .collect::<Result<_, GptError>>()?;
    let generic_ms = ms(t2);
    let generic_ok = generic.iter().all(|g| g.ok);

    let (empirical, empirical_ok, ratio, certificate_ok, ratio_ok, strict) = if robust {
        let emp = sample_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ratio = numerator / analytic;
        (
            emp,
            emp <= analytic + 1e-9,
            ratio,
            numerator >= certificate_bound - 1e-7,
            ratio >= target * coefficient / analytic * (1.0 - 1e-6),
            Some(ratio >= target * (1.0 - 2.0 / opts.j as f64 - 1e-6)),
        )
    } else {
        let emp = sample_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = numerator / analytic;
        (
            emp,
            emp >= coefficient - 1e-9,
            ratio,
            numerator <= certificate_bound + 1e-7,
            ratio <= target + 1e-6,
            None,
        )
    };
    Ok(VerificationReport {
        result: if robust {
            "result3-discrimination".into()
        } else {
            "result3-exclusion".into()
        },
        state_value: rs.value,
        povm_set_value: rm.value,
        coefficient,
        j: cert.j,
        numerator,
        certificate_bound,
        certificate_ok,
        analytic_denominator: analytic,
        empirical_denominator: empirical,
        empirical_ok,
        ratio,
        target,
        ratio_ok,
        strict_ratio_ok: strict,
        passed: certificate_ok && empirical_ok && ratio_ok && generic_ok,
        generic,
        generic_ok,
        sample_values,
        timings: Timings {
            quantifiers_ms,
            samples_ms,
            generic_ms,
        },
    })
}

/// Both branches of the advantage bounds in a polytopic theory.
pub fn verify_result3(
    model: &GPTModel,
    w: &GptState,
    e: &GptMeasurementSet,
    free: &GptFreeStates,
    opts: &GptVerifyOptions,
) -> Result<Result3Report, GptError> {
    let discrimination = gpt_branch(model, w, e, free, opts, Goal::Discriminate)?;
    let exclusion = gpt_branch(model, w, e, free, opts, Goal::Exclude)?;
    let passed = discrimination.passed && exclusion.passed;
    Ok(Result3Report {
        discrimination,
        exclusion,
        passed,
    })
}

/// Coordinates of quantum objects in an orthonormal Hermitian basis, so that
/// the Euclidean pairing equals the trace pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumEmbedding {
    basis: Vec<HermitianOperator>,
}

impl QuantumEmbedding {
    /// Qubit basis `{I, X, Y, Z} / sqrt(2)`.
    pub fn qubit() -> Self {
        let s = 0.5f64.sqrt();
        Self {
            basis: vec![
                HermitianOperator::identity(2).scale(s),
                crate::linalg::pauli::x().scale(s),
                crate::linalg::pauli::y().scale(s),
                crate::linalg::pauli::z().scale(s),
            ],
        }
    }

    pub fn coords(&self, h: &HermitianOperator) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| trace_inner(b, h).expect("matching dimension"))
            .collect()
    }

    /// Octahedron inscribed in the Bloch ball with `+-axis` among its
    /// vertices.
    pub fn qubit_octahedron(&self, axis: [f64; 3]) -> GPTModel {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let a = if n < 1e-12 {
            [0.0, 0.0, 1.0]
        } else {
            [axis[0] / n, axis[1] / n, axis[2] / n]
        };
        // complete to an orthonormal frame
        let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = helper[0] * a[0] + helper[1] * a[1] + helper[2] * a[2];
        let mut b = [helper[0] - d * a[0], helper[1] - d * a[1], helper[2] - d * a[2]];
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        b.iter_mut().for_each(|x| *x /= nb);
        let c = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let s = 0.5f64.sqrt();
        let mut vertices = Vec::new();
        for dir in [a, b, c] {
            for sign in [1.0, -1.0] {
                vertices.push(vec![s, sign * s * dir[0], sign * s * dir[1], sign * s * dir[2]]);
            }
        }
        let unit = self.coords(&HermitianOperator::identity(2));
        GPTModel::new(vertices, unit).expect("octahedron spans the qubit space")
    }

    /// Model whose octahedron contains the Bloch direction of `rho`.
    pub fn model_for(&self, rho: &State) -> GPTModel {
        let c = self.coords(rho.matrix());
        self.qubit_octahedron([c[1], c[2], c[3]])
    }

    pub fn state(&self, model: &GPTModel, rho: &State) -> Result<GptState, GptError> {
        let mut c = self.coords(rho.matrix());
        let u = dot(model.unit(), &c);
        c.iter_mut().for_each(|x| *x /= u);
        model.state_with_tolerance(c, 1e-12)
    }

    pub fn measurement_set(&self, model: &GPTModel, m: &POVMSet) -> Result<GptMeasurementSet, GptError> {
        let effects = m
            .effects()
            .iter()
            .map(|row| row.iter().map(|e| self.coords(e)).collect())
            .collect();
        model.measurement_set_with_tolerance(effects, 1e-12)
    }

    /// Matrix `L_{jk} = tr[B_j phi(B_k)]` of a subchannel.
    pub fn subchannel(&self, sc: &Subchannel) -> GptSubchannel {
        let images: Vec<Vec<f64>> = self
            .basis
            .iter()
            .map(|b| self.coords(&sc.apply_operator(b).expect("matching dimension")))
            .collect();
        let n = self.basis.len();
        GptSubchannel::Linear {
            matrix: (0..n).map(|j| (0..n).map(|k| images[k][j]).collect()).collect(),
        }
    }

    /// Embedded game. The instruments are positive on the whole Bloch ball,
    /// which no polytope captures, so only the shapes are checked.
    pub fn game(&self, game: &GameEnsemble) -> Result<GptGame, GptError> {
        let inst = game.instruments();
        let groups = inst
            .all_groups()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|g| GptOutcomeGroup {
                        map: self.subchannel(&g.map),
                        multiplicity: g.multiplicity,
                    })
                    .collect()
            })
            .collect();
        GptGame::new(game.prior().to_vec(), GptInstrumentSet { groups })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gbit_dual_cone_is_four_facets() {
        let m = gbit();
        assert_eq!(m.dual_generators().len(), 4);
        for h in m.dual_generators() {
            assert!(m.effect_margin(h) > -1e-12);
            let zeros = m.vertices().iter().filter(|v| dot(h, v).abs() < 1e-12).count();
            assert_eq!(zeros, 2);
        }
    }

    #[test]
    fn gbit_states_and_effects() {
        let m = gbit();
        for v in m.vertices() {
            m.state(v.clone()).unwrap();
        }
        m.state(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(m.state(vec![2.0, 0.0, 1.0]).is_err());
        gbit_coordinate_pair(&m);
        assert!(m.check_effect(&[1.0, 0.0, 0.5]).is_err());
    }

    #[test]
    fn order_unit_norm_examples() {
        let m = gbit();
        assert_eq!(order_unit_norm(&m, m.unit()), 1.0);
        assert_eq!(order_unit_norm(&m, &[0.0; 3]), 0.0);
        assert_eq!(order_unit_norm(&m, &[1.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn vertex_against_center() {
        let m = gbit();
        let free = GptFreeStates::center(&m);
        let v = m.state(vec![1.0, 1.0, 1.0]).unwrap();
        let r = gpt_robustness_state(&m, &v, &free).unwrap();
        assert!((r.value - 1.0).abs() < 1e-7);
        let c = m.state(m.barycenter()).unwrap();
        assert!(gpt_robustness_state(&m, &c, &free).unwrap().value < 1e-7);
        assert!(gpt_weight_state(&m, &c, &free).unwrap().value < 1e-7);
    }

    #[test]
    fn coordinate_pair_is_incompatible() {
        let m = gbit();
        let r = gpt_robustness_mset(&m, &gbit_coordinate_pair(&m), GptFreeMeasurements::Compatible).unwrap();
        assert!(r.value > 0.1, "{}", r.value);
    }

    #[test]
    fn octahedron_matches_bloch_sphere_values() {
        let emb = QuantumEmbedding::qubit();
        let rho = crate::objects::random_state(2, 3);
        let model = emb.model_for(&rho);
        assert_eq!(model.dual_generators().len(), 8);
        let w = emb.state(&model, &rho).unwrap();
        let free = GptFreeStates::center(&model);
        let r = gpt_robustness_state(&model, &w, &free).unwrap().value;
        let lmax = crate::linalg::lambda_max(rho.matrix()).unwrap();
        assert!((r - (2.0 * lmax - 1.0)).abs() < 1e-7);
    }
}

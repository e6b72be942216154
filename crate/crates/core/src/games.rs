//! Subchannel discrimination and exclusion games with prior information:
//! evaluation, construction from quantifier witnesses, and verification of
//! the multiplicative advantage bounds.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{operator_norm, trace_inner, HermitianOperator, LinalgError};
use crate::objects::{
    random_instrument_set, random_povm_set, DeterministicStrategy, GameEnsemble, InstrumentSet, ObjectError,
    OutcomeGroup, POVMSet, State, Strategy, Subchannel,
};
use crate::resources::{
    normalize_witness, robustness_povmset, robustness_state, weight_povmset, weight_state, CompatibilityModel,
    FreePOVMSetFamily, FreeStateSet, QuantifierResult, ResourceError,
};

/// Quantifier values at or below this count as zero.
pub const FREE_TOL: f64 = 1e-7;
/// Default number of garbage outcomes in discrimination games.
pub const DEFAULT_J: u64 = 10_000;
/// Default number of random games for the generic-game bound.
pub const DEFAULT_GENERIC_GAMES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("both inputs are free; the witness game is undefined")]
    FreeInputGame,
    #[error("exclusion needs at least two outcomes")]
    TooFewOutcomes,
    #[error("cannot sample from this free set: {0}")]
    UnsupportedSampling(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameValue {
    pub value: f64,
    pub optimal_strategy: DeterministicStrategy,
    pub per_setting_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Goal {
    Discriminate,
    Exclude,
}

fn check_shapes(game: &GameEnsemble, rho: &State, m: &POVMSet) -> Result<(), GameError> {
    let inst = game.instruments();
    if inst.input_dim() != rho.dim() {
        return Err(GameError::DimensionMismatch(format!(
            "instrument input {} vs state {}",
            inst.input_dim(),
            rho.dim()
        )));
    }
    if inst.output_dim() != m.dim() {
        return Err(GameError::DimensionMismatch(format!(
            "instrument output {} vs measurement {}",
            inst.output_dim(),
            m.dim()
        )));
    }
    Ok(())
}

/// `table[y][x][a][g] = tr[M_{a|x} phi_g(rho)]` over outcome groups `g`.
fn pairing_table(game: &GameEnsemble, rho: &State, m: &POVMSet) -> Result<Vec<Vec<Vec<Vec<f64>>>>, GameError> {
    let inst = game.instruments();
    let mut table = Vec::with_capacity(inst.settings());
    for y in 0..inst.settings() {
        let outs: Vec<HermitianOperator> = inst
            .groups(y)
            .iter()
            .map(|g| g.map.apply(rho))
            .collect::<Result<_, _>>()?;
        let mut ty = Vec::with_capacity(m.settings());
        for x in 0..m.settings() {
            let mut tx = Vec::with_capacity(m.outcomes());
            for a in 0..m.outcomes() {
                tx.push(
                    outs.iter()
                        .map(|o| trace_inner(m.effect(x, a), o))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            ty.push(tx);
        }
        table.push(ty);
    }
    Ok(table)
}

fn optimize(game: &GameEnsemble, rho: &State, m: &POVMSet, goal: Goal) -> Result<GameValue, GameError> {
    check_shapes(game, rho, m)?;
    let inst = game.instruments();
    if goal == Goal::Exclude && inst.outcomes() < 2 {
        return Err(GameError::TooFewOutcomes);
    }
    let table = pairing_table(game, rho, m)?;
    let mults: Vec<Vec<u64>> = inst
        .all_groups()
        .iter()
        .map(|row| row.iter().map(|g| g.multiplicity).collect())
        .collect();
    Ok(optimize_table(game.prior(), &table, &mults, goal))
}

/// Deterministic-strategy optimum of a pairing table
/// `table[y][x][a][g]` whose outcome groups `g` have multiplicities
/// `mults[y][g]`. Ties go to the lowest index.
pub(crate) fn optimize_table(prior: &[f64], table: &[Vec<Vec<Vec<f64>>>], mults: &[Vec<u64>], goal: Goal) -> GameValue {
    let better = |new: f64, old: f64| match goal {
        Goal::Discriminate => new > old,
        Goal::Exclude => new < old,
    };
    let mut x_of_y = Vec::with_capacity(table.len());
    let mut g_of_ay = Vec::with_capacity(table.len());
    let mut per_setting = Vec::with_capacity(table.len());
    for (y, ty) in table.iter().enumerate() {
        // first label of every group
        let starts: Vec<usize> = mults[y]
            .iter()
            .scan(0usize, |acc, &k| {
                let s = *acc;
                *acc += k as usize;
                Some(s)
            })
            .collect();
        let mut best: Option<(f64, usize, Vec<usize>)> = None;
        for (x, tx) in ty.iter().enumerate() {
            let mut total = 0.0;
            let mut guesses = Vec::with_capacity(tx.len());
            for ta in tx {
                let mut bg = 0;
                for g in 1..ta.len() {
                    if better(ta[g], ta[bg]) {
                        bg = g;
                    }
                }
                total += ta[bg];
                guesses.push(starts[bg]);
            }
            if best.as_ref().is_none_or(|(v, _, _)| better(total, *v)) {
                best = Some((total, x, guesses));
            }
        }
        let (v, x, guesses) = best.expect("at least one setting");
        per_setting.push(v);
        x_of_y.push(x);
        g_of_ay.push(guesses);
    }
    let value = per_setting.iter().zip(prior).map(|(v, p)| v * p).sum::<f64>().max(0.0);
    GameValue {
        value,
        optimal_strategy: DeterministicStrategy { x_of_y, g_of_ay },
        per_setting_values: per_setting,
    }
}

/// Largest success probability over classical simulations of `M`.
pub fn succ_probability(game: &GameEnsemble, rho: &State, m: &POVMSet) -> Result<GameValue, GameError> {
    optimize(game, rho, m, Goal::Discriminate)
}

/// Smallest error probability over classical simulations of `M`.
pub fn err_probability(game: &GameEnsemble, rho: &State, m: &POVMSet) -> Result<GameValue, GameError> {
    optimize(game, rho, m, Goal::Exclude)
}

/// Probability that the guess matches the label under a given strategy:
/// `sum_{b,y} p(y) tr[N_{b|y} phi_{b|y}(rho)]` with `N = simulate(M, strat)`.
/// The strategy's output labels run over all outcomes, multiplicities
/// expanded.
pub fn strategy_value(game: &GameEnsemble, rho: &State, m: &POVMSet, strat: &Strategy) -> Result<f64, GameError> {
    check_shapes(game, rho, m)?;
    let inst = game.instruments();
    let labels = inst.outcomes() as usize;
    let n = crate::objects::simulate(m, strat, inst.settings(), labels)?;
    let mut total = 0.0;
    for (y, p) in game.prior().iter().enumerate() {
        let mut b = 0;
        for g in inst.groups(y) {
            let out = g.map.apply(rho)?;
            for _ in 0..g.multiplicity {
                total += p * trace_inner(n.effect(y, b), &out)?;
                b += 1;
            }
        }
    }
    Ok(total)
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_prior(p: &[f64], kappa: usize) -> Result<(), GameError> {
    if p.len() != kappa {
        return Err(GameError::DimensionMismatch(format!("p_X has {} entries, expected {kappa}", p.len())));
    }
    if p.iter().any(|v| !(*v > 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(GameError::BadParameter("p_X must be strictly positive and sum to 1".into()));
    }
    Ok(())
}

fn trace_sum(z: &[HermitianOperator]) -> f64 {
    z.iter().map(HermitianOperator::trace).sum()
}

/// Everything needed to recheck a discrimination game built from robustness
/// witnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscGameCertificate {
    pub alpha: f64,
    pub j: u64,
    pub chi: State,
    pub p_x: Vec<f64>,
    /// Normalized state and measurement-set quantifiers.
    pub state: QuantifierResult,
    pub povm_set: QuantifierResult,
}

impl DiscGameCertificate {
    pub fn robustness_state(&self) -> f64 {
        self.state.value
    }

    pub fn robustness_povm_set(&self) -> f64 {
        self.povm_set.value
    }

    /// `(1 + R_F(rho)) (1 + R_F(M))`.
    pub fn target(&self) -> f64 {
        (1.0 + self.state.value) * (1.0 + self.povm_set.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExclGameCertificate {
    pub beta: f64,
    pub xi_states: Vec<State>,
    /// Settings whose `xi` fell back to the maximally mixed state.
    pub degenerate_xi: Vec<usize>,
    pub pb_given_y: Vec<Vec<f64>>,
    pub p_x: Vec<f64>,
    pub state: QuantifierResult,
    pub povm_set: QuantifierResult,
}

impl ExclGameCertificate {
    /// `(1 - W_F(rho)) (1 - W_F(M))`.
    pub fn target(&self) -> f64 {
        (1.0 - self.state.value) * (1.0 - self.povm_set.value)
    }
}

/// Discrimination game from normalized robustness witnesses, with `J`
/// garbage outcomes stored as one group of multiplicity `J`.
pub fn build_disc_game_from(
    state: &QuantifierResult,
    povm_set: &QuantifierResult,
    p_x: &[f64],
    j: u64,
    chi: &State,
) -> Result<(GameEnsemble, DiscGameCertificate), GameError> {
    if state.value <= FREE_TOL && povm_set.value <= FREE_TOL {
        return Err(GameError::FreeInputGame);
    }
    if j == 0 {
        return Err(GameError::BadParameter("J must be positive".into()));
    }
    let zr = state
        .witness
        .as_state()
        .ok_or_else(|| GameError::DimensionMismatch("state witness expected".into()))?;
    let zm = povm_set
        .witness
        .as_povm_set()
        .ok_or_else(|| GameError::DimensionMismatch("measurement witness expected".into()))?;
    let kappa = zm.len();
    check_prior(p_x, kappa)?;
    if chi.dim() != zm[0][0].dim() {
        return Err(GameError::DimensionMismatch("chi must live on the output space".into()));
    }
    let norm = operator_norm(zr)?;
    let trace_zm: f64 = zm.iter().zip(p_x).map(|(row, p)| trace_sum(row) / p).sum();
    if !(norm > 0.0 && trace_zm > 0.0) {
        return Err(GameError::FreeInputGame);
    }
    let alpha = 1.0 / (norm * trace_zm);
    let d = zr.dim();
    let e = zr.scale(alpha);
    let mut groups = Vec::with_capacity(kappa);
    for (y, row) in zm.iter().enumerate() {
        let mut g: Vec<OutcomeGroup> = row
            .iter()
            .map(|z| Subchannel::measure_prepare(e.clone(), z.scale(1.0 / p_x[y])).map(OutcomeGroup::single))
            .collect::<Result<_, _>>()?;
        let c = trace_sum(row) / p_x[y];
        let garbage = HermitianOperator::identity(d).add_scaled(-alpha * c, zr).scale(1.0 / j as f64);
        g.push(OutcomeGroup {
            map: Subchannel::measure_prepare(garbage, chi.matrix().clone())?,
            multiplicity: j,
        });
        groups.push(g);
    }
    let game = GameEnsemble::new(p_x.to_vec(), InstrumentSet::new(groups)?)?;
    Ok((
        game,
        DiscGameCertificate {
            alpha,
            j,
            chi: chi.clone(),
            p_x: p_x.to_vec(),
            state: state.clone(),
            povm_set: povm_set.clone(),
        },
    ))
}

/// Solves both robustness programs, normalizes the witnesses and builds the
/// discrimination game.
pub fn build_disc_game(
    rho: &State,
    m: &POVMSet,
    free_states: &FreeStateSet,
    free_sets: &FreePOVMSetFamily,
    p_x: &[f64],
    j: u64,
    chi: &State,
) -> Result<(GameEnsemble, DiscGameCertificate), GameError> {
    let rs = normalize_witness(&robustness_state(rho, free_states)?, free_states)?;
    let rm = normalize_witness(&robustness_povmset(m, free_sets)?, free_sets)?;
    build_disc_game_from(&rs, &rm, p_x, j, chi)
}

/// Exclusion game from normalized weight witnesses.
pub fn build_excl_game_from(
    state: &QuantifierResult,
    povm_set: &QuantifierResult,
    p_x: &[f64],
    pb_given_y: &[Vec<f64>],
) -> Result<(GameEnsemble, ExclGameCertificate), GameError> {
    if state.value <= FREE_TOL && povm_set.value <= FREE_TOL {
        return Err(GameError::FreeInputGame);
    }
    let yr = state
        .witness
        .as_state()
        .ok_or_else(|| GameError::DimensionMismatch("state witness expected".into()))?;
    let ym = povm_set
        .witness
        .as_povm_set()
        .ok_or_else(|| GameError::DimensionMismatch("measurement witness expected".into()))?;
    let (kappa, l) = (ym.len(), ym[0].len());
    check_prior(p_x, kappa)?;
    if pb_given_y.len() != kappa || pb_given_y.iter().any(|r| r.len() != l) {
        return Err(GameError::DimensionMismatch("p(b|y) must be kappa x l".into()));
    }
    let norm = operator_norm(yr)?;
    let trace_ym: f64 = ym.iter().zip(p_x).map(|(row, p)| trace_sum(row) / p).sum();
    if !(norm > 0.0 && trace_ym > 0.0) {
        return Err(GameError::FreeInputGame);
    }
    let beta = 1.0 / (2.0 * norm * trace_ym);
    let d = yr.dim();
    let dout = ym[0][0].dim();
    let e = yr.scale(beta);
    let mut groups = Vec::with_capacity(kappa);
    let mut xi_states = Vec::with_capacity(kappa);
    let mut degenerate = Vec::new();
    for (y, row) in ym.iter().enumerate() {
        let mut g: Vec<OutcomeGroup> = row
            .iter()
            .map(|z| Subchannel::measure_prepare(e.clone(), z.scale(1.0 / p_x[y])).map(OutcomeGroup::single))
            .collect::<Result<_, _>>()?;
        let den: f64 = row.iter().zip(&pb_given_y[y]).map(|(z, p)| p * z.trace()).sum();
        let xi = if den < 1e-12 {
            degenerate.push(y);
            State::maximally_mixed(dout)
        } else {
            let num = row
                .iter()
                .zip(&pb_given_y[y])
                .fold(HermitianOperator::zeros(dout), |acc, (z, p)| acc.add_scaled(*p, z));
            crate::resources::clean_state(&num.scale(1.0 / den))
        };
        let c = trace_sum(row) / p_x[y];
        let rest = HermitianOperator::identity(d).add_scaled(-beta * c, yr);
        g.push(OutcomeGroup::single(Subchannel::measure_prepare(rest, xi.matrix().clone())?));
        groups.push(g);
        xi_states.push(xi);
    }
    let game = GameEnsemble::new(p_x.to_vec(), InstrumentSet::new(groups)?)?;
    Ok((
        game,
        ExclGameCertificate {
            beta,
            xi_states,
            degenerate_xi: degenerate,
            pb_given_y: pb_given_y.to_vec(),
            p_x: p_x.to_vec(),
            state: state.clone(),
            povm_set: povm_set.clone(),
        },
    ))
}

pub fn build_excl_game(
    rho: &State,
    m: &POVMSet,
    free_states: &FreeStateSet,
    free_sets: &FreePOVMSetFamily,
    p_x: &[f64],
    pb_given_y: &[Vec<f64>],
) -> Result<(GameEnsemble, ExclGameCertificate), GameError> {
    let ws = normalize_witness(&weight_state(rho, free_states)?, free_states)?;
    let wm = normalize_witness(&weight_povmset(m, free_sets)?, free_sets)?;
    build_excl_game_from(&ws, &wm, p_x, pb_given_y)
}

/// Mass left for the garbage outcomes of setting `y`:
/// `alpha tr[Z eta] tr[sum_b Z_{b|y}] / p(y)` (or the exclusion analogue).
pub fn witness_mass(inst: &InstrumentSet, y: usize, eta: &State, witness_outcomes: usize) -> Result<f64, GameError> {
    let mut t = 0.0;
    for g in inst.groups(y).iter().take(witness_outcomes) {
        t += g.multiplicity as f64 * g.map.apply(eta)?.trace();
    }
    Ok(t)
}

pub(crate) fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn sample_state(free: &FreeStateSet, d: usize, rng: &mut ChaCha8Rng) -> Result<State, GameError> {
    match free {
        FreeStateSet::MaxMixedCone => Ok(State::maximally_mixed(d)),
        FreeStateSet::Incoherent => Ok(State::diagonal(&random_pmf(rng, d))?),
        FreeStateSet::CustomConic(c) => {
            let gens = c
                .generators
                .as_ref()
                .ok_or_else(|| GameError::UnsupportedSampling("custom free states without generators".into()))?;
            let w = random_pmf(rng, gens.len());
            let mix = gens.iter().zip(&w).fold(HermitianOperator::zeros(d), |acc, (g, wi)| {
                acc.add_scaled(wi / g.trace(), g)
            });
            Ok(crate::resources::clean_state(&mix))
        }
    }
}

fn sample_povm_set(
    family: &FreePOVMSetFamily,
    d: usize,
    kappa: usize,
    l: usize,
    rng: &mut ChaCha8Rng,
) -> Result<POVMSet, GameError> {
    match family {
        FreePOVMSetFamily::Compatible => {
            // parent with between l and l^kappa outcomes, deterministic
            // post-processing per setting
            let max_k = CompatibilityModel::new(kappa, l).map(|m| m.len()).unwrap_or(l).max(l);
            let k = rng.random_range(l..=max_k);
            let parent = random_povm_set(d, 1, k, rng.random());
            let mut effects = vec![vec![HermitianOperator::zeros(d); l]; kappa];
            for row in effects.iter_mut() {
                for lam in 0..k {
                    let a = rng.random_range(0..l);
                    row[a] = row[a].add(parent.effect(0, lam));
                }
            }
            Ok(POVMSet::new(effects)?)
        }
        FreePOVMSetFamily::CustomConic(c) => {
            let gens = c
                .generators
                .as_ref()
                .ok_or_else(|| GameError::UnsupportedSampling("custom free family without generators".into()))?;
            let w = random_pmf(rng, gens.len());
            let effects: Vec<Vec<HermitianOperator>> = (0..kappa)
                .map(|x| {
                    (0..l)
                        .map(|a| {
                            gens.iter()
                                .zip(&w)
                                .fold(HermitianOperator::zeros(d), |acc, (g, wi)| acc.add_scaled(*wi, g.effect(x, a)))
                        })
                        .collect()
                })
                .collect();
            Ok(crate::resources::clean_povm_set(&effects))
        }
    }
}

/// Random free pairs, deterministic per seed.
pub fn sample_free_pairs(
    free_states: &FreeStateSet,
    free_sets: &FreePOVMSetFamily,
    d: usize,
    kappa: usize,
    l: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<(State, POVMSet)>, GameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = sample_state(free_states, d, &mut rng)?;
            let m = sample_povm_set(free_sets, d, kappa, l, &mut rng)?;
            Ok((s, m))
        })
        .collect()
}

/// Result of the generic-game check on one random game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenericGameCheck {
    pub seed: u64,
    /// Value on the resourceful pair.
    pub resource_value: f64,
    /// Best (discrimination) or worst (exclusion) value over free pairs.
    pub free_value: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Timings {
    pub quantifiers_ms: f64,
    pub samples_ms: f64,
    pub generic_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub result: String,
    pub state_value: f64,
    pub povm_set_value: f64,
    /// `alpha` for discrimination, `beta` for exclusion.
    pub coefficient: f64,
    pub j: Option<u64>,
    /// Game value on the resourceful pair.
    pub numerator: f64,
    /// `alpha * target` or `beta * target`.
    pub certificate_bound: f64,
    pub certificate_ok: bool,
    /// `alpha + 1/J` or `beta`.
    pub analytic_denominator: f64,
    /// Extremum of the game value over the sampled free pairs.
    pub empirical_denominator: f64,
    pub empirical_ok: bool,
    /// `numerator / analytic_denominator`.
    pub ratio: f64,
    pub target: f64,
    /// Ratio against the bound that holds at finite `J`.
    pub ratio_ok: bool,
    /// Ratio against `target (1 - 2/J - 1e-6)`; discrimination only.
    pub strict_ratio_ok: Option<bool>,
    pub generic: Vec<GenericGameCheck>,
    pub generic_ok: bool,
    pub sample_values: Vec<f64>,
    pub passed: bool,
    #[serde(skip)]
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub j: u64,
    pub n_samples: usize,
    pub n_games: usize,
    pub seed: u64,
    /// Defaults to the maximally mixed state.
    pub chi: Option<State>,
    /// Defaults to uniform.
    pub p_x: Option<Vec<f64>>,
    /// Defaults to uniform.
    pub pb_given_y: Option<Vec<Vec<f64>>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            j: DEFAULT_J,
            n_samples: 200,
            n_games: DEFAULT_GENERIC_GAMES,
            seed: 0,
            chi: None,
            p_x: None,
            pb_given_y: None,
        }
    }
}

pub(crate) fn sub_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

pub(crate) fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Free pairs for evaluation: the decomposition optimizers first, then
/// random samples.
fn free_pairs(
    state: &QuantifierResult,
    povm_set: &QuantifierResult,
    free_states: &FreeStateSet,
    free_sets: &FreePOVMSetFamily,
    m: &POVMSet,
    n: usize,
    seed: u64,
) -> Result<Vec<(State, POVMSet)>, GameError> {
    let mut pairs = vec![(
        state.free_state().expect("state result"),
        povm_set.free_povm_set().expect("measurement result"),
    )];
    pairs.extend(sample_free_pairs(
        free_states,
        free_sets,
        m.dim(),
        m.settings(),
        m.outcomes(),
        n,
        seed,
    )?);
    Ok(pairs)
}

fn generic_checks(
    rho: &State,
    m: &POVMSet,
    pairs: &[(State, POVMSet)],
    target: f64,
    n_games: usize,
    seed: u64,
    goal: Goal,
) -> Result<Vec<GenericGameCheck>, GameError> {
    sub_seeds(seed ^ 0x9e37_79b9_7f4a_7c15, n_games)
        .into_par_iter()
        .map(|s| {
            let outcomes = m.outcomes().max(2);
            let game = GameEnsemble::uniform(random_instrument_set(rho.dim(), m.settings(), outcomes, s));
            let eval = |r: &State, n: &POVMSet| -> Result<f64, GameError> {
                Ok(match goal {
                    Goal::Discriminate => succ_probability(&game, r, n)?.value,
                    Goal::Exclude => err_probability(&game, r, n)?.value,
                })
            };
            let resource_value = eval(rho, m)?;
            let vals: Vec<f64> = pairs.iter().map(|(r, n)| eval(r, n)).collect::<Result<_, _>>()?;
            let (free_value, ok) = match goal {
                Goal::Discriminate => {
                    let f = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (f, resource_value <= target * f * (1.0 + 1e-6))
                }
                Goal::Exclude => {
                    let f = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    (f, resource_value >= target * f - 1e-6)
                }
            };
            Ok(GenericGameCheck {
                seed: s,
                resource_value,
                free_value,
                ok,
            })
        })
        .collect()
}

/// Checks the discrimination advantage bound at finite `J`.
pub fn verify_result1(
    rho: &State,
    m: &POVMSet,
    free_states: &FreeStateSet,
    free_sets: &FreePOVMSetFamily,
    opts: &VerifyOptions,
) -> Result<VerificationReport, GameError> {
    let t0 = Instant::now();
    let rs = normalize_witness(&robustness_state(rho, free_states)?, free_states)?;
    let rm = normalize_witness(&robustness_povmset(m, free_sets)?, free_sets)?;
    let quantifiers_ms = ms(t0);
    let p_x = opts.p_x.clone().unwrap_or_else(|| uniform(m.settings()));
    let chi = opts.chi.clone().unwrap_or_else(|| State::maximally_mixed(m.dim()));
    let (game, cert) = build_disc_game_from(&rs, &rm, &p_x, opts.j, &chi)?;
    let alpha = cert.alpha;
    let target = cert.target();
    let numerator = succ_probability(&game, rho, m)?.value;
    let certificate_bound = alpha * target;
    let analytic = alpha + 1.0 / opts.j as f64;

    let t1 = Instant::now();
    let pairs = free_pairs(&rs, &rm, free_states, free_sets, m, opts.n_samples, opts.seed)?;
    let sample_values: Vec<f64> = pairs
        .par_iter()
        .map(|(s, n)| succ_probability(&game, s, n).map(|v| v.value))
        .collect::<Result<_, _>>()?;
    let samples_ms = ms(t1);
    let empirical = sample_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ratio = numerator / analytic;

    let t2 = Instant::now();
    let generic = generic_checks(rho, m, &pairs, target, opts.n_games, opts.seed, Goal::Discriminate)?;
    let generic_ms = ms(t2);

    let certificate_ok = numerator >= certificate_bound - 1e-7;
    let empirical_ok = empirical <= analytic + 1e-9;
    let ratio_ok = ratio >= target * alpha / analytic * (1.0 - 1e-6);
    let strict = ratio >= target * (1.0 - 2.0 / opts.j as f64 - 1e-6);
    let generic_ok = generic.iter().all(|g| g.ok);
    Ok(VerificationReport {
        result: "result1".into(),
        state_value: rs.value,
        povm_set_value: rm.value,
        coefficient: alpha,
        j: Some(opts.j),
        numerator,
        certificate_bound,
        certificate_ok,
        analytic_denominator: analytic,
        empirical_denominator: empirical,
        empirical_ok,
        ratio,
        target,
        ratio_ok,
        strict_ratio_ok: Some(strict),
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

/// Checks the exclusion advantage bound.
pub fn verify_result2(
    rho: &State,
    m: &POVMSet,
    free_states: &FreeStateSet,
    free_sets: &FreePOVMSetFamily,
    opts: &VerifyOptions,
) -> Result<VerificationReport, GameError> {
    let t0 = Instant::now();
    let ws = normalize_witness(&weight_state(rho, free_states)?, free_states)?;
    let wm = normalize_witness(&weight_povmset(m, free_sets)?, free_sets)?;
    let quantifiers_ms = ms(t0);
    let p_x = opts.p_x.clone().unwrap_or_else(|| uniform(m.settings()));
    let pb = opts
        .pb_given_y
        .clone()
        .unwrap_or_else(|| vec![uniform(m.outcomes()); m.settings()]);
    let (game, cert) = build_excl_game_from(&ws, &wm, &p_x, &pb)?;
    let beta = cert.beta;
    let target = cert.target();
    let numerator = err_probability(&game, rho, m)?.value;
    let certificate_bound = beta * target;

    let t1 = Instant::now();
    let pairs = free_pairs(&ws, &wm, free_states, free_sets, m, opts.n_samples, opts.seed)?;
    let sample_values: Vec<f64> = pairs
        .par_iter()
        .map(|(s, n)| err_probability(&game, s, n).map(|v| v.value))
        .collect::<Result<_, _>>()?;
    let samples_ms = ms(t1);
    let empirical = sample_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = numerator / beta;

    let t2 = Instant::now();
    let generic = generic_checks(rho, m, &pairs, target, opts.n_games, opts.seed, Goal::Exclude)?;
    let generic_ms = ms(t2);

    let certificate_ok = numerator <= certificate_bound + 1e-7;
    let empirical_ok = empirical >= beta - 1e-9;
    let ratio_ok = ratio <= target + 1e-6;
    let generic_ok = generic.iter().all(|g| g.ok);
    Ok(VerificationReport {
        result: "result2".into(),
        state_value: ws.value,
        povm_set_value: wm.value,
        coefficient: beta,
        j: None,
        numerator,
        certificate_bound,
        certificate_ok,
        analytic_denominator: beta,
        empirical_denominator: empirical,
        empirical_ok,
        ratio,
        target,
        ratio_ok,
        strict_ratio_ok: None,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::noisy_mub_pair;

    #[test]
    fn identity_channel_single_label() {
        let game = GameEnsemble::uniform(InstrumentSet::identity(2, 2));
        let v = succ_probability(&game, &crate::objects::random_state(2, 1), &random_povm_set(2, 2, 2, 2)).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blind_guess_with_trivial_measurement() {
        let game = GameEnsemble::uniform(random_instrument_set(2, 2, 3, 5));
        let rho = crate::objects::random_state(2, 6);
        let m = POVMSet::trivial(2, 1, 1);
        let v = succ_probability(&game, &rho, &m).unwrap();
        let mut expect = 0.0;
        for y in 0..2 {
            let best = game
                .instruments()
                .groups(y)
                .iter()
                .map(|g| g.map.apply(&rho).unwrap().trace())
                .fold(f64::NEG_INFINITY, f64::max);
            expect += 0.5 * best;
        }
        assert!((v.value - expect).abs() < 1e-12);
    }

    #[test]
    fn disc_game_fixture() {
        let rho = State::basis(2, 0);
        let m = noisy_mub_pair(1.0).unwrap();
        let (game, cert) = build_disc_game(
            &rho,
            &m,
            &FreeStateSet::MaxMixedCone,
            &FreePOVMSetFamily::Compatible,
            &[0.5, 0.5],
            DEFAULT_J,
            &State::maximally_mixed(2),
        )
        .unwrap();
        let v = succ_probability(&game, &rho, &m).unwrap().value;
        assert!(v >= cert.alpha * cert.target() - 1e-7);
    }

    #[test]
    fn free_inputs_rejected() {
        let err = build_disc_game(
            &State::maximally_mixed(2),
            &noisy_mub_pair(0.3).unwrap(),
            &FreeStateSet::MaxMixedCone,
            &FreePOVMSetFamily::Compatible,
            &[0.5, 0.5],
            10,
            &State::maximally_mixed(2),
        );
        assert!(matches!(err, Err(GameError::FreeInputGame)));
    }
}

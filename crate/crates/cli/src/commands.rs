use serde_json::{json, Value};

use resource_games::games::{
    build_disc_game, build_excl_game, err_probability, succ_probability, verify_result1, verify_result2,
    DiscGameCertificate, ExclGameCertificate, GameValue, VerificationReport, VerifyOptions, DEFAULT_GENERIC_GAMES, DEFAULT_J,
};
use resource_games::gpt::{
    gpt_normalize_witness, gpt_robustness_mset, gpt_robustness_state, gpt_weight_mset, gpt_weight_state,
    verify_result3, GPTModel, GPTModelJson, GptFreeMeasurements, GptFreeStates, GptMeasurementSet, GptState,
    GptVerifyOptions,
};
use resource_games::json::{game_from_str, povm_set_from_str, state_from_str, GameJson, StateJson};
use resource_games::objects::{random_state, State};
use resource_games::resources::{
    normalize_witness, robustness_povmset, robustness_state, weight_povmset, weight_state, FreePOVMSetFamily,
    FreeStateSet,
};

use crate::config::{ExperimentConfig, FreeVariant, Kind, ObjectType, DEFAULT_SAMPLES};
use crate::error::{CliError, ExitKind};
use crate::report::{Inputs, Source};

/// What a command produced, before it is wrapped into a report.
pub struct Outcome {
    pub result: Value,
    pub inputs: Inputs,
    pub timings: Value,
    /// Set when the report is written but the run must still fail.
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(result: Value, inputs: Inputs) -> Self {
        Self {
            result,
            inputs,
            timings: json!({}),
            failure: None,
        }
    }
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

fn file(path: &Option<std::path::PathBuf>, flag: &str) -> Result<Source, CliError> {
    Ok(Source::File(required(path, flag)?.clone()))
}

fn free_states(v: Option<FreeVariant>) -> Result<FreeStateSet, CliError> {
    match v.unwrap_or(FreeVariant::MaxMixed) {
        FreeVariant::MaxMixed => Ok(FreeStateSet::MaxMixedCone),
        FreeVariant::Incoherent => Ok(FreeStateSet::Incoherent),
        other => Err(CliError::usage(format!("{other:?} is not a free state set"))),
    }
}

fn free_sets(v: Option<FreeVariant>) -> Result<FreePOVMSetFamily, CliError> {
    match v.unwrap_or(FreeVariant::Compatible) {
        FreeVariant::Compatible => Ok(FreePOVMSetFamily::Compatible),
        other => Err(CliError::usage(format!("{other:?} is not a free measurement family"))),
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CliError> {
    Ok(serde_json::from_str(text)?)
}

fn load_model(inputs: &mut Inputs, src: &Source) -> Result<GPTModel, CliError> {
    let j: GPTModelJson = parse(&inputs.read("model", src)?)?;
    Ok(GPTModel::from_json(&j)?)
}

fn load_gpt_state(inputs: &mut Inputs, role: &str, src: &Source, model: &GPTModel) -> Result<GptState, CliError> {
    Ok(model.state(parse(&inputs.read(role, src)?)?)?)
}

fn load_gpt_mset(inputs: &mut Inputs, src: &Source, model: &GPTModel) -> Result<GptMeasurementSet, CliError> {
    Ok(model.measurement_set(parse(&inputs.read("povmset", src)?)?)?)
}

fn gpt_free_states(cfg: &ExperimentConfig, inputs: &mut Inputs, model: &GPTModel) -> Result<GptFreeStates, CliError> {
    match &cfg.free_generators {
        Some(p) => {
            let gens: Vec<Vec<f64>> = parse(&inputs.read("free_generators", &Source::File(p.clone()))?)?;
            Ok(GptFreeStates::new(model, gens)?)
        }
        None => Ok(GptFreeStates::center(model)),
    }
}

pub fn quantify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::default();
    let src = file(&cfg.input, "input")?;
    let kind = cfg.kind.unwrap_or(Kind::Robustness);
    let object = cfg.object.unwrap_or(ObjectType::State);
    let robust = kind == Kind::Robustness;
    let result = match object {
        ObjectType::State => {
            let rho = state_from_str(&inputs.read("input", &src)?)?;
            let free = free_states(cfg.free)?;
            let r = if robust {
                robustness_state(&rho, &free)?
            } else {
                weight_state(&rho, &free)?
            };
            normalize_witness(&r, &free)?.to_json()
        }
        ObjectType::Povmset => {
            let m = povm_set_from_str(&inputs.read("input", &src)?)?;
            let free = free_sets(cfg.free)?;
            let r = if robust {
                robustness_povmset(&m, &free)?
            } else {
                weight_povmset(&m, &free)?
            };
            normalize_witness(&r, &free)?.to_json()
        }
        ObjectType::GptState | ObjectType::GptMset => {
            let model = load_model(&mut inputs, &file(&cfg.model, "model")?)?;
            let expected = if object == ObjectType::GptState {
                FreeVariant::Center
            } else {
                FreeVariant::Compatible
            };
            if cfg.free.is_some_and(|f| f != expected) {
                return Err(CliError::usage(format!("{:?} is not a free family for {object:?}", cfg.free.unwrap())));
            }
            let free = gpt_free_states(cfg, &mut inputs, &model)?;
            let r = if object == ObjectType::GptState {
                let w = load_gpt_state(&mut inputs, "input", &src, &model)?;
                if robust {
                    gpt_robustness_state(&model, &w, &free)?
                } else {
                    gpt_weight_state(&model, &w, &free)?
                }
            } else {
                let j: Vec<Vec<Vec<f64>>> = parse(&inputs.read("input", &src)?)?;
                let e = model.measurement_set(j)?;
                if robust {
                    gpt_robustness_mset(&model, &e, GptFreeMeasurements::Compatible)?
                } else {
                    gpt_weight_mset(&model, &e, GptFreeMeasurements::Compatible)?
                }
            };
            gpt_normalize_witness(&model, &r, &free)?.to_json()
        }
    };
    Ok(Outcome::ok(result, inputs))
}

fn disc_certificate_json(c: &DiscGameCertificate) -> Value {
    json!({
        "kind": "discrimination",
        "alpha": c.alpha,
        "j": c.j,
        "chi": StateJson::from_state(&c.chi),
        "p_x": c.p_x,
        "state": c.state.to_json(),
        "povm_set": c.povm_set.to_json(),
        "target": c.target(),
        "bound": c.alpha * c.target(),
    })
}

/// Game values below this count as perfect exclusion.
const PERFECT_EXCLUSION_TOL: f64 = 1e-6;

fn excl_certificate_json(c: &ExclGameCertificate) -> Value {
    json!({
        "kind": "exclusion",
        "beta": c.beta,
        "xi_states": c.xi_states.iter().map(StateJson::from_state).collect::<Vec<_>>(),
        "degenerate_xi": c.degenerate_xi,
        "pb_given_y": c.pb_given_y,
        "p_x": c.p_x,
        "state": c.state.to_json(),
        "povm_set": c.povm_set.to_json(),
        "target": c.target(),
        "bound": c.beta * c.target(),
        "perfect_exclusion": c.target() <= PERFECT_EXCLUSION_TOL,
    })
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn garbage_state(cfg: &ExperimentConfig, inputs: &mut Inputs, d: usize) -> Result<State, CliError> {
    let chi = match (&cfg.chi, cfg.seed) {
        (Some(p), _) => state_from_str(&inputs.read("chi", &Source::File(p.clone()))?)?,
        (None, Some(seed)) => random_state(d, seed),
        (None, None) => State::maximally_mixed(d),
    };
    if chi.dim() != d {
        return Err(CliError::usage(format!("garbage state has dimension {}, expected {d}", chi.dim())));
    }
    Ok(chi)
}

pub fn build_game(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::default();
    let rho = state_from_str(&inputs.read("state", &file(&cfg.state, "state")?)?)?;
    let m = povm_set_from_str(&inputs.read("povmset", &file(&cfg.povmset, "povmset")?)?)?;
    let fs = free_states(cfg.free_states)?;
    let fm = free_sets(cfg.free_sets)?;
    let p_x = uniform(m.settings());
    let result = if cfg.exclusion.unwrap_or(false) {
        let pb = vec![uniform(m.outcomes()); m.settings()];
        let (game, cert) = build_excl_game(&rho, &m, &fs, &fm, &p_x, &pb)?;
        json!({ "game": GameJson::from_game(&game), "certificate": excl_certificate_json(&cert) })
    } else {
        let chi = garbage_state(cfg, &mut inputs, m.dim())?;
        let (game, cert) = build_disc_game(&rho, &m, &fs, &fm, &p_x, cfg.j.unwrap_or(DEFAULT_J), &chi)?;
        json!({ "game": GameJson::from_game(&game), "certificate": disc_certificate_json(&cert) })
    };
    Ok(Outcome::ok(result, inputs))
}

fn game_value_json(mode: &str, v: &GameValue) -> Value {
    json!({
        "mode": mode,
        "value": v.value,
        "optimal_strategy": {
            "x_of_y": v.optimal_strategy.x_of_y,
            "g_of_ay": v.optimal_strategy.g_of_ay,
        },
        "per_setting_values": v.per_setting_values,
    })
}

pub fn play(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::default();
    let text = inputs.read("game", &file(&cfg.game, "game")?)?;
    // accepts a bare game or the output of build-game
    let mut v: Value = parse(&text)?;
    let game = match v.get_mut("game") {
        Some(inner) => game_from_str(&inner.take().to_string())?,
        None => game_from_str(&text)?,
    };
    let rho = state_from_str(&inputs.read("state", &file(&cfg.state, "state")?)?)?;
    let m = povm_set_from_str(&inputs.read("povmset", &file(&cfg.povmset, "povmset")?)?)?;
    let result = if cfg.exclusion.unwrap_or(false) {
        game_value_json("exclusion", &err_probability(&game, &rho, &m)?)
    } else {
        game_value_json("discrimination", &succ_probability(&game, &rho, &m)?)
    };
    Ok(Outcome::ok(result, inputs))
}

/// Failed inequalities of one branch, by name.
fn violations(rep: &VerificationReport) -> Vec<String> {
    let disc = rep.j.is_some();
    let mut out = Vec::new();
    let mut check = |ok: bool, disc_name: &str, excl_name: &str| {
        if !ok {
            let name = if disc { disc_name } else { excl_name };
            out.push(format!("{}: {name}", rep.result));
        }
    };
    check(
        rep.certificate_ok,
        "numerator >= alpha * target - 1e-7",
        "numerator <= beta * target + 1e-7",
    );
    check(
        rep.empirical_ok,
        "free-pair values <= alpha + 1/J + 1e-9",
        "free-pair values >= beta - 1e-9",
    );
    check(
        rep.ratio_ok,
        "numerator / (alpha + 1/J) >= target * alpha / (alpha + 1/J) * (1 - 1e-6)",
        "numerator / beta <= target + 1e-6",
    );
    check(
        rep.generic_ok,
        "random-game value <= target * best free value * (1 + 1e-6)",
        "random-game value >= target * worst free value - 1e-6",
    );
    out
}

fn summary_line(rep: &VerificationReport) -> String {
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    format!(
        "{:<26} R/W state {:>10.6}  R/W set {:>10.6}  coeff {:>10.6}  numerator {:>10.6}  ratio {:>10.6}  target {:>10.6}  certificate {:<4}  samples {:<4}  ratio {:<4}  generic {:<4}",
        rep.result,
        rep.state_value,
        rep.povm_set_value,
        rep.coefficient,
        rep.numerator,
        rep.ratio,
        rep.target,
        mark(rep.certificate_ok),
        mark(rep.empirical_ok),
        mark(rep.ratio_ok),
        mark(rep.generic_ok),
    )
}

fn timings_json(reps: &[&VerificationReport]) -> Value {
    json!(reps
        .iter()
        .map(|r| (r.result.clone(), json!(r.timings)))
        .collect::<serde_json::Map<_, _>>())
}

pub fn verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let result = *required(&cfg.result, "result")?;
    let n_samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let n_games = cfg.games.unwrap_or(DEFAULT_GENERIC_GAMES);
    if n_samples == 0 {
        return Err(CliError::usage("--samples must be at least 1"));
    }
    if n_games == 0 {
        return Err(CliError::usage("--games must be at least 1"));
    }
    let j = cfg.j.unwrap_or(DEFAULT_J);
    if j == 0 {
        return Err(CliError::usage("--j must be at least 1"));
    }
    let seed = cfg.seed.unwrap_or(0);
    let mut inputs = Inputs::default();
    let (value, reps) = match result {
        1 | 2 => {
            let default_state = if result == 1 { "qubit_zero.json" } else { "qubit_diag_3_1.json" };
            let rho = state_from_str(&inputs.read("state", &Source::or_builtin(&cfg.state, default_state))?)?;
            let m = povm_set_from_str(&inputs.read("povmset", &Source::or_builtin(&cfg.povmset, "sharp_mub_pair.json"))?)?;
            let fs = free_states(cfg.free_states)?;
            let fm = free_sets(cfg.free_sets)?;
            let chi = match &cfg.chi {
                Some(p) => Some(state_from_str(&inputs.read("chi", &Source::File(p.clone()))?)?),
                None => None,
            };
            let opts = VerifyOptions {
                j,
                n_samples,
                n_games,
                seed,
                chi,
                ..VerifyOptions::default()
            };
            let rep = if result == 1 {
                verify_result1(&rho, &m, &fs, &fm, &opts)?
            } else {
                verify_result2(&rho, &m, &fs, &fm, &opts)?
            };
            (serde_json::to_value(&rep).expect("plain data"), vec![rep])
        }
        3 => {
            let model = load_model(&mut inputs, &Source::or_builtin(&cfg.model, "gbit.json"))?;
            let w = load_gpt_state(&mut inputs, "state", &Source::or_builtin(&cfg.state, "gbit_vertex.json"), &model)?;
            let e = load_gpt_mset(&mut inputs, &Source::or_builtin(&cfg.povmset, "gbit_coordinate_pair.json"), &model)?;
            let free = gpt_free_states(cfg, &mut inputs, &model)?;
            let chi = match &cfg.chi {
                Some(p) => Some(load_gpt_state(&mut inputs, "chi", &Source::File(p.clone()), &model)?),
                None => None,
            };
            let opts = GptVerifyOptions {
                j,
                n_samples,
                n_games,
                seed,
                chi,
            };
            let rep = verify_result3(&model, &w, &e, &free, &opts)?;
            (
                serde_json::to_value(&rep).expect("plain data"),
                vec![rep.discrimination, rep.exclusion],
            )
        }
        other => return Err(CliError::usage(format!("--result must be 1, 2 or 3, got {other}"))),
    };
    for rep in &reps {
        eprintln!("{}", summary_line(rep));
    }
    let violated: Vec<String> = reps.iter().flat_map(violations).collect();
    let failure = (!violated.is_empty()).then(|| CliError {
        kind: ExitKind::Verification,
        message: format!("{} inequality check(s) failed", violated.len()),
        violated,
    });
    Ok(Outcome {
        result: value,
        inputs,
        timings: timings_json(&reps.iter().collect::<Vec<_>>()),
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use resource_games::games::Timings;

    fn report(j: Option<u64>) -> VerificationReport {
        VerificationReport {
            result: "result1".into(),
            state_value: 1.0,
            povm_set_value: 0.2,
            coefficient: 0.2,
            j,
            numerator: 0.4,
            certificate_bound: 0.48,
            certificate_ok: false,
            analytic_denominator: 0.2001,
            empirical_denominator: 0.2,
            empirical_ok: true,
            ratio: 2.0,
            target: 2.4,
            ratio_ok: true,
            strict_ratio_ok: None,
            generic: Vec::new(),
            generic_ok: false,
            sample_values: Vec::new(),
            passed: false,
            timings: Timings::default(),
        }
    }

    #[test]
    fn failed_checks_are_named() {
        let v = violations(&report(Some(10)));
        assert_eq!(v.len(), 2);
        assert!(v[0].contains("alpha * target"));
        assert!(v[1].starts_with("result1: random-game"));
        let v = violations(&report(None));
        assert!(v[0].contains("beta * target"));
    }
}

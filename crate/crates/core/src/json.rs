//! JSON forms of the quantum objects. Complex entries are `[re, im]` pairs
//! and matrices are arrays of rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Complex64, ComplexMatrix, HermitianOperator, LinalgError};
use crate::objects::{GameEnsemble, InstrumentSet, ObjectError, OutcomeGroup, POVMSet, State, Subchannel};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Object(#[from] ObjectError),
}

/// Matrix as rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl MatrixJson {
    pub fn from_operator(h: &HermitianOperator) -> Self {
        let m = h.matrix();
        MatrixJson(
            (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    pub fn to_operator(&self) -> Result<HermitianOperator, JsonError> {
        let n = self.0.len();
        if self.0.iter().any(|r| r.len() != n) {
            return Err(JsonError::Shape(format!("matrix with {n} rows is not square")));
        }
        let data = self
            .0
            .iter()
            .flatten()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        Ok(HermitianOperator::new(ComplexMatrix::from_row_major(n, n, data)?)?)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

fn check_dim(what: &str, declared: usize, actual: usize) -> Result<(), JsonError> {
    if declared != actual {
        return Err(JsonError::Shape(format!("{what}: declared dimension {declared}, found {actual}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub dim: usize,
    pub matrix: MatrixJson,
}

impl StateJson {
    pub fn from_state(s: &State) -> Self {
        Self {
            dim: s.dim(),
            matrix: MatrixJson::from_operator(s.matrix()),
        }
    }

    pub fn to_state(&self) -> Result<State, JsonError> {
        check_dim("state", self.dim, self.matrix.dim())?;
        Ok(State::new(self.matrix.to_operator()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmSetJson {
    pub dim: usize,
    pub settings: usize,
    pub outcomes: usize,
    /// `effects[x][a]`
    pub effects: Vec<Vec<MatrixJson>>,
}

impl PovmSetJson {
    pub fn from_set(m: &POVMSet) -> Self {
        Self {
            dim: m.dim(),
            settings: m.settings(),
            outcomes: m.outcomes(),
            effects: m
                .effects()
                .iter()
                .map(|s| s.iter().map(MatrixJson::from_operator).collect())
                .collect(),
        }
    }

    pub fn to_set(&self) -> Result<POVMSet, JsonError> {
        check_dim("settings", self.settings, self.effects.len())?;
        let mut effects = Vec::with_capacity(self.settings);
        for row in &self.effects {
            check_dim("outcomes", self.outcomes, row.len())?;
            let mut ops = Vec::with_capacity(row.len());
            for e in row {
                check_dim("effect", self.dim, e.dim())?;
                ops.push(e.to_operator()?);
            }
            effects.push(ops);
        }
        Ok(POVMSet::new(effects)?)
    }
}

fn one() -> u64 {
    1
}

fn is_one(v: &u64) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SubchannelJson {
    #[serde(rename = "mp")]
    MeasurePrepare {
        #[serde(rename = "E")]
        e: MatrixJson,
        #[serde(rename = "K")]
        k: MatrixJson,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        multiplicity: u64,
    },
    #[serde(rename = "choi")]
    Choi {
        #[serde(rename = "C")]
        c: MatrixJson,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        multiplicity: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSetJson {
    pub dim_in: usize,
    pub dim_out: usize,
    pub settings: usize,
    /// Outcome count including multiplicities.
    pub outcomes: u64,
    /// `subchannels[y]`, one entry per group of identical outcomes.
    pub subchannels: Vec<Vec<SubchannelJson>>,
}

impl InstrumentSetJson {
    pub fn from_set(inst: &InstrumentSet) -> Self {
        let subchannels = inst
            .all_groups()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|g| match &g.map {
                        Subchannel::MeasurePrepare { e, k } => SubchannelJson::MeasurePrepare {
                            e: MatrixJson::from_operator(e),
                            k: MatrixJson::from_operator(k),
                            multiplicity: g.multiplicity,
                        },
                        Subchannel::Choi { c, .. } => SubchannelJson::Choi {
                            c: MatrixJson::from_operator(c),
                            multiplicity: g.multiplicity,
                        },
                    })
                    .collect()
            })
            .collect();
        Self {
            dim_in: inst.input_dim(),
            dim_out: inst.output_dim(),
            settings: inst.settings(),
            outcomes: inst.outcomes(),
            subchannels,
        }
    }

    pub fn to_set(&self) -> Result<InstrumentSet, JsonError> {
        check_dim("settings", self.settings, self.subchannels.len())?;
        let mut groups = Vec::with_capacity(self.settings);
        for row in &self.subchannels {
            let mut out = Vec::with_capacity(row.len());
            for sc in row {
                let (map, multiplicity) = match sc {
                    SubchannelJson::MeasurePrepare { e, k, multiplicity } => {
                        check_dim("E", self.dim_in, e.dim())?;
                        check_dim("K", self.dim_out, k.dim())?;
                        (Subchannel::measure_prepare(e.to_operator()?, k.to_operator()?)?, *multiplicity)
                    }
                    SubchannelJson::Choi { c, multiplicity } => {
                        check_dim("C", self.dim_in * self.dim_out, c.dim())?;
                        (Subchannel::choi(c.to_operator()?, self.dim_in)?, *multiplicity)
                    }
                };
                out.push(OutcomeGroup { map, multiplicity });
            }
            groups.push(out);
        }
        let set = InstrumentSet::new(groups)?;
        if set.outcomes() != self.outcomes {
            return Err(JsonError::Shape(format!(
                "declared {} outcomes, subchannels give {}",
                self.outcomes,
                set.outcomes()
            )));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameJson {
    pub prior: Vec<f64>,
    pub instruments: InstrumentSetJson,
}

impl GameJson {
    pub fn from_game(g: &GameEnsemble) -> Self {
        Self {
            prior: g.prior().to_vec(),
            instruments: InstrumentSetJson::from_set(g.instruments()),
        }
    }

    pub fn to_game(&self) -> Result<GameEnsemble, JsonError> {
        Ok(GameEnsemble::new(self.prior.clone(), self.instruments.to_set()?)?)
    }
}

pub fn state_from_str(s: &str) -> Result<State, JsonError> {
    serde_json::from_str::<StateJson>(s)?.to_state()
}

pub fn povm_set_from_str(s: &str) -> Result<POVMSet, JsonError> {
    serde_json::from_str::<PovmSetJson>(s)?.to_set()
}

pub fn game_from_str(s: &str) -> Result<GameEnsemble, JsonError> {
    serde_json::from_str::<GameJson>(s)?.to_game()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::{random_instrument_set, random_povm_set, random_state};

    #[test]
    fn state_round_trip_is_exact() {
        let s = random_state(3, 5);
        let text = serde_json::to_string(&StateJson::from_state(&s)).unwrap();
        assert_eq!(state_from_str(&text).unwrap(), s);
    }

    #[test]
    fn povm_round_trip_is_exact() {
        let m = random_povm_set(2, 2, 3, 8);
        let text = serde_json::to_string(&PovmSetJson::from_set(&m)).unwrap();
        assert_eq!(povm_set_from_str(&text).unwrap(), m);
    }

    #[test]
    fn game_round_trip_is_exact() {
        let g = GameEnsemble::uniform(random_instrument_set(2, 2, 2, 4));
        let text = serde_json::to_string(&GameJson::from_game(&g)).unwrap();
        assert_eq!(game_from_str(&text).unwrap(), g);
    }

    #[test]
    fn rejects_non_square() {
        let bad = r#"{"dim":2,"matrix":[[[1,0],[0,0]],[[0,0]]]}"#;
        assert!(state_from_str(bad).is_err());
    }
}

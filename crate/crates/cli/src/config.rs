use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use resource_games::games::{DEFAULT_GENERIC_GAMES, DEFAULT_J};

use crate::error::{CliError, ExitKind};

/// Free pairs sampled by `verify` unless configured.
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Robustness,
    Weight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectType {
    State,
    Povmset,
    GptState,
    GptMset,
}

/// Built-in free families. `center` is the barycenter of a polytopic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FreeVariant {
    MaxMixed,
    Incoherent,
    Compatible,
    Center,
}

/// Every parameter of an experiment. Unset fields take command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectType>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free: Option<FreeVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_states: Option<FreeVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_sets: Option<FreeVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_generators: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub povmset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub games: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ExperimentConfig {
    /// Reads a config file; relative paths in it are taken from the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::new(ExitKind::Schema, format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            &mut self.input,
            &mut self.free_generators,
            &mut self.model,
            &mut self.state,
            &mut self.povmset,
            &mut self.game,
            &mut self.chi,
            &mut self.out,
            &mut self.report,
        ]
        .into_iter()
        .flatten()
    }

    /// Fields set in `top` win.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        overlay_fields!(
            self,
            top,
            input,
            kind,
            object,
            free,
            free_states,
            free_sets,
            free_generators,
            model,
            state,
            povmset,
            game,
            chi,
            exclusion,
            result,
            j,
            seed,
            samples,
            games,
            out,
            report
        );
        self
    }

    /// Config file (if any) overlaid with the flags.
    pub fn resolve(file: Option<&Path>, flags: ExperimentConfig) -> Result<Self, CliError> {
        let base = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        Ok(base.overlay(flags))
    }

    /// Fills every unset parameter with the default of `command`, so the
    /// echoed config is complete.
    pub fn with_defaults(mut self, command: &str) -> Self {
        match command {
            "quantify" => {
                self.kind.get_or_insert(Kind::Robustness);
                let object = *self.object.get_or_insert(ObjectType::State);
                if self.free.is_none() {
                    self.free = match object {
                        ObjectType::State => Some(FreeVariant::MaxMixed),
                        ObjectType::Povmset | ObjectType::GptMset => Some(FreeVariant::Compatible),
                        ObjectType::GptState if self.free_generators.is_none() => Some(FreeVariant::Center),
                        ObjectType::GptState => None,
                    };
                }
            }
            "build-game" => {
                self.free_states.get_or_insert(FreeVariant::MaxMixed);
                self.free_sets.get_or_insert(FreeVariant::Compatible);
                if !*self.exclusion.get_or_insert(false) {
                    self.j.get_or_insert(DEFAULT_J);
                }
            }
            "play" => {
                self.exclusion.get_or_insert(false);
            }
            "verify" => {
                self.j.get_or_insert(DEFAULT_J);
                self.samples.get_or_insert(DEFAULT_SAMPLES);
                self.games.get_or_insert(DEFAULT_GENERIC_GAMES);
                self.seed.get_or_insert(0);
                if matches!(self.result, Some(1) | Some(2)) {
                    self.free_states.get_or_insert(FreeVariant::MaxMixed);
                    self.free_sets.get_or_insert(FreeVariant::Compatible);
                }
            }
            _ => {}
        }
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = ExperimentConfig {
            j: Some(10),
            seed: Some(1),
            ..Default::default()
        };
        let flags = ExperimentConfig {
            seed: Some(7),
            ..Default::default()
        };
        let cfg = file.overlay(flags);
        assert_eq!(cfg.j, Some(10));
        assert_eq!(cfg.seed, Some(7));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sede": 3}"#).is_err());
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"free_states": "max-mixed", "result": 1}"#).unwrap();
        assert_eq!(cfg.free_states, Some(FreeVariant::MaxMixed));
    }
}

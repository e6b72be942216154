use std::fmt;

use resource_games::conic::ConicError;
use resource_games::games::GameError;
use resource_games::gpt::GptError;
use resource_games::json::JsonError;
use resource_games::linalg::LinalgError;
use resource_games::objects::ObjectError;
use resource_games::resources::ResourceError;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Schema = 3,
    Solver = 4,
    FreeInput = 5,
    Verification = 6,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn label(self) -> &'static str {
        match self {
            ExitKind::Usage => "validation",
            ExitKind::Schema => "schema",
            ExitKind::Solver => "solver",
            ExitKind::FreeInput => "free-input",
            ExitKind::Verification => "verification",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
    /// Names of the failed inequalities, for verification failures.
    pub violated: Vec<String>,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            violated: Vec::new(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Usage, message)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind.label(),
            "exit_code": self.kind.code(),
            "message": self.message,
        });
        if !self.violated.is_empty() {
            v["violated"] = serde_json::json!(self.violated);
        }
        v
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.label(), self.message)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(ExitKind::Schema, e.to_string())
    }
}

impl From<JsonError> for CliError {
    fn from(e: JsonError) -> Self {
        match e {
            JsonError::Syntax(_) | JsonError::Shape(_) => Self::new(ExitKind::Schema, e.to_string()),
            JsonError::Linalg(_) | JsonError::Object(_) => Self::usage(e.to_string()),
        }
    }
}

impl From<ObjectError> for CliError {
    fn from(e: ObjectError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ConicError> for CliError {
    fn from(e: ConicError) -> Self {
        Self::new(ExitKind::Solver, e.to_string())
    }
}

impl From<ResourceError> for CliError {
    fn from(e: ResourceError) -> Self {
        let kind = match e {
            ResourceError::Conic(_) | ResourceError::Solver(_) | ResourceError::DegenerateWitness { .. } => {
                ExitKind::Solver
            }
            ResourceError::Linalg(_)
            | ResourceError::Object(_)
            | ResourceError::EmptyFreeSet
            | ResourceError::EnumerationCap { .. }
            | ResourceError::DimensionMismatch(_) => ExitKind::Usage,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::Resource(r) => r.into(),
            GameError::FreeInputGame => Self::new(ExitKind::FreeInput, e.to_string()),
            other => Self::usage(other.to_string()),
        }
    }
}

impl From<GptError> for CliError {
    fn from(e: GptError) -> Self {
        match e {
            GptError::Resource(r) => r.into(),
            GptError::Conic(_) | GptError::Solver(_) | GptError::DegenerateWitness(_) => {
                Self::new(ExitKind::Solver, e.to_string())
            }
            GptError::FreeInputGame => Self::new(ExitKind::FreeInput, e.to_string()),
            other => Self::usage(other.to_string()),
        }
    }
}

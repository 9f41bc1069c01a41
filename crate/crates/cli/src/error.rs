use serde_json::{json, Value};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Validation { message: String, pointer: Option<String> },
    Infeasible { message: String, diagnostic: Value },
}

impl CliError {
    pub fn validation(message: impl Into<String>, pointer: Option<String>) -> Self {
        CliError::Validation { message: message.into(), pointer }
    }

    pub fn infeasible(message: impl Into<String>, diagnostic: Value) -> Self {
        CliError::Infeasible { message: message.into(), diagnostic }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::Infeasible { .. } => EXIT_INFEASIBLE,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CliError::Validation { message, pointer } => json!({
                "status": "invalid",
                "error": { "message": message, "pointer": pointer },
            }),
            CliError::Infeasible { message, diagnostic } => json!({
                "status": "infeasible",
                "error": { "message": message, "diagnostic": diagnostic },
            }),
        }
    }
}

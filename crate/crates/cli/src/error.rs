use std::fmt;

use bbm_ldp::{Error, ErrorCategory};

/// A failed run, classified for the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub category: Category,
    /// Finer reason inside the category, e.g. `missing-columns`.
    pub reason: Option<&'static str>,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    ConfigInvalid,
    SolverInstability,
    ParticleCap,
    DomainOverflow,
    AcceptanceFail,
}

impl Category {
    pub fn exit_code(&self) -> i32 {
        match self {
            Category::ConfigInvalid => 2,
            Category::SolverInstability => 3,
            Category::ParticleCap => 4,
            Category::DomainOverflow => 5,
            Category::AcceptanceFail => 6,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::ConfigInvalid => "config-invalid",
            Category::SolverInstability => "solver-instability",
            Category::ParticleCap => "particle-cap",
            Category::DomainOverflow => "domain-overflow",
            Category::AcceptanceFail => "acceptance-fail",
        }
    }
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        CliError {
            category,
            reason: None,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::ConfigInvalid, message)
    }

    pub fn io(context: &str, e: impl fmt::Display) -> Self {
        Self::config(format!("{context}: {e}"))
    }

    pub fn with_reason(mut self, reason: &'static str) -> Self {
        self.reason = Some(reason);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("error".into(), self.category.as_str().into());
        if let Some(r) = self.reason {
            obj.insert("reason".into(), r.into());
        }
        obj.insert("message".into(), self.message.clone().into());
        serde_json::Value::Object(obj).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let category = match e.category() {
            ErrorCategory::Invalid => Category::ConfigInvalid,
            ErrorCategory::Instability => Category::SolverInstability,
            ErrorCategory::ParticleCap => Category::ParticleCap,
            ErrorCategory::DomainOverflow => Category::DomainOverflow,
        };
        let err = CliError::new(category, e.to_string());
        match e {
            Error::InsufficientSamples(_) => err.with_reason("insufficient-samples"),
            _ => err,
        }
    }
}

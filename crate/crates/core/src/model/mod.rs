//! Ports, connections, conditions and the hierarchical behavior model, with
//! parsers for the behavior and application XML files.

mod behavior;
mod condition;
mod network;
mod port;
mod validate;

use std::fmt;

use thiserror::Error;

pub use behavior::{parse_behavior_model, BehaviorModel, BehaviorNode, NodeKind};
pub use condition::{parse_condition, BoolExpr, ConditionError, ConditionErrorKind};
pub use network::{parse_network, Component, NetworkDescription};
pub use port::{Connection, Direction, PortError, PortName};
pub use validate::{apply_auto_observe, missing_observers, validate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("unresolved ${{{0}}}")]
    UnresolvedDefine(String),
    #[error("define `{0}` declared twice")]
    DuplicateDefine(String),
    #[error("duplicate behavior name `{0}`")]
    DuplicateName(String),
    #[error("invalid behavior name `{0}`")]
    InvalidName(String),
    #[error("meta-behavior `{parent}` references unknown behavior `{reference}`")]
    UnknownBehavior { reference: String, parent: String },
    #[error("behavior `{0}` is a child of more than one meta-behavior")]
    MultipleParents(String),
    #[error("meta-behavior reference cycle through `{0}`")]
    ReferenceCycle(String),
    #[error("<{element}> is missing attribute `{attribute}`")]
    MissingAttribute { element: String, attribute: &'static str },
    #[error("unexpected element <{element}> inside `{parent}`")]
    UnexpectedElement { element: String, parent: String },
    #[error("{context}: {source}")]
    Port { context: String, source: PortError },
    #[error("behavior `{behavior}`: condition `{text}`: {source}")]
    Condition {
        behavior: String,
        text: String,
        source: ConditionError,
    },
    #[error("{0}")]
    Structure(String),
    #[error("port `{port}` used by connection {connection} is not declared by any module")]
    UndeclaredPort { port: String, connection: String },
    #[error("port `{0}` declared more than once")]
    DuplicatePort(String),
    #[error("duplicate connection {0}")]
    DuplicateConnection(String),
    #[error("invalid activation window `{0}` (expected a positive number of milliseconds)")]
    InvalidWindow(String),
    #[error("conflicting activation windows for port `{0}`")]
    ConflictingWindow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    /// Behavior name, port, or connection the finding is about.
    pub location: String,
}

impl Diagnostic {
    pub fn error(code: &'static str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            location: location.into(),
        }
    }

    pub fn warning(code: &'static str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            message: message.into(),
            location: location.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{severity}[{}] {}: {}", self.code, self.location, self.message)
    }
}

pub(crate) fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

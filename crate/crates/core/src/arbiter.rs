//! Per-input-port arbitration.
//!
//! A connection is active for `T` milliseconds after each message it
//! delivers, whether or not that message was accepted. When a message
//! arrives the arbiter records the arrival, snapshots the activation state of
//! every incoming source, and evaluates the arriving source's rule against
//! the snapshot. Sources without a rule are observation-only.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdd::{Assignment, BddManager, NodeRef};
use crate::compiler::SelectionRule;
use crate::model::{Connection, PortName};

pub const DEFAULT_WINDOW_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArbiterError {
    #[error("connection {connection} is not incoming to {port}")]
    UnknownConnection { connection: String, port: String },
    #[error("time went backwards: arrival at {t} after {previous}")]
    TimeRegression { previous: u64, t: u64 },
    #[error("rule for {candidate} at {port} has no matching incoming connection")]
    RuleWithoutConnection { candidate: String, port: String },
    #[error("rule for port {rule_port} given to the arbiter of {port}")]
    ForeignRule { rule_port: String, port: String },
}

/// Last arrival time per connection plus the activation window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationTable {
    last_arrival: BTreeMap<Connection, u64>,
    window_ms: u64,
    latest: Option<u64>,
}

impl ActivationTable {
    pub fn new(window_ms: u64) -> Self {
        ActivationTable {
            last_arrival: BTreeMap::new(),
            window_ms,
            latest: None,
        }
    }

    pub fn window_ms(&self) -> u64 {
        self.window_ms
    }

    pub fn record(&mut self, connection: &Connection, t: u64) -> Result<(), ArbiterError> {
        if let Some(previous) = self.latest {
            if t < previous {
                return Err(ArbiterError::TimeRegression { previous, t });
            }
        }
        self.latest = Some(t);
        self.last_arrival.insert(connection.clone(), t);
        Ok(())
    }

    /// Active iff the last arrival is less than the window ago.
    pub fn is_active(&self, connection: &Connection, t: u64) -> bool {
        self.last_arrival
            .get(connection)
            .is_some_and(|&last| t.saturating_sub(last) < self.window_ms)
    }

    pub fn last_arrival(&self, connection: &Connection) -> Option<u64> {
        self.last_arrival.get(connection).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accept,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Selected,
    NoRule,
    ConstraintFalse,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Accept => "accept",
            Outcome::Discard => "discard",
        })
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::Selected => "SELECTED",
            Reason::NoRule => "NO_RULE",
            Reason::ConstraintFalse => "CONSTRAINT_FALSE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub outcome: Outcome,
    pub reason: Reason,
    /// Activation snapshot the rule was evaluated against.
    pub assignment: Assignment,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    node: NodeRef,
    text: String,
}

#[derive(Debug, Clone)]
pub struct PortArbiter {
    port: PortName,
    incoming: Vec<Connection>,
    rules: BTreeMap<PortName, CompiledRule>,
    activation: ActivationTable,
    bdd: BddManager,
}

impl PortArbiter {
    pub fn new<'a>(
        port: PortName,
        incoming: Vec<Connection>,
        window_ms: u64,
        rules: impl IntoIterator<Item = &'a SelectionRule>,
    ) -> Result<Self, ArbiterError> {
        if let Some(c) = incoming.iter().find(|c| c.destination != port) {
            return Err(ArbiterError::UnknownConnection {
                connection: c.to_string(),
                port: port.to_string(),
            });
        }
        let mut bdd = BddManager::with_order(incoming.iter().map(|c| &c.source));
        let mut compiled = BTreeMap::new();
        for rule in rules {
            if rule.port != port {
                return Err(ArbiterError::ForeignRule {
                    rule_port: rule.port.to_string(),
                    port: port.to_string(),
                });
            }
            if !incoming.iter().any(|c| c.source == rule.candidate) {
                return Err(ArbiterError::RuleWithoutConnection {
                    candidate: rule.candidate.to_string(),
                    port: port.to_string(),
                });
            }
            let node = bdd.build(&rule.guard());
            compiled.insert(
                rule.candidate.clone(),
                CompiledRule {
                    node,
                    text: rule.to_string(),
                },
            );
        }
        Ok(PortArbiter {
            port,
            incoming,
            rules: compiled,
            activation: ActivationTable::new(window_ms),
            bdd,
        })
    }

    pub fn port(&self) -> &PortName {
        &self.port
    }

    pub fn incoming(&self) -> &[Connection] {
        &self.incoming
    }

    pub fn activation(&self) -> &ActivationTable {
        &self.activation
    }

    pub fn bdd(&self) -> &BddManager {
        &self.bdd
    }

    pub fn rule_node(&self, candidate: &PortName) -> Option<NodeRef> {
        self.rules.get(candidate).map(|r| r.node)
    }

    pub fn rule_text(&self, candidate: &PortName) -> Option<&str> {
        self.rules.get(candidate).map(|r| r.text.as_str())
    }

    fn check_incoming(&self, connection: &Connection) -> Result<(), ArbiterError> {
        if self.incoming.contains(connection) {
            Ok(())
        } else {
            Err(ArbiterError::UnknownConnection {
                connection: connection.to_string(),
                port: self.port.to_string(),
            })
        }
    }

    /// Marks the connection active from `t`, regardless of what is decided
    /// about the message.
    pub fn record_arrival(&mut self, connection: &Connection, t: u64) -> Result<(), ArbiterError> {
        self.check_incoming(connection)?;
        self.activation.record(connection, t)
    }

    /// One entry per distinct incoming source port; a port fed by several
    /// connections is active if any of them is.
    pub fn activation_snapshot(&self, t: u64) -> Assignment {
        let mut out = Assignment::new();
        for c in &self.incoming {
            let active = self.activation.is_active(c, t);
            *out.entry(c.source.clone()).or_insert(false) |= active;
        }
        out
    }

    /// Accept or discard a message whose arrival has already been recorded.
    pub fn decide(&self, connection: &Connection, t: u64) -> Result<Decision, ArbiterError> {
        self.check_incoming(connection)?;
        let assignment = self.activation_snapshot(t);
        let (outcome, reason) = match self.rules.get(&connection.source) {
            None => (Outcome::Discard, Reason::NoRule),
            Some(rule) if self.bdd.evaluate(rule.node, &assignment) => (Outcome::Accept, Reason::Selected),
            Some(_) => (Outcome::Discard, Reason::ConstraintFalse),
        };
        Ok(Decision {
            outcome,
            reason,
            assignment,
        })
    }

    /// `record_arrival` followed by `decide`.
    pub fn on_message(&mut self, connection: &Connection, t: u64) -> Result<Decision, ArbiterError> {
        self.record_arrival(connection, t)?;
        self.decide(connection, t)
    }
}

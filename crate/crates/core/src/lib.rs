//! Port-arbitrated coordination of component behaviors.
//!
//! A behavior model (which connections each behavior needs, under which
//! condition, and which sibling behaviors it inhibits) is compiled into
//! selection rules for the arbitrator of each input port. Arbitrators keep a
//! timed activation state per incoming connection and accept or discard each
//! arriving message by evaluating its rule as a BDD. [`simnet`] runs the
//! whole thing over scripted components with a deterministic clock.

pub mod arbiter;
pub mod bdd;
pub mod compiler;
pub mod explain;
pub mod fixtures;
pub mod model;
pub mod simnet;

pub use arbiter::{ActivationTable, Decision, Outcome, PortArbiter, Reason};
pub use bdd::{BddManager, BoolOp, NodeRef};
pub use compiler::{check_conflicts, compile, emit_rules, extract_rules, RuleFormat, RuleSet, SelectionRule};
pub use model::{
    parse_behavior_model, parse_condition, parse_network, validate, BehaviorModel, BoolExpr, Connection, Diagnostic,
    NetworkDescription, PortName,
};
pub use simnet::{load_scenario, run, run_until, write_trace, Scenario, Trace, TraceRecord};

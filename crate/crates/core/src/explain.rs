//! Human-readable explanations of trace records.

use thiserror::Error;

use crate::arbiter::Reason;
use crate::model::{parse_condition, BoolExpr, ConditionError, PortName};
use crate::simnet::TraceRecord;

#[derive(Debug, Error)]
#[error("record at t={t} has an unreadable rule `{rule}`: {reason}")]
pub struct ExplainError {
    pub t: u64,
    pub rule: String,
    pub reason: String,
}

fn guard_of(record: &TraceRecord) -> Result<BoolExpr, ExplainError> {
    let fail = |reason: String| ExplainError {
        t: record.t,
        rule: record.rule.clone(),
        reason,
    };
    let (lhs, _) = record
        .rule
        .split_once(" => ")
        .ok_or_else(|| fail("missing `=>`".into()))?;
    parse_condition(lhs).map_err(|e: ConditionError| fail(e.to_string()))
}

/// Earliest time, walking back through records at the same port, since which
/// `port` has been continuously reported active.
fn active_since(records: &[TraceRecord], index: usize, port: &PortName) -> Option<u64> {
    let dst = &records[index].dst;
    let mut since = None;
    for r in records[..=index].iter().rev().filter(|r| &r.dst == dst) {
        if r.assignment.get(port) == Some(&true) {
            since = Some(r.t);
        } else {
            break;
        }
    }
    since
}

fn explain_one(records: &[TraceRecord], index: usize) -> Result<String, ExplainError> {
    let r = &records[index];
    let head = format!("t={} {} -> {}", r.t, r.src, r.dst);
    let value = |p: &PortName| r.assignment.get(p).copied().unwrap_or(false);
    let body = match r.reason {
        Reason::NoRule => format!("discarded: no rule selects {} here (observation only)", r.src),
        Reason::Selected => format!("accepted: rule `{}` holds", guard_of(r)?.render()),
        Reason::ConstraintFalse => {
            let guard = guard_of(r)?;
            let failing: Vec<&BoolExpr> = guard.conjuncts().into_iter().filter(|c| !c.eval(&value)).collect();
            let mut parts: Vec<String> = failing
                .iter()
                .map(|c| format!("constraint `{}` false", c.render()))
                .collect();
            let mut literals: Vec<PortName> = Vec::new();
            for c in &failing {
                for p in c.literals() {
                    if !literals.contains(&p) {
                        literals.push(p);
                    }
                }
            }
            for p in literals {
                parts.push(match active_since(records, index, &p) {
                    Some(t) => format!("{p} active since {t}"),
                    None => format!("{p} inactive"),
                });
            }
            format!("discarded: {}", parts.join("; "))
        }
    };
    Ok(format!("{head}: {body}"))
}

/// Explains every record matching the optional time and port filters.
pub fn explain(records: &[TraceRecord], at: Option<u64>, port: Option<&PortName>) -> Result<Vec<String>, ExplainError> {
    (0..records.len())
        .filter(|&i| at.is_none_or(|t| records[i].t == t))
        .filter(|&i| port.is_none_or(|p| &records[i].dst == p))
        .map(|i| explain_one(records, i))
        .collect()
}

//! Deterministic discrete-event publish-subscribe simulation.
//!
//! Scripted sources emit on a fixed period inside their active intervals.
//! Each emission fans out over every connection leaving the source port, in
//! destination-port order, and each copy is arbitrated at its destination.
//! Time is an integer millisecond clock; events are ordered by
//! `(time, seq)` where `seq` is the insertion counter of the queue, so a
//! source whose next emission was scheduled earlier goes first within a
//! millisecond.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arbiter::{ArbiterError, Outcome, PortArbiter, Reason, DEFAULT_WINDOW_MS};
use crate::compiler::RuleSet;
use crate::model::{
    parse_behavior_model, parse_network, BehaviorModel, Direction, ModelError, NetworkDescription, PortName,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: Box<ModelError> },
    #[error("invalid scenario: {0}")]
    Schema(String),
    #[error("component `{component}` uses port `{port}`, which is not an {direction} port of the network")]
    UnknownPort {
        component: String,
        port: String,
        direction: Direction,
    },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Arbiter(#[from] ArbiterError),
    #[error("ruleset has rules for {0}, which receives no connections")]
    RulesForUnknownPort(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicSource {
    pub port: PortName,
    pub period_ms: u64,
    pub phase_ms: u64,
    /// Sorted, disjoint, half-open `[start, end)` intervals.
    pub active: Vec<(u64, u64)>,
}

impl PeriodicSource {
    /// First emission instant strictly after `after` (or at/after 0 when
    /// `None`) that lies inside an active interval and before `horizon`.
    pub fn next_emission(&self, after: Option<u64>, horizon: u64) -> Option<u64> {
        let from = after.map_or(0, |t| t + 1);
        for &(start, end) in &self.active {
            let lower = from.max(start).max(self.phase_ms);
            let k = (lower - self.phase_ms).div_ceil(self.period_ms);
            let t = self.phase_ms + k * self.period_ms;
            if t < end && t < horizon {
                return Some(t);
            }
            if t >= horizon {
                return None;
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComponentRole {
    Source(PeriodicSource),
    /// Records accepted deliveries at its input port.
    Sink {
        port: PortName,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedComponent {
    pub name: String,
    pub role: ComponentRole,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model_path: PathBuf,
    pub network_path: PathBuf,
    pub model: BehaviorModel,
    pub network: NetworkDescription,
    pub horizon_ms: u64,
    pub components: Vec<ScriptedComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    model: String,
    network: String,
    horizon_ms: u64,
    #[serde(default)]
    components: Vec<ComponentJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentJson {
    name: String,
    source: Option<SourceJson>,
    sink: Option<SinkJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceJson {
    port: String,
    period_ms: u64,
    #[serde(default)]
    phase_ms: u64,
    active: Option<Vec<(u64, u64)>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SinkJson {
    port: String,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a scenario file; model and network paths resolve relative to it.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_scenario(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioJson = serde_json::from_str(text)?;
    let model_path = base_dir.join(&doc.model);
    let network_path = base_dir.join(&doc.network);
    let model = parse_behavior_model(&read(&model_path)?).map_err(|source| ScenarioError::Model {
        path: model_path.clone(),
        source: Box::new(source),
    })?;
    let network = parse_network(&read(&network_path)?).map_err(|source| ScenarioError::Model {
        path: network_path.clone(),
        source: Box::new(source),
    })?;

    let mut components = Vec::with_capacity(doc.components.len());
    for c in doc.components {
        if components.iter().any(|x: &ScriptedComponent| x.name == c.name) {
            return Err(ScenarioError::Schema(format!("duplicate component name `{}`", c.name)));
        }
        let role = match (c.source, c.sink) {
            (Some(src), None) => ComponentRole::Source(source_from_json(&c.name, src, doc.horizon_ms, &network)?),
            (None, Some(sink)) => {
                let port = declared_port(&c.name, &sink.port, Direction::Input, &network)?;
                ComponentRole::Sink { port }
            }
            _ => {
                return Err(ScenarioError::Schema(format!(
                    "component `{}` must have exactly one of `source` or `sink`",
                    c.name
                )))
            }
        };
        components.push(ScriptedComponent { name: c.name, role });
    }
    Ok(Scenario {
        model_path,
        network_path,
        model,
        network,
        horizon_ms: doc.horizon_ms,
        components,
    })
}

fn declared_port(
    component: &str,
    text: &str,
    direction: Direction,
    network: &NetworkDescription,
) -> Result<PortName, ScenarioError> {
    let unknown = || ScenarioError::UnknownPort {
        component: component.to_string(),
        port: text.to_string(),
        direction,
    };
    let port = PortName::parse_with(text, direction).map_err(|_| unknown())?;
    if !network.has_port(&port) {
        return Err(unknown());
    }
    Ok(port)
}

fn source_from_json(
    name: &str,
    src: SourceJson,
    horizon_ms: u64,
    network: &NetworkDescription,
) -> Result<PeriodicSource, ScenarioError> {
    let port = declared_port(name, &src.port, Direction::Output, network)?;
    if src.period_ms == 0 {
        return Err(ScenarioError::Schema(format!(
            "component `{name}`: period_ms must be positive"
        )));
    }
    let mut active = src.active.unwrap_or_else(|| vec![(0, horizon_ms)]);
    active.sort();
    for &(start, end) in &active {
        if start >= end {
            return Err(ScenarioError::Schema(format!(
                "component `{name}`: empty interval [{start}, {end})"
            )));
        }
    }
    if let Some(w) = active.windows(2).find(|w| w[0].1 > w[1].0) {
        return Err(ScenarioError::Schema(format!(
            "component `{name}`: overlapping intervals [{}, {}) and [{}, {})",
            w[0].0, w[0].1, w[1].0, w[1].1
        )));
    }
    Ok(PeriodicSource {
        port,
        period_ms: src.period_ms,
        phase_ms: src.phase_ms,
        active,
    })
}

/// One arbitration decision for one copy of a message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub t: u64,
    pub src: PortName,
    pub dst: PortName,
    pub outcome: Outcome,
    pub reason: Reason,
    /// Emitted rule text, or `-` when the source has no rule at `dst`.
    pub rule: String,
    pub assignment: BTreeMap<PortName, bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub sink: String,
    pub t: u64,
    pub source: PortName,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// What each sink received, in delivery order.
    pub deliveries: Vec<Delivery>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: u64,
    seq: u64,
    component: usize,
}

pub fn run(scenario: &Scenario, ruleset: &RuleSet) -> Result<Trace, SimError> {
    run_until(scenario, ruleset, scenario.horizon_ms)
}

/// Runs events with `time < min(until, horizon)`.
pub fn run_until(scenario: &Scenario, ruleset: &RuleSet, until: u64) -> Result<Trace, SimError> {
    let network = &scenario.network;
    let end = until.min(scenario.horizon_ms);

    let mut arbiters: BTreeMap<PortName, PortArbiter> = BTreeMap::new();
    for dest in network.destinations() {
        let incoming = network.incoming(dest).into_iter().cloned().collect();
        let window = network.window_for(dest, DEFAULT_WINDOW_MS);
        let arbiter = PortArbiter::new(dest.clone(), incoming, window, ruleset.for_port(dest))?;
        arbiters.insert(dest.clone(), arbiter);
    }
    if let Some(rule) = ruleset.rules.iter().find(|r| !arbiters.contains_key(&r.port)) {
        return Err(SimError::RulesForUnknownPort(rule.port.to_string()));
    }

    let mut sinks: BTreeMap<&PortName, Vec<&str>> = BTreeMap::new();
    for c in &scenario.components {
        if let ComponentRole::Sink { port } = &c.role {
            sinks.entry(port).or_default().push(&c.name);
        }
    }

    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let mut schedule = |queue: &mut BinaryHeap<Reverse<Event>>, time, component| {
        queue.push(Reverse(Event { time, seq, component }));
        seq += 1;
    };
    for (i, c) in scenario.components.iter().enumerate() {
        if let ComponentRole::Source(src) = &c.role {
            if let Some(t) = src.next_emission(None, end) {
                schedule(&mut queue, t, i);
            }
        }
    }

    let mut trace = Trace::default();
    while let Some(Reverse(event)) = queue.pop() {
        let ComponentRole::Source(src) = &scenario.components[event.component].role else {
            unreachable!("only sources are scheduled")
        };
        for connection in network.outgoing(&src.port) {
            let arbiter = arbiters
                .get_mut(&connection.destination)
                .expect("every destination has an arbiter");
            let decision = arbiter.on_message(connection, event.time)?;
            let rule = arbiter.rule_text(&connection.source).unwrap_or("-").to_string();
            if decision.outcome == Outcome::Accept {
                for sink in sinks.get(&connection.destination).into_iter().flatten() {
                    trace.deliveries.push(Delivery {
                        sink: sink.to_string(),
                        t: event.time,
                        source: connection.source.clone(),
                    });
                }
            }
            trace.records.push(TraceRecord {
                t: event.time,
                src: connection.source.clone(),
                dst: connection.destination.clone(),
                outcome: decision.outcome,
                reason: decision.reason,
                rule,
                assignment: decision.assignment,
            });
        }
        if let Some(t) = src.next_emission(Some(event.time), end) {
            schedule(&mut queue, t, event.component);
        }
    }
    Ok(trace)
}

/// JSON lines, one record per line, fields in declaration order.
pub fn trace_to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, trace_to_jsonl(&trace.records))
}

#[derive(Debug, Error)]
#[error("trace line {line}: {source}")]
pub struct TraceParseError {
    pub line: usize,
    pub source: serde_json::Error,
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| TraceParseError { line: i + 1, source }))
        .collect()
}

/// Per-port accept/discard counts and the runs of accepted deliveries.
pub fn summarize(records: &[TraceRecord]) -> String {
    let mut ports: Vec<&PortName> = records.iter().map(|r| &r.dst).collect();
    ports.sort();
    ports.dedup();
    let mut out = String::new();
    for port in ports {
        let at: Vec<_> = records.iter().filter(|r| &r.dst == port).collect();
        let accepted = at.iter().filter(|r| r.outcome == Outcome::Accept).count();
        let no_rule = at.iter().filter(|r| r.reason == Reason::NoRule).count();
        let constraint = at.iter().filter(|r| r.reason == Reason::ConstraintFalse).count();
        out.push_str(&format!(
            "{port}: {} messages, {accepted} accepted, {} discarded (NO_RULE {no_rule}, CONSTRAINT_FALSE {constraint})\n",
            at.len(),
            at.len() - accepted,
        ));
        let mut runs: Vec<(&PortName, u64, u64, usize)> = Vec::new();
        let mut open = false;
        for r in &at {
            match (r.outcome, runs.last_mut()) {
                (Outcome::Accept, Some(run)) if open && run.0 == &r.src => {
                    run.2 = r.t;
                    run.3 += 1;
                }
                (Outcome::Accept, _) => {
                    runs.push((&r.src, r.t, r.t, 1));
                    open = true;
                }
                (Outcome::Discard, Some(run)) if run.0 == &r.src => open = false,
                _ => {}
            }
        }
        for (src, first, last, count) in runs {
            out.push_str(&format!("  delivered {src} x{count} during [{first}, {last}]\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(period: u64, phase: u64, active: &[(u64, u64)]) -> PeriodicSource {
        PeriodicSource {
            port: PortName::parse("/a:o").unwrap(),
            period_ms: period,
            phase_ms: phase,
            active: active.to_vec(),
        }
    }

    #[test]
    fn emission_schedule() {
        let s = source(100, 0, &[(5000, 9000)]);
        assert_eq!(s.next_emission(None, 20000), Some(5000));
        assert_eq!(s.next_emission(Some(5000), 20000), Some(5100));
        assert_eq!(s.next_emission(Some(8900), 20000), None);
        assert_eq!(s.next_emission(None, 5000), None);

        let s = source(100, 30, &[(0, 250), (1000, 1100)]);
        let mut times = Vec::new();
        let mut last = None;
        while let Some(t) = s.next_emission(last, 10_000) {
            times.push(t);
            last = Some(t);
        }
        assert_eq!(times, [30, 130, 230, 1030]);
    }

    #[test]
    fn trace_line_has_fixed_field_order() {
        let record = TraceRecord {
            t: 5,
            src: PortName::parse("/a:o").unwrap(),
            dst: PortName::parse("/b:i").unwrap(),
            outcome: Outcome::Accept,
            reason: Reason::Selected,
            rule: "/a:o => Select(/a:o) @ /b:i".into(),
            assignment: [(PortName::parse("/a:o").unwrap(), true)].into_iter().collect(),
        };
        let line = trace_to_jsonl(std::slice::from_ref(&record));
        assert_eq!(
            line,
            "{\"t\":5,\"src\":\"/a:o\",\"dst\":\"/b:i\",\"outcome\":\"accept\",\"reason\":\"SELECTED\",\
             \"rule\":\"/a:o => Select(/a:o) @ /b:i\",\"assignment\":{\"/a:o\":true}}\n"
        );
        assert_eq!(parse_trace(&line).unwrap(), vec![record]);
        assert_eq!(trace_to_jsonl(&[]), "");
        assert_eq!(parse_trace("{not json").unwrap_err().line, 1);
    }
}

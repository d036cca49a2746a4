//! Extraction of per-port selection rules from a behavior model.
//!
//! For every leaf behavior and every connection `(s, d)` in its
//! configuration the port arbitrator at `d` gets the rule
//!
//! ```text
//! s and not p1 and not p2 ... and <inherited condition> => Select(s) @ d
//! ```
//!
//! where the `p`s are the source ports of every behavior inhibiting the leaf
//! or one of its ancestors. Rules selecting the same `(d, s)` pair from
//! several behaviors are merged by disjunction.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdd::{BddManager, NodeRef};
use crate::model::{
    apply_auto_observe, parse_condition, validate, BehaviorModel, BehaviorNode, BoolExpr, ConditionError, Diagnostic,
    Direction, NetworkDescription, PortError, PortName,
};

/// `candidate active and constraint => Select(candidate)` at `port`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionRule {
    pub port: PortName,
    pub candidate: PortName,
    /// Never mentions `candidate` itself; its activity is implied.
    pub constraint: BoolExpr,
    /// Behaviors that contributed this rule, in model order.
    pub provenance: Vec<String>,
}

impl SelectionRule {
    /// The full left-hand side, candidate literal included.
    pub fn guard(&self) -> BoolExpr {
        BoolExpr::and([BoolExpr::Literal(self.candidate.clone()), self.constraint.clone()]).normalize()
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} => Select({}) @ {}",
            self.guard().render(),
            self.candidate,
            self.port
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleSet {
    /// Sorted by `(port, candidate)`; at most one rule per pair.
    pub rules: Vec<SelectionRule>,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn for_port<'a>(&'a self, port: &'a PortName) -> impl Iterator<Item = &'a SelectionRule> + 'a {
        self.rules.iter().filter(move |r| &r.port == port)
    }

    pub fn get(&self, port: &PortName, candidate: &PortName) -> Option<&SelectionRule> {
        self.rules.iter().find(|r| &r.port == port && &r.candidate == candidate)
    }

    pub fn from_json(text: &str) -> Result<Self, RuleSetError> {
        let doc: RuleSetJson = serde_json::from_str(text)?;
        let mut rules = Vec::with_capacity(doc.rules.len());
        for r in doc.rules {
            let port = PortName::parse_with(&r.port, Direction::Input)?;
            let candidate = PortName::parse_with(&r.candidate, Direction::Output)?;
            let constraint = parse_condition(&r.constraint)?;
            rules.push(SelectionRule {
                port,
                candidate,
                constraint,
                provenance: r.provenance,
            });
        }
        rules.sort_by(|a, b| (&a.port, &a.candidate).cmp(&(&b.port, &b.candidate)));
        if let Some(w) = rules
            .windows(2)
            .find(|w| w[0].port == w[1].port && w[0].candidate == w[1].candidate)
        {
            return Err(RuleSetError::Duplicate(format!("{} @ {}", w[0].candidate, w[0].port)));
        }
        Ok(RuleSet { rules })
    }
}

#[derive(Debug, Error)]
pub enum RuleSetError {
    #[error("invalid ruleset JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Port(#[from] PortError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error("more than one rule for {0}")]
    Duplicate(String),
}

#[derive(Serialize, Deserialize)]
struct RuleJson {
    port: String,
    candidate: String,
    constraint: String,
    provenance: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RuleSetJson {
    rules: Vec<RuleJson>,
}

/// Own condition conjoined with every ancestor meta-behavior's condition,
/// outermost first.
pub fn inherited_condition(behavior: &BehaviorNode, model: &BehaviorModel) -> BoolExpr {
    match model.path_to(&behavior.name) {
        Some(path) => BoolExpr::and(path.iter().map(|n| n.condition.clone())).normalize(),
        None => behavior.condition.normalize(),
    }
}

/// Source ports of every behavior that inhibits `behavior` directly or
/// through one of its ancestors. Inhibiting meta-behaviors contribute all of
/// their descendant leaves.
///
/// Ordered from the innermost level outwards, then by model order.
pub fn effective_inhibitor_sources(behavior: &BehaviorNode, model: &BehaviorModel) -> Vec<PortName> {
    let path = model.path_to(&behavior.name).unwrap_or_else(|| vec![behavior]);
    let nodes = model.nodes();
    let mut out: Vec<PortName> = Vec::new();
    for target in path.iter().rev() {
        for inhibitor in nodes.iter().filter(|n| n.inhibitions.iter().any(|i| i == &target.name)) {
            for p in inhibitor.source_ports() {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Runs the two-step extraction over every leaf behavior. Expects a model
/// that passed validation.
pub fn extract_rules(model: &BehaviorModel) -> RuleSet {
    let mut rules: Vec<SelectionRule> = Vec::new();
    for leaf in model.leaves() {
        let condition = inherited_condition(leaf, model);
        let inhibitors = effective_inhibitor_sources(leaf, model);
        // inhibitor literals lead, then the inherited condition
        let base = BoolExpr::and(
            inhibitors
                .into_iter()
                .map(|p| BoolExpr::not(BoolExpr::Literal(p)))
                .chain(std::iter::once(condition)),
        )
        .normalize();
        for c in leaf.configuration() {
            let constraint = base.assign(&c.source, true);
            match rules
                .iter_mut()
                .find(|r| r.port == c.destination && r.candidate == c.source)
            {
                Some(existing) => {
                    existing.constraint = BoolExpr::or([existing.constraint.clone(), constraint]).normalize();
                    if !existing.provenance.contains(&leaf.name) {
                        existing.provenance.push(leaf.name.clone());
                    }
                }
                None => rules.push(SelectionRule {
                    port: c.destination.clone(),
                    candidate: c.source.clone(),
                    constraint,
                    provenance: vec![leaf.name.clone()],
                }),
            }
        }
    }
    rules.sort_by(|a, b| (&a.port, &a.candidate).cmp(&(&b.port, &b.candidate)));
    RuleSet { rules }
}

/// Finds pairs of rules at one port that can both select at the same time.
pub fn check_conflicts(ruleset: &RuleSet, bdd: &mut BddManager) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut ports: Vec<&PortName> = ruleset.rules.iter().map(|r| &r.port).collect();
    ports.dedup();
    for port in ports {
        let rules: Vec<_> = ruleset.for_port(port).collect();
        let guards: Vec<NodeRef> = rules.iter().map(|r| bdd.build(&r.guard())).collect();
        for i in 0..rules.len() {
            for j in i + 1..rules.len() {
                let joint = bdd.and(guards[i], guards[j]);
                if let Some(witness) = bdd.witness(joint) {
                    let shown: Vec<String> = witness
                        .iter()
                        .map(|(p, v)| format!("{p}={}", if *v { "active" } else { "inactive" }))
                        .collect();
                    out.push(Diagnostic::warning(
                        "CONFLICT",
                        port.to_string(),
                        format!(
                            "rules for {} and {} can both select; witness: {}",
                            rules[i].candidate,
                            rules[j].candidate,
                            shown.join(", ")
                        ),
                    ));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleFormat {
    Text,
    Json,
}

pub fn emit_rules(ruleset: &RuleSet, format: RuleFormat) -> String {
    match format {
        RuleFormat::Text => ruleset.rules.iter().map(|r| format!("{r}\n")).collect(),
        RuleFormat::Json => {
            let doc = RuleSetJson {
                rules: ruleset
                    .rules
                    .iter()
                    .map(|r| RuleJson {
                        port: r.port.to_string(),
                        candidate: r.candidate.to_string(),
                        constraint: r.constraint.render(),
                        provenance: r.provenance.clone(),
                    })
                    .collect(),
            };
            let mut text = serde_json::to_string_pretty(&doc).expect("ruleset serializes");
            text.push('\n');
            text
        }
    }
}

/// Result of the full validate, extract, conflict-check pipeline.
#[derive(Debug, Clone)]
pub struct Compilation {
    /// The network the rules are meant for, including any observer
    /// connections added by auto-observe.
    pub network: NetworkDescription,
    /// Validation findings followed by conflict warnings.
    pub diagnostics: Vec<Diagnostic>,
    /// `None` when validation reported errors.
    pub rules: Option<RuleSet>,
}

impl Compilation {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }

    pub fn has_warnings(&self) -> bool {
        self.diagnostics.iter().any(|d| !d.is_error())
    }
}

pub fn compile(model: &BehaviorModel, network: &NetworkDescription, auto_observe: bool) -> Compilation {
    let mut diagnostics = validate(model, network, auto_observe);
    let mut network = network.clone();
    if diagnostics.iter().any(Diagnostic::is_error) {
        return Compilation {
            network,
            diagnostics,
            rules: None,
        };
    }
    if auto_observe {
        apply_auto_observe(model, &mut network);
    }
    let rules = extract_rules(model);
    let mut bdd = BddManager::new();
    diagnostics.extend(check_conflicts(&rules, &mut bdd));
    Compilation {
        network,
        diagnostics,
        rules: Some(rules),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_behavior_model, Connection};

    const SEARCH_AND_TRACK: &str = r#"
<define name="gaze">/Gaze/pos:i</define>
<define name="arm">/Arm/pos:i</define>
<meta_behavior name="Search and Track">
  <behavior>Track Object</behavior><behavior>Rest Arm</behavior><behavior>Be Curious</behavior>
</meta_behavior>
<meta_behavior name="Be Curious"><behavior>Look Around</behavior><behavior>Follow Face</behavior></meta_behavior>
<behavior name="Track Object">
  <config at="${gaze}">/Object/pos:o</config><config at="${arm}">/Object/pos:o</config>
  <condition>not /collision:o</condition><inhibition>Rest Arm, Be Curious</inhibition>
</behavior>
<behavior name="Rest Arm"><config at="${arm}">/RestArm/pos:o</config></behavior>
<behavior name="Look Around"><config at="${gaze}">/RandomLook/pos:o</config></behavior>
<behavior name="Follow Face"><config at="${gaze}">/Face/pos:o</config><inhibition>Look Around</inhibition></behavior>
"#;

    fn port(s: &str) -> PortName {
        PortName::parse(s).unwrap()
    }

    fn search_and_track() -> BehaviorModel {
        parse_behavior_model(SEARCH_AND_TRACK).unwrap()
    }

    #[test]
    fn inherited_conditions() {
        let m = search_and_track();
        let track = m.find("Track Object").unwrap();
        assert_eq!(
            inherited_condition(track, &m),
            parse_condition("not /collision:o").unwrap()
        );
        let look = m.find("Look Around").unwrap();
        assert!(inherited_condition(look, &m).is_true());

        let nested = parse_behavior_model(
            r#"<meta_behavior name="M1"><behavior>M2</behavior><condition>/c1:o</condition></meta_behavior>
               <meta_behavior name="M2"><behavior>L</behavior><condition>/c2:o</condition></meta_behavior>
               <behavior name="L"><config at="/d:i">/s:o</config><condition>/c3:o</condition></behavior>"#,
        )
        .unwrap();
        let leaf = nested.find("L").unwrap();
        assert_eq!(
            inherited_condition(leaf, &nested),
            parse_condition("/c1:o and /c2:o and /c3:o").unwrap()
        );
    }

    #[test]
    fn inhibitor_sources() {
        let m = search_and_track();
        assert_eq!(
            effective_inhibitor_sources(m.find("Look Around").unwrap(), &m),
            [port("/Face/pos:o"), port("/Object/pos:o")]
        );
        assert_eq!(
            effective_inhibitor_sources(m.find("Rest Arm").unwrap(), &m),
            [port("/Object/pos:o")]
        );
        assert!(effective_inhibitor_sources(m.find("Track Object").unwrap(), &m).is_empty());
    }

    #[test]
    fn search_and_track_rules() {
        let rules = extract_rules(&search_and_track());
        let text = emit_rules(&rules, RuleFormat::Text);
        assert_eq!(
            text,
            "/Object/pos:o and not /collision:o => Select(/Object/pos:o) @ /Arm/pos:i\n\
             /RestArm/pos:o and not /Object/pos:o => Select(/RestArm/pos:o) @ /Arm/pos:i\n\
             /Face/pos:o and not /Object/pos:o => Select(/Face/pos:o) @ /Gaze/pos:i\n\
             /Object/pos:o and not /collision:o => Select(/Object/pos:o) @ /Gaze/pos:i\n\
             /RandomLook/pos:o and not /Face/pos:o and not /Object/pos:o => Select(/RandomLook/pos:o) @ /Gaze/pos:i\n"
        );
        let mut bdd = BddManager::new();
        assert!(check_conflicts(&rules, &mut bdd).is_empty());
    }

    #[test]
    fn unconstrained_single_rule() {
        let m = parse_behavior_model(r#"<behavior name="B"><config at="/Y:i">/X:o</config></behavior>"#).unwrap();
        let rules = extract_rules(&m);
        assert_eq!(rules.len(), 1);
        assert!(rules.rules[0].constraint.is_true());
        assert_eq!(emit_rules(&rules, RuleFormat::Text), "/X:o => Select(/X:o) @ /Y:i\n");
        assert_eq!(emit_rules(&RuleSet::default(), RuleFormat::Text), "");
    }

    #[test]
    fn shared_connection_merges_by_disjunction() {
        let m = parse_behavior_model(
            r#"<behavior name="A"><config at="/d:i">/s:o</config><condition>/c1:o</condition></behavior>
               <behavior name="B"><config at="/d:i">/s:o</config><condition>/c2:o</condition></behavior>"#,
        )
        .unwrap();
        let rules = extract_rules(&m);
        assert_eq!(rules.len(), 1);
        assert_eq!(rules.rules[0].constraint, parse_condition("/c1:o or /c2:o").unwrap());
        assert_eq!(rules.rules[0].provenance, ["A", "B"]);
        assert_eq!(
            emit_rules(&rules, RuleFormat::Text),
            "/s:o and (/c1:o or /c2:o) => Select(/s:o) @ /d:i\n"
        );
    }

    #[test]
    fn conflicts_are_flagged_with_witness() {
        let m = parse_behavior_model(
            r#"<behavior name="A"><config at="/d:i">/a:o</config></behavior>
               <behavior name="B"><config at="/d:i">/b:o</config></behavior>"#,
        )
        .unwrap();
        let rules = extract_rules(&m);
        let diags = check_conflicts(&rules, &mut BddManager::new());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].location, "/d:i");
        assert!(
            diags[0].message.ends_with("witness: /a:o=active, /b:o=active"),
            "{}",
            diags[0].message
        );

        let exclusive = parse_behavior_model(
            r#"<behavior name="A"><config at="/d:i">/a:o</config><condition>not /b:o</condition></behavior>
               <behavior name="B"><config at="/d:i">/b:o</config><condition>not /a:o</condition></behavior>"#,
        )
        .unwrap();
        assert!(check_conflicts(&extract_rules(&exclusive), &mut BddManager::new()).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let rules = extract_rules(&search_and_track());
        let json = emit_rules(&rules, RuleFormat::Json);
        assert!(json.contains("\"constraint\": \"not /Face/pos:o and not /Object/pos:o\""));
        assert_eq!(RuleSet::from_json(&json).unwrap(), rules);
        assert!(RuleSet::from_json("{\"rules\": 3}").is_err());
    }

    #[test]
    fn compile_pipeline_auto_observes() {
        let net = crate::model::parse_network(
            r#"<application>
  <module name="O"><output>/Object/pos:o</output></module>
  <module name="F"><output>/Face/pos:o</output></module>
  <module name="R"><output>/RandomLook/pos:o</output></module>
  <module name="RA"><output>/RestArm/pos:o</output></module>
  <module name="C"><output>/collision:o</output></module>
  <module name="G"><input>/Gaze/pos:i</input></module>
  <module name="A"><input>/Arm/pos:i</input></module>
  <connection from="/Object/pos:o" to="/Gaze/pos:i"/><connection from="/Object/pos:o" to="/Arm/pos:i"/>
  <connection from="/RestArm/pos:o" to="/Arm/pos:i"/><connection from="/collision:o" to="/Arm/pos:i"/>
  <connection from="/Face/pos:o" to="/Gaze/pos:i"/><connection from="/RandomLook/pos:o" to="/Gaze/pos:i"/>
</application>"#,
        )
        .unwrap();
        let strict = compile(&search_and_track(), &net, false);
        assert!(strict.has_errors());
        assert!(strict.rules.is_none());

        let relaxed = compile(&search_and_track(), &net, true);
        assert!(!relaxed.has_errors());
        assert_eq!(relaxed.rules.as_ref().unwrap().len(), 5);
        assert!(relaxed
            .network
            .has_connection(&Connection::parse("/collision:o", "/Gaze/pos:i").unwrap()));
    }
}

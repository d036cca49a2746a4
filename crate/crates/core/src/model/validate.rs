//! Structural checks on a behavior model against its network.
//!
//! | code | check |
//! |------|-------|
//! | V1 | inhibitions stay within one sibling group |
//! | V2 | configuration connections exist in the network |
//! | V3 | every literal a behavior's rules will test is observable at the rule's port |
//! | V4 | inhibition among siblings is acyclic |
//! | V5 | inhibition names resolve |

use std::collections::BTreeSet;

use super::{BehaviorModel, BehaviorNode, Connection, Diagnostic, NetworkDescription};
use crate::compiler::{effective_inhibitor_sources, inherited_condition};

/// Runs every check. Diagnostics are ordered by location, then code.
pub fn validate(model: &BehaviorModel, network: &NetworkDescription, auto_observe: bool) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    check_inhibition_scope(model, &mut out);
    check_configuration(model, network, &mut out);
    check_observability(model, network, auto_observe, &mut out);
    check_inhibition_cycles(model, &mut out);
    out.sort_by(|a, b| (&a.location, a.code).cmp(&(&b.location, b.code)));
    out
}

fn check_inhibition_scope(model: &BehaviorModel, out: &mut Vec<Diagnostic>) {
    for node in model.nodes() {
        let siblings = model.siblings_of(&node.name).unwrap_or(&[]);
        for target in &node.inhibitions {
            if model.find(target).is_none() {
                out.push(Diagnostic::error(
                    "V5",
                    &node.name,
                    format!("inhibits unknown behavior `{target}`"),
                ));
            } else if !siblings.iter().any(|s| &s.name == target) {
                out.push(Diagnostic::error(
                    "V1",
                    &node.name,
                    format!(
                        "inhibits `{target}`, which is not in the same meta-behavior ({} vs {})",
                        model.parent_of(&node.name).unwrap_or("top level"),
                        model.parent_of(target).unwrap_or("top level"),
                    ),
                ));
            }
        }
    }
}

fn check_configuration(model: &BehaviorModel, network: &NetworkDescription, out: &mut Vec<Diagnostic>) {
    for leaf in model.leaves() {
        for c in leaf.configuration() {
            if !network.has_connection(c) {
                out.push(Diagnostic::error(
                    "V2",
                    &leaf.name,
                    format!("configuration connection {c} is not in the network"),
                ));
            }
        }
    }
}

/// Connections that would have to be added so that every rule literal is
/// visible at the arbitrated port, paired with the behavior needing them.
pub fn missing_observers(model: &BehaviorModel, network: &NetworkDescription) -> Vec<(String, Connection)> {
    let mut out = Vec::new();
    for leaf in model.leaves() {
        let mut literals = inherited_condition(leaf, model).literals();
        for p in effective_inhibitor_sources(leaf, model) {
            if !literals.contains(&p) {
                literals.push(p);
            }
        }
        let destinations: BTreeSet<_> = leaf.configuration().iter().map(|c| &c.destination).collect();
        for dest in destinations {
            for literal in &literals {
                let needed = Connection {
                    source: literal.clone(),
                    destination: dest.clone(),
                };
                if !network.has_connection(&needed) {
                    out.push((leaf.name.clone(), needed));
                }
            }
        }
    }
    out
}

fn check_observability(
    model: &BehaviorModel,
    network: &NetworkDescription,
    auto_observe: bool,
    out: &mut Vec<Diagnostic>,
) {
    for (behavior, needed) in missing_observers(model, network) {
        let addable = network.has_port(&needed.source) && network.has_port(&needed.destination);
        if auto_observe && addable {
            out.push(Diagnostic::warning(
                "V3",
                behavior,
                format!(
                    "added observer connection {needed} so `{}` is observable",
                    needed.source
                ),
            ));
        } else {
            let hint = if addable {
                ""
            } else {
                " (port not declared by any module)"
            };
            out.push(Diagnostic::error(
                "V3",
                behavior,
                format!(
                    "`{}` is not observable at {}: missing connection {needed}{hint}",
                    needed.source, needed.destination
                ),
            ));
        }
    }
}

/// Adds every missing observer connection whose ports are declared. Returns
/// the connections added, in the order they were added.
pub fn apply_auto_observe(model: &BehaviorModel, network: &mut NetworkDescription) -> Vec<Connection> {
    let mut added = Vec::new();
    for (_, needed) in missing_observers(model, network) {
        if let Ok(true) = network.add_connection(needed.clone()) {
            added.push(needed);
        }
    }
    added
}

fn check_inhibition_cycles(model: &BehaviorModel, out: &mut Vec<Diagnostic>) {
    let mut groups: Vec<&[BehaviorNode]> = vec![&model.roots];
    groups.extend(model.nodes().into_iter().filter(|n| n.is_meta()).map(|n| n.children()));

    for group in groups {
        let index_of = |name: &str| group.iter().position(|n| n.name == name);
        let edges: Vec<Vec<usize>> = group
            .iter()
            .map(|n| n.inhibitions.iter().filter_map(|t| index_of(t)).collect())
            .collect();
        let mut reported = BTreeSet::new();
        let mut state = vec![0u8; group.len()];
        let mut stack = Vec::new();
        for start in 0..group.len() {
            find_cycles(start, &edges, &mut state, &mut stack, &mut |cycle: &[usize]| {
                // rotate so the lexicographically smallest name leads
                let names: Vec<&str> = cycle.iter().map(|&i| group[i].name.as_str()).collect();
                let lead = (0..names.len()).min_by_key(|&i| names[i]).unwrap();
                let mut rotated: Vec<&str> = names[lead..].iter().chain(&names[..lead]).copied().collect();
                if reported.insert(rotated.clone()) {
                    rotated.push(rotated[0]);
                    out.push(Diagnostic::error(
                        "V4",
                        rotated[0],
                        format!("inhibition cycle: {}", rotated.join(" -> ")),
                    ));
                }
            });
        }
    }
}

fn find_cycles(
    node: usize,
    edges: &[Vec<usize>],
    state: &mut [u8],
    stack: &mut Vec<usize>,
    report: &mut dyn FnMut(&[usize]),
) {
    if state[node] == 2 {
        return;
    }
    state[node] = 1;
    stack.push(node);
    for &next in &edges[node] {
        match state[next] {
            0 => find_cycles(next, edges, state, stack, report),
            1 => {
                let from = stack.iter().position(|&n| n == next).unwrap();
                report(&stack[from..]);
            }
            _ => {}
        }
    }
    stack.pop();
    state[node] = 2;
}

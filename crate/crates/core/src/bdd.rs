//! Reduced ordered binary decision diagrams over port-activation variables.
//!
//! Nodes are hash-consed in a unique table, so two handles are equal exactly
//! when they denote the same boolean function. Variables are ordered by first
//! use; there is no reordering and no garbage collection.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::model::{BoolExpr, PortName};

/// Handle to a node owned by one [`BddManager`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef(u32);

impl NodeRef {
    pub const FALSE: NodeRef = NodeRef(0);
    pub const TRUE: NodeRef = NodeRef(1);

    pub fn is_const(self) -> bool {
        self.0 < 2
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ApplyOp {
    And,
    Or,
    Xor,
}

impl From<BoolOp> for ApplyOp {
    fn from(op: BoolOp) -> Self {
        match op {
            BoolOp::And => ApplyOp::And,
            BoolOp::Or => ApplyOp::Or,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    var: u32,
    low: NodeRef,
    high: NodeRef,
}

/// Partial assignment of activation states; absent ports read as inactive.
pub type Assignment = BTreeMap<PortName, bool>;

#[derive(Debug, Clone)]
pub struct BddManager {
    order: Vec<PortName>,
    var_index: HashMap<PortName, u32>,
    // slots 0 and 1 are placeholders for the constants
    nodes: Vec<Node>,
    unique: HashMap<Node, NodeRef>,
    cache: HashMap<(ApplyOp, NodeRef, NodeRef), NodeRef>,
    cache_enabled: bool,
}

impl Default for BddManager {
    fn default() -> Self {
        Self::new()
    }
}

impl BddManager {
    pub fn new() -> Self {
        let sentinel = Node {
            var: u32::MAX,
            low: NodeRef::FALSE,
            high: NodeRef::FALSE,
        };
        BddManager {
            order: Vec::new(),
            var_index: HashMap::new(),
            nodes: vec![sentinel, sentinel],
            unique: HashMap::new(),
            cache: HashMap::new(),
            cache_enabled: true,
        }
    }

    /// A manager whose variable order starts with `ports`.
    pub fn with_order<'a>(ports: impl IntoIterator<Item = &'a PortName>) -> Self {
        let mut m = Self::new();
        for p in ports {
            m.var_level(p);
        }
        m
    }

    /// Disables (or re-enables) the apply memo table. Results are identical
    /// either way; only the amount of work changes.
    pub fn set_cache_enabled(&mut self, enabled: bool) {
        self.cache_enabled = enabled;
        self.cache.clear();
    }

    pub fn variable_order(&self) -> &[PortName] {
        &self.order
    }

    /// Number of internal (non-constant) nodes stored.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - 2
    }

    fn var_level(&mut self, port: &PortName) -> u32 {
        if let Some(&i) = self.var_index.get(port) {
            return i;
        }
        let i = self.order.len() as u32;
        self.order.push(port.clone());
        self.var_index.insert(port.clone(), i);
        i
    }

    fn mk(&mut self, var: u32, low: NodeRef, high: NodeRef) -> NodeRef {
        if low == high {
            return low;
        }
        let node = Node { var, low, high };
        if let Some(&r) = self.unique.get(&node) {
            return r;
        }
        let r = NodeRef(self.nodes.len() as u32);
        self.nodes.push(node);
        self.unique.insert(node, r);
        r
    }

    fn level(&self, n: NodeRef) -> u32 {
        if n.is_const() {
            u32::MAX
        } else {
            self.nodes[n.0 as usize].var
        }
    }

    /// The single-variable function for `port`.
    pub fn var(&mut self, port: &PortName) -> NodeRef {
        let v = self.var_level(port);
        self.mk(v, NodeRef::FALSE, NodeRef::TRUE)
    }

    pub fn constant(&self, value: bool) -> NodeRef {
        if value {
            NodeRef::TRUE
        } else {
            NodeRef::FALSE
        }
    }

    pub fn combine(&mut self, op: BoolOp, a: NodeRef, b: NodeRef) -> NodeRef {
        self.apply(op.into(), a, b)
    }

    pub fn and(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.apply(ApplyOp::And, a, b)
    }

    pub fn or(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.apply(ApplyOp::Or, a, b)
    }

    /// Negation as `a xor 1`.
    pub fn negate(&mut self, a: NodeRef) -> NodeRef {
        self.apply(ApplyOp::Xor, a, NodeRef::TRUE)
    }

    fn terminal(op: ApplyOp, a: NodeRef, b: NodeRef) -> Option<NodeRef> {
        use NodeRef as N;
        match op {
            ApplyOp::And => match (a, b) {
                (N::FALSE, _) | (_, N::FALSE) => Some(N::FALSE),
                (N::TRUE, x) | (x, N::TRUE) => Some(x),
                _ if a == b => Some(a),
                _ => None,
            },
            ApplyOp::Or => match (a, b) {
                (N::TRUE, _) | (_, N::TRUE) => Some(N::TRUE),
                (N::FALSE, x) | (x, N::FALSE) => Some(x),
                _ if a == b => Some(a),
                _ => None,
            },
            ApplyOp::Xor => match (a, b) {
                _ if a == b => Some(N::FALSE),
                (N::FALSE, x) | (x, N::FALSE) => Some(x),
                (N::TRUE, N::TRUE) => Some(N::FALSE),
                _ => None,
            },
        }
    }

    fn apply(&mut self, op: ApplyOp, a: NodeRef, b: NodeRef) -> NodeRef {
        if let Some(r) = Self::terminal(op, a, b) {
            return r;
        }
        // every op here is commutative
        let key = if a <= b { (op, a, b) } else { (op, b, a) };
        if self.cache_enabled {
            if let Some(&r) = self.cache.get(&key) {
                return r;
            }
        }
        let (la, lb) = (self.level(a), self.level(b));
        let top = la.min(lb);
        let (a_low, a_high) = self.cofactors(a, top);
        let (b_low, b_high) = self.cofactors(b, top);
        let low = self.apply(op, a_low, b_low);
        let high = self.apply(op, a_high, b_high);
        let r = self.mk(top, low, high);
        if self.cache_enabled {
            self.cache.insert(key, r);
        }
        r
    }

    fn cofactors(&self, n: NodeRef, var: u32) -> (NodeRef, NodeRef) {
        if self.level(n) == var {
            let node = self.nodes[n.0 as usize];
            (node.low, node.high)
        } else {
            (n, n)
        }
    }

    /// Bottom-up construction from an expression tree.
    pub fn build(&mut self, expr: &BoolExpr) -> NodeRef {
        match expr {
            BoolExpr::True => NodeRef::TRUE,
            BoolExpr::False => NodeRef::FALSE,
            BoolExpr::Literal(p) => self.var(p),
            BoolExpr::Not(x) => {
                let n = self.build(x);
                self.negate(n)
            }
            BoolExpr::And(xs) => xs.iter().fold(NodeRef::TRUE, |acc, x| {
                let n = self.build(x);
                self.and(acc, n)
            }),
            BoolExpr::Or(xs) => xs.iter().fold(NodeRef::FALSE, |acc, x| {
                let n = self.build(x);
                self.or(acc, n)
            }),
        }
    }

    pub fn evaluate(&self, node: NodeRef, assignment: &Assignment) -> bool {
        self.evaluate_with(node, |p| assignment.get(p).copied().unwrap_or(false))
    }

    pub fn evaluate_with(&self, mut node: NodeRef, value: impl Fn(&PortName) -> bool) -> bool {
        while !node.is_const() {
            let n = self.nodes[node.0 as usize];
            node = if value(&self.order[n.var as usize]) {
                n.high
            } else {
                n.low
            };
        }
        node == NodeRef::TRUE
    }

    pub fn satisfiable(&self, node: NodeRef) -> bool {
        node != NodeRef::FALSE
    }

    /// The satisfying assignment that is smallest when variables are read in
    /// order with false < true. Covers every variable in the node's support.
    pub fn witness(&self, node: NodeRef) -> Option<Assignment> {
        if node == NodeRef::FALSE {
            return None;
        }
        let mut out: Assignment = self.support(node).into_iter().map(|p| (p, false)).collect();
        let mut cur = node;
        while !cur.is_const() {
            let n = self.nodes[cur.0 as usize];
            let port = self.order[n.var as usize].clone();
            if n.low != NodeRef::FALSE {
                out.insert(port, false);
                cur = n.low;
            } else {
                out.insert(port, true);
                cur = n.high;
            }
        }
        Some(out)
    }

    /// Variables the function depends on, in variable order.
    pub fn support(&self, node: NodeRef) -> Vec<PortName> {
        let mut seen = vec![false; self.order.len()];
        let mut stack = vec![node];
        let mut visited = std::collections::HashSet::new();
        while let Some(n) = stack.pop() {
            if n.is_const() || !visited.insert(n) {
                continue;
            }
            let node = self.nodes[n.0 as usize];
            seen[node.var as usize] = true;
            stack.push(node.low);
            stack.push(node.high);
        }
        self.order
            .iter()
            .zip(seen)
            .filter(|(_, s)| *s)
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// `(variable, low, high)` of an internal node.
    pub fn node(&self, node: NodeRef) -> Option<(&PortName, NodeRef, NodeRef)> {
        if node.is_const() {
            return None;
        }
        let n = self.nodes[node.0 as usize];
        Some((&self.order[n.var as usize], n.low, n.high))
    }

    /// All internal nodes, in creation order.
    pub fn nodes(&self) -> impl Iterator<Item = (NodeRef, &PortName, NodeRef, NodeRef)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, n)| (NodeRef(i as u32), &self.order[n.var as usize], n.low, n.high))
    }

    /// Position of a variable in the order, if it has been seen.
    pub fn level_of(&self, port: &PortName) -> Option<usize> {
        self.var_index.get(port).map(|&i| i as usize)
    }

    /// Graphviz rendering of the diagram rooted at `node`; dashed edges are
    /// low (false) branches.
    pub fn to_dot(&self, node: NodeRef) -> String {
        let mut out = String::from("digraph bdd {\n  n0 [label=\"0\", shape=box];\n  n1 [label=\"1\", shape=box];\n");
        let mut stack = vec![node];
        let mut visited = std::collections::BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n.is_const() || !visited.insert(n) {
                continue;
            }
            let inner = self.nodes[n.0 as usize];
            let _ = writeln!(out, "  n{} [label=\"{}\"];", n.0, self.order[inner.var as usize]);
            let _ = writeln!(out, "  n{} -> n{} [style=dashed];", n.0, inner.low.0);
            let _ = writeln!(out, "  n{} -> n{};", n.0, inner.high.0);
            stack.push(inner.high);
            stack.push(inner.low);
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_condition;

    fn port(s: &str) -> PortName {
        PortName::parse(s).unwrap()
    }

    fn assign(pairs: &[(&str, bool)]) -> Assignment {
        pairs.iter().map(|(p, v)| (port(p), *v)).collect()
    }

    #[test]
    fn var_is_hash_consed() {
        let mut m = BddManager::new();
        let a = m.var(&port("/a:o"));
        assert_eq!(a, m.var(&port("/a:o")));
        assert!(m.evaluate(a, &assign(&[("/a:o", true)])));
        assert!(!m.evaluate(a, &assign(&[("/a:o", false)])));
        assert!(!m.evaluate(a, &Assignment::new()));
    }

    #[test]
    fn constants_and_absorption() {
        let mut m = BddManager::new();
        let x = m.var(&port("/x:o"));
        let nx = m.negate(x);
        assert_eq!(m.combine(BoolOp::And, x, nx), NodeRef::FALSE);
        assert_eq!(m.combine(BoolOp::Or, x, NodeRef::TRUE), NodeRef::TRUE);
        assert_eq!(m.combine(BoolOp::Or, x, nx), NodeRef::TRUE);
        assert_eq!(m.negate(nx), x);
        assert!(m.evaluate(NodeRef::TRUE, &Assignment::new()));
        assert!(!m.satisfiable(NodeRef::FALSE));
        assert!(m.satisfiable(x));
    }

    #[test]
    fn build_matches_manual_apply() {
        let mut m = BddManager::new();
        let built = m.build(&parse_condition("/x:o and not /y:o").unwrap());
        let x = m.var(&port("/x:o"));
        let y = m.var(&port("/y:o"));
        let ny = m.negate(y);
        assert_eq!(built, m.combine(BoolOp::And, x, ny));
    }

    #[test]
    fn rest_arm_rule_is_a_three_variable_chain() {
        let mut m = BddManager::new();
        let rule = m.build(&parse_condition("/RestArm/pos:o and not /Object/pos:o and not /collision:o").unwrap());
        assert_eq!(m.support(rule).len(), 3);
        // one node per variable on the single satisfying path
        assert_eq!(m.to_dot(rule).lines().filter(|l| l.contains("label=\"/")).count(), 3);
        let vars = ["/RestArm/pos:o", "/Object/pos:o", "/collision:o"];
        for bits in 0..8u8 {
            let a: Assignment = vars
                .iter()
                .enumerate()
                .map(|(i, v)| (port(v), bits & (1 << i) != 0))
                .collect();
            assert_eq!(m.evaluate(rule, &a), bits == 0b001, "bits {bits:03b}");
        }
    }

    #[test]
    fn object_rule_evaluation() {
        let mut m = BddManager::new();
        let rule = m.build(&parse_condition("/Object/pos:o and not /collision:o").unwrap());
        assert!(!m.evaluate(rule, &assign(&[("/Object/pos:o", true), ("/collision:o", true)])));
        assert!(m.evaluate(rule, &assign(&[("/Object/pos:o", true), ("/collision:o", false)])));
    }

    #[test]
    fn arm_rules_are_mutually_exclusive() {
        let mut m = BddManager::new();
        let rest = m.build(&parse_condition("/RestArm/pos:o and not /Object/pos:o and not /collision:o").unwrap());
        let object = m.build(&parse_condition("/Object/pos:o and not /collision:o").unwrap());
        let both = m.and(rest, object);
        assert!(!m.satisfiable(both));
    }

    #[test]
    fn witness_prefers_false() {
        let mut m = BddManager::new();
        let f = m.build(&parse_condition("/a:o or /b:o").unwrap());
        assert_eq!(m.witness(f).unwrap(), assign(&[("/a:o", false), ("/b:o", true)]));
        let g = m.build(&parse_condition("/a:o and /b:o").unwrap());
        assert_eq!(m.witness(g).unwrap(), assign(&[("/a:o", true), ("/b:o", true)]));
        assert_eq!(m.witness(NodeRef::FALSE), None);
        assert_eq!(m.witness(NodeRef::TRUE).unwrap(), Assignment::new());
    }

    #[test]
    fn dot_output_lists_edges() {
        let mut m = BddManager::new();
        let f = m.build(&parse_condition("/a:o and not /b:o").unwrap());
        let dot = m.to_dot(f);
        assert!(dot.starts_with("digraph bdd {"));
        assert_eq!(dot.matches("style=dashed").count(), 2);
    }
}

//! Hierarchical behavior model and the behavior-description XML format.
//!
//! The document is a flat list of `define`, `behavior` and `meta_behavior`
//! elements, optionally wrapped in a single container element. Meta-behaviors
//! reference their children by name:
//!
//! ```xml
//! <define name="gaze"> /Gaze/pos:i </define>
//! <meta_behavior name="Be Curious">
//!    <behavior>Look Around</behavior>
//!    <behavior>Follow Face</behavior>
//! </meta_behavior>
//! <behavior name="Look Around">
//!    <config at="${gaze}">/RandomLook/pos:o</config>
//! </behavior>
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};

use super::condition::{parse_condition, BoolExpr};
use super::port::{Connection, PortName};
use super::{xml_escape, ModelError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Behavior { configuration: Vec<Connection> },
    Meta { children: Vec<BehaviorNode> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorNode {
    pub name: String,
    pub kind: NodeKind,
    pub condition: BoolExpr,
    pub inhibitions: Vec<String>,
}

impl BehaviorNode {
    pub fn behavior(name: impl Into<String>, configuration: Vec<Connection>) -> Self {
        BehaviorNode {
            name: name.into(),
            kind: NodeKind::Behavior { configuration },
            condition: BoolExpr::True,
            inhibitions: Vec::new(),
        }
    }

    pub fn meta(name: impl Into<String>, children: Vec<BehaviorNode>) -> Self {
        BehaviorNode {
            name: name.into(),
            kind: NodeKind::Meta { children },
            condition: BoolExpr::True,
            inhibitions: Vec::new(),
        }
    }

    pub fn with_condition(mut self, condition: BoolExpr) -> Self {
        self.condition = condition;
        self
    }

    pub fn with_inhibitions<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.inhibitions = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn is_meta(&self) -> bool {
        matches!(self.kind, NodeKind::Meta { .. })
    }

    pub fn children(&self) -> &[BehaviorNode] {
        match &self.kind {
            NodeKind::Meta { children } => children,
            NodeKind::Behavior { .. } => &[],
        }
    }

    pub fn configuration(&self) -> &[Connection] {
        match &self.kind {
            NodeKind::Behavior { configuration } => configuration,
            NodeKind::Meta { .. } => &[],
        }
    }

    /// Leaf behaviors at or below this node, in pre-order.
    pub fn leaves(&self) -> Vec<&BehaviorNode> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if !n.is_meta() {
                out.push(n)
            }
        });
        out
    }

    /// Distinct configuration source ports of every leaf below this node.
    pub fn source_ports(&self) -> Vec<PortName> {
        let mut out: Vec<PortName> = Vec::new();
        for leaf in self.leaves() {
            for c in leaf.configuration() {
                if !out.contains(&c.source) {
                    out.push(c.source.clone());
                }
            }
        }
        out
    }

    fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a BehaviorNode)) {
        f(self);
        for child in self.children() {
            child.visit(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BehaviorModel {
    pub defines: BTreeMap<String, String>,
    pub roots: Vec<BehaviorNode>,
}

impl BehaviorModel {
    pub fn new(roots: Vec<BehaviorNode>) -> Self {
        BehaviorModel {
            defines: BTreeMap::new(),
            roots,
        }
    }

    /// Every node in pre-order.
    pub fn nodes(&self) -> Vec<&BehaviorNode> {
        let mut out = Vec::new();
        for root in &self.roots {
            root.visit(&mut |n| out.push(n));
        }
        out
    }

    /// Leaf behaviors in pre-order.
    pub fn leaves(&self) -> Vec<&BehaviorNode> {
        self.roots.iter().flat_map(|r| r.leaves()).collect()
    }

    pub fn find(&self, name: &str) -> Option<&BehaviorNode> {
        self.nodes().into_iter().find(|n| n.name == name)
    }

    /// Chain of nodes from a root down to `name`, inclusive.
    pub fn path_to(&self, name: &str) -> Option<Vec<&BehaviorNode>> {
        fn search<'a>(nodes: &'a [BehaviorNode], name: &str, path: &mut Vec<&'a BehaviorNode>) -> bool {
            for node in nodes {
                path.push(node);
                if node.name == name || search(node.children(), name, path) {
                    return true;
                }
                path.pop();
            }
            false
        }
        let mut path = Vec::new();
        search(&self.roots, name, &mut path).then_some(path)
    }

    /// The sibling group containing `name`: its parent's children, or the
    /// roots for a top-level node.
    pub fn siblings_of(&self, name: &str) -> Option<&[BehaviorNode]> {
        let path = self.path_to(name)?;
        Some(match path.len() {
            1 => &self.roots,
            n => path[n - 2].children(),
        })
    }

    /// Name of the parent meta-behavior, `None` for top-level nodes.
    pub fn parent_of(&self, name: &str) -> Option<&str> {
        let path = self.path_to(name)?;
        (path.len() > 1).then(|| path[path.len() - 2].name.as_str())
    }

    /// Serializes to the behavior XML format. Defines are kept but connection
    /// endpoints are written already substituted.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<behaviors>\n");
        for (name, value) in &self.defines {
            out.push_str(&format!(
                "  <define name=\"{}\">{}</define>\n",
                xml_escape(name),
                xml_escape(value)
            ));
        }
        for node in self.nodes() {
            let tag = if node.is_meta() { "meta_behavior" } else { "behavior" };
            out.push_str(&format!("  <{tag} name=\"{}\">\n", xml_escape(&node.name)));
            for child in node.children() {
                out.push_str(&format!("    <behavior>{}</behavior>\n", xml_escape(&child.name)));
            }
            for c in node.configuration() {
                out.push_str(&format!(
                    "    <config at=\"{}\">{}</config>\n",
                    xml_escape(c.destination.as_str()),
                    xml_escape(c.source.as_str())
                ));
            }
            let condition = if node.condition.is_true() {
                String::new()
            } else {
                node.condition.render()
            };
            out.push_str(&format!("    <condition>{}</condition>\n", xml_escape(&condition)));
            out.push_str(&format!(
                "    <inhibition>{}</inhibition>\n",
                xml_escape(&node.inhibitions.join(", "))
            ));
            out.push_str(&format!("  </{tag}>\n"));
        }
        out.push_str("</behaviors>\n");
        out
    }
}

const WRAPPER: &str = "portarb-document";

fn strip_declaration(text: &str) -> &str {
    let trimmed = text.trim_start();
    if trimmed.starts_with("<?xml") {
        if let Some(end) = trimmed.find("?>") {
            return &trimmed[end + 2..];
        }
    }
    text
}

/// Parses with a synthetic wrapper so that root-less documents are accepted.
fn with_container<T>(
    text: &str,
    f: impl FnOnce(roxmltree::Node<'_, '_>) -> Result<T, ModelError>,
) -> Result<T, ModelError> {
    let wrapped = format!("<{WRAPPER}>{}</{WRAPPER}>", strip_declaration(text));
    let doc = roxmltree::Document::parse(&wrapped).map_err(|e| ModelError::Xml(e.to_string()))?;
    let wrapper = doc.root_element();
    let elements: Vec<_> = wrapper.children().filter(|n| n.is_element()).collect();
    let container = match elements.as_slice() {
        [only] if !matches!(only.tag_name().name(), "define" | "behavior" | "meta_behavior") => *only,
        _ => wrapper,
    };
    f(container)
}

fn text_of(node: roxmltree::Node<'_, '_>) -> String {
    node.children()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect::<String>()
        .trim()
        .to_string()
}

fn name_attr(node: roxmltree::Node<'_, '_>) -> Result<String, ModelError> {
    let name = node.attribute("name").ok_or_else(|| ModelError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attribute: "name",
    })?;
    let name = name.trim();
    if name.is_empty() || name.contains(',') {
        return Err(ModelError::InvalidName(name.to_string()));
    }
    Ok(name.to_string())
}

fn collect_defines(text: &str) -> Result<BTreeMap<String, String>, ModelError> {
    with_container(text, |container| {
        let mut defines = BTreeMap::new();
        for el in container.children().filter(|n| n.has_tag_name("define")) {
            let name = name_attr(el)?;
            if defines.insert(name.clone(), text_of(el)).is_some() {
                return Err(ModelError::DuplicateDefine(name));
            }
        }
        Ok(defines)
    })
}

fn substitute(text: &str, defines: &BTreeMap<String, String>) -> Result<String, ModelError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| ModelError::UnresolvedDefine(after.chars().take(32).collect()))?;
        let name = &after[..end];
        let value = defines
            .get(name)
            .ok_or_else(|| ModelError::UnresolvedDefine(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

struct RawNode {
    name: String,
    configuration: Vec<Connection>,
    children: Option<Vec<String>>,
    condition: BoolExpr,
    inhibitions: Vec<String>,
}

fn parse_raw(el: roxmltree::Node<'_, '_>, is_meta: bool) -> Result<RawNode, ModelError> {
    let name = name_attr(el)?;
    let mut raw = RawNode {
        name: name.clone(),
        configuration: Vec::new(),
        children: is_meta.then(Vec::new),
        condition: BoolExpr::True,
        inhibitions: Vec::new(),
    };
    let mut conditions = Vec::new();
    for child in el.children().filter(|n| n.is_element()) {
        match (child.tag_name().name(), is_meta) {
            ("condition", _) => {
                let text = text_of(child);
                let cond = parse_condition(&text).map_err(|source| ModelError::Condition {
                    behavior: name.clone(),
                    text: text.clone(),
                    source,
                })?;
                conditions.push(cond);
            }
            ("inhibition", _) => raw.inhibitions.extend(
                text_of(child)
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from),
            ),
            ("config", false) => {
                let at = child.attribute("at").ok_or(ModelError::MissingAttribute {
                    element: "config".into(),
                    attribute: "at",
                })?;
                let source = text_of(child);
                let connection = Connection::parse(&source, at.trim()).map_err(|e| ModelError::Port {
                    context: format!("behavior `{name}`"),
                    source: e,
                })?;
                raw.configuration.push(connection);
            }
            ("behavior" | "meta_behavior", true) => {
                if child.attribute("name").is_some() {
                    return Err(ModelError::Structure(format!(
                        "meta-behavior `{name}` must reference children by name, not define them inline"
                    )));
                }
                raw.children.as_mut().unwrap().push(text_of(child));
            }
            (other, _) => {
                return Err(ModelError::UnexpectedElement {
                    element: other.to_string(),
                    parent: name,
                })
            }
        }
    }
    raw.condition = BoolExpr::and(conditions).normalize();
    Ok(raw)
}

/// Parses a behavior-description document.
pub fn parse_behavior_model(xml_text: &str) -> Result<BehaviorModel, ModelError> {
    let defines = collect_defines(xml_text)?;
    let substituted = substitute(xml_text, &defines)?;

    let raws = with_container(&substituted, |container| {
        let mut raws = Vec::new();
        for el in container.children().filter(|n| n.is_element()) {
            match el.tag_name().name() {
                "define" => {}
                "behavior" => raws.push(parse_raw(el, false)?),
                "meta_behavior" => raws.push(parse_raw(el, true)?),
                other => {
                    return Err(ModelError::UnexpectedElement {
                        element: other.to_string(),
                        parent: container.tag_name().name().to_string(),
                    })
                }
            }
        }
        Ok(raws)
    })?;

    let mut index = HashMap::new();
    for (i, raw) in raws.iter().enumerate() {
        if index.insert(raw.name.as_str(), i).is_some() {
            return Err(ModelError::DuplicateName(raw.name.clone()));
        }
    }
    let mut parent: Vec<Option<usize>> = vec![None; raws.len()];
    for (i, raw) in raws.iter().enumerate() {
        match &raw.children {
            Some(children) => {
                if children.is_empty() {
                    return Err(ModelError::Structure(format!(
                        "meta-behavior `{}` has no children",
                        raw.name
                    )));
                }
                for child in children {
                    let &c = index.get(child.as_str()).ok_or_else(|| ModelError::UnknownBehavior {
                        reference: child.clone(),
                        parent: raw.name.clone(),
                    })?;
                    if parent[c].replace(i).is_some() {
                        return Err(ModelError::MultipleParents(child.clone()));
                    }
                }
            }
            None if raw.configuration.is_empty() => {
                return Err(ModelError::Structure(format!(
                    "behavior `{}` has no configuration",
                    raw.name
                )));
            }
            None => {}
        }
    }
    // every node reachable from a root was built; anything left sits on a cycle
    let mut built = HashSet::new();
    let roots = (0..raws.len())
        .filter(|&i| parent[i].is_none())
        .map(|i| build_node(i, &raws, &index, &mut built))
        .collect::<Vec<_>>();
    if let Some(raw) = raws
        .iter()
        .enumerate()
        .find(|(i, _)| !built.contains(i))
        .map(|(_, r)| r)
    {
        return Err(ModelError::ReferenceCycle(raw.name.clone()));
    }
    Ok(BehaviorModel { defines, roots })
}

fn build_node(i: usize, raws: &[RawNode], index: &HashMap<&str, usize>, built: &mut HashSet<usize>) -> BehaviorNode {
    built.insert(i);
    let raw = &raws[i];
    let kind = match &raw.children {
        Some(children) => NodeKind::Meta {
            children: children
                .iter()
                .map(|c| build_node(index[c.as_str()], raws, index, built))
                .collect(),
        },
        None => NodeKind::Behavior {
            configuration: raw.configuration.clone(),
        },
    };
    BehaviorNode {
        name: raw.name.clone(),
        kind,
        condition: raw.condition.clone(),
        inhibitions: raw.inhibitions.clone(),
    }
}

//! Application description: components, their ports, and the connections
//! between them.
//!
//! ```xml
//! <application name="search-and-track">
//!   <module name="Gaze Control"><input>/Gaze/pos:i</input></module>
//!   <module name="Face Detector"><output>/Face/pos:o</output></module>
//!   <connection from="/Face/pos:o" to="/Gaze/pos:i" window="500"/>
//! </application>
//! ```
//!
//! A `window` attribute sets the activation window of the destination port.

use std::collections::{BTreeMap, BTreeSet};

use super::port::{Connection, Direction, PortName};
use super::{xml_escape, ModelError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub inputs: Vec<PortName>,
    pub outputs: Vec<PortName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NetworkDescription {
    pub name: Option<String>,
    pub components: Vec<Component>,
    pub connections: Vec<Connection>,
    pub windows: BTreeMap<PortName, u64>,
}

impl NetworkDescription {
    pub fn has_connection(&self, connection: &Connection) -> bool {
        self.connections.contains(connection)
    }

    pub fn has_port(&self, port: &PortName) -> bool {
        self.components
            .iter()
            .any(|c| c.inputs.contains(port) || c.outputs.contains(port))
    }

    /// Connections arriving at `destination`, in declaration order.
    pub fn incoming(&self, destination: &PortName) -> Vec<&Connection> {
        self.connections
            .iter()
            .filter(|c| &c.destination == destination)
            .collect()
    }

    /// Connections leaving `source`, ordered by destination port.
    pub fn outgoing(&self, source: &PortName) -> Vec<&Connection> {
        let mut out: Vec<_> = self.connections.iter().filter(|c| &c.source == source).collect();
        out.sort_by(|a, b| a.destination.cmp(&b.destination));
        out
    }

    /// Every input port that has at least one incoming connection.
    pub fn destinations(&self) -> BTreeSet<&PortName> {
        self.connections.iter().map(|c| &c.destination).collect()
    }

    pub fn window_for(&self, destination: &PortName, default_ms: u64) -> u64 {
        self.windows.get(destination).copied().unwrap_or(default_ms)
    }

    /// Adds a connection between already-declared ports; returns false if it
    /// was already present.
    pub fn add_connection(&mut self, connection: Connection) -> Result<bool, ModelError> {
        for port in [&connection.source, &connection.destination] {
            if !self.has_port(port) {
                return Err(ModelError::UndeclaredPort {
                    port: port.to_string(),
                    connection: connection.to_string(),
                });
            }
        }
        if self.has_connection(&connection) {
            return Ok(false);
        }
        self.connections.push(connection);
        Ok(true)
    }

    pub fn to_xml(&self) -> String {
        let mut out = match &self.name {
            Some(name) => format!("<application name=\"{}\">\n", xml_escape(name)),
            None => "<application>\n".to_string(),
        };
        for component in &self.components {
            out.push_str(&format!("  <module name=\"{}\">\n", xml_escape(&component.name)));
            for p in &component.inputs {
                out.push_str(&format!("    <input>{p}</input>\n"));
            }
            for p in &component.outputs {
                out.push_str(&format!("    <output>{p}</output>\n"));
            }
            out.push_str("  </module>\n");
        }
        let mut windowed = BTreeSet::new();
        for c in &self.connections {
            match self.windows.get(&c.destination) {
                Some(w) if windowed.insert(&c.destination) => out.push_str(&format!(
                    "  <connection from=\"{}\" to=\"{}\" window=\"{w}\"/>\n",
                    c.source, c.destination
                )),
                _ => out.push_str(&format!(
                    "  <connection from=\"{}\" to=\"{}\"/>\n",
                    c.source, c.destination
                )),
            }
        }
        out.push_str("</application>\n");
        out
    }
}

fn port_text(node: roxmltree::Node<'_, '_>, direction: Direction, module: &str) -> Result<PortName, ModelError> {
    let text: String = node.children().filter_map(|n| n.text()).collect();
    PortName::parse_with(text.trim(), direction).map_err(|source| ModelError::Port {
        context: format!("module `{module}`"),
        source,
    })
}

fn required<'a>(node: roxmltree::Node<'a, '_>, attribute: &'static str) -> Result<&'a str, ModelError> {
    node.attribute(attribute).ok_or_else(|| ModelError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attribute,
    })
}

pub fn parse_network(xml_text: &str) -> Result<NetworkDescription, ModelError> {
    let doc = roxmltree::Document::parse(xml_text).map_err(|e| ModelError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "application" {
        return Err(ModelError::UnexpectedElement {
            element: root.tag_name().name().to_string(),
            parent: "document".into(),
        });
    }
    let mut net = NetworkDescription {
        name: root.attribute("name").map(String::from),
        ..Default::default()
    };
    let mut declared = BTreeSet::new();
    let mut pending = Vec::new();

    for el in root.children().filter(|n| n.is_element()) {
        match el.tag_name().name() {
            "module" => {
                let name = required(el, "name")?.to_string();
                let mut component = Component {
                    name: name.clone(),
                    inputs: Vec::new(),
                    outputs: Vec::new(),
                };
                for child in el.children().filter(|n| n.is_element()) {
                    let port = match child.tag_name().name() {
                        "input" => {
                            let p = port_text(child, Direction::Input, &name)?;
                            component.inputs.push(p.clone());
                            p
                        }
                        "output" => {
                            let p = port_text(child, Direction::Output, &name)?;
                            component.outputs.push(p.clone());
                            p
                        }
                        // deployment details such as parameters are not our concern
                        _ => continue,
                    };
                    if !declared.insert(port.clone()) {
                        return Err(ModelError::DuplicatePort(port.to_string()));
                    }
                }
                net.components.push(component);
            }
            "connection" => pending.push(el),
            _ => {}
        }
    }

    for el in pending {
        let from = required(el, "from")?.trim();
        let to = required(el, "to")?.trim();
        let connection = Connection::parse(from, to).map_err(|source| ModelError::Port {
            context: "connection".into(),
            source,
        })?;
        if net.has_connection(&connection) {
            return Err(ModelError::DuplicateConnection(connection.to_string()));
        }
        for port in [&connection.source, &connection.destination] {
            if !declared.contains(port) {
                return Err(ModelError::UndeclaredPort {
                    port: port.to_string(),
                    connection: connection.to_string(),
                });
            }
        }
        if let Some(w) = el.attribute("window") {
            let ms: u64 = w
                .trim()
                .parse()
                .ok()
                .filter(|&ms| ms > 0)
                .ok_or_else(|| ModelError::InvalidWindow(w.to_string()))?;
            if let Some(prev) = net.windows.insert(connection.destination.clone(), ms) {
                if prev != ms {
                    return Err(ModelError::ConflictingWindow(connection.destination.to_string()));
                }
            }
        }
        net.connections.push(connection);
    }
    Ok(net)
}

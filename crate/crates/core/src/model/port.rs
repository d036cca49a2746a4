use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Characters that may not appear inside a port segment. They are reserved by
/// the condition syntax, which needs to find where a port name ends.
const RESERVED: &[char] = &[
    '(', ')', '&', '|', '!', '¬', '∧', '∨', ',', ':', '/', '<', '>', '"', '\'',
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Input => f.write_str("input"),
            Direction::Output => f.write_str("output"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PortError {
    #[error("invalid port name `{name}`: {reason}")]
    Malformed { name: String, reason: &'static str },
    #[error("port `{name}` must be an {expected} port")]
    WrongDirection { name: String, expected: Direction },
}

/// A port identifier such as `/Gaze/pos:i`.
///
/// Ordering and equality are byte-wise on the full text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortName(String);

impl PortName {
    pub fn parse(text: &str) -> Result<Self, PortError> {
        let bad = |reason| PortError::Malformed {
            name: text.to_string(),
            reason,
        };
        let path = text
            .strip_suffix(":i")
            .or_else(|| text.strip_suffix(":o"))
            .ok_or_else(|| bad("must end with `:i` or `:o`"))?;
        let path = path.strip_prefix('/').ok_or_else(|| bad("must begin with `/`"))?;
        for segment in path.split('/') {
            if segment.is_empty() {
                return Err(bad("empty segment"));
            }
            if segment.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c)) {
                return Err(bad("segment contains whitespace or a reserved character"));
            }
        }
        Ok(PortName(text.to_string()))
    }

    /// Parses and additionally requires the given direction.
    pub fn parse_with(text: &str, direction: Direction) -> Result<Self, PortError> {
        let port = Self::parse(text)?;
        port.expect(direction)?;
        Ok(port)
    }

    pub fn direction(&self) -> Direction {
        if self.0.ends_with(":i") {
            Direction::Input
        } else {
            Direction::Output
        }
    }

    pub fn is_output(&self) -> bool {
        self.direction() == Direction::Output
    }

    pub fn expect(&self, direction: Direction) -> Result<(), PortError> {
        if self.direction() == direction {
            Ok(())
        } else {
            Err(PortError::WrongDirection {
                name: self.0.clone(),
                expected: direction,
            })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PortName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for PortName {
    type Err = PortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl AsRef<str> for PortName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Serialize for PortName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for PortName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        PortName::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// A directed link from an output port to an input port.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Connection {
    pub source: PortName,
    pub destination: PortName,
}

impl Connection {
    pub fn new(source: PortName, destination: PortName) -> Result<Self, PortError> {
        source.expect(Direction::Output)?;
        destination.expect(Direction::Input)?;
        Ok(Connection { source, destination })
    }

    pub fn parse(source: &str, destination: &str) -> Result<Self, PortError> {
        Self::new(PortName::parse(source)?, PortName::parse(destination)?)
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source, self.destination)
    }
}

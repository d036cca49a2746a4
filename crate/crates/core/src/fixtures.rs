//! Checked-in example applications under `fixtures/<name>/`.
//!
//! Each fixture directory holds `model.xml`, `network.xml`, `scenario.json`,
//! and the reviewed expected outputs `rules.json` and `trace.jsonl`.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub const FIXTURE_NAMES: [&str; 4] = ["be-curious", "search-and-track", "no-rules", "conflict-demo"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub name: &'static str,
    pub dir: PathBuf,
    pub model: PathBuf,
    pub network: PathBuf,
    pub scenario: PathBuf,
    pub expected_rules: PathBuf,
    pub expected_trace: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown fixture `{0}` (known: be-curious, search-and-track, no-rules, conflict-demo)")]
pub struct UnknownFixture(pub String);

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> Result<Fixture, UnknownFixture> {
    let name = FIXTURE_NAMES
        .into_iter()
        .find(|n| *n == name)
        .ok_or_else(|| UnknownFixture(name.to_string()))?;
    let dir = fixtures_dir().join(name);
    Ok(Fixture {
        name,
        model: dir.join("model.xml"),
        network: dir.join("network.xml"),
        scenario: dir.join("scenario.json"),
        expected_rules: dir.join("rules.json"),
        expected_trace: dir.join("trace.jsonl"),
        dir,
    })
}

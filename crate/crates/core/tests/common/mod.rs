#![allow(dead_code)]

use std::fs;
use std::path::Path;

use portarb::compiler::Compilation;
use portarb::fixtures::{fixture, Fixture};
use portarb::{compile, load_scenario, parse_behavior_model, parse_network, run, Trace};

pub fn load_fixture(name: &str) -> Fixture {
    fixture(name).unwrap()
}

pub fn compile_files(model: &Path, network: &Path, auto_observe: bool) -> Compilation {
    let model = parse_behavior_model(&fs::read_to_string(model).unwrap()).unwrap();
    let network = parse_network(&fs::read_to_string(network).unwrap()).unwrap();
    compile(&model, &network, auto_observe)
}

/// Compiles a scenario's model with auto-observe and runs it to the horizon,
/// the same pipeline as `portarb simulate`.
pub fn simulate(scenario_path: &Path) -> (Compilation, Trace) {
    let mut scenario = load_scenario(scenario_path).unwrap();
    let compilation = compile(&scenario.model, &scenario.network, true);
    assert!(!compilation.has_errors(), "{:?}", compilation.diagnostics);
    scenario.network = compilation.network.clone();
    let trace = run(&scenario, compilation.rules.as_ref().unwrap()).unwrap();
    (compilation, trace)
}

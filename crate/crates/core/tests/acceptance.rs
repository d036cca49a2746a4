//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use portarb::bdd::Assignment;
use portarb::simnet::trace_to_jsonl;
use portarb::{
    check_conflicts, emit_rules, ActivationTable, BddManager, BoolExpr, Connection, Outcome, PortName, Reason,
    RuleFormat, TraceRecord,
};

use common::{compile_files, load_fixture, simulate};

const SEARCH_AND_TRACK_RULES: &str = "\
/Object/pos:o and not /collision:o => Select(/Object/pos:o) @ /Arm/pos:i
/RestArm/pos:o and not /Object/pos:o => Select(/RestArm/pos:o) @ /Arm/pos:i
/Face/pos:o and not /Object/pos:o => Select(/Face/pos:o) @ /Gaze/pos:i
/Object/pos:o and not /collision:o => Select(/Object/pos:o) @ /Gaze/pos:i
/RandomLook/pos:o and not /Face/pos:o and not /Object/pos:o => Select(/RandomLook/pos:o) @ /Gaze/pos:i
";

// The hand-written rules shown for the arm and gaze arbitrators, in text form.
const DISPLAYED_RESTARM: &str =
    "/RestArm/pos:o and not /Object/pos:o and not /collision:o => Select(/RestArm/pos:o) @ /Arm/pos:i";
const DISPLAYED_OBJECT: &str = "/Object/pos:o and not /collision:o => Select(/Object/pos:o) @ /Arm/pos:i";
const DISPLAYED_RANDOMLOOK: &str =
    "/RandomLook/pos:o and not /Face/pos:o and not /Object/pos:o => Select(/RandomLook/pos:o) @ /Gaze/pos:i";

fn p(s: &str) -> PortName {
    PortName::parse(s).unwrap()
}

fn within(limit: Duration, start: Instant, what: &str) {
    let took = start.elapsed();
    assert!(took < limit, "{what} took {took:?}, limit {limit:?}");
}

fn ac1_golden_rules() {
    let start = Instant::now();
    let f = load_fixture("search-and-track");
    let compilation = compile_files(&f.model, &f.network, true);
    assert!(!compilation.has_errors(), "{:?}", compilation.diagnostics);
    let rules = compilation.rules.as_ref().unwrap();
    assert_eq!(rules.len(), 5);
    let text = emit_rules(rules, RuleFormat::Text);
    assert_eq!(text, SEARCH_AND_TRACK_RULES);
    assert!(text.lines().any(|l| l == DISPLAYED_OBJECT));
    assert!(text.lines().any(|l| l == DISPLAYED_RANDOMLOOK));
    assert_eq!(
        emit_rules(rules, RuleFormat::Json),
        fs::read_to_string(&f.expected_rules).unwrap()
    );

    let variant = compile_files(&f.dir.join("model-restarm-condition.xml"), &f.network, true);
    let variant_text = emit_rules(variant.rules.as_ref().unwrap(), RuleFormat::Text);
    assert!(variant_text.lines().any(|l| l == DISPLAYED_RESTARM), "{variant_text}");
    assert!(variant_text.lines().any(|l| l == DISPLAYED_OBJECT));
    assert!(variant_text.lines().any(|l| l == DISPLAYED_RANDOMLOOK));
    within(Duration::from_secs(1), start, "rule extraction");
}

const POOL: [&str; 8] = ["/a:o", "/b:o", "/c:o", "/d:o", "/e:o", "/f:o", "/g:o", "/h:o"];

fn random_expr(rng: &mut ChaCha8Rng, vars: &[PortName], depth: u32) -> BoolExpr {
    if depth == 0 || rng.random_bool(0.25) {
        return match rng.random_range(0..20) {
            0 => BoolExpr::True,
            1 => BoolExpr::False,
            _ => BoolExpr::lit(vars.choose(rng).unwrap().clone()),
        };
    }
    match rng.random_range(0..3) {
        0 => BoolExpr::not(random_expr(rng, vars, depth - 1)),
        op => {
            let n = rng.random_range(2..=3);
            let children: Vec<_> = (0..n).map(|_| random_expr(rng, vars, depth - 1)).collect();
            if op == 1 {
                BoolExpr::and(children)
            } else {
                BoolExpr::or(children)
            }
        }
    }
}

/// A syntactically different expression with the same truth table.
fn rewrite(e: &BoolExpr, rng: &mut ChaCha8Rng) -> BoolExpr {
    match e {
        BoolExpr::Literal(_) if rng.random_bool(0.3) => BoolExpr::not(BoolExpr::not(e.clone())),
        BoolExpr::True | BoolExpr::False | BoolExpr::Literal(_) => e.clone(),
        BoolExpr::Not(inner) => match inner.as_ref() {
            BoolExpr::And(cs) => BoolExpr::or(cs.iter().map(|c| rewrite(&BoolExpr::not(c.clone()), rng))),
            BoolExpr::Or(cs) => BoolExpr::and(cs.iter().map(|c| rewrite(&BoolExpr::not(c.clone()), rng))),
            BoolExpr::Not(x) => rewrite(x, rng),
            _ => BoolExpr::not(rewrite(inner, rng)),
        },
        BoolExpr::And(cs) | BoolExpr::Or(cs) => {
            let mut children: Vec<_> = cs.iter().map(|c| rewrite(c, rng)).collect();
            children.shuffle(rng);
            if matches!(e, BoolExpr::And(_)) {
                children.push(BoolExpr::True);
                BoolExpr::and(children)
            } else {
                children.push(BoolExpr::False);
                BoolExpr::or(children)
            }
        }
    }
}

fn truth_table(e: &BoolExpr, vars: &[PortName]) -> Vec<bool> {
    (0..1u32 << vars.len())
        .map(|bits| e.eval(&|port: &PortName| vars.iter().position(|v| v == port).is_some_and(|i| bits >> i & 1 == 1)))
        .collect()
}

fn assignment(vars: &[PortName], bits: u32) -> Assignment {
    vars.iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), bits >> i & 1 == 1))
        .collect()
}

fn ac2_bdd_oracle() {
    let start = Instant::now();
    let pool: Vec<PortName> = POOL.iter().map(|s| p(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x05ee_dbdd);
    let mut bdd = BddManager::new();
    let mut by_table: BTreeMap<Vec<bool>, portarb::NodeRef> = BTreeMap::new();
    let mut pairs = 0;
    for _ in 0..600 {
        let n = rng.random_range(1..=8);
        let mut vars = pool.clone();
        vars.shuffle(&mut rng);
        vars.truncate(n);
        let e = random_expr(&mut rng, &vars, 5);
        let node = bdd.build(&e);
        let local = truth_table(&e, &vars);
        for (bits, expected) in local.iter().enumerate() {
            assert_eq!(
                bdd.evaluate(node, &assignment(&vars, bits as u32)),
                *expected,
                "{}",
                e.render()
            );
        }

        let twin = rewrite(&e, &mut rng);
        assert_eq!(truth_table(&twin, &vars), local);
        assert_eq!(bdd.build(&twin), node, "{} vs {}", e.render(), twin.render());

        let global = truth_table(&e, &pool);
        match by_table.get(&global) {
            Some(seen) => {
                assert_eq!(*seen, node, "equal functions, different nodes: {}", e.render());
                pairs += 1;
            }
            None => {
                assert!(
                    !by_table.values().any(|n| *n == node),
                    "different functions share a node"
                );
                by_table.insert(global, node);
            }
        }
    }
    assert!(pairs > 0, "no naturally equal pairs generated");
    within(Duration::from_secs(10), start, "BDD oracle");
}

fn s1_records() -> Vec<TraceRecord> {
    let f = load_fixture("search-and-track");
    simulate(&f.scenario).1.records
}

fn in_window<'a>(records: &'a [TraceRecord], from: u64, to: u64, src: &str, dst: &str) -> Vec<&'a TraceRecord> {
    let matching: Vec<_> = records
        .iter()
        .filter(|r| (from..to).contains(&r.t) && r.src.as_str() == src && r.dst.as_str() == dst)
        .collect();
    assert!(!matching.is_empty(), "no {src} -> {dst} records in [{from}, {to})");
    matching
}

fn ac3_scenario_s1() {
    let start = Instant::now();
    let f = load_fixture("search-and-track");
    let (_, trace) = simulate(&f.scenario);
    assert_eq!(
        trace_to_jsonl(&trace.records),
        fs::read_to_string(&f.expected_trace).unwrap()
    );
    let r = &trace.records;
    let accepted = |x: &&TraceRecord| x.outcome == Outcome::Accept;

    assert!(in_window(r, 5000, 9000, "/Face/pos:o", "/Gaze/pos:i")
        .iter()
        .all(accepted));
    assert!(in_window(r, 5000, 9000, "/RandomLook/pos:o", "/Gaze/pos:i")
        .iter()
        .all(|x| x.reason == Reason::ConstraintFalse));

    assert!(in_window(r, 10000, 14000, "/Object/pos:o", "/Gaze/pos:i")
        .iter()
        .all(accepted));
    assert!(in_window(r, 10000, 14000, "/Object/pos:o", "/Arm/pos:i")
        .iter()
        .all(accepted));
    assert!(in_window(r, 10000, 14000, "/RestArm/pos:o", "/Arm/pos:i")
        .iter()
        .all(|x| !accepted(x)));

    let arm = p("/Arm/pos:i");
    assert!(!r
        .iter()
        .any(|x| (14000..16000).contains(&x.t) && x.dst == arm && x.outcome == Outcome::Accept));
    for x in in_window(r, 14000, 16000, "/Object/pos:o", "/Arm/pos:i") {
        assert_eq!(x.reason, Reason::ConstraintFalse);
        assert!(x.assignment[&p("/collision:o")]);
    }
    for x in in_window(r, 14000, 16000, "/RestArm/pos:o", "/Arm/pos:i") {
        assert_eq!(x.reason, Reason::ConstraintFalse);
        assert!(x.assignment[&p("/Object/pos:o")]);
    }
    within(Duration::from_secs(2), start, "S1 simulation");
}

fn ac4_window_boundaries() {
    let c = Connection::new(p("/a:o"), p("/b:i")).unwrap();
    let mut table = ActivationTable::new(1000);
    table.record(&c, 0).unwrap();
    assert!(table.is_active(&c, 999));
    assert!(!table.is_active(&c, 1000));

    // events: (is_arrival, gap before it); queries compare with a replay of
    // every arrival so far
    let strategy = (1u64..3000, prop::collection::vec((any::<bool>(), 0u64..2500), 1..60));
    let config = Config {
        cases: 512,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new(config)
        .run(&strategy, |(window, events)| {
            let mut table = ActivationTable::new(window);
            let mut arrivals = Vec::new();
            let mut t = 0;
            for (arrival, gap) in events {
                t += gap;
                if arrival {
                    table.record(&c, t).unwrap();
                    arrivals.push(t);
                }
                let brute = arrivals.iter().any(|&a| a <= t && t - a < window);
                prop_assert_eq!(table.is_active(&c, t), brute);
                let later = t + window;
                let brute_later = arrivals.iter().any(|&a| later - a < window);
                prop_assert_eq!(table.is_active(&c, later), brute_later);
            }
            Ok(())
        })
        .unwrap();
}

fn ac5_single_winner() {
    let mut winners: BTreeMap<(u64, PortName), usize> = BTreeMap::new();
    for r in s1_records().iter().filter(|r| r.outcome == Outcome::Accept) {
        *winners.entry((r.t, r.dst.clone())).or_default() += 1;
    }
    assert!(!winners.is_empty());
    if let Some(((t, port), n)) = winners.iter().find(|(_, n)| **n > 1) {
        panic!("{n} accepts at {port} t={t}");
    }

    let f = load_fixture("search-and-track");
    let rules = compile_files(&f.model, &f.network, true).rules.unwrap();
    assert!(check_conflicts(&rules, &mut BddManager::new()).is_empty());

    let f = load_fixture("conflict-demo");
    let rules = compile_files(&f.model, &f.network, false).rules.unwrap();
    let conflicts = check_conflicts(&rules, &mut BddManager::new());
    assert_eq!(conflicts.len(), 1);
    assert_eq!(conflicts[0].code, "CONFLICT");
    assert_eq!(conflicts[0].location, "/Arm/pos:i");
}

fn ac6_determinism() {
    for name in portarb::fixtures::FIXTURE_NAMES {
        let f = load_fixture(name);
        let outputs: Vec<(String, String, String)> = (0..10)
            .map(|_| {
                let (compilation, trace) = simulate(&f.scenario);
                let rules = compilation.rules.as_ref().unwrap();
                (
                    emit_rules(rules, RuleFormat::Text),
                    emit_rules(rules, RuleFormat::Json),
                    trace_to_jsonl(&trace.records),
                )
            })
            .collect();
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{name} differs between runs");
        assert_eq!(
            outputs[0].1,
            fs::read_to_string(&f.expected_rules).unwrap(),
            "{name} rules"
        );
        assert_eq!(
            outputs[0].2,
            fs::read_to_string(&f.expected_trace).unwrap(),
            "{name} trace"
        );
    }
}

fn ac7_no_rule_semantics() {
    let f = load_fixture("no-rules");
    let (compilation, trace) = simulate(&f.scenario);
    assert!(compilation.rules.unwrap().is_empty());
    assert!(!trace.records.is_empty());
    assert!(trace
        .records
        .iter()
        .all(|r| r.outcome == Outcome::Discard && r.reason == Reason::NoRule));
    assert!(trace.deliveries.is_empty());

    let collision: Vec<_> = s1_records()
        .into_iter()
        .filter(|r| r.src.as_str() == "/collision:o" && r.dst.as_str() == "/Arm/pos:i")
        .collect();
    assert_eq!(collision.len(), 20);
    assert!(collision
        .iter()
        .all(|r| r.outcome == Outcome::Discard && r.reason == Reason::NoRule));
}

fn main() {
    let criteria: [(&str, fn()); 7] = [
        ("AC1 golden rule extraction", ac1_golden_rules),
        ("AC2 BDD oracle equivalence and canonicity", ac2_bdd_oracle),
        ("AC3 scenario S1 end-to-end", ac3_scenario_s1),
        ("AC4 activation window boundaries", ac4_window_boundaries),
        ("AC5 at most one winner per port and instant", ac5_single_winner),
        ("AC6 determinism over repeated runs", ac6_determinism),
        ("AC7 no-rule semantics", ac7_no_rule_semantics),
    ];
    panic::set_hook(Box::new(|info| eprintln!("    {info}")));
    let mut failed = 0;
    for (name, check) in criteria {
        let ok = panic::catch_unwind(AssertUnwindSafe(check)).is_ok();
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

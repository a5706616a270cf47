mod common;

use std::path::PathBuf;

use nlwe_core::families::{gen_prop3, gen_set1, gen_set_b};
use nlwe_core::protocol::*;
use nlwe_core::search::{exhaustive_search, SearchConfig, SearchOutcome};

#[test]
fn prop6_step_one_matches_listing() {
    let (expected, got) = common::prop6_step_one();
    assert_eq!(got, expected);
}

fn repo_file(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "protocols", name].iter().collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn shipped_protocol_files_are_canonical() {
    assert_eq!(repo_file("prop6.proto"), serialize_protocol(&gen_protocol_prop6()));
    assert_eq!(repo_file("prop8.proto"), serialize_protocol(&gen_protocol_prop8()));
    assert_eq!(repo_file("prop9.proto"), serialize_protocol(&gen_protocol_prop9()));
    assert_eq!(repo_file("prop7_d5.proto"), serialize_protocol(&gen_protocol_prop7(5).unwrap()));
}

#[test]
fn shipped_prop7_file_runs() {
    let t = parse_protocol(&repo_file("prop7_d5.proto")).unwrap();
    let r = run_protocol(&t, &gen_prop3(5).unwrap()).unwrap();
    assert!(r.success, "{:?}", r.failures);
    assert_eq!(r.states.len(), 30);
}

#[test]
fn run_is_deterministic() {
    let t = gen_protocol_prop6();
    let a = run_protocol(&t, &gen_set_b()).unwrap();
    let b = run_protocol(&t, &gen_set_b()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn search_result_replays() {
    let (s, _, steps) = apply_resource_spec(&gen_set1(), "bell@A_B").unwrap();
    let r = exhaustive_search(&s, &SearchConfig::default()).unwrap();
    let SearchOutcome::Found(root) = r.outcome else { panic!("{}", r.summary()) };
    let tree = ProtocolTree { name: "found".into(), family: Some("set1".into()), family_d: None, prep: steps, root };
    let rep = run_protocol(&tree, &gen_set1()).unwrap();
    assert!(rep.success, "{:?}", rep.failures);
    let text = serialize_protocol(&tree);
    assert_eq!(parse_protocol(&text).unwrap(), tree);
}

#[test]
fn incomplete_protocol_rejected_before_running() {
    let text = "protocol bad\nresource ghz3 a@A b@B c@C\nmeasure B { M = P[B:{0,2}; b:{0}] }";
    let t = parse_protocol(text).unwrap();
    match run_protocol(&t, &gen_set_b()) {
        Err(nlwe_core::Error::Completeness { party, .. }) => assert_eq!(party, "B"),
        other => panic!("{other:?}"),
    }
}

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn root() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", ".."].iter().collect()
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn nlwe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlwe")).args(args).current_dir(root()).output().expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let o = nlwe(args);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)));
    (v, o.status.code().unwrap())
}

fn text(args: &[&str]) -> String {
    let mut a = args.to_vec();
    a.extend(["--format", "text"]);
    let o = nlwe(&a);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn envelope_fields() {
    let (v, code) = json(&["certify", "setB"]);
    assert_eq!(code, 0);
    assert_eq!(v["tool"], "nlwe");
    assert_eq!(v["status"], "ok");
    assert_eq!(v["command"][0], "certify");
    assert_eq!(v["inputs"][0]["name"], "setB");
    assert_eq!(v["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn file_input_is_hashed() {
    let path = fixture("set2.txt");
    let (v, code) = json(&["certify", &path]);
    assert_eq!(code, 0);
    let want = format!("{:x}", Sha256::digest(std::fs::read(&path).unwrap()));
    assert_eq!(v["inputs"][0]["sha256"], want.as_str());
    // The file carries the same states as the built-in family.
    let (builtin, _) = json(&["certify", "set2"]);
    assert_eq!(v["payload"], builtin["payload"]);
}

#[test]
fn generate_round_trips_through_a_file() {
    let listing = text(&["generate", "setC"]);
    let dir = std::env::temp_dir().join(format!("nlwe-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("setC.txt");
    std::fs::write(&p, &listing).unwrap();
    assert_eq!(text(&["flatten", p.to_str().unwrap(), "A", "B"]), text(&["flatten", "setC", "A", "B"]));
    let (v, code) = json(&["certify", p.to_str().unwrap(), "--expect", "strong-nonlocal"]);
    assert_eq!((code, v["status"].as_str().unwrap()), (0, "ok"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn certify_expectations_set_exit_code() {
    assert_eq!(json(&["certify", "setB", "--expect", "irreducible"]).1, 0);
    let (v, code) = json(&["certify", "setB", "--expect", "strong-nonlocal"]);
    assert_eq!((code, v["status"].as_str().unwrap()), (1, "expectation-failed"));
}

#[test]
fn certify_tables_for_set_a() {
    let (v, code) = json(&["certify", "setA", "--tables", "--expect", "strong-nonlocal"]);
    assert_eq!(code, 0);
    let tables = v["payload"]["tables"].as_array().unwrap();
    assert_eq!(tables.len(), 6);
    assert!(tables.iter().all(|t| t["all_hold"] == true));
}

#[test]
fn run_shipped_protocols() {
    for (family, file) in [("setB", "protocols/prop6.proto"), ("setC", "protocols/prop8.proto"), ("setA", "protocols/prop9.proto")] {
        let (v, code) = json(&["run", family, file, "--expect", "success"]);
        assert_eq!(code, 0, "{file}: {}", v["payload"]);
    }
    let (_, code) = json(&["run", "prop3", "protocols/prop7_d5.proto", "--d", "5", "--expect", "success"]);
    assert_eq!(code, 0);
    assert_eq!(json(&["run", "setB", "protocols/prop6.proto", "--expect", "failure"]).1, 1);
}

#[test]
fn search_verdicts() {
    assert_eq!(json(&["search", "set1", "--resource", "bell@A_B", "--expect", "found"]).1, 0);
    assert_eq!(json(&["search", "set2", "--resource", "bell@A_B", "--expect", "exhausted"]).1, 0);
    let (v, code) =
        json(&["search", "setA", "--resource", "mes3@BA+bell@AB_C", "--first", "C", "--catalog", "correlated", "--expect", "exhausted"]);
    assert_eq!(code, 0);
    assert_eq!(v["payload"]["first_moves"].as_array().unwrap().len(), 3);
}

#[test]
fn search_result_runs_as_protocol() {
    let (v, _) = json(&["search", "set1", "--resource", "bell@A_B"]);
    let body = v["payload"]["report"]["outcome"]["protocol"].as_str().unwrap();
    let dir = std::env::temp_dir().join(format!("nlwe-search-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("found.proto");
    std::fs::write(&p, format!("protocol found\nresource bell a@A b@B\n{body}")).unwrap();
    let (r, code) = json(&["run", "set1", p.to_str().unwrap(), "--expect", "success"]);
    assert_eq!(code, 0, "{}", r["payload"]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn flatten_names_the_merged_party() {
    let out = text(&["flatten", "setA", "A", "B"]);
    assert!(out.starts_with("parties: AB=9 C=3\n"));
    assert!(out.contains("phi_1 : |0>+|1>+|6>+|7> ; |2>\n"));
}

#[test]
fn protocol_text_matches_shipped_files() {
    for (name, file) in [("prop6", "prop6.proto"), ("prop8", "prop8.proto"), ("prop9", "prop9.proto")] {
        let shipped = std::fs::read_to_string(root().join("protocols").join(file)).unwrap();
        assert_eq!(text(&["protocol", name]), shipped);
    }
    assert_eq!(text(&["protocol", "prop7", "--d", "5"]), std::fs::read_to_string(root().join("protocols/prop7_d5.proto")).unwrap());
}

#[test]
fn errors_exit_two() {
    let (v, code) = json(&["certify", "nosuch"]);
    assert_eq!((code, v["status"].as_str().unwrap()), (2, "error"));
    assert_eq!(json(&["protocol", "prop7", "--d", "4"]).1, 2);
    assert_eq!(json(&["search", "set1", "--depth", "0"]).1, 2);
}

#[test]
fn output_is_deterministic() {
    let a = nlwe(&["certify", "setA"]).stdout;
    let b = nlwe(&["certify", "setA"]).stdout;
    assert_eq!(a, b);
}

//! `nlwe`: generate, certify, run protocols and search from the command line.

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use nlwe_core::families::{generate, FamilyId};
use nlwe_core::hilbert::{parse_state_set, write_state_set};
use nlwe_core::opm::{certify_cuts, tables::replicate_tables, Cut};
use nlwe_core::protocol::{
    apply_resource_spec, gen_protocol_prop6, gen_protocol_prop7, gen_protocol_prop8, gen_protocol_prop9, parse_protocol, run_protocol,
    serialize_protocol,
};
use nlwe_core::search::{enumerate_catalog, exhaustive_search, search_first_moves, CatalogKind, SearchConfig};
use nlwe_core::States;

#[derive(Parser)]
#[command(name = "nlwe", version, about = "Nonlocality-without-entanglement toolkit")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit a built-in family as a state-set listing.
    Generate {
        family: String,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Certify local irreducibility per cut.
    Certify {
        /// Family name or state-set file.
        input: String,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value = "all")]
        cuts: String,
        /// Also replicate the forced-relation tables (setA only).
        #[arg(long)]
        tables: bool,
        /// strong-nonlocal | irreducible | reducible | not-strong
        #[arg(long)]
        expect: Option<String>,
    },
    /// Execute a protocol file on a family.
    Run {
        input: String,
        protocol: String,
        #[arg(long)]
        d: Option<usize>,
        /// success | failure
        #[arg(long)]
        expect: Option<String>,
    },
    /// Search the basis-aligned class for a protocol.
    Search {
        input: String,
        #[arg(long)]
        d: Option<usize>,
        /// e.g. `mes3@BA+bell@AB_C`, `bell@A_B`, `ghz3`
        #[arg(long)]
        resource: Option<String>,
        #[arg(long, default_value = "restricted")]
        class: String,
        /// Maximum rounds, or `unbounded`.
        #[arg(long, default_value = "8")]
        depth: String,
        /// Force each catalog entry as this party's first measurement.
        #[arg(long)]
        first: Option<String>,
        /// full | correlated
        #[arg(long, default_value = "full")]
        catalog: String,
        /// Keep catalog entries equal up to ancilla relabeling.
        #[arg(long)]
        no_dedup: bool,
        /// found | exhausted | depth-limited
        #[arg(long)]
        expect: Option<String>,
    },
    /// Merge two parties into one.
    Flatten {
        input: String,
        first: String,
        second: String,
        #[arg(long)]
        d: Option<usize>,
    },
    /// Print a built-in protocol in the protocol language.
    Protocol {
        /// prop6 | prop7 | prop8 | prop9
        name: String,
        #[arg(long)]
        d: Option<usize>,
    },
}

#[derive(Serialize)]
struct InputDigest {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct ReportEnvelope {
    tool: &'static str,
    version: &'static str,
    command: Vec<String>,
    inputs: Vec<InputDigest>,
    payload: Value,
    status: String,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn digest(name: &str, content: &str) -> InputDigest {
    let h = Sha256::digest(content.as_bytes());
    InputDigest { name: name.to_string(), sha256: h.iter().map(|b| format!("{b:02x}")).collect() }
}

/// A family name, or a path to a state-set listing.
fn load(input: &str, d: Option<usize>) -> Result<(States, InputDigest), Failure> {
    if Path::new(input).is_file() {
        let text = std::fs::read_to_string(input)?;
        return Ok((parse_state_set(&text)?, digest(input, &text)));
    }
    let id = FamilyId::parse(input, d)?;
    let (s, _) = generate(id)?;
    let text = write_state_set(&s)?;
    Ok((s, digest(&id.to_string(), &text)))
}

fn check(expect: &Option<String>, actual: &str, allowed: &[&str]) -> Result<Option<bool>, Failure> {
    match expect {
        None => Ok(None),
        Some(e) if allowed.contains(&e.as_str()) => Ok(Some(e == actual)),
        Some(e) => Err(Failure(format!("unknown expectation `{e}`; expected one of {}", allowed.join(", ")))),
    }
}

struct Outcome {
    inputs: Vec<InputDigest>,
    payload: Value,
    /// Rendered artifact for text output, when the command emits one.
    artifact: Option<String>,
    expectation: Option<bool>,
}

fn execute(cmd: &Cmd) -> Result<Outcome, Failure> {
    match cmd {
        Cmd::Generate { family, d } => {
            let id = FamilyId::parse(family, *d)?;
            let (s, report) = generate(id)?;
            let text = write_state_set(&s)?;
            Ok(Outcome {
                inputs: vec![digest(&id.to_string(), &text)],
                payload: json!({ "report": report, "states": text }),
                artifact: Some(text),
                expectation: None,
            })
        }
        Cmd::Certify { input, d, cuts, tables, expect } => {
            let (s, dg) = load(input, *d)?;
            let cuts = Cut::parse(cuts)?;
            let report = certify_cuts(&s, &cuts)?;
            let verdict = if report.strong_nonlocal {
                "strong-nonlocal"
            } else if report.locally_irreducible {
                "irreducible"
            } else {
                "reducible"
            };
            let expectation = match expect.as_deref() {
                Some("not-strong") => Some(!report.strong_nonlocal),
                Some("irreducible") => Some(report.locally_irreducible),
                _ => check(expect, verdict, &["strong-nonlocal", "irreducible", "reducible"])?,
            };
            let mut payload = json!({ "verdict": verdict, "report": report });
            if *tables {
                payload["tables"] = serde_json::to_value(replicate_tables(&s)?)?;
            }
            Ok(Outcome { inputs: vec![dg], payload, artifact: None, expectation })
        }
        Cmd::Run { input, protocol, d, expect } => {
            let (s, dg) = load(input, *d)?;
            let text = std::fs::read_to_string(protocol).map_err(|e| Failure(format!("{protocol}: {e}")))?;
            let tree = parse_protocol(&text).map_err(|e| Failure(format!("{protocol}: {e}")))?;
            let report = run_protocol(&tree, &s)?;
            let verdict = if report.success { "success" } else { "failure" };
            Ok(Outcome {
                inputs: vec![dg, digest(protocol, &text)],
                payload: json!({ "verdict": verdict, "report": report }),
                artifact: None,
                expectation: check(expect, verdict, &["success", "failure"])?,
            })
        }
        Cmd::Search { input, d, resource, class, depth, first, catalog, no_dedup, expect } => {
            if class != "restricted" {
                return Err(Failure(format!("unknown class `{class}`; only `restricted` is implemented")));
            }
            let (s, dg) = load(input, *d)?;
            let (s, cost, _) = match resource {
                Some(r) => apply_resource_spec(&s, r)?,
                None => (s, Default::default(), vec![]),
            };
            let max_rounds = match depth.as_str() {
                "unbounded" => None,
                n => Some(n.parse::<usize>().map_err(|_| Failure(format!("bad depth `{n}`")))?),
            };
            let cfg = SearchConfig { max_rounds, dedup: !no_dedup, ..SearchConfig::default() };
            let cost = cost.report();
            let (verdict, payload) = match first {
                None => {
                    let r = exhaustive_search(&s, &cfg)?;
                    let v = r.verdict();
                    (v, json!({ "verdict": v, "resource_cost": cost, "report": r }))
                }
                Some(party) => {
                    let k = s.party_index(party)?;
                    let ds = s.parties()[k].dim;
                    let da: usize = s.parties().iter().filter(|p| p.owner.as_deref() == Some(party.as_str())).map(|p| p.dim).product();
                    let cat = match catalog.as_str() {
                        "full" => enumerate_catalog(ds, 1, CatalogKind::Full, cfg.dedup)?,
                        "full-joint" => enumerate_catalog(ds, da, CatalogKind::Full, cfg.dedup)?,
                        "correlated" => enumerate_catalog(ds, da, CatalogKind::CorrelatedPartition, cfg.dedup)?,
                        c => return Err(Failure(format!("unknown catalog `{c}`"))),
                    };
                    let moves = search_first_moves(&s, party, &cat, &cfg)?;
                    let verdicts: Vec<&str> = moves.iter().map(|m| m.verdict()).collect();
                    let v = if verdicts.contains(&"found") {
                        "found"
                    } else if verdicts.contains(&"depth-limited") {
                        "depth-limited"
                    } else {
                        "exhausted"
                    };
                    let per: Vec<Value> = moves.iter().map(|m| json!({ "verdict": m.verdict(), "move": m })).collect();
                    (
                        v,
                        json!({
                            "verdict": v,
                            "resource_cost": cost,
                            "catalog": { "entries": cat.entries.len(), "raw": cat.raw_count, "closed_form": cat.closed_form },
                            "first_moves": per,
                        }),
                    )
                }
            };
            Ok(Outcome {
                inputs: vec![dg],
                payload,
                artifact: None,
                expectation: check(expect, verdict, &["found", "exhausted", "depth-limited"])?,
            })
        }
        Cmd::Flatten { input, first, second, d } => {
            let (s, dg) = load(input, *d)?;
            let f = s.flatten(first, second)?;
            let text = write_state_set(&f)?;
            Ok(Outcome { inputs: vec![dg], payload: json!({ "states": text }), artifact: Some(text), expectation: None })
        }
        Cmd::Protocol { name, d } => {
            let tree = match name.as_str() {
                "prop6" => gen_protocol_prop6(),
                "prop7" => gen_protocol_prop7(d.unwrap_or(5))?,
                "prop8" => gen_protocol_prop8(),
                "prop9" => gen_protocol_prop9(),
                other => return Err(Failure(format!("unknown protocol `{other}`"))),
            };
            let text = serialize_protocol(&tree);
            Ok(Outcome { inputs: vec![], payload: json!({ "protocol": text }), artifact: Some(text), expectation: None })
        }
    }
}

fn render(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match x {
                    Value::Object(_) | Value::Array(_) if !is_flat(x) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render(x, indent + 1, out);
                    }
                    _ => out.push_str(&format!("{pad}{k}: {}\n", scalar(x, indent + 1))),
                }
            }
        }
        Value::Array(a) => {
            for x in a {
                if is_flat(x) {
                    out.push_str(&format!("{pad}- {}\n", scalar(x, indent + 1)));
                } else {
                    out.push_str(&format!("{pad}-\n"));
                    render(x, indent + 1, out);
                }
            }
        }
        x => out.push_str(&format!("{pad}{}\n", scalar(x, indent))),
    }
}

fn is_flat(v: &Value) -> bool {
    match v {
        Value::Array(a) => a.iter().all(|x| !x.is_object() && !x.is_array()) && a.len() <= 8,
        Value::Object(m) => m.is_empty(),
        _ => true,
    }
}

fn scalar(v: &Value, indent: usize) -> String {
    let pad = "  ".repeat(indent);
    match v {
        Value::String(s) if s.contains('\n') => {
            format!("|\n{}", s.trim_end().lines().map(|l| format!("{pad}{l}")).collect::<Vec<_>>().join("\n"))
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("NLWE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    let command: Vec<String> = std::env::args().skip(1).collect();
    let (inputs, payload, artifact, status, code) = match execute(&cli.cmd) {
        Ok(o) => {
            let (status, code) = match o.expectation {
                Some(false) => ("expectation-failed", 1),
                _ => ("ok", 0),
            };
            (o.inputs, o.payload, o.artifact, status.to_string(), code)
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            (vec![], json!({ "error": msg }), None, "error".to_string(), 2)
        }
    };
    let env = ReportEnvelope { tool: "nlwe", version: env!("CARGO_PKG_VERSION"), command, inputs, payload, status };
    let text = match cli.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&env).expect("serializable")),
        Format::Text => match artifact {
            Some(a) if code == 0 => a,
            _ => {
                let mut out = String::new();
                render(&serde_json::to_value(&env).expect("serializable"), 0, &mut out);
                out
            }
        },
    };
    // A closed pipe on the reading side is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    ExitCode::from(code)
}

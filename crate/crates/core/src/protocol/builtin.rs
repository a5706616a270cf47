//! The protocols shipped with the crate, encoded as data.

use super::{MeasurementSpec, Node, Outcome, OutcomeOp, PrepStep, ProtocolTree, ResourceKind, ResourceState, Selector, Term};
use crate::arith::Matrix;
use crate::error::{Error, Result};
use crate::families::gen_prop3;
use crate::search::{continue_search, SearchConfig, SearchOutcome};
use crate::Rational;
use num_traits::Zero;

fn p(parts: &[(&str, &[usize])]) -> Term {
    Term { factors: parts.iter().map(|(n, xs)| (n.to_string(), Selector::Basis(xs.to_vec()))).collect() }
}

/// Term with a ket selector `|i> + s|j>` on `sys` and basis selectors elsewhere.
fn pk(sys: &str, i: usize, sign: i64, j: usize, rest: &[(&str, &[usize])]) -> Term {
    let mut t = p(rest);
    let ket = vec![(i, Rational::from_integer(1.into())), (j, Rational::from_integer(sign.into()))];
    t.factors.insert(0, (sys.to_string(), Selector::Ket(ket)));
    t
}

fn out(name: &str, terms: Vec<Term>) -> Outcome {
    Outcome { name: name.into(), op: OutcomeOp::Sum(terms) }
}

fn rest(name: &str) -> Outcome {
    Outcome { name: name.into(), op: OutcomeOp::Complement }
}

fn measure(party: &str, outcomes: Vec<Outcome>, children: Vec<(&str, Node)>) -> Node {
    Node::Measure {
        spec: MeasurementSpec { party: party.into(), outcomes },
        children: children.into_iter().map(|(n, c)| (n.to_string(), c)).collect(),
    }
}

fn id(l: &str) -> Node {
    Node::Identify(l.into())
}

fn wg(a: &str, b: &str) -> Node {
    Node::Walgate(a.into(), b.into())
}

fn ghz() -> PrepStep {
    PrepStep::Resource(ResourceState {
        kind: ResourceKind::Ghz3,
        placement: vec![("a".into(), "A".into()), ("b".into(), "B".into()), ("c".into(), "C".into())],
    })
}

fn flip_selector(s: &Selector, d: usize) -> Selector {
    match s {
        Selector::Basis(xs) => {
            let mut ys: Vec<usize> = xs.iter().map(|x| d - 1 - x).collect();
            ys.sort_unstable();
            Selector::Basis(ys)
        }
        Selector::Ket(t) => Selector::Ket(t.iter().map(|(i, c)| (d - 1 - i, c.clone())).collect()),
        Selector::Matrix(m) => Selector::Matrix(Matrix::from_fn(d, d, |r, c| m.get(d - 1 - r, d - 1 - c).clone())),
    }
}

/// Relabels every basis index `x` of the named ancillas (of dimension `d`)
/// to `d-1-x`. For a GHZ or Bell resource this maps the protocol for one
/// correlated outcome onto the protocol for the other.
pub fn flip_ancillas(n: &Node, ancillas: &[(&str, usize)]) -> Node {
    match n {
        Node::Measure { spec, children } => Node::Measure {
            spec: MeasurementSpec {
                party: spec.party.clone(),
                outcomes: spec
                    .outcomes
                    .iter()
                    .map(|o| Outcome {
                        name: o.name.clone(),
                        op: match &o.op {
                            OutcomeOp::Complement => OutcomeOp::Complement,
                            OutcomeOp::Sum(ts) => OutcomeOp::Sum(
                                ts.iter()
                                    .map(|t| Term {
                                        factors: t
                                            .factors
                                            .iter()
                                            .map(|(sub, sel)| match ancillas.iter().find(|(a, _)| a == sub) {
                                                Some(&(_, d)) => (sub.clone(), flip_selector(sel, d)),
                                                None => (sub.clone(), sel.clone()),
                                            })
                                            .collect(),
                                    })
                                    .collect(),
                            ),
                        },
                    })
                    .collect(),
            },
            children: children.iter().map(|(o, c)| (o.clone(), flip_ancillas(c, ancillas))).collect(),
        },
        other => other.clone(),
    }
}

fn prop6_after_m() -> Node {
    let q_branch = measure(
        "A",
        vec![out("A1", vec![p(&[("A", &[0]), ("a", &[1])])]), out("A2", vec![p(&[("A", &[0]), ("a", &[0])])]), rest("A3")],
        vec![
            ("A1", wg("phi_5", "phi_6")),
            ("A2", wg("phi_9", "phi_10")),
            (
                "A3",
                measure(
                    "B",
                    vec![out("B1", vec![p(&[("B", &[2]), ("b", &[0])])]), rest("B2")],
                    vec![("B1", wg("phi_11", "phi_12")), ("B2", wg("phi_3", "phi_4"))],
                ),
            ),
        ],
    );
    let c_split = measure(
        "C",
        vec![out("C1", vec![p(&[("C", &[1]), ("c", &[0])])]), out("C2", vec![p(&[("C", &[2])])]), rest("C3")],
        vec![("C1", wg("phi_1", "phi_2")), ("C2", id("phi_14"))],
    );
    let qbar_branch = measure(
        "B",
        vec![out("B1", vec![p(&[("B", &[2]), ("b", &[0])])]), rest("B2")],
        vec![
            ("B1", id("phi_13")),
            (
                "B2",
                measure(
                    "A",
                    vec![out("A1", vec![p(&[("A", &[0, 1]), ("a", &[0])]), p(&[("A", &[0]), ("a", &[1])])]), rest("A2")],
                    vec![("A1", c_split), ("A2", id("phi_15"))],
                ),
            ),
        ],
    );
    let step3 = measure(
        "C",
        vec![out("Q", vec![p(&[("C", &[0]), ("c", &[0])]), p(&[("C", &[0, 1]), ("c", &[1])])]), rest("Qbar")],
        vec![("Q", q_branch), ("Qbar", qbar_branch)],
    );
    measure("A", vec![out("N", vec![p(&[("A", &[2]), ("a", &[1])])]), rest("Nbar")], vec![("N", wg("phi_7", "phi_8")), ("Nbar", step3)])
}

/// One GHZ state for the fifteen states of `setB`.
pub fn gen_protocol_prop6() -> ProtocolTree {
    let after = prop6_after_m();
    let flipped = flip_ancillas(&after, &[("a", 2), ("b", 2), ("c", 2)]);
    ProtocolTree {
        name: "prop6".into(),
        family: Some("setB".into()),
        family_d: None,
        prep: vec![ghz()],
        root: measure(
            "B",
            vec![out("M", vec![p(&[("B", &[0, 2]), ("b", &[0])]), p(&[("B", &[1]), ("b", &[1])])]), rest("Mbar")],
            vec![("M", after), ("Mbar", flipped)],
        ),
    }
}

/// Bob's first measurement for odd `d`: M = P[B:all but h; b:0] + P[B:h; b:1]
/// with h = (d-1)/2. The rest of the tree is synthesized by exhaustive search
/// over basis-aligned splits, since only this first step is fixed.
pub fn gen_protocol_prop7(d: usize) -> Result<ProtocolTree> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(Error::parameter(format!("prop7 needs odd d >= 3, got {d}")));
    }
    let h = (d - 1) / 2;
    let others: Vec<usize> = (0..d).filter(|&x| x != h).collect();
    let bob = MeasurementSpec {
        party: "B".into(),
        outcomes: vec![out("M", vec![p(&[("B", &others), ("b", &[0])]), p(&[("B", &[h]), ("b", &[1])])]), rest("Mbar")],
    };
    let mut tree = ProtocolTree {
        name: format!("prop7_d{d}"),
        family: Some("prop3".into()),
        family_d: Some(d),
        prep: vec![ghz()],
        root: Node::Measure { spec: bob.clone(), children: vec![] },
    };
    let fam = gen_prop3(d)?;
    let (prepared, _) = super::prepare(&tree, &fam)?;
    let m = super::resolve_measurement(&prepared, &bob)?;
    let op = &m.outcomes[0].1;
    let keep: Vec<usize> = (0..op.rows()).filter(|&x| !op.get(x, x).is_zero()).collect();
    let report = continue_search(&prepared, "B", &keep, &SearchConfig::unbounded())?;
    let after = match report.outcome {
        SearchOutcome::Found(node) => node,
        _ => return Err(Error::Structure(format!("prop7(d={d}): no continuation after M: {}", report.summary()))),
    };
    let flipped = flip_ancillas(&after, &[("a", 2), ("b", 2), ("c", 2)]);
    tree.root = Node::Measure { spec: bob, children: vec![("M".into(), after), ("Mbar".into(), flipped)] };
    Ok(tree)
}

/// Bob teleports to Alice, then a Bell pair between AB and C.
pub fn gen_protocol_prop8() -> ProtocolTree {
    let ab0 = |xs: &'static [usize]| p(&[("AB", xs), ("ab", &[0])]);
    let c_pm = |pa, pb| measure("C", vec![out("Cp", vec![pk("C", 0, 1, 1, &[])]), rest("Cm")], vec![("Cp", id(pa)), ("Cm", id(pb))]);
    let q_branch = measure(
        "AB",
        vec![
            out("R1", vec![p(&[("AB", &[2])])]),
            out("R2", vec![p(&[("AB", &[7])])]),
            out("R3", vec![pk("AB", 6, 1, 8, &[("ab", &[0])])]),
            out("R4", vec![pk("AB", 6, -1, 8, &[("ab", &[0])])]),
            rest("R5"),
        ],
        vec![("R1", wg("phi_7", "phi_8")), ("R2", wg("phi_19", "phi_20")), ("R3", id("phi_11")), ("R4", id("phi_12"))],
    );
    let qbar_branch = measure(
        "AB",
        vec![
            out("S1", vec![pk("AB", 6, 1, 7, &[])]),
            out("S2", vec![pk("AB", 6, -1, 7, &[])]),
            out("S3", vec![pk("AB", 2, 1, 8, &[])]),
            out("S4", vec![pk("AB", 2, -1, 8, &[])]),
            rest("S5"),
        ],
        vec![("S1", id("phi_17")), ("S2", id("phi_18")), ("S3", id("phi_21")), ("S4", id("phi_22"))],
    );
    let n10 = measure(
        "C",
        vec![out("Q", vec![p(&[("C", &[0]), ("c", &[0])]), p(&[("C", &[2]), ("c", &[1])])]), rest("Qbar")],
        vec![("Q", q_branch), ("Qbar", qbar_branch)],
    );
    let ab1 = |i, s, j| pk("AB", i, s, j, &[("ab", &[1])]);
    let step2 = measure(
        "AB",
        vec![
            out("N1", vec![ab0(&[0, 3, 4])]),
            out("N2", vec![ab1(3, 1, 5)]),
            out("N3", vec![ab1(3, -1, 5)]),
            out("N4", vec![ab1(1, 1, 4)]),
            out("N5", vec![ab1(1, -1, 4)]),
            out("N6", vec![ab1(0, 1, 6)]),
            out("N7", vec![ab1(0, -1, 6)]),
            out("N8", vec![ab0(&[1])]),
            out("N9", vec![ab0(&[5])]),
            rest("N10"),
        ],
        vec![
            (
                "N1",
                measure(
                    "C",
                    vec![out("C0", vec![p(&[("C", &[0])])]), rest("C1")],
                    vec![("C0", wg("phi_5", "phi_6")), ("C1", wg("phi_3", "phi_4"))],
                ),
            ),
            ("N2", id("phi_23")),
            ("N3", id("phi_24")),
            ("N4", id("phi_15")),
            ("N5", id("phi_16")),
            ("N6", id("phi_9")),
            ("N7", id("phi_10")),
            ("N8", c_pm("phi_1", "phi_2")),
            ("N9", c_pm("phi_13", "phi_14")),
            ("N10", n10),
        ],
    );
    let flipped = flip_ancillas(&step2, &[("ab", 2), ("c", 2)]);
    ProtocolTree {
        name: "prop8".into(),
        family: Some("setC".into()),
        family_d: None,
        prep: vec![
            PrepStep::Teleport { from: "B".into(), to: "A".into() },
            PrepStep::Resource(ResourceState {
                kind: ResourceKind::Bell,
                placement: vec![("ab".into(), "AB".into()), ("c".into(), "C".into())],
            }),
        ],
        root: measure(
            "C",
            vec![out("M", vec![p(&[("C", &[0, 1]), ("c", &[0])]), p(&[("C", &[2]), ("c", &[1])])]), rest("Mbar")],
            vec![("M", step2), ("Mbar", flipped)],
        ),
    }
}

/// Everything is teleported to Alice, who then measures in a basis that
/// contains every state of `setA`.
pub fn gen_protocol_prop9() -> ProtocolTree {
    let set = crate::families::gen_set_a();
    let merged = set.flatten("A", "B").and_then(|s| s.flatten("AB", "C")).expect("fixed family");
    let mut outcomes = Vec::new();
    let mut children = Vec::new();
    for (k, e) in merged.states().iter().enumerate() {
        let terms: Vec<(usize, Rational)> =
            e.ket.amplitudes().iter().enumerate().filter(|(_, a)| !a.is_zero()).map(|(i, a)| (i, a.clone())).collect();
        let name = format!("E{}", k + 1);
        outcomes
            .push(Outcome { name: name.clone(), op: OutcomeOp::Sum(vec![Term { factors: vec![("ABC".into(), Selector::Ket(terms))] }]) });
        children.push((name, Node::Identify(e.label.clone())));
    }
    outcomes.push(rest("Erest"));
    ProtocolTree {
        name: "prop9".into(),
        family: Some("setA".into()),
        family_d: None,
        prep: vec![PrepStep::Teleport { from: "B".into(), to: "A".into() }, PrepStep::Teleport { from: "C".into(), to: "AB".into() }],
        root: Node::Measure { spec: MeasurementSpec { party: "ABC".into(), outcomes }, children },
    }
}

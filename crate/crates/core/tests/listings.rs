//! Flattened families against the published bipartite listings.

use std::collections::BTreeMap;

use nlwe_core::families::{gen_set_a, gen_set_c};
use nlwe_core::hilbert::parse_state_set;
use nlwe_core::{Ket, States};

/// Expands `±` into `+`/`-`, leftmost sign slowest, labelling from `first`.
fn expand(first: usize, spec: &str) -> Vec<(String, String)> {
    let k = spec.matches('±').count();
    (0..1usize << k)
        .map(|mask| {
            let mut n = 0;
            let line: String = spec
                .chars()
                .map(|c| {
                    if c != '±' {
                        return c;
                    }
                    n += 1;
                    if mask >> (k - n) & 1 == 1 {
                        '-'
                    } else {
                        '+'
                    }
                })
                .collect();
            line
        })
        .enumerate()
        .map(|(i, l)| (format!("phi_{}", first + i), l))
        .collect()
}

fn listing(header: &str, specs: &[(usize, &str)], swap: &[(usize, usize)]) -> BTreeMap<String, Ket> {
    let mut text = format!("{header}\n");
    for (first, spec) in specs {
        for (label, line) in expand(*first, spec) {
            text.push_str(&format!("{label} : {line}\n"));
        }
    }
    let s = parse_state_set(&text).unwrap();
    let rename: BTreeMap<String, String> =
        swap.iter().flat_map(|&(x, y)| [(format!("phi_{x}"), format!("phi_{y}")), (format!("phi_{y}"), format!("phi_{x}"))]).collect();
    s.states().iter().map(|e| (rename.get(&e.label).cloned().unwrap_or_else(|| e.label.clone()), e.ket.clone())).collect()
}

fn as_map(s: &States) -> BTreeMap<String, Ket> {
    s.states().iter().map(|e| (e.label.clone(), e.ket.clone())).collect()
}

#[test]
fn set_a_ab_c() {
    let mut want = listing(
        "parties: AB=9 C=3",
        &[
            (5, "|3> ; |0>±|2>"),
            (7, "|3>±|5> ; |1>"),
            (9, "|0>±|6> ; |0>±|1>"),
            (13, "|4> ; |1>±|2>"),
            (15, "|5>±|8> ; |2>"),
            (17, "|7>±|8> ; |0>±|1>"),
            (21, "|2> ; |0>±|2>"),
            (23, "|1>±|2> ; |1>"),
            (25, "|1>±|4> ; |0>"),
        ],
        &[],
    );
    // Listed as |0±6±1±7>, the sign on |7> being the product of the other two.
    let fix = parse_state_set(
        "parties: AB=9 C=3\nphi_1 : |0>+|1>+|6>+|7> ; |2>\nphi_2 : |0>-|1>+|6>-|7> ; |2>\nphi_3 : |0>+|1>-|6>-|7> ; |2>\nphi_4 : |0>-|1>-|6>+|7> ; |2>\n",
    )
    .unwrap();
    for e in fix.states() {
        want.insert(e.label.clone(), e.ket.clone());
    }
    let got = gen_set_a().flatten("A", "B").unwrap();
    assert_eq!(got.parties()[0].name, "AB");
    assert_eq!(as_map(&got), want);
}

#[test]
fn set_a_a_bc() {
    let mut want = listing(
        "parties: A=3 BC=9",
        &[
            (1, "|0>±|2> ; |2>±|5>"),
            (5, "|1> ; |0>±|2>"),
            (7, "|1> ; |1>±|7>"),
            (9, "|0>±|2> ; |0>±|1>"),
            (13, "|1> ; |4>±|5>"),
            (15, "|1>±|2> ; |8>"),
            (21, "|0> ; |6>±|8>"),
            (23, "|0> ; |4>±|7>"),
            (25, "|0>±|1> ; |3>"),
        ],
        &[],
    );
    // Written out as listed, including its order of the sign patterns:
    // the listing's 18 and 19 are this crate's 19 and 18.
    let four = listing(
        "parties: A=3 BC=9",
        &[(17, "|2> ; |3>+|4>+|6>+|7>"), (18, "|2> ; |3>+|4>-|6>-|7>"), (19, "|2> ; |3>-|4>+|6>-|7>"), (20, "|2> ; |3>-|4>-|6>+|7>")],
        &[(18, 19)],
    );
    want.extend(four);
    let got = gen_set_a().flatten("B", "C").unwrap();
    assert_eq!(got.parties()[1].name, "BC");
    assert_eq!(as_map(&got), want);
}

#[test]
fn set_a_ac_b() {
    let mut want = listing(
        "parties: AC=9 B=3",
        &[
            (1, "|2>±|8> ; |0>±|1>"),
            (5, "|3>±|5> ; |0>"),
            (7, "|4> ; |0>±|2>"),
            (13, "|4>±|5> ; |1>"),
            (15, "|5>±|8> ; |2>"),
            // Listed as |6±7>|1±2>; the sign on B varies slowest here.
            (21, "|0>±|2> ; |2>"),
            (23, "|1> ; |1>±|2>"),
            (25, "|0>±|3> ; |1>"),
        ],
        &[],
    );
    let b_slow = parse_state_set(
        "parties: AC=9 B=3\nphi_17 : |6>+|7> ; |1>+|2>\nphi_18 : |6>-|7> ; |1>+|2>\nphi_19 : |6>+|7> ; |1>-|2>\nphi_20 : |6>-|7> ; |1>-|2>\n",
    )
    .unwrap();
    want.extend(as_map(&b_slow));
    // The listing's 10 and 11 are this crate's 11 and 10; its 11 carries a
    // stray `±2`, read here as |0-1+6-7>.
    let four = listing(
        "parties: AC=9 B=3",
        &[(9, "|0>+|1>+|6>+|7> ; |0>"), (10, "|0>+|1>-|6>-|7> ; |0>"), (11, "|0>-|1>+|6>-|7> ; |0>"), (12, "|0>-|1>-|6>+|7> ; |0>")],
        &[(10, 11)],
    );
    want.extend(four);
    let got = gen_set_a().flatten("A", "C").unwrap();
    assert_eq!(got.parties()[0].name, "AC");
    assert_eq!(as_map(&got), want);
}

#[test]
fn set_c_teleported() {
    let want = listing(
        "parties: AB=9 C=3",
        &[
            (1, "|1> ; |0>±|1>"),
            (3, "|0>±|3> ; |1>"),
            (5, "|3>±|4> ; |0>"),
            (7, "|2> ; |0>±|2>"),
            (9, "|0>±|6> ; |2>"),
            (11, "|6>±|8> ; |0>"),
            (13, "|5> ; |0>±|1>"),
            (15, "|1>±|4> ; |2>"),
            (17, "|6>±|7> ; |1>"),
            (19, "|7> ; |0>±|2>"),
            (21, "|2>±|8> ; |1>"),
            (23, "|3>±|5> ; |2>"),
        ],
        &[],
    );
    assert_eq!(as_map(&gen_set_c().flatten("A", "B").unwrap()), want);
}

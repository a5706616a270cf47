//! Fixtures shared by the integration targets.

use nlwe_core::arith::int;
use nlwe_core::families::gen_set_b;
use nlwe_core::hilbert::{CompositeKet, LocalKet};
use nlwe_core::protocol::*;
use nlwe_core::{Ket, Local};

fn loc(d: usize, t: &[(usize, i64)]) -> Local {
    LocalKet::from_terms(d, &t.iter().map(|&(i, c)| (i, int(c))).collect::<Vec<_>>()).unwrap()
}

/// (sign, A factor, B factor, C factor, ancilla bits)
type KetTerm<'a> = (i64, &'a [(usize, i64)], &'a [(usize, i64)], &'a [(usize, i64)], usize);
/// Labelled kets.
pub type Listing = Vec<(String, Ket)>;

/// Σ sign · |a⟩|b⟩|c⟩|bits⟩ over the listed terms.
fn ket(terms: &[KetTerm]) -> Ket {
    let dims = vec![3, 3, 3, 2, 2, 2];
    let mut out = CompositeKet::zeros(dims.clone());
    for &(s, a, b, c, bits) in terms {
        let k = loc(3, a).kron(&loc(3, b)).kron(&loc(3, c)).kron(&loc(8, &[(bits, s)]));
        for (o, x) in out.amplitudes_mut().iter_mut().zip(k.amplitudes()) {
            *o = &*o + x;
        }
    }
    out
}

/// The listed states after Bob's first outcome, and the executor's.
pub fn prop6_step_one() -> (Listing, Listing) {
    let z = |i: usize| vec![(i, 1i64)];
    let pm = |i: usize, j: usize, s: i64| vec![(i, 1i64), (j, s)];
    let mut expected: Listing = Vec::new();
    for (k, s) in [(1, 1), (2, -1)] {
        expected.push((format!("phi_{k}"), ket(&[(1, &pm(0, 1, s), &z(0), &z(1), 0b000)])));
    }
    for (k, s) in [(3, 1), (4, -1)] {
        expected.push((format!("phi_{k}"), ket(&[(1, &z(1), &z(0), &z(0), 0b000), (s, &z(1), &z(1), &z(0), 0b111)])));
    }
    for (k, s) in [(5, 1), (6, -1)] {
        expected.push((format!("phi_{k}"), ket(&[(1, &z(0), &z(1), &pm(0, 1, s), 0b111)])));
    }
    for (k, s) in [(7, 1), (8, -1)] {
        expected.push((format!("phi_{k}"), ket(&[(1, &z(2), &z(1), &pm(1, 2, s), 0b111)])));
    }
    for (k, s) in [(9, 1), (10, -1)] {
        expected.push((format!("phi_{k}"), ket(&[(1, &z(0), &pm(0, 2, s), &z(0), 0b000)])));
    }
    for (k, s) in [(11, 1), (12, -1)] {
        expected.push((format!("phi_{k}"), ket(&[(1, &pm(1, 2, s), &z(2), &z(0), 0b000)])));
    }
    expected.push(("phi_13".into(), ket(&[(1, &z(0), &z(2), &pm(1, 2, 1), 0b000)])));
    expected.push(("phi_14".into(), ket(&[(1, &z(0), &z(0), &z(2), 0b000), (1, &z(0), &z(1), &z(2), 0b111)])));
    expected.push(("phi_15".into(), ket(&[(1, &z(2), &z(0), &pm(1, 2, 1), 0b000)])));

    let tree = gen_protocol_prop6();
    let (s, _) = prepare(&tree, &gen_set_b()).unwrap();
    let Node::Measure { spec, .. } = &tree.root else { panic!("prop6 starts with a measurement") };
    let m = resolve_measurement(&s, spec).unwrap();
    let cands: Vec<Candidate> = s.states().iter().map(|e| Candidate { label: e.label.clone(), ket: e.ket.clone() }).collect();
    let (branches, broken) = apply_measurement(&cands, &m);
    assert!(broken.is_empty());
    assert_eq!(branches[0].outcome, "M");
    let got: Vec<(String, Ket)> = branches[0].candidates.iter().map(|c| (c.label.clone(), c.ket.clone())).collect();
    (expected, got)
}

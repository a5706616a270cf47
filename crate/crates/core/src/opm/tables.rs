//! Forced-relation tables for the 26-state set, kept as regression data.
//!
//! Each row names a few states and the entries of E they pin down. Single
//! party rows name states by label. Bipartite rows give the states as
//! flattened kets, `merged ; other`, which are matched against the flattened
//! set.

use num_traits::Zero as _;
use serde::Serialize;

use super::{build_rows, Acting};
use crate::arith::{hermitian_len, im_index, re_index, Matrix};
use crate::error::{Error, Result};
use crate::hilbert::{expand, LocalKet, ProductState};
use crate::{Rational, States};

/// A relation among entries a_ij of E.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    /// a_ij = a_ji = 0
    Zero(usize, usize),
    /// a_ii = a_jj
    Same(usize, usize),
}

impl Rel {
    fn describe(&self) -> String {
        match *self {
            Rel::Zero(i, j) => format!("a{i}{j}=0"),
            Rel::Same(i, j) => format!("a{i}{i}=a{j}{j}"),
        }
    }

    /// Linear functionals on Hermitian coordinates whose vanishing is the relation.
    fn functionals(&self, n: usize) -> Vec<Vec<Rational>> {
        let unit = |k: usize, s: i64| {
            let mut v = vec![Rational::zero(); hermitian_len(n)];
            v[k] = Rational::from_integer(s.into());
            v
        };
        match *self {
            Rel::Zero(i, j) => vec![unit(re_index(n, i, j), 1), unit(im_index(n, i, j), 1)],
            Rel::Same(i, j) => {
                let mut v = unit(i, 1);
                v[j] = Rational::from_integer((-1).into());
                vec![v]
            }
        }
    }
}

pub struct Row {
    pub states: &'static [&'static str],
    pub relations: &'static [Rel],
}

pub struct Table {
    pub name: &'static str,
    pub acting: (&'static str, Option<&'static str>),
    pub rows: &'static [Row],
}

use Rel::{Same, Zero};

const fn row(states: &'static [&'static str], relations: &'static [Rel]) -> Row {
    Row { states, relations }
}

pub const TABLES: &[Table] = &[
    Table {
        name: "A",
        acting: ("A", None),
        rows: &[
            row(&["phi_23", "phi_13"], &[Zero(0, 1)]),
            row(&["phi_13", "phi_23"], &[Zero(1, 0)]),
            row(&["phi_1", "phi_5"], &[Zero(2, 1)]),
            row(&["phi_5", "phi_1"], &[Zero(1, 2)]),
            row(&["phi_23", "phi_17"], &[Zero(0, 2)]),
            row(&["phi_17", "phi_23"], &[Zero(2, 0)]),
            row(&["phi_25", "phi_26"], &[Same(0, 1)]),
            row(&["phi_15", "phi_16"], &[Same(1, 2)]),
        ],
    },
    Table {
        name: "B",
        acting: ("B", None),
        rows: &[
            row(&["phi_5", "phi_13"], &[Zero(0, 1)]),
            row(&["phi_13", "phi_5"], &[Zero(1, 0)]),
            row(&["phi_21", "phi_25"], &[Zero(2, 1)]),
            row(&["phi_25", "phi_21"], &[Zero(1, 2)]),
            row(&["phi_5", "phi_15"], &[Zero(0, 2)]),
            row(&["phi_15", "phi_5"], &[Zero(2, 0)]),
            row(&["phi_1", "phi_2"], &[Same(0, 1)]),
            row(&["phi_23", "phi_24"], &[Same(1, 2)]),
        ],
    },
    Table {
        name: "C",
        acting: ("C", None),
        rows: &[
            row(&["phi_25", "phi_23"], &[Zero(0, 1)]),
            row(&["phi_23", "phi_25"], &[Zero(1, 0)]),
            row(&["phi_15", "phi_7"], &[Zero(2, 1)]),
            row(&["phi_7", "phi_15"], &[Zero(1, 2)]),
            row(&["phi_25", "phi_1"], &[Zero(0, 2)]),
            row(&["phi_1", "phi_25"], &[Zero(2, 0)]),
            row(&["phi_9", "phi_10"], &[Same(0, 1)]),
            row(&["phi_13", "phi_14"], &[Same(1, 2)]),
        ],
    },
    Table {
        name: "AB|C",
        acting: ("A", Some("B")),
        rows: &[
            row(&["|5>+|8> ; |2>", "|5>-|8> ; |2>"], &[Same(5, 8)]),
            row(&["|7>+|8> ; |0>+|1>", "|7>-|8> ; |0>+|1>"], &[Same(7, 8)]),
            row(&["|3>+|5> ; |1>", "|3>-|5> ; |1>"], &[Same(3, 5)]),
            row(&["|1>+|2> ; |1>", "|1>-|2> ; |1>"], &[Same(1, 2)]),
            row(&["|1>+|4> ; |0>", "|1>-|4> ; |0>"], &[Same(1, 4)]),
            row(&["|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>"], &[Same(0, 6)]),
            row(&["|4> ; |1>+|2>", "|2> ; |0>+|2>"], &[Zero(4, 2)]),
            row(&["|4> ; |1>+|2>", "|3> ; |0>+|2>"], &[Zero(4, 3)]),
            row(&["|4> ; |1>+|2>", "|3>+|5> ; |1>"], &[Zero(4, 5)]),
            row(&["|4> ; |1>+|2>", "|5>+|8> ; |2>"], &[Zero(4, 8)]),
            row(&["|4> ; |1>+|2>", "|7>+|8> ; |0>+|1>"], &[Zero(4, 7)]),
            row(&["|4> ; |1>+|2>", "|1>+|2> ; |1>"], &[Zero(4, 1)]),
            row(&["|4> ; |1>+|2>", "|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>"], &[Zero(4, 0), Zero(4, 6)]),
            row(&["|2> ; |0>+|2>", "|1>+|4> ; |0>"], &[Zero(2, 1)]),
            row(&["|2> ; |0>+|2>", "|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>"], &[Zero(2, 0), Zero(2, 6)]),
            row(&["|2> ; |0>+|2>", "|3> ; |0>+|2>"], &[Zero(2, 3)]),
            row(&["|2> ; |0>+|2>", "|7>+|8> ; |0>+|1>", "|7>-|8> ; |0>+|1>"], &[Zero(2, 7), Zero(2, 8)]),
            row(&["|2> ; |0>+|2>", "|5>+|8> ; |2>"], &[Zero(2, 5)]),
            row(&["|3> ; |0>+|2>", "|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>"], &[Zero(3, 0), Zero(3, 6)]),
            row(&["|3> ; |0>+|2>", "|1>+|4> ; |0>"], &[Zero(3, 1)]),
            row(&["|3> ; |0>+|2>", "|5>+|8> ; |2>", "|5>-|8> ; |2>"], &[Zero(3, 5), Zero(3, 8)]),
            row(&["|3> ; |0>+|2>", "|7>+|8> ; |0>+|1>"], &[Zero(3, 7)]),
            row(&["|3>+|5> ; |1>", "|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>"], &[Zero(5, 0), Zero(5, 6)]),
            row(&["|3>+|5> ; |1>", "|1>+|2> ; |1>"], &[Zero(5, 1)]),
            row(&["|3>+|5> ; |1>", "|7>+|8> ; |0>+|1>", "|7>-|8> ; |0>+|1>"], &[Zero(5, 7), Zero(5, 8)]),
            row(&["|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>", "|1>+|2> ; |1>"], &[Zero(0, 1), Zero(6, 1)]),
            row(&["|7>+|8> ; |0>+|1>", "|7>-|8> ; |0>+|1>", "|1>+|4> ; |0>"], &[Zero(1, 7), Zero(1, 8)]),
            row(
                &["|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>", "|0>+|6> ; |0>-|1>", "|0>-|6> ; |0>-|1>", "|5>+|8> ; |2>"],
                &[Zero(8, 0), Zero(8, 6), Zero(8, 7)],
            ),
            row(&["|0>+|6> ; |0>+|1>", "|0>-|6> ; |0>+|1>", "|7>+|8> ; |0>+|1>"], &[Zero(7, 0), Zero(7, 6)]),
            row(&["|0>+|6>+|1>+|7> ; |2>", "|0>+|6>-|1>-|7> ; |2>"], &[Zero(0, 6)]),
        ],
    },
    Table {
        name: "A|BC",
        acting: ("B", Some("C")),
        rows: &[
            row(&["|0>+|2> ; |2>+|5>", "|0>+|2> ; |2>-|5>"], &[Same(2, 5)]),
            row(&["|1> ; |0>+|2>", "|1> ; |0>-|2>"], &[Same(0, 2)]),
            row(&["|1> ; |1>+|7>", "|1> ; |1>-|7>"], &[Same(1, 7)]),
            row(&["|0>+|2> ; |0>+|1>", "|0>+|2> ; |0>-|1>"], &[Same(0, 1)]),
            row(&["|1> ; |4>+|5>", "|1> ; |4>-|5>"], &[Same(4, 5)]),
            row(&["|0> ; |6>+|8>", "|0> ; |6>-|8>"], &[Same(6, 8)]),
            row(&["|0> ; |4>+|7>", "|0> ; |4>-|7>"], &[Same(4, 7)]),
            row(&["|0>+|1> ; |3>", "|0> ; |4>+|7>", "|0> ; |4>-|7>"], &[Zero(3, 4), Zero(3, 7)]),
            row(&["|0>+|1> ; |3>", "|1>+|2> ; |8>"], &[Zero(3, 8)]),
            row(&["|0>+|1> ; |3>", "|0> ; |6>+|8>"], &[Zero(3, 6)]),
            row(&["|0>+|1> ; |3>", "|1> ; |1>+|7>"], &[Zero(3, 1)]),
            row(&["|0>+|1> ; |3>", "|0>+|2> ; |0>+|1>"], &[Zero(3, 0)]),
            row(&["|0>+|1> ; |3>", "|1> ; |0>+|2>"], &[Zero(3, 2)]),
            row(&["|0>+|1> ; |3>", "|1> ; |4>+|5>"], &[Zero(3, 5)]),
            row(&["|1> ; |4>+|5>", "|1> ; |4>-|5>", "|1>+|2> ; |8>"], &[Zero(8, 4), Zero(8, 5)]),
            row(&["|0>+|2> ; |2>+|5>", "|1>+|2> ; |8>"], &[Zero(8, 2)]),
            row(&["|0>+|2> ; |0>+|1>", "|0>+|2> ; |0>-|1>", "|1>+|2> ; |8>"], &[Zero(8, 0), Zero(8, 1)]),
            row(&["|1> ; |1>+|7>", "|1>+|2> ; |8>"], &[Zero(8, 7)]),
            row(&["|2> ; |3>+|4>+|6>+|7>", "|1>+|2> ; |8>"], &[Zero(8, 6)]),
            row(&["|0> ; |4>+|7>", "|0> ; |4>-|7>", "|0> ; |6>+|8>"], &[Zero(7, 6), Zero(6, 4)]),
            row(
                &["|0>+|2> ; |0>+|1>", "|0>+|2> ; |0>-|1>", "|0> ; |4>+|7>", "|0> ; |4>-|7>"],
                &[Zero(7, 0), Zero(7, 1), Zero(4, 0), Zero(4, 1)],
            ),
            row(
                &["|0>+|2> ; |2>+|5>", "|0>+|2> ; |2>-|5>", "|0> ; |4>+|7>", "|0> ; |4>-|7>"],
                &[Zero(7, 2), Zero(7, 5), Zero(4, 2), Zero(4, 5)],
            ),
            row(&["|0>+|2> ; |0>+|1>", "|0>+|2> ; |0>-|1>", "|0> ; |6>+|8>"], &[Zero(6, 0), Zero(6, 1)]),
            row(&["|0>+|2> ; |2>+|5>", "|0>+|2> ; |2>-|5>", "|0> ; |6>+|8>"], &[Zero(6, 2), Zero(6, 5)]),
            row(&["|1> ; |0>+|2>", "|1> ; |0>-|2>", "|1> ; |4>+|5>"], &[Zero(5, 0), Zero(5, 2)]),
            row(
                &["|0>+|2> ; |2>+|5>", "|0>+|2> ; |2>-|5>", "|0>+|2> ; |0>+|1>", "|0>+|2> ; |0>-|1>"],
                &[Zero(5, 1), Zero(2, 0), Zero(2, 1)],
            ),
            row(&["|1> ; |0>+|2>", "|1> ; |1>+|7>"], &[Zero(1, 0)]),
            row(&["|2> ; |3>-|4>-|6>+|7>", "|2> ; |3>+|4>-|6>-|7>"], &[Zero(4, 7)]),
        ],
    },
    Table {
        name: "AC|B",
        acting: ("A", Some("C")),
        rows: &[
            row(&["|2>+|8> ; |0>+|1>", "|2>-|8> ; |0>+|1>"], &[Same(2, 8)]),
            row(&["|3>+|5> ; |0>", "|3>-|5> ; |0>"], &[Same(3, 5)]),
            row(&["|4>+|5> ; |1>", "|4>-|5> ; |1>"], &[Same(4, 5)]),
            row(&["|5>+|8> ; |2>", "|5>-|8> ; |2>"], &[Same(5, 8)]),
            row(&["|6>+|7> ; |1>+|2>", "|6>-|7> ; |1>+|2>"], &[Same(6, 7)]),
            row(&["|0>+|2> ; |2>", "|0>-|2> ; |2>"], &[Same(0, 2)]),
            row(&["|0>+|3> ; |1>", "|0>-|3> ; |1>"], &[Same(0, 3)]),
            row(&["|0>+|2> ; |2>", "|1> ; |1>+|2>"], &[Zero(1, 0), Zero(1, 2)]),
            row(&["|1> ; |1>+|2>", "|0>+|3> ; |1>"], &[Zero(1, 3)]),
            row(&["|4>+|5> ; |1>", "|4>-|5> ; |1>", "|1> ; |1>+|2>"], &[Zero(1, 4), Zero(1, 5)]),
            row(&["|6>+|7> ; |1>+|2>", "|6>-|7> ; |1>+|2>", "|1> ; |1>+|2>"], &[Zero(1, 6), Zero(1, 7)]),
            row(&["|5>+|8> ; |2>", "|1> ; |1>+|2>"], &[Zero(1, 8)]),
            row(&["|4> ; |0>+|2>", "|0>+|2> ; |2>", "|0>-|2> ; |2>"], &[Zero(4, 0), Zero(4, 2)]),
            row(&["|3>+|5> ; |0>", "|3>-|5> ; |0>", "|4> ; |0>+|2>"], &[Zero(4, 3), Zero(4, 5)]),
            row(&["|4> ; |0>+|2>", "|6>+|7> ; |1>+|2>", "|6>-|7> ; |1>+|2>"], &[Zero(4, 6), Zero(4, 7)]),
            row(&["|4> ; |0>+|2>", "|5>+|8> ; |2>"], &[Zero(4, 8)]),
            row(
                &["|2>+|8> ; |0>+|1>", "|2>-|8> ; |0>+|1>", "|3>+|5> ; |0>", "|3>-|5> ; |0>"],
                &[Zero(2, 3), Zero(2, 5), Zero(8, 3), Zero(8, 5)],
            ),
            row(
                &["|2>+|8> ; |0>+|1>", "|2>-|8> ; |0>+|1>", "|6>+|7> ; |1>+|2>", "|6>-|7> ; |1>+|2>"],
                &[Zero(2, 6), Zero(2, 7), Zero(8, 6), Zero(8, 7)],
            ),
            row(&["|5>+|8> ; |2>", "|5>-|8> ; |2>", "|0>+|2> ; |2>", "|0>-|2> ; |2>"], &[Zero(5, 0), Zero(8, 0), Zero(2, 8)]),
            row(&["|2>+|8> ; |0>+|1>", "|0>+|3> ; |1>"], &[Zero(2, 0)]),
            row(&["|5>+|8> ; |2>", "|6>+|7> ; |1>+|2>", "|6>-|7> ; |1>+|2>"], &[Zero(5, 6), Zero(5, 7)]),
            row(&["|4>+|5> ; |1>", "|0>+|3> ; |1>"], &[Zero(5, 3)]),
            row(
                &["|6>+|7> ; |1>+|2>", "|6>-|7> ; |1>+|2>", "|0>+|3> ; |1>", "|0>-|3> ; |1>"],
                &[Zero(6, 0), Zero(6, 3), Zero(7, 0), Zero(7, 3)],
            ),
            row(&["|3>+|5> ; |0>", "|0>+|1>+|6>+|7> ; |0>"], &[Zero(3, 0)]),
            row(&["|0>+|1>+|6>+|7> ; |0>", "|0>+|1>-|6>-|7> ; |0>"], &[Zero(6, 7)]),
        ],
    },
];

#[derive(Clone, Debug, Serialize)]
pub struct RowCheck {
    pub states: Vec<String>,
    pub relations: Vec<String>,
    pub unresolved: Vec<String>,
    /// Relation holds on every vector of the computed solution basis.
    pub holds: bool,
    /// Relation follows from the pairs of this row and all earlier rows.
    pub derivable_so_far: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableReplication {
    pub table: String,
    pub acting: String,
    pub solution_dim: usize,
    pub rows: Vec<RowCheck>,
    pub all_hold: bool,
    pub all_resolved: bool,
}

fn parse_flat_ket(set: &States, text: &str) -> Result<crate::Ket> {
    let dims = set.dims();
    let pieces: Vec<&str> = text.split(';').collect();
    if pieces.len() != dims.len() {
        return Err(Error::structure(format!("`{text}` has {} factors", pieces.len())));
    }
    let locals = pieces
        .iter()
        .zip(&dims)
        .map(|(p, &d)| {
            let terms = crate::hilbert::text::parse_ket_terms(p).map_err(|(_, m)| Error::structure(m))?;
            LocalKet::from_terms(d, &terms)
        })
        .collect::<Result<Vec<_>>>()?;
    expand(&ProductState::new("fixture", locals), &dims)
}

fn resolve(set: &States, name: &str) -> Option<String> {
    if !name.contains('|') {
        return set.state(name).ok().map(|e| e.label.clone());
    }
    let ket = parse_flat_ket(set, name).ok()?;
    set.states().iter().find(|e| e.ket == ket).map(|e| e.label.clone())
}

fn in_row_space(base: &[Vec<Rational>], base_rank: usize, extra: &[Vec<Rational>], width: usize) -> bool {
    let mut rows = base.to_vec();
    rows.extend(extra.iter().cloned());
    Matrix::from_rows(width, rows).expect("uniform width").rank() == base_rank
}

/// Checks every table against the solution space of the set.
pub fn replicate_tables(set: &States) -> Result<Vec<TableReplication>> {
    TABLES.iter().map(|t| replicate(set, t)).collect()
}

pub fn replicate(set: &States, table: &Table) -> Result<TableReplication> {
    let (work, acting) = match table.acting {
        (p, None) => (set.clone(), Acting::single(p)),
        (a, Some(b)) => (set.flatten(a, b)?, Acting::merged(a, b)),
    };
    let k = work.party_index(&acting.name())?;
    let n = work.dims()[k];
    let width = hermitian_len(n);
    let full = build_rows(&work, &[k], acting.name());
    let basis = full.constraints.nullspace();
    let mut acc: Vec<Vec<Rational>> = Vec::new();
    let mut acc_rank = 0;
    let mut rows = Vec::new();
    for r in table.rows {
        let resolved: Vec<Option<String>> = r.states.iter().map(|s| resolve(&work, s)).collect();
        let unresolved: Vec<String> = r.states.iter().zip(&resolved).filter(|(_, l)| l.is_none()).map(|(s, _)| s.to_string()).collect();
        let labels: Vec<String> = resolved.iter().flatten().cloned().collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        if refs.len() >= 2 {
            let sub = work.select(&refs)?;
            let sys = build_rows(&sub, &[k], acting.name());
            for i in 0..sys.constraints.rows() {
                acc.push(sys.constraints.row(i).to_vec());
            }
            let m = Matrix::from_rows(width, acc.clone())?;
            let e = m.rref();
            acc = (0..e.pivots.len()).map(|i| e.reduced.row(i).to_vec()).collect();
            acc_rank = acc.len();
        }
        let functionals: Vec<Vec<Rational>> = r.relations.iter().flat_map(|rel| rel.functionals(n)).collect();
        let holds =
            basis.iter().all(|v| functionals.iter().all(|f| f.iter().zip(v).fold(Rational::zero(), |s, (a, b)| s + a * b).is_zero()));
        let derivable = in_row_space(&acc, acc_rank, &functionals, width);
        rows.push(RowCheck {
            states: labels,
            relations: r.relations.iter().map(Rel::describe).collect(),
            unresolved,
            holds,
            derivable_so_far: derivable,
        });
    }
    Ok(TableReplication {
        table: table.name.to_string(),
        acting: acting.name(),
        solution_dim: basis.len(),
        all_hold: rows.iter().all(|r| r.holds),
        all_resolved: rows.iter().all(|r| r.unresolved.is_empty()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::gen_set_a;

    #[test]
    fn every_table_resolves_and_holds() {
        let s = gen_set_a();
        for t in replicate_tables(&s).unwrap() {
            assert!(t.all_resolved, "{}: {:?}", t.table, t.rows.iter().filter(|r| !r.unresolved.is_empty()).collect::<Vec<_>>());
            assert!(t.all_hold, "{}", t.table);
            assert_eq!(t.solution_dim, 1);
        }
    }

    #[test]
    fn single_party_tables_derive_in_order() {
        let s = gen_set_a();
        for t in &TABLES[..3] {
            let r = replicate(&s, t).unwrap();
            for row in &r.rows {
                assert!(row.derivable_so_far, "{} {:?}", t.name, row);
            }
        }
    }

    #[test]
    fn relation_functionals() {
        let f = Rel::Zero(2, 0).functionals(3);
        assert_eq!(f.len(), 2);
        assert!(!f[0][re_index(3, 0, 2)].is_zero());
        let e = Rel::Same(1, 2).functionals(3);
        assert_eq!(e[0][1], Rational::from_integer(1.into()));
        assert_eq!(e[0][2], Rational::from_integer((-1).into()));
    }
}

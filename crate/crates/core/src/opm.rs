//! Orthogonality-preserving measurement constraints and irreducibility.
//!
//! For a measurement element E acting on a group of parties, every pair of
//! states must stay orthogonal: ⟨φᵢ|E⊗I|φⱼ⟩ = 0. With real amplitudes this is
//! Σ_ab E_ab G_ij[a,b] = 0 where G_ij[a,b] = Σ_r φᵢ(a,r) φⱼ(b,r) is the partial
//! overlap over the remaining parties. Each pair gives one real and one
//! imaginary linear row in the Hermitian coordinates of E.

pub mod tables;

use std::collections::HashSet;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{hermitian_len, im_index, re_index, upper_pairs, HermitianParam, Matrix};
use crate::error::{Error, Result};
use crate::hilbert::strides;
use crate::{Rational, RationalMatrix, States};

/// Who performs the measurement: one party, or two parties merged first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Acting {
    Single(String),
    Merged(String, String),
}

impl Acting {
    pub fn single(p: &str) -> Self {
        Acting::Single(p.to_string())
    }

    pub fn merged(a: &str, b: &str) -> Self {
        Acting::Merged(a.to_string(), b.to_string())
    }

    pub fn name(&self) -> String {
        match self {
            Acting::Single(p) => p.clone(),
            Acting::Merged(a, b) => format!("{a}{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpmConstraintSystem {
    pub acting: String,
    pub dim: usize,
    pub constraints: RationalMatrix,
    /// Unordered pairs examined; the (j, i) rows repeat the (i, j) rows up to
    /// sign, so they are never generated.
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SolutionSpace {
    pub dim: usize,
    pub basis: Vec<Vec<Rational>>,
}

/// Per-state matrices Φ[a][r] with `a` the acting index and `r` the rest.
pub(crate) fn reshape(set: &States, positions: &[usize]) -> Vec<RationalMatrix> {
    let dims = set.dims();
    let st = strides(&dims);
    let rest: Vec<usize> = (0..dims.len()).filter(|k| !positions.contains(k)).collect();
    let n: usize = positions.iter().map(|&k| dims[k]).product();
    let r: usize = rest.iter().map(|&k| dims[k]).product();
    let index = |idx: usize, group: &[usize]| group.iter().fold(0, |acc, &k| acc * dims[k] + (idx / st[k]) % dims[k]);
    set.states()
        .iter()
        .map(|e| {
            let mut m = Matrix::zeros(n, r);
            for (idx, v) in e.ket.amplitudes().iter().enumerate() {
                if !v.is_zero() {
                    m.set(index(idx, positions), index(idx, &rest), v.clone());
                }
            }
            m
        })
        .collect()
}

pub(crate) fn partial_gram(x: &RationalMatrix, y: &RationalMatrix) -> RationalMatrix {
    x.mul(&y.transpose()).expect("same shapes")
}

fn pair_rows(g: &RationalMatrix) -> [Vec<Rational>; 2] {
    let n = g.rows();
    let mut re = vec![Rational::zero(); hermitian_len(n)];
    let mut im = vec![Rational::zero(); hermitian_len(n)];
    for a in 0..n {
        re[a] = g.get(a, a).clone();
    }
    for (a, b) in upper_pairs(n) {
        re[re_index(n, a, b)] = g.get(a, b) + g.get(b, a);
        im[im_index(n, a, b)] = g.get(a, b) - g.get(b, a);
    }
    [re, im]
}

/// Scales a row so its first nonzero entry is 1; `None` for a zero row.
fn normalize(mut row: Vec<Rational>) -> Option<Vec<Rational>> {
    let lead = row.iter().find(|x| !x.is_zero())?.clone();
    if !lead.is_one() {
        for x in row.iter_mut() {
            if !x.is_zero() {
                *x = &*x / &lead;
            }
        }
    }
    Some(row)
}

fn build_rows(set: &States, positions: &[usize], acting: String) -> OpmConstraintSystem {
    let phis = reshape(set, positions);
    let n = phis.first().map_or_else(|| positions.iter().map(|&k| set.dims()[k]).product(), |p| p.rows());
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    let mut pairs = 0;
    for i in 0..phis.len() {
        for j in i + 1..phis.len() {
            pairs += 1;
            for row in pair_rows(&partial_gram(&phis[i], &phis[j])) {
                if let Some(r) = normalize(row) {
                    if seen.insert(r.clone()) {
                        rows.push(r);
                    }
                }
            }
        }
    }
    let constraints = Matrix::from_rows(hermitian_len(n), rows).expect("uniform row length");
    OpmConstraintSystem { acting, dim: n, constraints, pairs }
}

/// Constraint system for `acting`; a merged group is flattened first.
pub fn build_opm_constraints(set: &States, acting: &Acting) -> Result<OpmConstraintSystem> {
    match acting {
        Acting::Single(p) => {
            let k = set.party_index(p)?;
            Ok(build_rows(set, &[k], p.clone()))
        }
        Acting::Merged(a, b) => {
            let flat = set.flatten(a, b)?;
            let k = flat.party_index(&acting.name())?;
            Ok(build_rows(&flat, &[k], acting.name()))
        }
    }
}

/// Same system computed without flattening: E acts on the listed parties
/// jointly, with acting index row-major in the order given.
pub fn build_opm_constraints_on(set: &States, parties: &[&str]) -> Result<OpmConstraintSystem> {
    let positions = parties.iter().map(|p| set.party_index(p)).collect::<Result<Vec<_>>>()?;
    if positions.is_empty() || positions.iter().collect::<HashSet<_>>().len() != positions.len() {
        return Err(Error::structure("acting group must list distinct parties"));
    }
    Ok(build_rows(set, &positions, parties.concat()))
}

pub fn solution_space(c: &OpmConstraintSystem) -> SolutionSpace {
    SolutionSpace { dim: c.dim, basis: c.constraints.nullspace() }
}

pub fn is_trivial(sp: &SolutionSpace) -> bool {
    sp.basis.len() == 1
}

/// Whether the identity's coordinates satisfy every row.
pub fn identity_is_solution(c: &OpmConstraintSystem) -> bool {
    let id = HermitianParam::<Rational>::identity(c.dim);
    c.constraints.mul_vec(&id.coords).expect("width matches").iter().all(|x| x.is_zero())
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupVerdict {
    pub acting: String,
    pub hilbert_dim: usize,
    pub constraint_rows: usize,
    pub solution_dim: usize,
    pub trivial: bool,
    pub basis: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutVerdict {
    pub cut: String,
    pub groups: Vec<GroupVerdict>,
    pub irreducible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IrreducibilityReport {
    pub cuts: Vec<CutVerdict>,
    pub locally_irreducible: bool,
    pub strong_nonlocal: bool,
}

impl IrreducibilityReport {
    pub fn group(&self, cut: &str, acting: &str) -> Option<&GroupVerdict> {
        self.cuts.iter().find(|c| c.cut == cut)?.groups.iter().find(|g| g.acting == acting)
    }
}

/// The tripartition and the three bipartite cuts of a three-party set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cut {
    Tripartite,
    /// first two parties merged
    P01,
    /// first and third merged
    P02,
    /// last two merged
    P12,
}

impl Cut {
    pub const ALL: [Cut; 4] = [Cut::Tripartite, Cut::P01, Cut::P02, Cut::P12];

    pub fn parse(s: &str) -> Result<Vec<Cut>> {
        match s {
            "all" => Ok(Cut::ALL.to_vec()),
            "A" | "B" | "C" | "ABC" | "A_B_C" => Ok(vec![Cut::Tripartite]),
            "AB_C" => Ok(vec![Cut::P01]),
            "AC_B" => Ok(vec![Cut::P02]),
            "A_BC" => Ok(vec![Cut::P12]),
            _ => Err(Error::parameter(format!("unknown cut `{s}`"))),
        }
    }

    fn groups(&self, names: &[String]) -> (String, Vec<Acting>) {
        let (a, b, c) = (&names[0], &names[1], &names[2]);
        match self {
            Cut::Tripartite => (format!("{a}|{b}|{c}"), vec![Acting::single(a), Acting::single(b), Acting::single(c)]),
            Cut::P01 => (format!("{a}{b}|{c}"), vec![Acting::merged(a, b), Acting::single(c)]),
            Cut::P02 => (format!("{a}{c}|{b}"), vec![Acting::merged(a, c), Acting::single(b)]),
            Cut::P12 => (format!("{a}|{b}{c}"), vec![Acting::single(a), Acting::merged(b, c)]),
        }
    }
}

fn verdict(set: &States, acting: &Acting) -> Result<GroupVerdict> {
    let c = build_opm_constraints(set, acting)?;
    debug_assert!(identity_is_solution(&c));
    let sp = solution_space(&c);
    Ok(GroupVerdict {
        acting: c.acting.clone(),
        hilbert_dim: c.dim,
        constraint_rows: c.constraints.rows(),
        solution_dim: sp.basis.len(),
        trivial: is_trivial(&sp),
        basis: sp.basis.iter().map(|v| v.iter().map(|x| x.to_string()).collect()).collect(),
    })
}

pub fn certify(set: &States) -> Result<IrreducibilityReport> {
    certify_cuts(set, &Cut::ALL)
}

/// Runs the OPM analysis for the selected cuts. Refuses non-orthogonal sets.
pub fn certify_cuts(set: &States, cuts: &[Cut]) -> Result<IrreducibilityReport> {
    if set.parties().len() != 3 {
        return Err(Error::structure(format!("certification needs three parties, set has {}", set.parties().len())));
    }
    set.ensure_orthogonal()?;
    let names: Vec<String> = set.parties().iter().map(|p| p.name.clone()).collect();
    let jobs: Vec<(usize, String, Acting)> = cuts
        .iter()
        .enumerate()
        .flat_map(|(k, cut)| {
            let (name, groups) = cut.groups(&names);
            groups.into_iter().map(move |g| (k, name.clone(), g))
        })
        .collect();
    let verdicts = jobs.par_iter().map(|(_, _, g)| verdict(set, g)).collect::<Result<Vec<_>>>()?;
    let mut out: Vec<CutVerdict> = Vec::new();
    for ((k, name, _), v) in jobs.into_iter().zip(verdicts) {
        match out.get_mut(k) {
            Some(c) => c.groups.push(v),
            None => out.push(CutVerdict { cut: name, groups: vec![v], irreducible: true }),
        }
    }
    for c in out.iter_mut() {
        c.irreducible = c.groups.iter().all(|g| g.trivial);
    }
    let locally_irreducible = out.iter().filter(|c| c.cut.matches('|').count() == 2).all(|c| c.irreducible);
    let strong_nonlocal = cuts.len() == Cut::ALL.len() && out.iter().all(|c| c.irreducible);
    Ok(IrreducibilityReport { cuts: out, locally_irreducible, strong_nonlocal })
}

#[derive(Clone, Debug, Serialize)]
pub struct OutcomeElimination {
    pub outcome: String,
    pub eliminated: Vec<String>,
    pub survivors: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EliminationReport {
    pub acting: String,
    pub outcomes: Vec<OutcomeElimination>,
}

/// Checks that the two-outcome measurement (E, I−E) on `acting` preserves
/// orthogonality and lists the states each outcome rules out. E must be a
/// real symmetric projector.
pub fn verify_reducing_measurement(set: &States, acting: &Acting, e: &RationalMatrix) -> Result<EliminationReport> {
    let (flat, name) = match acting {
        Acting::Single(p) => (set.clone(), p.clone()),
        Acting::Merged(a, b) => (set.flatten(a, b)?, acting.name()),
    };
    let k = flat.party_index(&name)?;
    let n = flat.dims()[k];
    if e.rows() != n || !e.is_square() {
        return Err(Error::structure(format!("operator must be {n}x{n}")));
    }
    if !e.is_symmetric() || !e.is_projector() {
        return Err(Error::Completeness { party: name, reason: "operator is not a symmetric projector".into() });
    }
    let phis = reshape(&flat, &[k]);
    let weight = |g: &RationalMatrix| {
        let mut s = Rational::zero();
        for a in 0..n {
            for b in 0..n {
                if !e.get(a, b).is_zero() && !g.get(a, b).is_zero() {
                    s += e.get(a, b) * g.get(a, b);
                }
            }
        }
        s
    };
    let labels = flat.labels();
    for i in 0..phis.len() {
        for j in i + 1..phis.len() {
            if !weight(&partial_gram(&phis[i], &phis[j])).is_zero() {
                return Err(Error::NotOrthogonalityPreserving { acting: name, pair: (labels[i].to_string(), labels[j].to_string()) });
            }
        }
    }
    let mut on_e = OutcomeElimination { outcome: "E".into(), eliminated: vec![], survivors: vec![] };
    let mut on_rest = OutcomeElimination { outcome: "I-E".into(), eliminated: vec![], survivors: vec![] };
    for (phi, label) in phis.iter().zip(&labels) {
        let g = partial_gram(phi, phi);
        let p = weight(&g);
        let total = (0..n).fold(Rational::zero(), |s, a| s + g.get(a, a));
        let push = |o: &mut OutcomeElimination, zero: bool| {
            if zero {
                o.eliminated.push(label.to_string())
            } else {
                o.survivors.push(label.to_string())
            }
        };
        push(&mut on_rest, (total - &p).is_zero());
        push(&mut on_e, p.is_zero());
    }
    Ok(EliminationReport { acting: name, outcomes: vec![on_e, on_rest] })
}

/// Projector onto the span of the given computational basis vectors.
pub fn basis_projector(n: usize, support: &[usize]) -> RationalMatrix {
    Matrix::from_fn(n, n, |r, c| if r == c && support.contains(&r) { Rational::one() } else { Rational::zero() })
}

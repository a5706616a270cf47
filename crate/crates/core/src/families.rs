//! Generators for the tripartite product-state families.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::arith::int;
use crate::error::{Error, Result};
use crate::hilbert::{LocalKet, OrthogonalityReport, Party, ProductState, StateSet};
use crate::{Product, States};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FamilyId {
    Set1,
    Set2,
    SetB,
    Prop3(usize),
    Prop4(usize),
    SetC,
    SetA,
}

impl FamilyId {
    /// Parses `set1`, `setB`, `prop3` (with `d`), ... Case-insensitive.
    pub fn parse(name: &str, d: Option<usize>) -> Result<Self> {
        let need_d = || d.ok_or_else(|| Error::parameter(format!("{name} needs a dimension (--d)")));
        match name.to_ascii_lowercase().as_str() {
            "set1" => Ok(FamilyId::Set1),
            "set2" => Ok(FamilyId::Set2),
            "setb" => Ok(FamilyId::SetB),
            "setc" => Ok(FamilyId::SetC),
            "seta" => Ok(FamilyId::SetA),
            "prop3" => {
                let d = need_d()?;
                check_odd(d)?;
                Ok(FamilyId::Prop3(d))
            }
            "prop4" => {
                let d = need_d()?;
                check_even(d)?;
                Ok(FamilyId::Prop4(d))
            }
            _ => Err(Error::parameter(format!("unknown family `{name}`"))),
        }
    }

    pub fn claimed_cardinality(&self) -> usize {
        match *self {
            FamilyId::Set1 | FamilyId::Set2 => 18,
            FamilyId::SetB => 15,
            FamilyId::Prop3(d) => 15 * (d - 1) / 2,
            FamilyId::Prop4(d) => 18 * d - 13,
            FamilyId::SetC => 24,
            FamilyId::SetA => 26,
        }
    }

    pub fn claimed_dim(&self) -> usize {
        match *self {
            FamilyId::Prop3(d) | FamilyId::Prop4(d) => d,
            _ => 3,
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyId::Set1 => write!(f, "set1"),
            FamilyId::Set2 => write!(f, "set2"),
            FamilyId::SetB => write!(f, "setB"),
            FamilyId::Prop3(d) => write!(f, "prop3(d={d})"),
            FamilyId::Prop4(d) => write!(f, "prop4(d={d})"),
            FamilyId::SetC => write!(f, "setC"),
            FamilyId::SetA => write!(f, "setA"),
        }
    }
}

fn check_odd(d: usize) -> Result<()> {
    if d < 3 || d.is_multiple_of(2) {
        return Err(Error::parameter(format!("d must be odd and at least 3, got {d}")));
    }
    Ok(())
}

fn check_even(d: usize) -> Result<()> {
    if d < 4 || d % 2 == 1 {
        return Err(Error::parameter(format!("d must be even and at least 4, got {d}")));
    }
    Ok(())
}

/// One tensor factor in listing notation.
#[derive(Clone, Copy, Debug)]
enum F {
    /// |i⟩
    K(usize),
    /// |i±j⟩
    Pm(usize, usize),
    /// |i+j⟩
    Sum(usize, usize),
}

type Terms = Vec<(usize, i64)>;

/// Expands every ± in `factors`; the leftmost ± varies slowest.
fn expand_signs(factors: &[F]) -> Vec<(Vec<char>, Vec<Terms>)> {
    let k = factors.iter().filter(|f| matches!(f, F::Pm(..))).count();
    (0..1usize << k)
        .map(|mask| {
            let mut signs = Vec::new();
            let locals = factors
                .iter()
                .map(|f| match *f {
                    F::K(i) => vec![(i, 1)],
                    F::Sum(i, j) => vec![(i, 1), (j, 1)],
                    F::Pm(i, j) => {
                        let neg = (mask >> (k - 1 - signs.len())) & 1 == 1;
                        signs.push(if neg { '-' } else { '+' });
                        vec![(i, 1), (j, if neg { -1 } else { 1 })]
                    }
                })
                .collect();
            (signs, locals)
        })
        .collect()
}

fn local(dim: usize, terms: &Terms) -> Result<LocalKet<crate::Rational>> {
    let t: Vec<_> = terms.iter().map(|&(i, c)| (i, int(c))).collect();
    LocalKet::from_terms(dim, &t)
}

fn abc(dim: usize) -> Vec<Party> {
    ["A", "B", "C"].iter().map(|n| Party::new(*n, dim)).collect()
}

/// Labels the expansion of each listed family `phi_1, phi_2, ...` in order.
fn sequential(dim: usize, listing: &[[F; 3]]) -> Result<States> {
    let mut products = Vec::new();
    for factors in listing {
        for (_, locals) in expand_signs(factors) {
            let label = format!("phi_{}", products.len() + 1);
            products.push(ProductState::new(label, locals.iter().map(|t| local(dim, t)).collect::<Result<_>>()?));
        }
    }
    StateSet::from_products(abc(dim), products)
}

use F::{Pm, Sum, K};

const SET1_HEAD: [[F; 3]; 6] = [
    [Pm(0, 1), K(0), K(1)],
    [K(1), Pm(0, 1), K(0)],
    [K(0), K(1), Pm(0, 1)],
    [K(2), K(1), Pm(1, 2)],
    [K(1), Pm(1, 2), K(2)],
    [Pm(1, 2), K(2), K(1)],
];

pub fn gen_set1() -> States {
    let mut l = SET1_HEAD.to_vec();
    l.extend([[K(0), K(2), Pm(1, 2)], [Pm(1, 2), K(0), K(2)], [Pm(0, 1), K(2), K(0)]]);
    sequential(3, &l).expect("fixed listing")
}

pub fn gen_set2() -> States {
    let mut l = SET1_HEAD.to_vec();
    l.extend([[Pm(1, 2), K(0), K(2)], [K(2), K(0), Pm(0, 1)], [K(0), K(2), Pm(1, 2)]]);
    sequential(3, &l).expect("fixed listing")
}

pub fn gen_set_b() -> States {
    sequential(
        3,
        &[
            [Pm(0, 1), K(0), K(1)],
            [K(1), Pm(0, 1), K(0)],
            [K(0), K(1), Pm(0, 1)],
            [K(2), K(1), Pm(1, 2)],
            [K(0), Pm(0, 2), K(0)],
            [Pm(1, 2), K(2), K(0)],
            [K(0), K(2), Sum(1, 2)],
            [K(0), Sum(0, 1), K(2)],
            [K(2), K(0), Sum(1, 2)],
        ],
    )
    .expect("fixed listing")
}

pub fn gen_set_c() -> States {
    sequential(
        3,
        &[
            [K(0), K(1), Pm(0, 1)],
            [Pm(0, 1), K(0), K(1)],
            [K(1), Pm(0, 1), K(0)],
            [K(0), K(2), Pm(0, 2)],
            [Pm(0, 2), K(0), K(2)],
            [K(2), Pm(0, 2), K(0)],
            [K(1), K(2), Pm(0, 1)],
            [Pm(0, 1), K(1), K(2)],
            [K(2), Pm(0, 1), K(1)],
            [K(2), K(1), Pm(0, 2)],
            [Pm(0, 2), K(2), K(1)],
            [K(1), Pm(0, 2), K(2)],
        ],
    )
    .expect("fixed listing")
}

pub fn gen_set_a() -> States {
    sequential(
        3,
        &[
            [Pm(0, 2), Pm(0, 1), K(2)],
            [K(1), K(0), Pm(0, 2)],
            [K(1), Pm(0, 2), K(1)],
            [Pm(0, 2), K(0), Pm(0, 1)],
            [K(1), K(1), Pm(1, 2)],
            [Pm(1, 2), K(2), K(2)],
            [K(2), Pm(1, 2), Pm(0, 1)],
            [K(0), K(2), Pm(0, 2)],
            [K(0), Pm(1, 2), K(1)],
            [Pm(0, 1), K(1), K(0)],
        ],
    )
    .expect("fixed listing")
}

/// Pushes one listed family under explicit labels: `base^+`/`base^-` for a
/// single ±, `base` otherwise.
fn push_labeled(out: &mut Vec<(String, [F; 3])>, base: String, factors: [F; 3]) {
    out.push((base, factors));
}

fn realize(dims: &[usize], listing: &[(String, [F; 3])]) -> Result<Vec<Product>> {
    let mut products = Vec::new();
    for (base, factors) in listing {
        for (signs, locals) in expand_signs(factors) {
            let label = if signs.is_empty() { base.clone() } else { format!("{base}^{}", signs.iter().collect::<String>()) };
            let locals = locals.iter().zip(dims).map(|(t, &d)| local(d, t)).collect::<Result<_>>()?;
            products.push(ProductState::new(label, locals));
        }
    }
    Ok(products)
}

pub fn gen_prop3(d: usize) -> Result<States> {
    check_odd(d)?;
    let h = (d - 1) / 2;
    let mut l = Vec::new();
    let phi = |k: usize| format!("phi_{k}");
    let pair = |l: &mut Vec<(String, [F; 3])>, k: usize, f: [F; 3]| {
        // consecutive labels k, k+1 for the two signs
        l.push((format!("{}|{}", phi(k), phi(k + 1)), f));
    };
    pair(&mut l, 1, [Pm(0, 1), K(0), K(h)]);
    pair(&mut l, 3, [K(h), Pm(0, 1), K(0)]);
    pair(&mut l, 5, [K(0), K(h), Pm(0, 1)]);
    for i in (2..d.saturating_sub(2)).step_by(2) {
        pair(&mut l, 5 + i, [Pm(i, i + 1), K(0), K(h)]);
    }
    for i in (2..d.saturating_sub(2)).step_by(2) {
        pair(&mut l, d + 2 + i, [K(h), Pm(i, i + 1), K(0)]);
    }
    for i in (2..d.saturating_sub(2)).step_by(2) {
        pair(&mut l, 2 * d - 1 + i, [K(0), K(h), Pm(i, i + 1)]);
    }
    for i in (1..d - 1).step_by(2) {
        pair(&mut l, 3 * d - 3 + i, [K(d - 1), K(h), Pm(i, i + 1)]);
    }
    for i in 0..h {
        pair(&mut l, 4 * d - 3 + 2 * i, [K(0), Pm(i, d - i - 1), K(0)]);
    }
    for i in (1..d - 1).step_by(2) {
        pair(&mut l, 5 * d - 5 + i, [Pm(i, i + 1), K(d - 1), K(0)]);
    }
    for i in (1..d - 1).step_by(2) {
        l.push((phi(6 * d - 6 + i.div_ceil(2)), [K(0), K(d - 1), Sum(i, i + 1)]));
    }
    for i in (0..d - 2).step_by(2) {
        l.push((phi((13 * d - 13) / 2 + (i + 2) / 2), [K(0), Sum(i, i + 1), K(d - 1)]));
    }
    for i in (1..d - 1).step_by(2) {
        l.push((phi(7 * d - 7 + i.div_ceil(2)), [K(d - 1), K(0), Sum(i, i + 1)]));
    }
    let mut products = Vec::new();
    for (labels, factors) in &l {
        let names: Vec<&str> = labels.split('|').collect();
        for ((_, locals), name) in expand_signs(factors).into_iter().zip(&names) {
            let locals = locals.iter().map(|t| local(d, t)).collect::<Result<_>>()?;
            products.push(ProductState::new(*name, locals));
        }
    }
    products.sort_by_key(|p| label_number(&p.label));
    StateSet::from_products(abc(d), products)
}

fn label_number(label: &str) -> usize {
    label.trim_start_matches(|c: char| !c.is_ascii_digit()).parse().unwrap_or(usize::MAX)
}

/// Report for the even-dimension family, whose listing is taken literally.
#[derive(Clone, Debug, Serialize)]
pub struct Prop4Report {
    pub d: usize,
    pub claimed_cardinality: usize,
    pub emitted: usize,
    pub cardinality_matches: bool,
    pub claimed_dim: usize,
    pub effective_dims: Vec<usize>,
    pub label_collisions: Vec<String>,
    pub orthogonality: OrthogonalityReport,
    pub status: String,
}

pub struct Prop4 {
    pub set: States,
    pub report: Prop4Report,
}

/// Emits every sub-family of the even-d listing with indices as written. The
/// local dimension is whatever the largest index requires, and repeated
/// labels get a `#2`, `#3`, ... suffix.
pub fn gen_prop4(d: usize) -> Result<Prop4> {
    check_even(d)?;
    let m = d / 2;
    let mut l = Vec::new();
    let phi = |k: usize| format!("phi_{k}");
    let psi = |k: usize| format!("psi_{k}");
    for i in 0..d {
        push_labeled(&mut l, phi(i + 1), [Pm(i, i + 1), K(i), K(d)]);
    }
    for i in 0..d {
        push_labeled(&mut l, phi(d + 1 + i), [K(d), Pm(i, i + 1), K(i)]);
    }
    for i in 0..d {
        push_labeled(&mut l, phi(2 * d + 1 + i), [K(i), K(d), Pm(i, i + 1)]);
    }
    for i in d..=2 * d - 2 {
        push_labeled(&mut l, phi(2 * d + 1 + i), [Pm(i, i + 1), K(d - 1), K(i + 1)]);
    }
    for i in d..=2 * d - 2 {
        push_labeled(&mut l, phi(3 * d + i), [K(i + 1), Pm(i, i + 1), K(d - 1)]);
    }
    for i in d..=2 * d - 2 {
        push_labeled(&mut l, phi(4 * d - 1 + i), [K(d - 1), K(i + 1), Pm(i, i + 1)]);
    }
    let odd_low: Vec<usize> = (1..=d - 3).step_by(2).collect();
    let even_low: Vec<usize> = (0..=d - 4).step_by(2).collect();
    for &i in &odd_low {
        push_labeled(&mut l, phi(6 * d - 2 + (i - 1) / 2), [Sum(d - 1, d), K(i), K(d)]);
    }
    for &i in &odd_low {
        push_labeled(&mut l, phi(6 * d - 1 + (d - 4) / 2 + (i - 1) / 2), [K(d), Sum(d - 1, d), K(i)]);
    }
    for &i in &odd_low {
        push_labeled(&mut l, phi(7 * d - 4 + (i - 1) / 2), [K(i), K(d), Sum(d - 1, d)]);
    }
    for &i in &even_low {
        push_labeled(&mut l, psi(7 * d - 3 + (d - 4) / 2 + i / 2), [Sum(d - 2, d - 1), K(i), K(d)]);
    }
    for &i in &even_low {
        push_labeled(&mut l, psi(8 * d - 6 + i / 2), [K(d), Sum(d - 2, d - 1), K(i)]);
    }
    for &i in &even_low {
        push_labeled(&mut l, psi(8 * d - 5 + (d - 4) / 2 + i / 2), [K(i), K(d), Sum(d - 2, d - 1)]);
    }
    let even_high: Vec<usize> = (d + 2..=2 * d - 2).step_by(2).collect();
    for &i in &even_high {
        push_labeled(&mut l, psi(9 * d - 9 + (i - d) / 2), [Sum(d - 1, d), K(d - 1), K(i)]);
    }
    for &i in &even_high {
        push_labeled(&mut l, psi(9 * d - 10 + i / 2), [K(i), Sum(d - 1, d), K(d - 1)]);
    }
    for &i in &even_high {
        push_labeled(&mut l, psi(10 * d - 11 + (i - d) / 2), [K(d - 1), K(i), Sum(d - 1, d)]);
    }
    let odd_high: Vec<usize> = (d + 3..=2 * d - 1).step_by(2).collect();
    for &i in &odd_high {
        push_labeled(&mut l, psi(10 * d - 11 + (i - 3) / 2), [Sum(d, d + 1), K(d - 1), K(i)]);
    }
    for &i in &odd_high {
        push_labeled(&mut l, psi(11 * d - 13 + (i - d - 1) / 2), [K(i), Sum(d, d + 1), K(d - 1)]);
    }
    for &i in &odd_high {
        push_labeled(&mut l, psi(11 * d - 13 + (i - 3) / 2), [K(d - 1), K(i), Sum(d, d + 1)]);
    }
    push_labeled(&mut l, psi(12 * d - 14), [K(m - 1), Sum(m - 1, m), K(m)]);
    push_labeled(&mut l, psi(12 * d - 13), [K(m), K(m - 1), Sum(m - 1, m)]);
    push_labeled(&mut l, psi(12 * d - 12), [Sum(m - 1, m), K(m), K(m - 1)]);
    push_labeled(&mut l, psi(12 * d - 11), [K(m), Sum(m, m + 1), K(m)]);
    push_labeled(&mut l, psi(12 * d - 10), [K(m + 1), K(m), Sum(m, m + 1)]);

    let mut effective = [0usize; 3];
    for (_, factors) in &l {
        for (slot, f) in effective.iter_mut().zip(factors) {
            let top = match *f {
                K(i) => i,
                Pm(i, j) | Sum(i, j) => i.max(j),
            };
            *slot = (*slot).max(top + 1);
        }
    }
    let mut products = realize(&effective, &l)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut collisions = Vec::new();
    for p in products.iter_mut() {
        let c = counts.entry(p.label.clone()).or_insert(0);
        *c += 1;
        if *c > 1 {
            collisions.push(p.label.clone());
            p.label = format!("{}#{}", p.label, c);
        }
    }
    let parties = ["A", "B", "C"].iter().zip(effective).map(|(n, dim)| Party::new(*n, dim)).collect();
    let set = StateSet::from_products(parties, products)?;
    let orthogonality = set.check_orthogonality();
    let claimed = 18 * d - 13;
    let matches = set.len() == claimed;
    let dims_ok = effective.iter().all(|&e| e <= d);
    let mut problems = Vec::new();
    if !matches {
        problems.push(format!("emitted {} states, claimed {claimed}", set.len()));
    }
    if !dims_ok {
        problems.push(format!("indices need local dimensions {effective:?}, claimed {d}"));
    }
    if !collisions.is_empty() {
        problems.push(format!("{} repeated labels", collisions.len()));
    }
    if !orthogonality.is_orthogonal() {
        problems.push(format!("{} non-orthogonal pairs", orthogonality.violations.len()));
    }
    let status = if problems.is_empty() { "consistent".to_string() } else { format!("discrepancy: {}", problems.join("; ")) };
    let report = Prop4Report {
        d,
        claimed_cardinality: claimed,
        emitted: set.len(),
        cardinality_matches: matches,
        claimed_dim: d,
        effective_dims: effective.to_vec(),
        label_collisions: collisions,
        orthogonality,
        status,
    };
    Ok(Prop4 { set, report })
}

/// Summary emitted alongside every generated family.
#[derive(Clone, Debug, Serialize)]
pub struct GenerationReport {
    pub family: String,
    pub claimed_cardinality: usize,
    pub emitted: usize,
    pub cardinality_matches: bool,
    pub claimed_dim: usize,
    pub effective_dims: Vec<usize>,
    pub orthogonality: OrthogonalityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop4: Option<Prop4Report>,
}

pub fn generate(id: FamilyId) -> Result<(States, GenerationReport)> {
    let (set, prop4) = match id {
        FamilyId::Set1 => (gen_set1(), None),
        FamilyId::Set2 => (gen_set2(), None),
        FamilyId::SetB => (gen_set_b(), None),
        FamilyId::Prop3(d) => (gen_prop3(d)?, None),
        FamilyId::Prop4(d) => {
            let p = gen_prop4(d)?;
            (p.set, Some(p.report))
        }
        FamilyId::SetC => (gen_set_c(), None),
        FamilyId::SetA => (gen_set_a(), None),
    };
    let orthogonality = match &prop4 {
        Some(r) => r.orthogonality.clone(),
        None => set.check_orthogonality(),
    };
    let report = GenerationReport {
        family: id.to_string(),
        claimed_cardinality: id.claimed_cardinality(),
        emitted: set.len(),
        cardinality_matches: set.len() == id.claimed_cardinality(),
        claimed_dim: id.claimed_dim(),
        effective_dims: set.dims(),
        orthogonality,
        prop4,
    };
    Ok((set, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::format_local;
    use std::collections::BTreeSet;

    fn row(s: &States, label: &str) -> String {
        let p = s.state(label).unwrap().product.as_ref().unwrap();
        p.locals.iter().map(format_local).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn listed_examples() {
        let s1 = gen_set1();
        assert_eq!(row(&s1, "phi_17"), "|0>+|1> |2> |0>");
        assert_eq!(row(&s1, "phi_18"), "|0>-|1> |2> |0>");
        let s2 = gen_set2();
        assert_eq!(row(&s2, "phi_17"), "|0> |2> |1>+|2>");
        assert_eq!(row(&s2, "phi_16"), "|2> |0> |0>-|1>");
        assert_eq!(row(&gen_set_b(), "phi_13"), "|0> |2> |1>+|2>");
        assert_eq!(row(&gen_set_c(), "phi_24"), "|1> |0>-|2> |2>");
        let a = gen_set_a();
        assert_eq!(row(&a, "phi_1"), "|0>+|2> |0>+|1> |2>");
        assert_eq!(row(&a, "phi_2"), "|0>+|2> |0>-|1> |2>");
        assert_eq!(row(&a, "phi_3"), "|0>-|2> |0>+|1> |2>");
        assert_eq!(row(&a, "phi_26"), "|0>-|1> |1> |0>");
    }

    #[test]
    fn sign_expansion_order() {
        let v = expand_signs(&[Pm(0, 1), K(0), Pm(1, 2)]);
        let signs: Vec<String> = v.iter().map(|(s, _)| s.iter().collect()).collect();
        assert_eq!(signs, ["++", "+-", "-+", "--"]);
    }

    #[test]
    fn cardinalities() {
        assert_eq!(gen_set1().len(), 18);
        assert_eq!(gen_set2().len(), 18);
        assert_eq!(gen_set_b().len(), 15);
        assert_eq!(gen_set_c().len(), 24);
        assert_eq!(gen_set_a().len(), 26);
        for d in [3, 5, 7, 9] {
            assert_eq!(gen_prop3(d).unwrap().len(), 15 * (d - 1) / 2);
        }
    }

    #[test]
    fn prop3_labels_are_contiguous() {
        for d in [3, 5, 7, 9, 11] {
            let s = gen_prop3(d).unwrap();
            let want: Vec<String> = (1..=s.len()).map(|k| format!("phi_{k}")).collect();
            assert_eq!(s.labels(), want.iter().map(String::as_str).collect::<Vec<_>>(), "d={d}");
        }
    }

    #[test]
    fn prop3_at_three_is_set_b() {
        let kets = |s: &States| s.states().iter().map(|e| format!("{:?}", e.ket)).collect::<BTreeSet<_>>();
        assert_eq!(kets(&gen_prop3(3).unwrap()), kets(&gen_set_b()));
    }

    #[test]
    fn orthogonal_families() {
        for s in [gen_set1(), gen_set2(), gen_set_b(), gen_set_c(), gen_set_a()] {
            assert!(s.check_orthogonality().is_orthogonal());
        }
        for d in [3, 5, 7] {
            assert!(gen_prop3(d).unwrap().check_orthogonality().is_orthogonal());
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(gen_prop3(4).is_err());
        assert!(gen_prop3(1).is_err());
        assert!(gen_prop4(5).is_err());
        assert!(gen_prop4(2).is_err());
        assert!(FamilyId::parse("prop3", None).is_err());
        assert_eq!(FamilyId::parse("SetA", None).unwrap(), FamilyId::SetA);
        assert!(FamilyId::parse("prop3", Some(4)).is_err());
    }

    #[test]
    fn prop4_reports_literal_reading() {
        for d in [4, 6, 8] {
            let p = gen_prop4(d).unwrap();
            let r = &p.report;
            assert_eq!(r.claimed_cardinality, 18 * d - 13);
            assert_eq!(r.emitted, 18 * d - 13, "d={d}");
            assert!(r.effective_dims.iter().all(|&e| e > d));
            assert!(r.status.starts_with("discrepancy"));
        }
    }
}

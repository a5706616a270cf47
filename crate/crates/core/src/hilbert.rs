//! Multiparty kets, labeled state sets and bipartite-cut flattening.

pub(crate) mod text;

use std::collections::BTreeSet;
use std::fmt::Display;

use serde::Serialize;

use crate::arith::Field;
use crate::error::{Error, Result};

pub use text::{format_local, parse_state_set, write_state_set};

/// A subsystem. Ancillas name the party that holds them in `owner`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Party {
    pub name: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
}

impl Party {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Party { name: name.into(), dim, owner: None }
    }

    pub fn ancilla(name: impl Into<String>, dim: usize, owner: impl Into<String>) -> Self {
        Party { name: name.into(), dim, owner: Some(owner.into()) }
    }
}

/// Unnormalized local ket.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LocalKet<T> {
    amplitudes: Vec<T>,
}

impl<T: Field> LocalKet<T> {
    pub fn new(amplitudes: Vec<T>) -> Result<Self> {
        if amplitudes.iter().all(|a| a.is_zero()) {
            return Err(Error::structure("local ket has no nonzero amplitude"));
        }
        Ok(LocalKet { amplitudes })
    }

    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        Self::from_terms(dim, &[(i, T::one())])
    }

    pub fn from_terms(dim: usize, terms: &[(usize, T)]) -> Result<Self> {
        let mut amps = vec![T::zero(); dim];
        for (i, c) in terms {
            if *i >= dim {
                return Err(Error::structure(format!("basis index {i} out of range for dimension {dim}")));
            }
            amps[*i] = amps[*i].clone() + c.clone();
        }
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn kron(&self, other: &Self) -> Self {
        let amplitudes = self.amplitudes.iter().flat_map(|a| other.amplitudes.iter().map(move |b| a.clone() * b.clone())).collect();
        LocalKet { amplitudes }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductState<T> {
    pub label: String,
    pub locals: Vec<LocalKet<T>>,
}

impl<T: Field> ProductState<T> {
    pub fn new(label: impl Into<String>, locals: Vec<LocalKet<T>>) -> Self {
        ProductState { label: label.into(), locals }
    }
}

/// Dense ket over a tensor-product basis, parties in row-major order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompositeKet<T> {
    dims: Vec<usize>,
    amplitudes: Vec<T>,
}

pub fn expand<T: Field>(p: &ProductState<T>, dims: &[usize]) -> Result<CompositeKet<T>> {
    if p.locals.len() != dims.len() {
        return Err(Error::structure(format!("{} has {} factors for {} parties", p.label, p.locals.len(), dims.len())));
    }
    let mut ket = CompositeKet { dims: vec![], amplitudes: vec![T::one()] };
    for (local, &d) in p.locals.iter().zip(dims) {
        if local.dim() != d {
            return Err(Error::structure(format!("{}: factor of dimension {} where {} is expected", p.label, local.dim(), d)));
        }
        ket = ket.tensor(&CompositeKet { dims: vec![d], amplitudes: local.amplitudes.clone() });
    }
    Ok(ket)
}

impl<T: Field> CompositeKet<T> {
    pub fn new(dims: Vec<usize>, amplitudes: Vec<T>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if amplitudes.len() != n {
            return Err(Error::structure(format!("{} amplitudes for a space of dimension {n}", amplitudes.len())));
        }
        Ok(CompositeKet { dims, amplitudes })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        CompositeKet { dims, amplitudes: vec![T::zero(); n] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [T] {
        &mut self.amplitudes
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|a| a.is_zero())
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn inner(&self, other: &Self) -> Result<T> {
        if self.dims != other.dims {
            return Err(Error::structure(format!("inner product of kets on {:?} and {:?}", self.dims, other.dims)));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).fold(T::zero(), |acc, (a, b)| {
            if a.is_zero() || b.is_zero() {
                acc
            } else {
                acc + a.clone() * b.clone()
            }
        }))
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let amplitudes = self.amplitudes.iter().flat_map(|a| other.amplitudes.iter().map(move |b| a.clone() * b.clone())).collect();
        CompositeKet { dims, amplitudes }
    }

    /// Merges parties `first` and `second` into one party of dimension
    /// `d_first * d_second`, index `i_first * d_second + i_second`, placed at
    /// the lower of the two positions.
    pub fn merge(&self, first: usize, second: usize) -> Result<Self> {
        let (new_dims, map) = merge_layout(&self.dims, first, second)?;
        let mut out = Self::zeros(new_dims);
        for (idx, a) in self.amplitudes.iter().enumerate() {
            if !a.is_zero() {
                out.amplitudes[map(idx)] = a.clone();
            }
        }
        Ok(out)
    }

    /// Inverse of [`CompositeKet::merge`].
    pub fn split(&self, merged_dims: &[usize], first: usize, second: usize) -> Result<Self> {
        let (new_dims, map) = merge_layout(merged_dims, first, second)?;
        if new_dims != self.dims {
            return Err(Error::structure("split layout does not match the ket"));
        }
        let mut out = Self::zeros(merged_dims.to_vec());
        for (idx, slot) in out.amplitudes.iter_mut().enumerate() {
            *slot = self.amplitudes[map(idx)].clone();
        }
        Ok(out)
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

#[allow(clippy::type_complexity)]
fn merge_layout(dims: &[usize], first: usize, second: usize) -> Result<(Vec<usize>, Box<dyn Fn(usize) -> usize>)> {
    if first == second || first >= dims.len() || second >= dims.len() {
        return Err(Error::structure(format!("cannot merge positions {first} and {second}")));
    }
    let lo = first.min(second);
    let mut new_dims = Vec::with_capacity(dims.len() - 1);
    let mut origin = Vec::with_capacity(dims.len() - 1);
    for (k, &d) in dims.iter().enumerate() {
        if k == lo {
            new_dims.push(dims[first] * dims[second]);
            origin.push(None);
        } else if k != first && k != second {
            new_dims.push(d);
            origin.push(Some(k));
        }
    }
    let old_strides = strides(dims);
    let new_strides = strides(&new_dims);
    let dims = dims.to_vec();
    let d_second = dims[second];
    let map = move |idx: usize| {
        let digit = |k: usize| (idx / old_strides[k]) % dims[k];
        origin.iter().zip(&new_strides).fold(0, |acc, (o, s)| {
            let v = match o {
                Some(k) => digit(*k),
                None => digit(first) * d_second + digit(second),
            };
            acc + v * s
        })
    };
    Ok((new_dims, Box::new(map)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateEntry<T> {
    pub label: String,
    pub ket: CompositeKet<T>,
    pub product: Option<ProductState<T>>,
}

/// Ordered, labeled family of kets over a fixed party list.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSet<T> {
    parties: Vec<Party>,
    states: Vec<StateEntry<T>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub left: String,
    pub right: String,
    pub inner: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrthogonalityReport {
    pub pairs_checked: usize,
    pub violations: Vec<Violation>,
}

impl OrthogonalityReport {
    pub fn is_orthogonal(&self) -> bool {
        self.violations.is_empty()
    }
}

impl<T: Field + Display> StateSet<T> {
    pub fn new(parties: Vec<Party>, states: Vec<StateEntry<T>>) -> Result<Self> {
        validate_parties(&parties)?;
        let dims: Vec<usize> = parties.iter().map(|p| p.dim).collect();
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s.label.as_str()) {
                return Err(Error::structure(format!("duplicate label {}", s.label)));
            }
            if s.ket.dims != dims {
                return Err(Error::structure(format!("{} lives on {:?}, set is {:?}", s.label, s.ket.dims, dims)));
            }
        }
        Ok(StateSet { parties, states })
    }

    pub fn from_products(parties: Vec<Party>, products: Vec<ProductState<T>>) -> Result<Self> {
        let dims: Vec<usize> = parties.iter().map(|p| p.dim).collect();
        let states = products
            .into_iter()
            .map(|p| Ok(StateEntry { label: p.label.clone(), ket: expand(&p, &dims)?, product: Some(p) }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(parties, states)
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn states(&self) -> &[StateEntry<T>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.states.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn party_index(&self, name: &str) -> Result<usize> {
        self.parties.iter().position(|p| p.name == name).ok_or_else(|| Error::UnknownParty(name.to_string()))
    }

    pub fn state(&self, label: &str) -> Result<&StateEntry<T>> {
        self.states.iter().find(|s| s.label == label).ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn check_orthogonality(&self) -> OrthogonalityReport {
        let mut violations = Vec::new();
        let mut pairs = 0;
        for (i, x) in self.states.iter().enumerate() {
            for y in &self.states[i + 1..] {
                pairs += 1;
                let v = entry_inner(x, y);
                if !v.is_zero() {
                    violations.push(Violation { left: x.label.clone(), right: y.label.clone(), inner: v.to_string() });
                }
            }
        }
        OrthogonalityReport { pairs_checked: pairs, violations }
    }

    pub fn ensure_orthogonal(&self) -> Result<()> {
        match self.check_orthogonality().violations.into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::NotOrthogonal(v.left, v.right, v.inner)),
        }
    }

    /// Merges two parties into one named by concatenation, e.g. A and B into
    /// "AB". Labels are kept, so the provenance map is the identity on labels.
    pub fn flatten(&self, first: &str, second: &str) -> Result<Self> {
        let f = self.party_index(first)?;
        let s = self.party_index(second)?;
        if f == s {
            return Err(Error::structure(format!("cannot merge {first} with itself")));
        }
        let merged_name = format!("{first}{second}");
        if self.parties.iter().any(|p| p.name == merged_name) {
            return Err(Error::structure(format!("party {merged_name} already exists")));
        }
        let lo = f.min(s);
        let mut parties = Vec::with_capacity(self.parties.len() - 1);
        for (k, p) in self.parties.iter().enumerate() {
            if k == lo {
                parties.push(Party {
                    name: merged_name.clone(),
                    dim: self.parties[f].dim * self.parties[s].dim,
                    owner: self.parties[f].owner.clone(),
                });
            } else if k != f && k != s {
                parties.push(p.clone());
            }
        }
        for p in parties.iter_mut() {
            if matches!(p.owner.as_deref(), Some(o) if o == first || o == second) {
                p.owner = Some(merged_name.clone());
            }
        }
        let states = self
            .states
            .iter()
            .map(|e| {
                let product = e.product.as_ref().map(|p| {
                    let mut locals = Vec::with_capacity(p.locals.len() - 1);
                    for (k, l) in p.locals.iter().enumerate() {
                        if k == lo {
                            locals.push(p.locals[f].kron(&p.locals[s]));
                        } else if k != f && k != s {
                            locals.push(l.clone());
                        }
                    }
                    ProductState { label: p.label.clone(), locals }
                });
                Ok(StateEntry { label: e.label.clone(), ket: e.ket.merge(f, s)?, product })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parties, states)
    }

    /// Tensors every state with `ket` on the appended `extra` parties.
    pub fn tensor_with(&self, extra: Vec<Party>, ket: &CompositeKet<T>) -> Result<Self> {
        let mut parties = self.parties.clone();
        parties.extend(extra);
        let states = self.states.iter().map(|e| StateEntry { label: e.label.clone(), ket: e.ket.tensor(ket), product: None }).collect();
        Self::new(parties, states)
    }

    /// Subset of the states, in the order given.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let states = labels.iter().map(|l| self.state(l).cloned()).collect::<Result<Vec<_>>>()?;
        Self::new(self.parties.clone(), states)
    }
}

/// Inner product, factorized when both sides carry product provenance.
fn entry_inner<T: Field>(x: &StateEntry<T>, y: &StateEntry<T>) -> T {
    if let (Some(p), Some(q)) = (&x.product, &y.product) {
        let mut acc = T::one();
        for (a, b) in p.locals.iter().zip(&q.locals) {
            let f = a.amplitudes.iter().zip(&b.amplitudes).fold(T::zero(), |s, (u, v)| s + u.clone() * v.clone());
            if f.is_zero() {
                return f;
            }
            acc = acc * f;
        }
        return acc;
    }
    x.ket.inner(&y.ket).expect("kets share the set's dims")
}

fn validate_parties(parties: &[Party]) -> Result<()> {
    let mut names = BTreeSet::new();
    for p in parties {
        if p.dim == 0 {
            return Err(Error::structure(format!("party {} has dimension 0", p.name)));
        }
        if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::structure(format!("invalid party name `{}`", p.name)));
        }
        if !names.insert(p.name.as_str()) {
            return Err(Error::structure(format!("duplicate party {}", p.name)));
        }
    }
    for p in parties {
        if let Some(o) = &p.owner {
            if !names.contains(o.as_str()) {
                return Err(Error::UnknownParty(o.clone()));
            }
        }
    }
    Ok(())
}

/// A partition of the party list, e.g. {A,B}|{C}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionSpec {
    pub groups: Vec<Vec<String>>,
}

impl PartitionSpec {
    pub fn new(groups: Vec<Vec<String>>, parties: &[Party]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for g in &groups {
            if g.is_empty() {
                return Err(Error::structure("empty group in partition"));
            }
            for name in g {
                if !parties.iter().any(|p| &p.name == name) {
                    return Err(Error::UnknownParty(name.clone()));
                }
                if !seen.insert(name.clone()) {
                    return Err(Error::structure(format!("{name} appears twice in partition")));
                }
            }
        }
        if seen.len() != parties.len() {
            return Err(Error::structure("partition does not cover every party"));
        }
        Ok(PartitionSpec { groups })
    }

    pub fn name(&self) -> String {
        self.groups.iter().map(|g| g.concat()).collect::<Vec<_>>().join("|")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::int;
    use crate::Rational;
    use proptest::prelude::*;

    fn lk(dim: usize, terms: &[(usize, i64)]) -> LocalKet<Rational> {
        LocalKet::from_terms(dim, &terms.iter().map(|&(i, c)| (i, int(c))).collect::<Vec<_>>()).unwrap()
    }

    fn abc() -> Vec<Party> {
        vec![Party::new("A", 3), Party::new("B", 3), Party::new("C", 3)]
    }

    #[test]
    fn expand_tensor_product() {
        let p = ProductState::new("x", vec![lk(2, &[(0, 1), (1, 1)]), lk(2, &[(0, 1)])]);
        let k = expand(&p, &[2, 2]).unwrap();
        assert_eq!(k.amplitudes(), &[int(1), int(0), int(1), int(0)]);
        assert!(expand(&p, &[2, 3]).is_err());
        assert!(expand(&p, &[2]).is_err());
    }

    #[test]
    fn expand_twisted_pair() {
        for s in [1, -1] {
            let p = ProductState::new("x", vec![lk(3, &[(1, 1)]), lk(3, &[(0, 1), (2, s)]), lk(3, &[(1, 1)])]);
            let k = expand(&p, &[3, 3, 3]).unwrap();
            assert_eq!(k.amplitudes().iter().filter(|a| **a != int(0)).count(), 2);
        }
    }

    #[test]
    fn zero_local_ket_rejected() {
        assert!(LocalKet::<Rational>::new(vec![int(0), int(0)]).is_err());
        assert!(LocalKet::<Rational>::from_terms(2, &[(2, int(1))]).is_err());
    }

    #[test]
    fn inner_products() {
        let plus = CompositeKet::new(vec![2], vec![int(1), int(1)]).unwrap();
        let minus = CompositeKet::new(vec![2], vec![int(1), int(-1)]).unwrap();
        assert_eq!(plus.inner(&minus).unwrap(), int(0));
        assert_eq!(plus.inner(&plus).unwrap(), int(2));
        let other = CompositeKet::<Rational>::zeros(vec![3]);
        assert!(plus.inner(&other).is_err());
    }

    #[test]
    fn orthogonality_violation_reported() {
        let s = StateSet::from_products(
            abc(),
            vec![
                ProductState::new("x", vec![lk(3, &[(0, 1)]), lk(3, &[(0, 1)]), lk(3, &[(0, 1)])]),
                ProductState::new("y", vec![lk(3, &[(0, 1), (1, 1)]), lk(3, &[(0, 1)]), lk(3, &[(0, 1)])]),
            ],
        )
        .unwrap();
        let r = s.check_orthogonality();
        assert_eq!(r.violations, vec![Violation { left: "x".into(), right: "y".into(), inner: "1".into() }]);
        assert!(s.ensure_orthogonal().is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let st = ProductState::new("x", vec![lk(3, &[(0, 1)]), lk(3, &[(0, 1)]), lk(3, &[(0, 1)])]);
        assert!(StateSet::from_products(abc(), vec![st.clone(), st]).is_err());
    }

    #[test]
    fn flatten_index_formula() {
        let s = StateSet::from_products(
            vec![Party::new("A", 3), Party::new("B", 3)],
            vec![ProductState::new("x", vec![lk(3, &[(2, 1)]), lk(3, &[(1, 1)])])],
        )
        .unwrap();
        let f = s.flatten("A", "B").unwrap();
        assert_eq!(f.parties(), &[Party::new("AB", 9)]);
        let amps = f.states()[0].ket.amplitudes();
        assert_eq!(amps.iter().position(|a| *a != int(0)), Some(7));
    }

    #[test]
    fn flatten_places_merged_party_low() {
        let s = StateSet::from_products(
            abc(),
            vec![ProductState::new("x", vec![lk(3, &[(1, 1)]), lk(3, &[(0, 1), (2, 1)]), lk(3, &[(2, 1)])])],
        )
        .unwrap();
        let f = s.flatten("A", "C").unwrap();
        assert_eq!(f.parties()[0].name, "AC");
        assert_eq!(f.parties()[1].name, "B");
        let p = f.states()[0].product.as_ref().unwrap();
        assert_eq!(format_local(&p.locals[0]), "|5>");
        assert_eq!(format_local(&p.locals[1]), "|0>+|2>");
        assert!(s.flatten("A", "A").is_err());
        assert!(s.flatten("A", "Z").is_err());
    }

    #[test]
    fn partition_spec_checks() {
        let parties = abc();
        let g = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(PartitionSpec::new(vec![g(&["A", "B"]), g(&["C"])], &parties).is_ok());
        assert!(PartitionSpec::new(vec![g(&["A", "B"])], &parties).is_err());
        assert!(PartitionSpec::new(vec![g(&["A", "B"]), g(&["B", "C"])], &parties).is_err());
        assert!(PartitionSpec::new(vec![g(&["A", "B", "C"]), vec![]], &parties).is_err());
    }

    fn ket_strategy(dims: Vec<usize>) -> impl Strategy<Value = CompositeKet<Rational>> {
        let n: usize = dims.iter().product();
        proptest::collection::vec(-2i64..3, n).prop_map(move |v| CompositeKet::new(dims.clone(), v.into_iter().map(int).collect()).unwrap())
    }

    proptest! {
        #[test]
        fn merge_then_split_round_trips(k in ket_strategy(vec![2, 3, 2]), f in 0usize..3, s in 0usize..3) {
            prop_assume!(f != s);
            let m = k.merge(f, s).unwrap();
            prop_assert_eq!(m.split(&[2, 3, 2], f, s).unwrap(), k);
        }

        #[test]
        fn merge_preserves_inner_products(x in ket_strategy(vec![3, 2, 3]), y in ket_strategy(vec![3, 2, 3]), f in 0usize..3, s in 0usize..3) {
            prop_assume!(f != s);
            prop_assert_eq!(x.merge(f, s).unwrap().inner(&y.merge(f, s).unwrap()).unwrap(), x.inner(&y).unwrap());
        }

        #[test]
        fn expand_is_multilinear(a in proptest::collection::vec(-2i64..3, 3), b in proptest::collection::vec(-2i64..3, 2), r in -3i64..4) {
            prop_assume!(a.iter().any(|&x| x != 0) && b.iter().any(|&x| x != 0) && r != 0);
            let la = LocalKet::new(a.iter().map(|&x| int(x)).collect()).unwrap();
            let lb = LocalKet::new(b.iter().map(|&x| int(x)).collect()).unwrap();
            let scaled = LocalKet::new(a.iter().map(|&x| int(x * r)).collect()).unwrap();
            let k = expand(&ProductState::new("p", vec![la, lb.clone()]), &[3, 2]).unwrap();
            let ks = expand(&ProductState::new("p", vec![scaled, lb]), &[3, 2]).unwrap();
            let want: Vec<Rational> = k.amplitudes().iter().map(|x| x * int(r)).collect();
            prop_assert_eq!(ks.amplitudes(), want.as_slice());
        }
    }
}

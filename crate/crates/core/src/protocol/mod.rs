//! Entanglement-assisted discrimination protocols as measurement trees over
//! exact composite states.

mod builtin;
mod dsl;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::arith::Matrix;
use crate::error::{Error, Result};
use crate::hilbert::{strides, CompositeKet, Party, Violation};
use crate::{Ket, Rational, RationalMatrix, States};

pub use builtin::{flip_ancillas, gen_protocol_prop6, gen_protocol_prop7, gen_protocol_prop8, gen_protocol_prop9};
pub use dsl::{parse_protocol, serialize_node, serialize_protocol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ResourceKind {
    /// |00⟩+|11⟩
    Bell,
    /// |000⟩+|111⟩
    Ghz3,
    /// Σᵢ|ii⟩ on d⊗d
    Mes(usize),
}

impl ResourceKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bell" => Ok(ResourceKind::Bell),
            "ghz3" => Ok(ResourceKind::Ghz3),
            _ => match s.strip_prefix("mes").and_then(|d| d.parse::<usize>().ok()) {
                Some(d) if d >= 2 => Ok(ResourceKind::Mes(d)),
                _ => Err(Error::parameter(format!("unknown resource `{s}`"))),
            },
        }
    }

    pub fn keyword(&self) -> String {
        match self {
            ResourceKind::Bell => "bell".into(),
            ResourceKind::Ghz3 => "ghz3".into(),
            ResourceKind::Mes(d) => format!("mes{d}"),
        }
    }

    fn ledger_name(&self) -> String {
        match self {
            ResourceKind::Bell | ResourceKind::Mes(2) => "Bell".into(),
            ResourceKind::Ghz3 => "GHZ3".into(),
            ResourceKind::Mes(d) => format!("MES({d})"),
        }
    }

    fn subsystem_dims(&self) -> Vec<usize> {
        match *self {
            ResourceKind::Bell => vec![2, 2],
            ResourceKind::Ghz3 => vec![2, 2, 2],
            ResourceKind::Mes(d) => vec![d, d],
        }
    }

    pub fn ket(&self) -> Ket {
        let dims = self.subsystem_dims();
        let d = dims[0];
        let st = strides(&dims);
        let mut k = CompositeKet::zeros(dims);
        for i in 0..d {
            let idx: usize = st.iter().map(|s| s * i).sum();
            k.amplitudes_mut()[idx] = Rational::one();
        }
        k
    }
}

/// A resource and, per subsystem in order, (ancilla name, holding party).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ResourceState {
    pub kind: ResourceKind,
    pub placement: Vec<(String, String)>,
}

/// Formal cost a + b·log₂3 ebits plus the consumed resources.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct EntanglementCost {
    pub a: Rational,
    pub b: Rational,
    pub resources: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub a: String,
    pub b: String,
    pub ebits: String,
    pub resources: BTreeMap<String, usize>,
    /// Each GHZ3 copy carries at most 1 ebit across any bipartite cut.
    pub ghz3_max_cut_ebits: usize,
}

/// log₂d as (p, q) with d = 2^p·3^q.
pub fn formal_log2(d: usize) -> Result<(Rational, Rational)> {
    let (mut p, mut q, mut r) = (0i64, 0i64, d);
    if d == 0 {
        return Err(Error::parameter("dimension 0"));
    }
    while r % 2 == 0 {
        r /= 2;
        p += 1;
    }
    while r % 3 == 0 {
        r /= 3;
        q += 1;
    }
    if r != 1 {
        return Err(Error::parameter(format!("log2({d}) is not of the form a + b·log2(3)")));
    }
    Ok((Rational::from_integer(p.into()), Rational::from_integer(q.into())))
}

impl EntanglementCost {
    pub fn add_resource(&mut self, kind: ResourceKind) -> Result<()> {
        match kind {
            ResourceKind::Bell => self.a += Rational::one(),
            ResourceKind::Ghz3 => {}
            ResourceKind::Mes(d) => {
                let (p, q) = formal_log2(d)?;
                self.a += p;
                self.b += q;
            }
        }
        *self.resources.entry(kind.ledger_name()).or_insert(0) += 1;
        Ok(())
    }

    pub fn report(&self) -> CostReport {
        let ghz = self.resources.get("GHZ3").copied().unwrap_or(0);
        CostReport {
            a: self.a.to_string(),
            b: self.b.to_string(),
            ebits: format!("{} + {}*log2(3)", self.a, self.b),
            resources: self.resources.clone(),
            ghz3_max_cut_ebits: ghz,
        }
    }
}

/// Appends the resource's subsystems as ancillas and tensors it onto every state.
pub fn attach_resource(s: &States, r: &ResourceState) -> Result<States> {
    let dims = r.kind.subsystem_dims();
    if r.placement.len() != dims.len() {
        return Err(Error::structure(format!("{} has {} subsystems, {} placed", r.kind.keyword(), dims.len(), r.placement.len())));
    }
    let mut names = BTreeSet::new();
    let mut extra = Vec::new();
    for ((anc, holder), d) in r.placement.iter().zip(dims) {
        if !names.insert(anc.as_str()) || s.party_index(anc).is_ok() {
            return Err(Error::structure(format!("ancilla name {anc} is already in use")));
        }
        s.party_index(holder)?;
        extra.push(Party::ancilla(anc.clone(), d, holder.clone()));
    }
    s.tensor_with(extra, &r.kind.ket())
}

/// Teleports `from` to `to`: the two are merged into one party named
/// `to` followed by `from`, at the cost of one MES of the sent dimension.
pub fn teleport_merge(s: &States, from: &str, to: &str) -> Result<(States, EntanglementCost)> {
    let d = s.parties()[s.party_index(from)?].dim;
    s.party_index(to)?;
    if from == to {
        return Err(Error::structure("teleport needs two distinct parties"));
    }
    let merged = s.flatten(to, from)?;
    let mut cost = EntanglementCost::default();
    cost.add_resource(ResourceKind::Mes(d))?;
    Ok((merged, cost))
}

/// Local operator on one subsystem.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Selector {
    /// Projector onto the span of these basis vectors.
    Basis(Vec<usize>),
    /// Rank-one projector onto the (normalized) ket.
    Ket(Vec<(usize, Rational)>),
    /// Explicit matrix.
    Matrix(RationalMatrix),
}

/// Tensor product of selectors; subsystems not named act as identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub factors: Vec<(String, Selector)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OutcomeOp {
    Sum(Vec<Term>),
    Complement,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub name: String,
    pub op: OutcomeOp,
}

/// Projective measurement by one party on its system and its ancillas.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementSpec {
    pub party: String,
    pub outcomes: Vec<Outcome>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Measure { spec: MeasurementSpec, children: Vec<(String, Node)> },
    Identify(String),
    Walgate(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PrepStep {
    Resource(ResourceState),
    Teleport { from: String, to: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProtocolTree {
    pub name: String,
    pub family: Option<String>,
    pub family_d: Option<usize>,
    pub prep: Vec<PrepStep>,
    pub root: Node,
}

impl ProtocolTree {
    /// Number of outcomes of the measurement reached by following `path`.
    pub fn outcome_count(&self, path: &[&str]) -> Option<usize> {
        let mut node = &self.root;
        for step in path {
            let Node::Measure { children, .. } = node else { return None };
            node = &children.iter().find(|(n, _)| n == step)?.1;
        }
        match node {
            Node::Measure { spec, .. } => Some(spec.outcomes.len()),
            _ => None,
        }
    }
}

/// Applies the preparation steps and returns the prepared set and cost.
pub fn prepare(tree: &ProtocolTree, family: &States) -> Result<(States, EntanglementCost)> {
    apply_prep(family, &tree.prep)
}

pub fn apply_prep(family: &States, steps: &[PrepStep]) -> Result<(States, EntanglementCost)> {
    let mut s = family.clone();
    let mut cost = EntanglementCost::default();
    for step in steps {
        match step {
            PrepStep::Resource(r) => {
                s = attach_resource(&s, r)?;
                cost.add_resource(r.kind)?;
            }
            PrepStep::Teleport { from, to } => {
                let (t, c) = teleport_merge(&s, from, to)?;
                s = t;
                cost.a += c.a;
                cost.b += c.b;
                for (k, v) in c.resources {
                    *cost.resources.entry(k).or_insert(0) += v;
                }
            }
        }
    }
    Ok((s, cost))
}

fn fresh_ancilla(party: &str, taken: &mut BTreeSet<String>) -> String {
    let base = party.to_lowercase();
    let mut name = base.clone();
    let mut k = 2;
    while taken.contains(&name) {
        name = format!("{base}{k}");
        k += 1;
    }
    taken.insert(name.clone());
    name
}

/// Parses and applies a resource spec such as `mes3@BA+bell@AB_C`.
///
/// Items are joined by `+`. `bell@X_Y`, `mesD@X_Y` and `ghz3[@X_Y_Z]`
/// (default `A_B_C`) attach a resource whose ancillas are named after their
/// holders in lower case. `mesD@XY` (no underscore) teleports party `X` to
/// `Y`, which needs `X` to have dimension `D`.
pub fn apply_resource_spec(family: &States, spec: &str) -> Result<(States, EntanglementCost, Vec<PrepStep>)> {
    let bad = |m: String| Error::parameter(format!("resource spec `{spec}`: {m}"));
    let mut s = family.clone();
    let mut cost = EntanglementCost::default();
    let mut steps = Vec::new();
    let mut taken: BTreeSet<String> = s.parties().iter().map(|p| p.name.clone()).collect();
    for item in spec.split('+').map(str::trim).filter(|x| !x.is_empty()) {
        let (kw, at) = match item.split_once('@') {
            Some((k, a)) => (k, Some(a)),
            None => (item, None),
        };
        let kind = ResourceKind::parse(kw).map_err(|_| bad(format!("unknown resource `{kw}`")))?;
        let holders: Vec<String> = match (kind, at) {
            (ResourceKind::Ghz3, None) => vec!["A".into(), "B".into(), "C".into()],
            (_, None) => return Err(bad(format!("`{kw}` needs placement"))),
            (ResourceKind::Mes(d), Some(a)) if !a.contains('_') => {
                let cs: Vec<char> = a.chars().collect();
                if cs.len() != 2 {
                    return Err(bad(format!("teleport `{a}` must name two one-letter parties")));
                }
                let (from, to) = (cs[0].to_string(), cs[1].to_string());
                let to = s.parties().iter().find(|p| p.name.contains(&to) && p.owner.is_none()).map(|p| p.name.clone()).unwrap_or(to);
                let have = s.parties()[s.party_index(&from)?].dim;
                if have != d {
                    return Err(bad(format!("{from} has dimension {have}, not {d}")));
                }
                let step = PrepStep::Teleport { from, to };
                let (t, c) = apply_prep(&s, std::slice::from_ref(&step))?;
                s = t;
                taken = s.parties().iter().map(|p| p.name.clone()).chain(taken).collect();
                cost.a += c.a;
                cost.b += c.b;
                for (k, v) in c.resources {
                    *cost.resources.entry(k).or_insert(0) += v;
                }
                steps.push(step);
                continue;
            }
            (_, Some(a)) => a.split('_').map(str::to_string).collect(),
        };
        if holders.len() != kind.subsystem_dims().len() {
            return Err(bad(format!("`{kw}` needs {} holders", kind.subsystem_dims().len())));
        }
        let placement = holders.iter().map(|h| (fresh_ancilla(h, &mut taken), h.clone())).collect();
        let step = PrepStep::Resource(ResourceState { kind, placement });
        let (t, c) = apply_prep(&s, std::slice::from_ref(&step))?;
        s = t;
        cost.a += c.a;
        cost.b += c.b;
        for (k, v) in c.resources {
            *cost.resources.entry(k).or_insert(0) += v;
        }
        steps.push(step);
    }
    if steps.is_empty() {
        return Err(bad("empty".into()));
    }
    Ok((s, cost, steps))
}

/// Measurement with concrete operators on the acting space.
#[derive(Clone, Debug)]
pub struct ResolvedMeasurement {
    pub party: String,
    pub positions: Vec<usize>,
    pub outcomes: Vec<(String, RationalMatrix)>,
}

fn selector_matrix(sel: &Selector, d: usize, party: &str) -> Result<RationalMatrix> {
    let bad = |reason: String| Error::Completeness { party: party.to_string(), reason };
    match sel {
        Selector::Basis(xs) => {
            if let Some(x) = xs.iter().find(|&&x| x >= d) {
                return Err(bad(format!("basis index {x} out of range for dimension {d}")));
            }
            Ok(Matrix::from_fn(d, d, |r, c| if r == c && xs.contains(&r) { Rational::one() } else { Rational::zero() }))
        }
        Selector::Ket(terms) => {
            let mut v = vec![Rational::zero(); d];
            for (i, c) in terms {
                if *i >= d {
                    return Err(bad(format!("basis index {i} out of range for dimension {d}")));
                }
                v[*i] += c;
            }
            let norm = v.iter().fold(Rational::zero(), |s, x| s + x * x);
            if norm.is_zero() {
                return Err(bad("zero ket in projector".into()));
            }
            Ok(Matrix::from_fn(d, d, |r, c| &v[r] * &v[c] / &norm))
        }
        Selector::Matrix(m) => {
            if m.rows() != d || m.cols() != d {
                return Err(bad(format!("matrix is {}x{}, subsystem has dimension {d}", m.rows(), m.cols())));
            }
            Ok(m.clone())
        }
    }
}

/// Subsystems a party measures: itself, then the ancillas it holds.
pub fn acting_positions(s: &States, party: &str) -> Result<Vec<usize>> {
    let k = s.party_index(party)?;
    if s.parties()[k].owner.is_some() {
        return Err(Error::structure(format!("{party} is an ancilla, not a measuring party")));
    }
    let mut pos = vec![k];
    pos.extend(s.parties().iter().enumerate().filter(|(_, p)| p.owner.as_deref() == Some(party)).map(|(i, _)| i));
    Ok(pos)
}

/// Builds the outcome operators and checks they are projectors summing to I.
pub fn resolve_measurement(s: &States, spec: &MeasurementSpec) -> Result<ResolvedMeasurement> {
    let party = spec.party.clone();
    let bad = |reason: String| Error::Completeness { party: party.clone(), reason };
    let positions = acting_positions(s, &spec.party)?;
    let names: Vec<&str> = positions.iter().map(|&k| s.parties()[k].name.as_str()).collect();
    let dims: Vec<usize> = positions.iter().map(|&k| s.parties()[k].dim).collect();
    let n: usize = dims.iter().product();
    if spec.outcomes.is_empty() {
        return Err(bad("no outcomes".into()));
    }
    let mut seen = BTreeSet::new();
    let mut ops: Vec<(String, Option<RationalMatrix>)> = Vec::new();
    for (idx, o) in spec.outcomes.iter().enumerate() {
        if !seen.insert(o.name.as_str()) {
            return Err(bad(format!("outcome {} declared twice", o.name)));
        }
        match &o.op {
            OutcomeOp::Complement => {
                if idx + 1 != spec.outcomes.len() {
                    return Err(bad("only the last outcome may be `complement`".into()));
                }
                ops.push((o.name.clone(), None));
            }
            OutcomeOp::Sum(terms) => {
                let mut total = Matrix::zeros(n, n);
                for t in terms {
                    let mut local: Vec<Option<RationalMatrix>> = vec![None; names.len()];
                    for (sub, sel) in &t.factors {
                        let Some(i) = names.iter().position(|x| x == sub) else {
                            return Err(bad(format!("{sub} is not {}'s system or ancilla", spec.party)));
                        };
                        if local[i].is_some() {
                            return Err(bad(format!("{sub} appears twice in one term")));
                        }
                        local[i] = Some(selector_matrix(sel, dims[i], &spec.party)?);
                    }
                    let op = local
                        .into_iter()
                        .zip(&dims)
                        .fold(Matrix::identity(1), |acc, (m, &d)| acc.kron(&m.unwrap_or_else(|| Matrix::identity(d))));
                    total = total.add(&op)?;
                }
                ops.push((o.name.clone(), Some(total)));
            }
        }
    }
    let explicit_sum = ops.iter().filter_map(|(_, m)| m.as_ref()).try_fold(Matrix::zeros(n, n), |acc, m| acc.add(m))?;
    let id = Matrix::identity(n);
    let outcomes: Vec<(String, RationalMatrix)> = ops
        .into_iter()
        .map(|(name, m)| match m {
            Some(m) => Ok((name, m)),
            None => Ok((name, id.sub(&explicit_sum)?)),
        })
        .collect::<Result<_>>()?;
    for (name, m) in &outcomes {
        if !m.is_symmetric() || !m.is_projector() {
            return Err(bad(format!("outcome {name} is not a projector")));
        }
    }
    let total = outcomes.iter().try_fold(Matrix::zeros(n, n), |acc, (_, m)| acc.add(m))?;
    if total != id {
        return Err(bad("outcomes do not sum to the identity".into()));
    }
    Ok(ResolvedMeasurement { party: spec.party.clone(), positions, outcomes })
}

/// (E ⊗ I_rest)|ψ⟩ for E on the subsystems at `positions`.
pub fn apply_local(ket: &Ket, positions: &[usize], op: &RationalMatrix) -> Ket {
    let dims = ket.dims().to_vec();
    let st = strides(&dims);
    let acting_dims: Vec<usize> = positions.iter().map(|&k| dims[k]).collect();
    let ast = strides(&acting_dims);
    let mut out = CompositeKet::zeros(dims.clone());
    for (idx, amp) in ket.amplitudes().iter().enumerate() {
        if amp.is_zero() {
            continue;
        }
        let digits: Vec<usize> = positions.iter().map(|&k| (idx / st[k]) % dims[k]).collect();
        let a: usize = digits.iter().zip(&ast).map(|(d, s)| d * s).sum();
        let base = idx - positions.iter().zip(&digits).map(|(&k, d)| d * st[k]).sum::<usize>();
        for a2 in 0..op.rows() {
            let e = op.get(a2, a);
            if e.is_zero() {
                continue;
            }
            let target = base + positions.iter().zip(&ast).zip(&acting_dims).map(|((&k, s), d)| ((a2 / s) % d) * st[k]).sum::<usize>();
            let slot = &mut out.amplitudes_mut()[target];
            *slot = &*slot + e * amp;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub label: String,
    pub ket: Ket,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeBranch {
    pub outcome: String,
    pub candidates: Vec<Candidate>,
}

/// Post-measurement branches; a candidate is dropped from a branch iff its
/// projected ket is exactly zero. Also returns the labels that violate
/// Σ_o ⟨ψ|E_o|ψ⟩ = ⟨ψ|ψ⟩ (always empty for a complete measurement).
pub fn apply_measurement(cands: &[Candidate], m: &ResolvedMeasurement) -> (Vec<OutcomeBranch>, Vec<String>) {
    let mut branches: Vec<OutcomeBranch> =
        m.outcomes.iter().map(|(n, _)| OutcomeBranch { outcome: n.clone(), candidates: vec![] }).collect();
    let mut broken = Vec::new();
    for c in cands {
        let mut total = Rational::zero();
        for ((_, op), b) in m.outcomes.iter().zip(branches.iter_mut()) {
            let k = apply_local(&c.ket, &m.positions, op);
            let p = k.inner(&c.ket).expect("same dims");
            total += &p;
            if !k.is_zero() {
                b.candidates.push(Candidate { label: c.label.clone(), ket: k });
            }
        }
        if total != c.ket.inner(&c.ket).expect("same dims") {
            broken.push(c.label.clone());
        }
    }
    (branches, broken)
}

pub fn check_branch_orthogonality(cands: &[Candidate]) -> (bool, Vec<Violation>) {
    let mut v = Vec::new();
    for (i, x) in cands.iter().enumerate() {
        for y in &cands[i + 1..] {
            let ip = x.ket.inner(&y.ket).expect("same dims");
            if !ip.is_zero() {
                v.push(Violation { left: x.label.clone(), right: y.label.clone(), inner: ip.to_string() });
            }
        }
    }
    (v.is_empty(), v)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeafHit {
    pub path: String,
    pub leaf: String,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StateTrace {
    pub label: String,
    pub leaves: Vec<LeafHit>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchStatus {
    pub path: String,
    pub party: String,
    pub candidates: Vec<String>,
    pub orthogonal: bool,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiscriminationReport {
    pub protocol: String,
    pub success: bool,
    pub states: Vec<StateTrace>,
    pub branches: Vec<BranchStatus>,
    pub walgate_leaves: Vec<String>,
    pub conservation_ok: bool,
    pub failures: Vec<String>,
    pub cost: CostReport,
}

enum Resolved {
    Measure { m: ResolvedMeasurement, children: Vec<Option<Resolved>> },
    Identify(String),
    Walgate(String, String),
}

fn resolve_tree(s: &States, node: &Node) -> Result<Resolved> {
    match node {
        Node::Identify(l) => {
            s.state(l)?;
            Ok(Resolved::Identify(l.clone()))
        }
        Node::Walgate(x, y) => {
            s.state(x)?;
            s.state(y)?;
            Ok(Resolved::Walgate(x.clone(), y.clone()))
        }
        Node::Measure { spec, children } => {
            let m = resolve_measurement(s, spec)?;
            for (name, _) in children {
                if !m.outcomes.iter().any(|(o, _)| o == name) {
                    return Err(Error::Completeness { party: spec.party.clone(), reason: format!("branch for unknown outcome {name}") });
                }
            }
            let kids = m
                .outcomes
                .iter()
                .map(|(o, _)| children.iter().find(|(n, _)| n == o).map(|(_, c)| resolve_tree(s, c)).transpose())
                .collect::<Result<Vec<_>>>()?;
            Ok(Resolved::Measure { m, children: kids })
        }
    }
}

struct Run {
    hits: BTreeMap<String, Vec<LeafHit>>,
    branches: Vec<BranchStatus>,
    walgate: Vec<String>,
    conservation_ok: bool,
    failures: Vec<String>,
}

fn join(path: &str, step: &str) -> String {
    if path.is_empty() {
        step.to_string()
    } else {
        format!("{path}/{step}")
    }
}

fn walk(node: &Resolved, cands: Vec<Candidate>, path: &str, run: &mut Run) {
    match node {
        Resolved::Identify(l) => {
            for c in &cands {
                let ok = &c.label == l;
                if !ok {
                    run.failures.push(format!("{}: {} reaches leaf identify {l}", path, c.label));
                }
                run.hits.entry(c.label.clone()).or_default().push(LeafHit { path: path.to_string(), leaf: format!("identify {l}"), ok });
            }
        }
        Resolved::Walgate(x, y) => {
            let (orth, _) = check_branch_orthogonality(&cands);
            if !cands.is_empty() {
                run.walgate.push(path.to_string());
            }
            for c in &cands {
                let ok = (&c.label == x || &c.label == y) && orth;
                if !ok {
                    run.failures.push(format!("{}: {} reaches leaf walgate {x} {y}", path, c.label));
                }
                run.hits.entry(c.label.clone()).or_default().push(LeafHit { path: path.to_string(), leaf: format!("walgate {x} {y}"), ok });
            }
        }
        Resolved::Measure { m, children } => {
            let (branches, broken) = apply_measurement(&cands, m);
            if !broken.is_empty() {
                run.conservation_ok = false;
                run.failures.push(format!("{path}: probability not conserved for {broken:?}"));
            }
            for (b, child) in branches.into_iter().zip(children) {
                let p = join(path, &b.outcome);
                let (orth, violations) = check_branch_orthogonality(&b.candidates);
                if !orth {
                    let v = &violations[0];
                    run.failures.push(format!("{p}: <{}|{}> = {} after {}'s measurement", v.left, v.right, v.inner, m.party));
                }
                run.branches.push(BranchStatus {
                    path: p.clone(),
                    party: m.party.clone(),
                    candidates: b.candidates.iter().map(|c| c.label.clone()).collect(),
                    orthogonal: orth,
                    violations,
                });
                match child {
                    Some(c) => walk(c, b.candidates, &p, run),
                    None if b.candidates.is_empty() => {}
                    None => {
                        let labels: Vec<&str> = b.candidates.iter().map(|c| c.label.as_str()).collect();
                        run.failures.push(format!("{p}: no leaf for candidates {labels:?}"));
                        for c in &b.candidates {
                            run.hits.entry(c.label.clone()).or_default().push(LeafHit {
                                path: p.clone(),
                                leaf: "unhandled".into(),
                                ok: false,
                            });
                        }
                    }
                }
            }
        }
    }
}

/// Executes the protocol depth-first on every state of `family`.
pub fn run_protocol(tree: &ProtocolTree, family: &States) -> Result<DiscriminationReport> {
    let (s, cost) = prepare(tree, family)?;
    let resolved = resolve_tree(&s, &tree.root)?;
    let cands: Vec<Candidate> = s.states().iter().map(|e| Candidate { label: e.label.clone(), ket: e.ket.clone() }).collect();
    let mut run = Run { hits: BTreeMap::new(), branches: vec![], walgate: vec![], conservation_ok: true, failures: vec![] };
    walk(&resolved, cands, "", &mut run);
    let states: Vec<StateTrace> =
        s.states().iter().map(|e| StateTrace { label: e.label.clone(), leaves: run.hits.remove(&e.label).unwrap_or_default() }).collect();
    for t in &states {
        if t.leaves.is_empty() {
            run.failures.push(format!("{} reaches no leaf", t.label));
        }
    }
    let success = run.failures.is_empty() && states.iter().all(|t| !t.leaves.is_empty() && t.leaves.iter().all(|h| h.ok));
    Ok(DiscriminationReport {
        protocol: tree.name.clone(),
        success,
        states,
        branches: run.branches,
        walgate_leaves: run.walgate,
        conservation_ok: run.conservation_ok,
        failures: run.failures,
        cost: cost.report(),
    })
}

//! Exhaustive search over computational-basis-aligned local measurements.
//!
//! Every move is a two-outcome split `P_S`, `I - P_S` of one player's joint
//! basis (system and ancillas), where `S` is a set of basis indices. A
//! basis-aligned measurement with more outcomes is a run of such splits by
//! the same player, so the class also covers those; a run by one player
//! counts as a single round. Splits must preserve orthogonality of every
//! pair of live candidates, and a branch ends once at most two candidates
//! remain.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::{acting_positions, MeasurementSpec, Node, Outcome, OutcomeOp, Selector, Term};
use crate::{Rational, States};

const MAX_LOCAL: usize = 64;
const MAX_STATES: usize = 128;

/// Which moves are offered by the catalog enumerator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CatalogKind {
    /// Every nonempty proper subset of the joint basis, up to complement.
    Full,
    /// For one qubit ancilla: M = P[T;0] + P[rest;1] over ordered
    /// bipartitions (T, rest) of the system basis, both parts nonempty.
    CorrelatedPartition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MeasurementCatalog {
    pub system_dim: usize,
    pub ancilla_dim: usize,
    pub kind: CatalogKind,
    pub deduplicated: bool,
    /// Each entry is the joint-basis support of M (index = s·d_a + g).
    pub entries: Vec<Vec<usize>>,
    pub raw_count: usize,
    pub closed_form: usize,
}

fn bits(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

fn relabel(mask: u64, da: usize, perm: &[usize]) -> u64 {
    let mut m = 0;
    for x in bits(mask) {
        m |= 1 << ((x / da) * da + perm[x % da]);
    }
    m
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Enumerates a catalog in lexicographic order of the support of M.
pub fn enumerate_catalog(ds: usize, da: usize, kind: CatalogKind, dedup: bool) -> Result<MeasurementCatalog> {
    if ds < 2 || da < 1 || ds * da > 24 {
        return Err(Error::parameter(format!("catalog needs d_s >= 2, d_a >= 1, d_s*d_a <= 24 (got {ds}, {da})")));
    }
    let n = ds * da;
    let full = (1u64 << n) - 1;
    let mut raw: Vec<u64> = match kind {
        CatalogKind::Full => (1..full).filter(|m| m & 1 == 1).collect(),
        CatalogKind::CorrelatedPartition => {
            if da != 2 {
                return Err(Error::parameter("correlated partitions need a qubit ancilla"));
            }
            let sys_full = (1u64 << ds) - 1;
            (1..sys_full)
                .map(|t| {
                    let mut m = 0;
                    for s in 0..ds {
                        m |= 1 << (s * 2 + if t >> s & 1 == 1 { 0 } else { 1 });
                    }
                    m
                })
                .collect()
        }
    };
    let raw_count = raw.len();
    let closed_form = match kind {
        CatalogKind::Full => ((1usize << n) - 2) / 2,
        CatalogKind::CorrelatedPartition if dedup => ((1usize << ds) - 2) / 2,
        CatalogKind::CorrelatedPartition => (1usize << ds) - 2,
    };
    if dedup {
        let perms = permutations(da);
        let canon = |m: u64| {
            perms
                .iter()
                .flat_map(|p| {
                    let r = relabel(m, da, p);
                    [r, full & !r]
                })
                .min()
                .expect("nonempty")
        };
        let mut seen = std::collections::BTreeSet::new();
        raw.retain(|&m| seen.insert(canon(m)));
    }
    let mut entries: Vec<Vec<usize>> = raw.into_iter().map(bits).collect();
    entries.sort();
    Ok(MeasurementCatalog { system_dim: ds, ancilla_dim: da, kind, deduplicated: dedup, entries, raw_count, closed_form })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartyOrder {
    Any,
    /// Players move in this cyclic order.
    Fixed(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Maximum number of rounds; `None` is unbounded (every split shrinks a
    /// support, so the search still terminates).
    pub max_rounds: Option<usize>,
    pub order: PartyOrder,
    pub dedup: bool,
    pub memoize: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_rounds: Some(8), order: PartyOrder::Any, dedup: true, memoize: true }
    }
}

impl SearchConfig {
    pub fn unbounded() -> Self {
        SearchConfig { max_rounds: None, ..Self::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub memo_hits: u64,
    /// Valid splits offered, summed per round depth.
    pub moves_per_level: Vec<u64>,
}

impl SearchStats {
    fn absorb(&mut self, o: &SearchStats) {
        self.nodes += o.nodes;
        self.memo_hits += o.memo_hits;
        if self.moves_per_level.len() < o.moves_per_level.len() {
            self.moves_per_level.resize(o.moves_per_level.len(), 0);
        }
        for (a, b) in self.moves_per_level.iter_mut().zip(&o.moves_per_level) {
            *a += b;
        }
    }
}

/// Why a node cannot be completed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Certificate {
    /// No player has an orthogonality-preserving nontrivial split.
    Stuck {
        path: String,
        candidates: Vec<String>,
        blocking: Vec<Blocking>,
    },
    /// Splits exist but each leaves a failing branch; the first is shown.
    AllFail {
        path: String,
        candidates: Vec<String>,
        moves_tried: usize,
        first: Box<Certificate>,
    },
    DepthLimit {
        path: String,
        candidates: Vec<String>,
    },
}

/// A pair whose overlap on `player`'s basis ties that player's support together.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Blocking {
    pub player: String,
    pub pair: (String, String),
    pub atoms: Vec<usize>,
}

impl Certificate {
    pub fn path(&self) -> &str {
        match self {
            Certificate::Stuck { path, .. } | Certificate::AllFail { path, .. } | Certificate::DepthLimit { path, .. } => path,
        }
    }

    /// The innermost certificate along the first-failure chain.
    pub fn deepest(&self) -> &Certificate {
        match self {
            Certificate::AllFail { first, .. } => first.deepest(),
            c => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SearchOutcome {
    #[serde(serialize_with = "node_text")]
    Found(Node),
    Exhausted(Certificate),
    DepthLimited(Certificate),
}

fn node_text<S: serde::Serializer>(n: &Node, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Found", 1)?;
    st.serialize_field("protocol", &crate::protocol::serialize_node(n))?;
    st.end()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchReport {
    pub header: String,
    pub outcome: SearchOutcome,
    pub stats: SearchStats,
}

impl SearchReport {
    pub fn verdict(&self) -> &'static str {
        match self.outcome {
            SearchOutcome::Found(_) => "found",
            SearchOutcome::Exhausted(_) => "exhausted",
            SearchOutcome::DepthLimited(_) => "depth-limited",
        }
    }

    pub fn summary(&self) -> String {
        match &self.outcome {
            SearchOutcome::Found(_) => "protocol found".into(),
            SearchOutcome::Exhausted(c) | SearchOutcome::DepthLimited(c) => {
                let d = c.deepest();
                let cands = match d {
                    Certificate::Stuck { candidates, .. }
                    | Certificate::AllFail { candidates, .. }
                    | Certificate::DepthLimit { candidates, .. } => candidates.join(","),
                };
                format!("{} at `{}` with candidates {}", self.verdict(), d.path(), cands)
            }
        }
    }
}

pub const CLASS_HEADER: &str = "class: computational-basis-aligned projective measurements on a player's system and ancillas, \
applied as two-outcome splits; consecutive splits by one player form one multi-outcome round; \
branches close at <= 2 orthogonal candidates; a negative verdict means no protocol within this class";

#[derive(Clone, Debug)]
struct Player {
    name: String,
    /// Subsystem names and dims in acting order (system first).
    subs: Vec<(String, usize)>,
    dim: usize,
}

#[derive(Clone, Debug)]
struct Comp {
    idx: Vec<u8>,
    amp: i128,
}

/// Search problem: candidates as integer-scaled kets in player coordinates.
pub struct Engine {
    players: Vec<Player>,
    labels: Vec<String>,
    comps: Vec<Vec<Comp>>,
}

type Key = (u128, Vec<u64>, Option<usize>, Option<usize>);

#[derive(Clone, Debug)]
enum STree {
    Leaf(u128),
    Split { player: usize, subset: u64, yes: Arc<STree>, no: Arc<STree> },
}

#[derive(Clone, Debug)]
enum Res {
    Ok(Arc<STree>),
    Fail { genuine: bool, cert: Arc<Cert> },
}

#[derive(Clone, Debug)]
enum Cert {
    Stuck { alive: u128, blocking: Vec<(usize, usize, usize, Vec<usize>)> },
    AllFail { alive: u128, tried: usize, player: usize, subset: u64, branch_yes: bool, first: Arc<Cert> },
    Depth { alive: u128 },
}

#[derive(Default)]
struct Ctx {
    memo: HashMap<Key, Res>,
    stats: SearchStats,
}

impl Engine {
    /// Builds the problem from a state set; every non-ancilla party is a player.
    pub fn new(set: &States) -> Result<Self> {
        if set.len() > MAX_STATES {
            return Err(Error::parameter(format!("search supports at most {MAX_STATES} states")));
        }
        let mut players = Vec::new();
        let mut pos_of = Vec::new();
        for p in set.parties().iter().filter(|p| p.owner.is_none()) {
            let pos = acting_positions(set, &p.name)?;
            let subs: Vec<(String, usize)> = pos.iter().map(|&k| (set.parties()[k].name.clone(), set.parties()[k].dim)).collect();
            let dim = subs.iter().map(|s| s.1).product();
            if dim > MAX_LOCAL {
                return Err(Error::parameter(format!("player {} has local dimension {dim} > {MAX_LOCAL}", p.name)));
            }
            players.push(Player { name: p.name.clone(), subs, dim });
            pos_of.push(pos);
        }
        let dims = set.dims();
        let st = crate::hilbert::strides(&dims);
        let mut comps = Vec::new();
        for e in set.states() {
            let amps = e.ket.amplitudes();
            let lcm = amps.iter().filter(|a| !a.is_zero()).fold(num_bigint::BigInt::from(1), |l, a| l.lcm(a.denom()));
            let mut cs = Vec::new();
            for (idx, a) in amps.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                let v = (a * Rational::from_integer(lcm.clone())).to_integer();
                let amp = v.to_i128().ok_or_else(|| Error::parameter("amplitude too large for search"))?;
                let local =
                    pos_of.iter().map(|pos| pos.iter().fold(0usize, |acc, &k| acc * dims[k] + (idx / st[k]) % dims[k]) as u8).collect();
                cs.push(Comp { idx: local, amp });
            }
            comps.push(cs);
        }
        Ok(Engine { players, labels: set.labels().iter().map(|s| s.to_string()).collect(), comps })
    }

    pub fn player_names(&self) -> Vec<&str> {
        self.players.iter().map(|p| p.name.as_str()).collect()
    }

    fn player_index(&self, name: &str) -> Result<usize> {
        self.players.iter().position(|p| p.name == name).ok_or_else(|| Error::UnknownParty(name.to_string()))
    }

    fn full_masks(&self) -> Vec<u64> {
        self.players.iter().map(|p| if p.dim == 64 { u64::MAX } else { (1u64 << p.dim) - 1 }).collect()
    }

    fn live(&self, k: usize, masks: &[u64]) -> impl Iterator<Item = &Comp> {
        let masks = masks.to_vec();
        self.comps[k].iter().filter(move |c| c.idx.iter().zip(&masks).all(|(&x, m)| m >> x & 1 == 1))
    }

    /// Drops zero candidates and shrinks masks to the live support.
    fn canonical(&self, alive: u128, masks: &[u64]) -> (u128, Vec<u64>) {
        let mut a = 0u128;
        let mut sup = vec![0u64; masks.len()];
        for k in 0..self.labels.len() {
            if alive >> k & 1 == 0 {
                continue;
            }
            let mut any = false;
            for c in self.live(k, masks) {
                any = true;
                for (s, &x) in sup.iter_mut().zip(&c.idx) {
                    *s |= 1 << x;
                }
            }
            if any {
                a |= 1 << k;
            }
        }
        (a, sup)
    }

    /// Per live pair, the overlap g_ij(x) on player `p`'s basis index x.
    fn overlaps(&self, alive: u128, masks: &[u64], p: usize) -> BTreeMap<(usize, usize), BTreeMap<usize, i128>> {
        let mut by_idx: HashMap<&[u8], Vec<(usize, i128)>> = HashMap::new();
        for k in 0..self.labels.len() {
            if alive >> k & 1 == 1 {
                for c in self.live(k, masks) {
                    by_idx.entry(&c.idx).or_default().push((k, c.amp));
                }
            }
        }
        let mut g: BTreeMap<(usize, usize), BTreeMap<usize, i128>> = BTreeMap::new();
        for (idx, v) in by_idx {
            for (a, (i, ai)) in v.iter().enumerate() {
                for (j, aj) in &v[a + 1..] {
                    let key = if i < j { (*i, *j) } else { (*j, *i) };
                    *g.entry(key).or_default().entry(idx[p] as usize).or_insert(0) += ai * aj;
                }
            }
        }
        for m in g.values_mut() {
            m.retain(|_, v| *v != 0);
        }
        g.retain(|_, m| !m.is_empty());
        g
    }

    /// Orthogonality-preserving splits of player `p`, as subsets containing
    /// the lowest support index, in increasing order. Also returns the pairs
    /// that glued atoms together.
    #[allow(clippy::type_complexity)]
    fn moves(&self, alive: u128, masks: &[u64], p: usize) -> (Vec<u64>, Vec<(usize, usize, Vec<usize>)>) {
        let support = masks[p];
        let atoms = bits(support);
        if atoms.len() < 2 {
            return (vec![], vec![]);
        }
        let g = self.overlaps(alive, masks, p);
        let mut parent: Vec<usize> = (0..64).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let n = p[y];
                p[y] = r;
                y = n;
            }
            r
        }
        let mut glue = Vec::new();
        loop {
            let mut changed = false;
            for ((i, j), m) in &g {
                let mut per_block: BTreeMap<usize, i128> = BTreeMap::new();
                for (&x, &v) in m {
                    *per_block.entry(find(&mut parent, x)).or_insert(0) += v;
                }
                let nz: Vec<usize> = per_block.iter().filter(|(_, v)| **v != 0).map(|(b, _)| *b).collect();
                if nz.len() == 2 {
                    let (a, b) = (find(&mut parent, nz[0]), find(&mut parent, nz[1]));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                        changed = true;
                        glue.push((*i, *j, m.keys().copied().collect()));
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut blocks: BTreeMap<usize, u64> = BTreeMap::new();
        for &x in &atoms {
            *blocks.entry(find(&mut parent, x)).or_insert(0) |= 1 << x;
        }
        let blocks: Vec<u64> = blocks.into_values().collect();
        let k = blocks.len();
        if k < 2 {
            return (vec![], glue);
        }
        if k > 24 {
            // Far beyond any configuration here; refuse rather than hang.
            return (vec![], glue);
        }
        let residual: Vec<Vec<(u64, i128)>> = g
            .values()
            .map(|m| {
                let mut per: Vec<(u64, i128)> = blocks.iter().map(|&b| (b, 0)).collect();
                for (&x, &v) in m {
                    let e = per.iter_mut().find(|(b, _)| b >> x & 1 == 1).expect("atom in a block");
                    e.1 += v;
                }
                per.retain(|(_, v)| *v != 0);
                per
            })
            .filter(|per| !per.is_empty())
            .collect();
        let mut out = Vec::new();
        for sel in 0..(1u64 << (k - 1)) - 1 {
            let mut s = blocks[0];
            for (b, &blk) in blocks[1..].iter().enumerate() {
                if sel >> b & 1 == 1 {
                    s |= blk;
                }
            }
            if residual.iter().all(|per| per.iter().filter(|(b, _)| b & s != 0).map(|(_, v)| v).sum::<i128>() == 0) {
                out.push(s);
            }
        }
        out.sort_by_key(|s| bits(*s));
        (out, glue)
    }

    fn allowed(&self, cfg: &SearchConfig, last: Option<usize>, p: usize, order: &[usize]) -> bool {
        match &cfg.order {
            PartyOrder::Any => true,
            PartyOrder::Fixed(_) => match last {
                None => order.first() == Some(&p),
                Some(l) => {
                    let at = order.iter().position(|&x| x == l).unwrap_or(0);
                    p == l || order[(at + 1) % order.len()] == p
                }
            },
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        ctx: &mut Ctx,
        cfg: &SearchConfig,
        order: &[usize],
        alive: u128,
        masks: Vec<u64>,
        last: Option<usize>,
        left: Option<usize>,
        level: usize,
    ) -> Res {
        if alive.count_ones() <= 2 {
            return Res::Ok(Arc::new(STree::Leaf(alive)));
        }
        let key = (alive, masks.clone(), last, left);
        if cfg.memoize {
            if let Some(r) = ctx.memo.get(&key) {
                ctx.stats.memo_hits += 1;
                return r.clone();
            }
        }
        ctx.stats.nodes += 1;
        let mut tried = 0usize;
        let mut depth_hit = false;
        let mut first_fail: Option<(usize, u64, bool, Arc<Cert>)> = None;
        let mut blocking = Vec::new();
        let mut result = None;
        'players: for p in 0..self.players.len() {
            if !self.allowed(cfg, last, p, order) {
                continue;
            }
            let cost = usize::from(last != Some(p));
            let (moves, glue) = self.moves(alive, &masks, p);
            if moves.is_empty() {
                blocking.extend(glue.into_iter().map(|(i, j, a)| (p, i, j, a)));
                continue;
            }
            let next_left = match left {
                Some(l) if l < cost => {
                    depth_hit = true;
                    continue;
                }
                Some(l) => Some(l - cost),
                None => None,
            };
            let lvl = level + cost;
            if ctx.stats.moves_per_level.len() <= lvl {
                ctx.stats.moves_per_level.resize(lvl + 1, 0);
            }
            ctx.stats.moves_per_level[lvl] += moves.len() as u64;
            for s in moves {
                tried += 1;
                let (r, fail) = self.split(ctx, cfg, order, alive, &masks, p, s, next_left, lvl);
                match fail {
                    None => {
                        result = Some(Res::Ok(r.expect("success carries a tree")));
                        break 'players;
                    }
                    Some((branch_yes, genuine, cert)) => {
                        depth_hit |= !genuine;
                        if first_fail.is_none() {
                            first_fail = Some((p, s, branch_yes, cert));
                        }
                    }
                }
            }
        }
        let res = result.unwrap_or_else(|| {
            let cert = match first_fail {
                Some((player, subset, branch_yes, first)) => Cert::AllFail { alive, tried, player, subset, branch_yes, first },
                None if depth_hit => Cert::Depth { alive },
                None => Cert::Stuck { alive, blocking },
            };
            Res::Fail { genuine: !depth_hit, cert: Arc::new(cert) }
        });
        if cfg.memoize {
            ctx.memo.insert(key, res.clone());
        }
        res
    }

    #[allow(clippy::type_complexity, clippy::too_many_arguments)]
    fn split(
        &self,
        ctx: &mut Ctx,
        cfg: &SearchConfig,
        order: &[usize],
        alive: u128,
        masks: &[u64],
        p: usize,
        s: u64,
        left: Option<usize>,
        level: usize,
    ) -> (Option<Arc<STree>>, Option<(bool, bool, Arc<Cert>)>) {
        let mut trees = Vec::new();
        for (yes, part) in [(true, s), (false, masks[p] & !s)] {
            let mut m = masks.to_vec();
            m[p] = part;
            let (a, m) = self.canonical(alive, &m);
            match self.solve(ctx, cfg, order, a, m, Some(p), left, level) {
                Res::Ok(t) => trees.push(t),
                Res::Fail { genuine, cert } => return (None, Some((yes, genuine, cert))),
            }
        }
        let no = trees.pop().expect("two branches");
        let yes = trees.pop().expect("two branches");
        (Some(Arc::new(STree::Split { player: p, subset: s, yes, no })), None)
    }

    fn labels_of(&self, alive: u128) -> Vec<String> {
        (0..self.labels.len()).filter(|k| alive >> k & 1 == 1).map(|k| self.labels[k].clone()).collect()
    }

    fn describe_subset(&self, p: usize, s: u64) -> String {
        format!("{}{:?}", self.players[p].name, bits(s))
    }

    fn export_cert(&self, c: &Cert, path: &str) -> Certificate {
        match c {
            Cert::Stuck { alive, blocking } => Certificate::Stuck {
                path: path.to_string(),
                candidates: self.labels_of(*alive),
                blocking: blocking
                    .iter()
                    .map(|(p, i, j, a)| Blocking {
                        player: self.players[*p].name.clone(),
                        pair: (self.labels[*i].clone(), self.labels[*j].clone()),
                        atoms: a.clone(),
                    })
                    .collect(),
            },
            Cert::Depth { alive } => Certificate::DepthLimit { path: path.to_string(), candidates: self.labels_of(*alive) },
            Cert::AllFail { alive, tried, player, subset, branch_yes, first } => {
                let step = format!("{}{}", self.describe_subset(*player, *subset), if *branch_yes { "" } else { "^c" });
                let sub = if path.is_empty() { step } else { format!("{path}/{step}") };
                Certificate::AllFail {
                    path: path.to_string(),
                    candidates: self.labels_of(*alive),
                    moves_tried: *tried,
                    first: Box::new(self.export_cert(first, &sub)),
                }
            }
        }
    }

    /// The subset as a sum of terms over the player's subsystems.
    pub fn subset_terms(&self, p: usize, s: u64) -> Vec<Term> {
        let subs = &self.players[p].subs;
        let ds = subs[0].1;
        let da: usize = subs[1..].iter().map(|x| x.1).product();
        let mut by_anc: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for x in bits(s) {
            by_anc.entry(x % da).or_default().push(x / da);
        }
        let first = by_anc.values().next().cloned().unwrap_or_default();
        if da == 1 || (by_anc.len() == da && by_anc.values().all(|v| *v == first)) {
            return vec![Term { factors: vec![(subs[0].0.clone(), Selector::Basis(first))] }];
        }
        let _ = ds;
        by_anc
            .into_iter()
            .map(|(g, sys)| {
                let mut factors = vec![(subs[0].0.clone(), Selector::Basis(sys))];
                let mut rem = g;
                let mut anc = Vec::new();
                for (name, d) in subs[1..].iter().rev() {
                    anc.push((name.clone(), Selector::Basis(vec![rem % d])));
                    rem /= d;
                }
                anc.reverse();
                factors.extend(anc);
                Term { factors }
            })
            .collect()
    }

    fn to_node(&self, t: &STree) -> Node {
        match t {
            STree::Leaf(alive) => {
                let l = self.labels_of(*alive);
                match l.len() {
                    1 => Node::Identify(l[0].clone()),
                    2 => Node::Walgate(l[0].clone(), l[1].clone()),
                    _ => unreachable!("leaves hold one or two candidates"),
                }
            }
            STree::Split { player, subset, yes, no } => Node::Measure {
                spec: MeasurementSpec {
                    party: self.players[*player].name.clone(),
                    outcomes: vec![
                        Outcome { name: "E".into(), op: OutcomeOp::Sum(self.subset_terms(*player, *subset)) },
                        Outcome { name: "Ebar".into(), op: OutcomeOp::Complement },
                    ],
                },
                children: vec![("E".into(), self.to_node(yes)), ("Ebar".into(), self.to_node(no))],
            },
        }
    }

    fn order_indices(&self, cfg: &SearchConfig) -> Result<Vec<usize>> {
        match &cfg.order {
            PartyOrder::Any => Ok((0..self.players.len()).collect()),
            PartyOrder::Fixed(v) => v.iter().map(|n| self.player_index(n)).collect(),
        }
    }

    fn report(&self, res: Res, stats: SearchStats, header: String, path: &str) -> SearchReport {
        let outcome = match res {
            Res::Ok(t) => SearchOutcome::Found(self.to_node(&t)),
            Res::Fail { genuine: true, cert } => SearchOutcome::Exhausted(self.export_cert(&cert, path)),
            Res::Fail { genuine: false, cert } => SearchOutcome::DepthLimited(self.export_cert(&cert, path)),
        };
        SearchReport { header, outcome, stats }
    }

    /// Searches from `alive`/`masks`; root moves are solved in parallel, each
    /// with its own memo table, and the first success in catalog order wins.
    fn run(&self, cfg: &SearchConfig, alive: u128, masks: Vec<u64>, path: &str) -> Result<SearchReport> {
        if cfg.max_rounds == Some(0) {
            return Err(Error::parameter("max depth must be at least 1"));
        }
        let order = self.order_indices(cfg)?;
        let (alive, masks) = self.canonical(alive, &masks);
        let header = format!("{CLASS_HEADER}; players: {}", self.player_names().join(","));
        if alive.count_ones() <= 2 {
            return Ok(self.report(Res::Ok(Arc::new(STree::Leaf(alive))), SearchStats::default(), header, path));
        }
        let mut roots = Vec::new();
        let mut blocking = Vec::new();
        for p in 0..self.players.len() {
            if self.allowed(cfg, None, p, &order) {
                let (mv, glue) = self.moves(alive, &masks, p);
                blocking.extend(glue.into_iter().map(|(i, j, a)| (p, i, j, a)));
                roots.extend(mv.into_iter().map(|s| (p, s)));
            }
        }
        let left = cfg.max_rounds.map(|r| r - 1);
        let results: Vec<_> = roots
            .par_iter()
            .map(|&(p, s)| {
                let mut ctx = Ctx::default();
                let r = self.split(&mut ctx, cfg, &order, alive, &masks, p, s, left, 1);
                (r, ctx.stats)
            })
            .collect();
        let mut stats = SearchStats { nodes: 1, memo_hits: 0, moves_per_level: vec![0, roots.len() as u64] };
        for (_, st) in &results {
            stats.absorb(st);
        }
        let mut depth_hit = false;
        let mut first = None;
        for ((tree, fail), &(p, s)) in results.into_iter().map(|x| x.0).zip(&roots) {
            match fail {
                None => return Ok(self.report(Res::Ok(tree.expect("tree")), stats, header, path)),
                Some((yes, genuine, cert)) => {
                    depth_hit |= !genuine;
                    if first.is_none() {
                        first = Some((p, s, yes, cert));
                    }
                }
            }
        }
        let cert = match first {
            Some((player, subset, branch_yes, f)) => Cert::AllFail { alive, tried: roots.len(), player, subset, branch_yes, first: f },
            None => Cert::Stuck { alive, blocking },
        };
        Ok(self.report(Res::Fail { genuine: !depth_hit, cert: Arc::new(cert) }, stats, header, path))
    }

    fn all_alive(&self) -> u128 {
        if self.labels.len() == 128 {
            u128::MAX
        } else {
            (1u128 << self.labels.len()) - 1
        }
    }

    /// Outcome of a forced first split by `player` onto basis set `keep`.
    fn after(&self, cfg: &SearchConfig, player: usize, keep: u64, path: &str) -> Result<SearchReport> {
        let mut m = self.full_masks();
        m[player] &= keep;
        let cfg = SearchConfig { max_rounds: cfg.max_rounds, ..cfg.clone() };
        self.run(&cfg, self.all_alive(), m, path)
    }
}

/// Depth-first search for a protocol in the restricted class.
pub fn exhaustive_search(set: &States, cfg: &SearchConfig) -> Result<SearchReport> {
    set.ensure_orthogonal()?;
    let e = Engine::new(set)?;
    e.run(cfg, e.all_alive(), e.full_masks(), "")
}

/// Continues after `party` obtained the outcome whose support (in its joint
/// basis) is `keep`.
pub fn continue_search(set: &States, party: &str, keep: &[usize], cfg: &SearchConfig) -> Result<SearchReport> {
    let e = Engine::new(set)?;
    let p = e.player_index(party)?;
    let mask = keep.iter().fold(0u64, |m, &x| m | 1 << x);
    e.after(cfg, p, mask, party)
}

/// Result for one forced first measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstMove {
    pub party: String,
    pub support: Vec<usize>,
    /// Orthogonality preserving on the whole set.
    pub valid: bool,
    /// One report per outcome (M, then I-M); empty when invalid.
    pub branches: Vec<SearchReport>,
}

impl FirstMove {
    pub fn verdict(&self) -> &'static str {
        if !self.valid {
            return "pruned";
        }
        if self.branches.iter().all(|b| matches!(b.outcome, SearchOutcome::Found(_))) {
            "found"
        } else if self.branches.iter().any(|b| matches!(b.outcome, SearchOutcome::Exhausted(_))) {
            "exhausted"
        } else {
            "depth-limited"
        }
    }
}

/// Forces each catalog entry as `party`'s first measurement and searches on.
pub fn search_first_moves(set: &States, party: &str, catalog: &MeasurementCatalog, cfg: &SearchConfig) -> Result<Vec<FirstMove>> {
    set.ensure_orthogonal()?;
    let e = Engine::new(set)?;
    let p = e.player_index(party)?;
    let dim = e.players[p].dim;
    if catalog.system_dim * catalog.ancilla_dim != dim && catalog.system_dim != e.players[p].subs[0].1 {
        return Err(Error::parameter(format!("catalog does not fit {party}'s space")));
    }
    let lift = catalog.system_dim * catalog.ancilla_dim != dim;
    let da_total = dim / e.players[p].subs[0].1;
    let full = e.full_masks()[p];
    let alive = e.all_alive();
    let (_, masks) = e.canonical(alive, &e.full_masks());
    let g = e.overlaps(alive, &masks, p);
    catalog
        .entries
        .par_iter()
        .map(|entry| {
            // An ancilla-free catalog acts as the identity on the ancillas.
            let support: Vec<usize> =
                if lift { entry.iter().flat_map(|&s| (0..da_total).map(move |g| s * da_total + g)).collect() } else { entry.clone() };
            let m = support.iter().fold(0u64, |m, &x| m | 1 << x);
            let trivial = m & masks[p] == 0 || masks[p] & !m == 0;
            let preserving = g.values().all(|per| per.iter().filter(|(x, _)| m >> **x & 1 == 1).map(|(_, v)| v).sum::<i128>() == 0);
            let valid = preserving && !trivial;
            let mut branches = Vec::new();
            if valid {
                let name = |mm: &[usize]| format!("{party}{mm:?}");
                branches.push(e.after(cfg, p, m, &name(&support))?);
                let rest: Vec<usize> = bits(full & !m);
                branches.push(e.after(cfg, p, full & !m, &name(&rest))?);
            }
            Ok(FirstMove { party: party.to_string(), support, valid, branches })
        })
        .collect()
}

/// Searches for `setA` after Bob teleports to Alice and a Bell pair is
/// shared across AB|C.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellInsufficiency {
    pub charlie_catalog: MeasurementCatalog,
    pub charlie_first: Vec<FirstMove>,
    pub ab_catalog: MeasurementCatalog,
    pub ab_first: Vec<FirstMove>,
}

impl BellInsufficiency {
    /// True when no first move by either side leads to a protocol in the class.
    pub fn insufficient(&self) -> bool {
        self.charlie_first.iter().chain(&self.ab_first).all(|f| matches!(f.verdict(), "exhausted" | "pruned"))
    }
}

pub fn bell_insufficiency_report(set_a: &States, cfg: &SearchConfig) -> Result<BellInsufficiency> {
    let (s, _, _) = crate::protocol::apply_resource_spec(set_a, "mes3@BA+bell@AB_C")?;
    let charlie_catalog = enumerate_catalog(3, 2, CatalogKind::CorrelatedPartition, cfg.dedup)?;
    let charlie_first = search_first_moves(&s, "C", &charlie_catalog, cfg)?;
    let ab_catalog = enumerate_catalog(9, 1, CatalogKind::Full, cfg.dedup)?;
    let ab_first = search_first_moves(&s, "AB", &ab_catalog, cfg)?;
    Ok(BellInsufficiency { charlie_catalog, charlie_first, ab_catalog, ab_first })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{LocalKet, Party, ProductState, StateSet};
    use crate::protocol::run_protocol;
    use crate::protocol::ProtocolTree;

    #[test]
    fn catalog_counts() {
        let c = enumerate_catalog(3, 2, CatalogKind::CorrelatedPartition, false).unwrap();
        assert_eq!((c.entries.len(), c.closed_form), (6, 6));
        let c = enumerate_catalog(3, 2, CatalogKind::CorrelatedPartition, true).unwrap();
        assert_eq!((c.entries.len(), c.raw_count, c.closed_form), (3, 6, 3));
        let c = enumerate_catalog(9, 1, CatalogKind::Full, true).unwrap();
        assert_eq!((c.entries.len(), c.closed_form), (255, 255));
        assert_eq!(enumerate_catalog(2, 1, CatalogKind::Full, false).unwrap().entries, vec![vec![0]]);
        assert!(enumerate_catalog(1, 1, CatalogKind::Full, false).is_err());
        assert!(enumerate_catalog(3, 3, CatalogKind::CorrelatedPartition, false).is_err());
    }

    #[test]
    fn full_catalog_closed_form_small() {
        for (ds, da) in [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2)] {
            let c = enumerate_catalog(ds, da, CatalogKind::Full, false).unwrap();
            assert_eq!(c.entries.len(), c.closed_form, "{ds},{da}");
        }
    }

    fn two_states() -> States {
        let l = |i| LocalKet::basis(2, i).unwrap();
        StateSet::from_products(
            vec![Party::new("A", 2), Party::new("B", 2)],
            vec![ProductState::new("x", vec![l(0), l(0)]), ProductState::new("y", vec![l(1), l(1)])],
        )
        .unwrap()
    }

    #[test]
    fn two_states_close_immediately() {
        let r = exhaustive_search(&two_states(), &SearchConfig::default()).unwrap();
        assert_eq!(r.outcome, SearchOutcome::Found(Node::Walgate("x".into(), "y".into())));
    }

    fn replay(set: &States, node: Node) -> bool {
        let t = ProtocolTree { name: "s".into(), family: None, family_d: None, prep: vec![], root: node };
        run_protocol(&t, set).unwrap().success
    }

    #[test]
    fn basis_found_and_replays() {
        let l = |i| LocalKet::basis(2, i).unwrap();
        let s = StateSet::from_products(
            vec![Party::new("A", 2), Party::new("B", 2)],
            (0..4).map(|k| ProductState::new(format!("s{k}"), vec![l(k / 2), l(k % 2)])).collect(),
        )
        .unwrap();
        let r = exhaustive_search(&s, &SearchConfig::default()).unwrap();
        let SearchOutcome::Found(n) = r.outcome else { panic!("{r:?}") };
        assert!(replay(&s, n));
    }

    #[test]
    fn deterministic_reports() {
        let s = crate::families::gen_set_b();
        let a = exhaustive_search(&s, &SearchConfig::default()).unwrap();
        let b = exhaustive_search(&s, &SearchConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.verdict(), "exhausted");
    }

    #[test]
    fn pruned_moves_break_orthogonality() {
        // Pruning soundness: every split rejected by the search makes some
        // pair non-orthogonal under the exact executor.
        let s = crate::families::gen_set_b();
        let e = Engine::new(&s).unwrap();
        let alive = e.all_alive();
        let masks = e.full_masks();
        for p in 0..3 {
            let (valid, _) = e.moves(alive, &masks, p);
            for sub in (1u64..7).filter(|m| m & 1 == 1) {
                let spec = MeasurementSpec {
                    party: e.players[p].name.clone(),
                    outcomes: vec![
                        Outcome { name: "E".into(), op: OutcomeOp::Sum(e.subset_terms(p, sub)) },
                        Outcome { name: "F".into(), op: OutcomeOp::Complement },
                    ],
                };
                let m = crate::protocol::resolve_measurement(&s, &spec).unwrap();
                let c: Vec<_> =
                    s.states().iter().map(|x| crate::protocol::Candidate { label: x.label.clone(), ket: x.ket.clone() }).collect();
                let (br, _) = crate::protocol::apply_measurement(&c, &m);
                let ok = br.iter().all(|b| crate::protocol::check_branch_orthogonality(&b.candidates).0);
                assert_eq!(ok, valid.contains(&sub), "player {p} subset {sub:b}");
            }
        }
    }

    #[test]
    fn set_a_with_one_bell_is_exhausted() {
        let r = bell_insufficiency_report(&crate::families::gen_set_a(), &SearchConfig::default()).unwrap();
        assert_eq!(r.charlie_first.len(), 3);
        assert!(r.charlie_first.iter().all(|f| f.verdict() == "exhausted"));
        assert_eq!(r.ab_first.len(), 255);
        assert!(r.insufficient());
    }

    #[test]
    fn zero_depth_rejected() {
        let cfg = SearchConfig { max_rounds: Some(0), ..SearchConfig::default() };
        assert!(exhaustive_search(&crate::families::gen_set_b(), &cfg).is_err());
    }
}

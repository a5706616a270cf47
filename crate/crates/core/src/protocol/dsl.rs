//! Text form of protocol trees.
//!
//! ```text
//! protocol prop6
//! family setB
//! resource ghz3 a@A b@B c@C
//! teleport B -> A
//!
//! measure B {
//!   M = P[B:{0,2}; b:{0}] + P[B:{1}; b:{1}];
//!   Mbar = complement
//! } then {
//!   M: identify phi_1
//!   Mbar: walgate phi_3 phi_4
//! }
//! ```
//!
//! A factor selector is a basis subset `{0,2}`, a ket `|1>-|2>` (projector
//! onto its span) or a matrix `[1/2 1/2; 1/2 1/2]`. `I` is the identity
//! term. Outcomes without a `then` entry must receive no candidates.

use num_traits::{One, Zero};

use super::{MeasurementSpec, Node, Outcome, OutcomeOp, PrepStep, ProtocolTree, ResourceKind, ResourceState, Selector, Term};
use crate::arith::Matrix;
use crate::error::{Error, Result};
use crate::hilbert::text::format_terms;
use crate::Rational;

#[derive(Clone, Debug, PartialEq)]
enum Tk {
    Word(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Tok {
    t: Tk,
    line: usize,
    col: usize,
}

const SYMS: [&str; 15] = ["->", "{", "}", "[", "]", ";", ":", ",", "=", "+", "-", "|", ">", "/", "@"];

fn word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(text: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let cs: Vec<(usize, char)> = line.char_indices().collect();
        let mut i = 0;
        while i < cs.len() {
            let (at, c) = cs[i];
            let (l, col) = (ln + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
            } else if word_char(c) {
                let start = at;
                while i < cs.len() && word_char(cs[i].1) {
                    i += 1;
                }
                let end = if i < cs.len() { cs[i].0 } else { line.len() };
                out.push(Tok { t: Tk::Word(line[start..end].to_string()), line: l, col });
            } else if let Some(s) = SYMS.iter().find(|s| line[at..].starts_with(**s)) {
                out.push(Tok { t: Tk::Sym(s), line: l, col });
                i += s.len();
            } else {
                return Err(Error::Syntax { line: l, col, msg: format!("unexpected character `{c}`") });
            }
        }
    }
    let line = text.lines().count().max(1);
    out.push(Tok { t: Tk::Eof, line, col: 1 });
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tk {
        &self.toks[self.pos].t
    }

    fn peek_at(&self, k: usize) -> &Tk {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tk {
        let t = self.toks[self.pos].t.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tk::Sym(x) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tk::Word(x) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn word(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tk::Word(w) => {
                self.bump();
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn keyword(&mut self, k: &str) -> Result<()> {
        if self.is_word(k) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{k}`"))
        }
    }

    fn number(&mut self) -> Result<usize> {
        match self.peek().clone() {
            Tk::Word(w) if w.bytes().all(|b| b.is_ascii_digit()) => match w.parse() {
                Ok(n) => {
                    self.bump();
                    Ok(n)
                }
                Err(_) => self.err("number out of range"),
            },
            _ => self.err("expected a number"),
        }
    }

    fn rational(&mut self) -> Result<Rational> {
        let neg = self.eat_sym("-");
        let n = self.number()?;
        let mut q = Rational::from_integer(n.into());
        if self.eat_sym("/") {
            let d = self.number()?;
            if d == 0 {
                return self.err("zero denominator");
            }
            q /= Rational::from_integer(d.into());
        }
        Ok(if neg { -q } else { q })
    }

    fn file(&mut self) -> Result<ProtocolTree> {
        let mut name = None;
        let mut family = None;
        let mut family_d = None;
        let mut prep = Vec::new();
        loop {
            if self.is_word("protocol") {
                self.bump();
                name = Some(self.word("protocol name")?);
            } else if self.is_word("family") {
                self.bump();
                family = Some(self.word("family name")?);
                if self.is_word("d") && matches!(self.peek_at(1), Tk::Sym("=")) {
                    self.bump();
                    self.bump();
                    family_d = Some(self.number()?);
                }
            } else if self.is_word("resource") {
                self.bump();
                let kw = self.word("resource kind")?;
                let kind = ResourceKind::parse(&kw).or_else(|_| self.err(format!("unknown resource `{kw}`")))?;
                let mut placement = Vec::new();
                while matches!(self.peek(), Tk::Word(_)) && matches!(self.peek_at(1), Tk::Sym("@")) {
                    let anc = self.word("ancilla")?;
                    self.bump();
                    placement.push((anc, self.word("holding party")?));
                }
                if placement.is_empty() {
                    return self.err("expected placements like `a@A`");
                }
                prep.push(PrepStep::Resource(ResourceState { kind, placement }));
            } else if self.is_word("teleport") {
                self.bump();
                let from = self.word("party")?;
                self.expect_sym("->")?;
                let to = self.word("party")?;
                prep.push(PrepStep::Teleport { from, to });
            } else {
                break;
            }
        }
        let Some(name) = name else { return self.err("missing `protocol NAME` header") };
        let root = self.node()?;
        if *self.peek() != Tk::Eof {
            return self.err("trailing input after root node");
        }
        Ok(ProtocolTree { name, family, family_d, prep, root })
    }

    fn node(&mut self) -> Result<Node> {
        match self.peek().clone() {
            Tk::Word(w) if w == "identify" => {
                self.bump();
                Ok(Node::Identify(self.word("state label")?))
            }
            Tk::Word(w) if w == "walgate" => {
                self.bump();
                let a = self.word("state label")?;
                Ok(Node::Walgate(a, self.word("state label")?))
            }
            Tk::Word(w) if w == "measure" => {
                self.bump();
                let party = self.word("party")?;
                self.expect_sym("{")?;
                let mut outcomes = Vec::new();
                while !self.is_sym("}") {
                    outcomes.push(self.outcome()?);
                    if !self.eat_sym(";") && !self.is_sym("}") {
                        return self.err("expected `;` or `}`");
                    }
                }
                if outcomes.is_empty() {
                    return self.err("measurement has no outcomes");
                }
                self.expect_sym("}")?;
                let mut children = Vec::new();
                if self.is_word("then") {
                    self.bump();
                    self.expect_sym("{")?;
                    while !self.is_sym("}") {
                        let o = self.word("outcome name")?;
                        self.expect_sym(":")?;
                        children.push((o, self.node()?));
                    }
                    self.expect_sym("}")?;
                }
                Ok(Node::Measure { spec: MeasurementSpec { party, outcomes }, children })
            }
            _ => self.err("expected `measure`, `identify` or `walgate`"),
        }
    }

    fn outcome(&mut self) -> Result<Outcome> {
        let name = self.word("outcome name")?;
        self.expect_sym("=")?;
        if self.is_word("complement") {
            self.bump();
            return Ok(Outcome { name, op: OutcomeOp::Complement });
        }
        let mut terms = vec![self.term()?];
        while self.eat_sym("+") {
            terms.push(self.term()?);
        }
        Ok(Outcome { name, op: OutcomeOp::Sum(terms) })
    }

    fn term(&mut self) -> Result<Term> {
        if self.is_word("I") {
            self.bump();
            return Ok(Term { factors: vec![] });
        }
        self.keyword("P")?;
        self.expect_sym("[")?;
        let mut factors = Vec::new();
        loop {
            let sub = self.word("subsystem")?;
            self.expect_sym(":")?;
            factors.push((sub, self.selector()?));
            if !self.eat_sym(";") {
                break;
            }
        }
        self.expect_sym("]")?;
        Ok(Term { factors })
    }

    fn selector(&mut self) -> Result<Selector> {
        if self.eat_sym("{") {
            let mut xs = Vec::new();
            if !self.is_sym("}") {
                xs.push(self.number()?);
                while self.eat_sym(",") {
                    xs.push(self.number()?);
                }
            }
            self.expect_sym("}")?;
            return Ok(Selector::Basis(xs));
        }
        if self.eat_sym("[") {
            let mut rows: Vec<Vec<Rational>> = vec![vec![]];
            while !self.is_sym("]") {
                if self.eat_sym(";") {
                    rows.push(vec![]);
                } else {
                    let q = self.rational()?;
                    rows.last_mut().expect("nonempty").push(q);
                }
            }
            let cols = rows[0].len();
            if cols == 0 || rows.len() != cols {
                return self.err("matrix selector must be square and nonempty");
            }
            let m = Matrix::from_rows(cols, rows).or_else(|_| self.err("ragged matrix rows"))?;
            self.expect_sym("]")?;
            return Ok(Selector::Matrix(m));
        }
        let mut terms = Vec::new();
        loop {
            let neg = if terms.is_empty() {
                self.eat_sym("-")
            } else if self.eat_sym("-") {
                true
            } else if self.eat_sym("+") {
                false
            } else {
                break;
            };
            if terms.is_empty() && !neg && !self.is_sym("|") && !matches!(self.peek(), Tk::Word(_)) {
                break;
            }
            let coeff = if matches!(self.peek(), Tk::Word(_)) { self.rational()? } else { Rational::one() };
            self.expect_sym("|")?;
            let i = self.number()?;
            self.expect_sym(">")?;
            terms.push((i, if neg { -coeff } else { coeff }));
        }
        if terms.is_empty() {
            return self.err("expected `{...}`, a ket or a matrix");
        }
        Ok(Selector::Ket(terms))
    }
}

pub fn parse_protocol(text: &str) -> Result<ProtocolTree> {
    Parser { toks: lex(text)?, pos: 0 }.file()
}

fn fmt_selector(s: &Selector) -> String {
    match s {
        Selector::Basis(xs) => format!("{{{}}}", xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
        Selector::Ket(t) => format_terms(t.iter().filter(|(_, c)| !c.is_zero()).cloned()),
        Selector::Matrix(m) => {
            let rows: Vec<String> = (0..m.rows()).map(|r| m.row(r).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")).collect();
            format!("[{}]", rows.join("; "))
        }
    }
}

fn fmt_term(t: &Term) -> String {
    if t.factors.is_empty() {
        return "I".into();
    }
    let f: Vec<String> = t.factors.iter().map(|(n, s)| format!("{n}:{}", fmt_selector(s))).collect();
    format!("P[{}]", f.join("; "))
}

fn fmt_node(n: &Node, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match n {
        Node::Identify(l) => out.push_str(&format!("identify {l}\n")),
        Node::Walgate(a, b) => out.push_str(&format!("walgate {a} {b}\n")),
        Node::Measure { spec, children } => {
            out.push_str(&format!("measure {} {{\n", spec.party));
            for (i, o) in spec.outcomes.iter().enumerate() {
                let body = match &o.op {
                    OutcomeOp::Complement => "complement".to_string(),
                    OutcomeOp::Sum(ts) => ts.iter().map(fmt_term).collect::<Vec<_>>().join(" + "),
                };
                let sep = if i + 1 < spec.outcomes.len() { ";" } else { "" };
                out.push_str(&format!("{pad}  {} = {body}{sep}\n", o.name));
            }
            if children.is_empty() {
                out.push_str(&format!("{pad}}}\n"));
                return;
            }
            out.push_str(&format!("{pad}}} then {{\n"));
            for (o, c) in children {
                out.push_str(&format!("{pad}  {o}: "));
                fmt_node(c, depth + 1, out);
            }
            out.push_str(&format!("{pad}}}\n"));
        }
    }
}

/// Canonical text of a subtree.
pub fn serialize_node(n: &Node) -> String {
    let mut out = String::new();
    fmt_node(n, 0, &mut out);
    out
}

/// Canonical text; `parse_protocol(serialize_protocol(t)) == t`.
pub fn serialize_protocol(t: &ProtocolTree) -> String {
    let mut out = format!("protocol {}\n", t.name);
    if let Some(f) = &t.family {
        out.push_str(&format!("family {f}"));
        if let Some(d) = t.family_d {
            out.push_str(&format!(" d={d}"));
        }
        out.push('\n');
    }
    for p in &t.prep {
        match p {
            PrepStep::Resource(r) => {
                let pl: Vec<String> = r.placement.iter().map(|(a, h)| format!("{a}@{h}")).collect();
                out.push_str(&format!("resource {} {}\n", r.kind.keyword(), pl.join(" ")));
            }
            PrepStep::Teleport { from, to } => out.push_str(&format!("teleport {from} -> {to}\n")),
        }
    }
    out.push('\n');
    fmt_node(&t.root, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{frac, int};

    const STEP1: &str = "protocol p\nmeasure B { M = P[B:{0,2}; b:{0}] + P[B:{1}; b:{1}]; Mbar = complement }";

    #[test]
    fn step_one_parses() {
        let t = parse_protocol(STEP1).unwrap();
        let Node::Measure { spec, children } = &t.root else { panic!() };
        assert!(children.is_empty());
        assert_eq!(spec.party, "B");
        assert_eq!(spec.outcomes[1].op, OutcomeOp::Complement);
        let OutcomeOp::Sum(ts) = &spec.outcomes[0].op else { panic!() };
        assert_eq!(ts[0].factors, vec![("B".to_string(), Selector::Basis(vec![0, 2])), ("b".to_string(), Selector::Basis(vec![0]))]);
        assert_eq!(ts[1].factors[1], ("b".to_string(), Selector::Basis(vec![1])));
    }

    #[test]
    fn round_trip() {
        let text = "protocol x\nfamily prop3 d=5\nresource ghz3 a@A b@B c@C\nteleport B -> A\n\
            measure AB { N = P[AB:|3>-|5>; ab:{1}] + P[AB:[1/2 -1/2; -1/2 1/2]] + I; R = complement }\
            then { N: walgate phi_1 phi_2 R: measure C { S = P[C:2|0>+1/3|1>] } then { S: identify phi_3 } }";
        let t = parse_protocol(text).unwrap();
        assert_eq!(t.family_d, Some(5));
        let s = serialize_protocol(&t);
        let t2 = parse_protocol(&s).unwrap();
        assert_eq!(t, t2);
        assert_eq!(serialize_protocol(&t2), s);
        let Node::Measure { spec, .. } = &t.root else { panic!() };
        let OutcomeOp::Sum(ts) = &spec.outcomes[0].op else { panic!() };
        assert_eq!(ts.len(), 3);
        assert_eq!(ts[0].factors[0].1, Selector::Ket(vec![(3, int(1)), (5, int(-1))]));
        let Selector::Matrix(m) = &ts[1].factors[0].1 else { panic!() };
        assert_eq!(*m.get(0, 1), frac(-1, 2).unwrap());
        assert!(ts[2].factors.is_empty());
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_protocol("protocol p\nmeasure B { }") {
            Err(Error::Syntax { line, col, msg }) => {
                assert_eq!((line, col), (2, 13));
                assert!(msg.contains("no outcomes"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_protocol("protocol p\nmeasure B { M = P[B:{0}] ; } $"), Err(Error::Syntax { line: 2, .. })));
        assert!(parse_protocol("measure B { M = complement }").is_err());
        assert!(parse_protocol("protocol p\nresource bell\nidentify x").is_err());
        assert!(parse_protocol("protocol p\nmeasure B { M = P[B:[1 0; 0]] }").is_err());
        assert!(parse_protocol("protocol p\nidentify x y").is_err());
    }

    #[test]
    fn comments_are_ignored() {
        let t = parse_protocol("# c\nprotocol p # x\nidentify phi_1 # y\n").unwrap();
        assert_eq!(t.root, Node::Identify("phi_1".into()));
    }
}

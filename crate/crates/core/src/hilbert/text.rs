//! Line format for product-state sets.
//!
//! ```text
//! # comment
//! parties: A=3 B=3 C=3
//! phi_7 : |1> ; |0>+|2> ; |1>
//! ```
//!
//! A factor is a signed combination of basis kets, `|i>`, with optional
//! rational coefficients (`2|0>-1/2|3>`). An ancilla is declared as `a=2@A`.

use num_traits::{One, Signed, Zero};

use super::{LocalKet, Party, ProductState, StateSet};
use crate::error::{Error, Result};
use crate::Rational;

pub fn format_local(k: &LocalKet<Rational>) -> String {
    format_terms(k.amplitudes().iter().enumerate().filter(|(_, a)| !a.is_zero()).map(|(i, a)| (i, a.clone())))
}

pub(crate) fn format_terms(terms: impl IntoIterator<Item = (usize, Rational)>) -> String {
    let mut out = String::new();
    for (n, (i, a)) in terms.into_iter().enumerate() {
        let mag = a.abs();
        if a.is_negative() {
            out.push('-');
        } else if n > 0 {
            out.push('+');
        }
        if !mag.is_one() {
            out.push_str(&mag.to_string());
        }
        out.push_str(&format!("|{i}>"));
    }
    out
}

pub fn write_state_set(s: &StateSet<Rational>) -> Result<String> {
    let mut out = String::from("parties:");
    for p in s.parties() {
        out.push_str(&format!(" {}={}", p.name, p.dim));
        if let Some(o) = &p.owner {
            out.push_str(&format!("@{o}"));
        }
    }
    out.push('\n');
    for e in s.states() {
        let p = e.product.as_ref().ok_or_else(|| Error::structure(format!("{} is not stored as a product state", e.label)))?;
        let factors: Vec<String> = p.locals.iter().map(format_local).collect();
        out.push_str(&format!("{} : {}\n", e.label, factors.join(" ; ")));
    }
    Ok(out)
}

pub fn parse_state_set(text: &str) -> Result<StateSet<Rational>> {
    let mut parties: Option<Vec<Party>> = None;
    let mut products = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.trim_start().strip_prefix("parties:") {
            if parties.is_some() {
                return Err(syntax(line_no, 1, "second `parties:` line"));
            }
            let offset = raw.len() - raw.trim_start().len() + "parties:".len();
            parties = Some(parse_parties(rest, line_no, offset)?);
            continue;
        }
        let Some(ps) = &parties else {
            return Err(syntax(line_no, 1, "state before `parties:` header"));
        };
        let Some(colon) = line.find(':') else {
            return Err(syntax(line_no, 1, "expected `label : factor ; ...`"));
        };
        let label = line[..colon].trim();
        if label.is_empty() || label.contains(char::is_whitespace) {
            return Err(syntax(line_no, 1, "invalid label"));
        }
        let mut locals = Vec::new();
        let mut col = colon + 1;
        let body = &line[colon + 1..];
        let pieces: Vec<&str> = body.split(';').collect();
        if pieces.len() != ps.len() {
            return Err(syntax(line_no, colon + 2, &format!("{} factors for {} parties", pieces.len(), ps.len())));
        }
        for (piece, party) in pieces.iter().zip(ps) {
            let terms = parse_ket_terms(piece).map_err(|(c, m)| syntax(line_no, col + c + 1, &m))?;
            let local = LocalKet::from_terms(party.dim, &terms).map_err(|e| syntax(line_no, col + 1, &e.to_string()))?;
            locals.push(local);
            col += piece.len() + 1;
        }
        products.push(ProductState::new(label, locals));
    }
    let parties = parties.ok_or_else(|| syntax(1, 1, "missing `parties:` header"))?;
    StateSet::from_products(parties, products)
}

fn parse_parties(rest: &str, line: usize, offset: usize) -> Result<Vec<Party>> {
    let mut out = Vec::new();
    let mut col = offset;
    for tok in rest.split(' ') {
        col += 1;
        if tok.is_empty() {
            continue;
        }
        let err = || syntax(line, col, &format!("expected `Name=dim` or `name=dim@Owner`, found `{tok}`"));
        let (name, spec) = tok.split_once('=').ok_or_else(err)?;
        let (dim, owner) = match spec.split_once('@') {
            Some((d, o)) => (d, Some(o.to_string())),
            None => (spec, None),
        };
        let dim: usize = dim.parse().map_err(|_| err())?;
        out.push(Party { name: name.to_string(), dim, owner });
        col += tok.len();
    }
    Ok(out)
}

fn syntax(line: usize, col: usize, msg: &str) -> Error {
    Error::Syntax { line, col, msg: msg.to_string() }
}

/// Parses `2|0>-|1>+1/2|3>`. Errors carry a 0-based byte offset.
pub(crate) fn parse_ket_terms(s: &str) -> std::result::Result<Vec<(usize, Rational)>, (usize, String)> {
    let b = s.as_bytes();
    let mut i = 0;
    let skip_ws = |i: &mut usize| {
        while *i < b.len() && b[*i].is_ascii_whitespace() {
            *i += 1;
        }
    };
    let mut terms = Vec::new();
    loop {
        skip_ws(&mut i);
        if i == b.len() {
            break;
        }
        let mut sign = Rational::one();
        if b[i] == b'+' || b[i] == b'-' {
            if b[i] == b'-' {
                sign = -sign;
            }
            i += 1;
            skip_ws(&mut i);
        } else if !terms.is_empty() {
            return Err((i, "expected `+` or `-` between terms".into()));
        }
        let coeff = if i < b.len() && b[i].is_ascii_digit() {
            let (q, next) = parse_rational(s, i)?;
            i = next;
            skip_ws(&mut i);
            q
        } else {
            Rational::one()
        };
        if i >= b.len() || b[i] != b'|' {
            return Err((i, "expected `|`".into()));
        }
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if start == i {
            return Err((i, "expected basis index".into()));
        }
        let idx: usize = s[start..i].parse().map_err(|_| (start, "index out of range".to_string()))?;
        if i >= b.len() || b[i] != b'>' {
            return Err((i, "expected `>`".into()));
        }
        i += 1;
        terms.push((idx, sign * coeff));
    }
    if terms.is_empty() {
        return Err((0, "empty ket".into()));
    }
    Ok(terms)
}

/// Parses `n` or `n/d` starting at byte `i`; returns the value and the next offset.
pub(crate) fn parse_rational(s: &str, mut i: usize) -> std::result::Result<(Rational, usize), (usize, String)> {
    let b = s.as_bytes();
    let start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let num: num_bigint::BigInt = s[start..i].parse().map_err(|_| (start, "expected integer".to_string()))?;
    if i < b.len() && b[i] == b'/' {
        let ds = i + 1;
        let mut j = ds;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        let den: num_bigint::BigInt = s[ds..j].parse().map_err(|_| (ds, "expected denominator".to_string()))?;
        if den.is_zero() {
            return Err((ds, "zero denominator".into()));
        }
        return Ok((Rational::new(num, den), j));
    }
    Ok((Rational::from_integer(num), i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{frac, int};

    const SAMPLE: &str = "parties: A=3 B=3 C=3\nphi_7 : |1> ; |0>+|2> ; |1>\nphi_8 : |1> ; |0>-|2> ; |1>\n";

    #[test]
    fn round_trip_is_byte_stable() {
        let s = parse_state_set(SAMPLE).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(write_state_set(&s).unwrap(), SAMPLE);
    }

    #[test]
    fn comments_and_spacing() {
        let s = parse_state_set("# hi\nparties: A=2 b=2@A\n\n x :  - |0> + 2 |1>;|1> # trailing\n").unwrap();
        assert_eq!(s.parties()[1].owner.as_deref(), Some("A"));
        assert_eq!(write_state_set(&s).unwrap(), "parties: A=2 b=2@A\nx : -|0>+2|1> ; |1>\n");
    }

    #[test]
    fn rational_coefficients() {
        let t = parse_ket_terms("1/2|0>-3/4|2>").unwrap();
        assert_eq!(t, vec![(0, frac(1, 2).unwrap()), (2, frac(-3, 4).unwrap())]);
        assert_eq!(format_terms(t), "1/2|0>-3/4|2>");
        assert_eq!(format_terms(vec![(1, int(-1)), (4, int(2))]), "-|1>+2|4>");
    }

    #[test]
    fn errors_carry_positions() {
        match parse_state_set("parties: A=3\nx : |0>|1>\n") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 8)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_state_set("x : |0>\n"), Err(Error::Syntax { line: 1, .. })));
        assert!(matches!(parse_state_set("parties: A=3\nx : |0> ; |1>\n"), Err(Error::Syntax { line: 2, .. })));
        assert!(parse_state_set("parties: A=3\nx : |3>\n").is_err());
        assert!(parse_state_set("parties: A=3\nx : |0>-|0>\n").is_err());
        assert!(parse_ket_terms("|0>+1/0|1>").is_err());
    }
}

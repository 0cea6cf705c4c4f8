//! Exact integer polynomials: the Diophantine equation `D(x1, ..., xK) = 0`.
//!
//! Concrete syntax: variables `x1`..`xK`, integer literals, `+ - * ^` and
//! parentheses. Exponents are non-negative integer literals; implicit
//! multiplication (`2x1`) is rejected.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};

use crate::error::{Error, ParseError, ParseErrorKind, Result};

/// Largest exponent literal accepted by the parser.
pub const MAX_EXPONENT: u32 = 256;

/// Exponent vector of a monomial, ordered graded-lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(arity: usize) -> Self {
        Monomial(vec![0; arity])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multivariate polynomial with arbitrary-precision integer coefficients.
///
/// No stored coefficient is zero and every exponent vector has length `arity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    arity: usize,
    terms: BTreeMap<Monomial, BigInt>,
}

impl Polynomial {
    pub fn zero(arity: usize) -> Self {
        Polynomial {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, value: impl Into<BigInt>) -> Self {
        let mut p = Polynomial::zero(arity);
        p.add_term(Monomial::one(arity), value.into());
        p
    }

    /// The variable `x{index + 1}`.
    pub fn variable(arity: usize, index: usize) -> Result<Self> {
        if index >= arity {
            return Err(Error::ModeOutOfRange {
                mode: index,
                modes: arity,
            });
        }
        let mut exps = vec![0; arity];
        exps[index] = 1;
        let mut p = Polynomial::zero(arity);
        p.add_term(Monomial(exps), BigInt::one());
        Ok(p)
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, merging duplicates.
    pub fn from_terms<I, C>(arity: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, C)>,
        C: Into<BigInt>,
    {
        let mut p = Polynomial::zero(arity);
        for (exps, c) in terms {
            if exps.len() != arity {
                return Err(Error::ArityMismatch {
                    expected: arity,
                    got: exps.len(),
                });
            }
            p.add_term(Monomial(exps), c.into());
        }
        Ok(p)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, exponents: &[u32]) -> BigInt {
        self.terms
            .get(&Monomial(exponents.to_vec()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.degree() == 0)
    }

    pub fn degree(&self) -> u64 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    fn add_term(&mut self, mono: Monomial, coeff: BigInt) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Re-embeds the polynomial with extra trailing (unused) variables.
    pub fn with_arity(&self, arity: usize) -> Result<Self> {
        if arity < self.arity {
            let used = self
                .terms
                .keys()
                .flat_map(|m| m.0.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i + 1))
                .max()
                .unwrap_or(0);
            if used > arity {
                return Err(Error::ArityMismatch {
                    expected: arity,
                    got: used,
                });
            }
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut e = m.0.clone();
                e.resize(arity, 0);
                (Monomial(e), c.clone())
            })
            .collect();
        Ok(Polynomial { arity, terms })
    }

    pub fn neg(&self) -> Self {
        Polynomial {
            arity: self.arity,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.arity, other.arity);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.arity, other.arity);
        let mut out = Polynomial::zero(self.arity);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, mut exp: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Polynomial::constant(self.arity, 1);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact value of the polynomial at a point of non-negative integers.
    pub fn evaluate(&self, point: &[u64]) -> Result<BigInt> {
        if point.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                got: point.len(),
            });
        }
        let xs: Vec<BigInt> = point.iter().map(|&x| BigInt::from(x)).collect();
        let mut total = BigInt::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (x, &e) in xs.iter().zip(&m.0) {
                if e > 0 {
                    term *= Pow::pow(x, e);
                }
            }
            total += term;
        }
        Ok(total)
    }

    /// Lexicographically smallest zero in `[0, bound]^K`, if any.
    pub fn search_box(&self, bound: u64) -> Result<Option<Vec<u64>>> {
        let mut found = None;
        for_each_in_box(self.arity, bound, |point| {
            if self.evaluate(point)?.is_zero() {
                found = Some(point.to_vec());
                return Ok(false);
            }
            Ok(true)
        })?;
        Ok(found)
    }
}

/// Visits `[0, bound]^arity` in lexicographic order (last coordinate fastest)
/// until `visit` returns `Ok(false)`.
pub fn for_each_in_box<F>(arity: usize, bound: u64, mut visit: F) -> Result<()>
where
    F: FnMut(&[u64]) -> Result<bool>,
{
    let mut point = vec![0u64; arity];
    loop {
        if !visit(&point)? {
            return Ok(());
        }
        let mut i = arity;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if point[i] < bound {
                point[i] += 1;
                break;
            }
            point[i] = 0;
        }
    }
}

impl fmt::Display for Polynomial {
    /// Canonical form: terms in descending graded-lex order, e.g.
    /// `x1^2 - 2*x2^2 + 2*x1 - 4*x2 - 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let mag = c.abs();
            match (k, c.is_negative()) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let factors: Vec<String> = m
                .0
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        format!("x{}", i + 1)
                    } else {
                        format!("x{}^{}", i + 1, e)
                    }
                })
                .collect();
            if factors.is_empty() {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}*")?;
                }
                write!(f, "{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, ParseError> {
        parse(s)
    }
}

/// Parses `source`; arity is the highest variable index mentioned.
pub fn parse(source: &str) -> std::result::Result<Polynomial, ParseError> {
    parse_with_arity(source, None)
}

/// Parses `source` with an explicit arity (to account for unused trailing
/// variables). The arity must cover every variable mentioned.
pub fn parse_with_arity(
    source: &str,
    arity: Option<usize>,
) -> std::result::Result<Polynomial, ParseError> {
    let tokens = tokenize(source)?;
    let max_var = tokens
        .iter()
        .filter_map(|t| match t.kind {
            Tok::Var(i) => Some((i, t.pos)),
            _ => None,
        })
        .max_by_key(|&(i, _)| i);
    let arity = match (arity, max_var) {
        (Some(k), Some((i, pos))) if i > k => {
            return Err(ParseError {
                source_text: source.to_string(),
                position: pos,
                expected: format!("variable index at most {k}"),
                kind: ParseErrorKind::Syntax,
            })
        }
        (Some(k), _) => k,
        (None, Some((i, _))) => i,
        (None, None) => 0,
    };
    let mut parser = Parser {
        source,
        tokens,
        at: 0,
        arity,
    };
    let poly = parser.expr()?;
    let next = parser.peek();
    if next.kind != Tok::End {
        return Err(parser.error(next.pos, "operator or end of input", ParseErrorKind::Syntax));
    }
    Ok(poly)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Var(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    pos: usize,
}

fn tokenize(source: &str) -> std::result::Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let err = |pos: usize, expected: &str| ParseError {
        source_text: source.to_string(),
        position: pos,
        expected: expected.to_string(),
        kind: ParseErrorKind::Syntax,
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push(Token {
                    kind: Tok::Int(source[start..i].parse().expect("ascii digits")),
                    pos: start,
                });
                continue;
            }
            b'x' => {
                i += 1;
                let digits = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let index = source[digits..i]
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| err(start, "variable of the form x1, x2, ..."))?;
                out.push(Token {
                    kind: Tok::Var(index),
                    pos: start,
                });
                continue;
            }
            _ => return Err(err(start, "variable, integer, operator or parenthesis")),
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    out.push(Token {
        kind: Tok::End,
        pos: source.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    at: usize,
    arity: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Token {
        self.tokens[self.at].clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.peek();
        if t.kind != Tok::End {
            self.at += 1;
        }
        t
    }

    fn error(&self, pos: usize, expected: &str, kind: ParseErrorKind) -> ParseError {
        ParseError {
            source_text: self.source.to_string(),
            position: pos,
            expected: expected.to_string(),
            kind,
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> std::result::Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek().kind {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    // term := unary ('*' unary)*
    fn term(&mut self) -> std::result::Result<Polynomial, ParseError> {
        let mut acc = self.unary()?;
        while self.peek().kind == Tok::Star {
            self.bump();
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    // unary := ('+' | '-') unary | power
    fn unary(&mut self) -> std::result::Result<Polynomial, ParseError> {
        match self.peek().kind {
            Tok::Minus => {
                self.bump();
                Ok(self.unary()?.neg())
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    // power := atom ('^' integer)?
    fn power(&mut self) -> std::result::Result<Polynomial, ParseError> {
        let base = self.atom()?;
        if self.peek().kind != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let t = self.bump();
        match t.kind {
            Tok::Int(n) => {
                let e = u32::try_from(&n)
                    .ok()
                    .filter(|&e| e <= MAX_EXPONENT)
                    .ok_or_else(|| {
                        self.error(
                            t.pos,
                            &format!("exponent at most {MAX_EXPONENT}"),
                            ParseErrorKind::Overflow,
                        )
                    })?;
                Ok(base.pow(e))
            }
            Tok::End => Err(self.error(t.pos, "exponent", ParseErrorKind::Syntax)),
            _ => Err(self.error(
                t.pos,
                "non-negative integer literal exponent",
                ParseErrorKind::BadExponent,
            )),
        }
    }

    // atom := integer | variable | '(' expr ')'
    fn atom(&mut self) -> std::result::Result<Polynomial, ParseError> {
        let t = self.bump();
        match t.kind {
            Tok::Int(n) => Ok(Polynomial::constant(self.arity, n)),
            Tok::Var(i) => Ok(Polynomial::variable(self.arity, i - 1).expect("arity covers variables")),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.bump();
                if close.kind != Tok::RParen {
                    return Err(self.error(close.pos, "')'", ParseErrorKind::Syntax));
                }
                Ok(inner)
            }
            _ => Err(self.error(
                t.pos,
                "variable, integer or '('",
                ParseErrorKind::Syntax,
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn parses_linear() {
        let p = parse("x1 - 3").unwrap();
        assert_eq!(p.arity(), 1);
        assert_eq!(p.term_count(), 2);
        assert_eq!(p.coefficient(&[1]), big(1));
        assert_eq!(p.coefficient(&[0]), big(-3));
    }

    #[test]
    fn expands_pell_form() {
        // (x1+1)^2 - 2(x2+1)^2 = x1^2 + 2x1 + 1 - 2x2^2 - 4x2 - 2
        let p = parse("(x1+1)^2 - 2*(x2+1)^2").unwrap();
        let expected = Polynomial::from_terms(
            2,
            vec![
                (vec![2, 0], 1),
                (vec![1, 0], 2),
                (vec![0, 2], -2),
                (vec![0, 1], -4),
                (vec![0, 0], -1),
            ],
        )
        .unwrap();
        assert_eq!(p, expected);
        assert_eq!(p.to_string(), "x1^2 - 2*x2^2 + 2*x1 - 4*x2 - 1");
    }

    #[test]
    fn trailing_operator_is_error_at_end() {
        let e = parse("x1 + ").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!(e.position, "x1 + ".len());
        assert!(e.to_string().contains("end of input"));
    }

    #[test]
    fn rejects_implicit_multiplication() {
        let e = parse("2x1").unwrap_err();
        assert_eq!(e.position, 1);
        let e = parse("(x1)(x2)").unwrap_err();
        assert_eq!(e.position, 4);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert_eq!(parse("x1^-1").unwrap_err().kind, ParseErrorKind::BadExponent);
        assert_eq!(parse("x1^x2").unwrap_err().kind, ParseErrorKind::BadExponent);
        assert_eq!(parse("x1^99999999999").unwrap_err().kind, ParseErrorKind::Overflow);
        assert!(parse("x1^2^3").is_err());
    }

    #[test]
    fn rejects_bad_variables() {
        assert_eq!(parse("x0 + 1").unwrap_err().position, 0);
        assert_eq!(parse("y1").unwrap_err().position, 0);
        assert_eq!(parse("1 + x").unwrap_err().position, 4);
    }

    #[test]
    fn arity_override() {
        let p = parse_with_arity("x1 - 1", Some(3)).unwrap();
        assert_eq!(p.arity(), 3);
        assert_eq!(p.coefficient(&[1, 0, 0]), big(1));
        let e = parse_with_arity("x1 + x4", Some(3)).unwrap_err();
        assert_eq!(e.position, 5);
    }

    #[test]
    fn cancellation_leaves_no_zero_terms() {
        let p = parse("x1*x2 - x2*x1 + 0*x3").unwrap();
        assert!(p.is_zero());
        assert_eq!(p.to_string(), "0");
        assert_eq!(p.arity(), 3);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let p = parse("-x1^2").unwrap();
        assert_eq!(p.coefficient(&[2]), big(-1));
        let p = parse("(-x1)^2").unwrap();
        assert_eq!(p.coefficient(&[2]), big(1));
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(parse("x1 - 3").unwrap().evaluate(&[3]).unwrap(), big(0));
        let pell = parse("(x1+1)^2 - 2*(x2+1)^2").unwrap();
        assert_eq!(pell.evaluate(&[0, 0]).unwrap(), big(-1));
        assert!(matches!(
            pell.evaluate(&[1]),
            Err(Error::ArityMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn evaluation_is_exact_for_large_values() {
        let p = parse("x1^40 - 1").unwrap();
        let v = p.evaluate(&[10]).unwrap();
        assert_eq!(v, BigInt::from(10).pow(40u32) - 1);
    }

    #[test]
    fn search_box_examples() {
        assert_eq!(parse("x1 - 2").unwrap().search_box(5).unwrap(), Some(vec![2]));
        assert_eq!(parse("x1 + 1").unwrap().search_box(50).unwrap(), None);
        let pell = parse("(x1+1)^2 - 2*(x2+1)^2").unwrap();
        assert_eq!(pell.search_box(20).unwrap(), None);
    }

    #[test]
    fn search_box_returns_lexicographic_minimum() {
        let p = parse("x1 + x2 - 3").unwrap();
        assert_eq!(p.search_box(5).unwrap(), Some(vec![0, 3]));
        let p = parse("x1 - x2").unwrap();
        assert_eq!(p.search_box(5).unwrap(), Some(vec![0, 0]));
        assert_eq!(parse("0").unwrap().search_box(3).unwrap(), Some(vec![]));
    }

    #[test]
    fn grlex_ordering() {
        let a = Monomial::new(vec![2, 0]);
        let b = Monomial::new(vec![0, 3]);
        let c = Monomial::new(vec![1, 1]);
        let d = Monomial::new(vec![0, 2]);
        assert!(b > a);
        assert!(a > c && c > d);
    }
}

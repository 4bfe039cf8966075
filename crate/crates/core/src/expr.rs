//! Tokenizer and recursive-descent parser for factor and operator expressions.
//!
//! Both grammars reduce to finite sums of monomials `c * x^e * D^j` with exact
//! complex-rational `c`, rational `e` and natural `j`. Products are taken in
//! normal order (coefficients to the left of `D`), so `D*x` is read as `x*D`.

use std::collections::BTreeMap;

use num::{BigRational, One, Signed, Zero};
use thiserror::Error;

use crate::rational::{rat_int, CRat};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("non-rational exponent at {pos}")]
    NonRationalExponent { pos: usize },
}

impl ParseError {
    fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax { pos, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: BigRational, decimal: bool },
    I,
    X,
    D,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            'i' | 'I' => Tok::I,
            'x' => Tok::X,
            'D' => Tok::D,
            '0'..='9' | '.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let int_part = &text[i..j];
                let mut frac_part = "";
                let mut decimal = false;
                if j < bytes.len() && bytes[j] == b'.' {
                    decimal = true;
                    let k = j + 1;
                    let mut e = k;
                    while e < bytes.len() && bytes[e].is_ascii_digit() {
                        e += 1;
                    }
                    frac_part = &text[k..e];
                    j = e;
                }
                if int_part.is_empty() && frac_part.is_empty() {
                    return Err(ParseError::syntax(start, "malformed number"));
                }
                let digits = format!("{int_part}{frac_part}");
                let numer: num::BigInt = digits
                    .parse()
                    .map_err(|_| ParseError::syntax(start, "malformed number"))?;
                let denom = num::pow(num::BigInt::from(10), frac_part.len());
                out.push((
                    Tok::Num { value: BigRational::new(numer, denom), decimal },
                    start,
                ));
                i = j;
                continue;
            }
            other => return Err(ParseError::syntax(start, format!("unexpected character '{other}'"))),
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

/// A finite sum of monomials keyed by (x-exponent, D-power).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    pub terms: BTreeMap<(BigRational, u32), CRat>,
}

impl Expr {
    fn constant(c: CRat) -> Self {
        Expr::monomial(c, BigRational::zero(), 0)
    }

    fn monomial(c: CRat, e: BigRational, d: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((e, d), c);
        }
        Expr { terms }
    }

    fn add(mut self, other: Expr) -> Self {
        for (k, c) in other.terms {
            let entry = self.terms.entry(k.clone()).or_insert_with(CRat::zero);
            *entry = &*entry + &c;
            if entry.is_zero() {
                self.terms.remove(&k);
            }
        }
        self
    }

    fn neg(self) -> Self {
        Expr { terms: self.terms.into_iter().map(|(k, c)| (k, -c)).collect() }
    }

    fn mul(&self, other: &Expr) -> Self {
        let mut acc = Expr::default();
        for ((e1, d1), c1) in &self.terms {
            for ((e2, d2), c2) in &other.terms {
                acc = acc.add(Expr::monomial(c1 * c2, e1 + e2, d1 + d2));
            }
        }
        acc
    }

    fn single(&self) -> Option<(&BigRational, u32, &CRat)> {
        if self.terms.len() == 1 {
            let ((e, d), c) = self.terms.iter().next()?;
            Some((e, *d, c))
        } else {
            None
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|(e, d)| e.is_zero() && *d == 0)
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::syntax(self.pos(), format!("expected {what}")))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut acc = match self.peek() {
            Tok::Minus => {
                self.bump();
                self.product()?.neg()
            }
            Tok::Plus => {
                self.bump();
                self.product()?
            }
            _ => self.product()?,
        };
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(self.signed_product()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.add(self.signed_product()?.neg());
                }
                _ => return Ok(acc),
            }
        }
    }

    // Permits rendered forms such as `a + -b*x`.
    fn signed_product(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            Ok(self.product()?.neg())
        } else {
            self.product()
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.power()?;
                    acc = acc.mul(&rhs);
                }
                Tok::Slash => {
                    let pos = self.pos();
                    self.bump();
                    let rhs = self.power()?;
                    let (e, d, c) = rhs
                        .single()
                        .ok_or_else(|| ParseError::syntax(pos, "division by a sum"))?;
                    if d != 0 {
                        return Err(ParseError::syntax(pos, "division by D"));
                    }
                    let inv = Expr::monomial(c.inv(), -e.clone(), 0);
                    acc = acc.mul(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let (base, base_pos) = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exp_pos = self.pos();
        let exponent = self.exponent()?;
        match base.single() {
            Some((e, d, c)) if d == 0 && (c == &CRat::one()) => {
                Ok(Expr::monomial(CRat::one(), e * &exponent, 0))
            }
            Some((e, d, c)) if e.is_zero() && c == &CRat::one() && d == 1 => {
                if !exponent.is_integer() || exponent.is_negative() {
                    return Err(ParseError::syntax(exp_pos, "D needs a natural exponent"));
                }
                let n = exponent.to_integer();
                let n: u32 = n
                    .try_into()
                    .map_err(|_| ParseError::syntax(exp_pos, "exponent too large"))?;
                Ok(Expr::monomial(CRat::one(), BigRational::zero(), n))
            }
            _ => {
                if !exponent.is_integer() {
                    return Err(ParseError::syntax(base_pos, "only x takes fractional powers"));
                }
                let n: i64 = exponent
                    .to_integer()
                    .try_into()
                    .map_err(|_| ParseError::syntax(exp_pos, "exponent too large"))?;
                if n < 0 {
                    let (e, d, c) = base
                        .single()
                        .ok_or_else(|| ParseError::syntax(base_pos, "negative power of a sum"))?;
                    if d != 0 {
                        return Err(ParseError::syntax(base_pos, "negative power of D"));
                    }
                    let mono = Expr::monomial(c.inv().pow(n.unsigned_abs() as u32), -e * rat_int(-n), 0);
                    return Ok(mono);
                }
                let mut acc = Expr::constant(CRat::one());
                for _ in 0..n {
                    acc = acc.mul(&base);
                }
                Ok(acc)
            }
        }
    }

    fn exponent(&mut self) -> Result<BigRational, ParseError> {
        let pos = self.pos();
        if *self.peek() == Tok::LParen {
            self.bump();
            let neg = if *self.peek() == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            let n = self.integer()?;
            let value = if *self.peek() == Tok::Slash {
                self.bump();
                let dpos = self.pos();
                let d = self.integer()?;
                if d.is_zero() || d.is_negative() {
                    return Err(ParseError::syntax(dpos, "denominator must be positive"));
                }
                n / d
            } else {
                n
            };
            self.expect(Tok::RParen, "')'")?;
            Ok(if neg { -value } else { value })
        } else {
            let neg = if *self.peek() == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            if !matches!(self.peek(), Tok::Num { .. }) {
                return Err(ParseError::syntax(pos, "expected exponent"));
            }
            let n = self.integer()?;
            Ok(if neg { -n } else { n })
        }
    }

    fn integer(&mut self) -> Result<BigRational, ParseError> {
        let pos = self.pos();
        match self.bump().0 {
            Tok::Num { decimal: true, .. } => Err(ParseError::NonRationalExponent { pos }),
            Tok::Num { value, .. } => Ok(value),
            _ => Err(ParseError::syntax(pos, "expected integer")),
        }
    }

    fn atom(&mut self) -> Result<(Expr, usize), ParseError> {
        let pos = self.pos();
        let e = match self.bump().0 {
            Tok::Num { value, .. } => Expr::constant(CRat::from_real(value)),
            Tok::I => Expr::constant(CRat::i()),
            Tok::X => Expr::monomial(CRat::one(), BigRational::one(), 0),
            Tok::D => Expr::monomial(CRat::one(), BigRational::zero(), 1),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect(Tok::RParen, "')'")?;
                inner
            }
            Tok::End => return Err(ParseError::syntax(pos, "unexpected end of input")),
            t => return Err(ParseError::syntax(pos, format!("unexpected token {t:?}"))),
        };
        Ok((e, pos))
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return Err(ParseError::syntax(p.pos(), "trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn key(n: i64, d: i64, dp: u32) -> (BigRational, u32) {
        (rat(n, d), dp)
    }

    #[test]
    fn monomials_and_sums() {
        let e = parse_expr("(2+1*i)*x^-3 + x^-1").unwrap();
        assert_eq!(e.terms[&key(-3, 1, 0)], CRat::new(rat(2, 1), rat(1, 1)));
        assert_eq!(e.terms[&key(-1, 1, 0)], CRat::one());
        let e = parse_expr("1/x").unwrap();
        assert_eq!(e.terms[&key(-1, 1, 0)], CRat::one());
        let e = parse_expr("x^(-3/2)").unwrap();
        assert_eq!(e.terms[&key(-3, 2, 0)], CRat::one());
        let e = parse_expr("1/2*x^-2").unwrap();
        assert_eq!(e.terms[&key(-2, 1, 0)], CRat::from_ratio(1, 2));
    }

    #[test]
    fn operators() {
        let e = parse_expr("x^5*D^2 - 1").unwrap();
        assert_eq!(e.terms[&key(5, 1, 2)], CRat::one());
        assert_eq!(e.terms[&key(0, 1, 0)], CRat::from_int(-1));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse_expr("x^1.5"), Err(ParseError::NonRationalExponent { pos: 2 }));
        match parse_expr("x + * 2") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("x^(1/0)").is_err());
        assert!(parse_expr("(x").is_err());
    }
}

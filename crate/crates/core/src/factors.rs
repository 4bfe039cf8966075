//! Ramified exponential factors `phi(x) = sum_k c_k x^(k/m)`.
//!
//! Coefficients are exact; doubles only appear in [`ExponentialFactor::evaluate`].

use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex64;
use num::{BigRational, Integer, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expr, ParseError};
use crate::rational::{fmt_rat, lcm_i64, parse_rat, rat, CRat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("factor expression must not contain D")]
    ContainsOperator,
    #[error("evaluation at x = 0 of a factor with a pole")]
    PoleAtZero,
    #[error("invalid factor JSON: {0}")]
    Json(String),
}

/// A point on the punctured plane given in polar form with an unreduced angle.
///
/// The angle selects the branch `x^(1/m) = rho^(1/m) e^(i theta / m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    pub rho: f64,
    pub theta: f64,
}

impl Polar {
    pub fn new(rho: f64, theta: f64) -> Self {
        Polar { rho, theta }
    }

    /// Principal-branch polar form of a complex number.
    pub fn from_complex(z: Complex64) -> Self {
        Polar { rho: z.norm(), theta: z.arg() }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.rho, self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExponentialFactor {
    ram: u32,
    terms: BTreeMap<i64, CRat>,
}

impl Default for ExponentialFactor {
    fn default() -> Self {
        ExponentialFactor::zero()
    }
}

impl ExponentialFactor {
    pub fn zero() -> Self {
        ExponentialFactor { ram: 1, terms: BTreeMap::new() }
    }

    /// Builds and normalizes `sum c_k x^(k/ram)`.
    pub fn new(ram: u32, terms: impl IntoIterator<Item = (i64, CRat)>) -> Self {
        assert!(ram >= 1, "ramification must be positive");
        let mut map: BTreeMap<i64, CRat> = BTreeMap::new();
        for (k, c) in terms {
            let e = map.entry(k).or_insert_with(CRat::zero);
            *e = &*e + &c;
        }
        map.retain(|_, c| !c.is_zero());
        let mut f = ExponentialFactor { ram, terms: map };
        f.minimize();
        f
    }

    pub fn monomial(c: CRat, exponent: BigRational) -> Self {
        let m = exponent.denom().to_u32().expect("exponent denominator too large");
        let k = exponent.numer().to_i64().expect("exponent numerator too large");
        ExponentialFactor::new(m, [(k, c)])
    }

    fn minimize(&mut self) {
        if self.terms.is_empty() {
            self.ram = 1;
            return;
        }
        let g = self
            .terms
            .keys()
            .fold(self.ram as i64, |g, &k| g.gcd(&k));
        if g > 1 {
            self.ram /= g as u32;
            self.terms = std::mem::take(&mut self.terms)
                .into_iter()
                .map(|(k, c)| (k / g, c))
                .collect();
        }
    }

    pub fn ram(&self) -> u32 {
        self.ram
    }

    pub fn terms(&self) -> &BTreeMap<i64, CRat> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms as `(exponent, coefficient)` with exact rational exponents.
    pub fn exponents(&self) -> impl Iterator<Item = (BigRational, &CRat)> + '_ {
        let m = self.ram as i64;
        self.terms.iter().map(move |(&k, c)| (rat(k, m), c))
    }

    pub fn coefficient(&self, exponent: &BigRational) -> CRat {
        let scaled = exponent * rat(self.ram as i64, 1);
        if !scaled.is_integer() {
            return CRat::zero();
        }
        let k = scaled.to_integer().to_i64().unwrap_or(i64::MAX);
        self.terms.get(&k).cloned().unwrap_or_else(CRat::zero)
    }

    /// Pole order `max(0, -min k / m)`.
    pub fn order(&self) -> BigRational {
        match self.terms.keys().next() {
            Some(&k) if k < 0 => rat(-k, self.ram as i64),
            _ => BigRational::zero(),
        }
    }

    pub fn has_pole(&self) -> bool {
        self.order().is_positive()
    }

    /// `self + sign * other` over the common ramification.
    pub fn combine(&self, other: &ExponentialFactor, sign: i32) -> ExponentialFactor {
        let m = lcm_i64(self.ram as i64, other.ram as i64);
        let (sa, sb) = (m / self.ram as i64, m / other.ram as i64);
        let a = self.terms.iter().map(|(&k, c)| (k * sa, c.clone()));
        let b = other.terms.iter().map(|(&k, c)| {
            let c = if sign < 0 { -c } else { c.clone() };
            (k * sb, c)
        });
        ExponentialFactor::new(m as u32, a.chain(b))
    }

    pub fn add(&self, other: &ExponentialFactor) -> ExponentialFactor {
        self.combine(other, 1)
    }

    pub fn sub(&self, other: &ExponentialFactor) -> ExponentialFactor {
        self.combine(other, -1)
    }

    pub fn neg(&self) -> ExponentialFactor {
        ExponentialFactor {
            ram: self.ram,
            terms: self.terms.iter().map(|(&k, c)| (k, -c)).collect(),
        }
    }

    /// Sum of the terms with strictly negative exponent.
    pub fn pole_part(&self) -> ExponentialFactor {
        ExponentialFactor::new(
            self.ram,
            self.terms.range(..0).map(|(&k, c)| (k, c.clone())),
        )
    }

    /// `(order, leading coefficient, pole part)`; the leading coefficient is 0
    /// for holomorphic factors.
    pub fn principal_part(&self) -> PrincipalPart {
        let pole_terms = self.pole_part();
        let leading = pole_terms
            .terms
            .values()
            .next()
            .cloned()
            .unwrap_or_else(CRat::zero);
        PrincipalPart { order: self.order(), leading, pole_terms }
    }

    /// The pull-back `phi(y^m)`.
    pub fn ramify_pullback(&self, m: u32) -> ExponentialFactor {
        assert!(m >= 1);
        ExponentialFactor::new(
            self.ram,
            self.terms.iter().map(|(&k, c)| (k * m as i64, c.clone())),
        )
    }

    /// Evaluates on the branch selected by the unreduced angle of `x`.
    pub fn evaluate_polar(&self, x: Polar) -> Result<Complex64, FactorError> {
        if x.rho == 0.0 {
            if self.has_pole() {
                return Err(FactorError::PoleAtZero);
            }
            return Ok(self.coefficient(&BigRational::zero()).to_c64());
        }
        let m = self.ram as f64;
        let ln_rho = x.rho.ln();
        Ok(self
            .terms
            .iter()
            .map(|(&k, c)| {
                let e = k as f64 / m;
                c.to_c64() * Complex64::from_polar((e * ln_rho).exp(), e * x.theta)
            })
            .sum())
    }

    /// Evaluates at a complex number on the principal branch.
    pub fn evaluate(&self, x: Complex64) -> Result<Complex64, FactorError> {
        self.evaluate_polar(Polar::from_complex(x))
    }

    /// Derivative with respect to `x` on the branch of `x`.
    pub fn derivative_polar(&self, x: Polar) -> Result<Complex64, FactorError> {
        if x.rho == 0.0 {
            return Err(FactorError::PoleAtZero);
        }
        let m = self.ram as f64;
        let ln_rho = x.rho.ln();
        Ok(self
            .terms
            .iter()
            .filter(|(&k, _)| k != 0)
            .map(|(&k, c)| {
                let e = k as f64 / m - 1.0;
                c.to_c64() * (k as f64 / m) * Complex64::from_polar((e * ln_rho).exp(), e * x.theta)
            })
            .sum())
    }

    /// The factor obtained by continuing once counterclockwise around 0.
    pub fn deck_shift(&self) -> ExponentialFactor {
        // x^(k/m) picks up exp(2 pi i k/m); exact only for m | 4k, else numeric.
        let m = self.ram as i64;
        let terms = self.terms.iter().map(|(&k, c)| {
            let phase = rat(k, m).fract_part();
            (k, c * &exact_root_of_unity(&phase))
        });
        ExponentialFactor::new(self.ram, terms)
    }

    pub fn parse(text: &str) -> Result<ExponentialFactor, FactorError> {
        let e = parse_expr(text)?;
        let mut pairs = Vec::new();
        let mut m: i64 = 1;
        for ((exp, d), c) in &e.terms {
            if *d != 0 {
                return Err(FactorError::ContainsOperator);
            }
            let den = exp.denom().to_i64().ok_or(FactorError::Json("exponent".into()))?;
            m = lcm_i64(m, den);
            pairs.push((exp.clone(), c.clone()));
        }
        let terms = pairs.into_iter().map(|(exp, c)| {
            let k = (exp * rat(m, 1)).to_integer().to_i64().unwrap();
            (k, c)
        });
        Ok(ExponentialFactor::new(m as u32, terms))
    }

    pub fn to_json(&self) -> FactorJson {
        FactorJson {
            ram: self.ram,
            terms: self
                .terms
                .iter()
                .map(|(&k, c)| (k, fmt_rat(&c.re), fmt_rat(&c.im)))
                .collect(),
        }
    }

    pub fn from_json(j: &FactorJson) -> Result<ExponentialFactor, FactorError> {
        if j.ram == 0 {
            return Err(FactorError::Json("ram must be positive".into()));
        }
        let mut terms = Vec::new();
        for (k, re, im) in &j.terms {
            let re = parse_rat(re).ok_or_else(|| FactorError::Json(format!("bad rational '{re}'")))?;
            let im = parse_rat(im).ok_or_else(|| FactorError::Json(format!("bad rational '{im}'")))?;
            terms.push((*k, CRat::new(re, im)));
        }
        Ok(ExponentialFactor::new(j.ram, terms))
    }
}

trait FractPart {
    fn fract_part(&self) -> BigRational;
}

impl FractPart for BigRational {
    fn fract_part(&self) -> BigRational {
        self - self.floor()
    }
}

/// `exp(2 pi i q)` exactly when it lies in Q(i), otherwise rounded.
fn exact_root_of_unity(q: &BigRational) -> CRat {
    let quarter = q * rat(4, 1);
    if quarter.is_integer() {
        match quarter.to_integer().to_i64().unwrap().rem_euclid(4) {
            0 => CRat::one(),
            1 => CRat::i(),
            2 => CRat::from_int(-1),
            _ => -CRat::i(),
        }
    } else {
        let a = 2.0 * std::f64::consts::PI * q.to_f64().unwrap();
        CRat::from_c64(Complex64::from_polar(1.0, a)).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPart {
    pub order: BigRational,
    pub leading: CRat,
    pub pole_terms: ExponentialFactor,
}

/// Wire form `{"ram": m, "terms": [[k, "re", "im"], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorJson {
    pub ram: u32,
    pub terms: Vec<(i64, String, String)>,
}

fn fmt_exponent(e: &BigRational) -> String {
    if e.is_integer() {
        fmt_rat(e)
    } else {
        format!("({})", fmt_rat(e))
    }
}

impl fmt::Display for ExponentialFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.exponents() {
            let (neg, mag) = if c.is_real() && c.re.is_negative() {
                (true, -c.clone())
            } else if c.re.is_zero() && c.im.is_negative() {
                (true, -c.clone())
            } else {
                (false, c.clone())
            };
            let body = if e.is_zero() {
                mag.to_string()
            } else {
                let xpart = if e.is_one() {
                    "x".to_string()
                } else {
                    format!("x^{}", fmt_exponent(&e))
                };
                if mag == CRat::one() {
                    xpart
                } else {
                    format!("{mag}*{xpart}")
                }
            };
            match (first, neg) {
                (true, false) => write!(f, "{body}")?,
                (true, true) => write!(f, "-{body}")?,
                (false, false) => write!(f, " + {body}")?,
                (false, true) => write!(f, " - {body}")?,
            }
            first = false;
        }
        Ok(())
    }
}

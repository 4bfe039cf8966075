//! Laurent polynomials with exact complex-rational coefficients, and
//! differential operators `sum_i a_i(x) D^i` over them.

use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex64;
use num::ToPrimitive;

use crate::expr::{parse_expr, ParseError};
use crate::factors::ExponentialFactor;
use crate::rational::CRat;

#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct LaurentPoly {
    terms: BTreeMap<i64, CRat>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LaurentParseError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("Laurent polynomial '{0}' has a non-integer exponent")]
    FractionalExponent(String),
    #[error("unexpected D in '{0}'")]
    ContainsOperator(String),
}

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly::default()
    }

    pub fn new(terms: impl IntoIterator<Item = (i64, CRat)>) -> Self {
        let mut p = LaurentPoly::zero();
        for (k, c) in terms {
            p.add_term(k, &c);
        }
        p
    }

    pub fn constant(c: CRat) -> Self {
        LaurentPoly::new([(0, c)])
    }

    pub fn monomial(k: i64, c: CRat) -> Self {
        LaurentPoly::new([(k, c)])
    }

    pub fn add_term(&mut self, k: i64, c: &CRat) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(k).or_insert_with(CRat::zero);
        *e = &*e + c;
        if e.is_zero() {
            self.terms.remove(&k);
        }
    }

    pub fn terms(&self) -> &BTreeMap<i64, CRat> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, k: i64) -> CRat {
        self.terms.get(&k).cloned().unwrap_or_else(CRat::zero)
    }

    /// Lowest exponent; `None` for the zero polynomial.
    pub fn valuation(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn leading(&self) -> Option<&CRat> {
        self.terms.values().next()
    }

    pub fn add(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (&k, c) in &other.terms {
            out.add_term(k, c);
        }
        out
    }

    pub fn sub(&self, other: &LaurentPoly) -> LaurentPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly { terms: self.terms.iter().map(|(&k, c)| (k, -c)).collect() }
    }

    pub fn mul(&self, other: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero();
        for (&a, ca) in &self.terms {
            for (&b, cb) in &other.terms {
                out.add_term(a + b, &(ca * cb));
            }
        }
        out
    }

    pub fn scale(&self, c: &CRat) -> LaurentPoly {
        LaurentPoly::new(self.terms.iter().map(|(&k, v)| (k, v * c)))
    }

    pub fn shift(&self, s: i64) -> LaurentPoly {
        LaurentPoly { terms: self.terms.iter().map(|(&k, c)| (k + s, c.clone())).collect() }
    }

    pub fn derivative(&self) -> LaurentPoly {
        LaurentPoly::new(
            self.terms
                .iter()
                .filter(|(&k, _)| k != 0)
                .map(|(&k, c)| (k - 1, c * &CRat::from_int(k))),
        )
    }

    /// Substitutes `x = y^m`.
    pub fn pullback(&self, m: u32) -> LaurentPoly {
        LaurentPoly { terms: self.terms.iter().map(|(&k, c)| (k * m as i64, c.clone())).collect() }
    }

    /// `x -> lambda x`.
    pub fn rescale(&self, lambda: &CRat) -> LaurentPoly {
        LaurentPoly::new(self.terms.iter().map(|(&k, c)| {
            let p = if k >= 0 {
                lambda.pow(k as u32)
            } else {
                lambda.inv().pow((-k) as u32)
            };
            (k, c * &p)
        }))
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.terms.iter().map(|(&k, c)| c.to_c64() * x.powi(k as i32)).sum()
    }

    /// Laurent expansion of `self / other` keeping exponents `<= max_exp`.
    pub fn div_series(&self, other: &LaurentPoly, max_exp: i64) -> LaurentPoly {
        let (Some(vn), Some(vd)) = (self.valuation(), other.valuation()) else {
            return LaurentPoly::zero();
        };
        let lead_inv = other.leading().unwrap().inv();
        let start = vn - vd;
        let mut quotient = LaurentPoly::zero();
        let mut rem = self.clone();
        let mut k = start;
        while k <= max_exp {
            let c = &rem.coeff(k + vd) * &lead_inv;
            if !c.is_zero() {
                rem = rem.sub(&other.shift(k).scale(&c));
                quotient.add_term(k, &c);
            }
            k += 1;
        }
        quotient
    }

    pub fn parse(text: &str) -> Result<LaurentPoly, LaurentParseError> {
        let e = parse_expr(text)?;
        let mut p = LaurentPoly::zero();
        for ((exp, d), c) in e.terms {
            if d != 0 {
                return Err(LaurentParseError::ContainsOperator(text.to_string()));
            }
            if !exp.is_integer() {
                return Err(LaurentParseError::FractionalExponent(text.to_string()));
            }
            p.add_term(exp.to_integer().to_i64().unwrap(), &c);
        }
        Ok(p)
    }

    pub fn as_factor(&self) -> ExponentialFactor {
        ExponentialFactor::new(1, self.terms.iter().map(|(&k, c)| (k, c.clone())))
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_factor())
    }
}

/// `P = sum_i a_i(x) D^i`, coefficients to the left.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DifferentialOperator {
    coeffs: BTreeMap<usize, LaurentPoly>,
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, j| acc * (n - j) as i64 / (j + 1) as i64)
}

impl DifferentialOperator {
    pub fn new(coeffs: impl IntoIterator<Item = (usize, LaurentPoly)>) -> Self {
        let mut op = DifferentialOperator::default();
        for (i, a) in coeffs {
            op.add_coeff(i, &a);
        }
        op
    }

    fn add_coeff(&mut self, i: usize, a: &LaurentPoly) {
        let sum = self.coeffs.get(&i).map(|c| c.add(a)).unwrap_or_else(|| a.clone());
        if sum.is_zero() {
            self.coeffs.remove(&i);
        } else {
            self.coeffs.insert(i, sum);
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, LaurentPoly> {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> LaurentPoly {
        self.coeffs.get(&i).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn order(&self) -> usize {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    /// The operator `D + g`.
    pub fn shifted_derivation(g: &LaurentPoly) -> Self {
        DifferentialOperator::new([(1, LaurentPoly::constant(CRat::one())), (0, g.clone())])
    }

    /// Composition `self * other` using `D^j a = sum_l C(j,l) a^(l) D^(j-l)`.
    pub fn compose(&self, other: &DifferentialOperator) -> DifferentialOperator {
        let mut out = DifferentialOperator::default();
        for (&j, b) in &self.coeffs {
            for (&k, a) in &other.coeffs {
                let mut deriv = a.clone();
                for l in 0..=j {
                    if l > 0 {
                        deriv = deriv.derivative();
                    }
                    if deriv.is_zero() {
                        break;
                    }
                    let c = CRat::from_int(binomial(j, l));
                    out.add_coeff(j - l + k, &b.mul(&deriv).scale(&c));
                }
            }
        }
        out
    }

    pub fn scale_left(&self, a: &LaurentPoly) -> DifferentialOperator {
        DifferentialOperator::new(self.coeffs.iter().map(|(&i, c)| (i, a.mul(c))))
    }

    /// Conjugation `e^(-psi) P e^(psi)` with `g = psi'`: every `D` becomes `D + g`.
    pub fn twist(&self, g: &LaurentPoly) -> DifferentialOperator {
        let step = DifferentialOperator::shifted_derivation(g);
        let mut power = DifferentialOperator::new([(0, LaurentPoly::constant(CRat::one()))]);
        let mut out = DifferentialOperator::default();
        for i in 0..=self.order() {
            if i > 0 {
                power = step.compose(&power);
            }
            if let Some(a) = self.coeffs.get(&i) {
                let term = power.scale_left(a);
                for (&j, c) in &term.coeffs {
                    out.add_coeff(j, c);
                }
            }
        }
        out
    }

    /// Pull-back along `x = y^m`, where `D_x = (1/m) y^(1-m) D_y`.
    pub fn pullback(&self, m: u32) -> DifferentialOperator {
        if m == 1 {
            return self.clone();
        }
        let dx = DifferentialOperator::new([(
            1,
            LaurentPoly::monomial(1 - m as i64, CRat::from_ratio(1, m as i64)),
        )]);
        let mut power = DifferentialOperator::new([(0, LaurentPoly::constant(CRat::one()))]);
        let mut out = DifferentialOperator::default();
        for i in 0..=self.order() {
            if i > 0 {
                power = dx.compose(&power);
            }
            if let Some(a) = self.coeffs.get(&i) {
                let term = power.scale_left(&a.pullback(m));
                for (&j, c) in &term.coeffs {
                    out.add_coeff(j, c);
                }
            }
        }
        out
    }

    /// `x -> lambda x`, so `D_x -> lambda^-1 D`.
    pub fn rescale(&self, lambda: &CRat) -> DifferentialOperator {
        DifferentialOperator::new(self.coeffs.iter().map(|(&i, a)| {
            (i, a.rescale(lambda).scale(&lambda.inv().pow(i as u32)))
        }))
    }

    pub fn parse(text: &str) -> Result<DifferentialOperator, LaurentParseError> {
        let e = parse_expr(text)?;
        let mut op = DifferentialOperator::default();
        for ((exp, d), c) in e.terms {
            if !exp.is_integer() {
                return Err(LaurentParseError::FractionalExponent(text.to_string()));
            }
            let k = exp.to_integer().to_i64().unwrap();
            op.add_coeff(d as usize, &LaurentPoly::monomial(k, c));
        }
        Ok(op)
    }

    /// Applies the operator to `y^s` and groups by the shift of the exponent:
    /// `P y^s = sum_d P_d(s) y^(s+d)`, each `P_d` a polynomial in `s` given by its
    /// coefficient list.
    pub fn shift_polynomials(&self) -> BTreeMap<i64, Vec<CRat>> {
        let mut out: BTreeMap<i64, Vec<CRat>> = BTreeMap::new();
        for (&i, a) in &self.coeffs {
            let ff = falling_factorial(i);
            for (&l, c) in a.terms() {
                let entry = out.entry(l - i as i64).or_default();
                if entry.len() < ff.len() {
                    entry.resize(ff.len(), CRat::zero());
                }
                for (deg, f) in ff.iter().enumerate() {
                    entry[deg] = &entry[deg] + &(c * f);
                }
            }
        }
        out.retain(|_, p| p.iter().any(|c| !c.is_zero()));
        out
    }
}

/// Coefficients of `s (s-1) ... (s-i+1)` in increasing degree.
pub fn falling_factorial(i: usize) -> Vec<CRat> {
    let mut p = vec![CRat::one()];
    for j in 0..i {
        let mut next = vec![CRat::zero(); p.len() + 1];
        for (deg, c) in p.iter().enumerate() {
            next[deg + 1] = &next[deg + 1] + c;
            next[deg] = &next[deg] - &(c * &CRat::from_int(j as i64));
        }
        p = next;
    }
    p
}

pub fn poly_eval(p: &[CRat], s: &CRat) -> CRat {
    p.iter().rev().fold(CRat::zero(), |acc, c| &(&acc * s) + c)
}

pub fn poly_eval_c64(p: &[CRat], s: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c.to_c64())
}

impl fmt::Display for DifferentialOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .rev()
            .map(|(&i, a)| match i {
                0 => format!("({a})"),
                1 => format!("({a})*D"),
                _ => format!("({a})*D^{i}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

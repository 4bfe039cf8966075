//! Exact complex rationals and small number-theoretic helpers.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::complex::Complex64;
use num::{BigRational, Integer, One, Signed, ToPrimitive, Zero};

/// A complex number with exact rational real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CRat {
    pub re: BigRational,
    pub im: BigRational,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl CRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        CRat { re, im }
    }

    pub fn zero() -> Self {
        CRat::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        CRat::from_int(1)
    }

    pub fn i() -> Self {
        CRat::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        CRat::new(rat_int(n), BigRational::zero())
    }

    pub fn from_real(r: BigRational) -> Self {
        CRat::new(r, BigRational::zero())
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        CRat::from_real(rat(n, d))
    }

    /// Exact conversion of a finite double pair (every finite f64 is a dyadic rational).
    pub fn from_c64(z: Complex64) -> Option<Self> {
        Some(CRat::new(
            BigRational::from_float(z.re)?,
            BigRational::from_float(z.im)?,
        ))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        CRat::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        CRat::new(&self.re * k, &self.im * k)
    }

    pub fn inv(&self) -> Self {
        let n = self.norm_sqr();
        CRat::new(&self.re / &n, -&self.im / &n)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = CRat::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }

    /// Argument as an exact rational multiple of pi, when it is one.
    ///
    /// For a nonzero Gaussian-rational number the argument is a rational multiple
    /// of pi only on the axes and the diagonals.
    pub fn arg_over_pi(&self) -> Option<BigRational> {
        let (re, im) = (&self.re, &self.im);
        if self.is_zero() {
            return None;
        }
        let q = if im.is_zero() {
            if re.is_positive() { rat(0, 1) } else { rat(1, 1) }
        } else if re.is_zero() {
            if im.is_positive() { rat(1, 2) } else { rat(-1, 2) }
        } else if re.abs() == im.abs() {
            match (re.is_positive(), im.is_positive()) {
                (true, true) => rat(1, 4),
                (false, true) => rat(3, 4),
                (false, false) => rat(-3, 4),
                (true, false) => rat(-1, 4),
            }
        } else {
            return None;
        };
        Some(q)
    }

    /// Exact square roots, if both lie in Q(i).
    pub fn sqrt_exact(&self) -> Option<CRat> {
        if self.is_zero() {
            return Some(CRat::zero());
        }
        // (p + qi)^2 = a + bi with p^2 = (|z| + a)/2, q^2 = (|z| - a)/2
        let modulus = rat_sqrt(&self.norm_sqr())?;
        let two = rat_int(2);
        let p = rat_sqrt(&((&modulus + &self.re) / &two))?;
        let q = rat_sqrt(&((&modulus - &self.re) / &two))?;
        let q = if self.im.is_negative() { -q } else { q };
        let root = CRat::new(p, q);
        if &(&root * &root) == self {
            Some(root)
        } else {
            None
        }
    }
}

/// Exact square root of a nonnegative rational, if it is rational.
pub fn rat_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer();
    let d = r.denom();
    let sn = n.sqrt();
    let sd = d.sqrt();
    if &(&sn * &sn) == n && &(&sd * &sd) == d {
        Some(BigRational::new(sn, sd))
    } else {
        None
    }
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

pub fn lcm_i64(a: i64, b: i64) -> i64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a.lcm(&b)
}

/// Renders a rational as `p` or `p/q`.
pub fn fmt_rat(r: &BigRational) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `-p` or `p/q`.
pub fn parse_rat(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n, d))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

impl fmt::Display for CRat {
    /// `a`, `b*i`, or `(a+b*i)`; the factor grammar accepts all three forms.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", fmt_rat(&self.re))
        } else if self.re.is_zero() {
            write!(f, "{}*i", fmt_rat(&self.im))
        } else if self.im.is_negative() {
            write!(f, "({}-{}*i)", fmt_rat(&self.re), fmt_rat(&-self.im.clone()))
        } else {
            write!(f, "({}+{}*i)", fmt_rat(&self.re), fmt_rat(&self.im))
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<'a> $tr<&'a CRat> for &'a CRat {
            type Output = CRat;
            fn $method(self, rhs: &'a CRat) -> CRat {
                let f: fn(&CRat, &CRat) -> CRat = $body;
                f(self, rhs)
            }
        }
        impl $tr<CRat> for CRat {
            type Output = CRat;
            fn $method(self, rhs: CRat) -> CRat {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $tr<&'a CRat> for CRat {
            type Output = CRat;
            fn $method(self, rhs: &'a CRat) -> CRat {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| CRat::new(&a.re + &b.re, &a.im + &b.im));
forward_binop!(Sub, sub, |a, b| CRat::new(&a.re - &b.re, &a.im - &b.im));
forward_binop!(Mul, mul, |a, b| CRat::new(
    &a.re * &b.re - &a.im * &b.im,
    &a.re * &b.im + &a.im * &b.re
));
forward_binop!(Div, div, |a, b| a * &b.inv());

impl Neg for CRat {
    type Output = CRat;
    fn neg(self) -> CRat {
        CRat::new(-self.re, -self.im)
    }
}

impl Neg for &CRat {
    type Output = CRat;
    fn neg(self) -> CRat {
        CRat::new(-self.re.clone(), -self.im.clone())
    }
}

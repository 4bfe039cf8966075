//! Newton polygons, slopes, ramification and formal types of connections of
//! rank at most two.
//!
//! Decomposition works on scalar operators. After the pull-back `x = y^m` that
//! makes every slope integral, each positive edge of the polygon yields a
//! characteristic equation whose roots `s` are leading terms of `psi'` for a
//! solution `e^psi`. The operator is conjugated by `e^(c y^-r)` and the procedure
//! recurses on the edges of strictly smaller slope. What remains at slope 0 gives
//! the regular exponents through the indicial polynomial.

use std::collections::BTreeMap;

use num::complex::Complex64;
use num::{BigRational, Integer, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factors::{ExponentialFactor, FactorError, FactorJson};
use crate::laurent::{falling_factorial, DifferentialOperator, LaurentParseError, LaurentPoly};
use crate::rational::{rat, rat_int, CRat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormalError {
    #[error("zero operator")]
    ZeroOperator,
    #[error("rank {0} is above the supported maximum of 2")]
    RankTooLarge(usize),
    #[error("twist loop did not terminate within {0} steps")]
    NonConvergence(usize),
    #[error("characteristic root of {0} is not in Q(i)")]
    IrrationalRoot(String),
    #[error("inconsistent decomposition: {0}")]
    Inconsistent(String),
    #[error("system matrix must be square, got {0}")]
    NotSquare(String),
    #[error("ramified factors cannot be realized as a diagonal system over x")]
    RamifiedRealization,
    #[error(transparent)]
    Parse(#[from] LaurentParseError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("invalid JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slope {
    pub slope: BigRational,
    pub length: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonPolygon {
    pub vertices: Vec<(BigRational, BigRational)>,
    pub slopes: Vec<Slope>,
}

struct Edge {
    left: i64,
    right: i64,
    slope: BigRational,
}

struct PolygonData {
    points: BTreeMap<i64, (i64, CRat)>,
    hmin: i64,
    flat_len: i64,
    edges: Vec<Edge>,
}

fn polygon_data(p: &DifferentialOperator) -> Result<PolygonData, FormalError> {
    if p.is_zero() {
        return Err(FormalError::ZeroOperator);
    }
    let points: BTreeMap<i64, (i64, CRat)> = p
        .coeffs()
        .iter()
        .map(|(&i, a)| {
            let v = a.valuation().unwrap();
            (i as i64, (v - i as i64, a.leading().unwrap().clone()))
        })
        .collect();
    let hmin = points.values().map(|(h, _)| *h).min().unwrap();
    let flat_len = points
        .iter()
        .filter(|(_, (h, _))| *h == hmin)
        .map(|(&i, _)| i)
        .max()
        .unwrap();
    // Lower hull of the points right of the last minimum; collinear points dropped.
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for (&i, &(h, _)) in points.range(flat_len..) {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            let cross = (x2 - x1) * (h - y1) - (y2 - y1) * (i - x1);
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((i, h));
    }
    let edges = hull
        .windows(2)
        .map(|w| Edge {
            left: w[0].0,
            right: w[1].0,
            slope: rat(w[1].1 - w[0].1, w[1].0 - w[0].0),
        })
        .collect();
    Ok(PolygonData { points, hmin, flat_len, edges })
}

/// Lower convex hull of `(i, v(a_i) - i)` extended by horizontal rays to the left.
pub fn newton_polygon(p: &DifferentialOperator) -> Result<NewtonPolygon, FormalError> {
    let d = polygon_data(p)?;
    let mut vertices = vec![(rat_int(d.flat_len), rat_int(d.hmin))];
    let mut slopes = Vec::new();
    if d.flat_len > 0 {
        slopes.push(Slope { slope: BigRational::zero(), length: rat_int(d.flat_len) });
    }
    for e in &d.edges {
        vertices.push((rat_int(e.right), rat_int(d.points[&e.right].0)));
        slopes.push(Slope { slope: e.slope.clone(), length: rat_int(e.right - e.left) });
    }
    Ok(NewtonPolygon { vertices, slopes })
}

/// Least `m` with every `m * slope` integral.
pub fn ramification_order(slopes: &[Slope]) -> u32 {
    slopes
        .iter()
        .fold(1i64, |m, s| m.lcm(&s.slope.denom().to_i64().unwrap()))
        .try_into()
        .unwrap()
}

/// A regular exponent, exact when the indicial root is Gaussian-rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Exponent {
    Exact(CRat),
    Approx(Complex64),
}

impl Exponent {
    pub fn to_c64(&self) -> Complex64 {
        match self {
            Exponent::Exact(c) => c.to_c64(),
            Exponent::Approx(z) => *z,
        }
    }

    pub fn exact(&self) -> Option<&CRat> {
        match self {
            Exponent::Exact(c) => Some(c),
            Exponent::Approx(_) => None,
        }
    }
}

/// One formal solution `e^phi(y) y^mu (1 + O(y))` of the pulled-back operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Pole part of `phi` in the variable `y`.
    pub phi: LaurentPoly,
    pub exponent: Exponent,
    /// The pulled-back operator conjugated by `e^phi`.
    pub twisted: DifferentialOperator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalSolutions {
    pub ramification: u32,
    /// The operator after `x = y^m`.
    pub operator: DifferentialOperator,
    pub branches: Vec<Branch>,
}

impl FormalSolutions {
    /// The factor of a branch as a function of `x`.
    pub fn factor_of(&self, b: &Branch) -> ExponentialFactor {
        ExponentialFactor::new(self.ramification, b.phi.terms().iter().map(|(&k, c)| (k, c.clone())))
    }

    /// Branch exponent measured in `x` (`mu / m`, not reduced).
    pub fn x_exponent(&self, b: &Branch) -> Complex64 {
        b.exponent.to_c64() / self.ramification as f64
    }
}

fn poly_degree(p: &[CRat]) -> usize {
    p.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
}

/// Exact roots with multiplicities for degree at most 2.
fn exact_roots(p: &[CRat]) -> Option<Vec<(CRat, usize)>> {
    match poly_degree(p) {
        0 => Some(vec![]),
        1 => Some(vec![(-(&p[0] / &p[1]), 1)]),
        2 => {
            let (c, b, a) = (&p[0], &p[1], &p[2]);
            let disc = b * b - &(&CRat::from_int(4) * &(a * c));
            let two_a = a * &CRat::from_int(2);
            if disc.is_zero() {
                return Some(vec![(-(b / &two_a), 2)]);
            }
            let r = disc.sqrt_exact()?;
            Some(vec![((&-b + &r) / &two_a, 1), ((&-b - &r) / &two_a, 1)])
        }
        _ => None,
    }
}

fn approx_roots(p: &[CRat]) -> Vec<Complex64> {
    match poly_degree(p) {
        1 => vec![-p[0].to_c64() / p[1].to_c64()],
        2 => {
            let (c, b, a) = (p[0].to_c64(), p[1].to_c64(), p[2].to_c64());
            let r = (b * b - 4.0 * a * c).sqrt();
            vec![(-b + r) / (2.0 * a), (-b - r) / (2.0 * a)]
        }
        _ => vec![],
    }
}

fn fmt_poly(p: &[CRat]) -> String {
    p.iter()
        .enumerate()
        .map(|(i, c)| format!("{c}*s^{i}"))
        .collect::<Vec<_>>()
        .join(" + ")
}

enum Step {
    Ramify(u32),
    Fail(FormalError),
}

impl From<FormalError> for Step {
    fn from(e: FormalError) -> Self {
        Step::Fail(e)
    }
}

fn decompose(
    q: &DifferentialOperator,
    bound: Option<&BigRational>,
    depth: usize,
    limit: usize,
) -> Result<Vec<Branch>, Step> {
    if depth > limit {
        return Err(Step::Fail(FormalError::NonConvergence(limit)));
    }
    let poly = polygon_data(q)?;
    let active: Vec<&Edge> = poly
        .edges
        .iter()
        .filter(|e| bound.is_none_or(|b| &e.slope < b))
        .collect();
    let den = active
        .iter()
        .fold(1i64, |m, e| m.lcm(&e.slope.denom().to_i64().unwrap()));
    if den > 1 {
        return Err(Step::Ramify(den as u32));
    }
    let mut out = Vec::new();
    for edge in active {
        let r = edge.slope.to_integer().to_i64().unwrap();
        let (hl, _) = &poly.points[&edge.left];
        let mut charpoly = vec![CRat::zero(); (edge.right - edge.left + 1) as usize];
        for (&i, (h, lc)) in poly.points.range(edge.left..=edge.right) {
            if *h == hl + r * (i - edge.left) {
                charpoly[(i - edge.left) as usize] = lc.clone();
            }
        }
        let roots = exact_roots(&charpoly)
            .ok_or_else(|| FormalError::IrrationalRoot(fmt_poly(&charpoly)))?;
        for (s, mult) in roots {
            let g = LaurentPoly::monomial(-r - 1, s.clone());
            let twisted = q.twist(&g);
            let sub = decompose(&twisted, Some(&edge.slope), depth + 1, limit)?;
            if sub.len() != mult {
                return Err(Step::Fail(FormalError::Inconsistent(format!(
                    "root {s} of multiplicity {mult} produced {} branches",
                    sub.len()
                ))));
            }
            // psi' = s y^(-r-1)  <=>  psi = c y^(-r) with c = -s / r
            let c = -(&s / &CRat::from_int(r));
            for mut b in sub {
                b.phi.add_term(-r, &c);
                out.push(b);
            }
        }
    }
    if poly.flat_len > 0 {
        let mut indicial = vec![CRat::zero(); poly.flat_len as usize + 1];
        for (&i, (h, lc)) in &poly.points {
            if *h == poly.hmin {
                for (deg, f) in falling_factorial(i as usize).iter().enumerate() {
                    indicial[deg] = &indicial[deg] + &(lc * f);
                }
            }
        }
        let exps: Vec<Exponent> = match exact_roots(&indicial) {
            Some(roots) => roots
                .into_iter()
                .flat_map(|(r, m)| std::iter::repeat_n(Exponent::Exact(r), m))
                .collect(),
            None => approx_roots(&indicial).into_iter().map(Exponent::Approx).collect(),
        };
        for exponent in exps {
            out.push(Branch { phi: LaurentPoly::zero(), exponent, twisted: q.clone() });
        }
    }
    Ok(out)
}

/// Formal solutions of a scalar operator after the ramification that makes them
/// available.
pub fn decompose_operator(op: &DifferentialOperator) -> Result<FormalSolutions, FormalError> {
    let np = newton_polygon(op)?;
    let mut m = ramification_order(&np.slopes);
    let max_slope = np
        .slopes
        .iter()
        .map(|s| s.slope.clone())
        .max()
        .unwrap_or_else(BigRational::zero);
    for _ in 0..4 {
        let q = op.pullback(m);
        let limit = (&max_slope * rat_int(m as i64)).ceil().to_integer().to_usize().unwrap() + op.order();
        match decompose(&q, None, 0, limit) {
            Ok(branches) => {
                if branches.len() != op.order() {
                    return Err(FormalError::Inconsistent(format!(
                        "{} branches for an operator of order {}",
                        branches.len(),
                        op.order()
                    )));
                }
                return Ok(FormalSolutions { ramification: m, operator: q, branches });
            }
            Err(Step::Ramify(k)) => m *= k,
            Err(Step::Fail(e)) => return Err(e),
        }
    }
    Err(FormalError::NonConvergence(4))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalItem {
    pub factor: ExponentialFactor,
    pub rank: usize,
    pub exponents: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormalType {
    pub items: Vec<FormalItem>,
    pub ramification: u32,
}

/// Representative with real part in `[0, 1)`.
pub fn normalize_exponent(z: Complex64) -> Complex64 {
    let mut re = z.re - z.re.floor();
    if re >= 1.0 {
        re -= 1.0;
    }
    Complex64::new(re, z.im)
}

fn exponents_match(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|x| {
        let x = normalize_exponent(*x);
        let hit = b.iter().enumerate().position(|(j, y)| {
            let d = x - normalize_exponent(*y);
            let d = Complex64::new(d.re - d.re.round(), d.im);
            !used[j] && d.norm() <= tol
        });
        if let Some(j) = hit {
            used[j] = true;
            true
        } else {
            false
        }
    })
}

impl FormalItem {
    pub fn same_as(&self, other: &FormalItem, tol: f64) -> bool {
        self.factor.pole_part() == other.factor.pole_part()
            && self.rank == other.rank
            && exponents_match(&self.exponents, &other.exponents, tol)
    }
}

impl FormalType {
    pub fn rank(&self) -> usize {
        self.items.iter().map(|i| i.rank).sum()
    }

    pub fn factors(&self) -> Vec<ExponentialFactor> {
        self.items.iter().map(|i| i.factor.clone()).collect()
    }

    /// Equality up to item order and integer shifts of exponents.
    pub fn same_as(&self, other: &FormalType, tol: f64) -> bool {
        if self.items.len() != other.items.len() {
            return false;
        }
        let mut used = vec![false; other.items.len()];
        self.items.iter().all(|a| {
            match other.items.iter().enumerate().position(|(j, b)| !used[j] && a.same_as(b, tol)) {
                Some(j) => {
                    used[j] = true;
                    true
                }
                None => false,
            }
        })
    }

    pub fn normalized(&self) -> FormalType {
        FormalType {
            items: self
                .items
                .iter()
                .map(|it| FormalItem {
                    factor: it.factor.pole_part(),
                    rank: it.rank,
                    exponents: it.exponents.iter().map(|z| normalize_exponent(*z)).collect(),
                })
                .collect(),
            ramification: self.ramification,
        }
    }

    fn from_solutions(sol: &FormalSolutions) -> FormalType {
        let mut items: Vec<FormalItem> = Vec::new();
        for b in &sol.branches {
            let factor = sol.factor_of(b);
            let lambda = normalize_exponent(sol.x_exponent(b));
            match items.iter_mut().find(|it| it.factor == factor) {
                Some(it) => {
                    it.rank += 1;
                    it.exponents.push(lambda);
                }
                None => items.push(FormalItem { factor, rank: 1, exponents: vec![lambda] }),
            }
        }
        FormalType { items, ramification: sol.ramification }
    }

    /// The diagonal system `u' = diag(phi_i' + lambda_i / x) u` realizing this
    /// formal type; unramified types only.
    pub fn to_system(&self) -> Result<Vec<Vec<LaurentPoly>>, FormalError> {
        let mut diag = Vec::new();
        for it in &self.items {
            if it.factor.ram() != 1 {
                return Err(FormalError::RamifiedRealization);
            }
            let dphi = LaurentPoly::new(it.factor.terms().iter().map(|(&k, c)| (k, c.clone()))).derivative();
            for z in &it.exponents {
                let lam = CRat::from_c64(*z).ok_or_else(|| FormalError::Json("non-finite exponent".into()))?;
                let mut entry = dphi.clone();
                entry.add_term(-1, &lam);
                diag.push(entry);
            }
        }
        let n = diag.len();
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag[i].clone() } else { LaurentPoly::zero() })
                    .collect()
            })
            .collect())
    }
}

/// Input to the formal and numerical pipelines.
#[derive(Debug, Clone, PartialEq)]
pub enum ConnectionSpec {
    Operator(DifferentialOperator),
    /// `u' = A(x) u`.
    System(Vec<Vec<LaurentPoly>>),
    FormalSum(FormalType),
}

/// How a scalar operator was obtained from a 2x2 system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CyclicVector {
    First,
    Second,
}

/// Scalar operator satisfied by `u_1` (or `u_2` when `A_12 = 0`) of a 2x2 system
/// that is not diagonal.
pub fn system_to_operator(a: &[Vec<LaurentPoly>]) -> Option<(DifferentialOperator, CyclicVector)> {
    let (a11, a12, a21, a22, cv) = if !a[0][1].is_zero() {
        (&a[0][0], &a[0][1], &a[1][0], &a[1][1], CyclicVector::First)
    } else if !a[1][0].is_zero() {
        (&a[1][1], &a[1][0], &a[0][1], &a[0][0], CyclicVector::Second)
    } else {
        return None;
    };
    // A12 u'' - (A12 (A11 + A22) + A12') u'
    //   + (A12' A11 - A12 A11' + A12 A11 A22 - A12^2 A21) u = 0
    let d12 = a12.derivative();
    let c2 = a12.clone();
    let c1 = a12.mul(&a11.add(a22)).add(&d12).neg();
    let c0 = d12
        .mul(a11)
        .sub(&a12.mul(&a11.derivative()))
        .add(&a12.mul(a11).mul(a22))
        .sub(&a12.mul(a12).mul(a21));
    Some((DifferentialOperator::new([(2, c2), (1, c1), (0, c0)]), cv))
}

impl ConnectionSpec {
    pub fn rank(&self) -> usize {
        match self {
            ConnectionSpec::Operator(op) => op.order(),
            ConnectionSpec::System(a) => a.len(),
            ConnectionSpec::FormalSum(ft) => ft.rank(),
        }
    }

    pub fn operator(text: &str) -> Result<ConnectionSpec, FormalError> {
        Ok(ConnectionSpec::Operator(DifferentialOperator::parse(text)?))
    }

    /// The dual connection `u' = -A^T u`; systems only.
    pub fn dual(&self) -> Option<ConnectionSpec> {
        match self {
            ConnectionSpec::System(a) => {
                let n = a.len();
                Some(ConnectionSpec::System(
                    (0..n).map(|i| (0..n).map(|j| a[j][i].neg()).collect()).collect(),
                ))
            }
            ConnectionSpec::FormalSum(ft) => Some(ConnectionSpec::FormalSum(FormalType {
                items: ft
                    .items
                    .iter()
                    .map(|it| FormalItem {
                        factor: it.factor.neg(),
                        rank: it.rank,
                        exponents: it.exponents.iter().map(|z| -z).collect(),
                    })
                    .collect(),
                ramification: ft.ramification,
            })),
            ConnectionSpec::Operator(_) => None,
        }
    }
}

fn check_square(a: &[Vec<LaurentPoly>]) -> Result<(), FormalError> {
    if a.iter().any(|row| row.len() != a.len()) {
        return Err(FormalError::NotSquare(format!("{} rows", a.len())));
    }
    Ok(())
}

/// Rank one: `phi` is the exact integral of the polar part of `-a_0/a_1` below
/// `x^-1`, and the residue is the regular exponent.
pub fn formal_type_rank1(a1: &LaurentPoly, a0: &LaurentPoly) -> FormalType {
    let f = a0.neg().div_series(a1, -1);
    let phi = ExponentialFactor::new(
        1,
        f.terms()
            .iter()
            .filter(|(&k, _)| k <= -2)
            .map(|(&k, c)| (k + 1, c / &CRat::from_int(k + 1))),
    );
    let lambda = f.coeff(-1).to_c64();
    FormalType {
        items: vec![FormalItem { factor: phi, rank: 1, exponents: vec![normalize_exponent(lambda)] }],
        ramification: 1,
    }
}

/// Scalar operator(s) whose formal solutions describe the connection.
pub fn scalar_solutions(c: &ConnectionSpec) -> Result<ScalarForm, FormalError> {
    match c {
        ConnectionSpec::Operator(op) => match op.order() {
            0 => Err(FormalError::ZeroOperator),
            1 | 2 => Ok(ScalarForm::Single(decompose_operator(op)?, None)),
            n => Err(FormalError::RankTooLarge(n)),
        },
        ConnectionSpec::System(a) => {
            check_square(a)?;
            match a.len() {
                1 => {
                    let op = DifferentialOperator::new([
                        (1, LaurentPoly::constant(CRat::one())),
                        (0, a[0][0].neg()),
                    ]);
                    Ok(ScalarForm::Single(decompose_operator(&op)?, None))
                }
                2 => match system_to_operator(a) {
                    Some((op, cv)) => Ok(ScalarForm::Single(decompose_operator(&op)?, Some(cv))),
                    None => {
                        let mut parts = Vec::new();
                        for i in 0..2 {
                            let op = DifferentialOperator::new([
                                (1, LaurentPoly::constant(CRat::one())),
                                (0, a[i][i].neg()),
                            ]);
                            parts.push(decompose_operator(&op)?);
                        }
                        Ok(ScalarForm::Diagonal(parts))
                    }
                },
                n => Err(FormalError::RankTooLarge(n)),
            }
        }
        ConnectionSpec::FormalSum(ft) => {
            let sys = ft.to_system()?;
            if sys.len() > 2 {
                return Err(FormalError::RankTooLarge(sys.len()));
            }
            scalar_solutions(&ConnectionSpec::System(sys))
        }
    }
}

#[derive(Debug, Clone)]
pub enum ScalarForm {
    /// A single scalar operator; for systems, the cyclic vector used.
    Single(FormalSolutions, Option<CyclicVector>),
    /// A diagonal system, one rank-1 operator per coordinate.
    Diagonal(Vec<FormalSolutions>),
}

impl ScalarForm {
    pub fn formal_type(&self) -> FormalType {
        match self {
            ScalarForm::Single(sol, _) => FormalType::from_solutions(sol),
            ScalarForm::Diagonal(parts) => {
                let mut items: Vec<FormalItem> = Vec::new();
                for sol in parts {
                    for it in FormalType::from_solutions(sol).items {
                        match items.iter_mut().find(|x| x.factor == it.factor) {
                            Some(x) => {
                                x.rank += it.rank;
                                x.exponents.extend(it.exponents);
                            }
                            None => items.push(it),
                        }
                    }
                }
                let ramification = parts.iter().map(|p| p.ramification).max().unwrap_or(1);
                FormalType { items, ramification }
            }
        }
    }
}

/// The formal type of a connection of rank at most 2, or of a formal sum.
pub fn formal_type(c: &ConnectionSpec) -> Result<FormalType, FormalError> {
    match c {
        ConnectionSpec::FormalSum(ft) => Ok(ft.normalized()),
        ConnectionSpec::Operator(op) if op.order() == 1 => {
            Ok(formal_type_rank1(&op.coeff(1), &op.coeff(0)))
        }
        ConnectionSpec::System(a) if a.len() == 1 && a[0].len() == 1 => {
            Ok(formal_type_rank1(&LaurentPoly::constant(CRat::one()), &a[0][0].neg()))
        }
        _ => Ok(scalar_solutions(c)?.formal_type()),
    }
}

// ---- JSON forms -------------------------------------------------------------

/// `{"operator": {"1": "x^3", "0": "1"}}` or `{"system": [["0","x^-2"],["1","0"]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectionJson {
    Operator(BTreeMap<String, String>),
    System(Vec<Vec<String>>),
    Formal(FormalTypeJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalItemJson {
    pub factor: FactorJson,
    pub text: String,
    pub rank: usize,
    pub exponents: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalTypeJson {
    pub ramification: u32,
    pub items: Vec<FormalItemJson>,
}

impl FormalType {
    pub fn to_json(&self) -> FormalTypeJson {
        FormalTypeJson {
            ramification: self.ramification,
            items: self
                .items
                .iter()
                .map(|it| FormalItemJson {
                    factor: it.factor.to_json(),
                    text: it.factor.to_string(),
                    rank: it.rank,
                    exponents: it.exponents.iter().map(|z| (z.re, z.im)).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &FormalTypeJson) -> Result<FormalType, FormalError> {
        let mut items = Vec::new();
        for it in &j.items {
            if it.exponents.len() != it.rank {
                return Err(FormalError::Json(format!(
                    "item '{}' has rank {} but {} exponents",
                    it.text,
                    it.rank,
                    it.exponents.len()
                )));
            }
            items.push(FormalItem {
                factor: ExponentialFactor::from_json(&it.factor)?,
                rank: it.rank,
                exponents: it.exponents.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
            });
        }
        for (a, it) in items.iter().enumerate() {
            if items[..a].iter().any(|o| o.factor.pole_part() == it.factor.pole_part()) {
                return Err(FormalError::Json("formal sum items need distinct pole parts".into()));
            }
        }
        Ok(FormalType { items, ramification: j.ramification.max(1) })
    }
}

impl ConnectionJson {
    pub fn to_spec(&self) -> Result<ConnectionSpec, FormalError> {
        match self {
            ConnectionJson::Operator(map) => {
                let mut coeffs = Vec::new();
                for (k, v) in map {
                    let i: usize = k
                        .parse()
                        .map_err(|_| FormalError::Json(format!("bad derivative order '{k}'")))?;
                    coeffs.push((i, LaurentPoly::parse(v)?));
                }
                Ok(ConnectionSpec::Operator(DifferentialOperator::new(coeffs)))
            }
            ConnectionJson::System(rows) => {
                let a = rows
                    .iter()
                    .map(|r| r.iter().map(|s| LaurentPoly::parse(s)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                check_square(&a)?;
                Ok(ConnectionSpec::System(a))
            }
            ConnectionJson::Formal(ft) => Ok(ConnectionSpec::FormalSum(FormalType::from_json(ft)?)),
        }
    }
}

/// Is the slope list `{0}`-only (regular singular)?
pub fn is_regular(np: &NewtonPolygon) -> bool {
    np.slopes.iter().all(|s| s.slope.is_zero())
}

/// Largest slope, 0 for regular operators.
pub fn irregularity(np: &NewtonPolygon) -> BigRational {
    np.slopes
        .iter()
        .map(|s| s.slope.clone())
        .max()
        .unwrap_or_else(BigRational::zero)
}

//! Stokes directions, curves, lines and sector covers.
//!
//! Angles are carried as `f64` together with an optional exact value `q`
//! meaning `q * pi`. Exactness survives sums, differences and halving, so sector
//! covers built from exact lines are exact as well.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use num::complex::Complex64;
use num::{BigRational, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::factors::{ExponentialFactor, FactorError, Polar};
use crate::rational::{rat, rat_int};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("factor difference has no pole, so it has no Stokes directions")]
    NoPole,
    #[error("Stokes curve lost at rho = {rho}")]
    RootLost { rho: f64 },
    #[error("at least one Stokes line is required")]
    NoLines,
    #[error("lines must be distinct, sorted and inside [0, 2pi): {0}")]
    BadLines(String),
    #[error("invalid radius grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// An angle, optionally known exactly as a rational multiple of pi.
#[derive(Debug, Clone)]
pub struct Direction {
    pub angle: f64,
    pub exact: Option<BigRational>,
}

fn q_to_angle(q: &BigRational) -> f64 {
    q.to_f64().unwrap() * PI
}

impl Direction {
    pub fn from_pi_multiple(q: BigRational) -> Self {
        Direction { angle: q_to_angle(&q), exact: Some(q) }
    }

    pub fn approx(angle: f64) -> Self {
        Direction { angle, exact: None }
    }

    pub fn zero() -> Self {
        Direction::from_pi_multiple(BigRational::zero())
    }

    pub fn turns(k: i64) -> Self {
        Direction::from_pi_multiple(rat_int(2 * k))
    }

    fn combine(&self, other: &Direction, f: fn(f64, f64) -> f64, g: fn(&BigRational, &BigRational) -> BigRational) -> Direction {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Direction::from_pi_multiple(g(a, b)),
            _ => Direction::approx(f(self.angle, other.angle)),
        }
    }

    pub fn add(&self, other: &Direction) -> Direction {
        self.combine(other, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &Direction) -> Direction {
        self.combine(other, |a, b| a - b, |a, b| a - b)
    }

    pub fn scale(&self, k: &BigRational) -> Direction {
        match &self.exact {
            Some(q) => Direction::from_pi_multiple(q * k),
            None => Direction::approx(self.angle * k.to_f64().unwrap()),
        }
    }

    pub fn mid(&self, other: &Direction) -> Direction {
        self.add(other).scale(&rat(1, 2))
    }

    /// Representative in `[0, 2 pi * turns)`.
    pub fn reduced(&self, turns: u32) -> Direction {
        let period = rat_int(2 * turns as i64);
        match &self.exact {
            Some(q) => {
                let k = (q / &period).floor();
                Direction::from_pi_multiple(q - k * &period)
            }
            None => {
                let p = 2.0 * PI * turns as f64;
                let mut a = self.angle.rem_euclid(p);
                if a >= p {
                    a -= p;
                }
                Direction::approx(a)
            }
        }
    }

    /// `"pi/2"`, `"3pi/2"`, `"-pi/4"`, `"0"` when exact.
    pub fn pi_string(&self) -> Option<String> {
        self.exact.as_ref().map(|q| {
            if q.is_zero() {
                return "0".to_string();
            }
            let n = q.numer();
            let d = q.denom();
            let num = if n.abs() == 1.into() {
                if n.is_negative() { "-pi".to_string() } else { "pi".to_string() }
            } else {
                format!("{n}pi")
            };
            if d == &1.into() { num } else { format!("{num}/{d}") }
        })
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

impl PartialEq for Direction {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Direction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Some(a.cmp(b)),
            _ => self.angle.partial_cmp(&other.angle),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_string() {
            Some(s) => write!(f, "{s}"),
            None => write!(f, "{}", self.angle),
        }
    }
}

/// The arithmetic progression `base + k * step` of Stokes directions of `delta`.
struct Progression {
    base: Direction,
    step: Direction,
}

fn progression(delta: &ExponentialFactor) -> Result<Progression, GeometryError> {
    let pp = delta.principal_part();
    if pp.order.is_zero() {
        return Err(GeometryError::NoPole);
    }
    let p = pp.order;
    let inv_p = p.recip();
    let arg = match pp.leading.arg_over_pi() {
        Some(q) => Direction::from_pi_multiple(q),
        None => Direction::approx(pp.leading.to_c64().arg()),
    };
    let base = arg.sub(&Direction::from_pi_multiple(rat(1, 2))).scale(&inv_p);
    let step = Direction::from_pi_multiple(inv_p);
    Ok(Progression { base, step })
}

impl Progression {
    fn nth(&self, k: i64) -> Direction {
        self.base.add(&self.step.scale(&rat_int(k)))
    }

    /// All members in the closed interval `[lo, hi]`.
    fn within(&self, lo: &Direction, hi: &Direction) -> Vec<Direction> {
        let kmin = match (&self.base.exact, &lo.exact, &self.step.exact) {
            (Some(b), Some(l), Some(s)) => ((l - b) / s).ceil().to_integer().to_i64().unwrap(),
            _ => ((lo.angle - self.base.angle) / self.step.angle - 1e-12).ceil() as i64,
        };
        let mut out = Vec::new();
        let mut k = kmin;
        loop {
            let d = self.nth(k);
            if d < *lo {
                k += 1;
                continue;
            }
            if d > *hi {
                break;
            }
            out.push(d);
            k += 1;
        }
        out
    }

    /// Members in the half-open window `[lo, lo + width)`.
    fn window(&self, lo: &Direction, width: &Direction) -> Vec<Direction> {
        let hi = lo.add(width);
        let mut v = self.within(lo, &hi);
        v.retain(|d| *d < hi);
        v
    }
}

/// Stokes directions of `delta` in `[0, 2 pi)`, evaluated on the principal sheet.
pub fn stokes_directions(delta: &ExponentialFactor) -> Result<Vec<Direction>, GeometryError> {
    progression(delta).map(|p| p.window(&Direction::zero(), &Direction::turns(1)))
}

/// Stokes directions on the `ram`-fold cover `[0, 2 pi ram)`.
pub fn stokes_directions_on_cover(delta: &ExponentialFactor) -> Result<Vec<Direction>, GeometryError> {
    let m = delta.ram() as i64;
    progression(delta).map(|p| p.window(&Direction::zero(), &Direction::turns(m)))
}

/// Stokes directions of `delta` (any branch) in the closed interval `[lo, hi]`.
pub fn stokes_directions_between(
    delta: &ExponentialFactor,
    lo: &Direction,
    hi: &Direction,
) -> Result<Vec<Direction>, GeometryError> {
    progression(delta).map(|p| p.within(lo, hi))
}

/// Is `q` congruent to `1/2` modulo 1 (so that `cos(q pi) = 0`)?
fn is_half_odd(q: &BigRational) -> bool {
    (q - rat(1, 2)).is_integer()
}

/// Sign of `cos(q pi)` for exact `q` with `cos(q pi) != 0`.
fn cos_sign_exact(q: &BigRational) -> i8 {
    let two = rat_int(2);
    let r = q - (q / &two).floor() * &two; // [0, 2)
    if r < rat(1, 2) || r > rat(3, 2) { 1 } else { -1 }
}

/// Asymptotic sign of `Re delta(rho e^{i theta})` as `rho -> 0`, decided term by
/// term from the most singular one. `theta` is not reduced: the branch of
/// `x^(1/m)` follows it.
pub fn dominance(delta: &ExponentialFactor, theta: &Direction) -> i8 {
    let m = delta.ram() as i64;
    for (&k, c) in delta.terms().range(..0) {
        let scale = rat(k, m);
        match (c.arg_over_pi(), &theta.exact) {
            (Some(a), Some(t)) => {
                let q = a + t * &scale;
                if is_half_odd(&q) {
                    continue;
                }
                return cos_sign_exact(&q);
            }
            _ => {
                let w = c.to_c64() * Complex64::from_polar(1.0, theta.angle * k as f64 / m as f64);
                let cn = c.to_c64().norm();
                if w.re.abs() <= 1e-12 * cn {
                    continue;
                }
                return if w.re > 0.0 { 1 } else { -1 };
            }
        }
    }
    0
}

/// One tracked branch of `{Re delta = 0}`.
#[derive(Debug, Clone)]
pub struct StokesCurve {
    pub direction: Direction,
    /// `(rho, theta)` in the order of the input grid.
    pub points: Vec<(f64, f64)>,
}

const CURVE_TOL: f64 = 1e-12;

/// Tracks each Stokes curve of `delta` across the radii in `rho_grid`.
///
/// Tracking starts at the smallest radius, seeded at the Stokes direction, and
/// continues outward; each step brackets the root within `0.45 pi / p` of the
/// previous one and bisects.
pub fn stokes_curve(delta: &ExponentialFactor, rho_grid: &[f64]) -> Result<Vec<StokesCurve>, GeometryError> {
    if rho_grid.is_empty() || rho_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(GeometryError::BadGrid("radii must be positive and finite".into()));
    }
    let dirs = stokes_directions(delta)?;
    let p = delta.principal_part().order.to_f64().unwrap();
    let w = 0.45 * PI / p;
    let mut order: Vec<usize> = (0..rho_grid.len()).collect();
    order.sort_by(|&a, &b| rho_grid[a].total_cmp(&rho_grid[b]));
    let f = |rho: f64, th: f64| -> Result<f64, GeometryError> {
        Ok(delta.evaluate_polar(Polar::new(rho, th))?.re)
    };
    let mut curves = Vec::new();
    for d in dirs {
        let mut theta = d.angle;
        let mut pts = vec![(0.0, 0.0); rho_grid.len()];
        for &idx in &order {
            let rho = rho_grid[idx];
            let (mut a, mut b) = (theta - w, theta + w);
            let (mut fa, fb) = (f(rho, a)?, f(rho, b)?);
            if fa == 0.0 {
                b = a;
            } else if fb == 0.0 {
                a = b;
            } else if fa.signum() == fb.signum() {
                return Err(GeometryError::RootLost { rho });
            }
            while b - a > CURVE_TOL {
                let mid = 0.5 * (a + b);
                let fm = f(rho, mid)?;
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                } else if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            theta = 0.5 * (a + b);
            pts[idx] = (rho, theta);
        }
        curves.push(StokesCurve { direction: d, points: pts });
    }
    Ok(curves)
}

/// An open arc `(lo, hi)` of directions, possibly extending past `2 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub lo: Direction,
    pub hi: Direction,
}

impl Sector {
    pub fn new(lo: Direction, hi: Direction) -> Self {
        Sector { lo, hi }
    }

    pub fn from_angles(lo: f64, hi: f64) -> Self {
        Sector::new(Direction::approx(lo), Direction::approx(hi))
    }

    pub fn width(&self) -> f64 {
        self.hi.angle - self.lo.angle
    }

    pub fn mid(&self) -> Direction {
        self.lo.mid(&self.hi)
    }

    /// Membership of some `2 pi` translate of `theta` in the open arc.
    pub fn contains(&self, theta: &Direction) -> bool {
        let k = ((self.lo.angle - theta.angle) / (2.0 * PI)).floor() as i64;
        (k..=k + 2).any(|j| {
            let t = theta.add(&Direction::turns(j));
            t > self.lo && t < self.hi
        })
    }

    pub fn shifted(&self, turns: i64) -> Sector {
        let s = Direction::turns(turns);
        Sector::new(self.lo.add(&s), self.hi.add(&s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EpsPolicy {
    /// `epsilon = min gap / 4`.
    QuarterMinGap,
    Fixed(f64),
}

fn check_lines(lines: &[Direction]) -> Result<(), GeometryError> {
    if lines.is_empty() {
        return Err(GeometryError::NoLines);
    }
    let two_pi = Direction::turns(1);
    for w in lines.windows(2) {
        if w[0] >= w[1] {
            return Err(GeometryError::BadLines(format!("{} then {}", w[0], w[1])));
        }
    }
    if lines[0] < Direction::zero() || lines[lines.len() - 1] >= two_pi {
        return Err(GeometryError::BadLines("outside [0, 2pi)".into()));
    }
    Ok(())
}

/// Cyclic midpoint between `L_k` and `L_{k+1}` for `k` in `0..n` (0-based);
/// `L_n = L_0 + 2 pi`.
pub fn cyclic_mid(lines: &[Direction], k: usize) -> Direction {
    let n = lines.len();
    let next = if k + 1 < n { lines[k + 1].clone() } else { lines[0].add(&Direction::turns(1)) };
    lines[k].mid(&next)
}

fn min_gap(lines: &[Direction]) -> Direction {
    let n = lines.len();
    (0..n)
        .map(|k| {
            let next = if k + 1 < n { lines[k + 1].clone() } else { lines[0].add(&Direction::turns(1)) };
            next.sub(&lines[k])
        })
        .min_by(|a, b| a.partial_cmp(b).unwrap())
        .unwrap()
}

/// The epsilon used by `sector_cover`.
pub fn cover_epsilon(lines: &[Direction], policy: &EpsPolicy) -> Direction {
    match policy {
        EpsPolicy::QuarterMinGap => min_gap(lines).scale(&rat(1, 4)),
        EpsPolicy::Fixed(e) => Direction::approx(*e),
    }
}

/// `S_k = (mid(L_{k-1}, L_k) - eps, mid(L_k, L_{k+1}) + eps)`, cyclically, with
/// `L_0 = L_N - 2 pi`. A single line gets one sector of width `2 pi + 2 eps`
/// that overlaps its own translate.
pub fn sector_cover(lines: &[Direction], policy: &EpsPolicy) -> Result<Vec<Sector>, GeometryError> {
    check_lines(lines)?;
    let n = lines.len();
    let eps = cover_epsilon(lines, policy);
    if eps.angle <= 0.0 || eps.angle * 2.0 >= min_gap(lines).angle {
        return Err(GeometryError::BadLines(format!("epsilon {eps} does not fit between lines")));
    }
    let back = Direction::turns(-1);
    Ok((0..n)
        .map(|k| {
            let left = if k == 0 { cyclic_mid(lines, n - 1).add(&back) } else { cyclic_mid(lines, k - 1) };
            let right = cyclic_mid(lines, k);
            Sector::new(left.sub(&eps), right.add(&eps))
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct PairData {
    /// 0-based factor indices, `i < j`.
    pub i: usize,
    pub j: usize,
    pub delta: ExponentialFactor,
    pub directions: Vec<Direction>,
}

#[derive(Debug, Clone)]
pub struct StokesLine {
    pub direction: Direction,
    /// Pairs (0-based) having this line as a Stokes direction.
    pub pairs: Vec<(usize, usize)>,
}

/// Lines and sector cover of a family of factors, on the base window `[0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct StokesDiagram {
    pub factors: Vec<ExponentialFactor>,
    pub pairs: Vec<PairData>,
    pub lines: Vec<StokesLine>,
    pub cover: Vec<Sector>,
    pub eps: Option<Direction>,
}

fn same_angle(a: &Direction, b: &Direction) -> bool {
    match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => x == y,
        _ => (a.angle - b.angle).abs() < 1e-12,
    }
}

impl StokesDiagram {
    pub fn new(factors: &[ExponentialFactor]) -> Result<Self, GeometryError> {
        StokesDiagram::with_policy(factors, &EpsPolicy::QuarterMinGap)
    }

    pub fn with_policy(factors: &[ExponentialFactor], policy: &EpsPolicy) -> Result<Self, GeometryError> {
        let mut pairs = Vec::new();
        let mut lines: Vec<StokesLine> = Vec::new();
        for i in 0..factors.len() {
            for j in i + 1..factors.len() {
                let delta = factors[i].sub(&factors[j]);
                if !delta.has_pole() {
                    continue;
                }
                let directions = stokes_directions(&delta)?;
                for d in &directions {
                    match lines.iter_mut().find(|l| same_angle(&l.direction, d)) {
                        Some(l) => l.pairs.push((i, j)),
                        None => lines.push(StokesLine { direction: d.clone(), pairs: vec![(i, j)] }),
                    }
                }
                pairs.push(PairData { i, j, delta, directions });
            }
        }
        lines.sort_by(|a, b| a.direction.partial_cmp(&b.direction).unwrap());
        let dirs: Vec<Direction> = lines.iter().map(|l| l.direction.clone()).collect();
        let (cover, eps) = if dirs.is_empty() {
            (vec![], None)
        } else {
            (sector_cover(&dirs, policy)?, Some(cover_epsilon(&dirs, policy)))
        };
        Ok(StokesDiagram { factors: factors.to_vec(), pairs, lines, cover, eps })
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn line_directions(&self) -> Vec<Direction> {
        self.lines.iter().map(|l| l.direction.clone()).collect()
    }

    /// Midpoint between line `k` and the next one counterclockwise (0-based).
    pub fn mid(&self, k: usize) -> Direction {
        cyclic_mid(&self.line_directions(), k)
    }

    /// `S_k ∩ S_{k+1}` (0-based, cyclic; the last one meets `S_1 + 2 pi`).
    pub fn overlap(&self, k: usize) -> Sector {
        let m = self.mid(k);
        let eps = self.eps.clone().unwrap();
        Sector::new(m.sub(&eps), m.add(&eps))
    }

    /// Same lines (exactly or within `1e-9`).
    pub fn same_lines(&self, other: &StokesDiagram) -> bool {
        self.lines.len() == other.lines.len()
            && self
                .lines
                .iter()
                .zip(&other.lines)
                .all(|(a, b)| (a.direction.angle - b.direction.angle).abs() < 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> ExponentialFactor {
        ExponentialFactor::parse(s).unwrap()
    }

    fn strings(d: &[Direction]) -> Vec<String> {
        d.iter().map(|x| x.pi_string().unwrap()).collect()
    }

    #[test]
    fn direction_examples() {
        assert_eq!(strings(&stokes_directions(&f("1/x")).unwrap()), ["pi/2", "3pi/2"]);
        assert_eq!(strings(&stokes_directions(&f("i*x^-2")).unwrap()), ["0", "pi/2", "pi", "3pi/2"]);
        assert_eq!(strings(&stokes_directions(&f("x^(-3/2)")).unwrap()), ["pi/3", "pi", "5pi/3"]);
        assert_eq!(stokes_directions_on_cover(&f("x^(-3/2)")).unwrap().len(), 6);
        assert_eq!(stokes_directions(&f("3 + x")), Err(GeometryError::NoPole));
    }

    #[test]
    fn inexact_leading_coefficient() {
        let d = stokes_directions(&f("(2+1*i)*x^-3")).unwrap();
        assert_eq!(d.len(), 6);
        assert!(d.iter().all(|x| !x.is_exact()));
        for w in d.windows(2) {
            assert!((w[1].angle - w[0].angle - PI / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dominance_examples() {
        let one_over_x = f("1/x");
        assert_eq!(dominance(&one_over_x, &Direction::zero()), 1);
        assert_eq!(dominance(&one_over_x, &Direction::from_pi_multiple(rat(1, 2))), 0);
        let two = f("x^-2 + i*x^-1");
        assert_eq!(dominance(&two, &Direction::from_pi_multiple(rat(1, 4))), 1);
        // same decision from an inexact angle
        assert_eq!(dominance(&two, &Direction::approx(PI / 4.0)), 1);
    }

    #[test]
    fn curve_examples() {
        let c = stokes_curve(&f("1/x"), &[0.1, 0.05, 0.01]).unwrap();
        for curve in &c {
            for &(_, th) in &curve.points {
                assert!((th - curve.direction.angle).abs() < 1e-11);
            }
        }
        let c = stokes_curve(&f("1/x - 1"), &[0.1]).unwrap();
        let expected = 0.1f64.acos();
        assert!((c[0].points[0].1 - expected).abs() < 1e-11);
        assert!((c[1].points[0].1 - (2.0 * PI - expected)).abs() < 1e-11);
        let near = stokes_curve(&f("1/x - 1"), &[1e-6]).unwrap();
        assert!((near[0].points[0].1 - PI / 2.0).abs() < 1e-5);
    }

    #[test]
    fn cover_examples() {
        let lines = vec![Direction::from_pi_multiple(rat(1, 2)), Direction::from_pi_multiple(rat(3, 2))];
        let cover = sector_cover(&lines, &EpsPolicy::QuarterMinGap).unwrap();
        assert_eq!(cover[0], Sector::new(Direction::from_pi_multiple(rat(-1, 4)), Direction::from_pi_multiple(rat(5, 4))));
        assert_eq!(cover[1], Sector::new(Direction::from_pi_multiple(rat(3, 4)), Direction::from_pi_multiple(rat(9, 4))));
        let d = StokesDiagram::new(&[f("1/x"), ExponentialFactor::zero()]).unwrap();
        assert_eq!(d.overlap(0), Sector::new(Direction::from_pi_multiple(rat(3, 4)), Direction::from_pi_multiple(rat(5, 4))));

        let three = stokes_directions(&f("x^(-3/2)")).unwrap();
        let cover = sector_cover(&three, &EpsPolicy::QuarterMinGap).unwrap();
        for s in &cover {
            assert!((s.width() - PI).abs() < 1e-12);
        }
        assert_eq!(sector_cover(&[], &EpsPolicy::QuarterMinGap), Err(GeometryError::NoLines));
    }

    #[test]
    fn single_line_cover() {
        let lines = stokes_directions(&f("x^(-1/2)")).unwrap();
        assert_eq!(lines.len(), 1);
        let cover = sector_cover(&lines, &EpsPolicy::QuarterMinGap).unwrap();
        assert_eq!(cover.len(), 1);
        assert!((cover[0].width() - 3.0 * PI).abs() < 1e-12);
        assert!(cover[0].contains(&lines[0]));
    }
}

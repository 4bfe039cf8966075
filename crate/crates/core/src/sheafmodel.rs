//! Sublevel families `{Re(t + phi) < c}`, morphisms between their restrictions
//! to sectors, and the constructible description attached to `e^phi`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num::complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::factors::{ExponentialFactor, Polar};
use crate::geometry::{dominance, stokes_directions_between, Direction, Sector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SheafError {
    #[error("factor has no pole; the regular case is not modelled")]
    NoPole,
}

/// A point of `C`, or the point at infinity of `P^1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Finite(Complex64),
    Infinity,
}

/// The family `c -> {(x, t) : x != 0, Re(t + phi(x)) < c}`, kept as `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SublevelFamily {
    pub factor: ExponentialFactor,
}

impl SublevelFamily {
    pub fn new(factor: ExponentialFactor) -> Self {
        SublevelFamily { factor }
    }

    pub fn contains(&self, c: f64, x: Point, t: Point) -> bool {
        sublevel_contains(&self.factor, c, x, t)
    }
}

/// `x != 0`, both finite, and `Re(t + phi(x)) < c` (principal branch when ramified).
pub fn sublevel_contains(phi: &ExponentialFactor, c: f64, x: Point, t: Point) -> bool {
    let (Point::Finite(x), Point::Finite(t)) = (x, t) else {
        return false;
    };
    if x == Complex64::new(0.0, 0.0) {
        return false;
    }
    match phi.evaluate(x) {
        Ok(v) => (t + v).re < c,
        Err(_) => false,
    }
}

/// Whether `Re(source - target)` stays bounded above on the germ of `sector` at 0,
/// decided from the lexicographic dominance on the closed arc.
pub fn hom_exists(source: &ExponentialFactor, target: &ExponentialFactor, sector: &Sector) -> bool {
    let delta = source.sub(target);
    if !delta.has_pole() {
        return true;
    }
    let mut critical = vec![sector.lo.clone()];
    critical.extend(stokes_directions_between(&delta, &sector.lo, &sector.hi).unwrap());
    critical.push(sector.hi.clone());
    let mids: Vec<Direction> = critical.windows(2).map(|w| w[0].mid(&w[1])).collect();
    critical.iter().chain(&mids).all(|th| dominance(&delta, th) <= 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShapeTag {
    #[serde(rename = "diag")]
    Diag,
    #[serde(rename = "upper-like")]
    UpperLike,
    #[serde(rename = "lower-like")]
    LowerLike,
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "other")]
    Other,
}

impl ShapeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShapeTag::Diag => "diag",
            ShapeTag::UpperLike => "upper-like",
            ShapeTag::LowerLike => "lower-like",
            ShapeTag::Full => "full",
            ShapeTag::Other => "other",
        }
    }
}

/// Allowed matrix entries `(i, j)` (1-based): a morphism from summand `j` to
/// summand `i` exists on the sector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HomShape {
    pub n: usize,
    pub allowed: BTreeSet<(usize, usize)>,
    pub tag: ShapeTag,
}

impl HomShape {
    pub fn from_allowed(n: usize, allowed: BTreeSet<(usize, usize)>) -> Self {
        let off: Vec<&(usize, usize)> = allowed.iter().filter(|(i, j)| i != j).collect();
        let tag = if off.is_empty() {
            ShapeTag::Diag
        } else if off.len() == n * (n - 1) {
            ShapeTag::Full
        } else if off.iter().all(|(i, j)| i < j) {
            ShapeTag::UpperLike
        } else if off.iter().all(|(i, j)| i > j) {
            ShapeTag::LowerLike
        } else {
            ShapeTag::Other
        };
        HomShape { n, allowed, tag }
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.allowed.contains(&(i, j))
    }

    /// Diagonal entries first, then off-diagonal ones in row order.
    pub fn allowed_list(&self) -> Vec<[usize; 2]> {
        let diag = self.allowed.iter().filter(|(i, j)| i == j);
        let off = self.allowed.iter().filter(|(i, j)| i != j);
        diag.chain(off).map(|&(i, j)| [i, j]).collect()
    }

    pub fn is_closed_under_composition(&self) -> bool {
        self.allowed.iter().all(|&(i, j)| {
            self.allowed
                .iter()
                .filter(|&&(j2, _)| j2 == j)
                .all(|&(_, k)| self.allowed.contains(&(i, k)))
        })
    }
}

pub fn hom_shape(factors: &[ExponentialFactor], sector: &Sector) -> HomShape {
    let n = factors.len();
    let mut allowed = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || hom_exists(&factors[j], &factors[i], sector) {
                allowed.insert((i + 1, j + 1));
            }
        }
    }
    HomShape::from_allowed(n, allowed)
}

/// Sampling grid of the brute-force oracle.
#[derive(Debug, Clone)]
pub struct BruteGrid {
    /// Radii in `(0, rho_max]`.
    pub radii: Vec<f64>,
    /// Directions per radius, endpoints of the closed arc included.
    pub n_theta: usize,
    /// Ladder of `c' - c`, in units of the sampled sup at the outermost radius.
    pub increments: Vec<f64>,
}

impl Default for BruteGrid {
    fn default() -> Self {
        BruteGrid {
            radii: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            n_theta: 256,
            increments: vec![1.0, 10.0, 100.0, 1000.0],
        }
    }
}

/// Sampled version of `hom_exists`.
///
/// For each radius the sup of `Re(source - target)` over the arc is sampled.
/// The inclusion `{Re(t + source) < c} ⊂ {Re(t + target) < c'}` holds at a radius
/// once `c' - c` reaches that sup. Inclusions stabilize when a rung of the ladder
/// no higher than the second covers every radius; a pole term with positive real
/// part forces the required rung to climb by a factor `rho^-p` instead.
pub fn hom_exists_bruteforce(
    source: &ExponentialFactor,
    target: &ExponentialFactor,
    sector: &Sector,
    grid: &BruteGrid,
) -> bool {
    let delta = source.sub(target);
    let (lo, hi) = (sector.lo.angle, sector.hi.angle);
    let n = grid.n_theta.max(2);
    let sup = |rho: f64| -> f64 {
        (0..n)
            .map(|k| {
                let th = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                delta.evaluate_polar(Polar::new(rho, th)).unwrap().re
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let rho_max = grid.radii.iter().cloned().fold(0.0, f64::max);
    let rho_min = grid.radii.iter().cloned().fold(f64::INFINITY, f64::min);
    // rounding floor: a vanishing real part evaluates to ~1e-16 of the magnitude
    let magnitude: f64 = delta
        .terms()
        .iter()
        .map(|(&k, c)| c.to_c64().norm() * rho_min.powf(k as f64 / delta.ram() as f64))
        .sum();
    let unit = sup(rho_max).max(1e-9 * magnitude).max(f64::MIN_POSITIVE);
    let rung = |rho: f64| grid.increments.iter().position(|inc| sup(rho) <= inc * unit);
    grid.radii.iter().all(|&rho| matches!(rung(rho), Some(r) if r <= 1))
}

/// Strata appearing in the description of `e^phi`.
#[derive(Debug, Clone, PartialEq)]
pub enum Stratum {
    /// The sublevel family `C_{Re(t + phi) < ?}`.
    Sublevel(SublevelFamily),
    /// `{x = 0, t != infinity}`.
    ZeroFinite,
    /// `{x != 0, t = infinity}`.
    NonzeroInfinite,
    /// `{x != 0, t != infinity}`.
    NonzeroFinite,
}

impl Stratum {
    pub fn name(&self) -> &'static str {
        match self {
            Stratum::Sublevel(_) => "sublevel",
            Stratum::ZeroFinite => "x=0,t!=inf",
            Stratum::NonzeroInfinite => "x!=0,t=inf",
            Stratum::NonzeroFinite => "x!=0,t!=inf",
        }
    }

    /// Pointwise membership; for the sublevel family at level `c`.
    pub fn contains(&self, c: f64, x: Point, t: Point) -> bool {
        let zero = |p: Point| p == Point::Finite(Complex64::new(0.0, 0.0));
        match self {
            Stratum::Sublevel(s) => s.contains(c, x, t),
            Stratum::ZeroFinite => zero(x) && t != Point::Infinity,
            Stratum::NonzeroInfinite => !zero(x) && x != Point::Infinity && t == Point::Infinity,
            Stratum::NonzeroFinite => !zero(x) && x != Point::Infinity && t != Point::Infinity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionEntry {
    pub degree: u32,
    pub stratum: Stratum,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructibleDescription {
    pub factor: ExponentialFactor,
    pub entries: Vec<DescriptionEntry>,
    /// Ramified input: degree-1 strata are reported untwisted.
    pub ramified: bool,
}

impl ConstructibleDescription {
    pub fn degree(&self, k: u32) -> Vec<&DescriptionEntry> {
        self.entries.iter().filter(|e| e.degree == k).collect()
    }
}

/// Degree 0: the sublevel family of `t + phi`; degree 1: `{x = 0, t finite}` and
/// `{x != 0, t = infinity}`, each of rank 1; nothing in other degrees.
pub fn phi_exponential(phi: &ExponentialFactor) -> Result<ConstructibleDescription, SheafError> {
    if !phi.has_pole() {
        return Err(SheafError::NoPole);
    }
    let entries = vec![
        DescriptionEntry { degree: 0, stratum: Stratum::Sublevel(SublevelFamily::new(phi.clone())), rank: 1 },
        DescriptionEntry { degree: 1, stratum: Stratum::ZeroFinite, rank: 1 },
        DescriptionEntry { degree: 1, stratum: Stratum::NonzeroInfinite, rank: 1 },
    ];
    Ok(ConstructibleDescription { factor: phi.clone(), entries, ramified: phi.ram() > 1 })
}

/// A sector of half-width `w` around `theta`.
pub fn sector_around(theta: f64, w: f64) -> Sector {
    Sector::from_angles(theta - w, theta + w)
}

/// The full circle as a sector, used when a family has no Stokes lines.
pub fn full_circle() -> Sector {
    Sector::from_angles(0.0, 2.0 * PI)
}

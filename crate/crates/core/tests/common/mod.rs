#![allow(dead_code)]

use std::collections::BTreeSet;

use num::complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stokeskit::factors::ExponentialFactor;
use stokeskit::formal::{FormalItem, FormalType};
use stokeskit::geometry::StokesDiagram;
use stokeskit::linalg::{identity, inverse, inverse_condition, CMat};
use stokeskit::rational::{rat, CRat};
use stokeskit::sheafmodel::hom_shape;
use stokeskit::stokesdata::{block_offsets, StokesStructure};

/// Nonzero coefficient whose argument is a rational multiple of pi.
pub fn exact_arg_coeff(rng: &mut ChaCha8Rng) -> CRat {
    let mag = rat(rng.gen_range(3..=10), rng.gen_range(1..=3));
    let zero = rat(0, 1);
    match rng.gen_range(0..6) {
        0 => CRat::new(mag, zero),
        1 => CRat::new(-mag, zero),
        2 => CRat::new(zero, mag),
        3 => CRat::new(zero, -mag),
        4 => CRat::new(mag.clone(), mag),
        _ => CRat::new(-mag.clone(), mag),
    }
}

/// Nonzero coefficient with both parts nonzero and of different sizes, so its
/// argument is generically not a rational multiple of pi.
pub fn generic_coeff(rng: &mut ChaCha8Rng) -> CRat {
    loop {
        let a: i64 = rng.gen_range(1..=7) * if rng.gen_bool(0.5) { 1 } else { -1 };
        let b: i64 = rng.gen_range(1..=7) * if rng.gen_bool(0.5) { 1 } else { -1 };
        if a.abs() != b.abs() {
            return CRat::new(rat(a, 1), rat(b, 2));
        }
    }
}

/// `sum_{k=-order}^{-1} c_k x^k` with a leading coefficient of modulus at least
/// 1 and lower coefficients of modulus at most 1, so the leading term dominates
/// for `|x| <= 0.1`.
pub fn random_pole_part(rng: &mut ChaCha8Rng, order: i64, exact: bool) -> ExponentialFactor {
    let lead = if exact { exact_arg_coeff(rng) } else { generic_coeff(rng) };
    let mut terms = vec![(-order, lead)];
    for k in (-order + 1)..0 {
        if rng.gen_bool(0.5) {
            terms.push((k, CRat::from_ratio(rng.gen_range(-3..=3), 3)));
        }
    }
    ExponentialFactor::new(1, terms)
}

/// A factor of pole order at most `max_order`, possibly zero.
pub fn random_factor(rng: &mut ChaCha8Rng, max_order: i64) -> ExponentialFactor {
    if rng.gen_bool(0.2) {
        return ExponentialFactor::zero();
    }
    let order = rng.gen_range(1..=max_order);
    let exact = rng.gen_bool(0.6);
    random_pole_part(rng, order, exact)
}

/// A holomorphic correction `sum_{k=0}^{2} c_k x^k`, not identically zero,
/// with coefficients of modulus below 2.
pub fn random_holomorphic(rng: &mut ChaCha8Rng) -> ExponentialFactor {
    let mut terms = vec![(rng.gen_range(0..=2), generic_coeff(rng).scale(&rat(1, 7)))];
    for k in 0..=2 {
        if rng.gen_bool(0.5) {
            terms.push((k, CRat::from_ratio(rng.gen_range(-3..=3), 4)));
        }
    }
    let f = ExponentialFactor::new(1, terms.clone());
    if f.is_zero() { ExponentialFactor::new(1, [(0, CRat::one())]) } else { f }
}

/// `count` factors with pairwise distinct pole parts.
pub fn random_family(rng: &mut ChaCha8Rng, count: usize, max_order: i64) -> Vec<ExponentialFactor> {
    loop {
        let fs: Vec<ExponentialFactor> = (0..count).map(|_| random_factor(rng, max_order)).collect();
        let distinct: BTreeSet<String> = fs.iter().map(|f| f.to_string()).collect();
        if distinct.len() == count {
            return fs;
        }
    }
}

pub fn random_c(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    loop {
        let m = identity(n) + CMat::from_fn(n, n, |_, _| random_c(rng, 0.5));
        if inverse_condition(&m) > 0.1 {
            return m;
        }
    }
}

fn random_formal(rng: &mut ChaCha8Rng) -> FormalType {
    let mut items = Vec::new();
    let mut ramification = 1;
    let mut budget = 4usize;
    if rng.gen_bool(0.25) {
        // a deck-swapped pair c x^(-p/2), -c x^(-p/2)
        let p = [1i64, 3][rng.gen_range(0..2)];
        let c = exact_arg_coeff(rng);
        let lam = Complex64::new(rng.gen_range(0..4) as f64 / 4.0, 0.0);
        for sign in [1i64, -1] {
            let factor = ExponentialFactor::new(2, [(-p, c.scale(&rat(sign, 1)))]);
            items.push(FormalItem { factor, rank: 1, exponents: vec![lam] });
        }
        ramification = 2;
        budget -= 2;
    }
    let extra = if items.is_empty() { rng.gen_range(1..=3) } else { rng.gen_range(0..=1) };
    let mut seen: BTreeSet<String> = items.iter().map(|i| i.factor.to_string()).collect();
    while items.len() < 3 && seen.len() < items.len() + extra && budget > 0 {
        let f = random_factor(rng, 2);
        if !seen.insert(f.to_string()) {
            continue;
        }
        let rank = rng.gen_range(1..=budget.min(2));
        budget -= rank;
        let exponents = (0..rank).map(|_| Complex64::new(rng.gen_range(-4..4) as f64 / 4.0, 0.0)).collect();
        items.push(FormalItem { factor: f, rank, exponents });
    }
    FormalType { items, ramification }
}

type QMat = Vec<Vec<CRat>>;

fn q_entry(rng: &mut ChaCha8Rng, scale: i64) -> CRat {
    CRat::new(rat(rng.gen_range(-scale..=scale), 4), rat(rng.gen_range(-scale..=scale), 4))
}

fn q_identity(n: usize) -> QMat {
    (0..n).map(|i| (0..n).map(|j| if i == j { CRat::one() } else { CRat::zero() }).collect()).collect()
}

fn q_mul(a: &QMat, b: &QMat) -> QMat {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(CRat::zero(), |acc, k| acc + &a[i][k] * &b[k][j])).collect())
        .collect()
}

fn q_to_c(a: &QMat) -> CMat {
    let n = a.len();
    CMat::from_fn(n, n, |i, j| a[i][j].to_c64())
}

/// Gaussian-rational matrix `I + E`, `|E_ij| <= 1/2`, with inverse condition above 0.1.
fn q_invertible(rng: &mut ChaCha8Rng, n: usize) -> QMat {
    loop {
        let mut m = q_identity(n);
        for row in m.iter_mut() {
            for e in row.iter_mut() {
                *e = &*e + &q_entry(rng, 1);
            }
        }
        if inverse_condition(&q_to_c(&m)) > 0.1 {
            return m;
        }
    }
}

/// A valid, generally non-normal Stokes structure (at most 3 formal pieces,
/// total rank at most 4, random base sector) together with trivializations
/// `alpha_1 .. alpha_{N+1}` satisfying `A_k = alpha_{k+1}^{-1} alpha_k`.
///
/// The inverses `B_k = A_k^{-1}` are drawn in the Hom shape, which is closed
/// under inversion, and `alpha_{k+1} = alpha_k B_k` is formed exactly over the
/// Gaussian rationals, so each trivialization is rounded once.
pub fn random_structure_with_cover(rng: &mut ChaCha8Rng) -> (StokesStructure, Vec<CMat>) {
    let formal = random_formal(rng);
    let factors = formal.factors();
    let diagram = StokesDiagram::new(&factors).unwrap();
    let offs = block_offsets(&formal);
    let n = formal.rank();
    let mut alpha = q_invertible(rng, n);
    let mut trivs = vec![q_to_c(&alpha)];
    let mut matrices = Vec::new();
    for k in 0..diagram.n_lines() {
        let shape = hom_shape(&factors, &diagram.overlap(k));
        let mut b = vec![vec![CRat::zero(); n]; n];
        for (i, &(oi, ri)) in offs.iter().enumerate() {
            for (j, &(oj, rj)) in offs.iter().enumerate() {
                if i == j {
                    let d = q_invertible(rng, ri);
                    for r in 0..ri {
                        for s in 0..ri {
                            b[oi + r][oi + s] = d[r][s].clone();
                        }
                    }
                } else if shape.allows(i + 1, j + 1) && rng.gen_bool(0.7) {
                    for r in 0..ri {
                        for s in 0..rj {
                            b[oi + r][oj + s] = q_entry(rng, 4);
                        }
                    }
                }
            }
        }
        matrices.push(inverse(&q_to_c(&b)).unwrap());
        alpha = q_mul(&alpha, &b);
        trivs.push(q_to_c(&alpha));
    }
    let base = rng.gen_range(1..=diagram.n_lines().max(1));
    let s = StokesStructure::new(formal, matrices, 1).unwrap().rebase(base).unwrap();
    (s, trivs)
}

pub fn random_structure(rng: &mut ChaCha8Rng) -> StokesStructure {
    random_structure_with_cover(rng).0
}

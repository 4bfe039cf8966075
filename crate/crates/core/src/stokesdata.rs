//! Stokes structures: formal data plus one gluing matrix per Stokes line.
//!
//! Pieces are the items of the formal type, in order; block `(i, j)` of a matrix
//! is a morphism from piece `j` to piece `i`. Matrix `A_k` belongs to line `L_k`
//! and is checked against the Hom shape on `S_k ∩ S_{k+1}`. With base `b` the
//! stored list starts at `A_b`, and the monodromy seen from `S_b` is
//! `A_{b-1} ... A_1 Mf A_N ... A_b`.

use std::f64::consts::PI;
use std::fmt;

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factors::ExponentialFactor;
use crate::formal::{FormalError, FormalType, FormalTypeJson};
use crate::geometry::{GeometryError, StokesDiagram};
use crate::linalg::{c, from_rows, identity, inverse, inverse_condition, is_invertible, null_space, to_rows, CMat};
use crate::sheafmodel::hom_shape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StokesError {
    #[error("invalid Stokes structure: {}", fmt_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("Stokes diagrams differ")]
    MismatchedDiagram,
    #[error("formal types differ")]
    MismatchedFormal,
    #[error("no piece matches the continuation of factor {0} around 0")]
    DeckImageMissing(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Formal(#[from] FormalError),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Singular { matrix: usize },
    OffShape { matrix: usize, block: (usize, usize), magnitude: f64 },
    SingularDiagonal { matrix: usize, block: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Singular { matrix } => write!(f, "A_{matrix} is singular"),
            Violation::OffShape { matrix, block, magnitude } => write!(
                f,
                "A_{matrix} block ({},{}) not allowed on the overlap (entry size {magnitude:.3e})",
                block.0, block.1
            ),
            Violation::SingularDiagonal { matrix, block } => {
                write!(f, "A_{matrix} diagonal block {block} is singular")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StokesStructure {
    pub formal: FormalType,
    pub diagram: StokesDiagram,
    /// Stored starting at line `base`, cyclically.
    pub matrices: Vec<CMat>,
    /// 1-based.
    pub base: usize,
    pub formal_monodromy: CMat,
}

/// Index ranges of the pieces.
pub fn block_offsets(formal: &FormalType) -> Vec<(usize, usize)> {
    let mut o = 0;
    formal
        .items
        .iter()
        .map(|it| {
            let r = (o, it.rank);
            o += it.rank;
            r
        })
        .collect()
}

fn close_factors(a: &ExponentialFactor, b: &ExponentialFactor, tol: f64) -> bool {
    let d = a.pole_part().sub(&b.pole_part());
    d.terms().values().all(|c| c.to_c64().norm() <= tol)
}

/// Block-diagonal `exp(2 pi i lambda)`, with the pieces permuted by analytic
/// continuation around 0 when factors are ramified: entry `(sigma(j), j)`.
pub fn formal_monodromy(formal: &FormalType) -> Result<CMat, StokesError> {
    let n = formal.rank();
    let offs = block_offsets(formal);
    let mut m = CMat::zeros(n, n);
    for (j, it) in formal.items.iter().enumerate() {
        let image = it.factor.deck_shift();
        let target = formal
            .items
            .iter()
            .position(|o| o.rank == it.rank && close_factors(&o.factor, &image, 1e-12))
            .ok_or_else(|| StokesError::DeckImageMissing(it.factor.to_string()))?;
        for (k, lam) in it.exponents.iter().enumerate() {
            m[(offs[target].0 + k, offs[j].0 + k)] = (Complex64::i() * 2.0 * PI * lam).exp();
        }
    }
    Ok(m)
}

fn block(m: &CMat, offs: &[(usize, usize)], i: usize, j: usize) -> CMat {
    m.view((offs[i].0, offs[j].0), (offs[i].1, offs[j].1)).into_owned()
}

fn block_diagonal_part(m: &CMat, offs: &[(usize, usize)]) -> CMat {
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for &(o, r) in offs {
        out.view_mut((o, o), (r, r)).copy_from(&m.view((o, o), (r, r)));
    }
    out
}

impl StokesStructure {
    /// Builds the diagram from the factors; `matrices` are in line order
    /// starting at line `base`.
    pub fn new(formal: FormalType, matrices: Vec<CMat>, base: usize) -> Result<Self, StokesError> {
        let diagram = StokesDiagram::new(&formal.factors())?;
        let mf = formal_monodromy(&formal)?;
        StokesStructure::with_parts(formal, diagram, matrices, base, mf)
    }

    pub fn with_parts(
        formal: FormalType,
        diagram: StokesDiagram,
        matrices: Vec<CMat>,
        base: usize,
        formal_monodromy: CMat,
    ) -> Result<Self, StokesError> {
        let n = formal.rank();
        if matrices.len() != diagram.n_lines() {
            return Err(StokesError::Dimension(format!(
                "{} matrices for {} Stokes lines",
                matrices.len(),
                diagram.n_lines()
            )));
        }
        if let Some(m) = matrices.iter().chain([&formal_monodromy]).find(|m| m.nrows() != n || m.ncols() != n) {
            return Err(StokesError::Dimension(format!("{}x{} matrix for rank {n}", m.nrows(), m.ncols())));
        }
        let nl = diagram.n_lines().max(1);
        if base == 0 || base > nl {
            return Err(StokesError::Dimension(format!("base {base} outside 1..={nl}")));
        }
        Ok(StokesStructure { formal, diagram, matrices, base, formal_monodromy })
    }

    pub fn rank(&self) -> usize {
        self.formal.rank()
    }

    pub fn offsets(&self) -> Vec<(usize, usize)> {
        block_offsets(&self.formal)
    }

    /// `A_k` for line `k` (1-based), whatever the base.
    pub fn matrix(&self, k: usize) -> &CMat {
        let n = self.matrices.len();
        &self.matrices[(k - 1 + n - (self.base - 1)) % n]
    }

    /// Matrices in line order `A_1 .. A_N`.
    pub fn matrices_by_line(&self) -> Vec<CMat> {
        (1..=self.matrices.len()).map(|k| self.matrix(k).clone()).collect()
    }

    /// Same data seen from sector `b`.
    pub fn rebase(&self, b: usize) -> Result<StokesStructure, StokesError> {
        let by_line = self.matrices_by_line();
        let n = by_line.len();
        let nl = n.max(1);
        if b == 0 || b > nl {
            return Err(StokesError::Dimension(format!("base {b} outside 1..={nl}")));
        }
        let matrices = (0..n).map(|i| by_line[(b - 1 + i) % n].clone()).collect();
        Ok(StokesStructure { matrices, base: b, ..self.clone() })
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        let offs = self.offsets();
        self.matrices.iter().all(|m| {
            offs.iter().all(|&(o, r)| (m.view((o, o), (r, r)) - identity(r)).camax() <= tol)
        })
    }
}

pub const SHAPE_TOL: f64 = 1e-12;

/// Invertibility, Hom shape on each overlap, invertible diagonal blocks.
pub fn validate(s: &StokesStructure) -> Vec<Violation> {
    validate_with_tol(s, SHAPE_TOL)
}

pub fn validate_with_tol(s: &StokesStructure, tol: f64) -> Vec<Violation> {
    let offs = s.offsets();
    let factors = s.formal.factors();
    let mut out = Vec::new();
    for k in 1..=s.diagram.n_lines() {
        let a = s.matrix(k);
        if !is_invertible(a) {
            out.push(Violation::Singular { matrix: k });
        }
        let shape = hom_shape(&factors, &s.diagram.overlap(k - 1));
        for i in 0..offs.len() {
            for j in 0..offs.len() {
                let b = block(a, &offs, i, j);
                if i == j {
                    if !is_invertible(&b) {
                        out.push(Violation::SingularDiagonal { matrix: k, block: i + 1 });
                    }
                } else if !shape.allows(i + 1, j + 1) {
                    let mag = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
                    if mag > tol {
                        out.push(Violation::OffShape { matrix: k, block: (i + 1, j + 1), magnitude: mag });
                    }
                }
            }
        }
    }
    out
}

fn ensure_valid(s: &StokesStructure) -> Result<(), StokesError> {
    let v = validate(s);
    if v.is_empty() { Ok(()) } else { Err(StokesError::Invalid(v)) }
}

/// Monodromy seen from the base sector.
pub fn glue_monodromy(s: &StokesStructure) -> Result<CMat, StokesError> {
    ensure_valid(s)?;
    let n = s.rank();
    let b = s.base;
    let mut m = identity(n);
    for k in b..=s.matrices.len() {
        m = s.matrix(k) * m;
    }
    m = &s.formal_monodromy * m;
    for k in 1..b {
        m = s.matrix(k) * m;
    }
    Ok(m)
}

/// `A_i = alpha_{i+1}^{-1} alpha_i` from trivializations on `S_1 .. S_N` and,
/// optionally, `S_{N+1} = S_1 + 2 pi`; without it the cover closes with `alpha_1`.
/// Forbidden blocks below the first-order rounding bound
/// `64 n eps |alpha_{i+1}^{-1}| (|alpha_{i+1}| |A_i| + |alpha_i|)` (Frobenius
/// norms) are zeroed before validation.
pub fn extract_from_cover(
    trivializations: &[CMat],
    formal: FormalType,
) -> Result<StokesStructure, StokesError> {
    let diagram = StokesDiagram::new(&formal.factors())?;
    let nl = diagram.n_lines();
    let n = formal.rank();
    if trivializations.len() != nl && trivializations.len() != nl + 1 {
        return Err(StokesError::Dimension(format!(
            "{} trivializations for {nl} sectors",
            trivializations.len()
        )));
    }
    if let Some(t) = trivializations.iter().find(|t| t.nrows() != n || t.ncols() != n || !is_invertible(t)) {
        return Err(StokesError::Dimension(format!("trivialization of size {}x{} is not invertible of rank {n}", t.nrows(), t.ncols())));
    }
    let factors = formal.factors();
    let offs = block_offsets(&formal);
    let matrices = (0..nl)
        .map(|k| {
            let next = trivializations.get(k + 1).unwrap_or(&trivializations[0]);
            let inv = inverse(next).unwrap();
            let mut a = &inv * &trivializations[k];
            // entries the shape forbids are round-off if they are below the
            // error bound of the product; those are set to zero exactly
            let bound = (64.0 * n as f64 * f64::EPSILON * inv.norm() * (next.norm() * a.norm() + trivializations[k].norm()))
                .max(SHAPE_TOL);
            let shape = hom_shape(&factors, &diagram.overlap(k));
            for (i, &(oi, ri)) in offs.iter().enumerate() {
                for (j, &(oj, rj)) in offs.iter().enumerate() {
                    if i != j && !shape.allows(i + 1, j + 1) && block(&a, &offs, i, j).camax() <= bound {
                        a.view_mut((oi, oj), (ri, rj)).fill(c(0.0, 0.0));
                    }
                }
            }
            a
        })
        .collect();
    let mf = formal_monodromy(&formal)?;
    let s = StokesStructure::with_parts(formal, diagram, matrices, 1, mf)?;
    ensure_valid(&s)?;
    Ok(s)
}

/// Absorbs the diagonal blocks of every `A_k` into the trivializations, sweeping
/// counterclockwise from `S_1`; the remainder is folded into the formal
/// monodromy, so the monodromy from `S_1` is unchanged.
pub fn normal_form(s: &StokesStructure) -> Result<StokesStructure, StokesError> {
    ensure_valid(s)?;
    let s = s.rebase(1)?;
    let offs = s.offsets();
    let mut d = identity(s.rank());
    let mut out = Vec::with_capacity(s.matrices.len());
    for a in &s.matrices {
        let delta = block_diagonal_part(a, &offs);
        let d_next = &delta * &d;
        out.push(inverse(&d_next).unwrap() * a * &d);
        d = d_next;
    }
    let mf = &s.formal_monodromy * &d;
    Ok(StokesStructure { matrices: out, base: 1, formal_monodromy: mf, ..s })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Reorders pieces: new piece `i` is old piece `perm[i]`.
fn permute_pieces(s: &StokesStructure, perm: &[usize]) -> StokesStructure {
    let old = s.offsets();
    let idx: Vec<usize> = perm.iter().flat_map(|&p| old[p].0..old[p].0 + old[p].1).collect();
    let n = idx.len();
    let pm = |m: &CMat| CMat::from_fn(n, n, |i, j| m[(idx[i], idx[j])]);
    let formal = FormalType {
        items: perm.iter().map(|&p| s.formal.items[p].clone()).collect(),
        ramification: s.formal.ramification,
    };
    StokesStructure {
        formal,
        diagram: s.diagram.clone(),
        matrices: s.matrices.iter().map(pm).collect(),
        base: s.base,
        formal_monodromy: pm(&s.formal_monodromy),
    }
}

pub const EQUIV_TOL: f64 = 1e-9;

/// Block-diagonal `D` (invertible) with `A2_k D = D A1_k` for every `k` and
/// `Mf2 D = D Mf1`, if one exists.
fn conjugator(s1: &StokesStructure, s2: &StokesStructure, seed: u64) -> Option<CMat> {
    let n = s1.rank();
    let offs = s1.offsets();
    // unknowns: entries of each diagonal block, row-major
    let mut unknowns = Vec::new();
    for &(o, r) in &offs {
        for i in 0..r {
            for j in 0..r {
                unknowns.push((o + i, o + j));
            }
        }
    }
    let pairs: Vec<(&CMat, &CMat)> = s1
        .matrices
        .iter()
        .zip(&s2.matrices)
        .chain([(&s1.formal_monodromy, &s2.formal_monodromy)])
        .collect();
    let mut l = CMat::zeros(pairs.len() * n * n, unknowns.len());
    for (p, (a1, a2)) in pairs.iter().enumerate() {
        for (u, &(r, col)) in unknowns.iter().enumerate() {
            // (A2 D - D A1)[i][j] = sum_r A2[i][r] D[r][j] - sum_c D[i][c] A1[c][j]
            for i in 0..n {
                l[(p * n * n + i * n + col, u)] += a2[(i, r)];
            }
            for j in 0..n {
                l[(p * n * n + r * n + j, u)] -= a1[(col, j)];
            }
        }
    }
    let scale = l.camax().max(1.0);
    let ns = null_space(&(&l / c(scale, 0.0)), EQUIV_TOL);
    if ns.ncols() == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        let w: Vec<Complex64> = (0..ns.ncols()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let mut d = CMat::zeros(n, n);
        for (u, &(r, col)) in unknowns.iter().enumerate() {
            d[(r, col)] = (0..ns.ncols()).map(|k| ns[(u, k)] * w[k]).sum();
        }
        if inverse_condition(&d) > 1e-8 {
            return Some(d);
        }
    }
    None
}

/// Equality of normal forms up to block-diagonal conjugation, piece
/// permutations preserving the formal data, and re-basing.
pub fn equivalent(s1: &StokesStructure, s2: &StokesStructure) -> Result<bool, StokesError> {
    if !s1.diagram.same_lines(&s2.diagram) {
        return Err(StokesError::MismatchedDiagram);
    }
    if !s1.formal.same_as(&s2.formal, EQUIV_TOL) {
        return Err(StokesError::MismatchedFormal);
    }
    let n1 = normal_form(s1)?;
    let n2 = normal_form(s2)?;
    for perm in permutations(n2.formal.items.len()) {
        let p2 = permute_pieces(&n2, &perm);
        let compatible = n1.formal.items.iter().zip(&p2.formal.items).all(|(a, b)| a.same_as(b, EQUIV_TOL));
        if compatible && conjugator(&n1, &p2, 0x5eed).is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

// ---- JSON forms -------------------------------------------------------------

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

/// Matrices are row-major with `[re, im]` entries and stored from line `base`.
/// `lines` is informational and ignored on input; a missing
/// `formal_monodromy` is derived from the formal type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesStructureJson {
    pub formal: FormalTypeJson,
    #[serde(default = "one")]
    pub base: usize,
    pub matrices: Vec<MatrixJson>,
    #[serde(default)]
    pub formal_monodromy: Option<MatrixJson>,
    #[serde(default)]
    pub lines: Vec<f64>,
}

fn one() -> usize {
    1
}

/// Trivializations on `S_1 .. S_N` (optionally `S_{N+1}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverJson {
    pub formal: FormalTypeJson,
    pub trivializations: Vec<MatrixJson>,
}

fn matrix_from_json(m: &MatrixJson) -> Result<CMat, StokesError> {
    from_rows(m).ok_or_else(|| StokesError::Dimension("ragged matrix rows".into()))
}

impl StokesStructure {
    pub fn to_json(&self) -> StokesStructureJson {
        StokesStructureJson {
            formal: self.formal.to_json(),
            base: self.base,
            matrices: self.matrices.iter().map(to_rows).collect(),
            formal_monodromy: Some(to_rows(&self.formal_monodromy)),
            lines: self.diagram.lines.iter().map(|l| l.direction.angle).collect(),
        }
    }

    pub fn from_json(j: &StokesStructureJson) -> Result<StokesStructure, StokesError> {
        let formal = FormalType::from_json(&j.formal)?;
        let diagram = StokesDiagram::new(&formal.factors())?;
        let matrices = j.matrices.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?;
        let mf = match &j.formal_monodromy {
            Some(m) => matrix_from_json(m)?,
            None => formal_monodromy(&formal)?,
        };
        StokesStructure::with_parts(formal, diagram, matrices, j.base, mf)
    }
}

impl CoverJson {
    pub fn extract(&self) -> Result<StokesStructure, StokesError> {
        let formal = FormalType::from_json(&self.formal)?;
        let trivs = self.trivializations.iter().map(matrix_from_json).collect::<Result<Vec<_>, _>>()?;
        extract_from_cover(&trivs, formal)
    }
}

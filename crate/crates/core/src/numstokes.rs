//! Numerical Stokes matrices of rank ≤ 2 connections: truncated formal
//! solutions seed sectorial fundamental matrices, which are transported along
//! arcs of a fixed radius and compared on the sector overlaps.

use std::f64::consts::PI;

use num::complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::formal::{
    scalar_solutions, Branch, ConnectionSpec, CyclicVector, FormalError, FormalSolutions, FormalType,
    ScalarForm,
};
use crate::geometry::{GeometryError, StokesDiagram};
use crate::integrator::{integrate_mat, integrate_vec, CVec, IntegrationError, PathPiece, Tolerance};
use crate::laurent::{poly_eval, poly_eval_c64, LaurentPoly};
use crate::linalg::{identity, inverse, CMat};
use crate::rational::CRat;
use crate::stokesdata::{formal_monodromy, normal_form, validate, StokesError, StokesStructure, Violation};

#[derive(Debug, Error)]
pub enum NumError {
    #[error(transparent)]
    Formal(#[from] FormalError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("singular frame in sector {0}")]
    SingularFrame(usize),
    #[error("Stokes matrices fail validation after cleaning: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Unstable { raw: Vec<CMat>, violations: Vec<Violation> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Default: the radius where the leading exponential separation reaches
    /// `max(ln 1e8, 2 ln(1/rtol))`.
    pub rho_seed: Option<f64>,
    pub n_asym: usize,
    /// Default: `10 rho_seed`, capped at half the disc radius.
    pub rho_match: Option<f64>,
    pub max_steps: usize,
    /// Truncate the series at its smallest term past `n_asym`.
    pub optimal_truncation: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            rtol: 1e-10,
            atol: 1e-12,
            rho_seed: None,
            n_asym: 8,
            rho_match: None,
            max_steps: 2_000_000,
            optimal_truncation: true,
        }
    }
}

impl IntegrationConfig {
    pub fn tolerance(&self) -> Tolerance {
        Tolerance { rtol: self.rtol, atol: self.atol, max_steps: self.max_steps }
    }

    fn check(&self) -> Result<(), NumError> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(NumError::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// `u' = M(x) u`.
#[derive(Debug, Clone)]
pub enum Rhs {
    /// Companion matrix of `sum a_i D^i`, coefficients `a_0 .. a_n`.
    Companion(Vec<LaurentPoly>),
    System(Vec<Vec<LaurentPoly>>),
}

impl Rhs {
    pub fn from_connection(c: &ConnectionSpec) -> Result<Rhs, NumError> {
        Ok(match c {
            ConnectionSpec::Operator(op) => Rhs::Companion((0..=op.order()).map(|i| op.coeff(i)).collect()),
            ConnectionSpec::System(a) => Rhs::System(a.clone()),
            ConnectionSpec::FormalSum(ft) => Rhs::System(ft.to_system()?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Rhs::Companion(a) => a.len() - 1,
            Rhs::System(a) => a.len(),
        }
    }

    pub fn matrix(&self, x: Complex64) -> CMat {
        match self {
            Rhs::Companion(a) => {
                let n = a.len() - 1;
                let lead = a[n].eval(x);
                let mut m = CMat::zeros(n, n);
                for i in 0..n.saturating_sub(1) {
                    m[(i, i + 1)] = Complex64::new(1.0, 0.0);
                }
                for j in 0..n {
                    m[(n - 1, j)] = -a[j].eval(x) / lead;
                }
                m
            }
            Rhs::System(a) => CMat::from_fn(a.len(), a.len(), |i, j| a[i][j].eval(x)),
        }
    }

    /// A radius below which the coefficients have no pole except at 0.
    pub fn disc_radius(&self) -> f64 {
        match self {
            Rhs::Companion(a) => {
                let lead = &a[a.len() - 1];
                let Some(v) = lead.valuation() else { return 0.0 };
                let q: Vec<Complex64> = lead.terms().iter().map(|(&k, c)| (k - v, c.to_c64())).map(|(_, c)| c).collect();
                if q.len() == 1 {
                    return f64::INFINITY;
                }
                // Cauchy lower bound on the moduli of the nonzero roots
                let q0 = q[0].norm();
                let rest = q[1..].iter().map(|z| z.norm()).fold(0.0, f64::max);
                q0 / (q0 + rest)
            }
            Rhs::System(_) => f64::INFINITY,
        }
    }
}

/// Coefficients of the series factor of one formal solution.
#[derive(Debug, Clone)]
pub struct SeriesBranch {
    pub ramification: u32,
    /// Pole part of the exponent in `y = x^(1/m)`.
    pub phi: LaurentPoly,
    /// Exponent in `y`.
    pub mu: Complex64,
    /// `a_0 = 1, a_1, ...` of `sum a_k y^k`.
    pub coeffs: Vec<Complex64>,
    /// The recursion hit `P(mu + n) = 0`; only `a_0` is used.
    pub resonant: bool,
}

fn series_coefficients(b: &Branch, count: usize) -> (Vec<Complex64>, bool) {
    let shifts = b.twisted.shift_polynomials();
    let Some((&d0, p0)) = shifts.iter().next() else { return (vec![Complex64::new(1.0, 0.0)], false) };
    let higher: Vec<(usize, &Vec<CRat>)> =
        shifts.iter().skip(1).map(|(&d, p)| ((d - d0) as usize, p)).collect();
    match b.exponent.exact() {
        Some(mu) => {
            let mut a = vec![CRat::one()];
            for n in 1..count {
                let denom = poly_eval(p0, &(mu + &CRat::from_int(n as i64)));
                if denom.is_zero() {
                    return (vec![Complex64::new(1.0, 0.0)], true);
                }
                let mut acc = CRat::zero();
                for &(j, p) in &higher {
                    if j > n {
                        break;
                    }
                    if a[n - j].is_zero() {
                        continue;
                    }
                    let s = mu + &CRat::from_int((n - j) as i64);
                    acc = &acc + &(&poly_eval(p, &s) * &a[n - j]);
                }
                a.push(-(&acc * &denom.inv()));
            }
            (a.iter().map(|c| c.to_c64()).collect(), false)
        }
        None => {
            let mu = b.exponent.to_c64();
            let mut a = vec![Complex64::new(1.0, 0.0)];
            for n in 1..count {
                let denom = poly_eval_c64(p0, mu + n as f64);
                if denom.norm() < 1e-12 {
                    return (vec![Complex64::new(1.0, 0.0)], true);
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for &(j, p) in &higher {
                    if j > n {
                        break;
                    }
                    acc += poly_eval_c64(p, mu + (n - j) as f64) * a[n - j];
                }
                a.push(-acc / denom);
            }
            (a, false)
        }
    }
}

impl SeriesBranch {
    pub fn new(sol: &FormalSolutions, b: &Branch, count: usize) -> SeriesBranch {
        let (coeffs, resonant) = series_coefficients(b, count.max(1));
        SeriesBranch { ramification: sol.ramification, phi: b.phi.clone(), mu: b.exponent.to_c64(), coeffs, resonant }
    }

    fn y(&self, rho: f64, theta: f64) -> Complex64 {
        let m = self.ramification as f64;
        Complex64::from_polar(rho.powf(1.0 / m), theta / m)
    }

    /// `Re phi` at `rho e^(i theta)` on the branch continued to the unreduced
    /// angle `theta`.
    pub fn re_phi(&self, rho: f64, theta: f64) -> f64 {
        self.phi.eval(self.y(rho, theta)).re
    }

    /// `(f, df/dx)` and the number of series terms used.
    pub fn evaluate(&self, rho: f64, theta: f64, n_asym: usize, optimal: bool) -> (Complex64, Complex64, usize) {
        let m = self.ramification as f64;
        let y = self.y(rho, theta);
        let ln_y = Complex64::new(rho.ln() / m, theta / m);
        let e = (self.phi.eval(y) + self.mu * ln_y).exp();
        let dphi = self.phi.derivative().eval(y);
        // optimal truncation: stop at the smallest term past `n_asym`
        let mut cut = n_asym.min(self.coeffs.len() - 1);
        if optimal {
            let mut best = f64::INFINITY;
            let mut yk = y.powu(cut as u32);
            for (k, a) in self.coeffs.iter().enumerate().skip(cut) {
                let t = (a * yk).norm();
                if a.norm() != 0.0 && t < best {
                    best = t;
                    cut = k;
                }
                yk *= y;
            }
        }
        let mut s = Complex64::new(0.0, 0.0);
        let mut ds = Complex64::new(0.0, 0.0);
        let mut yk = Complex64::new(1.0, 0.0);
        for (k, a) in self.coeffs.iter().enumerate().take(cut + 1) {
            s += a * yk;
            if k > 0 {
                ds += a * (k as f64) * yk / y;
            }
            yk *= y;
        }
        let used = cut;
        let f = e * s;
        let f_y = e * ((dphi + self.mu / y) * s + ds);
        let f_x = f_y / (m * y.powf(m - 1.0));
        (f, f_x, used)
    }
}

/// How a scalar solution becomes a solution vector of the connection.
#[derive(Debug, Clone)]
enum Lift {
    /// `(f, f')` truncated to the order.
    Companion(usize),
    Cyclic(CyclicVector, Vec<Vec<LaurentPoly>>),
    /// `f e_i` in a diagonal system.
    Coordinate(usize, usize),
}

#[derive(Debug, Clone)]
pub struct Realization {
    pub rhs: Rhs,
    pub formal: FormalType,
    /// Columns in the order of the formal pieces.
    pub columns: Vec<SeriesBranch>,
    lifts: Vec<Lift>,
}

impl Realization {
    pub fn new(c: &ConnectionSpec, cfg: &IntegrationConfig) -> Result<Realization, NumError> {
        let rhs = Rhs::from_connection(c)?;
        let form = scalar_solutions(c)?;
        let formal = form.formal_type();
        let count = if cfg.optimal_truncation { (cfg.n_asym + 1).max(160) } else { cfg.n_asym + 1 };
        let mut columns = Vec::new();
        let mut lifts = Vec::new();
        match &form {
            ScalarForm::Single(sol, cv) => {
                let lift = match (cv, &rhs) {
                    (Some(cv), Rhs::System(a)) => Lift::Cyclic(*cv, a.clone()),
                    _ => Lift::Companion(rhs.dim()),
                };
                for it in &formal.items {
                    for b in sol.branches.iter().filter(|b| sol.factor_of(b) == it.factor) {
                        columns.push(SeriesBranch::new(sol, b, count));
                        lifts.push(lift.clone());
                    }
                }
            }
            ScalarForm::Diagonal(parts) => {
                for it in &formal.items {
                    for (i, sol) in parts.iter().enumerate() {
                        for b in sol.branches.iter().filter(|b| sol.factor_of(b) == it.factor) {
                            columns.push(SeriesBranch::new(sol, b, count));
                            lifts.push(Lift::Coordinate(i, parts.len()));
                        }
                    }
                }
            }
        }
        Ok(Realization { rhs, formal, columns, lifts })
    }

    fn column(&self, j: usize, rho: f64, theta: f64, cfg: &IntegrationConfig) -> (CVec, usize) {
        let (f, fx, used) = self.columns[j].evaluate(rho, theta, cfg.n_asym, cfg.optimal_truncation);
        let v = match &self.lifts[j] {
            Lift::Companion(n) => CVec::from_iterator(*n, [f, fx].into_iter().take(*n)),
            Lift::Cyclic(cv, a) => {
                let x = Complex64::from_polar(rho, theta);
                match cv {
                    CyclicVector::First => {
                        CVec::from_vec(vec![f, (fx - a[0][0].eval(x) * f) / a[0][1].eval(x)])
                    }
                    CyclicVector::Second => {
                        CVec::from_vec(vec![(fx - a[1][1].eval(x) * f) / a[1][0].eval(x), f])
                    }
                }
            }
            Lift::Coordinate(i, n) => {
                let mut v = CVec::zeros(*n);
                v[*i] = f;
                v
            }
        };
        (v, used)
    }

    /// Truncated formal solutions at `rho e^(i theta)`, one column each.
    pub fn seed(&self, rho: f64, theta: f64, cfg: &IntegrationConfig) -> CMat {
        let n = self.rhs.dim();
        let mut y = CMat::zeros(n, self.columns.len());
        for j in 0..self.columns.len() {
            y.set_column(j, &self.column(j, rho, theta, cfg).0);
        }
        y
    }
}

/// Seeds with exactly `n` series terms (no optimal truncation).
pub fn asymptotic_seed(c: &ConnectionSpec, theta: f64, rho: f64, n: usize) -> Result<CMat, NumError> {
    let cfg = IntegrationConfig { n_asym: n, optimal_truncation: false, ..IntegrationConfig::default() };
    Ok(Realization::new(c, &cfg)?.seed(rho, theta, &cfg))
}

pub fn integrate(c: &ConnectionSpec, path: &[PathPiece], y0: &CMat, cfg: &IntegrationConfig) -> Result<CMat, NumError> {
    cfg.check()?;
    let rhs = Rhs::from_connection(c)?;
    Ok(integrate_mat(&|x| rhs.matrix(x), path, y0, &cfg.tolerance())?)
}

/// `Y(2 pi) Y(0)^-1` for the frame transported once around the circle of
/// radius `rho` starting at angle `theta0`.
pub fn numeric_monodromy(c: &ConnectionSpec, rho: f64, theta0: f64, cfg: &IntegrationConfig) -> Result<CMat, NumError> {
    let rhs = Rhs::from_connection(c)?;
    if !(rho > 0.0 && rho < rhs.disc_radius()) {
        return Err(NumError::Config(format!("radius {rho} outside the punctured disc")));
    }
    let path = [PathPiece::Arc { rho, from: theta0, to: theta0 + 2.0 * PI }];
    integrate(c, &path, &identity(rhs.dim()), cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    /// 0-based; sector `N` is sector 0 continued by one turn.
    pub sector: usize,
    pub rho: f64,
    pub theta: f64,
    pub y: CMat,
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub rho_seed: f64,
    pub rho_match: f64,
    /// `A_k` before cleaning and normalization, in line order.
    pub raw: Vec<CMat>,
    /// Largest off-shape entry of the raw matrices.
    pub max_off_shape: f64,
    pub resonant_columns: Vec<usize>,
    /// Series terms used per column at the seeds.
    pub terms_used: Vec<usize>,
}

fn choose_radii(real: &Realization, cfg: &IntegrationConfig) -> Result<(f64, f64), NumError> {
    let disc = real.rhs.disc_radius();
    let rho_seed = match cfg.rho_seed {
        Some(r) => r,
        None => {
            let target = (1e8f64).ln().max(2.0 * (1.0 / cfg.rtol).ln());
            let mut best = f64::INFINITY;
            for (i, a) in real.formal.items.iter().enumerate() {
                for b in &real.formal.items[i + 1..] {
                    let d = a.factor.sub(&b.factor).pole_part();
                    if let Some((e, c)) = d.exponents().next() {
                        let p = -num::ToPrimitive::to_f64(&e).unwrap();
                        best = best.min((c.to_c64().norm() / target).powf(1.0 / p));
                    };
                }
            }
            if best.is_finite() { best } else { 0.1_f64.min(disc / 20.0) }
        }
    };
    let rho_match = cfg.rho_match.unwrap_or((10.0 * rho_seed).min(0.5 * disc));
    if !(rho_seed > 0.0 && rho_seed < rho_match && rho_match < disc) {
        return Err(NumError::Config(format!(
            "need 0 < rho_seed ({rho_seed:.3e}) < rho_match ({rho_match:.3e}) < disc radius ({disc:.3e})"
        )));
    }
    Ok((rho_seed, rho_match))
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let n: usize = std::env::var("STOKESKIT_THREADS").ok()?.parse().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
}

/// Frames of every sector (`0..=N`) at the left and right overlap bisectors,
/// radius `rho_match`. Each column is seeded at the bisector where it is
/// recessive and carried outward radially, then along the arc.
pub fn sector_frames(
    real: &Realization,
    diagram: &StokesDiagram,
    rho_seed: f64,
    rho_match: f64,
    cfg: &IntegrationConfig,
) -> Result<Vec<(FundamentalMatrix, FundamentalMatrix, Vec<usize>)>, NumError> {
    let n_lines = diagram.n_lines();
    let mids: Vec<f64> = (0..n_lines).map(|k| diagram.mid(k).angle).collect();
    let tol = cfg.tolerance();
    let rhs = &real.rhs;
    let job = |k: usize| -> Result<(FundamentalMatrix, FundamentalMatrix, Vec<usize>), NumError> {
        let left = if k == 0 { mids[n_lines - 1] - 2.0 * PI } else { mids[k - 1] };
        let right = if k == n_lines { mids[0] + 2.0 * PI } else { mids[k] };
        let n = rhs.dim();
        let cols = real.columns.len();
        let mut yl = CMat::zeros(n, cols);
        let mut yr = CMat::zeros(n, cols);
        let mut used = Vec::new();
        for j in 0..cols {
            // recessive side: smaller Re(phi_j - phi_i) against the others
            let excess = |theta: f64| {
                let own = real.columns[j].re_phi(rho_seed, theta);
                (0..cols)
                    .filter(|&i| i != j)
                    .map(|i| own - real.columns[i].re_phi(rho_seed, theta))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let (start, end) = if excess(left) <= excess(right) { (left, right) } else { (right, left) };
            let (v0, u) = real.column(j, rho_seed, start, cfg);
            used.push(u);
            let m = |x| rhs.matrix(x);
            let at_start = integrate_vec(&m, &[PathPiece::radial(start, rho_seed, rho_match)], &v0, &tol)?;
            let at_end = integrate_vec(&m, &[PathPiece::Arc { rho: rho_match, from: start, to: end }], &at_start, &tol)?;
            let (vl, vr) = if start == left { (at_start, at_end) } else { (at_end, at_start) };
            yl.set_column(j, &vl);
            yr.set_column(j, &vr);
        }
        Ok((
            FundamentalMatrix { sector: k, rho: rho_match, theta: left, y: yl },
            FundamentalMatrix { sector: k, rho: rho_match, theta: right, y: yr },
            used,
        ))
    };
    let run = || (0..=n_lines).into_par_iter().map(job).collect::<Result<Vec<_>, _>>();
    match thread_pool() {
        Some(pool) => pool.install(run),
        None => run(),
    }
}

fn off_shape_max(s: &StokesStructure, raw: &[CMat]) -> f64 {
    let offs = s.offsets();
    let mut worst: f64 = 0.0;
    for (k, a) in raw.iter().enumerate() {
        let shape = crate::sheafmodel::hom_shape(&s.formal.factors(), &s.diagram.overlap(k)).allowed;
        for (bi, &(oi, ri)) in offs.iter().enumerate() {
            for (bj, &(oj, rj)) in offs.iter().enumerate() {
                if shape.contains(&(bi + 1, bj + 1)) {
                    continue;
                }
                worst = worst.max(a.view((oi, oj), (ri, rj)).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
    }
    worst
}

/// Stokes structure of `c` together with the raw numerical data.
pub fn stokes_matrices_with_diagnostics(
    c: &ConnectionSpec,
    cfg: &IntegrationConfig,
) -> Result<(StokesStructure, Diagnostics), NumError> {
    cfg.check()?;
    let real = Realization::new(c, cfg)?;
    let formal = real.formal.clone();
    let diagram = StokesDiagram::new(&formal.factors())?;
    // solutions are compared through the dual frames Y^-T, whose gluing
    // matrices have the shape of the hom sheaves
    let mf = inverse(&formal_monodromy(&formal)?).ok_or(NumError::SingularFrame(0))?.transpose();
    let resonant_columns = (0..real.columns.len()).filter(|&j| real.columns[j].resonant).collect();
    if diagram.n_lines() == 0 {
        let s = StokesStructure::with_parts(formal, diagram, vec![], 1, mf)?;
        let diag = Diagnostics {
            rho_seed: 0.0,
            rho_match: 0.0,
            raw: vec![],
            max_off_shape: 0.0,
            resonant_columns,
            terms_used: vec![],
        };
        return Ok((s, diag));
    }
    let (rho_seed, rho_match) = choose_radii(&real, cfg)?;
    let frames = sector_frames(&real, &diagram, rho_seed, rho_match, cfg)?;
    let n_lines = diagram.n_lines();
    let mut raw = Vec::with_capacity(n_lines);
    for k in 0..n_lines {
        let next = inverse(&frames[k + 1].0.y).ok_or(NumError::SingularFrame(k + 1))?;
        let b = next * &frames[k].1.y;
        raw.push(inverse(&b).ok_or(NumError::SingularFrame(k))?.transpose());
    }
    let cleaned: Vec<CMat> = raw
        .iter()
        .map(|a| a.map(|z| if z.norm() < 10.0 * cfg.rtol { Complex64::new(0.0, 0.0) } else { z }))
        .collect();
    let s = StokesStructure::with_parts(formal, diagram, cleaned, 1, mf)?;
    let max_off_shape = off_shape_max(&s, &raw);
    let s = normal_form(&s)?;
    let violations = validate(&s);
    if !violations.is_empty() {
        return Err(NumError::Unstable { raw, violations });
    }
    let terms_used = frames[0].2.clone();
    Ok((s, Diagnostics { rho_seed, rho_match, raw, max_off_shape, resonant_columns, terms_used }))
}

pub fn stokes_matrices(c: &ConnectionSpec, cfg: &IntegrationConfig) -> Result<StokesStructure, NumError> {
    Ok(stokes_matrices_with_diagnostics(c, cfg)?.0)
}

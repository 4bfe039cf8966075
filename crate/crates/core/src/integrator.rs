//! Adaptive Dormand-Prince 5(4) transport of `u' = M(x) u` along paths in C*.

use nalgebra::DVector;
use num::complex::Complex64;
use thiserror::Error;

use crate::linalg::CMat;

pub type CVec = DVector<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("step size underflow after arclength {arclength:.6e}")]
    StepUnderflow { arclength: f64 },
    #[error("step budget exhausted after arclength {arclength:.6e}")]
    TooManySteps { arclength: f64 },
    #[error("path passes through x = 0")]
    ThroughOrigin,
}

/// A straight segment or an arc of a circle centred at 0, parameterized by
/// arclength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathPiece {
    Segment { from: Complex64, to: Complex64 },
    /// Angles are unreduced; `to < from` runs clockwise.
    Arc { rho: f64, from: f64, to: f64 },
}

impl PathPiece {
    pub fn radial(theta: f64, r0: f64, r1: f64) -> PathPiece {
        PathPiece::Segment { from: Complex64::from_polar(r0, theta), to: Complex64::from_polar(r1, theta) }
    }

    pub fn length(&self) -> f64 {
        match *self {
            PathPiece::Segment { from, to } => (to - from).norm(),
            PathPiece::Arc { rho, from, to } => rho * (to - from).abs(),
        }
    }

    /// Point and unit tangent at arclength `s`.
    pub fn at(&self, s: f64) -> (Complex64, Complex64) {
        match *self {
            PathPiece::Segment { from, to } => {
                let l = (to - from).norm();
                let dir = (to - from) / l;
                (from + dir * s, dir)
            }
            PathPiece::Arc { rho, from, to } => {
                let sign = if to >= from { 1.0 } else { -1.0 };
                let th = from + sign * s / rho;
                let x = Complex64::from_polar(rho, th);
                (x, Complex64::i() * x / rho * sign)
            }
        }
    }

    pub fn reversed(&self) -> PathPiece {
        match *self {
            PathPiece::Segment { from, to } => PathPiece::Segment { from: to, to: from },
            PathPiece::Arc { rho, from, to } => PathPiece::Arc { rho, from: to, to: from },
        }
    }

    fn avoids_origin(&self) -> bool {
        match *self {
            PathPiece::Segment { from, to } => {
                let d = to - from;
                let t = if d.norm_sqr() == 0.0 { 0.0 } else { (-(from.conj() * d).re / d.norm_sqr()).clamp(0.0, 1.0) };
                (from + d * t).norm() > 0.0
            }
            PathPiece::Arc { rho, .. } => rho > 0.0,
        }
    }
}

pub fn reverse_path(path: &[PathPiece]) -> Vec<PathPiece> {
    path.iter().rev().map(|p| p.reversed()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Transports the vector `y0` along `path`. Step errors are measured against
/// the sup norm of the current vector, so a column that is exponentially small
/// or decaying keeps its relative accuracy; `atol` only applies once the
/// vector vanishes.
pub fn integrate_vec<F>(m: &F, path: &[PathPiece], y0: &CVec, tol: &Tolerance) -> Result<CVec, IntegrationError>
where
    F: Fn(Complex64) -> CMat,
{
    let mut y = y0.clone();
    let mut travelled = 0.0;
    let mut steps = 0usize;
    for piece in path {
        if !piece.avoids_origin() {
            return Err(IntegrationError::ThroughOrigin);
        }
        let len = piece.length();
        if len == 0.0 {
            continue;
        }
        let f = |s: f64, v: &CVec| -> CVec {
            let (x, dir) = piece.at(s);
            (m(x) * v) * dir
        };
        let mut s = 0.0;
        let mut h = {
            let (x, _) = piece.at(0.0);
            let norm = m(x).iter().map(|z| z.norm()).fold(0.0, f64::max);
            (0.05 / norm.max(1e-3)).min(len)
        };
        let mut k1 = f(s, &y);
        while s < len {
            if steps >= tol.max_steps {
                return Err(IntegrationError::TooManySteps { arclength: travelled + s });
            }
            steps += 1;
            h = h.min(len - s);
            if h <= 1e-14 * len.max(1.0) {
                return Err(IntegrationError::StepUnderflow { arclength: travelled + s });
            }
            let mut ks: Vec<CVec> = Vec::with_capacity(7);
            ks.push(k1.clone());
            for stage in 1..7 {
                let mut arg = y.clone();
                for (j, kj) in ks.iter().enumerate() {
                    if A[stage][j] != 0.0 {
                        arg += kj * Complex64::new(h * A[stage][j], 0.0);
                    }
                }
                ks.push(f(s + C[stage] * h, &arg));
            }
            let mut y_new = y.clone();
            let mut err = CVec::zeros(y.len());
            for j in 0..7 {
                if B[j] != 0.0 {
                    y_new += &ks[j] * Complex64::new(h * B[j], 0.0);
                }
                let e = B[j] - B_LOW[j];
                if e != 0.0 {
                    err += &ks[j] * Complex64::new(h * e, 0.0);
                }
            }
            let scale = match tol.rtol * y.amax_norm().max(y_new.amax_norm()) {
                s if s > 0.0 => s,
                _ => tol.atol,
            };
            let ratio = err.amax_norm() / scale;
            if ratio <= 1.0 {
                s += h;
                y = y_new;
                k1 = ks.pop().unwrap(); // FSAL
            }
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        }
        travelled += len;
    }
    Ok(y)
}

trait AmaxNorm {
    fn amax_norm(&self) -> f64;
}

impl AmaxNorm for CVec {
    fn amax_norm(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Transports every column of `y0` along `path`.
pub fn integrate_mat<F>(m: &F, path: &[PathPiece], y0: &CMat, tol: &Tolerance) -> Result<CMat, IntegrationError>
where
    F: Fn(Complex64) -> CMat,
{
    let mut out = y0.clone();
    for j in 0..y0.ncols() {
        let col = integrate_vec(m, path, &y0.column(j).into_owned(), tol)?;
        out.set_column(j, &col);
    }
    Ok(out)
}

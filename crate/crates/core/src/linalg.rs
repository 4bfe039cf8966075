//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::DMatrix;
use num::complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Ratio of the smallest to the largest singular value (0 for the empty matrix).
pub fn inverse_condition(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = m.clone().singular_values();
    let max = s.max();
    if max == 0.0 {
        return 0.0;
    }
    s.min() / max
}

pub fn is_invertible(m: &CMat) -> bool {
    m.nrows() == m.ncols() && inverse_condition(m) > 1e-12
}

/// Coefficients `c_0..c_n` of `det(t I - M)` (Faddeev-LeVerrier), `c_n = 1`.
pub fn char_poly(m: &CMat) -> Vec<Complex64> {
    let n = m.nrows();
    let mut coeffs = vec![c(0.0, 0.0); n + 1];
    coeffs[n] = c(1.0, 0.0);
    let mut mk = CMat::zeros(n, n);
    let id = identity(n);
    for k in 1..=n {
        mk = m * (&mk + &id * coeffs[n - k + 1]);
        coeffs[n - k] = -mk.trace() / k as f64;
    }
    coeffs
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Orthonormal basis of the numerical null space, as columns.
pub fn null_space(l: &CMat, rel_tol: f64) -> CMat {
    let n = l.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    // pad with zero rows so the SVD returns all n right singular vectors
    let mut padded = CMat::zeros(l.nrows().max(n), n);
    padded.view_mut((0, 0), (l.nrows(), n)).copy_from(l);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let smax = svd.singular_values.max().max(1.0);
    let cols: Vec<usize> = (0..n)
        .filter(|&k| svd.singular_values[k] <= rel_tol * smax)
        .collect();
    let mut out = CMat::zeros(n, cols.len());
    for (o, &k) in cols.iter().enumerate() {
        for r in 0..n {
            out[(r, o)] = v_t[(k, r)].conj();
        }
    }
    out
}

/// Row-major `[re, im]` rows.
pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Option<CMat> {
    let n = rows.len();
    let k = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != k) {
        return None;
    }
    Some(CMat::from_fn(n, k, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_poly_2x2() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let p = char_poly(&m);
        // t^2 - 5t - 2
        assert!(max_abs_diff(&p, &[c(-2.0, 0.0), c(-5.0, 0.0), c(1.0, 0.0)]) < 1e-12);
    }

    #[test]
    fn null_space_of_rank_one() {
        let l = CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(-1.0, 0.0)]);
        let ns = null_space(&l, 1e-9);
        assert_eq!(ns.ncols(), 1);
        assert!((ns[(0, 0)] - ns[(1, 0)]).norm() < 1e-12);
    }
}

//! Small complex linear-algebra helpers shared by the solver modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Inverse, or `None` when the matrix is numerically singular.
pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    let inv = m.clone().try_inverse()?;
    if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

/// `det(m)` as `(ln|det|, det/|det|)`, from an LU factorization.
pub fn log_det(m: &CMatrix) -> Option<(f64, Complex64)> {
    let n = m.nrows();
    if n == 0 {
        return Some((0.0, c(1.0, 0.0)));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut log_abs = 0.0;
    let mut phase = c(1.0, 0.0);
    for i in 0..n {
        let d = u[(i, i)];
        let a = d.norm();
        if a == 0.0 || !a.is_finite() {
            return None;
        }
        log_abs += a.ln();
        phase *= d / a;
    }
    if lu.p().determinant::<f64>() < 0.0 {
        phase = -phase;
    }
    Some((log_abs, phase))
}

/// Eigenvalues of a 2x2 matrix from its trace and determinant.
pub fn eigenvalues_2x2(m: &CMatrix) -> [Complex64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr * 0.25 - det).sqrt();
    [tr * 0.5 + disc, tr * 0.5 - disc]
}

/// `(smallest singular value, right singular vector, second smallest singular value)`.
pub fn smallest_singular(m: &CMatrix) -> (f64, nalgebra::DVector<Complex64>, f64) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });
    let k = order[0];
    let vec = nalgebra::DVector::from_fn(n, |i, _| v_t[(k, i)].conj());
    let second = order
        .get(1)
        .map(|&j| svd.singular_values[j])
        .unwrap_or(f64::INFINITY);
    (svd.singular_values[k], vec, second)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

//! Small dense complex helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::C64;

pub type CMat = DMatrix<C64>;

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn dist(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn inv(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

pub fn det(m: &CMat) -> C64 {
    m.clone().determinant()
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eig_hermitian(m: &CMat) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Cholesky of the Hermitian part succeeds with a strictly positive pivot
/// at every step.
pub fn cholesky_ok(m: &CMat) -> bool {
    let n = m.nrows();
    let h = (m + m.adjoint()).scale(0.5);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    true
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Monic polynomial coefficients c_0..c_n of prod (x - r).
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k + 1] += v;
            next[k] -= v * r;
        }
        c = next;
    }
    c
}

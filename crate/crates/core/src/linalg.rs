//! Small dense complex/real helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Inverse of a Hermitian positive-definite matrix, `None` when Cholesky fails.
pub fn hpd_inverse(h: &CMatrix) -> Option<CMatrix> {
    h.clone().cholesky().map(|ch| ch.inverse())
}

pub fn is_positive_definite(h: &CMatrix) -> bool {
    h.clone().cholesky().is_some()
}

pub fn hermitian_defect(h: &CMatrix) -> f64 {
    (h - h.adjoint()).norm() / h.norm().max(f64::MIN_POSITIVE)
}

pub fn max_abs(values: impl IntoIterator<Item = C64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// Solves a real square system, `None` if singular.
pub fn solve_real(a: &RMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    a.clone().lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Real symmetric quadratic form `aᵀ M b`.
pub fn bilinear(m: &RMatrix, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * b[j];
        }
        s += a[i] * row;
    }
    s
}

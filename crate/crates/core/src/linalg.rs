//! Small dense helpers shared by the basis construction and the oracles.

use nalgebra::{DMatrix, DVector};

/// Thin SVD pieces with singular values in descending order.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    /// Right singular vectors as columns.
    pub v: DMatrix<f64>,
}

pub(crate) fn svd(a: DMatrix<f64>) -> Svd {
    let decomp = nalgebra::linalg::SVD::new(a, true, true);
    Svd {
        u: decomp.u.expect("requested U"),
        s: decomp.singular_values,
        v: decomp.v_t.expect("requested V^T").transpose(),
    }
}

/// Count of singular values above `max(rel * s_max, abs)`.
pub(crate) fn numerical_rank(s: &DVector<f64>, rel: f64, abs: f64) -> usize {
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cut = (rel * smax).max(abs);
    s.iter().filter(|&&x| x > cut).count()
}

/// Flips column `j` of `a` so that its first largest-magnitude entry is
/// positive. Entries within a relative 1e-12 of the maximum count as ties.
/// Returns the sign applied.
pub(crate) fn fix_sign(a: &mut DMatrix<f64>, j: usize) -> f64 {
    let col = a.column(j);
    let amax = col.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let sign = match col.iter().find(|x| x.abs() >= amax * (1.0 - 1e-12)) {
        Some(&x) if x < 0.0 => -1.0,
        _ => 1.0,
    };
    if sign < 0.0 {
        a.column_mut(j).neg_mut();
    }
    sign
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest absolute entry of `a^T a - I`.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let g = a.transpose() * a;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// 2-norm condition number of a symmetric matrix from its eigenvalues.
pub fn symmetric_condition(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &l in eig.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    hi / lo
}

/// Spectral norm of `A A^T - B B^T` for matrices with orthonormal columns.
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d = a * a.transpose() - b * b.transpose();
    d.symmetric_eigenvalues()
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
}

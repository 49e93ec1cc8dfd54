//! Thin wrappers around dense symmetric / Hermitian eigensolvers.
//!
//! All spectral routines in this crate consume eigenvalues in a fixed order,
//! so the raw solver output is sorted ascending here, with eigenvector
//! columns permuted to match.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(mat: &DMatrix<Complex64>) -> Vec<f64> {
    let mut vals: Vec<f64> = mat
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian matrix.
pub fn hermitian_eigen(mat: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let decomp = SymmetricEigen::new(mat.clone());
    let n = decomp.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| decomp.eigenvalues[i].total_cmp(&decomp.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        vecs.set_column(col, &decomp.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Eigenvalues (ascending) and matching eigenvector columns of a real symmetric matrix.
pub fn symmetric_eigen(mat: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let decomp = SymmetricEigen::new(mat.clone());
    let n = decomp.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| decomp.eigenvalues[i].total_cmp(&decomp.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        vecs.set_column(col, &decomp.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(mat: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = mat
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn complex_hermitian_two_by_two() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let m = dmatrix![
            Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0);
            Complex64::new(0.0, -1.0), Complex64::new(2.0, 0.0)
        ];
        let vals = hermitian_eigenvalues(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvectors_reconstruct_matrix() {
        let m = dmatrix![
            Complex64::new(4.0, 0.0), Complex64::new(1.0, 2.0), Complex64::new(0.0, 0.0);
            Complex64::new(1.0, -2.0), Complex64::new(3.0, 0.0), Complex64::new(0.0, -1.0);
            Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)
        ];
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..3 {
            let v = vecs.column(k);
            let residual = &m * v - v * Complex64::new(vals[k], 0.0);
            assert!(residual.norm() < 1e-10, "residual {}", residual.norm());
        }
    }
}

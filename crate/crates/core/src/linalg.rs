//! Small dense helpers shared by the geometry and map modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Solves `A v = λ B v` for symmetric `A` and symmetric positive definite `B`.
///
/// Returns eigenvalues in descending order with `B`-orthonormal eigenvectors
/// as the matching columns.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("metric is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let mut c = &l_inv * a * l_inv.transpose();
    // symmetrize against roundoff before the symmetric solver
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = m;
            c[(j, i)] = m;
        }
    }
    let eig = SymmetricEigen::new(c);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigenvalue solver produced non-finite values".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let back = l_inv.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = &back * eig.eigenvectors.column(i);
        vectors.set_column(col, &v);
    }
    Ok((values, vectors))
}

/// Descending eigen-decomposition of a symmetric matrix.
pub fn symmetric_eigen_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn to_dvector(a: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(a)
}

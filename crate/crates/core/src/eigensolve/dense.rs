use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{EigenResult, HermitianOperator, SolverPath};
use crate::error::{Error, Result};

/// Full Hermitian eigendecomposition, truncated to the `m` lowest pairs.
pub fn dense_eigenpairs<O: HermitianOperator + ?Sized>(op: &O, m: usize, cap: usize) -> Result<EigenResult> {
    let n = op.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("requested {m} eigenpairs of a {n}-dimensional operator")));
    }
    let mat = op.to_dense(cap)?;
    Ok(from_dense_matrix(&mat, m))
}

pub(crate) fn sorted_eigen(mat: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(mat.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(mat.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vecs)
}

pub(crate) fn from_dense_matrix(mat: &DMatrix<Complex64>, m: usize) -> EigenResult {
    let (values, vecs) = sorted_eigen(mat);
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = Vec::with_capacity(m);
    let mut residual_norms = Vec::with_capacity(m);
    let mut pairs = Vec::with_capacity(m);
    for j in 0..m {
        let mut x: Vec<Complex64> = vecs.column(j).iter().copied().collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|z| *z /= norm);
        let xv = nalgebra::DVector::from_column_slice(&x);
        let hx = mat * &xv;
        // the Rayleigh quotient drops the O(eps ‖M‖) error of the tridiagonal reduction
        let rq = xv.dotc(&hx).re;
        let lambda = if rq.is_finite() { rq } else { values[j] };
        let r = hx - &xv * Complex64::new(lambda, 0.0);
        pairs.push((lambda, x, r.norm()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (lambda, x, r) in pairs {
        eigenvalues.push(lambda);
        eigenvectors.push(x);
        residual_norms.push(r);
    }
    EigenResult {
        eigenvalues,
        eigenvectors,
        residual_norms,
        iterations: 1,
        path: SolverPath::Dense,
    }
}

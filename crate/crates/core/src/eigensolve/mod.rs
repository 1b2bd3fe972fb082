//! Lowest eigenpairs of Hermitian operators.
//!
//! Two paths share one result type: a dense Hermitian eigendecomposition used
//! for small problems and as an oracle, and a matrix-free block
//! Rayleigh-quotient minimization (LOBPCG) for everything else.

mod dense;
mod lobpcg;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{BlochHamiltonian, DEFAULT_DENSE_CAP};

pub use dense::dense_eigenpairs;
pub use lobpcg::lobpcg;

/// A Hermitian linear operator on `C^n`.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`.
    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]);

    /// Diagonal scale used by the `(d + σ)^{-1}` preconditioner.
    fn preconditioner_diagonal(&self) -> Vec<f64>;

    /// Dense matrix of the operator. The default applies the operator to unit vectors.
    fn to_dense(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        let n = self.dim();
        if n > cap {
            return Err(Error::BasisTooLarge { size: n, cap });
        }
        let mut mat = DMatrix::zeros(n, n);
        let mut e = vec![Complex64::default(); n];
        let mut col = vec![Complex64::default(); n];
        for j in 0..n {
            e[j] = Complex64::new(1.0, 0.0);
            self.apply_into(&e, &mut col);
            e[j] = Complex64::default();
            for i in 0..n {
                mat[(i, j)] = col[i];
            }
        }
        // exact Hermitian part
        let herm = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(herm)
    }
}

impl HermitianOperator for BlochHamiltonian<'_> {
    fn dim(&self) -> usize {
        BlochHamiltonian::dim(self)
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        BlochHamiltonian::apply_into(self, x, y).expect("lengths checked by the solver");
    }

    fn preconditioner_diagonal(&self) -> Vec<f64> {
        self.kinetic().to_vec()
    }

    fn to_dense(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        self.assemble_dense(cap)
    }
}

/// Which algorithm produced a result, or which one to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverPath {
    Dense,
    Iterative,
}

/// Requested algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathHint {
    /// Dense up to [`SolverOptions::auto_dense_limit`], iterative above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Absolute residual tolerance `‖Hx − λx‖` for the iterative path.
    pub tol: f64,
    /// Block iterations before giving up.
    pub max_iter: usize,
    /// Largest dimension for which a dense matrix may be formed.
    pub dense_cap: usize,
    /// `Auto` switches to the iterative path above this dimension.
    pub auto_dense_limit: usize,
    pub path: PathHint,
    /// Seed of the random starting block.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 500,
            dense_cap: DEFAULT_DENSE_CAP,
            auto_dense_limit: 150,
            path: PathHint::Auto,
            seed: 0x5eed_0f_b10c,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Same options with a seed mixed from task coordinates, so every fiber
    /// gets its own reproducible starting block.
    pub fn reseeded(&self, parts: &[u64]) -> SolverOptions {
        let mut s = self.seed;
        for &p in parts {
            s = splitmix64(s ^ splitmix64(p));
        }
        SolverOptions { seed: s, ..self.clone() }
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// The `m` lowest eigenpairs of an operator.
#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal, one per eigenvalue.
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
    pub path: SolverPath,
}

/// The `m` lowest eigenpairs of `op`.
pub fn lowest_eigenpairs<O: HermitianOperator + ?Sized>(
    op: &O,
    m: usize,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    opts.validate()?;
    let n = op.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("requested {m} eigenpairs of a {n}-dimensional operator")));
    }
    let use_dense = match opts.path {
        PathHint::Dense => true,
        PathHint::Iterative => false,
        PathHint::Auto => n <= opts.auto_dense_limit.min(opts.dense_cap),
    };
    if use_dense {
        dense_eigenpairs(op, m, opts.dense_cap)
    } else {
        lobpcg(op, m, opts)
    }
}

pub(crate) fn residual_norm<O: HermitianOperator + ?Sized>(op: &O, x: &[Complex64], lambda: f64) -> f64 {
    let mut ax = vec![Complex64::default(); x.len()];
    op.apply_into(x, &mut ax);
    ax.iter()
        .zip(x)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests;

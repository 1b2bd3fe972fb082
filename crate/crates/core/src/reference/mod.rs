//! Finite-difference discretization of `H = −½Δ + V₁ + V₂` on a truncated
//! domain, used as an independent check on the planewave spectra.

mod tridiagonal;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{lobpcg, HermitianOperator, SolverOptions};
use crate::error::{Error, Result};
use crate::potential::FourierPotential;
use crate::sweep::SpectrumEstimate;

pub use tridiagonal::{inverse_iteration, lowest_eigenvalues, sturm_count};

/// Largest number of unknowns accepted without an explicit override.
pub const DEFAULT_MEMORY_CAP: usize = 4_000_000;

/// Fraction of the domain on each side treated as the edge margin.
pub const DEFAULT_EDGE_MARGIN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Grid on `[0, L]^d` with spacing `h`.
#[derive(Clone, Debug)]
pub struct RealSpaceProblem<'a> {
    pub dim: usize,
    pub length: f64,
    pub spacing: f64,
    pub boundary: Boundary,
    pub v1: &'a FourierPotential,
    pub v2: &'a FourierPotential,
    /// Per-side margin as a fraction of `L`; Dirichlet states with more than
    /// half their weight there are dropped. `None` keeps every state.
    pub edge_margin: Option<f64>,
    pub memory_cap: usize,
    pub dense_cap: usize,
}

impl<'a> RealSpaceProblem<'a> {
    pub fn new(length: f64, spacing: f64, boundary: Boundary, v1: &'a FourierPotential, v2: &'a FourierPotential) -> Result<Self> {
        if v1.dim() != v2.dim() {
            return Err(Error::DimensionMismatch { expected: v1.dim(), found: v2.dim() });
        }
        if !(length > 0.0 && spacing > 0.0) || !length.is_finite() || !spacing.is_finite() {
            return Err(Error::InvalidArgument(format!("need L > 0 and h > 0, got L = {length}, h = {spacing}")));
        }
        let cells = length / spacing;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 2.0 {
            return Err(Error::InvalidArgument(format!("L / h = {cells} is not an integer of at least 2")));
        }
        Ok(RealSpaceProblem {
            dim: v1.dim(),
            length,
            spacing,
            boundary,
            v1,
            v2,
            edge_margin: match boundary {
                Boundary::Dirichlet => Some(DEFAULT_EDGE_MARGIN),
                Boundary::Periodic => None,
            },
            memory_cap: DEFAULT_MEMORY_CAP,
            dense_cap: 2048,
        })
    }

    pub fn cells(&self) -> usize {
        (self.length / self.spacing).round() as usize
    }

    /// Grid nodes per axis: interior nodes for Dirichlet, one period for Periodic.
    pub fn nodes_per_axis(&self) -> usize {
        match self.boundary {
            Boundary::Dirichlet => self.cells() - 1,
            Boundary::Periodic => self.cells(),
        }
    }

    pub fn unknowns(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    fn coordinate(&self, i: usize) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => (i + 1) as f64 * self.spacing,
            Boundary::Periodic => i as f64 * self.spacing,
        }
    }

    /// Leading dispersion error `(π²/12) h² E` of the 3-point Laplacian at energy `E`.
    pub fn dispersion_error(&self, e_max: f64) -> f64 {
        std::f64::consts::PI.powi(2) / 12.0 * self.spacing.powi(2) * e_max.abs()
    }

    pub fn check_resolution(&self, e_max: f64, tol: f64) -> Result<()> {
        let err = self.dispersion_error(e_max);
        if err >= tol {
            return Err(Error::InvalidArgument(format!(
                "grid spacing {} gives dispersion error {err:.3e} at E = {e_max}, above {tol:.3e}",
                self.spacing
            )));
        }
        Ok(())
    }

    fn potential_samples(&self) -> Result<Vec<f64>> {
        let n = self.nodes_per_axis();
        let mut out = Vec::with_capacity(self.unknowns());
        if self.dim == 1 {
            for i in 0..n {
                let x = [self.coordinate(i)];
                out.push(self.v1.evaluate(&x)? + self.v2.evaluate(&x)?);
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    let r = [self.coordinate(i), self.coordinate(j)];
                    out.push(self.v1.evaluate(&r)? + self.v2.evaluate(&r)?);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealSpaceSpectrum {
    /// The `m` lowest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues that survive the edge filter, ascending.
    pub bulk: Vec<f64>,
    /// Number of states classified as edge-localized.
    pub edge_states: usize,
}

/// The `m` lowest eigenvalues of the finite-difference operator.
pub fn realspace_spectrum(p: &RealSpaceProblem, m: usize, opts: &SolverOptions) -> Result<RealSpaceSpectrum> {
    let n = p.unknowns();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("requested {m} eigenvalues of a {n}-point grid")));
    }
    if n > p.memory_cap {
        return Err(Error::MemoryCap { unknowns: n, cap: p.memory_cap });
    }
    let pot = p.potential_samples()?;
    let h2 = p.spacing * p.spacing;
    let diag: Vec<f64> = pot.iter().map(|v| v + p.dim as f64 / h2).collect();
    let off = -0.5 / h2;

    let eigenvalues = if p.dim == 1 && p.boundary == Boundary::Dirichlet {
        lowest_eigenvalues(&diag, off, m)
    } else if n <= p.dense_cap {
        let op = FdOperator { p, diag: &diag, off };
        let mat = op.real_dense();
        let mut vals: Vec<f64> = nalgebra::SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals.truncate(m);
        vals
    } else {
        let op = FdOperator { p, diag: &diag, off };
        lobpcg(&op, m, opts)?.eigenvalues
    };

    let (bulk, edge_states) = match (p.edge_margin, p.dim, p.boundary) {
        (Some(frac), 1, Boundary::Dirichlet) => {
            let nodes = diag.len();
            let width = ((frac * p.length / p.spacing).round() as usize).min(nodes / 2);
            let mut bulk = Vec::with_capacity(m);
            for &lam in &eigenvalues {
                let x = inverse_iteration(&diag, off, lam);
                let edge: f64 = x[..width].iter().chain(&x[nodes - width..]).map(|v| v * v).sum();
                if edge <= 0.5 {
                    bulk.push(lam);
                }
            }
            let dropped = eigenvalues.len() - bulk.len();
            (bulk, dropped)
        }
        _ => (eigenvalues.clone(), 0),
    };
    Ok(RealSpaceSpectrum { eigenvalues, bulk, edge_states })
}

/// The finite-difference operator as a matrix-free Hermitian operator.
struct FdOperator<'p, 'a> {
    p: &'p RealSpaceProblem<'a>,
    diag: &'p [f64],
    off: f64,
}

impl FdOperator<'_, '_> {
    fn neighbours(&self, idx: usize, mut f: impl FnMut(usize)) {
        let n = self.p.nodes_per_axis();
        let periodic = self.p.boundary == Boundary::Periodic;
        let axes: Vec<(usize, usize)> = if self.p.dim == 1 {
            vec![(idx, 1)]
        } else {
            vec![(idx / n, n), (idx % n, 1)]
        };
        for (pos, stride) in axes {
            if pos > 0 {
                f(idx - stride);
            } else if periodic && n > 2 {
                f(idx + (n - 1) * stride);
            }
            if pos + 1 < n {
                f(idx + stride);
            } else if periodic && n > 2 {
                f(idx - (n - 1) * stride);
            }
        }
    }

    fn real_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut mat = DMatrix::zeros(n, n);
        for i in 0..n {
            mat[(i, i)] = self.diag[i];
            self.neighbours(i, |j| mat[(i, j)] += self.off);
        }
        mat
    }
}

impl HermitianOperator for FdOperator<'_, '_> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        for i in 0..x.len() {
            let mut acc = x[i] * self.diag[i];
            self.neighbours(i, |j| acc += x[j] * self.off);
            y[i] = acc;
        }
    }

    fn preconditioner_diagonal(&self) -> Vec<f64> {
        self.diag.to_vec()
    }
}

/// Two-sided distance between the points of `points` and the intervals of
/// `intervals`, both restricted to `window`: the larger of the farthest point
/// from its nearest interval and the farthest interval from its nearest point.
pub fn hausdorff_window(points: &[f64], intervals: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let mut pts: Vec<f64> = points.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
    let ivs: Vec<(f64, f64)> = intervals
        .iter()
        .filter(|&&(a, b)| b >= lo && a <= hi)
        .map(|&(a, b)| (a.max(lo), b.min(hi)))
        .collect();
    if pts.is_empty() || ivs.is_empty() {
        return Err(Error::EmptyWindow { lo, hi });
    }
    pts.sort_by(f64::total_cmp);

    let to_intervals = |x: f64| {
        ivs.iter()
            .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    };
    let to_points = |x: f64| {
        let i = pts.partition_point(|&p| p < x);
        let mut d = f64::INFINITY;
        if i < pts.len() {
            d = d.min(pts[i] - x);
        }
        if i > 0 {
            d = d.min(x - pts[i - 1]);
        }
        d
    };

    let forward = pts.iter().map(|&x| to_intervals(x)).fold(0.0, f64::max);
    // an interval is as far from the point set as its nearest point
    let back = ivs
        .iter()
        .map(|&(a, b)| {
            let i = pts.partition_point(|&p| p < a);
            if i < pts.len() && pts[i] <= b {
                0.0
            } else {
                to_points(a).min(to_points(b))
            }
        })
        .fold(0.0, f64::max);
    Ok(forward.max(back))
}

/// [`hausdorff_window`] against a spectrum estimate.
pub fn hausdorff_to_estimate(points: &[f64], est: &SpectrumEstimate, window: (f64, f64)) -> Result<f64> {
    hausdorff_window(points, &est.intervals, window)
}

#[cfg(test)]
mod tests;

//! Bloch solutions of the regularized fiber problem, their restriction to the
//! diagonal `r′ = r`, and residual certificates for the restricted functions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::SolverOptions;
use crate::error::{Error, Result};
use crate::geometry::{KPoint, ProductCell};
use crate::operator::{diagonal_frequencies, phason_weights, BasisMode, BlochHamiltonian, PlanewaveBasis};
use crate::potential::FourierPotential;
use crate::sweep::solve_fiber;

/// Frequencies closer than this are treated as one.
pub const MERGE_TOL: f64 = 1e-9;

/// An eigenpair of `H̃^δ(k̃)` with unit coefficient norm. The phase is fixed
/// so that the largest coefficient is real and positive.
#[derive(Clone, Debug)]
pub struct BlochSolution {
    pub basis: PlanewaveBasis,
    pub kpoint: KPoint,
    pub delta: f64,
    pub lambda: f64,
    pub coeffs: Vec<Complex64>,
}

impl BlochSolution {
    pub fn new(basis: PlanewaveBasis, kpoint: KPoint, delta: f64, lambda: f64, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: coeffs.len() });
        }
        let nrm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::InvalidArgument("coefficient vector has zero or non-finite norm".into()));
        }
        let mut big = 0;
        for (i, z) in coeffs.iter().enumerate() {
            if z.norm() > coeffs[big].norm() {
                big = i;
            }
        }
        let phase = coeffs[big].conj() / coeffs[big].norm();
        for z in coeffs.iter_mut() {
            *z = *z * phase / nrm;
        }
        coeffs[big].im = 0.0;
        Ok(BlochSolution { basis, kpoint, delta, lambda, coeffs })
    }

    /// Solve the fiber at `(k̃, δ)` and keep band `band` (0-based).
    pub fn solve(
        cell: &ProductCell,
        v1: &FourierPotential,
        v2: &FourierPotential,
        kpoint: &KPoint,
        delta: f64,
        band: usize,
        mode: BasisMode,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let (basis, mut res) = solve_fiber(cell, v1, v2, kpoint, delta, band + 1, mode, opts)?;
        let coeffs = res.eigenvectors.swap_remove(band);
        BlochSolution::new(basis, *kpoint, delta, res.eigenvalues[band], coeffs)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖H̃ṽ − λṽ‖` on the basis.
    pub fn fiber_residual(&self, v1: &FourierPotential, v2: &FourierPotential) -> Result<f64> {
        let h = BlochHamiltonian::new(&self.basis, self.kpoint, self.delta, v1, v2)?;
        let hv = h.apply(&self.coeffs)?;
        Ok(hv
            .iter()
            .zip(&self.coeffs)
            .map(|(a, b)| (a - b * self.lambda).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Norm of the couplings from the basis to indices outside it.
    pub fn truncation_leak(&self, v1: &FourierPotential, v2: &FourierPotential) -> Result<f64> {
        let h = BlochHamiltonian::new(&self.basis, self.kpoint, self.delta, v1, v2)?;
        h.truncation_leak(&self.coeffs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kpoint: KPoint,
    pub delta: f64,
    pub lambda: f64,
}

/// A finite trigonometric sum `Σ c e^{iω·r}` on `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriodicFunction {
    pub dim: usize,
    pub terms: Vec<([f64; 2], Complex64)>,
    pub provenance: Option<Provenance>,
}

impl QuasiPeriodicFunction {
    /// Build from raw terms, summing amplitudes whose frequencies agree within `tol`.
    pub fn from_terms(dim: usize, terms: Vec<([f64; 2], Complex64)>, tol: f64) -> Self {
        QuasiPeriodicFunction { dim, terms: merge_terms(terms, tol).0, provenance: None }
    }

    pub fn power(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm_sqr()).sum()
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| freq_norm(&t.0)).fold(0.0, f64::max)
    }

    /// `self − other`, merged.
    pub fn sub(&self, other: &QuasiPeriodicFunction) -> QuasiPeriodicFunction {
        let terms = self
            .terms
            .iter()
            .copied()
            .chain(other.terms.iter().map(|&(w, c)| (w, -c)))
            .collect();
        QuasiPeriodicFunction::from_terms(self.dim, terms, MERGE_TOL)
    }
}

fn freq_norm(w: &[f64; 2]) -> f64 {
    (w[0] * w[0] + w[1] * w[1]).sqrt()
}

/// Merge terms with frequencies within `tol` (sup norm). Returns the merged
/// terms, sorted by frequency, and the number of collisions.
fn merge_terms(mut terms: Vec<([f64; 2], Complex64)>, tol: f64) -> (Vec<([f64; 2], Complex64)>, usize) {
    terms.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]).then(a.0[1].total_cmp(&b.0[1])));
    let mut out: Vec<([f64; 2], Complex64)> = Vec::with_capacity(terms.len());
    let mut collisions = 0;
    for (w, c) in terms {
        let mut hit = None;
        for (i, t) in out.iter().enumerate().rev() {
            if t.0[0] < w[0] - tol {
                break;
            }
            if (t.0[1] - w[1]).abs() <= tol {
                hit = Some(i);
                break;
            }
        }
        match hit {
            Some(i) => {
                out[i].1 += c;
                collisions += 1;
            }
            None => out.push((w, c)),
        }
    }
    (out, collisions)
}

/// Restrict `ũ(r, r′)` to `r′ = r`: one term `(k + k′ + G₁ + G₂, ṽ(m, n))` per basis entry.
pub fn reconstruct_diagonal(sol: &BlochSolution) -> QuasiPeriodicFunction {
    let freqs = diagonal_frequencies(&sol.basis, &sol.kpoint);
    let terms = freqs.into_iter().zip(sol.coeffs.iter().copied()).collect();
    QuasiPeriodicFunction {
        dim: sol.basis.cell().dim(),
        terms: merge_terms(terms, MERGE_TOL).0,
        provenance: Some(Provenance { kpoint: sol.kpoint, delta: sol.delta, lambda: sol.lambda }),
    }
}

pub fn evaluate_qp(f: &QuasiPeriodicFunction, r: &[f64]) -> Complex64 {
    let r = [r[0], if f.dim > 1 { r[1] } else { 0.0 }];
    f.terms
        .iter()
        .map(|(w, c)| c * Complex64::from_polar(1.0, w[0] * r[0] + w[1] * r[1]))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `sqrt(Σ|c_res|²) / sqrt(Σ|ṽ|²)`, the mean-square residual of `(H − λ)u` relative to `u`.
    pub relative_ms_residual: f64,
    /// `(δ/2) max |k − k′ + G₁ − G₂|²` over the support of `ṽ`.
    pub bound: f64,
    /// False when residual frequencies collided and were merged.
    pub exact: bool,
    /// `(R, value)` pairs from ball quadrature.
    pub ball_residuals: Vec<(f64, f64)>,
    pub truncation_leak: Option<f64>,
    pub lambda: f64,
    pub delta: f64,
}

/// Frequency-space coefficients of `(H − λ)u`: `−(δ/2)|k − k′ + G₁ − G₂|² ṽ(m, n)`
/// at `ω = k + k′ + G₁ + G₂`.
pub fn residual_function(sol: &BlochSolution) -> (QuasiPeriodicFunction, usize) {
    let freqs = diagonal_frequencies(&sol.basis, &sol.kpoint);
    let w = phason_weights(&sol.basis, &sol.kpoint);
    let terms = freqs
        .into_iter()
        .zip(w.iter().zip(&sol.coeffs))
        .map(|(f, (&wi, &c))| (f, c * (-0.5 * sol.delta * wi)))
        .collect();
    let (terms, collisions) = merge_terms(terms, MERGE_TOL);
    (
        QuasiPeriodicFunction { dim: sol.basis.cell().dim(), terms, provenance: None },
        collisions,
    )
}

pub fn exact_residual(sol: &BlochSolution) -> ResidualReport {
    let (res, collisions) = residual_function(sol);
    let w = phason_weights(&sol.basis, &sol.kpoint);
    let wmax = w
        .iter()
        .zip(&sol.coeffs)
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(&x, _)| x)
        .fold(0.0, f64::max);
    ResidualReport {
        relative_ms_residual: res.power().sqrt() / sol.norm(),
        bound: 0.5 * sol.delta * wmax,
        exact: collisions == 0,
        ball_residuals: Vec::new(),
        truncation_leak: None,
        lambda: sol.lambda,
        delta: sol.delta,
    }
}

/// Midpoint nodes of a grid with spacing `1/q`, restricted to the ball of radius `radius`.
fn ball_nodes(dim: usize, radius: f64, q: usize) -> Vec<[f64; 2]> {
    let h = 1.0 / q as f64;
    let n = (2.0 * radius * q as f64).ceil() as usize;
    let x: Vec<f64> = (0..n).map(|i| -radius + (i as f64 + 0.5) * h).filter(|x| x.abs() <= radius).collect();
    if dim == 1 {
        return x.into_iter().map(|a| [a, 0.0]).collect();
    }
    let mut out = Vec::new();
    for &a in &x {
        for &b in &x {
            if a * a + b * b <= radius * radius {
                out.push([a, b]);
            }
        }
    }
    out
}

fn check_nyquist(omega_max: f64, q: usize) -> Result<()> {
    let needed = omega_max / std::f64::consts::PI;
    if (q as f64) <= needed {
        return Err(Error::QuadratureTooCoarse { got: q, needed });
    }
    Ok(())
}

/// Sums of `|f_i(r)|²` over the nodes for several functions, chunked in parallel
/// and reduced in a fixed order.
fn node_sums(fs: &[&QuasiPeriodicFunction], nodes: &[[f64; 2]]) -> Vec<f64> {
    let partial: Vec<Vec<f64>> = nodes
        .par_chunks(1024)
        .map(|chunk| {
            let mut acc = vec![0.0; fs.len()];
            for r in chunk {
                for (a, f) in acc.iter_mut().zip(fs) {
                    *a += evaluate_qp(f, r).norm_sqr();
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; fs.len()];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// `sqrt(∫_{B_R} |(H − λ)u|² / ∫_{B_R} |u|²)` by midpoint quadrature.
pub fn ball_residual(sol: &BlochSolution, radius: f64, quad_points_per_unit: usize) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
    }
    let u = reconstruct_diagonal(sol);
    let (res, _) = residual_function(sol);
    check_nyquist(u.max_frequency(), quad_points_per_unit)?;
    let nodes = ball_nodes(u.dim, radius, quad_points_per_unit);
    let sums = node_sums(&[&res, &u], &nodes);
    Ok((sums[0] / sums[1]).sqrt())
}

/// Sobolev-type norm of `f` on the ball of radius `radius`, order `t ≥ 0`.
///
/// Integer orders are `(Σ_{i≤j} mean_{B} |∇^i f|²)^{1/2}`, with `|∇^i f|²`
/// summed over all ordered index tuples; fractional orders interpolate
/// geometrically between the neighbouring integers. This is equivalent to the
/// standard norm on the ball up to constants depending on the radius.
pub fn ball_sobolev_norm(f: &QuasiPeriodicFunction, radius: f64, t: f64) -> f64 {
    let j0 = t.floor() as usize;
    let theta = t - j0 as f64;
    let orders = if theta > 0.0 { j0 + 1 } else { j0 };
    let q = ((1.5 * f.max_frequency() / std::f64::consts::PI).ceil() as usize).max(8);
    let nodes = ball_nodes(f.dim, radius, q);

    // ∂_{a_1}…∂_{a_i} f has coefficients c·Π(iω_{a_k})
    let mut levels = Vec::with_capacity(orders + 1);
    for i in 0..=orders {
        let tuples = index_tuples(f.dim, i);
        let derivs: Vec<QuasiPeriodicFunction> = tuples
            .iter()
            .map(|tuple| QuasiPeriodicFunction {
                dim: f.dim,
                terms: f
                    .terms
                    .iter()
                    .map(|&(w, c)| {
                        let factor = tuple
                            .iter()
                            .fold(Complex64::new(1.0, 0.0), |acc, &a| acc * Complex64::new(0.0, w[a]));
                        (w, c * factor)
                    })
                    .collect(),
                provenance: None,
            })
            .collect();
        let refs: Vec<&QuasiPeriodicFunction> = derivs.iter().collect();
        let sums = node_sums(&refs, &nodes);
        levels.push(sums.iter().sum::<f64>() / nodes.len().max(1) as f64);
    }
    let cumulative: Vec<f64> = levels
        .iter()
        .scan(0.0, |s, x| {
            *s += x;
            Some(*s)
        })
        .collect();
    let lo = cumulative[j0].sqrt();
    if theta == 0.0 {
        return lo;
    }
    let hi = cumulative[j0 + 1].sqrt();
    lo.powf(1.0 - theta) * hi.powf(theta)
}

fn index_tuples(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..order {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..dim).map(move |a| {
                    let mut u = t.clone();
                    u.push(a);
                    u
                })
            })
            .collect();
    }
    out
}

/// `sup_{x∈A} inf_{y∈B} ‖x − y‖` in the ball norm of order `s − d/2`.
pub fn solution_set_distance(
    set_a: &[QuasiPeriodicFunction],
    set_b: &[QuasiPeriodicFunction],
    radius: f64,
    s: f64,
) -> Result<f64> {
    if set_b.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(1.0..2.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("smoothness must lie in [1, 2), got {s}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
    }
    let mut sup = 0.0f64;
    for x in set_a {
        let t = (s - x.dim as f64 / 2.0).max(0.0);
        let inf = set_b
            .iter()
            .map(|y| ball_sobolev_norm(&x.sub(y), radius, t))
            .fold(f64::INFINITY, f64::min);
        sup = sup.max(inf);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests;

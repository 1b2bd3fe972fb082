//! The regularized fiber operator `H̃^δ(k̃)` on a finite planewave basis of
//! the product torus.
//!
//! A basis entry `(m, n)` is the planewave `e^{i(G₁·r + G₂·r′)}` with
//! `G₁ = 2πA₁^{-T}m`, `G₂ = 2πA₂^{-T}n`. With `a = k + G₁`, `b = k′ + G₂` the
//! operator acts as
//!
//! ```text
//! (Hψ)(m,n) = [½|a+b|² + (δ/2)|a−b|²] ψ(m,n)
//!           + Σ_q v̂₁(q) ψ(m−q, n) + Σ_q v̂₂(q) ψ(m, n−q)
//! ```
//!
//! Couplings that leave the basis are dropped (Galerkin projection), which keeps
//! the discrete operator Hermitian and variational in the basis.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{index_box, norm_sq, KPoint, LatticeIndex, ProductCell, ReciprocalLattice};
use crate::potential::FourierPotential;

/// Largest basis for which a dense matrix is assembled unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Truncation rule for the planewave basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BasisMode {
    /// Full tensor product of `|m|∞ ≤ radius1` and `|n|∞ ≤ radius2`.
    Box { radius1: i32, radius2: i32 },
    /// Entries whose regularized kinetic energy (or that of their negation)
    /// stays below `ecut` at the `(k̃, δ)` the basis was built for.
    EnergyCut { ecut: f64 },
}

/// Ordered set of planewave index pairs `(m, n)`.
#[derive(Clone, Debug)]
pub struct PlanewaveBasis {
    cell: ProductCell,
    mode: BasisMode,
    entries: Vec<(LatticeIndex, LatticeIndex)>,
    // EnergyCut only; Box positions are computed arithmetically
    lookup: HashMap<(LatticeIndex, LatticeIndex), usize>,
}

fn box_offset(dim: usize, radius: i32, m: LatticeIndex) -> Option<usize> {
    if m.inf_norm() > radius {
        return None;
    }
    let side = (2 * radius + 1) as usize;
    let i0 = (m.0[0] + radius) as usize;
    Some(match dim {
        1 => i0,
        _ => i0 * side + (m.0[1] + radius) as usize,
    })
}

impl PlanewaveBasis {
    /// Tensor-product box basis, ordered with `m` outermost.
    pub fn boxed(cell: ProductCell, radius1: i32, radius2: i32) -> Result<Self> {
        if radius1 < 0 || radius2 < 0 {
            return Err(Error::InvalidArgument("box radii must be non-negative".into()));
        }
        let dim = cell.dim();
        let ms = index_box(dim, radius1);
        let ns = index_box(dim, radius2);
        let entries = ms
            .iter()
            .flat_map(|&m| ns.iter().map(move |&n| (m, n)))
            .collect();
        Ok(PlanewaveBasis {
            cell,
            mode: BasisMode::Box { radius1, radius2 },
            entries,
            lookup: HashMap::new(),
        })
    }

    /// Energy-cutoff basis at a given fiber, closed under `(m, n) ↦ (−m, −n)`.
    pub fn energy_cut(cell: ProductCell, ecut: f64, kpoint: &KPoint, delta: f64) -> Result<Self> {
        if !(ecut >= 0.0) || !ecut.is_finite() {
            return Err(Error::InvalidArgument("ecut must be finite and non-negative".into()));
        }
        check_delta(delta)?;
        let dim = cell.dim();
        let (k, kp) = kpoint.cartesian(&cell);
        // ½|a+b|² + (δ/2)|a−b|² ≥ min{1,δ}(|a|²+|b|²) bounds each momentum
        let amax = (ecut / delta.min(1.0)).sqrt();
        let radius_for = |lat: &crate::geometry::Lattice, kk: &[f64; 2]| {
            let norm_a: f64 = lat.vectors().iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            ((amax + norm_sq(kk).sqrt()) * norm_a / (2.0 * std::f64::consts::PI)).ceil() as i32 + 1
        };
        let r1 = radius_for(&cell.lat1, &k);
        let r2 = radius_for(&cell.lat2, &kp);
        let ms = index_box(dim, r1);
        let ns = index_box(dim, r2);
        let kin = |m: LatticeIndex, n: LatticeIndex| {
            symbol(&cell.recip1, &cell.recip2, &k, &kp, m, n, delta)
        };
        let mut entries = Vec::new();
        for &m in &ms {
            for &n in &ns {
                if kin(m, n) <= ecut || kin(-m, -n) <= ecut {
                    entries.push((m, n));
                }
            }
        }
        let lookup = entries.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        Ok(PlanewaveBasis { cell, mode: BasisMode::EnergyCut { ecut }, entries, lookup })
    }

    pub fn cell(&self) -> &ProductCell {
        &self.cell
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(LatticeIndex, LatticeIndex)] {
        &self.entries
    }

    /// Position of `(m, n)` in the ordering, if present.
    pub fn position(&self, m: LatticeIndex, n: LatticeIndex) -> Option<usize> {
        match self.mode {
            BasisMode::Box { radius1, radius2 } => {
                let dim = self.cell.dim();
                let i = box_offset(dim, radius1, m)?;
                let j = box_offset(dim, radius2, n)?;
                let side2 = (2 * radius2 + 1).pow(dim as u32) as usize;
                Some(i * side2 + j)
            }
            BasisMode::EnergyCut { .. } => self.lookup.get(&(m, n)).copied(),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "regularization δ must be positive and finite, got {delta}"
        )));
    }
    Ok(())
}

/// `½|a+b|² + (δ/2)|a−b|²` with `a = k + G₁(m)`, `b = k′ + G₂(n)`.
fn symbol(
    r1: &ReciprocalLattice,
    r2: &ReciprocalLattice,
    k: &[f64; 2],
    kp: &[f64; 2],
    m: LatticeIndex,
    n: LatticeIndex,
    delta: f64,
) -> f64 {
    let g1 = r1.g(m);
    let g2 = r2.g(n);
    let a = [k[0] + g1[0], k[1] + g1[1]];
    let b = [kp[0] + g2[0], kp[1] + g2[1]];
    let plus = [a[0] + b[0], a[1] + b[1]];
    let minus = [a[0] - b[0], a[1] - b[1]];
    0.5 * norm_sq(&plus) + 0.5 * delta * norm_sq(&minus)
}

/// Regularized kinetic energy of every basis entry at `(k̃, δ)`.
pub fn kinetic_diag(basis: &PlanewaveBasis, kpoint: &KPoint, delta: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    Ok(kinetic_unchecked(basis, kpoint, delta))
}

fn kinetic_unchecked(basis: &PlanewaveBasis, kpoint: &KPoint, delta: f64) -> Vec<f64> {
    let cell = basis.cell();
    let (k, kp) = kpoint.cartesian(cell);
    basis
        .entries()
        .iter()
        .map(|&(m, n)| symbol(&cell.recip1, &cell.recip2, &k, &kp, m, n, delta))
        .collect()
}

/// Phason weight `|k − k′ + G₁ − G₂|²` of every basis entry; the regularizer
/// contributes `(δ/2)` times this.
pub fn phason_weights(basis: &PlanewaveBasis, kpoint: &KPoint) -> Vec<f64> {
    let cell = basis.cell();
    let (k, kp) = kpoint.cartesian(cell);
    basis
        .entries()
        .iter()
        .map(|&(m, n)| {
            let g1 = cell.recip1.g(m);
            let g2 = cell.recip2.g(n);
            norm_sq(&[k[0] + g1[0] - kp[0] - g2[0], k[1] + g1[1] - kp[1] - g2[1]])
        })
        .collect()
}

/// Diagonal frequency `k + k′ + G₁ + G₂` of every basis entry.
pub fn diagonal_frequencies(basis: &PlanewaveBasis, kpoint: &KPoint) -> Vec<[f64; 2]> {
    let cell = basis.cell();
    let (k, kp) = kpoint.cartesian(cell);
    basis
        .entries()
        .iter()
        .map(|&(m, n)| {
            let g1 = cell.recip1.g(m);
            let g2 = cell.recip2.g(n);
            [k[0] + kp[0] + g1[0] + g2[0], k[1] + kp[1] + g1[1] + g2[1]]
        })
        .collect()
}

/// `H̃^δ(k̃)` restricted to a planewave basis.
#[derive(Clone, Debug)]
pub struct BlochHamiltonian<'a> {
    basis: &'a PlanewaveBasis,
    kpoint: KPoint,
    delta: f64,
    v1: &'a FourierPotential,
    v2: &'a FourierPotential,
    kinetic: Vec<f64>,
    v1_terms: Vec<(LatticeIndex, Complex64)>,
    v2_terms: Vec<(LatticeIndex, Complex64)>,
}

impl<'a> BlochHamiltonian<'a> {
    pub fn new(
        basis: &'a PlanewaveBasis,
        kpoint: KPoint,
        delta: f64,
        v1: &'a FourierPotential,
        v2: &'a FourierPotential,
    ) -> Result<Self> {
        check_delta(delta)?;
        let cell = basis.cell();
        if kpoint.dim() != cell.dim() {
            return Err(Error::DimensionMismatch { expected: cell.dim(), found: kpoint.dim() });
        }
        if v1.lattice() != &cell.lat1 || v2.lattice() != &cell.lat2 {
            return Err(Error::InvalidArgument(
                "potential lattices do not match the product cell".into(),
            ));
        }
        Ok(BlochHamiltonian {
            basis,
            kpoint,
            delta,
            v1,
            v2,
            kinetic: kinetic_unchecked(basis, &kpoint, delta),
            v1_terms: v1.terms().collect(),
            v2_terms: v2.terms().collect(),
        })
    }

    pub fn basis(&self) -> &'a PlanewaveBasis {
        self.basis
    }

    pub fn kpoint(&self) -> &KPoint {
        &self.kpoint
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn potentials(&self) -> (&'a FourierPotential, &'a FourierPotential) {
        (self.v1, self.v2)
    }

    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `out = H psi` without allocating.
    pub fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        let n = self.dim();
        if psi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: psi.len() });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: out.len() });
        }
        for (pos, &(m, nn)) in self.basis.entries().iter().enumerate() {
            let mut acc = psi[pos] * self.kinetic[pos];
            for &(q, v) in &self.v1_terms {
                if let Some(src) = self.basis.position(m - q, nn) {
                    acc += v * psi[src];
                }
            }
            for &(q, v) in &self.v2_terms {
                if let Some(src) = self.basis.position(m, nn - q) {
                    acc += v * psi[src];
                }
            }
            out[pos] = acc;
        }
        Ok(())
    }

    /// Matrix-free `H psi`.
    pub fn apply(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::default(); self.dim()];
        self.apply_into(psi, &mut out)?;
        Ok(out)
    }

    /// Dense Hermitian matrix, filled on the upper triangle and mirrored.
    pub fn assemble_dense(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        let n = self.dim();
        if n > cap {
            return Err(Error::BasisTooLarge { size: n, cap });
        }
        let mut mat = DMatrix::<Complex64>::zeros(n, n);
        for (row, &(m, nn)) in self.basis.entries().iter().enumerate() {
            mat[(row, row)] += Complex64::new(self.kinetic[row], 0.0);
            for &(q, v) in &self.v1_terms {
                if let Some(col) = self.basis.position(m - q, nn) {
                    if col >= row {
                        mat[(row, col)] += v;
                    }
                }
            }
            for &(q, v) in &self.v2_terms {
                if let Some(col) = self.basis.position(m, nn - q) {
                    if col >= row {
                        mat[(row, col)] += v;
                    }
                }
            }
        }
        for row in 0..n {
            mat[(row, row)].im = 0.0;
            for col in row + 1..n {
                mat[(col, row)] = mat[(row, col)].conj();
            }
        }
        Ok(mat)
    }

    /// Norm of the part of `H psi` that the Galerkin truncation drops: the
    /// couplings from basis entries to indices outside the basis.
    pub fn truncation_leak(&self, psi: &[Complex64]) -> Result<f64> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        let mut outside: HashMap<(LatticeIndex, LatticeIndex), Complex64> = HashMap::new();
        for (pos, &(m, nn)) in self.basis.entries().iter().enumerate() {
            for &(q, v) in &self.v1_terms {
                let target = (m + q, nn);
                if self.basis.position(target.0, target.1).is_none() {
                    *outside.entry(target).or_default() += v * psi[pos];
                }
            }
            for &(q, v) in &self.v2_terms {
                let target = (m, nn + q);
                if self.basis.position(target.0, target.1).is_none() {
                    *outside.entry(target).or_default() += v * psi[pos];
                }
            }
        }
        let mut vals: Vec<_> = outside.into_iter().collect();
        vals.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(vals.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>().sqrt())
    }
}

/// Dense `−Δ + V` for a single layer at quasi-momentum `k` (fractional), on
/// `|m|∞ ≤ radius`. With δ = 1 the bilayer fiber operator is the Kronecker sum
/// of two of these.
pub fn monolayer_dense(potential: &FourierPotential, k_frac: &[f64], radius: i32) -> DMatrix<Complex64> {
    let dim = potential.dim();
    let recip = potential.reciprocal();
    let k = recip.to_cartesian(k_frac);
    let idx = index_box(dim, radius);
    let n = idx.len();
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for (i, &m) in idx.iter().enumerate() {
        for (j, &mp) in idx.iter().enumerate() {
            let mut v = potential.coefficient(m - mp);
            if i == j {
                let g = recip.g(m);
                v += norm_sq(&[k[0] + g[0], k[1] + g[1]]);
            }
            mat[(i, j)] = v;
        }
    }
    mat
}

/// Index permutation relating the fibers at `k̃` and `k̃ + τ̃*`, where
/// `τ̃* = (B₁p, B₂q)`: the entry `(m, n)` at the shifted fiber carries the same
/// kinetic energy as `(m + p, n + q)` at the original one.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftCertificate {
    pub shift: (LatticeIndex, LatticeIndex),
    /// `(position of e, position of π(e))` for entries whose image stays in the basis.
    pub map: Vec<(usize, usize)>,
}

impl ShiftCertificate {
    /// Positions `e` for which the image is inside the basis.
    pub fn interior(&self) -> Vec<usize> {
        self.map.iter().map(|&(e, _)| e).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|&(a, b)| a == b)
    }
}

/// Decompose a Cartesian `τ̃* = (τ, τ′)` into reciprocal lattice indices.
pub fn reciprocal_shift(cell: &ProductCell, tau: &[f64], taup: &[f64]) -> Result<(LatticeIndex, LatticeIndex)> {
    let dim = cell.dim();
    let to_index = |r: &ReciprocalLattice, v: &[f64]| -> Result<LatticeIndex> {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
        }
        let f = r.to_fractional(v);
        let mut comps = [0i32; 2];
        for i in 0..dim {
            let rounded = f[i].round();
            if (f[i] - rounded).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "shift is not a reciprocal lattice vector (fractional {:.6})",
                    f[i]
                )));
            }
            comps[i] = rounded as i32;
        }
        Ok(LatticeIndex(comps))
    };
    Ok((to_index(&cell.recip1, tau)?, to_index(&cell.recip2, taup)?))
}

/// Certificate of Bloch–Floquet periodicity of the fiber family on a Box basis.
pub fn fiber_shift_equivalence(
    basis: &PlanewaveBasis,
    shift: (LatticeIndex, LatticeIndex),
) -> Result<ShiftCertificate> {
    if !matches!(basis.mode(), BasisMode::Box { .. }) {
        return Err(Error::InvalidArgument("fiber shift certificates need a Box basis".into()));
    }
    let (p, q) = shift;
    let map = basis
        .entries()
        .iter()
        .enumerate()
        .filter_map(|(pos, &(m, n))| basis.position(m + p, n + q).map(|img| (pos, img)))
        .collect();
    Ok(ShiftCertificate { shift, map })
}

/// Shift a fiber parameter by a reciprocal lattice vector without wrapping.
/// The result is generally outside the unit cell; it is only meaningful as an
/// argument to the operator, which depends on Cartesian `k̃`.
pub fn shifted_kpoint(kpoint: &KPoint, shift: (LatticeIndex, LatticeIndex)) -> UnwrappedKPoint {
    let dim = kpoint.dim();
    let mut k = [0.0; 2];
    let mut kp = [0.0; 2];
    for i in 0..dim {
        k[i] = kpoint.k_frac()[i] + shift.0 .0[i] as f64;
        kp[i] = kpoint.kp_frac()[i] + shift.1 .0[i] as f64;
    }
    UnwrappedKPoint { dim, k, kp }
}

/// Fractional `k̃` not reduced to the unit cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnwrappedKPoint {
    dim: usize,
    k: [f64; 2],
    kp: [f64; 2],
}

impl UnwrappedKPoint {
    /// Kinetic diagonal at this unreduced fiber parameter.
    pub fn kinetic_diag(&self, basis: &PlanewaveBasis, delta: f64) -> Result<Vec<f64>> {
        check_delta(delta)?;
        let cell = basis.cell();
        let k = cell.recip1.to_cartesian(&self.k[..self.dim]);
        let kp = cell.recip2.to_cartesian(&self.kp[..self.dim]);
        Ok(basis
            .entries()
            .iter()
            .map(|&(m, n)| symbol(&cell.recip1, &cell.recip2, &k, &kp, m, n, delta))
            .collect())
    }
}

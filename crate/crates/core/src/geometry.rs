//! Bravais lattices, their reciprocals, the product cell of a bilayer, and
//! sampling of the product Brillouin zone.
//!
//! Everything here is restricted to `d ∈ {1, 2}`. Vectors are passed as
//! slices of length `d`; internally they are padded into `[f64; 2]`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Fixed-size 2×2 matrix used for `d ≤ 2`; for `d = 1` only `[0][0]` is live.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Mat {
    dim: usize,
    // row-major
    a: [[f64; 2]; 2],
}

impl Mat {
    fn det(&self) -> f64 {
        match self.dim {
            1 => self.a[0][0],
            _ => self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0],
        }
    }

    fn transpose(&self) -> Mat {
        let mut a = self.a;
        a[0][1] = self.a[1][0];
        a[1][0] = self.a[0][1];
        Mat { dim: self.dim, a }
    }

    fn inverse(&self) -> Mat {
        let det = self.det();
        let a = match self.dim {
            1 => [[1.0 / self.a[0][0], 0.0], [0.0, 0.0]],
            _ => [
                [self.a[1][1] / det, -self.a[0][1] / det],
                [-self.a[1][0] / det, self.a[0][0] / det],
            ],
        };
        Mat { dim: self.dim, a }
    }

    fn scale(&self, s: f64) -> Mat {
        let mut a = self.a;
        for row in a.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        Mat { dim: self.dim, a }
    }

    pub(crate) fn mul_vec(&self, v: &[f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..self.dim).map(|j| self.a[i][j] * v[j]).sum();
        }
        out
    }

    pub(crate) fn mul_index(&self, m: LatticeIndex) -> [f64; 2] {
        self.mul_vec(&[m.0[0] as f64, m.0[1] as f64])
    }

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.a[i][j]).collect()
    }
}

pub(crate) fn pad(v: &[f64]) -> [f64; 2] {
    let mut out = [0.0; 2];
    out[..v.len()].copy_from_slice(v);
    out
}

pub(crate) fn norm_sq(v: &[f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

/// Integer coordinate vector in `Z^d`; components beyond `d` are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeIndex(pub [i32; 2]);

impl LatticeIndex {
    pub const ZERO: LatticeIndex = LatticeIndex([0, 0]);

    pub fn new(components: &[i32]) -> Self {
        let mut c = [0; 2];
        c[..components.len()].copy_from_slice(components);
        LatticeIndex(c)
    }

    pub fn as_slice(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }

    pub fn inf_norm(&self) -> i32 {
        self.0[0].abs().max(self.0[1].abs())
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0, 0]
    }
}

impl std::ops::Add for LatticeIndex {
    type Output = LatticeIndex;
    fn add(self, o: LatticeIndex) -> LatticeIndex {
        LatticeIndex([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl std::ops::Sub for LatticeIndex {
    type Output = LatticeIndex;
    fn sub(self, o: LatticeIndex) -> LatticeIndex {
        LatticeIndex([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl std::ops::Neg for LatticeIndex {
    type Output = LatticeIndex;
    fn neg(self) -> LatticeIndex {
        LatticeIndex([-self.0[0], -self.0[1]])
    }
}

impl fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0[0], self.0[1])
    }
}

/// Enumerate all integer vectors with `|m|∞ ≤ radius`, lexicographically.
pub fn index_box(dim: usize, radius: i32) -> Vec<LatticeIndex> {
    let r = radius;
    match dim {
        1 => (-r..=r).map(|i| LatticeIndex([i, 0])).collect(),
        _ => (-r..=r)
            .flat_map(|i| (-r..=r).map(move |j| LatticeIndex([i, j])))
            .collect(),
    }
}

/// A Bravais lattice `{A n : n ∈ Z^d}`; the columns of `A` are the lattice vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    basis: Mat,
}

impl Lattice {
    /// Build from lattice vectors (the columns of `A`).
    pub fn new(vectors: &[Vec<f64>]) -> Result<Self> {
        let dim = vectors.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidLattice(format!("dimension {dim} not in {{1, 2}}")));
        }
        let mut a = [[0.0; 2]; 2];
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::InvalidLattice(format!(
                    "lattice vector {j} has {} components, expected {dim}",
                    v.len()
                )));
            }
            for (i, &x) in v.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidLattice("non-finite entry".into()));
                }
                a[i][j] = x;
            }
        }
        let basis = Mat { dim, a };
        let det = basis.det();
        let scale = vectors.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
        if det.abs() <= 1e-12 * scale.powi(dim as i32) || det == 0.0 {
            return Err(Error::InvalidLattice(format!("|det A| = {:.3e}", det.abs())));
        }
        Ok(Lattice { basis })
    }

    /// One-dimensional lattice with spacing `a`.
    pub fn line(a: f64) -> Result<Self> {
        Lattice::new(&[vec![a]])
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    /// Lattice vector `j` (column `j` of `A`).
    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.basis.column(j)
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|j| self.vector(j)).collect()
    }

    /// Measure of the unit cell `|det A|`.
    pub fn cell_volume(&self) -> f64 {
        self.basis.det().abs()
    }

    /// Cartesian position of the fractional point `f` (`A f`).
    pub fn to_cartesian(&self, frac: &[f64]) -> Vec<f64> {
        self.basis.mul_vec(&pad(frac))[..self.dim()].to_vec()
    }

    pub(crate) fn matrix(&self) -> &Mat {
        &self.basis
    }
}

/// Reciprocal lattice with basis `B = 2π A^{-T}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReciprocalLattice {
    basis: Mat,
    // B^{-1} = A^T / 2π, kept for fractional conversions
    inverse: Mat,
}

impl ReciprocalLattice {
    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.basis.column(j)
    }

    /// Cartesian reciprocal vector `G = B m`.
    pub fn g(&self, m: LatticeIndex) -> [f64; 2] {
        self.basis.mul_index(m)
    }

    /// Cartesian point of fractional reciprocal coordinates.
    pub fn to_cartesian(&self, frac: &[f64]) -> [f64; 2] {
        self.basis.mul_vec(&pad(frac))
    }

    /// Fractional coordinates of a Cartesian reciprocal-space point.
    pub fn to_fractional(&self, k: &[f64]) -> [f64; 2] {
        self.inverse.mul_vec(&pad(k))
    }

    /// View `B` as a direct lattice (its columns as lattice vectors).
    pub fn as_lattice(&self) -> Lattice {
        Lattice { basis: self.basis }
    }

    /// Largest entry of `|Bᵀ A − 2π I|`.
    pub fn duality_error(&self, lat: &Lattice) -> f64 {
        let bt = self.basis.transpose();
        let a = lat.matrix();
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let v: f64 = (0..d).map(|l| bt.a[i][l] * a.a[l][j]).sum();
                let target = if i == j { TWO_PI } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// `B = 2π (A^{-1})ᵀ`.
pub fn reciprocal(lat: &Lattice) -> ReciprocalLattice {
    let basis = lat.matrix().inverse().transpose().scale(TWO_PI);
    let inverse = lat.matrix().transpose().scale(1.0 / TWO_PI);
    ReciprocalLattice { basis, inverse }
}

/// The product lattice `R₁ × R₂` of a bilayer together with both reciprocals.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductCell {
    pub lat1: Lattice,
    pub lat2: Lattice,
    pub recip1: ReciprocalLattice,
    pub recip2: ReciprocalLattice,
}

impl ProductCell {
    pub fn new(lat1: Lattice, lat2: Lattice) -> Result<Self> {
        if lat1.dim() != lat2.dim() {
            return Err(Error::DimensionMismatch {
                expected: lat1.dim(),
                found: lat2.dim(),
            });
        }
        let recip1 = reciprocal(&lat1);
        let recip2 = reciprocal(&lat2);
        Ok(ProductCell { lat1, lat2, recip1, recip2 })
    }

    pub fn dim(&self) -> usize {
        self.lat1.dim()
    }
}

/// Fiber parameter `k̃ = (k, k′)` stored in fractional coordinates of Γ₁* × Γ₂*.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    dim: usize,
    k: [f64; 2],
    kp: [f64; 2],
}

fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl KPoint {
    /// Build from fractional coordinates, wrapping each into `[0, 1)`.
    pub fn from_fractional(k: &[f64], kp: &[f64]) -> Result<Self> {
        if k.len() != kp.len() || !(1..=2).contains(&k.len()) {
            return Err(Error::DimensionMismatch {
                expected: k.len(),
                found: kp.len(),
            });
        }
        if k.iter().chain(kp).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite k-point coordinate".into()));
        }
        let mut kk = pad(k);
        let mut kkp = pad(kp);
        for x in kk.iter_mut().chain(kkp.iter_mut()).take(4) {
            *x = wrap_unit(*x);
        }
        Ok(KPoint { dim: k.len(), k: kk, kp: kkp })
    }

    /// `k̃ = 0`.
    pub fn gamma(dim: usize) -> Self {
        KPoint { dim, k: [0.0; 2], kp: [0.0; 2] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_frac(&self) -> &[f64] {
        &self.k[..self.dim]
    }

    pub fn kp_frac(&self) -> &[f64] {
        &self.kp[..self.dim]
    }

    /// Cartesian `(k, k′)`.
    pub fn cartesian(&self, cell: &ProductCell) -> ([f64; 2], [f64; 2]) {
        (
            cell.recip1.to_cartesian(self.k_frac()),
            cell.recip2.to_cartesian(self.kp_frac()),
        )
    }
}

/// Uniform cell-midpoint grid over Γ₁* × Γ₂*, `n^(2d)` points in lexicographic
/// order with the `k` axes outermost.
pub fn kgrid(cell: &ProductCell, n_per_axis: usize) -> Result<Vec<KPoint>> {
    kgrid_offset(cell, n_per_axis, 0.5)
}

/// Uniform grid with fractional coordinates `(i + offset) / n`; offset 0 contains Γ.
pub fn kgrid_offset(cell: &ProductCell, n_per_axis: usize, offset: f64) -> Result<Vec<KPoint>> {
    if !(0.0..1.0).contains(&offset) {
        return Err(Error::InvalidArgument(format!("grid offset must lie in [0, 1), got {offset}")));
    }
    if n_per_axis == 0 {
        return Err(Error::InvalidArgument("k-grid needs at least one point per axis".into()));
    }
    let dim = cell.dim();
    let axes = 2 * dim;
    let n = n_per_axis;
    let total = n.pow(axes as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut digits = [0usize; 4];
        let mut rem = flat;
        for slot in (0..axes).rev() {
            digits[slot] = rem % n;
            rem /= n;
        }
        let coord = |i: usize| (digits[i] as f64 + offset) / n as f64;
        let k: Vec<f64> = (0..dim).map(coord).collect();
        let kp: Vec<f64> = (dim..axes).map(coord).collect();
        out.push(KPoint::from_fractional(&k, &kp)?);
    }
    Ok(out)
}

/// Reduce a Cartesian `k̃` into Γ̃* by a reciprocal lattice translation.
pub fn wrap_k(cell: &ProductCell, k: &[f64], kp: &[f64]) -> Result<KPoint> {
    let dim = cell.dim();
    if k.len() != dim || kp.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: k.len().max(kp.len()),
        });
    }
    let fk = cell.recip1.to_fractional(k);
    let fkp = cell.recip2.to_fractional(kp);
    KPoint::from_fractional(&fk[..dim], &fkp[..dim])
}

/// Outcome of the commensurability search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Commensurability {
    /// `2πA₁^{-T} m = 2πA₂^{-T} n` within tolerance.
    Commensurate { m: LatticeIndex, n: LatticeIndex },
    /// No shared nonzero reciprocal vector with `|m|∞, |n|∞ ≤ qmax`.
    NoWitnessUpTo(usize),
}

impl Commensurability {
    pub fn is_commensurate(&self) -> bool {
        matches!(self, Commensurability::Commensurate { .. })
    }
}

/// Search for a shared nonzero reciprocal lattice vector.
///
/// Only the half-space of `m` whose first nonzero component is positive is
/// searched; `(-m, -n)` is always a witness alongside `(m, n)`. The smallest
/// witness by `|m|∞ + |n|∞` wins, ties broken lexicographically.
pub fn incommensurability_check(
    lat1: &Lattice,
    lat2: &Lattice,
    qmax: usize,
    tol: f64,
) -> Result<Commensurability> {
    if qmax == 0 {
        return Err(Error::InvalidArgument("qmax must be at least 1".into()));
    }
    if lat1.dim() != lat2.dim() {
        return Err(Error::DimensionMismatch {
            expected: lat1.dim(),
            found: lat2.dim(),
        });
    }
    let dim = lat1.dim();
    let r1 = reciprocal(lat1);
    let r2 = reciprocal(lat2);
    let q = qmax as i32;
    let mut best: Option<(i32, LatticeIndex, LatticeIndex)> = None;

    for m in index_box(dim, q) {
        let lead = if m.0[0] != 0 { m.0[0] } else { m.0[1] };
        if lead <= 0 {
            continue;
        }
        let g1 = r1.g(m);
        let x = r2.to_fractional(&g1[..dim]);
        let base = [x[0].round() as i32, x[1].round() as i32];
        let offsets: &[i32] = &[-1, 0, 1];
        for &o0 in offsets {
            for &o1 in if dim == 2 { offsets } else { &[0][..] } {
                let n = LatticeIndex([base[0] + o0, if dim == 2 { base[1] + o1 } else { 0 }]);
                if n.is_zero() || n.inf_norm() > q {
                    continue;
                }
                let g2 = r2.g(n);
                let diff = [g1[0] - g2[0], g1[1] - g2[1]];
                if norm_sq(&diff).sqrt() > tol {
                    continue;
                }
                let size = m.inf_norm() + n.inf_norm();
                let better = match &best {
                    None => true,
                    Some((s, bm, bn)) => (size, m, n) < (*s, *bm, *bn),
                };
                if better {
                    best = Some((size, m, n));
                }
            }
        }
    }
    Ok(match best {
        Some((_, m, n)) => Commensurability::Commensurate { m, n },
        None => Commensurability::NoWitnessUpTo(qmax),
    })
}

//! Real periodic potentials stored as finite Fourier series on their own
//! reciprocal lattice.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{index_box, pad, reciprocal, Lattice, LatticeIndex, ReciprocalLattice};

/// Tolerance on `|v̂(-m) - conj v̂(m)|` relative to the largest amplitude.
const HERMITIAN_TOL: f64 = 1e-12;

/// A real potential `V(r) = Σ_m v̂(m) e^{i G_m·r}`, `G_m = 2πA^{-T} m`.
///
/// Coefficients are keyed by the integer index `m`, never by Cartesian `G`.
/// Construction enforces exact conjugate symmetry, so every operator built
/// from these coefficients is exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPotential {
    lattice: Lattice,
    recip: ReciprocalLattice,
    coeffs: BTreeMap<LatticeIndex, Complex64>,
}

impl FourierPotential {
    /// Build from `(m, v̂(m))` pairs. Duplicate indices are summed. Fails if the
    /// pairs are not conjugate-symmetric to within `1e-12` of the largest amplitude.
    pub fn new(
        lattice: Lattice,
        coeffs: impl IntoIterator<Item = (LatticeIndex, Complex64)>,
    ) -> Result<Self> {
        let dim = lattice.dim();
        let mut raw: BTreeMap<LatticeIndex, Complex64> = BTreeMap::new();
        for (m, v) in coeffs {
            if dim == 1 && m.0[1] != 0 {
                return Err(Error::DimensionMismatch { expected: 1, found: 2 });
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite coefficient at {m}")));
            }
            *raw.entry(m).or_default() += v;
        }
        let scale = raw.values().fold(0.0f64, |s, v| s.max(v.norm()));
        let mut violation = 0.0f64;
        let mut coeffs = BTreeMap::new();
        for (&m, &v) in &raw {
            let partner = raw.get(&-m).copied().unwrap_or_default();
            violation = violation.max((v - partner.conj()).norm());
            let sym = (v + partner.conj()) * 0.5;
            if sym != Complex64::default() {
                coeffs.insert(m, sym);
            }
        }
        // also catch m present while -m is missing entirely
        for (&m, &v) in &raw {
            if !raw.contains_key(&-m) {
                violation = violation.max(v.norm());
            }
        }
        if violation > HERMITIAN_TOL * scale.max(1.0) {
            return Err(Error::NotHermitian { violation });
        }
        if let Some(v0) = coeffs.get_mut(&LatticeIndex::ZERO) {
            v0.im = 0.0;
        }
        let recip = reciprocal(&lattice);
        Ok(FourierPotential { lattice, recip, coeffs })
    }

    /// The zero potential.
    pub fn zero(lattice: Lattice) -> Self {
        let recip = reciprocal(&lattice);
        FourierPotential { lattice, recip, coeffs: BTreeMap::new() }
    }

    /// Constant potential `c`.
    pub fn constant(lattice: Lattice, c: f64) -> Self {
        let mut v = FourierPotential::zero(lattice);
        if c != 0.0 {
            v.coeffs.insert(LatticeIndex::ZERO, Complex64::new(c, 0.0));
        }
        v
    }

    /// `V(r) = 2 a cos(G_m · r)`, i.e. `v̂(±m) = a`.
    pub fn cosine_pair(lattice: Lattice, m: LatticeIndex, a: f64) -> Result<Self> {
        let c = Complex64::new(a, 0.0);
        if m.is_zero() {
            return Ok(FourierPotential::constant(lattice, 2.0 * a));
        }
        FourierPotential::new(lattice, [(m, c), (-m, c)])
    }

    /// Ingest `n^d` real samples taken at the fractional grid points `j / n`
    /// (row-major, first axis slowest), keeping coefficients with `|m|∞ ≤ radius`.
    ///
    /// Coefficients below `1e-13` of the largest are dropped as round-off.
    pub fn from_samples(lattice: Lattice, samples: &[f64], n: usize, radius: usize) -> Result<Self> {
        let dim = lattice.dim();
        let expected = n.pow(dim as u32);
        if samples.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: samples.len() });
        }
        let needed = 2 * radius + 1;
        if n < needed {
            return Err(Error::Aliasing { radius, needed, got: n });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        let norm = 1.0 / expected as f64;
        let mut raw = Vec::new();
        for m in index_box(dim, radius as i32) {
            let mut acc = Complex64::default();
            for (flat, &f) in samples.iter().enumerate() {
                let j = if dim == 1 { [flat, 0] } else { [flat / n, flat % n] };
                let phase = -2.0 * PI * (m.0[0] as f64 * j[0] as f64 + m.0[1] as f64 * j[1] as f64)
                    / n as f64;
                acc += f * Complex64::from_polar(1.0, phase);
            }
            raw.push((m, acc * norm));
        }
        let scale = raw.iter().fold(0.0f64, |s, (_, v)| s.max(v.norm()));
        let kept: Vec<_> = raw
            .into_iter()
            .filter(|(_, v)| v.norm() > 1e-13 * scale)
            .collect();
        // Real input is conjugate-symmetric up to round-off; symmetrize so the
        // strict check in `new` does not trip on accumulated error.
        let map: BTreeMap<_, _> = kept.iter().copied().collect();
        let sym = kept.iter().map(|&(m, v)| {
            let partner = map.get(&-m).copied().unwrap_or_default();
            (m, (v + partner.conj()) * 0.5)
        });
        FourierPotential::new(lattice, sym.collect::<Vec<_>>())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// `v̂(m)`, zero off the support.
    pub fn coefficient(&self, m: LatticeIndex) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or_default()
    }

    /// Nonzero coefficients in index order.
    pub fn terms(&self) -> impl Iterator<Item = (LatticeIndex, Complex64)> + '_ {
        self.coeffs.iter().map(|(&m, &v)| (m, v))
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    /// Largest `|m|∞` carrying a nonzero coefficient (0 for the empty series).
    pub fn radius(&self) -> i32 {
        self.coeffs.keys().map(|m| m.inf_norm()).max().unwrap_or(0)
    }

    /// Mean of `|V|²` over a cell, `Σ |v̂(m)|²`.
    pub fn mean_square(&self) -> f64 {
        self.coeffs.values().map(|v| v.norm_sqr()).sum()
    }

    /// `‖V‖²_{L²(Γ)} = |Γ| Σ |v̂(m)|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.lattice.cell_volume() * self.mean_square()
    }

    /// Point value `V(r)`; the imaginary residue must stay at round-off level.
    pub fn evaluate(&self, r: &[f64]) -> Result<f64> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: r.len() });
        }
        let r = pad(r);
        let mut acc = Complex64::default();
        let mut scale = 0.0;
        for (&m, &v) in &self.coeffs {
            let g = self.recip.g(m);
            acc += v * Complex64::from_polar(1.0, g[0] * r[0] + g[1] * r[1]);
            scale += v.norm();
        }
        if acc.im.abs() > 1e-9 * scale.max(1.0) {
            return Err(Error::CorruptedCoefficients { residue: acc.im.abs() });
        }
        Ok(acc.re)
    }

    pub(crate) fn reciprocal(&self) -> &ReciprocalLattice {
        &self.recip
    }
}

/// Coefficient view of `Ṽ(r, r′) = V₁(r) + V₂(r′)` on the product lattice.
///
/// `V₁` lives on the `(m, 0)` axis, `V₂` on the `(0, n)` axis, and the two
/// constants meet at `(0, 0)`.
#[derive(Clone, Copy, Debug)]
pub struct PairPotential<'a> {
    pub v1: &'a FourierPotential,
    pub v2: &'a FourierPotential,
}

pub fn pair_indexing<'a>(v1: &'a FourierPotential, v2: &'a FourierPotential) -> PairPotential<'a> {
    PairPotential { v1, v2 }
}

impl PairPotential<'_> {
    pub fn coefficient(&self, m: LatticeIndex, n: LatticeIndex) -> Complex64 {
        match (m.is_zero(), n.is_zero()) {
            (true, true) => self.v1.coefficient(m) + self.v2.coefficient(n),
            (false, true) => self.v1.coefficient(m),
            (true, false) => self.v2.coefficient(n),
            (false, false) => Complex64::default(),
        }
    }

    /// All nonzero combined coefficients, `(m, n)` ordered.
    pub fn nonzero(&self) -> Vec<((LatticeIndex, LatticeIndex), Complex64)> {
        let z = LatticeIndex::ZERO;
        let mut out: BTreeMap<(LatticeIndex, LatticeIndex), Complex64> = BTreeMap::new();
        for (m, v) in self.v1.terms() {
            *out.entry((m, z)).or_default() += v;
        }
        for (n, v) in self.v2.terms() {
            *out.entry((z, n)).or_default() += v;
        }
        out.into_iter().filter(|(_, v)| *v != Complex64::default()).collect()
    }

    /// `V₁(r) + V₂(r′)`.
    pub fn evaluate(&self, r: &[f64], rp: &[f64]) -> Result<f64> {
        Ok(self.v1.evaluate(r)? + self.v2.evaluate(rp)?)
    }
}

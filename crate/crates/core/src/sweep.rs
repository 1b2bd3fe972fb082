//! Band structures over k̃-grids, spectrum unions, and the δ → 0⁺ ladder.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{lowest_eigenpairs, EigenResult, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::{KPoint, ProductCell};
use crate::operator::{BasisMode, BlochHamiltonian, PlanewaveBasis};
use crate::potential::FourierPotential;

pub const DEFAULT_LADDER: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

/// Number of smallest rungs used by the linear fit.
pub const FIT_POINTS: usize = 3;

/// Slack allowed when checking that eigenvalues decrease with δ.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Basis and solver settings a sweep was run with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub basis: BasisMode,
    pub bands: usize,
    pub solver: SolverOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub kpoints: Vec<KPoint>,
    pub delta: f64,
    /// `bands[r][j]` is the `j`-th eigenvalue at `kpoints[r]`, ascending in `j`.
    pub bands: Vec<Vec<f64>>,
    pub meta: SweepMeta,
}

/// Regularization a spectrum estimate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaTag {
    Fixed(f64),
    Extrapolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Sorted, pairwise disjoint closed intervals.
    pub intervals: Vec<(f64, f64)>,
    pub delta: DeltaTag,
    /// Number of k̃-points sampled.
    pub coverage: usize,
}

impl SpectrumEstimate {
    /// Open gaps between consecutive intervals.
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.intervals.windows(2).map(|w| (w[0].1, w[1].0)).collect()
    }

    pub fn contains(&self, e: f64, slack: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| e >= lo - slack && e <= hi + slack)
    }
}

/// Build the basis for one fiber.
pub fn fiber_basis(cell: &ProductCell, mode: BasisMode, kpoint: &KPoint, delta: f64) -> Result<PlanewaveBasis> {
    match mode {
        BasisMode::Box { radius1, radius2 } => PlanewaveBasis::boxed(cell.clone(), radius1, radius2),
        BasisMode::EnergyCut { ecut } => PlanewaveBasis::energy_cut(cell.clone(), ecut, kpoint, delta),
    }
}

/// Lowest `m` eigenpairs of one fiber operator.
pub fn solve_fiber(
    cell: &ProductCell,
    v1: &FourierPotential,
    v2: &FourierPotential,
    kpoint: &KPoint,
    delta: f64,
    m: usize,
    mode: BasisMode,
    opts: &SolverOptions,
) -> Result<(PlanewaveBasis, EigenResult)> {
    let basis = fiber_basis(cell, mode, kpoint, delta)?;
    let res = {
        let h = BlochHamiltonian::new(&basis, *kpoint, delta, v1, v2)?;
        lowest_eigenpairs(&h, m, opts)?
    };
    Ok((basis, res))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("regularization must be positive, got {delta}")));
    }
    Ok(())
}

/// Lowest `m` bands at every point of `kgrid`.
///
/// Fibers run in parallel; each gets a starting block seeded from its grid
/// index, so the result does not depend on the schedule.
pub fn band_structure(
    cell: &ProductCell,
    v1: &FourierPotential,
    v2: &FourierPotential,
    delta: f64,
    kgrid: &[KPoint],
    m: usize,
    mode: BasisMode,
    opts: &SolverOptions,
) -> Result<BandStructure> {
    check_delta(delta)?;
    opts.validate()?;
    let rows: Vec<Result<Vec<f64>>> = kgrid
        .par_iter()
        .enumerate()
        .map(|(r, k)| {
            let o = opts.reseeded(&[r as u64, delta.to_bits()]);
            solve_fiber(cell, v1, v2, k, delta, m, mode, &o).map(|(_, res)| res.eigenvalues)
        })
        .collect();
    let mut bands = Vec::with_capacity(rows.len());
    for (index, row) in rows.into_iter().enumerate() {
        match row {
            Ok(v) => bands.push(v),
            Err(e) => return Err(Error::Fiber { index, source: Box::new(e) }),
        }
    }
    Ok(BandStructure {
        kpoints: kgrid.to_vec(),
        delta,
        bands,
        meta: SweepMeta { basis: mode, bands: m, solver: opts.clone() },
    })
}

/// Band-by-band union `⋃_r [min, max]` with overlapping intervals merged.
pub fn spectrum_union(bs: &BandStructure) -> SpectrumEstimate {
    SpectrumEstimate {
        intervals: union_of_rows(&bs.bands),
        delta: DeltaTag::Fixed(bs.delta),
        coverage: bs.kpoints.len(),
    }
}

/// Merge per-band `[min, max]` ranges of rows of ascending band values.
pub fn union_of_rows(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let m = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut ranges: Vec<(f64, f64)> = (0..m)
        .filter_map(|j| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(j).copied()).collect();
            if vals.is_empty() {
                return None;
            }
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some((lo, hi))
        })
        .collect();
    merge_intervals(&mut ranges)
}

pub fn merge_intervals(ranges: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    ranges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ranges.len());
    for &(lo, hi) in ranges.iter() {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

/// Least-squares line `λ(δ) = intercept + slope·δ` for one band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Largest absolute deviation of the fitted points from the line.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| (intercept + slope * a - b).abs())
        .fold(0.0, f64::max);
    LinearFit { intercept, slope, residual }
}

/// Sign that sorted-index tracking may have switched branches between two bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingWarning {
    /// Lower of the two adjacent bands, 0-based.
    pub band: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationTable {
    pub kpoint: KPoint,
    /// Strictly descending.
    pub deltas: Vec<f64>,
    /// One row per rung; `None` where the solver failed.
    pub values: Vec<Option<Vec<f64>>>,
    /// `None` unless all fitted rungs succeeded.
    pub extrapolated: Option<Vec<f64>>,
    pub fits: Vec<LinearFit>,
    pub crossings: Vec<CrossingWarning>,
    pub failures: Vec<(usize, String)>,
}

impl ContinuationTable {
    /// Largest increase of any band between consecutive completed rungs.
    pub fn monotonicity_violation(&self) -> f64 {
        let done: Vec<&Vec<f64>> = self.values.iter().flatten().collect();
        let mut worst = 0.0f64;
        for w in done.windows(2) {
            for (a, b) in w[0].iter().zip(w[1]) {
                worst = worst.max(b - a);
            }
        }
        worst
    }
}

pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < FIT_POINTS {
        return Err(Error::InvalidArgument(format!(
            "ladder needs at least {FIT_POINTS} rungs, got {}",
            ladder.len()
        )));
    }
    for &d in ladder {
        check_delta(d)?;
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("ladder must be strictly descending".into()));
    }
    Ok(())
}

/// Eigenvalues at `k̃` along a descending δ-ladder, extrapolated linearly to δ = 0.
///
/// `task` enters the seed so that different grid points use different starting blocks.
pub fn delta_continuation(
    cell: &ProductCell,
    v1: &FourierPotential,
    v2: &FourierPotential,
    kpoint: &KPoint,
    ladder: &[f64],
    m: usize,
    mode: BasisMode,
    opts: &SolverOptions,
    task: u64,
) -> Result<ContinuationTable> {
    validate_ladder(ladder)?;
    opts.validate()?;
    let rungs: Vec<Result<Vec<f64>>> = ladder
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let o = opts.reseeded(&[task, i as u64]);
            solve_fiber(cell, v1, v2, kpoint, d, m, mode, &o).map(|(_, res)| res.eigenvalues)
        })
        .collect();
    let mut values = Vec::with_capacity(rungs.len());
    let mut failures = Vec::new();
    for (i, r) in rungs.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(Some(v)),
            Err(Error::InvalidArgument(msg)) => return Err(Error::InvalidArgument(msg)),
            Err(e) => {
                failures.push((i, e.to_string()));
                values.push(None);
            }
        }
    }

    let tail = ladder.len() - FIT_POINTS;
    let fitted: Option<Vec<&Vec<f64>>> = values[tail..].iter().map(|v| v.as_ref()).collect();
    let (extrapolated, fits) = match fitted {
        Some(rows) => {
            let x = &ladder[tail..];
            let fits: Vec<LinearFit> = (0..m)
                .map(|j| {
                    let y: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    fit_line(x, &y)
                })
                .collect();
            (Some(fits.iter().map(|f| f.intercept).collect()), fits)
        }
        None => (None, Vec::new()),
    };
    let crossings = crossing_warnings(&values, extrapolated.as_deref());

    Ok(ContinuationTable {
        kpoint: *kpoint,
        deltas: ladder.to_vec(),
        values,
        extrapolated,
        fits,
        crossings,
        failures,
    })
}

/// Flag adjacent band pairs whose gap narrows and then widens down the
/// ladder, or whose extrapolated values come out in the wrong order.
fn crossing_warnings(values: &[Option<Vec<f64>>], extrapolated: Option<&[f64]>) -> Vec<CrossingWarning> {
    let done: Vec<&Vec<f64>> = values.iter().flatten().collect();
    let m = done.first().map_or(0, |r| r.len());
    let mut out = Vec::new();
    for j in 0..m.saturating_sub(1) {
        let gaps: Vec<f64> = done.iter().map(|r| r[j + 1] - r[j]).collect();
        let dip = gaps.windows(3).any(|w| w[1] < w[0] && w[1] < w[2]);
        if dip {
            out.push(CrossingWarning {
                band: j,
                reason: "gap to the next band narrows then widens along the ladder".into(),
            });
        } else if let Some(e) = extrapolated {
            if e[j] > e[j + 1] {
                out.push(CrossingWarning {
                    band: j,
                    reason: "extrapolated values are out of order".into(),
                });
            }
        }
    }
    out
}

/// Extrapolated spectrum over a grid, with the per-point tables.
pub fn spectrum_at_zero(
    cell: &ProductCell,
    v1: &FourierPotential,
    v2: &FourierPotential,
    kgrid: &[KPoint],
    ladder: &[f64],
    m: usize,
    mode: BasisMode,
    opts: &SolverOptions,
) -> Result<(SpectrumEstimate, Vec<ContinuationTable>)> {
    validate_ladder(ladder)?;
    opts.validate()?;
    let tables: Vec<Result<ContinuationTable>> = kgrid
        .par_iter()
        .enumerate()
        .map(|(r, k)| delta_continuation(cell, v1, v2, k, ladder, m, mode, opts, r as u64))
        .collect();
    let mut ok = Vec::with_capacity(tables.len());
    let mut failures = Vec::new();
    for (r, t) in tables.into_iter().enumerate() {
        match t {
            Ok(t) if t.extrapolated.is_some() => ok.push(t),
            Ok(t) => failures.push((r, t.failures.iter().map(|f| f.1.clone()).collect::<Vec<_>>().join("; "))),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Sweep { total: kgrid.len(), failures });
    }
    let rows: Vec<Vec<f64>> = ok
        .iter()
        .map(|t| {
            let mut v = t.extrapolated.clone().unwrap_or_default();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let est = SpectrumEstimate {
        intervals: union_of_rows(&rows),
        delta: DeltaTag::Extrapolated,
        coverage: kgrid.len(),
    };
    Ok((est, ok))
}

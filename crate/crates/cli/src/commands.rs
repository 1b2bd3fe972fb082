use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use moire_core::bloch::{ball_residual, exact_residual, reconstruct_diagonal, BlochSolution};
use moire_core::geometry::{incommensurability_check, kgrid_offset, Commensurability, KPoint};
use moire_core::reference::{hausdorff_window, realspace_spectrum, RealSpaceProblem};
use moire_core::sweep::{band_structure, delta_continuation, spectrum_at_zero, spectrum_union, ContinuationTable, SpectrumEstimate};
use serde::Serialize;

use crate::config::{Format, Loaded};
use crate::output::{num, read_table, row, Artifacts};

pub enum CliError {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Comparison(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Comparison(_) => 4,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Config(e) => format!("configuration error: {e:#}"),
            CliError::Solver(e) => format!("solver failure: {e:#}"),
            CliError::Comparison(m) => format!("comparison failed: {m}"),
        }
    }
}

impl From<moire_core::Error> for CliError {
    fn from(e: moire_core::Error) -> Self {
        use moire_core::Error as E;
        match e {
            E::InvalidLattice(_)
            | E::DimensionMismatch { .. }
            | E::InvalidArgument(_)
            | E::NotHermitian { .. }
            | E::Aliasing { .. }
            | E::EmptyWindow { .. }
            | E::QuadratureTooCoarse { .. } => CliError::Config(e.into()),
            other => CliError::Solver(other.into()),
        }
    }
}

fn io(e: anyhow::Error) -> CliError {
    CliError::Solver(e)
}

pub type CliResult = Result<(), CliError>;

pub struct Context<'a> {
    pub loaded: &'a Loaded,
    pub out: Option<&'a Path>,
}

impl Context<'_> {
    fn artifacts(&self, sub: &str, seed: u64) -> Result<Artifacts, CliError> {
        Artifacts::new(self.loaded, sub, seed, self.out).map_err(io)
    }

    fn kpoint(&self) -> Result<KPoint, CliError> {
        let s = &self.loaded.config.sweep;
        Ok(KPoint::from_fractional(&s.k, &s.kp)?)
    }
}

fn toml_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    toml::to_string(value).map_err(|e| io(e.into()))
}

pub fn check(ctx: &Context) -> CliResult {
    let l = ctx.loaded;
    let c = &l.config.check;
    let verdict = incommensurability_check(&l.cell.lat1, &l.cell.lat2, c.qmax, c.tol)?;
    let text = match &verdict {
        Commensurability::NoWitnessUpTo(q) => format!("NoWitnessUpTo({q})"),
        Commensurability::Commensurate { m, n } => format!("Commensurate {{ m = {m}, n = {n} }}"),
    };
    println!("{text}");
    let opts = l.solver_options().map_err(CliError::Config)?;
    let art = ctx.artifacts("check", opts.seed)?;
    #[derive(Serialize)]
    struct Report<'a> {
        verdict: &'a str,
        qmax: usize,
        tol: f64,
        basis: moire_core::operator::BasisMode,
    }
    let body = toml_string(&Report { verdict: &text, qmax: c.qmax, tol: c.tol, basis: l.config.basis.mode() })?;
    art.write("check.toml", Format::Toml, &body).map_err(io)?;
    Ok(())
}

fn union_csv(est: &SpectrumEstimate) -> String {
    let mut s = String::from("# lo, hi\n");
    for &(lo, hi) in &est.intervals {
        s.push_str(&row([num(lo), num(hi)]));
        s.push('\n');
    }
    s
}

fn union_dat(est: &SpectrumEstimate) -> String {
    let mut s = String::from("# energy level\n");
    for &(lo, hi) in &est.intervals {
        let _ = writeln!(s, "{} 0\n{} 0\n", num(lo), num(hi));
    }
    s
}

pub fn bands(ctx: &Context) -> CliResult {
    let l = ctx.loaded;
    let cfg = &l.config;
    let opts = l.solver_options().map_err(CliError::Config)?;
    let grid = kgrid_offset(&l.cell, cfg.sweep.kgrid, cfg.sweep.grid_offset)?;
    let m = cfg.solver.bands;
    let bs = band_structure(&l.cell, &l.v1, &l.v2, cfg.sweep.delta, &grid, m, cfg.basis.mode(), &opts)?;
    let art = ctx.artifacts("bands", opts.seed)?;
    let d = l.cell.dim();

    let mut head = vec!["# k_index".to_string()];
    head.extend((1..=d).map(|i| format!("k_frac_{i}")));
    head.extend((1..=d).map(|i| format!("kp_frac_{i}")));
    head.extend((1..=m).map(|j| format!("band_{j}")));
    let mut csv = format!("# delta = {}\n{}\n", num(bs.delta), head.join(", "));
    for (r, (k, vals)) in bs.kpoints.iter().zip(&bs.bands).enumerate() {
        let mut cols = vec![r.to_string()];
        cols.extend(k.k_frac().iter().map(|&x| num(x)));
        cols.extend(k.kp_frac().iter().map(|&x| num(x)));
        cols.extend(vals.iter().map(|&x| num(x)));
        csv.push_str(&row(cols));
        csv.push('\n');
    }
    art.write("bands.csv", Format::Csv, &csv).map_err(io)?;

    let mut dat = String::from("# k_index band_value, one block per band\n");
    for j in 0..m {
        let _ = writeln!(dat, "# band_{}", j + 1);
        for (r, vals) in bs.bands.iter().enumerate() {
            let _ = writeln!(dat, "{r} {}", num(vals[j]));
        }
        dat.push_str("\n\n");
    }
    art.write("bands.dat", Format::Dat, &dat).map_err(io)?;

    let est = spectrum_union(&bs);
    art.write("bands_union.csv", Format::Csv, &union_csv(&est)).map_err(io)?;
    Ok(())
}

/// TOML view of a continuation table; failed rungs hold NaN.
#[derive(Serialize)]
struct TableReport {
    k_frac: Vec<f64>,
    kp_frac: Vec<f64>,
    deltas: Vec<f64>,
    values: Vec<Vec<f64>>,
    extrapolated: Vec<f64>,
    slopes: Vec<f64>,
    fit_residuals: Vec<f64>,
    crossings: Vec<String>,
    failures: Vec<String>,
}

impl TableReport {
    fn new(t: &ContinuationTable, m: usize) -> Self {
        TableReport {
            k_frac: t.kpoint.k_frac().to_vec(),
            kp_frac: t.kpoint.kp_frac().to_vec(),
            deltas: t.deltas.clone(),
            values: t.values.iter().map(|v| v.clone().unwrap_or_else(|| vec![f64::NAN; m])).collect(),
            extrapolated: t.extrapolated.clone().unwrap_or_default(),
            slopes: t.fits.iter().map(|f| f.slope).collect(),
            fit_residuals: t.fits.iter().map(|f| f.residual).collect(),
            crossings: t.crossings.iter().map(|c| format!("band {}: {}", c.band + 1, c.reason)).collect(),
            failures: t.failures.iter().map(|(i, e)| format!("rung {i}: {e}")).collect(),
        }
    }
}

fn continuation_csv(t: &ContinuationTable, m: usize) -> String {
    let mut head = vec!["# delta".to_string()];
    head.extend((1..=m).map(|j| format!("band_{j}")));
    let mut s = format!("{}\n", head.join(", "));
    for (d, vals) in t.deltas.iter().zip(&t.values) {
        if let Some(v) = vals {
            let mut cols = vec![num(*d)];
            cols.extend(v.iter().map(|&x| num(x)));
            s.push_str(&row(cols));
            s.push('\n');
        }
    }
    let ext = match &t.extrapolated {
        Some(e) => e.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", "),
        None => "unavailable".into(),
    };
    let _ = writeln!(s, "# extrapolated, {ext}");
    s
}

pub fn continuation(ctx: &Context) -> CliResult {
    let l = ctx.loaded;
    let cfg = &l.config;
    let opts = l.solver_options().map_err(CliError::Config)?;
    let k = ctx.kpoint()?;
    let m = cfg.solver.bands;
    let t = delta_continuation(&l.cell, &l.v1, &l.v2, &k, &cfg.sweep.ladder, m, cfg.basis.mode(), &opts, 0)?;
    let art = ctx.artifacts("continuation", opts.seed)?;
    art.write("continuation.csv", Format::Csv, &continuation_csv(&t, m)).map_err(io)?;
    art.write("continuation.toml", Format::Toml, &toml_string(&TableReport::new(&t, m))?).map_err(io)?;

    let mut dat = String::from("# delta band_value, one block per band\n");
    for j in 0..m {
        let _ = writeln!(dat, "# band_{}", j + 1);
        for (d, v) in t.deltas.iter().zip(&t.values) {
            if let Some(v) = v {
                let _ = writeln!(dat, "{} {}", num(*d), num(v[j]));
            }
        }
        if let Some(e) = &t.extrapolated {
            let _ = writeln!(dat, "{} {}", num(0.0), num(e[j]));
        }
        dat.push_str("\n\n");
    }
    art.write("continuation.dat", Format::Dat, &dat).map_err(io)?;

    if !t.failures.is_empty() {
        let msg = t.failures.iter().map(|(i, e)| format!("rung {i}: {e}")).collect::<Vec<_>>().join("; ");
        return Err(CliError::Solver(anyhow!(msg)));
    }
    for c in &t.crossings {
        log::warn!("band {} and {}: {}", c.band + 1, c.band + 2, c.reason);
    }
    Ok(())
}

pub fn spectrum(ctx: &Context) -> CliResult {
    let l = ctx.loaded;
    let cfg = &l.config;
    let opts = l.solver_options().map_err(CliError::Config)?;
    let grid = kgrid_offset(&l.cell, cfg.sweep.kgrid, cfg.sweep.grid_offset)?;
    let m = cfg.solver.bands;
    let (est, tables) = spectrum_at_zero(&l.cell, &l.v1, &l.v2, &grid, &cfg.sweep.ladder, m, cfg.basis.mode(), &opts)?;
    let art = ctx.artifacts("spectrum", opts.seed)?;
    art.write("spectrum.csv", Format::Csv, &union_csv(&est)).map_err(io)?;
    art.write("spectrum.dat", Format::Dat, &union_dat(&est)).map_err(io)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        coverage: usize,
        ladder: &'a [f64],
        max_fit_residual: f64,
        crossing_warnings: usize,
        intervals: &'a [(f64, f64)],
        tables: Vec<TableReport>,
    }
    let max_fit_residual = tables.iter().flat_map(|t| t.fits.iter().map(|f| f.residual)).fold(0.0, f64::max);
    let crossing_warnings = tables.iter().map(|t| t.crossings.len()).sum();
    let body = toml_string(&Summary {
        coverage: est.coverage,
        ladder: &cfg.sweep.ladder,
        max_fit_residual,
        crossing_warnings,
        intervals: &est.intervals,
        tables: tables.iter().map(|t| TableReport::new(t, m)).collect(),
    })?;
    art.write("spectrum.toml", Format::Toml, &body).map_err(io)?;
    Ok(())
}

pub fn residual(ctx: &Context) -> CliResult {
    let l = ctx.loaded;
    let cfg = &l.config;
    let opts = l.solver_options().map_err(CliError::Config)?;
    let k = ctx.kpoint()?;
    let delta = cfg.residual.delta.unwrap_or(cfg.sweep.delta);
    let band = cfg.residual.band - 1;
    let sol = BlochSolution::solve(&l.cell, &l.v1, &l.v2, &k, delta, band, cfg.basis.mode(), &opts)?;
    let mut report = exact_residual(&sol);
    report.truncation_leak = Some(sol.truncation_leak(&l.v1, &l.v2)?);
    let q = match cfg.residual.quad_points_per_unit {
        Some(q) => q,
        None => (reconstruct_diagonal(&sol).max_frequency() / std::f64::consts::PI).floor() as usize + 1,
    };
    for &r in &cfg.residual.radii {
        report.ball_residuals.push((r, ball_residual(&sol, r, q)?));
    }

    #[derive(Serialize)]
    struct Out<'a> {
        band: usize,
        kpoint: KPoint,
        basis_size: usize,
        fiber_residual: f64,
        quad_points_per_unit: usize,
        report: &'a moire_core::bloch::ResidualReport,
    }
    let art = ctx.artifacts("residual", opts.seed)?;
    let body = toml_string(&Out {
        band: band + 1,
        kpoint: k,
        basis_size: sol.basis.len(),
        fiber_residual: sol.fiber_residual(&l.v1, &l.v2)?,
        quad_points_per_unit: q,
        report: &report,
    })?;
    art.write("residual.toml", Format::Toml, &body).map_err(io)?;
    let mut dat = format!("# R ball_residual\n# exact = {}\n", num(report.relative_ms_residual));
    for (r, v) in &report.ball_residuals {
        let _ = writeln!(dat, "{} {}", num(*r), num(*v));
    }
    art.write("residual.dat", Format::Dat, &dat).map_err(io)?;
    Ok(())
}

pub fn reference(ctx: &Context) -> CliResult {
    let l = ctx.loaded;
    let r = &l.config.reference;
    let opts = l.solver_options().map_err(CliError::Config)?;
    let mut p = RealSpaceProblem::new(r.length, r.spacing, r.boundary, &l.v1, &l.v2)?;
    if r.edge_margin < 0.0 {
        p.edge_margin = None;
    } else if p.edge_margin.is_some() {
        p.edge_margin = Some(r.edge_margin);
    }
    p.memory_cap = r.memory_cap;
    let spec = realspace_spectrum(&p, r.bands, &opts)?;
    let e_max = spec.eigenvalues.last().copied().unwrap_or(0.0);
    let dispersion = p.dispersion_error(e_max);
    if dispersion >= r.tolerance {
        log::warn!("dispersion error {dispersion:.3e} at E = {e_max} exceeds the comparison tolerance");
    }
    let art = ctx.artifacts("reference", opts.seed)?;
    let mut csv = String::from("# index, eigenvalue, bulk\n");
    let mut bulk = spec.bulk.iter().peekable();
    for (i, &e) in spec.eigenvalues.iter().enumerate() {
        let kept = bulk.peek().is_some_and(|&&b| b == e);
        if kept {
            bulk.next();
        }
        csv.push_str(&row([i.to_string(), num(e), (kept as u8).to_string()]));
        csv.push('\n');
    }
    art.write("reference.csv", Format::Csv, &csv).map_err(io)?;
    let mut dat = String::from("# index eigenvalue\n");
    for (i, e) in spec.eigenvalues.iter().enumerate() {
        let _ = writeln!(dat, "{i} {}", num(*e));
    }
    art.write("reference.dat", Format::Dat, &dat).map_err(io)?;

    #[derive(Serialize)]
    struct Report {
        unknowns: usize,
        eigenvalues: usize,
        bulk: usize,
        edge_states: usize,
        dispersion_error: f64,
    }
    let body = toml_string(&Report {
        unknowns: p.unknowns(),
        eigenvalues: spec.eigenvalues.len(),
        bulk: spec.bulk.len(),
        edge_states: spec.edge_states,
        dispersion_error: dispersion,
    })?;
    art.write("reference.toml", Format::Toml, &body).map_err(io)?;
    Ok(())
}

pub fn compare(ctx: &Context, spectrum: Option<PathBuf>, reference: Option<PathBuf>) -> CliResult {
    let l = ctx.loaded;
    let r = &l.config.reference;
    let dir = match ctx.out {
        Some(d) => d.to_path_buf(),
        None => l.base_dir.join(&l.config.output.directory),
    };
    let spath = spectrum.unwrap_or_else(|| dir.join("spectrum.csv"));
    let rpath = reference.unwrap_or_else(|| dir.join("reference.csv"));
    let s = read_table(&spath).map_err(CliError::Config)?;
    let f = read_table(&rpath).map_err(CliError::Config)?;
    if s.physics_hash != f.physics_hash {
        return Err(CliError::Comparison(format!(
            "{} and {} describe different operators (physics hashes {} and {})",
            spath.display(),
            rpath.display(),
            s.physics_hash,
            f.physics_hash
        )));
    }
    if s.physics_hash != l.physics_hash {
        return Err(CliError::Comparison("artifacts were produced from a different lattice or potential than the config".into()));
    }
    let intervals: Vec<(f64, f64)> = s.rows.iter().filter(|v| v.len() >= 2).map(|v| (v[0], v[1])).collect();
    let points: Vec<f64> = f.rows.iter().filter(|v| v.len() >= 3 && v[2] != 0.0).map(|v| v[1]).collect();
    let lowest = intervals
        .iter()
        .map(|iv| iv.0)
        .chain(points.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let window = (lowest + r.window[0], lowest + r.window[1]);
    let distance = hausdorff_window(&points, &intervals, window)?;
    let passed = distance <= r.tolerance;

    #[derive(Serialize)]
    struct Report {
        window: (f64, f64),
        distance: f64,
        tolerance: f64,
        passed: bool,
        note: &'static str,
    }
    let opts = l.solver_options().map_err(CliError::Config)?;
    let art = ctx.artifacts("compare", opts.seed)?;
    let body = toml_string(&Report {
        window,
        distance,
        tolerance: r.tolerance,
        passed,
        note: "tolerance is an engineering choice; the real-space oracle carries O(1/L) truncation and O(h^2) dispersion error",
    })?;
    art.write("compare.toml", Format::Toml, &body).map_err(io)?;
    println!("distance = {distance:.6e} (tolerance {:.3e})", r.tolerance);
    if !passed {
        return Err(CliError::Comparison(format!("distance {distance:.6e} exceeds {:.3e}", r.tolerance)));
    }
    Ok(())
}

//! Run configuration: one TOML file drives every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use moire_core::eigensolve::{PathHint, SolverOptions};
use moire_core::geometry::{Lattice, LatticeIndex, ProductCell};
use moire_core::operator::BasisMode;
use moire_core::potential::FourierPotential;
use moire_core::reference::Boundary;
use moire_core::sweep::{validate_ladder, DEFAULT_LADDER};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeBlock,
    pub potential: PotentialBlock,
    pub basis: BasisBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub residual: ResidualBlock,
    #[serde(default)]
    pub reference: ReferenceBlock,
    #[serde(default)]
    pub check: CheckBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Lattice vectors, one inner list per vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub a1: Vec<Vec<f64>>,
    pub a2: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub v1: PotentialSpec,
    pub v2: PotentialSpec,
}

/// Either explicit Fourier coefficients or real-space samples on one cell.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    #[serde(default)]
    pub coefficients: Vec<Coefficient>,
    pub samples: Option<SamplesSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub index: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Whitespace-separated values on an `n^d` grid over the unit cell, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSpec {
    pub file: PathBuf,
    pub n: usize,
    pub radius: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisBlock {
    Box { radius1: i32, radius2: i32 },
    EnergyCut { ecut: f64 },
}

impl BasisBlock {
    pub fn mode(&self) -> BasisMode {
        match *self {
            BasisBlock::Box { radius1, radius2 } => BasisMode::Box { radius1, radius2 },
            BasisBlock::EnergyCut { ecut } => BasisMode::EnergyCut { ecut },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    /// Bands per fiber.
    pub bands: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub dense_cap: usize,
    pub auto_dense_limit: usize,
    pub path: PathHint,
    pub seed: Option<u64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverBlock {
            bands: 8,
            tol: d.tol,
            max_iter: d.max_iter,
            dense_cap: d.dense_cap,
            auto_dense_limit: d.auto_dense_limit,
            path: d.path,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// Points per axis of the k-grid.
    pub kgrid: usize,
    /// Grid coordinates are `(i + offset) / kgrid`: 0.5 for cell midpoints, 0 to include Γ.
    pub grid_offset: f64,
    /// Regularization for `bands`.
    pub delta: f64,
    pub ladder: Vec<f64>,
    /// Fiber for `continuation` and `residual`, fractional.
    pub k: Vec<f64>,
    pub kp: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock {
            kgrid: 16,
            grid_offset: 0.5,
            delta: 0.05,
            ladder: DEFAULT_LADDER.to_vec(),
            k: vec![0.5],
            kp: vec![0.5],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualBlock {
    /// 1-based band index.
    pub band: usize,
    /// Defaults to `sweep.delta`.
    pub delta: Option<f64>,
    pub radii: Vec<f64>,
    /// Defaults to just above the Nyquist rate of the solution.
    pub quad_points_per_unit: Option<usize>,
}

impl Default for ResidualBlock {
    fn default() -> Self {
        ResidualBlock { band: 1, delta: None, radii: vec![50.0, 400.0], quad_points_per_unit: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceBlock {
    pub length: f64,
    pub spacing: f64,
    pub boundary: Boundary,
    pub bands: usize,
    /// Per-side edge margin as a fraction of the length; negative disables the filter.
    pub edge_margin: f64,
    /// Comparison window as offsets from the lowest energy of either spectrum.
    pub window: [f64; 2],
    pub tolerance: f64,
    pub memory_cap: usize,
}

impl Default for ReferenceBlock {
    fn default() -> Self {
        ReferenceBlock {
            length: 500.0,
            spacing: 0.01,
            boundary: Boundary::Dirichlet,
            bands: 600,
            edge_margin: moire_core::reference::DEFAULT_EDGE_MARGIN,
            window: [-0.5, 3.0],
            tolerance: 5e-2,
            memory_cap: moire_core::reference::DEFAULT_MEMORY_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckBlock {
    pub qmax: usize,
    pub tol: f64,
}

impl Default for CheckBlock {
    fn default() -> Self {
        CheckBlock { qmax: 100, tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Toml,
    Dat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Toml, Format::Dat] }
    }
}

/// A parsed configuration with its potentials loaded and hashes computed.
pub struct Loaded {
    pub config: RunConfig,
    pub raw: String,
    pub base_dir: PathBuf,
    pub cell: ProductCell,
    pub v1: FourierPotential,
    pub v2: FourierPotential,
    pub config_hash: String,
    pub physics_hash: String,
}

impl Loaded {
    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Loaded::from_str(&raw, &base_dir)
    }

    pub fn from_str(raw: &str, base_dir: &Path) -> Result<Self> {
        let config: RunConfig = toml::from_str(raw).context("parsing configuration")?;
        config.validate()?;
        let lat1 = Lattice::new(&config.lattice.a1).map_err(|e| anyhow!("lattice.a1: {e}"))?;
        let lat2 = Lattice::new(&config.lattice.a2).map_err(|e| anyhow!("lattice.a2: {e}"))?;
        let cell = ProductCell::new(lat1.clone(), lat2.clone()).map_err(|e| anyhow!("lattice: {e}"))?;
        let v1 = load_potential(&config.potential.v1, lat1, base_dir).context("potential.v1")?;
        let v2 = load_potential(&config.potential.v2, lat2, base_dir).context("potential.v2")?;
        if config.sweep.k.len() != cell.dim() || config.sweep.kp.len() != cell.dim() {
            bail!("sweep.k and sweep.kp need {} components", cell.dim());
        }
        let config_hash = sha256_hex(serde_json::to_string(&config)?.as_bytes());
        let physics_hash = physics_hash(&config.lattice, &v1, &v2)?;
        Ok(Loaded { config, raw: raw.to_string(), base_dir: base_dir.to_path_buf(), cell, v1, v2, config_hash, physics_hash })
    }

    /// Solver options with the seed taken from the environment, the config, or the default, in that order.
    pub fn solver_options(&self) -> Result<SolverOptions> {
        let s = &self.config.solver;
        let mut opts = SolverOptions {
            tol: s.tol,
            max_iter: s.max_iter,
            dense_cap: s.dense_cap,
            auto_dense_limit: s.auto_dense_limit,
            path: s.path,
            ..SolverOptions::default()
        };
        if let Some(seed) = s.seed {
            opts.seed = seed;
        }
        if let Ok(v) = std::env::var("MOIRE_SPECTRA_SEED") {
            opts.seed = parse_seed(&v).with_context(|| format!("MOIRE_SPECTRA_SEED = {v:?}"))?;
        }
        Ok(opts)
    }
}

fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim();
    Ok(match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16)?,
        None => s.parse()?,
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let BasisBlock::Box { radius1, radius2 } = self.basis {
            if radius1 < 0 || radius2 < 0 {
                bail!("basis radii must be non-negative");
            }
        }
        if let BasisBlock::EnergyCut { ecut } = self.basis {
            if !(ecut >= 0.0) || !ecut.is_finite() {
                bail!("basis.ecut must be finite and non-negative");
            }
        }
        let s = &self.solver;
        if s.bands == 0 {
            bail!("solver.bands must be at least 1");
        }
        if !(s.tol > 0.0) || s.max_iter == 0 {
            bail!("solver.tol must be positive and solver.max_iter at least 1");
        }
        let w = &self.sweep;
        if w.kgrid == 0 {
            bail!("sweep.kgrid must be at least 1");
        }
        if !(0.0..1.0).contains(&w.grid_offset) {
            bail!("sweep.grid_offset must lie in [0, 1)");
        }
        if !(w.delta > 0.0) || !w.delta.is_finite() {
            bail!("sweep.delta must be positive");
        }
        validate_ladder(&w.ladder).map_err(|e| anyhow!("sweep.ladder: {e}"))?;
        let r = &self.residual;
        if r.band == 0 {
            bail!("residual.band is 1-based");
        }
        if let Some(d) = r.delta {
            if !(d > 0.0) {
                bail!("residual.delta must be positive");
            }
        }
        if r.radii.iter().any(|&x| !(x > 0.0)) {
            bail!("residual.radii must be positive");
        }
        let f = &self.reference;
        if !(f.length > 0.0 && f.spacing > 0.0) || f.bands == 0 {
            bail!("reference.length, reference.spacing and reference.bands must be positive");
        }
        if !(f.window[0] < f.window[1]) || !(f.tolerance > 0.0) {
            bail!("reference.window must be increasing and reference.tolerance positive");
        }
        if self.check.qmax == 0 || !(self.check.tol > 0.0) {
            bail!("check.qmax and check.tol must be positive");
        }
        Ok(())
    }
}

fn load_potential(spec: &PotentialSpec, lattice: Lattice, base_dir: &Path) -> Result<FourierPotential> {
    match (&spec.samples, spec.coefficients.is_empty()) {
        (Some(_), false) => bail!("give either coefficients or samples, not both"),
        (Some(s), true) => {
            let path = base_dir.join(&s.file);
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let values = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().with_context(|| format!("bad sample {t:?}")))
                .collect::<Result<Vec<f64>>>()?;
            Ok(FourierPotential::from_samples(lattice, &values, s.n, s.radius)?)
        }
        (None, _) => {
            let dim = lattice.dim();
            let mut terms = Vec::with_capacity(spec.coefficients.len());
            for c in &spec.coefficients {
                if c.index.len() != dim {
                    bail!("coefficient index {:?} needs {dim} components", c.index);
                }
                terms.push((LatticeIndex::new(&c.index), Complex64::new(c.re, c.im)));
            }
            Ok(FourierPotential::new(lattice, terms)?)
        }
    }
}

/// Hash of the lattice and the loaded coefficients; artifacts with equal
/// physics hashes describe the same operator.
fn physics_hash(lattice: &LatticeBlock, v1: &FourierPotential, v2: &FourierPotential) -> Result<String> {
    let coeffs = |v: &FourierPotential| -> Vec<(Vec<i32>, f64, f64)> {
        v.terms().map(|(m, c)| (m.as_slice(v.dim()).to_vec(), c.re, c.im)).collect()
    };
    let payload = serde_json::to_string(&(lattice, coeffs(v1), coeffs(v2)))?;
    Ok(sha256_hex(payload.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

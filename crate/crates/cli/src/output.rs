//! Artifact files: a comment header with hashes and the config echo, then data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::{Format, Loaded};

pub fn num(x: f64) -> String {
    format!("{x:.15e}")
}

pub fn row(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(", ")
}

pub struct Artifacts {
    dir: PathBuf,
    formats: Vec<Format>,
    header: String,
}

impl Artifacts {
    pub fn new(loaded: &Loaded, subcommand: &str, seed: u64, out: Option<&Path>) -> Result<Self> {
        let dir = match out {
            Some(d) => d.to_path_buf(),
            None => loaded.base_dir.join(&loaded.config.output.directory),
        };
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut header = String::new();
        writeln!(header, "# moire-spectra {subcommand}")?;
        writeln!(header, "# config_sha256 = {}", loaded.config_hash)?;
        writeln!(header, "# physics_sha256 = {}", loaded.physics_hash)?;
        writeln!(header, "# seed = {seed:#018x}")?;
        writeln!(header, "# config begin")?;
        for line in loaded.raw.lines() {
            writeln!(header, "# | {line}")?;
        }
        writeln!(header, "# config end")?;
        Ok(Artifacts { dir, formats: loaded.config.output.formats.clone(), header })
    }

    pub fn enabled(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    /// Write `name` if its format is enabled.
    pub fn write(&self, name: &str, format: Format, body: &str) -> Result<Option<PathBuf>> {
        if !self.enabled(format) {
            return Ok(None);
        }
        let path = self.dir.join(name);
        std::fs::write(&path, format!("{}{}", self.header, body)).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(Some(path))
    }
}

/// A CSV artifact read back: header values and data rows.
pub struct ParsedTable {
    pub physics_hash: String,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<ParsedTable> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut physics_hash = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("# physics_sha256 = ") {
            physics_hash = Some(rest.trim().to_string());
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().with_context(|| format!("{}: bad value {t:?}", path.display())))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    let Some(physics_hash) = physics_hash else {
        bail!("{} has no physics hash", path.display());
    };
    Ok(ParsedTable { physics_hash, rows })
}

//! Experiment configuration: defaults, TOML file, command-line overrides (in that order).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hkit::grid::Grid;
use hkit::group::Mode;
use hkit::report::config_hash;
use hkit::{QuadratureConfig, Space, VectorFieldId};
use serde::{Deserialize, Serialize};

/// Uniform grid centred at the identity: `half[k]` is the half-width and `cells[k]` the
/// cell count along coordinate `k`. Empty vectors select the default for the space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub half: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    /// Unified vector-field index: `X_j -> j`, `Y_j -> n + j`.
    pub field: usize,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
    pub grid: GridSpec,
    /// Reports go to `<output_dir>/<experiment>.<ext>`; standard output when unset.
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Heisenberg,
            n: 1,
            field: 1,
            seed: 1,
            quadrature: QuadratureConfig::default(),
            grid: GridSpec::default(),
            output_dir: None,
        }
    }
}

/// Flags shared by every command; each one overrides the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed of every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `heisenberg` or `abelian`.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Dimension parameter: `H^n` or `R^n`.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Unified vector-field index (`X_j -> j`, `Y_j -> n + j`).
    #[arg(long, global = true)]
    pub field: Option<usize>,
    /// Grid half-widths, comma separated (one per coordinate, or one for all).
    #[arg(long, global = true, value_delimiter = ',')]
    pub half: Option<Vec<f64>>,
    /// Grid cell counts, comma separated (one per coordinate, or one for all).
    #[arg(long, global = true, value_delimiter = ',')]
    pub cells: Option<Vec<usize>>,
    /// Directory for reports (standard output when unset).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Truncation of infinite lambda ranges (`0` = from the tail bound).
    #[arg(long, global = true)]
    pub truncation: Option<f64>,
    /// Adaptive quadrature bisection budget.
    #[arg(long, global = true)]
    pub max_subdivisions: Option<usize>,
    /// Absolute quadrature tolerance.
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    /// Radius around removable singularities where series values are used.
    #[arg(long, global = true)]
    pub guard_radius: Option<f64>,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s.to_ascii_lowercase().as_str() {
        "heisenberg" | "h" => Ok(Mode::Heisenberg),
        "abelian" | "r" => Ok(Mode::Abelian),
        _ => Err(format!("unknown mode '{s}' (heisenberg | abelian)")),
    }
}

fn broadcast<T: Clone>(v: Vec<T>, dim: usize) -> Vec<T> {
    if v.len() == 1 {
        vec![v[0].clone(); dim]
    } else {
        v
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Defaults, then the file named by `--config`, then the flags; the result is validated
    /// and its grid resolved.
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(args);
        cfg.finish()?;
        Ok(cfg)
    }

    fn apply(&mut self, a: &ConfigArgs) {
        if let Some(v) = a.seed {
            self.seed = v;
        }
        if let Some(v) = a.mode {
            self.mode = v;
        }
        if let Some(v) = a.n {
            self.n = v;
        }
        if let Some(v) = a.field {
            self.field = v;
        }
        if let Some(v) = &a.half {
            self.grid.half = v.clone();
        }
        if let Some(v) = &a.cells {
            self.grid.cells = v.clone();
        }
        if let Some(v) = &a.output_dir {
            self.output_dir = Some(v.clone());
        }
        let q = &mut self.quadrature;
        if let Some(v) = a.truncation {
            q.truncation = v;
        }
        if let Some(v) = a.max_subdivisions {
            q.max_subdivisions = v;
        }
        if let Some(v) = a.abs_tol {
            q.abs_tol = v;
        }
        if let Some(v) = a.rel_tol {
            q.rel_tol = v;
        }
        if let Some(v) = a.guard_radius {
            q.guard_radius = v;
        }
    }

    /// Validates and fills the default grid (`64` cells per axis up to three coordinates,
    /// `12` beyond, half-width `1`).
    pub fn finish(&mut self) -> Result<()> {
        if self.n == 0 {
            bail!("n must be at least 1");
        }
        let space = self.space();
        self.vector_field()?;
        self.quadrature.validate()?;
        let d = space.dim();
        if self.grid.half.is_empty() {
            self.grid.half = vec![1.0; d];
        }
        if self.grid.cells.is_empty() {
            self.grid.cells = vec![if d <= 3 { 64 } else { 12 }; d];
        }
        self.grid.half = broadcast(std::mem::take(&mut self.grid.half), d);
        self.grid.cells = broadcast(std::mem::take(&mut self.grid.cells), d);
        if self.grid.half.len() != d || self.grid.cells.len() != d {
            bail!("grid needs {d} half-widths and cell counts for {space:?}");
        }
        self.grid()?;
        Ok(())
    }

    pub fn space(&self) -> Space {
        Space {
            mode: self.mode,
            n: self.n,
        }
    }

    pub fn vector_field(&self) -> Result<VectorFieldId> {
        Ok(VectorFieldId::from_index(self.field, self.space())?)
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::centered(self.space(), &self.grid.half, &self.grid.cells)?)
    }

    /// Hash of everything that affects results (the output location does not).
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        Ok(config_hash(&c)?)
    }
}

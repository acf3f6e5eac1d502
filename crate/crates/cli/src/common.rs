//! Helpers shared by the command handlers.

use std::io::Write;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hkit::commutator::{ball_indicator, make_atom, random_bumps, AtomPattern};
use hkit::grid::{Ball, Grid, SampledFunction};
use hkit::group::norm_of;
use hkit::report::Report;
use hkit::riesz::{calibrate_constant, calibration_sample, KernelTable, RieszKernel};
use hkit::{GroupPoint, QuadratureConfig, Space};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Resolved configuration plus its hash, handed to every command.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub hash: String,
}

impl Ctx {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let hash = cfg.hash()?;
        Ok(Ctx { cfg, hash })
    }

    /// Writes `bytes` to `<output_dir>/<name>.<ext>` or to standard output.
    pub fn emit(&self, name: &str, ext: &str, bytes: &[u8]) -> Result<()> {
        match &self.cfg.output_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{name}.{ext}"));
                std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
            }
        }
        Ok(())
    }

    /// Wraps `body` in the report envelope and emits it as JSON.
    pub fn report<B: Serialize>(&self, experiment: &str, paper_ref: &str, calibration_id: &str, body: B) -> Result<()> {
        let r = Report {
            experiment: experiment.into(),
            paper_ref: paper_ref.into(),
            config_hash: self.hash.clone(),
            calibration_id: calibration_id.into(),
            seed: self.cfg.seed,
            body,
        };
        let mut json = r.to_json()?;
        json.push('\n');
        self.emit(&experiment.replace(' ', "-"), "json", json.as_bytes())
    }

    pub fn space(&self) -> Space {
        self.cfg.space()
    }

    pub fn quad(&self) -> &QuadratureConfig {
        &self.cfg.quadrature
    }

    pub fn grid(&self) -> Result<Grid> {
        self.cfg.grid()
    }

    /// `K_j` calibrated at the configured quadrature (the shared default when unchanged).
    pub fn kernel(&self) -> Result<RieszKernel> {
        let space = self.space();
        let j = self.cfg.vector_field()?;
        let q = self.quad();
        if !space.is_heisenberg() || *q == QuadratureConfig::default() {
            return Ok(RieszKernel::new(space, j)?);
        }
        let cal = calibrate_constant(j, &calibration_sample(space, 12), q)?;
        let table = KernelTable::build(space.n, 4096, q)?;
        Ok(RieszKernel::with_calibration(&cal, std::sync::Arc::new(table))?)
    }

    pub fn point(&self, coords: &[f64]) -> Result<GroupPoint<f64>> {
        let space = self.space();
        if coords.len() != space.dim() {
            bail!("point {coords:?} needs {} coordinates for {space:?}", space.dim());
        }
        Ok(GroupPoint::new(space, coords.to_vec())?)
    }

    pub fn coords(&self, v: Option<&Vec<f64>>, default: f64) -> Result<Vec<f64>> {
        let d = self.space().dim();
        match v {
            None => Ok(vec![default; d]),
            Some(v) if v.len() == d => Ok(v.clone()),
            Some(v) => bail!("{v:?} needs {d} coordinates"),
        }
    }
}

/// One point given on the command line as `x,y,t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coords(pub Vec<f64>);

impl std::ops::Deref for Coords {
    type Target = Vec<f64>;

    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

pub fn parse_point(s: &str) -> Result<Coords> {
    Ok(Coords(parse_coords(s)?))
}

/// Parses `x,y,t` style coordinates.
pub fn parse_coords(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad coordinate '{p}'")))
        .collect()
}

/// Reads one point per record from a CSV file; a leading non-numeric record is a header.
pub fn read_points(path: &std::path::Path) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(f64::from_str).collect();
        match parsed {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => bail!("{}: record {}: {e}", path.display(), k + 1),
        }
    }
    Ok(out)
}

/// Symbol `b` of a commutator or oscillation experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Symbol {
    /// `log d_K(g)`.
    Log,
    /// `sin(0.7 x1 - 0.4 y1 + 0.3 t) + 0.2 x1 y1` (first coordinates in abelian mode).
    Smooth,
    /// First coordinate.
    Linear,
    /// Constant.
    Const(f64),
}

impl FromStr for Symbol {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Symbol::Log),
            "smooth" => Ok(Symbol::Smooth),
            "linear" => Ok(Symbol::Linear),
            _ => match s.strip_prefix("const:") {
                Some(c) => Ok(Symbol::Const(c.parse()?)),
                None => Err(anyhow!("unknown symbol '{s}' (log | smooth | linear | const:<c>)")),
            },
        }
    }
}

impl Symbol {
    pub fn eval(&self, space: Space, p: &[f64]) -> f64 {
        match self {
            Symbol::Log => norm_of(space, p).max(1e-300).ln(),
            Symbol::Smooth => {
                let a = p[0];
                let b = p.get(space.n).copied().unwrap_or(0.0);
                let t = if space.is_heisenberg() { p[space.dim() - 1] } else { 0.0 };
                (0.7 * a - 0.4 * b + 0.3 * t).sin() + 0.2 * a * b
            }
            Symbol::Linear => p[0],
            Symbol::Const(c) => *c,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        let space = grid.space;
        Ok(SampledFunction::from_fn(grid, |p| self.eval(space, p))?)
    }
}

/// Source `f` of a commutator experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SourceKind {
    /// `chi_B / |B|`.
    Indicator,
    /// Two-block `(1, 2)`-atom on `B`.
    Atom,
    /// Three smooth bumps of unit total mass.
    Bumps,
}

impl FromStr for SourceKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(SourceKind::Indicator),
            "atom" => Ok(SourceKind::Atom),
            "bumps" => Ok(SourceKind::Bumps),
            _ => Err(anyhow!("unknown source '{s}' (indicator | atom | bumps)")),
        }
    }
}

impl SourceKind {
    pub fn sample(self, grid: &Grid, ball: &Ball, seed: u64) -> Result<SampledFunction> {
        Ok(match self {
            SourceKind::Indicator => ball_indicator(grid, ball)?,
            SourceKind::Atom => make_atom(grid, ball, AtomPattern::TwoBlock, 2.0)?.function,
            SourceKind::Bumps => random_bumps(grid, 3, (0.3 * ball.radius, 0.6 * ball.radius), seed)?,
        })
    }
}

/// Writes `rows` as RFC-4180 CSV.
pub fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("csv: {e}"))
}

/// Coordinate column names `x1.., y1.., t` (or `x1..` in abelian mode).
pub fn coord_header(space: Space) -> Vec<String> {
    let mut h: Vec<String> = (1..=space.n).map(|k| format!("x{k}")).collect();
    if space.is_heisenberg() {
        h.extend((1..=space.n).map(|k| format!("y{k}")));
        h.push("t".into());
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_parse() {
        assert_eq!("log".parse::<Symbol>().unwrap(), Symbol::Log);
        assert_eq!("const:2.5".parse::<Symbol>().unwrap(), Symbol::Const(2.5));
        assert!("nope".parse::<Symbol>().is_err());
        assert!("atom".parse::<SourceKind>().is_ok());
    }

    #[test]
    fn coordinates_parse() {
        assert_eq!(parse_coords("1, -2.5,3e-1").unwrap(), vec![1.0, -2.5, 0.3]);
        assert!(parse_coords("1,x").is_err());
    }
}

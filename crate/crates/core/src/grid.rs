//! Uniform cell grids over coordinate boxes, sampled functions, cell sets and
//! Korányi balls as grid regions.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{distance_of, norm_of, Space};

/// Uniform grid of `prod(shape)` cells over the coordinate box `[lo, hi]`.
///
/// Cells are stored row-major (last axis fastest). Haar measure is Lebesgue measure in
/// coordinates, so every cell has measure `prod(spacing)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub space: Space,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl Grid {
    pub fn new(space: Space, lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let d = space.dim();
        for (name, len) in [("lo", lo.len()), ("hi", hi.len()), ("shape", shape.len())] {
            if len != d {
                return Err(Error::Argument(format!(
                    "grid {name} has {len} entries, group dimension is {d}"
                )));
            }
        }
        for k in 0..d {
            if !(lo[k].is_finite() && hi[k].is_finite() && hi[k] > lo[k]) {
                return Err(Error::Argument(format!("empty or non-finite grid axis {k}")));
            }
            if shape[k] == 0 {
                return Err(Error::Argument(format!("grid axis {k} has no cells")));
            }
        }
        Ok(Self { space, lo, hi, shape })
    }

    /// Box `[-half_k, half_k]` on every axis with `cells_k` cells.
    pub fn centered(space: Space, half: &[f64], cells: &[usize]) -> Result<Self> {
        Self::new(space, half.iter().map(|h| -h).collect(), half.to_vec(), cells.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.shape[k] as f64
    }

    pub fn cell_measure(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.hi[k] - self.lo[k]).product()
    }

    /// Largest cell width in the Korányi gauge (`max(h_z, sqrt(h_t))`).
    pub fn resolution(&self) -> f64 {
        (0..self.dim())
            .map(|k| {
                let h = self.spacing(k);
                if self.space.degree(k) == 2 {
                    h.sqrt()
                } else {
                    h
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            out[k] = idx % self.shape[k];
            idx /= self.shape[k];
        }
        out
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn center_into(&self, idx: usize, out: &mut [f64]) {
        let mut rest = idx;
        for k in (0..self.dim()).rev() {
            let i = rest % self.shape[k];
            rest /= self.shape[k];
            out[k] = self.lo[k] + (i as f64 + 0.5) * self.spacing(k);
        }
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.center_into(idx, &mut out);
        out
    }

    /// Cell containing `p` (half-open cells; `None` outside the box).
    pub fn index_of(&self, p: &[f64]) -> Option<usize> {
        let mut m = vec![0; self.dim()];
        for k in 0..self.dim() {
            let u = (p[k] - self.lo[k]) / self.spacing(k);
            if !(u >= 0.0) || u >= self.shape[k] as f64 {
                return None;
            }
            m[k] = u as usize;
        }
        Some(self.flat_index(&m))
    }

    /// Index range `[a_k, b_k)` of cells whose centers lie in `[lo_k, hi_k]`.
    pub fn index_range(&self, lo: &[f64], hi: &[f64]) -> Vec<(usize, usize)> {
        (0..self.dim())
            .map(|k| {
                let h = self.spacing(k);
                let a = ((lo[k] - self.lo[k]) / h - 0.5).ceil().max(0.0) as usize;
                let b = (((hi[k] - self.lo[k]) / h - 0.5).floor() + 1.0).clamp(0.0, self.shape[k] as f64) as usize;
                (a.min(self.shape[k]), b)
            })
            .collect()
    }

    /// Visits every flat index in a product of index ranges.
    pub fn for_each_in_range(&self, ranges: &[(usize, usize)], mut f: impl FnMut(usize)) {
        if ranges.iter().any(|(a, b)| a >= b) {
            return;
        }
        let mut m: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            f(self.flat_index(&m));
            let mut k = self.dim();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                m[k] += 1;
                if m[k] < ranges[k].1 {
                    break;
                }
                m[k] = ranges[k].0;
            }
        }
    }

    /// Coordinate bounding box of the Korányi ball `B(c, r)`.
    pub fn ball_bounds(&self, ball: &Ball) -> (Vec<f64>, Vec<f64>) {
        ball_bounds(self.space, ball)
    }

    pub fn contains_ball(&self, ball: &Ball) -> bool {
        let (lo, hi) = self.ball_bounds(ball);
        (0..self.dim()).all(|k| lo[k] >= self.lo[k] - 1e-12 && hi[k] <= self.hi[k] + 1e-12)
    }

    /// Cells whose centers lie in `B(c, r)`; the ball must lie inside the box.
    pub fn cells_in_ball(&self, ball: &Ball) -> Result<CellSet> {
        if !self.contains_ball(ball) {
            return Err(Error::Argument(format!(
                "ball of radius {} at {:?} leaves the grid box",
                ball.radius, ball.center
            )));
        }
        Ok(self.cells_in_ball_clipped(ball))
    }

    /// Cells whose centers lie in `B(c, r)` and in the box.
    pub fn cells_in_ball_clipped(&self, ball: &Ball) -> CellSet {
        let (lo, hi) = self.ball_bounds(ball);
        let ranges = self.index_range(&lo, &hi);
        let mut cells = Vec::new();
        let mut p = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        self.for_each_in_range(&ranges, |i| {
            self.center_into(i, &mut p);
            if distance_of(self.space, &p, &ball.center, &mut scratch) < ball.radius {
                cells.push(i);
            }
        });
        CellSet { cells }
    }

    /// Same cell layout at `factor` times the resolution on every axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            shape: self.shape.iter().map(|s| s * factor).collect(),
            ..self.clone()
        }
    }
}

/// Coordinate bounding box of `B(c, r) = c o B(0, r)`: horizontal coordinates move by
/// at most `r`, the centre coordinate by `r^2 + 2 |z_c| r`.
pub fn ball_bounds(space: Space, ball: &Ball) -> (Vec<f64>, Vec<f64>) {
    let r = ball.radius;
    let c = &ball.center;
    let mut lo = c.clone();
    let mut hi = c.clone();
    let zc = match space.mode {
        crate::group::Mode::Heisenberg => crate::group::horizontal_norm_sq(space, c).sqrt(),
        crate::group::Mode::Abelian => 0.0,
    };
    for k in 0..c.len() {
        let w = if space.degree(k) == 2 { r * r + 2.0 * zc * r } else { r };
        lo[k] -= w;
        hi[k] += w;
    }
    (lo, hi)
}

/// Open Korányi ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, space: Space, p: &[f64]) -> bool {
        let mut scratch = vec![0.0; p.len()];
        distance_of(space, p, &self.center, &mut scratch) < self.radius
    }

    /// Exact Haar measure `|B(0, 1)| r^Q`.
    pub fn volume(&self, space: Space) -> f64 {
        space.unit_ball_volume() * self.radius.powi(space.q() as i32)
    }
}

/// A set of grid cells, stored as sorted flat indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub cells: Vec<usize>,
}

impl CellSet {
    pub fn new(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn measure(&self, grid: &Grid) -> f64 {
        self.cells.len() as f64 * grid.cell_measure()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }
}

/// Family of balls over which oscillation suprema are taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub description: String,
    pub balls: Vec<Ball>,
}

impl BallFamily {
    /// Balls with radii from `radii`, centred on the lattice `lo + (k + 1/2) h` with
    /// `per_axis` points per axis of the box, kept when inside the box. The family only
    /// depends on the box, so it is shared by every refinement of a grid.
    pub fn ladder(grid: &Grid, radii: &[f64], per_axis: usize) -> Self {
        let d = grid.dim();
        let mut balls = Vec::new();
        let counts = vec![per_axis.max(1); d];
        let total: usize = counts.iter().product();
        for &r in radii {
            for idx in 0..total {
                let mut rest = idx;
                let mut c = vec![0.0; d];
                for k in (0..d).rev() {
                    let i = rest % counts[k];
                    rest /= counts[k];
                    let h = (grid.hi[k] - grid.lo[k]) / counts[k] as f64;
                    c[k] = grid.lo[k] + (i as f64 + 0.5) * h;
                }
                let b = Ball::new(c, r);
                if grid.contains_ball(&b) {
                    balls.push(b);
                }
            }
        }
        Self {
            description: format!(
                "lattice centres {per_axis}/axis, radii {radii:?}, {} balls inside the box",
                balls.len()
            ),
            balls,
        }
    }

    /// Dyadic radius ladder `r_max 2^-k`, `k < levels`, with [`BallFamily::ladder`]
    /// centres.
    pub fn dyadic(grid: &Grid, r_max: f64, levels: usize, per_axis: usize) -> Self {
        let radii: Vec<f64> = (0..levels).map(|k| r_max * 0.5f64.powi(k as i32)).collect();
        Self::ladder(grid, &radii, per_axis)
    }
}

/// Sidecar metadata of the binary format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSidecar {
    pub grid: Grid,
    pub cell_measure: f64,
    pub count: usize,
    pub encoding: String,
}

/// Real values on the cells of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sampled value at cell {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centres.
    pub fn from_fn<F>(grid: &Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |p, i| {
                    grid.center_into(i, p);
                    f(p)
                },
            )
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    /// `|g|` (Korányi norm) sampled at cell centres.
    pub fn norm_field(grid: &Grid) -> Result<Self> {
        let space = grid.space;
        Self::from_fn(grid, |p| norm_of(space, p))
    }

    pub fn cell_measure(&self) -> f64 {
        self.grid.cell_measure()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Argument("sampled functions live on different grids".into()));
        }
        Ok(())
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_measure()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let h = self.cell_measure();
        if p.is_infinite() {
            self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
        } else {
            (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * h).powf(1.0 / p)
        }
    }

    /// Value at the cell containing `p`.
    pub fn value_at(&self, p: &[f64]) -> Option<f64> {
        self.grid.index_of(p).map(|i| self.values[i])
    }

    pub fn values_on(&self, cells: &CellSet) -> Vec<f64> {
        cells.cells.iter().map(|&i| self.values[i]).collect()
    }

    /// Flat little-endian doubles at `path` plus `path.json` sidecar.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes)?;
        let side = SampledSidecar {
            grid: self.grid.clone(),
            cell_measure: self.cell_measure(),
            count: self.values.len(),
            encoding: "f64-le".into(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let side: SampledSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        if side.encoding != "f64-le" {
            return Err(Error::Io(format!("unsupported encoding {}", side.encoding)));
        }
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * side.count {
            return Err(Error::Io(format!(
                "expected {} bytes, found {}",
                8 * side.count,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(side.grid, values)
    }

    /// CSV with one row per cell: centre coordinates then value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.grid.dim()).map(|k| format!("c{k}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        let mut p = vec![0.0; self.grid.dim()];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.center_into(i, &mut p);
            let mut row: Vec<String> = p.iter().map(|&c| crate::riesz::fmt17(c)).collect();
            row.push(crate::riesz::fmt17(*v));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::centered(Space::heisenberg(1), &[1.0, 1.0, 2.0], &[8, 8, 16]).unwrap()
    }

    #[test]
    fn indexing_round_trips() {
        let g = grid();
        for i in [0, 7, 100, g.len() - 1] {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
            assert_eq!(g.index_of(&g.center(i)), Some(i));
        }
        assert_eq!(g.index_of(&[1.5, 0.0, 0.0]), None);
        assert!((g.cell_measure() * g.len() as f64 - g.volume()).abs() < 1e-12);
    }

    #[test]
    fn ball_cells_match_brute_force() {
        let g = grid();
        let b = Ball::new(vec![0.1, -0.2, 0.3], 0.6);
        let cells = g.cells_in_ball(&b).unwrap();
        let brute: Vec<usize> = (0..g.len()).filter(|&i| b.contains(g.space, &g.center(i))).collect();
        assert_eq!(cells.cells, brute);
        assert!(g.cells_in_ball(&Ball::new(vec![0.9, 0.0, 0.0], 0.5)).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let g = grid();
        let f = SampledFunction::from_fn(&g, |p| p[0] * p[2] - p[1]).unwrap();
        let dir = std::env::temp_dir().join(format!("hkit-grid-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.bin");
        f.write_binary(&path).unwrap();
        assert_eq!(SampledFunction::read_binary(&path).unwrap(), f);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_non_finite() {
        let g = grid();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(SampledFunction::new(g, v).is_err());
    }
}

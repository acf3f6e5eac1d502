//! Nested dyadic cube systems over a grid box with inner/outer Korányi-ball certificates
//! `B(c, r1) ⊂ S ⊂ B(c, r2)`.
//!
//! Level `l` has scale `s_l = s_0 2^-l` and tiles `gamma o delta_{s_l}([0,1)^{2n} x [0,1))`
//! for `gamma` in the lattice subgroup `delta_{s_l} Z^{2n+1}`. Finest-level tiles are grouped
//! upwards by the parent map "coarser tile containing the corner of the child", which is
//! exact integer arithmetic and equivariant under the lattice. Every level-`l` cube is
//! therefore a left translate of `delta_{s_l}` of one shape that depends only on the
//! number of levels below it; certificates are searched once per shape.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Ball, CellSet, Grid};
use crate::group::{compose_into, dilate_in_place, distance_of, Mode, Space};

type Key = Vec<i64>;

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Tile index of `q` (in level units) at that level.
fn tile_of(space: Space, q: &[f64]) -> Key {
    let mut key: Key = Vec::with_capacity(q.len());
    match space.mode {
        Mode::Abelian => key.extend(q.iter().map(|v| v.floor() as i64)),
        Mode::Heisenberg => {
            let n = space.n;
            key.extend(q[..2 * n].iter().map(|v| v.floor() as i64));
            let mut t = q[2 * n];
            for i in 0..n {
                t += 2.0 * key[i] as f64 * q[n + i] - 2.0 * key[n + i] as f64 * q[i];
            }
            key.push(t.floor() as i64);
        }
    }
    key
}

/// Parent key at level `m` of a level-`m+1` key.
fn parent_key(space: Space, child: &[i64]) -> Key {
    match space.mode {
        Mode::Abelian => child.iter().map(|&k| floor_div(k, 2)).collect(),
        Mode::Heisenberg => {
            let n = space.n;
            let mut key: Key = child[..2 * n].iter().map(|&k| floor_div(k, 2)).collect();
            // corner t = child_t / 4, shear 2 <g_x, child_y / 2> - 2 <g_y, child_x / 2>
            let mut t = child[2 * n];
            for i in 0..n {
                t += 4 * (key[i] * child[n + i] - key[n + i] * child[i]);
            }
            key.push(floor_div(t, 4));
            key
        }
    }
}

/// Corner point of a key at scale `s`.
fn corner(space: Space, key: &[i64], s: f64) -> Vec<f64> {
    let mut c: Vec<f64> = key.iter().map(|&k| k as f64).collect();
    dilate_in_place(space, &mut c, s);
    c
}

/// Ancestor key `levels` generations above the tile of `p` at scale `s_fine`.
fn chain_key(space: Space, p: &[f64], s_fine: f64, levels: usize) -> Key {
    let mut q = p.to_vec();
    dilate_in_place(space, &mut q, 1.0 / s_fine);
    let mut key = tile_of(space, &q);
    for _ in 0..levels {
        key = parent_key(space, &key);
    }
    key
}

/// Inner/outer balls of the level-0 shape with `below` refinement levels, relative to
/// the corner at unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeCertificate {
    pub below: usize,
    pub center: Vec<f64>,
    pub r_inner: f64,
    pub r_outer: f64,
}

/// One cube of a [`DyadicSystem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: usize,
    pub key: Vec<i64>,
    /// Grid cells whose centres lie in the cube.
    pub cells: CellSet,
    /// Index of the parent cube in level `level - 1`.
    pub parent: Option<usize>,
    pub inner: Ball,
    pub outer: Ball,
    /// The outer ball lies inside the grid box, so the cube is not clipped.
    pub interior: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicLevel {
    pub scale: f64,
    pub cubes: Vec<DyadicCube>,
    /// Cube index (into `cubes`) of every grid cell.
    pub cell_cube: Vec<u32>,
}

/// Nested partitions of a grid box at levels `0..=depth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicSystem {
    pub grid: Grid,
    pub depth: usize,
    pub top_scale: f64,
    pub shapes: Vec<ShapeCertificate>,
    pub levels: Vec<DyadicLevel>,
}

const SHAPE_SAMPLES: usize = 150_000;
const SAFETY: f64 = 0.02;

/// Searches the inner and outer radius of the level-0 shape at the origin corner.
pub fn shape_certificate(space: Space, below: usize, seed: u64) -> Result<ShapeCertificate> {
    let d = space.dim();
    let s_fine = 0.5f64.powi(below as i32);
    let member = |p: &[f64]| chain_key(space, p, s_fine, below).iter().all(|&k| k == 0);
    // the shape lies within one tile of [0,1)^(2n+1) in horizontal directions; the centre
    // direction is sheared by at most 2 |z| per level
    let lo: Vec<f64> = (0..d).map(|k| if space.degree(k) == 2 { -4.0 } else { -1.0 }).collect();
    let hi: Vec<f64> = (0..d).map(|k| if space.degree(k) == 2 { 5.0 } else { 2.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ below as u64);
    let pts: Vec<Vec<f64>> = (0..SHAPE_SAMPLES)
        .map(|_| (0..d).map(|k| rng.random_range(lo[k]..hi[k])).collect())
        .collect();
    let inside: Vec<bool> = pts.par_iter().map(|p| member(p)).collect();
    let (ins, outs): (Vec<_>, Vec<_>) = pts.iter().zip(&inside).partition(|(_, &m)| m);
    let ins: Vec<&Vec<f64>> = ins.into_iter().map(|(p, _)| p).collect();
    let outs: Vec<&Vec<f64>> = outs.into_iter().map(|(p, _)| p).collect();
    if ins.is_empty() {
        return Err(Error::Certificate {
            level: below,
            cube: "shape".into(),
            reason: "no sample falls inside the shape".into(),
        });
    }
    for (k, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
        let span = h - l;
        if ins.iter().any(|p| p[k] < l + 0.02 * span || p[k] > h - 0.02 * span) {
            return Err(Error::Certificate {
                level: below,
                cube: "shape".into(),
                reason: format!("shape reaches the search box on axis {k}"),
            });
        }
    }
    // candidate centres on a lattice inside the unit tile
    let per = 7usize;
    let total = per.pow(d as u32);
    let inner_radius = |c: &[f64]| {
        let mut scratch = vec![0.0; d];
        outs.iter()
            .map(|p| distance_of(space, p, c, &mut scratch))
            .fold(f64::INFINITY, f64::min)
    };
    let best = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rest = idx;
            let mut c = vec![0.0; d];
            for v in c.iter_mut().rev() {
                *v = 0.1 + 0.8 * (rest % per) as f64 / (per - 1) as f64;
                rest /= per;
            }
            let r = inner_radius(&c);
            (r, c)
        })
        .reduce(
            || (0.0, vec![]),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let (mut r1, center) = best;
    if !(r1 > 0.0) || center.is_empty() {
        return Err(Error::Certificate {
            level: below,
            cube: "shape".into(),
            reason: "no admissible inner ball".into(),
        });
    }
    // refine: dense samples of the inner ball and of a neighbourhood of the outer ball
    let cg = crate::group::GroupPoint::new(space, center.clone())?;
    for p in crate::group::ball_sample(&cg, r1, 100_000, seed ^ 0x1b1b)? {
        if !member(&p.coords) {
            let mut scratch = vec![0.0; d];
            r1 = r1.min(distance_of(space, &p.coords, &center, &mut scratch));
        }
    }
    let mut r2 = {
        let mut scratch = vec![0.0; d];
        ins.iter()
            .map(|p| distance_of(space, p, &center, &mut scratch))
            .fold(0.0, f64::max)
    };
    for p in crate::group::ball_sample(&cg, 1.2 * r2, 200_000, seed ^ 0x2c2c)? {
        if member(&p.coords) {
            let mut scratch = vec![0.0; d];
            r2 = r2.max(distance_of(space, &p.coords, &center, &mut scratch));
        }
    }
    Ok(ShapeCertificate {
        below,
        center,
        r_inner: r1 * (1.0 - SAFETY),
        r_outer: r2 * (1.0 + SAFETY),
    })
}

impl DyadicSystem {
    /// Builds levels `0..=depth` over `grid` with level-0 scale `top_scale`.
    pub fn build(grid: &Grid, depth: usize, top_scale: f64, seed: u64) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Argument("depth must be at least 1".into()));
        }
        if !(top_scale > 0.0) {
            return Err(Error::Argument("top scale must be positive".into()));
        }
        let space = grid.space;
        let shapes = (0..=depth)
            .map(|below| shape_certificate(space, below, seed))
            .collect::<Result<Vec<_>>>()?;
        let s_fine = top_scale * 0.5f64.powi(depth as i32);
        let mut keys: Vec<Key> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |p, i| {
                    grid.center_into(i, p);
                    chain_key(space, p, s_fine, 0)
                },
            )
            .collect();
        let mut levels_rev: Vec<DyadicLevel> = Vec::with_capacity(depth + 1);
        for level in (0..=depth).rev() {
            if level < depth {
                keys = keys.par_iter().map(|k| parent_key(space, k)).collect();
            }
            let scale = top_scale * 0.5f64.powi(level as i32);
            let shape = &shapes[depth - level];
            let mut index: HashMap<Key, u32> = HashMap::new();
            let mut order: Vec<Key> = Vec::new();
            let mut cell_cube = Vec::with_capacity(keys.len());
            for k in &keys {
                let id = *index.entry(k.clone()).or_insert_with(|| {
                    order.push(k.clone());
                    (order.len() - 1) as u32
                });
                cell_cube.push(id);
            }
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
            for (cell, &id) in cell_cube.iter().enumerate() {
                members[id as usize].push(cell);
            }
            let cubes = order
                .into_iter()
                .zip(members)
                .map(|(key, cells)| {
                    let c0 = corner(space, &key, scale);
                    let mut off = shape.center.clone();
                    dilate_in_place(space, &mut off, scale);
                    let mut center = vec![0.0; space.dim()];
                    compose_into(space, &c0, &off, &mut center);
                    let inner = Ball::new(center.clone(), shape.r_inner * scale);
                    let outer = Ball::new(center, shape.r_outer * scale);
                    DyadicCube {
                        level,
                        interior: grid.contains_ball(&outer),
                        key,
                        cells: CellSet { cells },
                        parent: None,
                        inner,
                        outer,
                    }
                })
                .collect();
            levels_rev.push(DyadicLevel {
                scale,
                cubes,
                cell_cube,
            });
        }
        levels_rev.reverse();
        let mut levels = levels_rev;
        for level in 1..=depth {
            let (upper, lower) = levels.split_at_mut(level);
            let parent_level = &upper[level - 1];
            for cube in &mut lower[0].cubes {
                let cell = cube.cells.cells[0];
                cube.parent = Some(parent_level.cell_cube[cell] as usize);
            }
        }
        Ok(Self {
            grid: grid.clone(),
            depth,
            top_scale,
            shapes,
            levels,
        })
    }

    pub fn space(&self) -> Space {
        self.grid.space
    }

    pub fn cube(&self, level: usize, idx: usize) -> &DyadicCube {
        &self.levels[level].cubes[idx]
    }

    /// Level-`level` cube key containing an arbitrary point (not necessarily a cell centre).
    pub fn key_of(&self, p: &[f64], level: usize) -> Vec<i64> {
        let s_fine = self.top_scale * 0.5f64.powi(self.depth as i32);
        chain_key(self.space(), p, s_fine, self.depth - level)
    }

    /// Interior cubes with at least `min_cells` cells, as `(level, index)`.
    pub fn interior_cubes(&self, min_cells: usize) -> Vec<(usize, usize)> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(l, lev)| {
                lev.cubes
                    .iter()
                    .enumerate()
                    .filter(move |(_, c)| c.interior && c.cells.len() >= min_cells)
                    .map(move |(i, _)| (l, i))
            })
            .collect()
    }

    /// Checks partition, nesting and certificates on grid cells and on random points.
    pub fn verify(&self, samples_per_cube: usize, cubes_per_level: usize, seed: u64) -> DyadicReport {
        let space = self.space();
        let grid = &self.grid;
        let mut rows = Vec::new();
        let mut partition_ok = true;
        let mut nesting_ok = true;
        for (l, lev) in self.levels.iter().enumerate() {
            let total: usize = lev.cubes.iter().map(|c| c.cells.len()).sum();
            let mut seen = vec![false; grid.len()];
            for (i, c) in lev.cubes.iter().enumerate() {
                for &cell in &c.cells.cells {
                    partition_ok &= !seen[cell] && lev.cell_cube[cell] as usize == i;
                    seen[cell] = true;
                }
            }
            partition_ok &= total == grid.len() && seen.iter().all(|&s| s);
            if l > 0 {
                let up = &self.levels[l - 1];
                for c in &lev.cubes {
                    let p = c.parent.expect("parent of a non-root cube");
                    nesting_ok &= c.cells.cells.iter().all(|&cell| up.cell_cube[cell] as usize == p);
                    nesting_ok &= parent_key(space, &c.key) == up.cubes[p].key;
                }
            }
            // certificates on grid cells, interior cubes only
            let interior: Vec<usize> = (0..lev.cubes.len()).filter(|&i| lev.cubes[i].interior).collect();
            let grid_violations: usize = interior
                .par_iter()
                .map(|&i| {
                    let c = &lev.cubes[i];
                    let mut bad = 0;
                    let mut scratch = vec![0.0; space.dim()];
                    let mut p = vec![0.0; space.dim()];
                    for &cell in &c.cells.cells {
                        grid.center_into(cell, &mut p);
                        if distance_of(space, &p, &c.outer.center, &mut scratch) >= c.outer.radius {
                            bad += 1;
                        }
                    }
                    for cell in grid.cells_in_ball_clipped(&c.inner).cells {
                        if lev.cell_cube[cell] as usize != i {
                            bad += 1;
                        }
                    }
                    bad
                })
                .sum();
            // random points in sampled cubes
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (l as u64).wrapping_mul(0x9e37));
            let picks: Vec<usize> = if interior.is_empty() {
                Vec::new()
            } else {
                (0..cubes_per_level.min(interior.len()))
                    .map(|_| interior[rng.random_range(0..interior.len())])
                    .collect()
            };
            let point_violations: usize = picks
                .par_iter()
                .enumerate()
                .map(|(k, &i)| {
                    let c = &lev.cubes[i];
                    let s = seed.wrapping_add((l * 7919 + k) as u64);
                    let mut bad = 0;
                    let ci = crate::group::GroupPoint::new(space, c.inner.center.clone()).expect("centre");
                    for p in crate::group::ball_sample(&ci, c.inner.radius, samples_per_cube, s).expect("radius") {
                        if self.key_of(&p.coords, l) != c.key {
                            bad += 1;
                        }
                    }
                    let mut scratch = vec![0.0; space.dim()];
                    for p in crate::group::ball_sample(&ci, 1.5 * c.outer.radius, samples_per_cube, s ^ 0xfe)
                        .expect("radius")
                    {
                        if self.key_of(&p.coords, l) == c.key
                            && distance_of(space, &p.coords, &c.outer.center, &mut scratch) >= c.outer.radius
                        {
                            bad += 1;
                        }
                    }
                    bad
                })
                .sum();
            let scale = lev.scale;
            let shape = &self.shapes[self.depth - l];
            rows.push(LevelReport {
                level: l,
                cubes: lev.cubes.len(),
                interior_cubes: interior.len(),
                r_inner: shape.r_inner * scale,
                r_outer: shape.r_outer * scale,
                side_over_r_inner: 1.0 / shape.r_inner,
                side_over_r_outer: 1.0 / shape.r_outer,
                grid_violations,
                sampled_cubes: picks.len(),
                point_violations,
            });
        }
        let ratios: Vec<f64> = self.shapes.iter().map(|s| s.r_outer / s.r_inner).collect();
        let certificates_ok = rows.iter().all(|r| r.grid_violations == 0 && r.point_violations == 0);
        DyadicReport {
            depth: self.depth,
            top_scale: self.top_scale,
            partition_ok,
            nesting_ok,
            certificates_ok,
            max_radius_ratio: ratios.iter().cloned().fold(0.0, f64::max),
            levels: rows,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub cubes: usize,
    pub interior_cubes: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    /// `s_l / r1` and `s_l / r2` (the (4.4) constants, level scale `s_l = s_0 2^-l`).
    pub side_over_r_inner: f64,
    pub side_over_r_outer: f64,
    pub grid_violations: usize,
    pub sampled_cubes: usize,
    pub point_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicReport {
    pub depth: usize,
    pub top_scale: f64,
    pub partition_ok: bool,
    pub nesting_ok: bool,
    pub certificates_ok: bool,
    /// System-wide bound on `r2 / r1`.
    pub max_radius_ratio: f64,
    pub levels: Vec<LevelReport>,
}

impl DyadicReport {
    pub fn passed(&self) -> bool {
        self.partition_ok && self.nesting_ok && self.certificates_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_key_matches_float_tiles() {
        let space = Space::heisenberg(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let child: Key = (0..3).map(|_| rng.random_range(-40i64..40)).collect();
            let q = vec![child[0] as f64 / 2.0, child[1] as f64 / 2.0, child[2] as f64 / 4.0];
            assert_eq!(parent_key(space, &child), tile_of(space, &q));
        }
    }

    #[test]
    fn tiles_are_fundamental_domains() {
        let space = Space::heisenberg(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let key = tile_of(space, &p);
            let c = corner(space, &key, 1.0);
            let mut inv = vec![0.0; 3];
            crate::group::left_difference_into(space, &p, &c, &mut inv);
            assert!(inv.iter().all(|&v| (0.0..1.0).contains(&v)), "{inv:?}");
        }
    }

    #[test]
    fn abelian_shape_is_the_unit_cube() {
        let c = shape_certificate(Space::abelian(2), 3, 1).unwrap();
        assert!(c.r_inner > 0.4 && c.r_inner < 0.5);
        assert!(c.r_outer > 0.7 && c.r_outer < 0.75, "{c:?}");
    }
}

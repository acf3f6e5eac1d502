//! Medians, mean and local mean oscillation, (weighted) BMO norms, `A_p` constants and
//! the `E x F` sets on which a commutator kernel keeps one sign.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::grid::{Ball, BallFamily, CellSet, Grid, SampledFunction};
use crate::group::{ball_sample, compose_into, dilate_in_place, distance_of, GroupPoint, Space};
use crate::riesz::RieszKernel;
use crate::sector::{angular_strip, scaled_sector, sector_contains, SectorSpec};

/// Anything that can be evaluated at a group point.
pub trait Field: Sync {
    fn value(&self, p: &[f64]) -> Option<f64>;
}

impl Field for SampledFunction {
    fn value(&self, p: &[f64]) -> Option<f64> {
        self.value_at(p)
    }
}

/// Closure-backed [`Field`].
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Field for FnField<F> {
    fn value(&self, p: &[f64]) -> Option<f64> {
        Some((self.0)(p))
    }
}

/// Smallest `m` with `mass{v < m} <= M/2` and `mass{v > m} <= M/2`.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("median of an empty region".into()));
    }
    let mut pairs: Vec<(f64, f64)> = values.iter().cloned().zip(weights.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut cum = 0.0;
    for (v, w) in &pairs {
        cum += w;
        if 2.0 * cum >= total {
            return Ok(*v);
        }
    }
    Ok(pairs[pairs.len() - 1].0)
}

/// Median of `b` over a cell set (cells of equal measure).
pub fn median(b: &SampledFunction, region: &CellSet) -> Result<f64> {
    let v = b.values_on(region);
    weighted_median(&v, &vec![1.0; v.len()])
}

/// Measures `(|{b < m}|, |{b > m}|, |region|)` in cell units.
pub fn median_masses(b: &SampledFunction, region: &CellSet, m: f64) -> (usize, usize, usize) {
    let v = b.values_on(region);
    (
        v.iter().filter(|&&x| x < m).count(),
        v.iter().filter(|&&x| x > m).count(),
        v.len(),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `(1/|B|) int_B |b - b_B|` over the cells of a ball inside the box.
pub fn mean_oscillation(b: &SampledFunction, ball: &Ball) -> Result<f64> {
    let cells = b.grid.cells_in_ball(ball)?;
    mean_oscillation_on(b, &cells)
}

pub fn mean_oscillation_on(b: &SampledFunction, cells: &CellSet) -> Result<f64> {
    if cells.is_empty() {
        return Err(Error::Argument("region contains no cell centre".into()));
    }
    let v = b.values_on(cells);
    if v.iter().all(|x| *x == v[0]) {
        return Ok(0.0);
    }
    let avg = mean(&v);
    Ok(v.iter().map(|x| (x - avg).abs()).sum::<f64>() / v.len() as f64)
}

/// Supremum over a ball family, with the family it was taken over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySup {
    pub value: f64,
    pub argmax: Option<Ball>,
    pub balls: usize,
    pub family: String,
}

fn family_sup<F>(b_grid: &Grid, family: &BallFamily, f: F) -> Result<FamilySup>
where
    F: Fn(&CellSet) -> Result<f64> + Sync,
{
    let vals = family
        .balls
        .par_iter()
        .map(|ball| {
            let cells = b_grid.cells_in_ball(ball)?;
            if cells.is_empty() {
                return Ok(None);
            }
            Ok(Some(f(&cells)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = FamilySup {
        value: 0.0,
        argmax: None,
        balls: family.balls.len(),
        family: family.description.clone(),
    };
    for (ball, v) in family.balls.iter().zip(vals) {
        if let Some(v) = v {
            if best.argmax.is_none() || v > best.value {
                best.value = v;
                best.argmax = Some(ball.clone());
            }
        }
    }
    Ok(best)
}

/// `sup_B (1/|B|) int_B |b - b_B|` over the family.
pub fn bmo_norm(b: &SampledFunction, family: &BallFamily) -> Result<FamilySup> {
    family_sup(&b.grid, family, |cells| mean_oscillation_on(b, cells))
}

/// Positive weight sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub function: SampledFunction,
}

impl Weight {
    pub fn new(function: SampledFunction) -> Result<Self> {
        if let Some(i) = function.values.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Argument(format!("weight is not positive at cell {i}")));
        }
        Ok(Self { function })
    }

    pub fn unit(grid: &Grid) -> Self {
        Self {
            function: SampledFunction::constant(grid, 1.0).expect("finite"),
        }
    }

    /// `d_K(g)^a` (cell centres never hit the origin on grids with even cell counts).
    pub fn power(grid: &Grid, a: f64) -> Result<Self> {
        let space = grid.space;
        Self::new(SampledFunction::from_fn(grid, |p| {
            crate::group::norm_of(space, p).powf(a)
        })?)
    }

    pub fn measure(&self, cells: &CellSet) -> f64 {
        cells.cells.iter().map(|&i| self.function.values[i]).sum::<f64>() * self.function.cell_measure()
    }
}

/// `sup_B (1/nu(B)) int_B |b - b_B|` over the family.
pub fn bmo_norm_weighted(b: &SampledFunction, nu: &Weight, family: &BallFamily) -> Result<FamilySup> {
    b.check_same_grid(&nu.function)?;
    family_sup(&b.grid, family, |cells| {
        let v = b.values_on(cells);
        let avg = mean(&v);
        let osc: f64 = v.iter().map(|x| (x - avg).abs()).sum();
        let w: f64 = cells.cells.iter().map(|&i| nu.function.values[i]).sum();
        Ok(osc / w)
    })
}

/// `[w]_{A_p} = sup_B <w>_B <w^{-1/(p-1)}>_B^{p-1}` over the family.
pub fn ap_constant(w: &Weight, p: f64, family: &BallFamily) -> Result<FamilySup> {
    if !(p > 1.0) {
        return Err(Error::Argument("A_p needs p > 1".into()));
    }
    let f = &w.function;
    family_sup(&f.grid, family, |cells| {
        let v = f.values_on(cells);
        let a = mean(&v);
        let dual: Vec<f64> = v.iter().map(|x| x.powf(-1.0 / (p - 1.0))).collect();
        Ok(a * mean(&dual).powf(p - 1.0))
    })
}

/// `inf_c ((f - c) chi_S)^*(lambda |S|)` and an optimal `c`, for weighted samples.
///
/// `(|f - c|)^*(lambda |S|) <= a` iff `mass{|f - c| <= a} >= (1 - lambda) |S|`, so the
/// infimum is half the shortest closed value window carrying that mass, attained at
/// the window midpoint.
pub fn local_mean_oscillation_weighted(values: &[f64], weights: &[f64], lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Argument("lambda must lie in (0, 1)".into()));
    }
    if values.is_empty() {
        return Err(Error::Argument("empty cube".into()));
    }
    let mut pairs: Vec<(f64, f64)> = values.iter().cloned().zip(weights.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let need = (1.0 - lambda) * total;
    let mut best = (f64::INFINITY, pairs[0].0);
    let mut j = 0usize;
    let mut mass = 0.0;
    for i in 0..pairs.len() {
        while j < pairs.len() && mass < need {
            mass += pairs[j].1;
            j += 1;
        }
        if mass < need {
            break;
        }
        let width = pairs[j - 1].0 - pairs[i].0;
        if width < best.0 {
            best = (width, 0.5 * (pairs[j - 1].0 + pairs[i].0));
        }
        mass -= pairs[i].1;
    }
    Ok((0.5 * best.0, best.1))
}

/// `w_lambda(f; S)` on the cells of `S`.
pub fn local_mean_oscillation(f: &SampledFunction, cells: &CellSet, lambda: f64) -> Result<f64> {
    let v = f.values_on(cells);
    Ok(local_mean_oscillation_weighted(&v, &vec![1.0; v.len()], lambda)?.0)
}

/// Default `lambda = 2^-(Q+2)`.
pub fn default_lambda(space: Space) -> f64 {
    0.5f64.powi(space.q() as i32 + 2)
}

/// Weighted point cells discretising `k0 B n G` (`B = B(x0, r)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCells {
    pub points: Vec<Vec<f64>>,
    pub measures: Vec<f64>,
}

impl PointCells {
    pub fn measure(&self) -> f64 {
        self.measures.iter().sum()
    }
}

/// Radial layout of the polar cells of [`sector_cells_spaced`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RadialSpacing {
    /// `resolution` cells uniform in `rho^Q` (equal measure).
    Volume,
    /// `per_octave` cells per doubling of `rho`, uniform in `log rho`.
    Log { per_octave: usize },
}

/// Cells of `B(x0, k0 r) n tau_{x0} delta_r G`.
///
/// On `H^1` a polar grid, uniform in `rho^Q` (`resolution` cells), over the angular strip
/// of the sector (`8 resolution` theta bins of `resolution / 2` phi cells); elsewhere equal-measure uniform samples of the ball.
pub fn sector_cells(
    spec: &SectorSpec,
    x0: &[f64],
    r: f64,
    k0: f64,
    resolution: usize,
    seed: u64,
) -> Result<PointCells> {
    sector_cells_spaced(spec, x0, r, k0, resolution, RadialSpacing::Volume, seed)
}

/// As [`sector_cells`] with a chosen radial layout (ignored off `H^1`).
pub fn sector_cells_spaced(
    spec: &SectorSpec,
    x0: &[f64],
    r: f64,
    k0: f64,
    resolution: usize,
    spacing: RadialSpacing,
    seed: u64,
) -> Result<PointCells> {
    let space = spec.space;
    let g = GroupPoint::new(space, x0.to_vec())?;
    let region = scaled_sector(spec, &g, r)?;
    let qd = space.q() as i32;
    let res = resolution.max(16);
    if space.is_heisenberg() && space.n == 1 {
        // narrow theta bins: at fixed theta the shadow is only ~2 eps^2 thick in phi
        let strip = angular_strip(spec, 8 * res, seed)?;
        let np = (res / 2).max(4);
        let (lq, hq) = ((spec.r_o * spec.alpha).powi(qd), k0.powi(qd));
        if !(hq > lq) {
            return Err(Error::Argument(format!("k0 = {k0} does not exceed r_o")));
        }
        // (rho at the cell, rho^Q measure of the shell)
        let shells: Vec<(f64, f64)> = match spacing {
            RadialSpacing::Volume => {
                let du = (hq - lq) / res as f64;
                (0..res)
                    .map(|iu| ((lq + (iu as f64 + 0.5) * du).powf(1.0 / qd as f64), du))
                    .collect()
            }
            RadialSpacing::Log { per_octave } => {
                let lo = spec.r_o * spec.alpha;
                let count = ((k0 / lo).log2() * per_octave.max(1) as f64).ceil().max(1.0) as usize;
                let step = (k0 / lo).ln() / count as f64;
                (0..count)
                    .map(|iu| {
                        let a = lo * (iu as f64 * step).exp();
                        let b = lo * ((iu + 1) as f64 * step).exp();
                        ((a * b).sqrt(), b.powi(qd) - a.powi(qd))
                    })
                    .collect()
            }
        };
        let nr = shells.len();
        let cells: Vec<(Vec<f64>, f64)> = (0..strip.len() * nr * np)
            .into_par_iter()
            .filter_map(|idx| {
                let (ib, rest) = (idx / (nr * np), idx % (nr * np));
                let (iu, ip) = (rest / np, rest % np);
                let bin = &strip[ib];
                let dp = (bin.phi_hi - bin.phi_lo) / np as f64;
                let dt = bin.theta_hi - bin.theta_lo;
                let (rho, du) = shells[iu];
                let phi = bin.phi_lo + (ip as f64 + 0.5) * dp;
                let theta = 0.5 * (bin.theta_lo + bin.theta_hi);
                let mut w = crate::group::polar_point(space, rho, phi, &[theta.cos(), theta.sin()]);
                dilate_in_place(space, &mut w, r);
                let mut p = vec![0.0; space.dim()];
                compose_into(space, x0, &w, &mut p);
                let mut scratch = vec![0.0; space.dim()];
                (distance_of(space, &p, x0, &mut scratch) < k0 * r && sector_contains(&region, &p))
                    .then(|| (p, du / qd as f64 * dp * dt * r.powi(qd)))
            })
            .collect();
        let (points, measures) = cells.into_iter().unzip();
        Ok(PointCells { points, measures })
    } else {
        let count = res * res * res;
        let pts = ball_sample(&g, k0 * r, count, seed)?;
        let each = space.unit_ball_volume() * (k0 * r).powi(qd) / count as f64;
        let points: Vec<Vec<f64>> = pts
            .into_par_iter()
            .filter(|p| sector_contains(&region, &p.coords))
            .map(|p| p.coords)
            .collect();
        let measures = vec![each; points.len()];
        Ok(PointCells { points, measures })
    }
}

/// Certificate for the `E x F` construction on one cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfReport {
    pub level: usize,
    pub cube: Vec<i64>,
    pub lambda: f64,
    pub k0: f64,
    pub w: f64,
    pub degenerate: bool,
    pub median_f: f64,
    pub s_measure: f64,
    pub f_k0_measure: f64,
    pub e_measure: f64,
    pub f_measure: f64,
    pub e_cells: usize,
    pub f_cells: usize,
    /// `|E x F| / (|S|^2 k0^Q)`.
    pub property1_constant: f64,
    /// `min |b(g) - b(g')|` over `E x F`.
    pub property2_min_gap: f64,
    pub property2_ok: bool,
    pub kernel_sign: f64,
    pub difference_sign: f64,
    pub property3_ok: bool,
    /// `min |K_j(g, g')| d_K(g, g')^Q` over `E x F`.
    pub property4_constant: f64,
    pub property4_ok: bool,
    pub pairs: usize,
}

impl EfReport {
    pub fn passed(&self) -> bool {
        self.property2_ok && self.property3_ok && self.property4_ok
    }
}

/// The sets `E ⊂ S`, `F ⊂ k0 B n G` and their certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfSets {
    pub e: CellSet,
    pub f: PointCells,
    pub report: EfReport,
}

/// Builds `E`, `F` for the cube `(level, idx)` of `system`.
///
/// `B = B2` of the cube; `F_k0 = k0 B n G` with `G` the sector of `spec` based at the
/// centre of `B`; `calE` is the top `lambda |S|` of `|b - m_b(F_k0)|` on `S`; `E` is half of
/// `calE` on one side of the median and `F` half of `F_k0` on the other side.
#[allow(clippy::too_many_arguments)]
pub fn ef_sets(
    kernel: &RieszKernel,
    spec: &SectorSpec,
    b: &dyn Field,
    system: &DyadicSystem,
    level: usize,
    idx: usize,
    k0: f64,
    resolution: usize,
    seed: u64,
) -> Result<EfSets> {
    let space = system.space();
    if kernel.space != space || spec.space != space {
        return Err(Error::ModeMismatch("kernel, sector and dyadic system differ".into()));
    }
    if !(k0 > spec.r_o) {
        return Err(Error::Argument(format!("k0 = {k0} must exceed r_o = {}", spec.r_o)));
    }
    let grid = &system.grid;
    let cube = system.cube(level, idx);
    let lambda = default_lambda(space);
    let (x0, r) = (cube.outer.center.clone(), cube.outer.radius);
    let fk0 = sector_cells(spec, &x0, r, k0, resolution, seed)?;
    if fk0.points.is_empty() {
        return Err(Error::Numerical("k0 B n G has no cells at this resolution".into()));
    }
    let eval = |p: &[f64]| {
        b.value(p)
            .ok_or_else(|| Error::Argument(format!("b is undefined at {p:?}")))
    };
    let bf = fk0.points.iter().map(|p| eval(p)).collect::<Result<Vec<f64>>>()?;
    let s_pts: Vec<Vec<f64>> = cube.cells.cells.iter().map(|&i| grid.center(i)).collect();
    let bs = s_pts.iter().map(|p| eval(p)).collect::<Result<Vec<f64>>>()?;
    let m = weighted_median(&bf, &fk0.measures)?;
    let (w, _) = local_mean_oscillation_weighted(&bs, &vec![1.0; bs.len()], lambda)?;
    // calE: top floor(lambda N) + 1 cells of |b - m|, each at least w
    let mut order: Vec<usize> = (0..bs.len()).collect();
    order.sort_by(|&a, &c| (bs[c] - m).abs().total_cmp(&(bs[a] - m).abs()).then(a.cmp(&c)));
    let e_all = ((lambda * bs.len() as f64).floor() as usize + 1).min(bs.len());
    let cal_e = &order[..e_all];
    let e_half = e_all.div_ceil(2);
    let upper: Vec<usize> = cal_e.iter().cloned().filter(|&i| bs[i] >= m).collect();
    let lower: Vec<usize> = cal_e.iter().cloned().filter(|&i| bs[i] <= m).collect();
    // F: lightest prefix of F_k0 on the far side of the median carrying half its mass
    let half_mass = 0.5 * fk0.measure();
    let mut f_order: Vec<usize> = (0..bf.len()).collect();
    let e_idx = if upper.len() >= e_half {
        f_order.sort_by(|&a, &c| bf[a].total_cmp(&bf[c]).then(a.cmp(&c)));
        upper[..e_half].to_vec()
    } else {
        f_order.sort_by(|&a, &c| bf[c].total_cmp(&bf[a]).then(a.cmp(&c)));
        lower[..e_half].to_vec()
    };
    let mut acc = 0.0;
    let f_idx: Vec<usize> = f_order
        .into_iter()
        .take_while(|&i| {
            let take = acc < half_mass;
            acc += fk0.measures[i];
            take
        })
        .collect();
    let qd = space.q() as i32;
    let stats = e_idx
        .par_iter()
        .map(|&ei| {
            let g = &s_pts[ei];
            let mut scratch = vec![0.0; space.dim()];
            let mut acc = PairStats::default();
            for &fi in &f_idx {
                let gp = &fk0.points[fi];
                let k = kernel.eval_pair(g, gp, &mut scratch);
                let d = distance_of(space, g, gp, &mut scratch);
                let diff = bs[ei] - bf[fi];
                acc.push(k, diff, k.abs() * d.powi(qd));
            }
            acc
        })
        .reduce(PairStats::default, PairStats::merge);
    let cell = grid.cell_measure();
    let s_measure = bs.len() as f64 * cell;
    let e_measure = e_idx.len() as f64 * cell;
    let f_measure: f64 = f_idx.iter().map(|&i| fk0.measures[i]).sum();
    let kernel_sign = if stats.k_pos > 0 && stats.k_neg == 0 {
        1.0
    } else if stats.k_neg > 0 && stats.k_pos == 0 {
        -1.0
    } else {
        0.0
    };
    let difference_sign = if stats.d_neg == 0 {
        1.0
    } else if stats.d_pos == 0 {
        -1.0
    } else {
        0.0
    };
    let report = EfReport {
        level,
        cube: cube.key.clone(),
        lambda,
        k0,
        w,
        degenerate: w == 0.0,
        median_f: m,
        s_measure,
        f_k0_measure: fk0.measure(),
        e_measure,
        f_measure,
        e_cells: e_idx.len(),
        f_cells: f_idx.len(),
        property1_constant: e_measure * f_measure / (s_measure * s_measure * k0.powi(qd)),
        property2_min_gap: stats.min_gap,
        property2_ok: stats.min_gap >= w,
        kernel_sign,
        difference_sign,
        property3_ok: kernel_sign != 0.0 && (stats.d_pos == 0 || stats.d_neg == 0),
        property4_constant: stats.min_lower,
        property4_ok: stats.min_lower > 0.0,
        pairs: stats.pairs,
    };
    let e = CellSet::new(e_idx.iter().map(|&i| cube.cells.cells[i]).collect());
    let f = PointCells {
        points: f_idx.iter().map(|&i| fk0.points[i].clone()).collect(),
        measures: f_idx.iter().map(|&i| fk0.measures[i]).collect(),
    };
    Ok(EfSets { e, f, report })
}

#[derive(Clone, Copy, Debug)]
struct PairStats {
    k_pos: usize,
    k_neg: usize,
    d_pos: usize,
    d_neg: usize,
    min_gap: f64,
    min_lower: f64,
    pairs: usize,
}

impl Default for PairStats {
    fn default() -> Self {
        Self {
            k_pos: 0,
            k_neg: 0,
            d_pos: 0,
            d_neg: 0,
            min_gap: f64::INFINITY,
            min_lower: f64::INFINITY,
            pairs: 0,
        }
    }
}

impl PairStats {
    fn push(&mut self, k: f64, diff: f64, lower: f64) {
        self.pairs += 1;
        if k > 0.0 {
            self.k_pos += 1;
        } else if k < 0.0 {
            self.k_neg += 1;
        }
        if diff > 0.0 {
            self.d_pos += 1;
        } else if diff < 0.0 {
            self.d_neg += 1;
        }
        self.min_gap = self.min_gap.min(diff.abs());
        self.min_lower = self.min_lower.min(lower);
    }

    fn merge(a: Self, b: Self) -> Self {
        Self {
            k_pos: a.k_pos + b.k_pos,
            k_neg: a.k_neg + b.k_neg,
            d_pos: a.d_pos + b.d_pos,
            d_neg: a.d_neg + b.d_neg,
            min_gap: a.min_gap.min(b.min_gap),
            min_lower: a.min_lower.min(b.min_lower),
            pairs: a.pairs + b.pairs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::centered(Space::heisenberg(1), &[1.0, 1.0, 1.0], &[16, 16, 16]).unwrap()
    }

    #[test]
    fn median_examples() {
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[1.0; 3]).unwrap(), 2.0);
        assert_eq!(weighted_median(&[5.0; 4], &[1.0; 4]).unwrap(), 5.0);
        // even count: smallest admissible value
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4]).unwrap(), 2.0);
        assert!(weighted_median(&[], &[]).is_err());
    }

    #[test]
    fn local_mean_oscillation_examples() {
        let v = [1.0, 1.0, 5.0, 5.0];
        let (w, c) = local_mean_oscillation_weighted(&v, &[1.0; 4], 0.2).unwrap();
        assert_eq!((w, c), (2.0, 3.0));
        // brute force over c on the same instance
        let brute = (0..=6000)
            .map(|k| {
                let c = k as f64 * 1e-3;
                let mut d: Vec<f64> = v.iter().map(|x| (x - c).abs()).collect();
                d.sort_by(|a, b| b.total_cmp(a));
                d[(0.2f64 * 4.0).floor() as usize]
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute - w).abs() < 1e-12);
        assert_eq!(
            local_mean_oscillation_weighted(&[2.0; 5], &[1.0; 5], 0.3).unwrap().0,
            0.0
        );
    }

    #[test]
    fn constants_have_no_oscillation() {
        let g = grid();
        let b = SampledFunction::constant(&g, 3.5).unwrap();
        let fam = BallFamily::dyadic(&g, 0.5, 2, 3);
        assert!(!fam.balls.is_empty());
        assert_eq!(bmo_norm(&b, &fam).unwrap().value, 0.0);
        assert_eq!(bmo_norm_weighted(&b, &Weight::unit(&g), &fam).unwrap().value, 0.0);
        let w = Weight::new(SampledFunction::constant(&g, 2.0).unwrap()).unwrap();
        assert!((ap_constant(&w, 2.0, &fam).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_weight_reduces_to_unweighted() {
        let g = grid();
        let b = SampledFunction::from_fn(&g, |p| (p[0] + 2.0 * p[2]).sin()).unwrap();
        let fam = BallFamily::dyadic(&g, 0.5, 2, 3);
        let a = bmo_norm(&b, &fam).unwrap().value;
        let weighted = bmo_norm_weighted(&b, &Weight::unit(&g), &fam).unwrap().value;
        assert!(a > 0.0);
        assert!((weighted - a).abs() <= 1e-12 * a);
    }
}

//! Principal-value application of `R_j` and `[b, R_j]` on sampled functions, the test
//! functions and atoms of the endpoint characterizations, and the experiment drivers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bmo::{mean_oscillation_on, median, sector_cells_spaced, Field, RadialSpacing};
use crate::error::{Error, Result};
use crate::grid::{ball_bounds, Ball, CellSet, Grid, SampledFunction};
use crate::group::{compose_into, dilate_in_place, distance_of, norm_of, polar_point, Space};
use crate::quadrature::gauss_legendre_nodes;
use crate::riesz::RieszKernel;
use crate::sector::SectorSpec;

/// Weighted point sources: `f(p) dp` is represented by `sum_k weights[k] delta_{points[k]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sources {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Sources {
    /// Nonzero cells of `f`, weighted by `f * cell measure`.
    pub fn from_sampled(f: &SampledFunction) -> Self {
        let h = f.cell_measure();
        let (points, weights) = f
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (f.grid.center(i), v * h))
            .unzip();
        Sources { points, weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn check_kernel(kernel: &RieszKernel, grid: &Grid) -> Result<()> {
    if kernel.space != grid.space {
        return Err(Error::ModeMismatch(format!(
            "kernel on {:?} applied to a grid on {:?}",
            kernel.space, grid.space
        )));
    }
    Ok(())
}

fn check_pv_cut(grid: &Grid, pv_cut: f64) -> Result<()> {
    if !(pv_cut >= grid.resolution()) {
        return Err(Error::Argument(format!(
            "pv_cut {pv_cut} is below the grid resolution {}",
            grid.resolution()
        )));
    }
    Ok(())
}

/// Default principal-value cut: two gauge cell widths.
pub fn default_pv_cut(grid: &Grid) -> f64 {
    2.0 * grid.resolution()
}

/// `h sum K(p, c)` over lattice centres `c` (extended past the box) with `0 < d(p, c) <= cut`.
pub fn near_kernel_sum(kernel: &RieszKernel, grid: &Grid, p: &[f64], cut: f64) -> f64 {
    let space = grid.space;
    let dim = grid.dim();
    let (lo, hi) = ball_bounds(space, &Ball::new(p.to_vec(), cut));
    let ranges: Vec<(i64, i64)> = (0..dim)
        .map(|k| {
            let h = grid.spacing(k);
            let a = ((lo[k] - grid.lo[k]) / h - 0.5).ceil() as i64;
            let b = ((hi[k] - grid.lo[k]) / h - 0.5).floor() as i64;
            (a, b)
        })
        .collect();
    if ranges.iter().any(|(a, b)| a > b) {
        return 0.0;
    }
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut c = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut sum = 0.0;
    loop {
        for k in 0..dim {
            c[k] = grid.lo[k] + (idx[k] as f64 + 0.5) * grid.spacing(k);
        }
        let d = distance_of(space, p, &c, &mut scratch);
        if d > 0.0 && d <= cut {
            sum += kernel.eval_pair(p, &c, &mut scratch);
        }
        let mut k = 0;
        loop {
            if k == dim {
                return sum * grid.cell_measure();
            }
            idx[k] += 1;
            if idx[k] <= ranges[k].1 {
                break;
            }
            idx[k] = ranges[k].0;
            k += 1;
        }
    }
}

struct Support {
    index: Vec<usize>,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

fn support_of(f: &SampledFunction) -> Support {
    let mut s = Support {
        index: Vec::new(),
        points: Vec::new(),
        values: Vec::new(),
    };
    for (i, v) in f.values.iter().enumerate() {
        if *v != 0.0 {
            s.index.push(i);
            s.points.push(f.grid.center(i));
            s.values.push(*v);
        }
    }
    s
}

/// PV value at `p`: `h sum_{g' != p} K(p, g') f(g') - f(p) h sum_{0 < d <= cut} K(p, g')`,
/// which equals the far-field sum plus `h sum_near K (f(g') - f(p))`.
fn pv_at(
    kernel: &RieszKernel,
    grid: &Grid,
    support: &Support,
    p: &[f64],
    f_p: f64,
    cut: f64,
    scratch: &mut [f64],
) -> f64 {
    let mut sum = 0.0;
    for (q, v) in support.points.iter().zip(&support.values) {
        sum += kernel.eval_pair(p, q, scratch) * v;
    }
    sum *= grid.cell_measure();
    if f_p != 0.0 {
        sum -= f_p * near_kernel_sum(kernel, grid, p, cut);
    }
    sum
}

/// `R_j f` on the cells of `f`'s grid (second-order PV scheme, sums over `supp f`).
pub fn riesz_apply(kernel: &RieszKernel, f: &SampledFunction, pv_cut: f64) -> Result<SampledFunction> {
    check_kernel(kernel, &f.grid)?;
    check_pv_cut(&f.grid, pv_cut)?;
    let support = support_of(f);
    let grid = &f.grid;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (vec![0.0; grid.dim()], vec![0.0; grid.dim()]),
            |(p, scratch), i| {
                grid.center_into(i, p);
                pv_at(kernel, grid, &support, p, f.values[i], pv_cut, scratch)
            },
        )
        .collect();
    SampledFunction::new(grid.clone(), values)
}

/// `R_j f` at arbitrary points; `f(p)` is the value of the cell containing `p` (0 outside).
pub fn riesz_apply_at(kernel: &RieszKernel, f: &SampledFunction, pv_cut: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_kernel(kernel, &f.grid)?;
    check_pv_cut(&f.grid, pv_cut)?;
    let support = support_of(f);
    Ok(points
        .par_iter()
        .map_init(
            || vec![0.0; f.grid.dim()],
            |scratch, p| {
                let f_p = f.value_at(p).unwrap_or(0.0);
                pv_at(kernel, &f.grid, &support, p, f_p, pv_cut, scratch)
            },
        )
        .collect())
}

/// `[b, R_j] f = b R_j f - R_j(b f)` on the grid.
///
/// Evaluated as `h sum_{g' != g} K(g, g') (b(g) - b(g')) f(g')`: the near-field
/// corrections of the two PV sums are both `b(g) f(g) h sum_near K` and cancel exactly.
pub fn commutator_apply(
    kernel: &RieszKernel,
    b: &SampledFunction,
    f: &SampledFunction,
    pv_cut: f64,
) -> Result<SampledFunction> {
    b.check_same_grid(f)?;
    check_kernel(kernel, &f.grid)?;
    check_pv_cut(&f.grid, pv_cut)?;
    let support = support_of(f);
    let b_supp: Vec<f64> = support.index.iter().map(|&i| b.values[i]).collect();
    let grid = &f.grid;
    let h = grid.cell_measure();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || (vec![0.0; grid.dim()], vec![0.0; grid.dim()]),
            |(p, scratch), i| {
                grid.center_into(i, p);
                let bg = b.values[i];
                let mut sum = 0.0;
                for k in 0..support.index.len() {
                    if support.index[k] != i {
                        let diff = bg - b_supp[k];
                        if diff != 0.0 {
                            sum += kernel.eval_pair(p, &support.points[k], scratch) * diff * support.values[k];
                        }
                    }
                }
                sum * h
            },
        )
        .collect();
    SampledFunction::new(grid.clone(), values)
}

/// `sum_s K(p, s) (b(p) - b(s)) w_s` over sources with `d(p, s) > cut`.
pub fn commutator_at(
    kernel: &RieszKernel,
    b: &dyn Field,
    sources: &Sources,
    points: &[Vec<f64>],
    cut: f64,
) -> Result<Vec<f64>> {
    let space = kernel.space;
    let b_src = field_values(b, &sources.points)?;
    let b_pts = field_values(b, points)?;
    Ok(points
        .par_iter()
        .zip(b_pts.par_iter())
        .map_init(
            || vec![0.0; space.dim()],
            |scratch, (p, bp)| {
                let mut sum = 0.0;
                for ((s, w), bs) in sources.points.iter().zip(&sources.weights).zip(&b_src) {
                    let diff = bp - bs;
                    if diff != 0.0 && distance_of(space, p, s, scratch) > cut {
                        sum += kernel.eval_pair(p, s, scratch) * diff * w;
                    }
                }
                sum
            },
        )
        .collect())
}

fn field_values(b: &dyn Field, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            b.value(p)
                .ok_or_else(|| Error::Argument(format!("field undefined at {p:?}")))
        })
        .collect()
}

/// Superlevel measures `|{|u| > lambda}|` with the `L log L` functional of the source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub thresholds: Vec<f64>,
    pub measures: Vec<f64>,
    /// `int (|f|/lambda)(1 + log+(|f|/lambda))` per threshold; empty without a source.
    pub llogl: Vec<f64>,
}

fn sorted_thresholds(thresholds: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = thresholds.to_vec();
    t.sort_by(|a, b| a.total_cmp(b));
    t
}

/// Superlevel measures of `u` by cell counting, thresholds sorted ascending.
pub fn weak_l1_report(u: &SampledFunction, source: Option<&SampledFunction>, thresholds: &[f64]) -> DistributionReport {
    let thresholds = sorted_thresholds(thresholds);
    let h = u.cell_measure();
    let measures = thresholds
        .iter()
        .map(|l| u.values.iter().filter(|v| v.abs() > *l).count() as f64 * h)
        .collect();
    let llogl = match source {
        Some(f) => thresholds.iter().map(|l| llogl_functional(f, *l)).collect(),
        None => Vec::new(),
    };
    DistributionReport {
        thresholds,
        measures,
        llogl,
    }
}

/// `int (|f|/lambda)(1 + log+(|f|/lambda))` by Riemann sum.
pub fn llogl_functional(f: &SampledFunction, lambda: f64) -> f64 {
    f.values
        .iter()
        .map(|v| {
            let s = v.abs() / lambda;
            s * (1.0 + s.ln().max(0.0))
        })
        .sum::<f64>()
        * f.cell_measure()
}

/// Median-split test function `phi = chi_E2 - chi_E1` on a ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiTest {
    pub function: SampledFunction,
    pub median: f64,
    /// `(1/|B|) int phi (b - m_b(B)) = (1/|B|) int_B |b - m_b(B)|`.
    pub oscillation: f64,
    pub e1: CellSet,
    pub e2: CellSet,
}

/// `E1` takes the lower half of the ball's cells ordered by `b`, `E2` the upper half;
/// an odd middle cell (where `b` equals the median) gets `0`, so `int phi = 0` exactly.
pub fn phi_test_function(b: &SampledFunction, ball: &Ball) -> Result<PhiTest> {
    let cells = b.grid.cells_in_ball(ball)?;
    if cells.is_empty() {
        return Err(Error::Argument("ball contains no cell centre".into()));
    }
    let m = median(b, &cells)?;
    let mut order: Vec<usize> = cells.cells.clone();
    order.sort_by(|&i, &j| b.values[i].total_cmp(&b.values[j]).then(i.cmp(&j)));
    let half = order.len() / 2;
    let mut values = vec![0.0; b.grid.len()];
    for &i in &order[..half] {
        values[i] = -1.0;
    }
    for &i in &order[order.len() - half..] {
        values[i] = 1.0;
    }
    let osc = cells.cells.iter().map(|&i| values[i] * (b.values[i] - m)).sum::<f64>() / cells.len() as f64;
    Ok(PhiTest {
        function: SampledFunction::new(b.grid.clone(), values)?,
        median: m,
        oscillation: osc,
        e1: CellSet::new(order[..half].to_vec()),
        e2: CellSet::new(order[order.len() - half..].to_vec()),
    })
}

/// `psi = sgn(b) chi_F`.
pub fn psi_test_function(b: &SampledFunction, f_set: &CellSet) -> Result<SampledFunction> {
    let mut values = vec![0.0; b.grid.len()];
    for &i in &f_set.cells {
        if i >= values.len() {
            return Err(Error::Argument(format!("cell {i} outside the grid")));
        }
        let v = b.values[i];
        values[i] = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    SampledFunction::new(b.grid.clone(), values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomPattern {
    /// `+-v` on the two halves of the ball split by the first coordinate.
    TwoBlock,
    /// Mean-zero profile `(d(g, x_B)/r)^2 - mean`.
    Radial,
}

/// A `(1, q)`-atom sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub ball: Ball,
    pub pattern: AtomPattern,
    pub q: f64,
    pub function: SampledFunction,
}

impl Atom {
    /// Discrete `L^q` norm.
    pub fn lq_norm(&self) -> f64 {
        self.function.lp_norm(self.q)
    }

    /// `|B|^{1/q - 1}`.
    pub fn size_bound(&self) -> f64 {
        let inv_q = if self.q.is_infinite() { 0.0 } else { 1.0 / self.q };
        self.ball.volume(self.function.grid.space).powf(inv_q - 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.function.integral()
    }
}

/// Mean-zero atom normalized to `||a||_q = |B|^{1/q - 1}` (continuous `|B|`).
pub fn make_atom(grid: &Grid, ball: &Ball, pattern: AtomPattern, q: f64) -> Result<Atom> {
    if !(q > 1.0) {
        return Err(Error::Argument(format!("atom exponent {q} must exceed 1")));
    }
    let cells = grid.cells_in_ball(ball)?;
    if cells.len() < 2 {
        return Err(Error::Argument("atom ball holds fewer than two cells".into()));
    }
    let space = grid.space;
    let mut values = vec![0.0; grid.len()];
    match pattern {
        AtomPattern::TwoBlock => {
            let mut order = cells.cells.clone();
            let key = |i: usize| grid.center(i)[0] - ball.center[0];
            order.sort_by(|&i, &j| key(i).total_cmp(&key(j)).then(i.cmp(&j)));
            let half = order.len() / 2;
            for &i in &order[..half] {
                values[i] = -1.0;
            }
            for &i in &order[order.len() - half..] {
                values[i] = 1.0;
            }
        }
        AtomPattern::Radial => {
            let mut scratch = vec![0.0; grid.dim()];
            let raw: Vec<f64> = cells
                .cells
                .iter()
                .map(|&i| {
                    let d = distance_of(space, &grid.center(i), &ball.center, &mut scratch);
                    (d / ball.radius).powi(2)
                })
                .collect();
            let avg = raw.iter().sum::<f64>() / raw.len() as f64;
            for (&i, v) in cells.cells.iter().zip(raw) {
                values[i] = v - avg;
            }
        }
    }
    let raw = SampledFunction::new(grid.clone(), values)?;
    let norm = raw.lp_norm(q);
    if norm == 0.0 {
        return Err(Error::Numerical("atom profile vanished".into()));
    }
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let target = ball.volume(space).powf(inv_q - 1.0);
    let function = raw.map(|v| v * target / norm)?;
    Ok(Atom {
        ball: ball.clone(),
        pattern,
        q,
        function,
    })
}

/// `chi_B / |B|_grid` (unit discrete `L^1` norm).
pub fn ball_indicator(grid: &Grid, ball: &Ball) -> Result<SampledFunction> {
    let cells = grid.cells_in_ball(ball)?;
    if cells.is_empty() {
        return Err(Error::Argument("ball contains no cell centre".into()));
    }
    let v = 1.0 / cells.measure(grid);
    let mut values = vec![0.0; grid.len()];
    for &i in &cells.cells {
        values[i] = v;
    }
    SampledFunction::new(grid.clone(), values)
}

/// Sum of `count` random signed bumps `(1 - (d/r)^2)^2_+` inside the box, unit `L^1` norm.
pub fn random_bumps(grid: &Grid, count: usize, radius: (f64, f64), seed: u64) -> Result<SampledFunction> {
    let space = grid.space;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bumps = Vec::with_capacity(count);
    let mut guard = 0;
    while bumps.len() < count {
        guard += 1;
        if guard > 10_000 {
            return Err(Error::Argument("no room for the requested bumps".into()));
        }
        let r = rng.random_range(radius.0..=radius.1);
        let c: Vec<f64> = (0..grid.dim())
            .map(|k| rng.random_range(grid.lo[k]..grid.hi[k]))
            .collect();
        let ball = Ball::new(c, r);
        if grid.contains_ball(&ball) {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let amp = sign * rng.random_range(0.5..1.5);
            bumps.push((ball, amp));
        }
    }
    let f = SampledFunction::from_fn(grid, |p| {
        let mut scratch = vec![0.0; p.len()];
        bumps
            .iter()
            .map(|(ball, amp)| {
                let s = distance_of(space, p, &ball.center, &mut scratch) / ball.radius;
                if s < 1.0 {
                    amp * (1.0 - s * s).powi(2)
                } else {
                    0.0
                }
            })
            .sum()
    })?;
    let l1 = f.lp_norm(1.0);
    if l1 == 0.0 {
        return Err(Error::Numerical("bumps missed every cell centre".into()));
    }
    f.map(|v| v / l1)
}

/// Least-squares `theta` in `lambda |{|u| > lambda}| ~ theta lambda L(f, lambda)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub family: String,
    pub theta: f64,
    /// `max |y - theta x| / y` over the fitted rows.
    pub max_rel_residual: f64,
    pub rows: Vec<ThetaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub function: usize,
    pub lambda: f64,
    pub measure: f64,
    pub llogl: f64,
}

/// Fits `theta` for one family of sources against `[b, R_j]`.
pub fn theta_fit(
    kernel: &RieszKernel,
    b: &SampledFunction,
    family: &str,
    functions: &[SampledFunction],
    thresholds: &[f64],
    pv_cut: f64,
) -> Result<ThetaFit> {
    let mut rows = Vec::new();
    for (k, f) in functions.iter().enumerate() {
        let u = commutator_apply(kernel, b, f, pv_cut)?;
        let rep = weak_l1_report(&u, Some(f), thresholds);
        for ((l, m), ll) in rep.thresholds.iter().zip(&rep.measures).zip(&rep.llogl) {
            if *m > 0.0 {
                rows.push(ThetaRow {
                    function: k,
                    lambda: *l,
                    measure: *m,
                    llogl: *ll,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Argument(format!(
            "family {family}: every superlevel set is empty"
        )));
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for r in &rows {
        let (x, y) = (r.lambda * r.llogl, r.lambda * r.measure);
        sxy += x * y;
        sxx += x * x;
    }
    let theta = sxy / sxx;
    let max_rel_residual = rows
        .iter()
        .map(|r| ((r.measure - theta * r.llogl) / r.measure).abs())
        .fold(0.0, f64::max);
    Ok(ThetaFit {
        family: family.into(),
        theta,
        max_rel_residual,
        rows,
    })
}

/// Gauge-polar quadrature nodes around the identity on `H^1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarRule {
    pub offsets: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Shell `rho_lo < |w| < rho_hi`: Gauss-Legendre in `log rho` (`panels_per_octave`
/// panels of 10 nodes), in `phi` (`phi_panels` panels), trapezoid in `theta`.
pub fn polar_shell_rule(
    space: Space,
    rho_lo: f64,
    rho_hi: f64,
    panels_per_octave: usize,
    phi_panels: usize,
    n_theta: usize,
) -> Result<PolarRule> {
    if !(space.is_heisenberg() && space.n == 1) {
        return Err(Error::ModeMismatch(
            "polar shell rules are implemented on H^1 only".into(),
        ));
    }
    if !(rho_lo > 0.0 && rho_hi > rho_lo) {
        return Err(Error::Argument(format!("bad shell [{rho_lo}, {rho_hi}]")));
    }
    let q = space.q() as i32;
    let octaves = (rho_hi / rho_lo).log2();
    let panels = (octaves * panels_per_octave.max(1) as f64).ceil().max(1.0) as usize;
    let rhos = gauss_legendre_nodes(rho_lo.ln(), rho_hi.ln(), panels);
    let phis = gauss_legendre_nodes(
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        phi_panels.max(1),
    );
    let dtheta = std::f64::consts::TAU / n_theta as f64;
    let mut rule = PolarRule {
        offsets: Vec::with_capacity(rhos.len() * phis.len() * n_theta),
        weights: Vec::with_capacity(rhos.len() * phis.len() * n_theta),
    };
    for &(s, ws) in &rhos {
        let rho = s.exp();
        for &(phi, wp) in &phis {
            for it in 0..n_theta {
                let theta = (it as f64 + 0.5) * dtheta;
                rule.offsets
                    .push(polar_point(space, rho, phi, &[theta.cos(), theta.sin()]));
                // rho^{Q-1} drho = rho^Q d(log rho)
                rule.weights.push(ws * rho.powi(q) * wp * dtheta);
            }
        }
    }
    Ok(rule)
}

fn translate(space: Space, base: &[f64], offsets: &[Vec<f64>]) -> Vec<Vec<f64>> {
    offsets
        .iter()
        .map(|w| {
            let mut p = vec![0.0; space.dim()];
            compose_into(space, base, w, &mut p);
            p
        })
        .collect()
}

/// Least-squares line `y = slope x + intercept` with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

/// `int_B (b - m_b(B)) a`, which equals `int_B b a` for a mean-zero atom and vanishes
/// exactly for constant `b`.
pub fn atom_pairing(b: &SampledFunction, atom: &Atom) -> Result<f64> {
    b.check_same_grid(&atom.function)?;
    let cells = b.grid.cells_in_ball(&atom.ball)?;
    let m = median(b, &cells)?;
    Ok(atom
        .function
        .values
        .iter()
        .zip(&b.values)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, bv)| (bv - m) * a)
        .sum::<f64>()
        * b.cell_measure())
}

/// `int_{r_o r < d(g, x_B) < R} |K_j(g, g~)| dg` by polar quadrature around `x_B`.
pub fn outer_kernel_mass(kernel: &RieszKernel, center: &[f64], g_tilde: &[f64], inner: f64, outer: f64) -> Result<f64> {
    let space = kernel.space;
    let rule = polar_shell_rule(space, inner, outer, 2, 4, 64)?;
    let pts = translate(space, center, &rule.offsets);
    let terms: Vec<f64> = pts
        .par_iter()
        .zip(rule.weights.par_iter())
        .map_init(
            || vec![0.0; space.dim()],
            |scratch, (p, w)| kernel.eval_pair(p, g_tilde, scratch).abs() * w,
        )
        .collect();
    Ok(terms.iter().sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1bRow {
    pub far_radius: f64,
    pub outer_mass: f64,
    pub value: f64,
}

/// The (h1b) product at a list of truncation radii with its `log R` fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1bReport {
    pub pairing: f64,
    pub inner_radius: f64,
    pub rows: Vec<H1bRow>,
    /// Fit of `value` against `ln R`.
    pub fit: LineFit,
}

fn check_in_ball(space: Space, ball: &Ball, g: &[f64]) -> Result<()> {
    if !ball.contains(space, g) {
        return Err(Error::Argument("g~ must lie in the ball".into()));
    }
    Ok(())
}

/// `(int_{r_o r < d(g, x_B) < R} |K_j(g, g~)| dg) |int_B b a|`.
pub fn h1b_condition(
    kernel: &RieszKernel,
    b: &SampledFunction,
    atom: &Atom,
    g_tilde: &[f64],
    r_o: f64,
    far_radius: f64,
) -> Result<f64> {
    Ok(h1b_growth(kernel, b, atom, g_tilde, r_o, &[far_radius])?.rows[0].value)
}

pub fn h1b_growth(
    kernel: &RieszKernel,
    b: &SampledFunction,
    atom: &Atom,
    g_tilde: &[f64],
    r_o: f64,
    radii: &[f64],
) -> Result<H1bReport> {
    let space = kernel.space;
    check_in_ball(space, &atom.ball, g_tilde)?;
    let pairing = atom_pairing(b, atom)?.abs();
    let inner = r_o * atom.ball.radius;
    let rows = radii
        .iter()
        .map(|&far| {
            let outer_mass = if far > inner {
                outer_kernel_mass(kernel, &atom.ball.center, g_tilde, inner, far)?
            } else {
                0.0
            };
            Ok(H1bRow {
                far_radius: far,
                outer_mass,
                value: outer_mass * pairing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = line_fit(
        &rows.iter().map(|r| r.far_radius.ln()).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.value).collect::<Vec<_>>(),
    );
    Ok(H1bReport {
        pairing,
        inner_radius: inner,
        rows,
        fit,
    })
}

/// `f_N = chi_{G n B(x_B, N)}` for the sector `G = tau_{x_B} delta_r G_e`, as polar cells
/// uniform in `log rho`.
pub fn sector_indicator_sources(
    spec: &SectorSpec,
    ball: &Ball,
    n_radius: f64,
    resolution: usize,
    per_octave: usize,
    seed: u64,
) -> Result<Sources> {
    let cells = sector_cells_spaced(
        spec,
        &ball.center,
        ball.radius,
        n_radius / ball.radius,
        resolution,
        RadialSpacing::Log { per_octave },
        seed,
    )?;
    Ok(Sources {
        points: cells.points,
        weights: cells.measures,
    })
}

/// `|int_{d(g', x_B) >= r_o r, d < R} K_j(g~, g') f(g') dg'|`.
pub fn lb_far_integral(
    kernel: &RieszKernel,
    ball: &Ball,
    sources: &Sources,
    g_tilde: &[f64],
    r_o: f64,
    far_radius: f64,
) -> f64 {
    let space = kernel.space;
    let inner = r_o * ball.radius;
    let mut scratch = vec![0.0; space.dim()];
    let mut sum = 0.0;
    for (s, w) in sources.points.iter().zip(&sources.weights) {
        let d = distance_of(space, s, &ball.center, &mut scratch);
        if d >= inner && d < far_radius {
            sum += kernel.eval_pair(g_tilde, s, &mut scratch) * w;
        }
    }
    sum.abs()
}

/// `((1/|B|) int_B |b - b_B|) |int_{(r_o B)^c} K_j(g~, g') f(g') dg'|`, truncated at `far_radius`.
pub fn lb_condition(
    kernel: &RieszKernel,
    b: &SampledFunction,
    ball: &Ball,
    sources: &Sources,
    g_tilde: &[f64],
    r_o: f64,
    far_radius: f64,
) -> Result<f64> {
    check_in_ball(kernel.space, ball, g_tilde)?;
    let osc = mean_oscillation_on(b, &b.grid.cells_in_ball(ball)?)?;
    if osc == 0.0 {
        return Ok(0.0);
    }
    Ok(osc * lb_far_integral(kernel, ball, sources, g_tilde, r_o, far_radius))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbRow {
    pub n_radius: f64,
    pub far_integral: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbReport {
    pub oscillation: f64,
    pub rows: Vec<LbRow>,
    /// Fit of `value` against `ln N`.
    pub fit: LineFit,
}

/// (lb) with the sector family `f_N` for each `N`.
#[allow(clippy::too_many_arguments)]
pub fn lb_growth(
    kernel: &RieszKernel,
    spec: &SectorSpec,
    b: &SampledFunction,
    ball: &Ball,
    g_tilde: &[f64],
    n_radii: &[f64],
    resolution: usize,
    seed: u64,
) -> Result<LbReport> {
    check_in_ball(kernel.space, ball, g_tilde)?;
    let osc = mean_oscillation_on(b, &b.grid.cells_in_ball(ball)?)?;
    let top = n_radii.iter().cloned().fold(0.0, f64::max);
    let sources = sector_indicator_sources(spec, ball, top, resolution, 4, seed)?;
    let rows: Vec<LbRow> = n_radii
        .iter()
        .map(|&n| {
            let far = lb_far_integral(kernel, ball, &sources, g_tilde, spec.r_o, n);
            LbRow {
                n_radius: n,
                far_integral: far,
                value: osc * far,
            }
        })
        .collect();
    let fit = line_fit(
        &rows.iter().map(|r| r.n_radius.ln()).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.value).collect::<Vec<_>>(),
    );
    Ok(LbReport {
        oscillation: osc,
        rows,
        fit,
    })
}

/// Normalized indicator `f_eps^{g'} = chi_{B(g', eps)} / |B(g', eps)|` as `m^dim` midpoint
/// sources (`v` grid symmetric under `v -> -v`, weights summing to 1).
pub fn shrinking_ball_sources(space: Space, center: &[f64], eps: f64, per_axis: usize) -> Result<Sources> {
    if !(eps > 0.0) || per_axis < 2 {
        return Err(Error::Argument("need eps > 0 and at least two nodes per axis".into()));
    }
    let dim = space.dim();
    let total = per_axis.pow(dim as u32);
    let mut offsets = Vec::new();
    for k in 0..total {
        let mut rem = k;
        let mut v = vec![0.0; dim];
        for c in v.iter_mut() {
            let i = rem % per_axis;
            rem /= per_axis;
            *c = -1.0 + (2.0 * i as f64 + 1.0) / per_axis as f64;
        }
        if norm_of(space, &v) < 1.0 {
            dilate_in_place(space, &mut v, eps);
            offsets.push(v);
        }
    }
    let w = 1.0 / offsets.len() as f64;
    let points = translate(space, center, &offsets);
    Ok(Sources {
        weights: vec![w; points.len()],
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub point: Vec<f64>,
    pub value: f64,
    /// `K_j(g, g') (b(g) - b(g'))`; its absolute value is the pointwise limit.
    pub limit: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weak11Row {
    pub epsilon: f64,
    pub pointwise: Vec<PointwiseRow>,
    pub max_error: f64,
    pub distribution: DistributionReport,
    /// `sup_lambda lambda |{|[b, R_j] f_eps| > lambda}| / (||b||_inf ||f_eps||_1)`.
    pub normalized_weak_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weak11Report {
    pub g_prime: Vec<f64>,
    pub b_sup: f64,
    pub rows: Vec<Weak11Row>,
    /// Fit of `ln max_error` against `ln eps` (the slope is the observed order).
    pub order: LineFit,
}

/// Evaluates `[b, R_j] f_eps^{g'}` for shrinking `eps`: pointwise at `far_points` against
/// the limit, and superlevel measures on the cells of `grid`.
#[allow(clippy::too_many_arguments)]
pub fn weak11_experiment(
    kernel: &RieszKernel,
    b: &dyn Field,
    g_prime: &[f64],
    eps_list: &[f64],
    grid: &Grid,
    far_points: &[Vec<f64>],
    thresholds: &[f64],
    per_axis: usize,
) -> Result<Weak11Report> {
    check_kernel(kernel, grid)?;
    let space = kernel.space;
    for &e in eps_list {
        if !(e >= grid.resolution()) {
            return Err(Error::Argument(format!(
                "eps {e} is below the grid resolution {}",
                grid.resolution()
            )));
        }
    }
    let cells: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.center(i)).collect();
    let b_cells = field_values(b, &cells)?;
    let b_sup = b_cells.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_gp = b
        .value(g_prime)
        .ok_or_else(|| Error::Argument("b undefined at g'".into()))?;
    let mut scratch = vec![0.0; space.dim()];
    let limits: Vec<f64> = far_points
        .iter()
        .map(|p| {
            let bp = b
                .value(p)
                .ok_or_else(|| Error::Argument("b undefined at a far point".into()))?;
            Ok(kernel.eval_pair(p, g_prime, &mut scratch) * (bp - b_gp))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let sources = shrinking_ball_sources(space, g_prime, eps, per_axis)?;
        let vals = commutator_at(kernel, b, &sources, far_points, 0.0)?;
        let pointwise: Vec<PointwiseRow> = far_points
            .iter()
            .zip(vals.iter().zip(&limits))
            .map(|(p, (v, l))| PointwiseRow {
                point: p.clone(),
                value: *v,
                limit: *l,
                error: (v - l).abs(),
            })
            .collect();
        let max_error = pointwise.iter().map(|r| r.error).fold(0.0, f64::max);
        // the integrand is O(d^{1-Q}) near the diagonal; drop one source spacing
        let cut = 2.0 * eps / per_axis as f64;
        let u = SampledFunction::new(grid.clone(), commutator_at(kernel, b, &sources, &cells, cut)?)?;
        let distribution = weak_l1_report(&u, None, thresholds);
        let norm = b_sup * sources.total();
        let normalized_weak_sup = if norm > 0.0 {
            distribution
                .thresholds
                .iter()
                .zip(&distribution.measures)
                .map(|(l, m)| l * m / norm)
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        rows.push(Weak11Row {
            epsilon: eps,
            pointwise,
            max_error,
            distribution,
            normalized_weak_sup,
        });
    }
    let order = line_fit(
        &rows.iter().map(|r| r.epsilon.ln()).collect::<Vec<_>>(),
        &rows
            .iter()
            .map(|r| r.max_error.max(f64::MIN_POSITIVE).ln())
            .collect::<Vec<_>>(),
    );
    Ok(Weak11Report {
        g_prime: g_prime.to_vec(),
        b_sup,
        rows,
        order,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRow {
    pub level: usize,
    /// `int_{2^l r < d < 2^{l+1} r} |(b - b_B) R_j a|`.
    pub i2: f64,
    /// `int` of `|[b, R_j] a|` over the same annulus.
    pub full: f64,
    /// `i2 / (l 2^{-l})`.
    pub normalized: f64,
}

/// Far-field annulus integrals of the atom's commutator around `x_B`.
pub fn annulus_decay(kernel: &RieszKernel, b: &dyn Field, atom: &Atom, levels: usize) -> Result<Vec<AnnulusRow>> {
    let space = kernel.space;
    let grid = &atom.function.grid;
    let src = Sources::from_sampled(&atom.function);
    let cells = grid.cells_in_ball(&atom.ball)?;
    let ball_pts: Vec<Vec<f64>> = cells.cells.iter().map(|&i| grid.center(i)).collect();
    let b_ball = field_values(b, &ball_pts)?;
    let b_avg = b_ball.iter().sum::<f64>() / b_ball.len() as f64;
    let b_src = field_values(b, &src.points)?;
    let r = atom.ball.radius;
    (1..=levels)
        .map(|l| {
            let lo = r * 2f64.powi(l as i32);
            let rule = polar_shell_rule(space, lo, 2.0 * lo, 1, 2, 32)?;
            let pts = translate(space, &atom.ball.center, &rule.offsets);
            let b_pts = field_values(b, &pts)?;
            let terms: Vec<(f64, f64)> = pts
                .par_iter()
                .zip(b_pts.par_iter().zip(rule.weights.par_iter()))
                .map_init(
                    || vec![0.0; space.dim()],
                    |scratch, (p, (bp, w))| {
                        let (mut ra, mut comm) = (0.0, 0.0);
                        for ((s, a), bs) in src.points.iter().zip(&src.weights).zip(&b_src) {
                            let k = kernel.eval_pair(p, s, scratch);
                            ra += k * a;
                            comm += k * (bp - bs) * a;
                        }
                        ((bp - b_avg).abs() * ra.abs() * w, comm.abs() * w)
                    },
                )
                .collect();
            let (i2, full) = terms.iter().fold((0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
            Ok(AnnulusRow {
                level: l,
                i2,
                full,
                normalized: i2 / (l as f64 * 2f64.powi(-(l as i32))),
            })
        })
        .collect()
}

/// Result of comparing `R` on `R^1` with the Fourier-multiplier Hilbert transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HilbertCheck {
    pub cells: usize,
    pub pv_cut: f64,
    pub rel_l2: f64,
}

/// On `R^1` the kernel is `-1/(pi x)`, so `R = -H` with `H` the multiplier `-i sgn(xi)`;
/// the reference applies `i sgn(xi)` to the zero-padded samples by FFT.
pub fn hilbert_cross_check(
    kernel: &RieszKernel,
    cells: usize,
    half_width: f64,
    bump_radius: f64,
) -> Result<HilbertCheck> {
    let space = Space::abelian(1);
    if kernel.space != space {
        return Err(Error::ModeMismatch(
            "Hilbert cross-check needs the kernel on R^1".into(),
        ));
    }
    let grid = Grid::centered(space, &[half_width], &[cells])?;
    let f = SampledFunction::from_fn(&grid, |p| {
        let s = p[0] / bump_radius;
        if s.abs() < 1.0 {
            (1.0 - s * s).powi(4)
        } else {
            0.0
        }
    })?;
    let pv_cut = default_pv_cut(&grid);
    let ours = riesz_apply(kernel, &f, pv_cut)?;
    let m = (8 * cells).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|i| Complex::new(if i < cells { f.values[i] } else { 0.0 }, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let sgn = if k == 0 || 2 * k == m {
            0.0
        } else if 2 * k < m {
            1.0
        } else {
            -1.0
        };
        *c *= Complex::new(0.0, sgn);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..cells {
        let reference = buf[i].re / m as f64;
        num += (ours.values[i] - reference).powi(2);
        den += reference * reference;
    }
    Ok(HilbertCheck {
        cells,
        pv_cut,
        rel_l2: (num / den).sqrt(),
    })
}

/// `||R_j f||_2 / ||f||_2` on the grid (Calderón-Zygmund boundedness proxy).
pub fn l2_gain(kernel: &RieszKernel, f: &SampledFunction, pv_cut: f64) -> Result<f64> {
    let u = riesz_apply(kernel, f, pv_cut)?;
    Ok(u.lp_norm(2.0) / f.lp_norm(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::VectorFieldId;

    fn h1_grid(cells: usize) -> Grid {
        Grid::centered(Space::heisenberg(1), &[1.0, 1.0, 1.0], &[cells, cells, cells]).unwrap()
    }

    fn kernel() -> RieszKernel {
        RieszKernel::new(Space::heisenberg(1), VectorFieldId::X(1)).unwrap()
    }

    #[test]
    fn zero_input_and_linearity() {
        let k = kernel();
        let g = h1_grid(8);
        let cut = default_pv_cut(&g);
        let z = riesz_apply(&k, &SampledFunction::zeros(&g), cut).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
        let f = SampledFunction::from_fn(&g, |p| (p[0] + 0.3 * p[2]).sin()).unwrap();
        let h = SampledFunction::from_fn(&g, |p| p[1] * p[1] - 0.2).unwrap();
        let combo = f.zip_with(&h, |a, b| 2.0 * a - 0.5 * b).unwrap();
        let lhs = riesz_apply(&k, &combo, cut).unwrap();
        let (rf, rh) = (riesz_apply(&k, &f, cut).unwrap(), riesz_apply(&k, &h, cut).unwrap());
        let scale = lhs.lp_norm(f64::INFINITY);
        for i in 0..g.len() {
            let want = 2.0 * rf.values[i] - 0.5 * rh.values[i];
            assert!((lhs.values[i] - want).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn pv_cut_below_resolution_is_rejected() {
        let g = h1_grid(8);
        let f = SampledFunction::zeros(&g);
        assert!(matches!(
            riesz_apply(&kernel(), &f, 0.5 * g.resolution()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn indicator_llogl_closed_form() {
        let g = h1_grid(16);
        let f = ball_indicator(&g, &Ball::new(vec![0.0, 0.0, 0.0], 0.5)).unwrap();
        let vol = 1.0 / f.values.iter().cloned().fold(0.0, f64::max);
        let want = 1.0 + (1.0 / vol).ln().max(0.0);
        assert!((llogl_functional(&f, 1.0) - want).abs() < 1e-12);
    }

    #[test]
    fn atoms_are_mean_zero_and_normalized() {
        let g = h1_grid(16);
        let ball = Ball::new(vec![0.1, 0.0, 0.0], 0.6);
        for pattern in [AtomPattern::TwoBlock, AtomPattern::Radial] {
            for q in [2.0, f64::INFINITY] {
                let a = make_atom(&g, &ball, pattern, q).unwrap();
                assert!(a.mean().abs() < 1e-12);
                assert!(a.lq_norm() <= a.size_bound() * (1.0 + 1e-12));
            }
        }
        let a = make_atom(&g, &ball, AtomPattern::TwoBlock, f64::INFINITY).unwrap();
        assert!((a.lq_norm() / a.size_bound() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_on_odd_step() {
        let g = h1_grid(16);
        let b = SampledFunction::from_fn(&g, |p| p[0].signum()).unwrap();
        let ball = Ball::new(vec![0.0, 0.0, 0.0], 0.7);
        let phi = phi_test_function(&b, &ball).unwrap();
        let cells = g.cells_in_ball(&ball).unwrap();
        for &i in &cells.cells {
            assert_eq!(phi.function.values[i], b.values[i]);
        }
        assert_eq!(phi.function.values.iter().sum::<f64>(), 0.0);
        assert!((phi.oscillation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_fit_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = line_fit(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}

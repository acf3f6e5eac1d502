//! Riesz kernels `K_j` of `X_j (-Delta)^(-1/2)`.
//!
//! Two independent evaluation paths:
//!
//! * subordination, `K_j(g) = pi^(-1/2) Int_0^inf h^(-1/2) (X_j p_h)(g) dh`, integrated in
//!   `u = ln h` around `ln d_K(g)^2`;
//! * the closed reduction `K_j(g) = c* d_K(g)^(-Q-1) F_j(g)` with
//!   `F_j = x_j A_n(i phi) - i y_j B_n(i phi)` (and `H_j = y_j A_n(i phi) + i x_j B_n(i phi)`
//!   for `Y_j`), where
//!
//! ```text
//! A_n(w) = Int_R (sinh(l+w)/(l+w))^(1/2) cosh(l+w) (cosh l)^(-n-3/2) dl
//! B_n(w) = Int_R (l+w) (sinh(l+w)/(l+w))^(3/2) (cosh l)^(-n-3/2) dl
//! ```
//!
//! and `e^(i phi) = d_K^-2 (|z|^2 + i t)`. The constant `c*` is fitted against the
//! subordination path by [`calibrate_constant`].

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{horizontal_norm_sq, left_difference_into, norm_of, GroupPoint, Mode, Space, VectorFieldId};
use crate::heat::{heat_vector_field, DerivativeMethod};
use crate::quadrature::{integrate, integrate_breakpoints, QuadratureConfig};
use crate::report::content_id;
use crate::scalar::{gamma, Real};

/// `phi = arg(|z|^2 + i t)` in `[-pi/2, pi/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseAngle<T> {
    pub phi: T,
}

pub fn phase_of<T: Real>(g: &GroupPoint<T>) -> Result<PhaseAngle<T>> {
    if g.space.mode != Mode::Heisenberg {
        return Err(Error::ModeMismatch("phase is defined on H^n only".into()));
    }
    if g.is_identity() {
        return Err(Error::UndefinedPhase);
    }
    Ok(PhaseAngle {
        phi: g.t().atan2(g.z_norm_sq()),
    })
}

/// Value of `A_n(w)` or `B_n(w)` with square-root branch diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourValue<T> {
    pub value: Complex<T>,
    pub error: T,
    /// True iff the principal argument of `sinh(u)/u` moved by less than `pi/2`
    /// between every pair of adjacent nodes.
    pub branch_continuous: bool,
    pub max_jump: T,
    pub jump_at: T,
}

impl<T: Real> ContourValue<T> {
    /// The value, or a branch error if continuity was lost.
    pub fn checked(self) -> Result<Complex<T>> {
        if self.branch_continuous {
            Ok(self.value)
        } else {
            Err(Error::Branch {
                jump: self.max_jump.to_f64_lossy(),
                at: self.jump_at.to_f64_lossy(),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Contour {
    A,
    B,
}

/// `Int_{|l| > L}` bound for both contour integrands on `|Im w| <= pi/2`:
/// the integrand is at most `2^(n+1) e^(-n |l|) / sqrt(|l|)`.
pub fn contour_tail_bound(n: usize, truncation: f64) -> f64 {
    let nf = n as f64;
    2.0 * 2f64.powi(n as i32 + 1) * (-nf * truncation).exp() / (nf * truncation.sqrt())
}

fn contour_truncation(n: usize, target: f64) -> f64 {
    let mut l = 4.0;
    while contour_tail_bound(n, l) > target && l < 2000.0 {
        l += 0.25;
    }
    l
}

/// `sinh(u) / u` with its Taylor series inside the guard radius.
#[inline]
fn sinhc<T: Real>(u: Complex<T>, guard: T) -> Complex<T> {
    if u.norm() < guard {
        let u2 = u * u;
        Complex::new(T::one(), T::zero()) + u2 / T::lit(6.0) + u2 * u2 / T::lit(120.0)
    } else {
        u.sinh() / u
    }
}

/// `ln cosh l` without overflow.
#[inline]
fn ln_cosh<T: Real>(l: T) -> T {
    let a = l.abs();
    a + (-(a + a)).exp().ln_1p() - T::LN_2()
}

/// `A_n(w)` or `B_n(w)` for `|Im w| <= pi/2`.
pub fn contour_integral<T: Real>(
    which: Contour,
    n: usize,
    w: Complex<T>,
    cfg: &QuadratureConfig,
) -> Result<ContourValue<T>> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Argument("n must be >= 1".into()));
    }
    if w.im.abs() > T::FRAC_PI_2() * (T::one() + T::epsilon() * T::lit(4.0)) {
        return Err(Error::Argument("contour parameter must satisfy |Im w| <= pi/2".into()));
    }
    let guard = T::lit(cfg.guard_radius);
    let power = T::lit(n as f64 + 1.5);
    let mut nodes: Vec<(T, T)> = Vec::with_capacity(2048);
    let mut f = |l: T| -> Complex<T> {
        let u = Complex::new(l, T::zero()) + w;
        let s = sinhc(u, guard);
        nodes.push((l, s.arg()));
        let root = s.sqrt();
        let damp = (-power * ln_cosh(l)).exp();
        let core = match which {
            Contour::A => root * u.cosh(),
            Contour::B => root * u.sinh(),
        };
        core * damp
    };
    let trunc = if cfg.truncation > 0.0 {
        cfg.truncation
    } else {
        contour_truncation(n, cfg.abs_tol * 0.1)
    };
    let tail = contour_tail_bound(n, trunc);
    if tail > cfg.abs_tol.max(cfg.rel_tol) {
        return Err(Error::Truncation {
            tail,
            tol: cfg.abs_tol.max(cfg.rel_tol),
        });
    }
    let l = T::lit(trunc);
    // split at the point where u comes closest to the origin
    let mid = (-w.re).max(-l * T::lit(0.5)).min(l * T::lit(0.5));
    let r = integrate_breakpoints(&mut f, &[-l, mid, l], cfg);
    if !r.converged {
        return Err(Error::Convergence {
            err: r.error.to_f64_lossy(),
            tol: cfg.rel_tol,
        });
    }
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut max_jump = T::zero();
    let mut jump_at = T::zero();
    for pair in nodes.windows(2) {
        let d = (pair[1].1 - pair[0].1).abs();
        if d > max_jump {
            max_jump = d;
            jump_at = pair[1].0;
        }
    }
    Ok(ContourValue {
        value: r.value,
        error: r.error + T::lit(tail),
        branch_continuous: max_jump < T::FRAC_PI_2(),
        max_jump,
        jump_at,
    })
}

pub fn contour_a<T: Real>(n: usize, w: Complex<T>, cfg: &QuadratureConfig) -> Result<ContourValue<T>> {
    contour_integral(Contour::A, n, w, cfg)
}

pub fn contour_b<T: Real>(n: usize, w: Complex<T>, cfg: &QuadratureConfig) -> Result<ContourValue<T>> {
    contour_integral(Contour::B, n, w, cfg)
}

/// `F_j` (for `X_j`) or `H_j` (for `Y_j`) from the coordinates and `A_n(i phi)`, `B_n(i phi)`.
#[inline]
fn numerator<T: Real>(j: VectorFieldId, space: Space, c: &[T], a: Complex<T>, b: Complex<T>) -> Complex<T> {
    let own = c[j.coord(space)];
    let other = c[j.partner(space)];
    let i = Complex::new(T::zero(), T::one());
    match j {
        VectorFieldId::X(_) => a * own - i * b * other,
        VectorFieldId::Y(_) => a * own + i * b * other,
    }
}

/// Kernel value from the closed reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszKernelValue<T> {
    pub j: VectorFieldId,
    /// `d_K^(-Q-1) F_j` (or `H_j`), before the global constant.
    pub raw: Complex<T>,
    /// `Re(c* raw)` when a calibration was supplied.
    pub calibrated: Option<T>,
}

pub fn riesz_formula_eval<T: Real>(
    j: VectorFieldId,
    g: &GroupPoint<T>,
    cfg: &QuadratureConfig,
    calibration: Option<&Calibration>,
) -> Result<RieszKernelValue<T>> {
    let space = g.space;
    j.validate(space)?;
    let phi = phase_of(g)?.phi;
    let w = Complex::new(T::zero(), phi);
    let a = contour_a(space.n, w, cfg)?.checked()?;
    let b = contour_b(space.n, w, cfg)?.checked()?;
    let d = g.koranyi_norm();
    let raw = numerator(j, space, &g.coords, a, b) * d.powi(-(space.q() as i32) - 1);
    let calibrated = calibration.map(|cal| (cal.constant::<T>() * raw).re);
    Ok(RieszKernelValue { j, raw, calibrated })
}

/// `K_j(g)` by heat-kernel subordination (both modes).
pub fn riesz_subordination_eval<T: Real>(j: VectorFieldId, g: &GroupPoint<T>, cfg: &QuadratureConfig) -> Result<T> {
    let space = g.space;
    j.validate(space)?;
    if g.is_identity() {
        return Err(Error::Argument("kernel is singular at the identity".into()));
    }
    let d = g.koranyi_norm();
    let centre = (d * d).ln();
    let q = space.q() as f64;
    // Gaussian decay below, h^(-Q/2) decay above
    let lo = centre - T::lit(7.0);
    let hi = centre + T::lit(2.0 / q * (1.0 / cfg.rel_tol.min(1e-6)).ln() + 6.0);
    let failure = std::cell::RefCell::new(None);
    let integrand = |u: T| -> T {
        let h = u.exp();
        match heat_vector_field(j, g, h, cfg, DerivativeMethod::AnalyticIntegrand) {
            Ok(v) => h.sqrt() * v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                T::zero()
            }
        }
    };
    let outer = cfg.with_abs_tol(cfg.abs_tol * d.powi(-(space.q() as i32)).to_f64_lossy());
    let r = integrate(integrand, lo, hi, &outer);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::Convergence {
            err: r.error.to_f64_lossy(),
            tol: cfg.rel_tol,
        });
    }
    Ok(r.value / T::PI().sqrt())
}

/// Closed-form Euclidean Riesz kernel `-Gamma((n+1)/2) pi^(-(n+1)/2) x_j |x|^(-(n+1))`.
pub fn euclidean_riesz_kernel<T: Real>(j: usize, x: &[T]) -> T {
    let n = x.len() as f64;
    let c = gamma((n + 1.0) / 2.0) * std::f64::consts::PI.powf(-(n + 1.0) / 2.0);
    let r2: T = x.iter().map(|&v| v * v).sum();
    -T::lit(c) * x[j - 1] * r2.powf(-T::lit((n + 1.0) / 2.0))
}

/// Fitted global constant relating the closed reduction to the subordination path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub space: Space,
    pub j: VectorFieldId,
    pub constant_re: f64,
    pub constant_im: f64,
    /// `sqrt(sum |c raw - sub|^2 / sum |sub|^2)`.
    pub residual: f64,
    pub samples: usize,
    pub id: String,
}

impl Calibration {
    pub fn constant<T: Real>(&self) -> Complex<T> {
        Complex::new(T::lit(self.constant_re), T::lit(self.constant_im))
    }
}

/// Residual gate of [`calibrate_constant`].
pub const CALIBRATION_GATE: f64 = 1e-4;

/// Least-squares `c*` minimising `sum |c* raw(g) - K_sub(g)|^2` over the sample.
pub fn calibrate_constant(j: VectorFieldId, sample: &[GroupPoint<f64>], cfg: &QuadratureConfig) -> Result<Calibration> {
    if sample.len() < 8 {
        return Err(Error::Calibration("need at least 8 sample points".into()));
    }
    let space = sample[0].space;
    if space.mode != Mode::Heisenberg {
        return Err(Error::ModeMismatch("calibration applies to H^n".into()));
    }
    use rayon::prelude::*;
    let pairs: Vec<(Complex<f64>, f64)> = sample
        .par_iter()
        .map(|g| {
            let raw = riesz_formula_eval(j, g, cfg, None)?.raw;
            let sub = riesz_subordination_eval(j, g, cfg)?;
            Ok((raw, sub))
        })
        .collect::<Result<_>>()?;
    let (mut num, mut den, mut norm) = (Complex::new(0.0, 0.0), 0.0, 0.0);
    for (raw, sub) in &pairs {
        num += raw.conj() * *sub;
        den += raw.norm_sqr();
        norm += sub * sub;
    }
    if den <= 1e-300 || norm <= 1e-300 {
        return Err(Error::Calibration("kernel values vanish on the sample".into()));
    }
    let c = num / den;
    let resid: f64 = pairs.iter().map(|(raw, sub)| (c * raw - sub).norm_sqr()).sum();
    let residual = (resid / norm).sqrt();
    if residual >= CALIBRATION_GATE {
        return Err(Error::Calibration(format!(
            "fit residual {residual:e} above gate {CALIBRATION_GATE:e}"
        )));
    }
    let id = content_id(&[
        format!("{:?}", space).as_bytes(),
        format!("{j}").as_bytes(),
        &c.re.to_le_bytes(),
        &c.im.to_le_bytes(),
    ]);
    Ok(Calibration {
        space,
        j,
        constant_re: c.re,
        constant_im: c.im,
        residual,
        samples: sample.len(),
        id: format!("cal-{}", &id[..12]),
    })
}

/// Deterministic calibration sample: `count` points of the unit gauge sphere.
pub fn calibration_sample(space: Space, count: usize) -> Vec<GroupPoint<f64>> {
    (0..count)
        .map(|k| {
            let s = (k as f64 + 0.5) / count as f64;
            // stay away from the poles where both numerators are tiny
            let phi = (s - 0.5) * 2.6;
            let theta = 2.399_963_229_728_653 * k as f64 + 0.3;
            let mut zeta = vec![0.0; 2 * space.n];
            let m = k % space.n;
            zeta[m] = theta.cos();
            zeta[space.n + m] = theta.sin();
            GroupPoint::new(space, crate::group::polar_point(space, 1.0, phi, &zeta)).unwrap()
        })
        .collect()
}

/// Calibration at the default configuration, computed once per `(space, j)`.
pub fn default_calibration(space: Space, j: VectorFieldId) -> Result<Calibration> {
    static CACHE: OnceLock<Mutex<HashMap<(Space, VectorFieldId), Calibration>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("calibration cache").get(&(space, j)) {
        return Ok(c.clone());
    }
    let cal = calibrate_constant(j, &calibration_sample(space, 12), &QuadratureConfig::default())?;
    cache.lock().expect("calibration cache").insert((space, j), cal.clone());
    Ok(cal)
}

/// Tabulated `A_n(i phi)` and `B_n(i phi) / i` on a uniform grid of `[-pi/2, pi/2]`,
/// interpolated by 4-point Lagrange stencils.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub n: usize,
    step: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl KernelTable {
    /// `intervals` must be even; values for `phi < 0` come from the parity of `A`, `B`.
    pub fn build(n: usize, intervals: usize, cfg: &QuadratureConfig) -> Result<Self> {
        use rayon::prelude::*;
        if intervals < 8 || intervals % 2 != 0 {
            return Err(Error::Argument("table needs an even number (>= 8) of intervals".into()));
        }
        let half = intervals / 2;
        let step = std::f64::consts::PI / intervals as f64;
        let upper: Vec<(f64, f64)> = (0..=half)
            .into_par_iter()
            .map(|k| {
                let w = Complex::new(0.0, k as f64 * step);
                let a = contour_a(n, w, cfg)?.checked()?;
                let b = contour_b(n, w, cfg)?.checked()?;
                Ok((a.re, b.im))
            })
            .collect::<Result<_>>()?;
        let mut a = vec![0.0; intervals + 1];
        let mut b = vec![0.0; intervals + 1];
        for (k, &(av, bv)) in upper.iter().enumerate() {
            a[half + k] = av;
            a[half - k] = av;
            b[half + k] = bv;
            b[half - k] = -bv;
        }
        Ok(KernelTable { n, step, a, b })
    }

    /// Shared table at the default configuration.
    pub fn shared(n: usize) -> Result<Arc<KernelTable>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<KernelTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("table cache").get(&n) {
            return Ok(t.clone());
        }
        let t = Arc::new(KernelTable::build(n, 4096, &QuadratureConfig::default())?);
        cache.lock().expect("table cache").insert(n, t.clone());
        Ok(t)
    }

    /// `(A_n(i phi), B_n(i phi) / i)`.
    pub fn eval(&self, phi: f64) -> (f64, f64) {
        let last = self.a.len() - 1;
        let s = ((phi + std::f64::consts::FRAC_PI_2) / self.step).clamp(0.0, last as f64);
        let k = (s.floor() as usize).clamp(1, last - 2) - 1;
        let x = s - k as f64;
        // Lagrange weights on nodes k..k+3 at offset x
        let w = [
            -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0,
            x * (x - 2.0) * (x - 3.0) / 2.0,
            -x * (x - 1.0) * (x - 3.0) / 2.0,
            x * (x - 1.0) * (x - 2.0) / 6.0,
        ];
        let mut a = 0.0;
        let mut b = 0.0;
        for m in 0..4 {
            a += w[m] * self.a[k + m];
            b += w[m] * self.b[k + m];
        }
        (a, b)
    }
}

/// A calibrated kernel `K_j` ready for repeated evaluation.
///
/// On `H^n` it uses the closed reduction through a [`KernelTable`]; on `R^n` the
/// closed Euclidean form.
#[derive(Clone, Debug)]
pub struct RieszKernel {
    pub space: Space,
    pub j: VectorFieldId,
    pub constant: f64,
    pub calibration_id: String,
    table: Option<Arc<KernelTable>>,
}

impl RieszKernel {
    /// Default calibrated kernel.
    pub fn new(space: Space, j: VectorFieldId) -> Result<Self> {
        j.validate(space)?;
        match space.mode {
            Mode::Abelian => Ok(RieszKernel {
                space,
                j,
                constant: 1.0,
                calibration_id: "closed-form".into(),
                table: None,
            }),
            Mode::Heisenberg => {
                let cal = default_calibration(space, j)?;
                Self::with_calibration(&cal, KernelTable::shared(space.n)?)
            }
        }
    }

    pub fn with_calibration(cal: &Calibration, table: Arc<KernelTable>) -> Result<Self> {
        if table.n != cal.space.n {
            return Err(Error::Argument("table and calibration disagree on n".into()));
        }
        Ok(RieszKernel {
            space: cal.space,
            j: cal.j,
            constant: cal.constant_re,
            calibration_id: cal.id.clone(),
            table: Some(table),
        })
    }

    /// `K_j(c)` for flat coordinates `c`; `0` at the identity.
    #[inline]
    pub fn eval(&self, c: &[f64]) -> f64 {
        let space = self.space;
        match &self.table {
            None => {
                if c.iter().all(|v| *v == 0.0) {
                    0.0
                } else {
                    euclidean_riesz_kernel(self.j.coord(space) + 1, c)
                }
            }
            Some(table) => {
                let zsq = horizontal_norm_sq(space, c);
                let t = c[2 * space.n];
                if zsq == 0.0 && t == 0.0 {
                    return 0.0;
                }
                let d = norm_of(space, c);
                let (a, b) = table.eval(t.atan2(zsq));
                let own = c[self.j.coord(space)];
                let other = c[self.j.partner(space)];
                // B = i b, so -i y B = y b and +i x B = -x b
                let f = match self.j {
                    VectorFieldId::X(_) => own * a + other * b,
                    VectorFieldId::Y(_) => own * a - other * b,
                };
                self.constant * f * d.powi(-(space.q() as i32) - 1)
            }
        }
    }

    /// Two-point kernel `K_j(g1, g2) = K_j(g2^{-1} o g1)`.
    #[inline]
    pub fn eval_pair(&self, g1: &[f64], g2: &[f64], scratch: &mut [f64]) -> f64 {
        left_difference_into(self.space, g1, g2, scratch);
        self.eval(scratch)
    }

    pub fn eval_point(&self, g: &GroupPoint<f64>) -> f64 {
        self.eval(&g.coords)
    }
}

/// Zeros of `phi -> A_n(i phi)` on `[-pi/2, pi/2]`.
///
/// Brackets sign changes on `grid + 1` equispaced nodes and bisects each bracket
/// to width `1e-10`. A root is kept if `|A_n| < 1e-8 max|A_n|` there.
pub fn zero_scan(n: usize, grid: usize, cfg: &QuadratureConfig) -> Result<Vec<PhaseAngle<f64>>> {
    use rayon::prelude::*;
    if grid < 64 {
        return Err(Error::Argument("zero scan needs grid >= 64".into()));
    }
    let a_at = |phi: f64| -> Result<f64> {
        let v = contour_a(n, Complex::new(0.0, phi), cfg)?.checked()?;
        Ok(v.re)
    };
    let h = std::f64::consts::PI / grid as f64;
    let nodes: Vec<f64> = (0..=grid)
        .map(|k| -std::f64::consts::FRAC_PI_2 + k as f64 * h)
        .collect();
    let values: Vec<f64> = nodes.par_iter().map(|&p| a_at(p)).collect::<Result<_>>()?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut roots = Vec::new();
    for k in 0..grid {
        let (mut lo, mut hi) = (nodes[k], nodes[k + 1]);
        let (mut flo, fhi) = (values[k], values[k + 1]);
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() || fhi == 0.0 {
            continue;
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            let fm = a_at(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        if a_at(root)?.abs() < 1e-8 * scale {
            roots.push(root);
        }
    }
    if values[grid] == 0.0 {
        roots.push(nodes[grid]);
    }
    Ok(roots.into_iter().map(|phi| PhaseAngle { phi }).collect())
}

/// Grid description of `K_j` on the unit gauge sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonvanishingReport {
    pub j: String,
    pub grid: usize,
    pub threshold: f64,
    /// Largest `|K_j|` over the sampled sphere (the envelope constant `C_emp`).
    pub max_abs: f64,
    /// Measure fraction of cells flagged as near-zero.
    pub near_zero_fraction: f64,
    pub near_zero_cells: usize,
    /// Largest distance (in cell widths) from a flagged cell to the zero locus.
    pub max_distance_to_locus: f64,
    /// Zeros of `A_n(i phi)` (the levels where `F_j` vanishes on the `x_j` axis).
    pub phase_zeros: Vec<f64>,
}

/// Unit-sphere point of the slice through the `j`-th complex line:
/// `z_j = sqrt(cos phi) e^{i theta}`, other `z = 0`, `t = sin phi`.
pub fn sphere_slice_point(space: Space, j: VectorFieldId, theta: f64, phi: f64) -> Vec<f64> {
    let m = j.coord(space) % space.n;
    let mut zeta = vec![0.0; 2 * space.n];
    zeta[m] = theta.cos();
    zeta[space.n + m] = theta.sin();
    crate::group::polar_point(space, 1.0, phi, &zeta)
}

/// Near-zero cells of `K_j` on a `grid x grid` mesh of `(theta, phi)`.
///
/// A cell is flagged when `K_j` changes sign among its corners or `|K_j|` falls
/// below `threshold * max|K_j|` at a corner or the centre. The zero locus on the slice
/// is `{A(phi) cos theta + b(phi) sin theta = 0}` (with `B = i b`, and the sign of `b`
/// flipped for `Y_j`) together with the poles.
pub fn nonvanishing_report(kernel: &RieszKernel, grid: usize, threshold: f64) -> Result<NonvanishingReport> {
    use rayon::prelude::*;
    let space = kernel.space;
    if space.mode != Mode::Heisenberg {
        return Err(Error::ModeMismatch("sphere scan applies to H^n".into()));
    }
    if grid < 32 {
        return Err(Error::Argument("sphere grid must be at least 32 x 32".into()));
    }
    let table = kernel
        .table
        .clone()
        .ok_or_else(|| Error::Argument("kernel has no table".into()))?;
    let pi = std::f64::consts::PI;
    let dth = 2.0 * pi / grid as f64;
    let dph = pi / grid as f64;
    let at = |ti: f64, pj: f64| {
        let p = sphere_slice_point(space, kernel.j, ti * dth, -pi / 2.0 + pj * dph);
        kernel.eval(&p)
    };
    let corners: Vec<Vec<f64>> = (0..=grid)
        .into_par_iter()
        .map(|pj| (0..=grid).map(|ti| at(ti as f64, pj as f64)).collect())
        .collect();
    let max_abs = corners.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = threshold * max_abs;
    let weight = |pj: usize| {
        let phi = -pi / 2.0 + (pj as f64 + 0.5) * dph;
        phi.cos().powi(space.n as i32 - 1)
    };
    let total: f64 = (0..grid).map(|pj| weight(pj) * grid as f64).sum();
    let sign_flip = match kernel.j {
        VectorFieldId::X(_) => 1.0,
        VectorFieldId::Y(_) => -1.0,
    };
    let flagged: Vec<(usize, f64, f64)> = (0..grid)
        .into_par_iter()
        .flat_map_iter(|pj| {
            let corners = &corners;
            let table = &table;
            (0..grid).filter_map(move |ti| {
                let c = [
                    corners[pj][ti],
                    corners[pj][ti + 1],
                    corners[pj + 1][ti],
                    corners[pj + 1][ti + 1],
                ];
                let centre = at(ti as f64 + 0.5, pj as f64 + 0.5);
                let mixed = c.iter().any(|v| *v > 0.0) && c.iter().any(|v| *v < 0.0);
                let small = c.iter().chain(std::iter::once(&centre)).any(|v| v.abs() <= cut);
                if !(mixed || small) {
                    return None;
                }
                // distance to the locus in cell widths: scan the cell's phi range
                let th0 = (ti as f64 + 0.5) * dth;
                let mut best = f64::INFINITY;
                for s in 0..=8 {
                    let phi = -pi / 2.0 + (pj as f64 + s as f64 / 8.0) * dph;
                    let pole = (pi / 2.0 - phi.abs()) / dph;
                    best = best.min(pole);
                    let (a, b) = table.eval(phi);
                    // a cos + sign b sin = 0  <=>  theta = atan2(-a, sign b) mod pi
                    let root = (-a).atan2(sign_flip * b);
                    for k in -2..=2 {
                        let cand = root + k as f64 * pi;
                        best = best.min((cand - th0).abs() / dth);
                    }
                }
                Some((pj, best, weight(pj)))
            })
        })
        .collect();
    let measure: f64 = flagged.iter().map(|f| f.2).sum();
    let max_distance = flagged.iter().fold(0.0f64, |m, f| m.max(f.1));
    let zeros = zero_scan(space.n, 256, &QuadratureConfig::default())?;
    Ok(NonvanishingReport {
        j: kernel.j.to_string(),
        grid,
        threshold,
        max_abs,
        near_zero_fraction: measure / total,
        near_zero_cells: flagged.len(),
        max_distance_to_locus: max_distance,
        phase_zeros: zeros.iter().map(|p| p.phi).collect(),
    })
}

/// CSV with columns `x.., y.., t, phi, re_raw, im_raw, calibrated` (17 significant digits).
pub fn write_kernel_csv<W: Write>(
    out: W,
    j: VectorFieldId,
    points: &[GroupPoint<f64>],
    space: Space,
    cfg: &QuadratureConfig,
    calibration: Option<&Calibration>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::new();
    for k in 1..=space.n {
        header.push(format!("x{k}"));
    }
    if space.is_heisenberg() {
        for k in 1..=space.n {
            header.push(format!("y{k}"));
        }
        header.push("t".into());
    }
    for h in ["phi", "re_raw", "im_raw", "calibrated"] {
        header.push(h.into());
    }
    w.write_record(&header)?;
    for g in points {
        let mut row: Vec<String> = g.coords.iter().map(|v| fmt17(*v)).collect();
        match space.mode {
            Mode::Heisenberg => {
                let v = riesz_formula_eval(j, g, cfg, calibration)?;
                row.push(fmt17(phase_of(g)?.phi));
                row.push(fmt17(v.raw.re));
                row.push(fmt17(v.raw.im));
                row.push(v.calibrated.map(fmt17).unwrap_or_default());
            }
            Mode::Abelian => {
                let v = riesz_subordination_eval(j, g, cfg)?;
                row.push(String::new());
                row.push(fmt17(v));
                row.push(fmt17(0.0));
                row.push(fmt17(v));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip formatting with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h1(x: f64, y: f64, t: f64) -> GroupPoint<f64> {
        GroupPoint::heisenberg(&[x], &[y], t).unwrap()
    }

    #[test]
    fn phase_examples() {
        assert_eq!(phase_of(&h1(1.0, 0.0, 0.0)).unwrap().phi, 0.0);
        assert_relative_eq!(phase_of(&h1(0.0, 0.0, 1.0)).unwrap().phi, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(phase_of(&h1(0.0, 0.0, -1.0)).unwrap().phi, -std::f64::consts::FRAC_PI_2);
        assert!(matches!(phase_of(&h1(0.0, 0.0, 0.0)), Err(Error::UndefinedPhase)));
    }

    #[test]
    fn contour_anchors() {
        let cfg = QuadratureConfig::default();
        let zero = Complex::new(0.0f64, 0.0);
        let b = contour_b(1, zero, &cfg).unwrap();
        assert!(b.value.norm() < 1e-12);
        let a: ContourValue<f64> = contour_a(1, zero, &cfg).unwrap();
        assert!(a.branch_continuous);
        // independent high-precision quadrature value
        assert_relative_eq!(a.value.re, 2.667_903_729_994_334, max_relative = 1e-11);
        assert!(a.value.im.abs() < 1e-14);
    }

    #[test]
    fn contour_parity_on_the_imaginary_axis() {
        let cfg = QuadratureConfig::default();
        for phi in [0.3, 1.1, std::f64::consts::FRAC_PI_2] {
            let a = contour_a(1, Complex::new(0.0, phi), &cfg).unwrap().value;
            let am = contour_a(1, Complex::new(0.0, -phi), &cfg).unwrap().value;
            let b = contour_b(1, Complex::new(0.0, phi), &cfg).unwrap().value;
            assert!(a.im.abs() < 1e-12 && b.re.abs() < 1e-12);
            assert_relative_eq!(a.re, am.re, max_relative = 1e-12);
        }
        let edge = contour_a(1, Complex::new(0.0, std::f64::consts::FRAC_PI_2), &cfg).unwrap();
        assert_relative_eq!(edge.value.re, -0.431_69, max_relative = 1e-4);
        assert!(contour_a(1, Complex::new(0.0, 1.6), &cfg).is_err());
    }

    #[test]
    fn formula_vanishes_on_the_y_axis() {
        let cfg = QuadratureConfig::default();
        let v = riesz_formula_eval(VectorFieldId::X(1), &h1(0.0, 0.7, 0.0), &cfg, None).unwrap();
        assert!(v.raw.norm() < 1e-12);
    }

    #[test]
    fn formula_homogeneity() {
        let cfg = QuadratureConfig::default();
        let g = h1(0.4, -0.6, 0.9);
        let base = riesz_formula_eval(VectorFieldId::X(1), &g, &cfg, None).unwrap().raw;
        for r in [0.5, 2.0, 7.0] {
            let v = riesz_formula_eval(VectorFieldId::X(1), &g.dilate(r).unwrap(), &cfg, None)
                .unwrap()
                .raw;
            assert!((v - base * r.powi(-4)).norm() < 1e-10 * base.norm() * r.powi(-4));
        }
    }

    #[test]
    fn subordination_matches_euclidean_oracle() {
        let cfg = QuadratureConfig::default();
        let g = GroupPoint::abelian(&[1.0]).unwrap();
        let v = riesz_subordination_eval(VectorFieldId::X(1), &g, &cfg).unwrap();
        assert_relative_eq!(v, -1.0 / std::f64::consts::PI, max_relative = 1e-8);
    }

    #[test]
    fn subordination_regression_value() {
        // prototype value of the double integral at (0.7, 0.3, 0.5)
        let cfg = QuadratureConfig::default();
        let v = riesz_subordination_eval(VectorFieldId::X(1), &h1(0.7, 0.3, 0.5), &cfg).unwrap();
        assert_relative_eq!(v, -0.134_032_192_725_335, max_relative = 1e-7);
    }

    #[test]
    fn table_matches_direct_contours() {
        let cfg = QuadratureConfig::default();
        let t = KernelTable::build(1, 512, &cfg).unwrap();
        for phi in [-1.5, -0.7, 0.01, 0.9, 1.55] {
            let (a, b) = t.eval(phi);
            let w = Complex::new(0.0, phi);
            assert_relative_eq!(a, contour_a(1, w, &cfg).unwrap().value.re, epsilon = 1e-8);
            assert_relative_eq!(b, contour_b(1, w, &cfg).unwrap().value.im, epsilon = 1e-8);
        }
    }

    #[test]
    fn euclidean_kernel_closed_form() {
        assert_relative_eq!(euclidean_riesz_kernel(1, &[2.0]), -1.0 / (2.0 * std::f64::consts::PI));
        // n = 2: -1/(2 pi) x / |x|^3
        assert_relative_eq!(
            euclidean_riesz_kernel(2, &[0.0, 1.0]),
            -1.0 / (2.0 * std::f64::consts::PI),
            max_relative = 1e-14
        );
    }
}

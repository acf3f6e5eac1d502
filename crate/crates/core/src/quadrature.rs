//! Adaptive Gauss-Kronrod (10/21-point) quadrature for real and complex integrands.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerances and budgets shared by every one-dimensional integral of the toolkit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Truncation length of infinite `lambda` ranges; `0` selects it from the tail bound.
    pub truncation: f64,
    /// Maximum number of interval bisections (the node budget is `21` times this).
    pub max_subdivisions: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Radius around removable singularities inside which series values are used.
    pub guard_radius: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            truncation: 0.0,
            max_subdivisions: 400,
            abs_tol: 1e-15,
            rel_tol: 1e-11,
            guard_radius: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truncation < 0.0 || !self.truncation.is_finite() {
            return Err(Error::Argument("truncation must be >= 0".into()));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Argument("tolerances must be positive".into()));
        }
        if !(self.guard_radius > 0.0) {
            return Err(Error::Argument("guard radius must be positive".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Argument("node budget must be positive".into()));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_budget(mut self, max_subdivisions: usize) -> Self {
        self.max_subdivisions = max_subdivisions;
        self
    }

    pub fn with_truncation(mut self, truncation: f64) -> Self {
        self.truncation = truncation;
        self
    }
}

/// Values a quadrature rule can accumulate.
pub trait QuadValue<T: Real>: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self> + Zero {
    fn modulus(&self) -> T;
}

impl<T: Real> QuadValue<T> for T {
    #[inline]
    fn modulus(&self) -> T {
        self.abs()
    }
}

impl<T: Real> QuadValue<T> for Complex<T> {
    #[inline]
    fn modulus(&self) -> T {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<V, T> {
    pub value: V,
    pub error: T,
    pub evaluations: usize,
    pub converged: bool,
}

impl<V, T: Real> QuadResult<V, T> {
    /// Fail unless converged.
    pub fn require(self, tol: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Convergence {
                err: self.error.to_f64_lossy(),
                tol,
            })
        }
    }
}

// Kronrod abscissae (descending, last is the centre) and weights; Gauss weights for
// the even-indexed abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Segment<V, T> {
    a: T,
    b: T,
    value: V,
    error: T,
    resabs: T,
}

/// One 21-point Kronrod panel with its embedded 10-point Gauss estimate.
/// Returns `(kronrod, error estimate, integral of |f|)`.
fn gk21<T, V, F>(f: &mut F, a: T, b: T) -> (V, T, T)
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    let half = T::lit(0.5);
    let centre = half * (a + b);
    let h = half * (b - a);
    let fc = f(centre);
    let mut resk = fc * T::lit(WGK[10]);
    let mut resg = V::zero();
    let mut resabs = fc.modulus() * T::lit(WGK[10]);
    let mut fv1 = [V::zero(); 10];
    let mut fv2 = [V::zero(); 10];
    for k in 0..10 {
        let dx = h * T::lit(XGK[k]);
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[k] = f1;
        fv2[k] = f2;
        let wk = T::lit(WGK[k]);
        resk = resk + (f1 + f2) * wk;
        resabs += (f1.modulus() + f2.modulus()) * wk;
        if k % 2 == 1 {
            resg = resg + (f1 + f2) * T::lit(WG[k / 2]);
        }
    }
    let mean = resk * half;
    let mut resasc = (fc - mean).modulus() * T::lit(WGK[10]);
    for k in 0..10 {
        resasc += ((fv1[k] - mean).modulus() + (fv2[k] - mean).modulus()) * T::lit(WGK[k]);
    }
    let habs = h.abs();
    let result = resk * h;
    let resabs = resabs * habs;
    let resasc = resasc * habs;
    let mut err = ((resk - resg) * h).modulus();
    if resasc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / resasc).powf(T::lit(1.5));
        err = if scale < T::one() { resasc * scale } else { resasc };
    }
    let floor = T::lit(50.0) * T::epsilon() * resabs;
    if resabs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    (result, err, resabs)
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed estimate is below
/// `max(abs_tol, rel_tol * |I|)` or the subdivision budget is spent.
pub fn integrate<T, V, F>(mut f: F, a: T, b: T, cfg: &QuadratureConfig) -> QuadResult<V, T>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    integrate_breakpoints(&mut f, &[a, b], cfg)
}

/// Adaptive integration over consecutive panels `[p_0, p_1], [p_1, p_2], ...`.
pub fn integrate_breakpoints<T, V, F>(f: &mut F, points: &[T], cfg: &QuadratureConfig) -> QuadResult<V, T>
where
    T: Real,
    V: QuadValue<T>,
    F: FnMut(T) -> V,
{
    assert!(points.len() >= 2, "need at least one panel");
    let abs_tol = T::lit(cfg.abs_tol);
    let rel_tol = T::lit(cfg.rel_tol);
    let mut segs: Vec<Segment<V, T>> = Vec::with_capacity(64);
    let mut evaluations = 0usize;
    let mut total = V::zero();
    let mut total_err = T::zero();
    for w in points.windows(2) {
        let (v, e, ra) = gk21(f, w[0], w[1]);
        evaluations += 21;
        total = total + v;
        total_err += e;
        segs.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
            resabs: ra,
        });
    }
    let mut splits = 0usize;
    loop {
        // an estimate at the rounding floor of every panel cannot be improved
        let floor = segs.iter().fold(T::zero(), |acc, s| acc + s.resabs) * T::lit(100.0) * T::epsilon();
        let target = abs_tol.max(rel_tol * total.modulus()).max(floor);
        if total_err <= target {
            break;
        }
        if splits >= cfg.max_subdivisions {
            return QuadResult {
                value: total,
                error: total_err,
                evaluations,
                converged: false,
            };
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .fold((0usize, T::neg_infinity()), |best, (i, s)| {
                if s.error > best.1 {
                    (i, s.error)
                } else {
                    best
                }
            });
        let seg = segs.swap_remove(idx);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        if !(mid > seg.a.min(seg.b) && mid < seg.a.max(seg.b)) {
            // interval can no longer be split in this precision
            return QuadResult {
                value: total,
                error: total_err,
                evaluations,
                converged: false,
            };
        }
        let (v1, e1, r1) = gk21(f, seg.a, mid);
        let (v2, e2, r2) = gk21(f, mid, seg.b);
        evaluations += 42;
        splits += 1;
        total = total - seg.value + v1 + v2;
        total_err = total_err - seg.error + e1 + e2;
        segs.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
            resabs: r1,
        });
        segs.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
            resabs: r2,
        });
        // re-sum periodically to avoid drift from the running updates
        if splits % 32 == 0 {
            total = segs.iter().fold(V::zero(), |acc, s| acc + s.value);
            total_err = segs.iter().fold(T::zero(), |acc, s| acc + s.error);
        }
    }
    total = segs.iter().fold(V::zero(), |acc, s| acc + s.value);
    total_err = segs.iter().fold(T::zero(), |acc, s| acc + s.error);
    QuadResult {
        value: total,
        error: total_err,
        evaluations,
        converged: true,
    }
}

/// Fixed composite Gauss-Legendre rule with `panels` equal panels of 10 Gauss nodes.
/// Used where a node set must be reproducible independently of the integrand.
pub fn gauss_legendre_nodes<T: Real>(a: T, b: T, panels: usize) -> Vec<(T, T)> {
    let mut out = Vec::with_capacity(panels * 10);
    let width = (b - a) / T::from_usize_lossy(panels);
    let half = T::lit(0.5) * width;
    for p in 0..panels {
        let centre = a + width * (T::from_usize_lossy(p) + T::lit(0.5));
        for k in 0..5 {
            let x = T::lit(XGK[2 * k + 1]) * half;
            let w = T::lit(WG[k]) * half;
            out.push((centre - x, w));
            out.push((centre + x, w));
        }
    }
    out.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap_or(std::cmp::Ordering::Equal));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exactness() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| x.powi(7) - 3.0 * x * x, -1.0, 2.0, &cfg);
        assert!(r.converged);
        assert_relative_eq!(r.value, 255.0 / 8.0 - 9.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_and_oscillatory() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| (-x * x).exp(), -30.0, 30.0, &cfg);
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt(), epsilon = 1e-13);
        let r = integrate(|x: f64| (40.0 * x).cos(), 0.0, 1.0, &cfg);
        assert_relative_eq!(r.value, (40.0f64).sin() / 40.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_integrand() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| Complex::new(0.0, x).exp(), 0.0, std::f64::consts::PI, &cfg);
        assert!((r.value - Complex::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn odd_integrand_cancels_on_symmetric_range() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| x * (-x.abs()).exp() * (3.0 * x).cos(), -40.0, 40.0, &cfg);
        assert!(r.value.abs() < 1e-15);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadratureConfig::default().with_budget(2);
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, &cfg);
        assert!(!r.converged);
        assert!(r.require(cfg.rel_tol).is_err());
    }

    #[test]
    fn f32_integration() {
        let cfg = QuadratureConfig::default().with_rel_tol(1e-6).with_abs_tol(1e-7);
        let r = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, &cfg);
        assert!((r.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn fixed_rule_weights_sum_to_length() {
        let nodes = gauss_legendre_nodes(-1.0f64, 3.0, 7);
        let s: f64 = nodes.iter().map(|p| p.1).sum();
        assert_relative_eq!(s, 4.0, epsilon = 1e-13);
    }
}

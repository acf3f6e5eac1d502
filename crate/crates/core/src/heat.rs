//! Heat kernel `p_h` of the sub-Laplacian on `H^n` and the Gaussian on `R^n`.
//!
//! On `H^n`
//!
//! ```text
//! p_h(z, t) = 1 / (2 (4 pi h)^(n+1)) * Int_R exp(lambda (i t - |z|^2 coth lambda) / (4h)) (lambda / sinh lambda)^n dlambda
//! ```
//!
//! The integrand is Hermitian in `lambda`, so the integral is real; its imaginary part
//! is kept as a consistency residual.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{apply_vector_field, FieldScheme, GroupPoint, Mode, Space, VectorFieldId};
use crate::quadrature::{integrate_breakpoints, QuadratureConfig};
use crate::scalar::Real;

/// A heat-kernel value with its quadrature diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatValue<T> {
    pub value: T,
    /// Quadrature error estimate plus truncation tail bound, on the scale of `value`.
    pub error: T,
    /// `|Im|` of the computed integral, on the scale of `value`.
    pub imag_residual: T,
    /// Truncation length actually used.
    pub truncation: T,
    pub converged: bool,
}

/// How [`heat_vector_field`] differentiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    /// Differentiate under the integral sign.
    AnalyticIntegrand,
    /// Central differences of [`heat_eval`] along the left-invariant curve.
    FiniteDifference,
}

/// `(lambda coth lambda, ln(lambda / sinh lambda))`, with Taylor values near 0.
#[inline]
pub(crate) fn lambda_factors<T: Real>(lam: T, guard: T) -> (T, T) {
    let a = lam.abs();
    if a < guard {
        let l2 = lam * lam;
        let l4 = l2 * l2;
        (
            T::one() + l2 / T::lit(3.0) - l4 / T::lit(45.0),
            -l2 / T::lit(6.0) + l4 / T::lit(180.0),
        )
    } else {
        let e = (-(a + a)).exp();
        let coth = (T::one() + e) / (T::one() - e);
        let ln_sinh = a + (-e).ln_1p() - T::LN_2();
        (a * coth, a.ln() - ln_sinh)
    }
}

/// Bound on `Int_{|lambda| > L} |integrand|` using `lambda / sinh lambda <= 2.32 lambda e^-lambda`
/// and `lambda coth lambda >= lambda` (valid for `L >= 1`).
pub fn heat_tail_bound(n: usize, damping: f64, truncation: f64) -> f64 {
    let kappa = n as f64 + damping.max(0.0);
    let x = kappa * truncation;
    // Int_L^inf lambda^n e^{-kappa lambda} = n! / kappa^{n+1} e^{-x} sum_{k<=n} x^k / k!
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=n {
        term *= x / k as f64;
        sum += term;
    }
    let mut fact = 1.0;
    for k in 1..=n {
        fact *= k as f64;
    }
    2.0 * 2.32f64.powi(n as i32) * fact / kappa.powi(n as i32 + 1) * (-x).exp() * sum
}

/// Smallest truncation (on a 1/4 grid, at least 4) whose tail bound is below `target`.
pub fn heat_truncation(n: usize, damping: f64, target: f64) -> f64 {
    let mut l = 4.0;
    while heat_tail_bound(n, damping, l) > target && l < 2000.0 {
        l += 0.25;
    }
    l
}

fn check_heisenberg<T: Real>(g: &GroupPoint<T>, h: T) -> Result<()> {
    if g.space.mode != Mode::Heisenberg {
        return Err(Error::ModeMismatch("heat_eval needs a Heisenberg point".into()));
    }
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::Argument("heat time h must be positive".into()));
    }
    if g.coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("heat kernel argument".into()));
    }
    Ok(())
}

/// Integrates `weight(lambda) * exp(lambda (i t - |z|^2 coth lambda)/(4h)) (lambda/sinh lambda)^n`
/// over `[-L, L]` and returns the raw integral together with diagnostics.
fn heat_integral<T, W>(
    space: Space,
    zsq: T,
    t: T,
    h: T,
    cfg: &QuadratureConfig,
    weight: W,
) -> Result<(Complex<T>, T, T, bool)>
where
    T: Real,
    W: Fn(T, T) -> Complex<T>,
{
    cfg.validate()?;
    let n = space.n;
    let four_h = T::lit(4.0) * h;
    let a = zsq / four_h;
    let b = t / four_h;
    let guard = T::lit(cfg.guard_radius);
    let damping = a.to_f64_lossy();
    let mut budget = *cfg;
    if zsq == T::zero() {
        budget.max_subdivisions *= 2;
    }
    let eval = |lam: T| -> Complex<T> {
        let (lcoth, ln_ratio) = lambda_factors(lam, guard);
        let amp = (T::from_usize_lossy(n) * ln_ratio - a * lcoth).exp();
        let (s, c) = (lam * b).sin_cos();
        weight(lam, lcoth) * Complex::new(amp * c, amp * s)
    };
    let mut trunc = if cfg.truncation > 0.0 {
        cfg.truncation
    } else {
        heat_truncation(n, damping, cfg.abs_tol * 0.1)
    };
    loop {
        // half-periods of exp(i lambda b) on [-L, L]; one Kronrod panel resolves a few,
        // beyond that adaptive refinement can alias and report a false convergence
        let half_periods = 2.0 * trunc * b.to_f64_lossy().abs() / std::f64::consts::PI;
        if half_periods > 4.0 * budget.max_subdivisions as f64 {
            return Err(Error::Numerical(format!(
                "{half_periods:.0} oscillation half-periods exceed the node budget"
            )));
        }
        let l = T::lit(trunc);
        let mut f = eval;
        let r = integrate_breakpoints(&mut f, &[-l, T::zero(), l], &budget);
        let tail = heat_tail_bound(n, damping, trunc);
        let target = cfg.abs_tol.max(cfg.rel_tol * r.value.norm().to_f64_lossy());
        if tail <= 0.1 * target {
            return Ok((r.value, r.error + T::lit(tail), l, r.converged));
        }
        if cfg.truncation > 0.0 || trunc > 1000.0 {
            return Err(Error::Truncation { tail, tol: target });
        }
        trunc = heat_truncation(n, damping, 0.1 * target);
    }
}

fn heat_prefactor<T: Real>(n: usize, h: T) -> T {
    let four_pi_h = T::lit(4.0) * T::PI() * h;
    T::one() / (T::lit(2.0) * four_pi_h.powi(n as i32 + 1))
}

/// `p_h(g)` on `H^n`.
pub fn heat_eval<T: Real>(g: &GroupPoint<T>, h: T, cfg: &QuadratureConfig) -> Result<HeatValue<T>> {
    check_heisenberg(g, h)?;
    let (v, err, trunc, converged) = heat_integral(g.space, g.z_norm_sq(), g.t(), h, cfg, |_, _| {
        Complex::new(T::one(), T::zero())
    })?;
    let pre = heat_prefactor(g.space.n, h);
    let value = v.re * pre;
    if !(value > T::zero()) {
        return Err(Error::Numerical(format!(
            "heat kernel evaluated to non-positive {value:e}"
        )));
    }
    Ok(HeatValue {
        value,
        error: err * pre,
        imag_residual: v.im.abs() * pre,
        truncation: trunc,
        converged,
    })
}

/// Monte-Carlo estimate of `int p_h` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Importance sampling of `int p_h` over the box `[-half, half]^(2n+1)`: `z` from the
/// horizontal marginal `N(0, 2h)` per coordinate (rejected outside the box), `t` from a
/// Cauchy law of scale `2h` truncated to the box.
pub fn heat_normalization_mc(
    space: Space,
    h: f64,
    half: f64,
    samples: usize,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<NormalizationEstimate> {
    if space.mode != Mode::Heisenberg {
        return Err(Error::ModeMismatch("heat normalization applies to H^n".into()));
    }
    if !(h > 0.0) || !(half > 0.0) || samples < 2 {
        return Err(Error::Argument("need h > 0, half > 0 and at least two samples".into()));
    }
    let n = space.n;
    let normal = Normal::new(0.0, (2.0 * h).sqrt()).map_err(|e| Error::Argument(e.to_string()))?;
    let scale = 2.0 * h;
    let cauchy = Cauchy::new(0.0, scale).map_err(|e| Error::Argument(e.to_string()))?;
    let pi = std::f64::consts::PI;
    let t_mass = 2.0 * (half / scale).atan() / pi;
    let z_mass = statrs::function::erf::erf(half / (2.0 * h.sqrt())).powi(2 * n as i32);
    const CHUNK: usize = 1024;
    let chunks = samples.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                let draw = |rng: &mut ChaCha8Rng, d: &dyn Fn(&mut ChaCha8Rng) -> f64| loop {
                    let v = d(rng);
                    if v.abs() <= half {
                        break v;
                    }
                };
                let mut coords: Vec<f64> = (0..2 * n).map(|_| draw(&mut rng, &|r| normal.sample(r))).collect();
                let t = draw(&mut rng, &|r| cauchy.sample(r));
                let zsq: f64 = coords.iter().map(|v| v * v).sum();
                coords.push(t);
                let g = GroupPoint { space, coords };
                let p = heat_eval(&g, h, cfg)?.value;
                let q_z = (4.0 * pi * h).powi(-(n as i32)) * (-zsq / (4.0 * h)).exp() / z_mass;
                let q_t = 1.0 / (pi * scale * (1.0 + (t / scale).powi(2))) / t_mass;
                let w = p / (q_z * q_t);
                s1 += w;
                s2 += w * w;
            }
            Ok((s1, s2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = samples as f64;
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0);
    Ok(NormalizationEstimate {
        estimate: mean,
        std_error: (var / (m - 1.0)).sqrt(),
        samples,
    })
}

/// Gaussian heat kernel `(4 pi h)^(-n/2) exp(-|x|^2 / 4h)` on `R^n`.
pub fn heat_eval_abelian<T: Real>(x: &[T], h: T) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::Argument("heat time h must be positive".into()));
    }
    let r2: T = x.iter().map(|&v| v * v).sum();
    let four_pi_h = T::lit(4.0) * T::PI() * h;
    Ok(four_pi_h.powf(-T::lit(x.len() as f64 / 2.0)) * (-r2 / (T::lit(4.0) * h)).exp())
}

/// `(X_j p_h)(g)`, on `H^n` or (Gaussian) on `R^n`.
///
/// Under the integral sign `X_j` multiplies the integrand by
/// `(-x_j lambda coth lambda + i lambda y_j) / (2h)` and `Y_j` by
/// `(-y_j lambda coth lambda - i lambda x_j) / (2h)`.
pub fn heat_vector_field<T: Real>(
    j: VectorFieldId,
    g: &GroupPoint<T>,
    h: T,
    cfg: &QuadratureConfig,
    method: DerivativeMethod,
) -> Result<T> {
    let space = g.space;
    j.validate(space)?;
    if space.mode == Mode::Abelian {
        let p = heat_eval_abelian(&g.coords, h)?;
        return Ok(-g.coords[j.coord(space)] / (T::lit(2.0) * h) * p);
    }
    check_heisenberg(g, h)?;
    match method {
        DerivativeMethod::AnalyticIntegrand => {
            let own = g.coords[j.coord(space)];
            let other = g.coords[j.partner(space)];
            // the imaginary coefficient is +y_j for X_j and -x_j for Y_j
            let sign = match j {
                VectorFieldId::X(_) => T::one(),
                VectorFieldId::Y(_) => -T::one(),
            };
            let two_h = T::lit(2.0) * h;
            let (v, _, _, converged) = heat_integral(space, g.z_norm_sq(), g.t(), h, cfg, |lam, lcoth| {
                Complex::new(-own * lcoth / two_h, sign * lam * other / two_h)
            })?;
            if !converged {
                return Err(Error::Convergence {
                    err: f64::NAN,
                    tol: cfg.rel_tol,
                });
            }
            Ok(v.re * heat_prefactor(space.n, h))
        }
        DerivativeMethod::FiniteDifference => {
            let tight = cfg.with_rel_tol(cfg.rel_tol.min(1e-13));
            let step = crate::group::default_step(g);
            let failure = std::cell::Cell::new(None);
            let v = apply_vector_field(
                j,
                |p| match heat_eval(p, h, &tight) {
                    Ok(v) => v.value,
                    Err(e) => {
                        failure.set(Some(e));
                        T::nan()
                    }
                },
                g,
                step,
                FieldScheme::LeftInvariant,
            );
            if let Some(e) = failure.take() {
                return Err(e);
            }
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h1(x: f64, y: f64, t: f64) -> GroupPoint<f64> {
        GroupPoint::heisenberg(&[x], &[y], t).unwrap()
    }

    #[test]
    fn value_at_origin() {
        // Int lambda / sinh lambda = pi^2 / 2, so p_1(0) = 1/64 on H^1
        let cfg = QuadratureConfig::default();
        let v = heat_eval(&h1(0.0, 0.0, 0.0), 1.0, &cfg).unwrap();
        assert_relative_eq!(v.value, 1.0 / 64.0, max_relative = 1e-11);
        assert!(v.imag_residual < 1e-16);
    }

    #[test]
    fn symmetric_in_t() {
        let cfg = QuadratureConfig::default();
        let a = heat_eval(&h1(0.4, -0.2, 0.9), 0.7, &cfg).unwrap().value;
        let b = heat_eval(&h1(0.4, -0.2, -0.9), 0.7, &cfg).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn scaling_identity() {
        let cfg = QuadratureConfig::default();
        let g = h1(0.8, 0.3, -0.5);
        let h: f64 = 2.5;
        let lhs = heat_eval(&g, h, &cfg).unwrap().value;
        let rhs = h.powf(-2.0) * heat_eval(&g.dilate(1.0 / h.sqrt()).unwrap(), 1.0, &cfg).unwrap().value;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
    }

    #[test]
    fn abelian_closed_form() {
        let v = heat_eval_abelian(&[0.0], 1.0).unwrap();
        assert_relative_eq!(v, (4.0 * std::f64::consts::PI).powf(-0.5), max_relative = 1e-15);
        assert_relative_eq!(v, 0.282_094_791_773_878_1, max_relative = 1e-12);
    }

    #[test]
    fn field_vanishes_at_identity() {
        let cfg = QuadratureConfig::default();
        let e = h1(0.0, 0.0, 0.0);
        for j in [VectorFieldId::X(1), VectorFieldId::Y(1)] {
            let v = heat_vector_field(j, &e, 1.0, &cfg, DerivativeMethod::AnalyticIntegrand).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn field_methods_agree() {
        let cfg = QuadratureConfig::default();
        let g = h1(1.0, 0.5, 0.3);
        for j in [VectorFieldId::X(1), VectorFieldId::Y(1)] {
            let a = heat_vector_field(j, &g, 1.0, &cfg, DerivativeMethod::AnalyticIntegrand).unwrap();
            let b = heat_vector_field(j, &g, 1.0, &cfg, DerivativeMethod::FiniteDifference).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-6);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = QuadratureConfig::default();
        assert!(heat_eval(&h1(0.0, 0.0, 0.0), 0.0, &cfg).is_err());
        let a = GroupPoint::abelian(&[1.0]).unwrap();
        assert!(matches!(heat_eval(&a, 1.0, &cfg), Err(Error::ModeMismatch(_))));
        let fixed = cfg.with_truncation(1.0);
        assert!(matches!(
            heat_eval(&h1(0.0, 0.0, 0.0), 1.0, &fixed),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn f32_heat_value() {
        let cfg = QuadratureConfig::default().with_rel_tol(1e-6).with_abs_tol(1e-7);
        let g = GroupPoint::<f32>::heisenberg(&[0.0], &[0.0], 0.0).unwrap();
        let v = heat_eval(&g, 1.0f32, &cfg).unwrap();
        assert!((v.value - 1.0 / 64.0).abs() < 1e-6);
    }
}

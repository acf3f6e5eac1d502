//! Group structure of the Heisenberg group `H^n` and of its abelian stand-in `R^n`.
//!
//! Points of `H^n` are stored as one flat coordinate vector `[x_1..x_n, y_1..y_n, t]`;
//! abelian points are `[x_1..x_n]`. The group law on `H^n` is
//!
//! ```text
//! [x, y, t] o [x', y', t'] = [x + x', y + y', t + t' + 2<y, x'> - 2<x, y'>]
//! ```
//!
//! with dilations `delta_r [x, y, t] = [r x, r y, r^2 t]` and the Koranyi gauge
//! `d_K(g) = (|z|^4 + t^2)^(1/4)`. The slice-level functions (`compose_into`,
//! `left_difference_into`, `norm_of`) are the allocation-free versions used in hot loops.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{gamma, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Heisenberg,
    Abelian,
}

/// A concrete group: `H^n` or `R^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Space {
    pub mode: Mode,
    pub n: usize,
}

impl Space {
    pub fn heisenberg(n: usize) -> Self {
        assert!(n >= 1, "H^n needs n >= 1");
        Space {
            mode: Mode::Heisenberg,
            n,
        }
    }

    pub fn abelian(n: usize) -> Self {
        assert!(n >= 1, "R^n needs n >= 1");
        Space { mode: Mode::Abelian, n }
    }

    pub fn is_heisenberg(&self) -> bool {
        self.mode == Mode::Heisenberg
    }

    /// Number of stored coordinates.
    pub fn dim(&self) -> usize {
        match self.mode {
            Mode::Heisenberg => 2 * self.n + 1,
            Mode::Abelian => self.n,
        }
    }

    /// Homogeneous dimension `Q`.
    pub fn q(&self) -> usize {
        match self.mode {
            Mode::Heisenberg => 2 * self.n + 2,
            Mode::Abelian => self.n,
        }
    }

    /// Number of first-stratum vector fields.
    pub fn field_count(&self) -> usize {
        match self.mode {
            Mode::Heisenberg => 2 * self.n,
            Mode::Abelian => self.n,
        }
    }

    /// Dilation degree of coordinate `k` (1 for horizontal coordinates, 2 for `t`).
    pub fn degree(&self, k: usize) -> i32 {
        if self.is_heisenberg() && k == 2 * self.n {
            2
        } else {
            1
        }
    }

    pub fn identity<T: Real>(&self) -> GroupPoint<T> {
        GroupPoint {
            space: *self,
            coords: vec![T::zero(); self.dim()],
        }
    }

    /// Exact Lebesgue volume of the unit gauge ball `B(0, 1)`.
    ///
    /// For `H^n` this is `pi^n / Gamma(n) * B(n/2, 3/2)`; for `R^n` the Euclidean ball.
    pub fn unit_ball_volume(&self) -> f64 {
        let n = self.n as f64;
        let pi = std::f64::consts::PI;
        match self.mode {
            Mode::Heisenberg => {
                let beta = gamma(n / 2.0) * gamma(1.5) / gamma(n / 2.0 + 1.5);
                pi.powf(n) / gamma(n) * beta
            }
            Mode::Abelian => pi.powf(n / 2.0) / gamma(n / 2.0 + 1.0),
        }
    }

    /// Half-widths of the coordinate box enclosing `B(0, r)`.
    pub fn enclosing_box<T: Real>(&self, r: T) -> Vec<T> {
        (0..self.dim())
            .map(|k| if self.degree(k) == 2 { r * r } else { r })
            .collect()
    }

    /// Metric data with an empirically estimated quasi-triangle constant (cached).
    pub fn metric_info(&self) -> GroupMetricInfo {
        static CACHE: OnceLock<Mutex<HashMap<Space, f64>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let constant = {
            let guard = cache.lock().expect("metric cache poisoned");
            guard.get(self).copied()
        };
        let constant = match constant {
            Some(v) => v,
            None => {
                let v = estimate_quasi_triangle_constant(*self, 1_000_000, 0x5eed);
                cache.lock().expect("metric cache poisoned").insert(*self, v);
                v
            }
        };
        GroupMetricInfo {
            n: self.n,
            q: self.q(),
            quasi_triangle_constant: constant,
        }
    }

    pub fn point<T: Real>(&self, coords: Vec<T>) -> Result<GroupPoint<T>> {
        GroupPoint::new(*self, coords)
    }
}

/// Dimension data of a group together with the quasi-triangle constant of `d_K`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricInfo {
    pub n: usize,
    pub q: usize,
    pub quasi_triangle_constant: f64,
}

/// Max over sampled triples of `d(g1, g2) / (d(g1, g') + d(g', g2))`, times 1.05.
pub fn estimate_quasi_triangle_constant(space: Space, triples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = space.dim();
    let mut a = vec![0.0f64; dim];
    let mut b = vec![0.0f64; dim];
    let mut m = vec![0.0f64; dim];
    let mut scratch = vec![0.0f64; dim];
    let mut worst = 0.0f64;
    for k in 0..triples {
        // mix scales so that nearly collinear and very unequal triples both show up
        let scale = if k % 3 == 0 { 0.1 } else { 2.0 };
        for v in [&mut a, &mut b, &mut m] {
            for (i, c) in v.iter_mut().enumerate() {
                let w: f64 = rng.random_range(-1.0..1.0);
                *c = if space.degree(i) == 2 {
                    w * scale * scale
                } else {
                    w * scale
                };
            }
        }
        let d_ab = distance_of(space, &a, &b, &mut scratch);
        let d_am = distance_of(space, &a, &m, &mut scratch);
        let d_mb = distance_of(space, &m, &b, &mut scratch);
        let denom = d_am + d_mb;
        if denom > 1e-300 {
            worst = worst.max(d_ab / denom);
        }
    }
    worst.max(1.0) * 1.05
}

/// A point of `H^n` or `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint<T> {
    pub space: Space,
    pub coords: Vec<T>,
}

impl<T: Real> GroupPoint<T> {
    pub fn new(space: Space, coords: Vec<T>) -> Result<Self> {
        if coords.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates".into()));
        }
        Ok(GroupPoint { space, coords })
    }

    /// `[x, y, t]` on `H^n`.
    pub fn heisenberg(x: &[T], y: &[T], t: T) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::Argument(format!(
                "x and y must be non-empty and of equal length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        let mut coords = Vec::with_capacity(2 * x.len() + 1);
        coords.extend_from_slice(x);
        coords.extend_from_slice(y);
        coords.push(t);
        Self::new(Space::heisenberg(x.len()), coords)
    }

    pub fn abelian(x: &[T]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Argument("empty abelian point".into()));
        }
        Self::new(Space::abelian(x.len()), x.to_vec())
    }

    pub fn n(&self) -> usize {
        self.space.n
    }

    pub fn x(&self) -> &[T] {
        &self.coords[..self.space.n]
    }

    /// Empty in abelian mode.
    pub fn y(&self) -> &[T] {
        match self.space.mode {
            Mode::Heisenberg => &self.coords[self.space.n..2 * self.space.n],
            Mode::Abelian => &[],
        }
    }

    /// Zero in abelian mode.
    pub fn t(&self) -> T {
        match self.space.mode {
            Mode::Heisenberg => self.coords[2 * self.space.n],
            Mode::Abelian => T::zero(),
        }
    }

    /// `|z|^2 = |x|^2 + |y|^2`.
    pub fn z_norm_sq(&self) -> T {
        horizontal_norm_sq(self.space, &self.coords)
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.space.mode != other.space.mode {
            return Err(Error::ModeMismatch(format!(
                "{:?} vs {:?}",
                self.space.mode, other.space.mode
            )));
        }
        if self.space.n != other.space.n {
            return Err(Error::DimensionMismatch {
                expected: self.space.n,
                got: other.space.n,
            });
        }
        Ok(())
    }

    /// Group product `self o other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = vec![T::zero(); self.space.dim()];
        compose_into(self.space, &self.coords, &other.coords, &mut out);
        Ok(GroupPoint {
            space: self.space,
            coords: out,
        })
    }

    pub fn inverse(&self) -> Self {
        GroupPoint {
            space: self.space,
            coords: self.coords.iter().map(|&c| -c).collect(),
        }
    }

    /// `delta_lambda(self)`; `lambda` must be positive.
    pub fn dilate(&self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::Argument(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        let mut out = self.coords.clone();
        dilate_in_place(self.space, &mut out, lambda);
        Ok(GroupPoint {
            space: self.space,
            coords: out,
        })
    }

    /// Koranyi gauge `(|z|^4 + t^2)^(1/4)` (Euclidean norm in abelian mode).
    pub fn koranyi_norm(&self) -> T {
        norm_of(self.space, &self.coords)
    }

    /// `d_K(self, other) = d_K(other^{-1} o self)`.
    pub fn distance(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        let mut scratch = vec![T::zero(); self.space.dim()];
        Ok(distance_of(self.space, &self.coords, &other.coords, &mut scratch))
    }

    /// `other^{-1} o self`, the argument of a convolution kernel `K(self, other)`.
    pub fn left_difference(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = vec![T::zero(); self.space.dim()];
        left_difference_into(self.space, &self.coords, &other.coords, &mut out);
        Ok(GroupPoint {
            space: self.space,
            coords: out,
        })
    }

    pub fn to_f64(&self) -> GroupPoint<f64> {
        GroupPoint {
            space: self.space,
            coords: self.coords.iter().map(|c| c.to_f64_lossy()).collect(),
        }
    }
}

#[inline]
pub fn horizontal_norm_sq<T: Real>(space: Space, c: &[T]) -> T {
    let m = match space.mode {
        Mode::Heisenberg => 2 * space.n,
        Mode::Abelian => space.n,
    };
    c[..m].iter().fold(T::zero(), |acc, &v| acc + v * v)
}

/// Gauge of a raw coordinate slice.
#[inline]
pub fn norm_of<T: Real>(space: Space, c: &[T]) -> T {
    let z2 = horizontal_norm_sq(space, c);
    match space.mode {
        Mode::Heisenberg => {
            let t = c[2 * space.n];
            (z2 * z2 + t * t).sqrt().sqrt()
        }
        Mode::Abelian => z2.sqrt(),
    }
}

/// `out = a o b`.
#[inline]
pub fn compose_into<T: Real>(space: Space, a: &[T], b: &[T], out: &mut [T]) {
    let n = space.n;
    match space.mode {
        Mode::Heisenberg => {
            let two = T::one() + T::one();
            let mut twist = T::zero();
            for j in 0..n {
                twist += a[n + j] * b[j] - a[j] * b[n + j];
            }
            for k in 0..2 * n {
                out[k] = a[k] + b[k];
            }
            out[2 * n] = a[2 * n] + b[2 * n] + two * twist;
        }
        Mode::Abelian => {
            for k in 0..n {
                out[k] = a[k] + b[k];
            }
        }
    }
}

/// `out = b^{-1} o a`.
#[inline]
pub fn left_difference_into<T: Real>(space: Space, a: &[T], b: &[T], out: &mut [T]) {
    let n = space.n;
    match space.mode {
        Mode::Heisenberg => {
            let two = T::one() + T::one();
            // (-b) o a: twist = <-y_b, x_a> - <-x_b, y_a>
            let mut twist = T::zero();
            for j in 0..n {
                twist += b[j] * a[n + j] - b[n + j] * a[j];
            }
            for k in 0..2 * n {
                out[k] = a[k] - b[k];
            }
            out[2 * n] = a[2 * n] - b[2 * n] + two * twist;
        }
        Mode::Abelian => {
            for k in 0..n {
                out[k] = a[k] - b[k];
            }
        }
    }
}

/// `d_K(a, b)` on raw coordinates; `scratch` must have length `space.dim()`.
#[inline]
pub fn distance_of<T: Real>(space: Space, a: &[T], b: &[T], scratch: &mut [T]) -> T {
    left_difference_into(space, a, b, scratch);
    norm_of(space, scratch)
}

#[inline]
pub fn dilate_in_place<T: Real>(space: Space, c: &mut [T], lambda: T) {
    let l2 = lambda * lambda;
    for (k, v) in c.iter_mut().enumerate() {
        *v *= if space.degree(k) == 2 { l2 } else { lambda };
    }
}

/// First-stratum left-invariant vector field `X_j` (`1 <= j <= n`) or `Y_j = X_{n+j}`.
///
/// `X_j = d/dx_j + 2 y_j d/dt`, `Y_j = d/dy_j - 2 x_j d/dt`. In abelian mode only
/// `X_j = d/dx_j` exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VectorFieldId {
    X(usize),
    Y(usize),
}

impl VectorFieldId {
    /// Unified 1-based index: `X_j -> j`, `Y_j -> n + j`.
    pub fn from_index(index: usize, space: Space) -> Result<Self> {
        let n = space.n;
        match space.mode {
            Mode::Heisenberg if (1..=n).contains(&index) => Ok(VectorFieldId::X(index)),
            Mode::Heisenberg if (n + 1..=2 * n).contains(&index) => Ok(VectorFieldId::Y(index - n)),
            Mode::Abelian if (1..=n).contains(&index) => Ok(VectorFieldId::X(index)),
            _ => Err(Error::Argument(format!(
                "vector field index {index} out of range for {space:?}"
            ))),
        }
    }

    pub fn index(&self, space: Space) -> usize {
        match *self {
            VectorFieldId::X(j) => j,
            VectorFieldId::Y(j) => space.n + j,
        }
    }

    /// 0-based position of the coordinate `x_j` or `y_j`.
    pub fn coord(&self, space: Space) -> usize {
        match *self {
            VectorFieldId::X(j) => j - 1,
            VectorFieldId::Y(j) => space.n + j - 1,
        }
    }

    /// 0-based position of the conjugate horizontal coordinate (`y_j` for `X_j`, `x_j` for `Y_j`).
    pub fn partner(&self, space: Space) -> usize {
        match *self {
            VectorFieldId::X(j) => space.n + j - 1,
            VectorFieldId::Y(j) => j - 1,
        }
    }

    pub fn validate(&self, space: Space) -> Result<()> {
        let ok = match (*self, space.mode) {
            (VectorFieldId::X(j), _) => (1..=space.n).contains(&j),
            (VectorFieldId::Y(j), Mode::Heisenberg) => (1..=space.n).contains(&j),
            (VectorFieldId::Y(_), Mode::Abelian) => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("{self:?} not defined on {space:?}")))
        }
    }

    /// Coefficient of `d/dt` in the field at `g`: `2 y_j` for `X_j`, `-2 x_j` for `Y_j`.
    pub fn t_coefficient<T: Real>(&self, space: Space, g: &[T]) -> T {
        let two = T::one() + T::one();
        match (*self, space.mode) {
            (_, Mode::Abelian) => T::zero(),
            (VectorFieldId::X(j), Mode::Heisenberg) => two * g[space.n + j - 1],
            (VectorFieldId::Y(j), Mode::Heisenberg) => -two * g[j - 1],
        }
    }

    /// The one-parameter subgroup `s -> exp(s X_j)` evaluated at `s`.
    pub fn curve<T: Real>(&self, space: Space, s: T) -> Vec<T> {
        let mut v = vec![T::zero(); space.dim()];
        v[self.coord(space)] = s;
        v
    }
}

impl std::fmt::Display for VectorFieldId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VectorFieldId::X(j) => write!(f, "X{j}"),
            VectorFieldId::Y(j) => write!(f, "Y{j}"),
        }
    }
}

/// Differentiation scheme for [`apply_vector_field`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldScheme {
    /// Central differences of `d/dx_j` and `d/dt`, combined with the coefficient `2 y_j`.
    Coordinate,
    /// Central difference along the left-invariant curve `s -> g o exp(s X_j)`.
    LeftInvariant,
}

/// Default finite-difference step `1e-5 * max(1, d_K(g))`.
pub fn default_step<T: Real>(g: &GroupPoint<T>) -> T {
    T::lit(1e-5) * g.koranyi_norm().max(T::one())
}

/// Central-difference approximation of `(X_j f)(g)`; error is `O(step^2)`.
pub fn apply_vector_field<T, F>(j: VectorFieldId, f: F, g: &GroupPoint<T>, step: T, scheme: FieldScheme) -> Result<T>
where
    T: Real,
    F: Fn(&GroupPoint<T>) -> T,
{
    j.validate(g.space)?;
    if !(step > T::zero()) {
        return Err(Error::Argument("step must be positive".into()));
    }
    let space = g.space;
    let two = T::one() + T::one();
    let eval = |p: GroupPoint<T>| -> Result<T> {
        let v = f(&p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("vector field test function".into()))
        }
    };
    match scheme {
        FieldScheme::Coordinate => {
            let k = j.coord(space);
            let shifted = |axis: usize, s: T| {
                let mut c = g.coords.clone();
                c[axis] += s;
                GroupPoint { space, coords: c }
            };
            let dk = (eval(shifted(k, step))? - eval(shifted(k, -step))?) / (two * step);
            if space.is_heisenberg() {
                let ta = 2 * space.n;
                let dt = (eval(shifted(ta, step))? - eval(shifted(ta, -step))?) / (two * step);
                Ok(dk + j.t_coefficient(space, &g.coords) * dt)
            } else {
                Ok(dk)
            }
        }
        FieldScheme::LeftInvariant => {
            let along = |s: T| {
                let mut out = vec![T::zero(); space.dim()];
                compose_into(space, &g.coords, &j.curve(space, s), &mut out);
                GroupPoint { space, coords: out }
            };
            Ok((eval(along(step))? - eval(along(-step))?) / (two * step))
        }
    }
}

/// Uniform samples of `B(center, r)` by rejection from the box enclosing `B(0, r)`,
/// left-translated to `center` (translation preserves Lebesgue measure).
pub fn ball_sample<T: Real>(center: &GroupPoint<T>, r: T, count: usize, seed: u64) -> Result<Vec<GroupPoint<T>>> {
    let (pts, _) = ball_sample_with_stats(center, r, count, seed)?;
    Ok(pts)
}

/// As [`ball_sample`], also returning the number of box draws used.
pub fn ball_sample_with_stats<T: Real>(
    center: &GroupPoint<T>,
    r: T,
    count: usize,
    seed: u64,
) -> Result<(Vec<GroupPoint<T>>, usize)> {
    if !(r > T::zero()) {
        return Err(Error::Argument("ball radius must be positive".into()));
    }
    let space = center.space;
    let half = space.enclosing_box(r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut w = vec![T::zero(); space.dim()];
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        for (k, c) in w.iter_mut().enumerate() {
            let u: f64 = rng.random_range(-1.0..1.0);
            *c = T::lit(u) * half[k];
        }
        if norm_of(space, &w) < r {
            let mut p = vec![T::zero(); space.dim()];
            compose_into(space, &center.coords, &w, &mut p);
            out.push(GroupPoint { space, coords: p });
        }
    }
    Ok((out, draws))
}

/// Point `delta_rho(omega)` of the gauge sphere parametrisation.
///
/// On `H^n`, `omega = [sqrt(cos phi) zeta, sin phi]` with `zeta` a unit vector of
/// `R^{2n}` and `phi` in `[-pi/2, pi/2]`; Lebesgue measure is
/// `rho^{Q-1} cos(phi)^{n-1} drho dphi dsigma(zeta)` (see [`polar_density`]).
/// In abelian mode `phi` is ignored and `omega = zeta`.
pub fn polar_point<T: Real>(space: Space, rho: T, phi: T, zeta: &[T]) -> Vec<T> {
    match space.mode {
        Mode::Heisenberg => {
            let s = phi.cos().max(T::zero()).sqrt() * rho;
            let mut c: Vec<T> = zeta.iter().map(|&v| v * s).collect();
            c.push(rho * rho * phi.sin());
            c
        }
        Mode::Abelian => zeta.iter().map(|&v| v * rho).collect(),
    }
}

/// Density of Lebesgue measure in `(rho, phi, zeta)` coordinates, relative to
/// `drho dphi dsigma(zeta)` (Heisenberg) or `drho dsigma(zeta)` (abelian).
pub fn polar_density<T: Real>(space: Space, rho: T, phi: T) -> T {
    let q = space.q() as i32;
    match space.mode {
        Mode::Heisenberg => rho.powi(q - 1) * phi.cos().max(T::zero()).powi(space.n as i32 - 1),
        Mode::Abelian => rho.powi(q - 1),
    }
}

/// Inverse of [`polar_point`] on `H^n`: returns `(rho, phi)`; `phi = atan2(t, |z|^2)`.
pub fn polar_of<T: Real>(space: Space, c: &[T]) -> (T, T) {
    let rho = norm_of(space, c);
    match space.mode {
        Mode::Heisenberg => (rho, c[2 * space.n].atan2(horizontal_norm_sq(space, c))),
        Mode::Abelian => (rho, T::zero()),
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
    fn compose_examples() {
        let e = h1(0.0, 0.0, 0.0);
        assert_eq!(h1(1.0, 0.0, 0.0).compose(&e).unwrap(), h1(1.0, 0.0, 0.0));
        assert_eq!(
            h1(1.0, 0.0, 0.0).compose(&h1(0.0, 1.0, 0.0)).unwrap(),
            h1(1.0, 1.0, -2.0)
        );
        assert_eq!(
            h1(0.0, 1.0, 0.0).compose(&h1(1.0, 0.0, 0.0)).unwrap(),
            h1(1.0, 1.0, 2.0)
        );
    }

    #[test]
    fn compose_rejects_mismatch() {
        let a = h1(1.0, 0.0, 0.0);
        let b = GroupPoint::heisenberg(&[1.0, 0.0], &[0.0, 0.0], 0.0).unwrap();
        assert!(matches!(a.compose(&b), Err(Error::DimensionMismatch { .. })));
        let c = GroupPoint::abelian(&[1.0]).unwrap();
        assert!(matches!(a.compose(&c), Err(Error::ModeMismatch(_))));
    }

    #[test]
    fn inverse_and_dilation_examples() {
        assert_eq!(h1(1.0, 2.0, 3.0).inverse(), h1(-1.0, -2.0, -3.0));
        assert_eq!(h1(0.0, 0.0, 0.0).inverse(), h1(-0.0, -0.0, -0.0));
        assert_eq!(h1(1.0, 1.0, 1.0).dilate(2.0).unwrap(), h1(2.0, 2.0, 4.0));
        assert!(h1(1.0, 1.0, 1.0).dilate(0.0).is_err());
        assert!(h1(1.0, 1.0, 1.0).dilate(-1.0).is_err());
        let g = h1(0.3, -0.2, 0.7);
        assert_eq!(g.dilate(1.0).unwrap(), g);
    }

    #[test]
    fn norm_examples() {
        assert_relative_eq!(h1(0.0, 0.0, 1.0).koranyi_norm(), 1.0);
        assert_relative_eq!(h1(1.0, 0.0, 0.0).koranyi_norm(), 1.0);
        assert_relative_eq!(h1(1.0, 0.0, 1.0).koranyi_norm(), 2f64.powf(0.25));
    }

    #[test]
    fn distance_examples() {
        let g = h1(0.4, -1.1, 0.3);
        assert_eq!(g.distance(&g).unwrap(), 0.0);
        let e = h1(0.0, 0.0, 0.0);
        assert_relative_eq!(g.distance(&e).unwrap(), g.koranyi_norm());
        // [0,1,0]^{-1} o [1,0,0] = [0,-1,0] o [1,0,0] = [1,-1,-2]
        let d = h1(1.0, 0.0, 0.0).distance(&h1(0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(d, (4.0f64 + 4.0).powf(0.25), epsilon = 1e-15);
    }

    #[test]
    fn vector_field_examples() {
        let s = Space::heisenberg(1);
        let x1 = VectorFieldId::from_index(1, s).unwrap();
        let y1 = VectorFieldId::from_index(2, s).unwrap();
        assert_eq!(y1, VectorFieldId::Y(1));
        assert!(VectorFieldId::from_index(3, s).is_err());
        for scheme in [FieldScheme::Coordinate, FieldScheme::LeftInvariant] {
            let g = h1(0.2, 0.1, 0.5);
            let v = apply_vector_field(x1, |p| p.x()[0], &g, 1e-5, scheme).unwrap();
            assert_relative_eq!(v, 1.0, epsilon = 1e-9);
            let v = apply_vector_field(x1, |p| p.t(), &h1(0.0, 1.0, 0.0), 1e-5, scheme).unwrap();
            assert_relative_eq!(v, 2.0, epsilon = 1e-9);
            let v = apply_vector_field(y1, |p| p.t(), &h1(1.0, 0.0, 0.0), 1e-5, scheme).unwrap();
            assert_relative_eq!(v, -2.0, epsilon = 1e-9);
        }
        let bad = apply_vector_field(x1, |_| f64::NAN, &h1(0.0, 0.0, 0.0), 1e-5, FieldScheme::Coordinate);
        assert!(matches!(bad, Err(Error::NonFinite(_))));
    }

    #[test]
    fn ball_sample_contract() {
        let c = h1(0.5, -0.3, 2.0);
        let pts = ball_sample(&c, 0.7, 500, 3).unwrap();
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|p| p.distance(&c).unwrap() < 0.7));
        assert!(ball_sample(&c, 0.7, 0, 3).unwrap().is_empty());
        assert_eq!(
            ball_sample(&c, 0.7, 20, 9).unwrap(),
            ball_sample(&c, 0.7, 20, 9).unwrap()
        );
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(
            Space::heisenberg(1).unit_ball_volume(),
            std::f64::consts::PI.powi(2) / 2.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            Space::abelian(2).unit_ball_volume(),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert_relative_eq!(Space::abelian(1).unit_ball_volume(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn polar_round_trip() {
        let s = Space::heisenberg(1);
        let p = polar_point(s, 1.7, 0.4, &[0.6, -0.8]);
        let (rho, phi) = polar_of(s, &p);
        assert_relative_eq!(rho, 1.7, epsilon = 1e-14);
        assert_relative_eq!(phi, 0.4, epsilon = 1e-14);
    }

    #[test]
    fn f32_group_law() {
        let a = GroupPoint::<f32>::heisenberg(&[1.0], &[0.0], 0.0).unwrap();
        let b = GroupPoint::<f32>::heisenberg(&[0.0], &[1.0], 0.0).unwrap();
        assert_eq!(a.compose(&b).unwrap().t(), -2.0f32);
        assert!((a.dilate(2.0).unwrap().koranyi_norm() - 2.0).abs() < 1e-6);
    }
}

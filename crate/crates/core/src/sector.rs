//! Twisted truncated sectors `G = tau_g delta_r (Union_{s >= r_o/alpha} delta_s B(g~, eps))`
//! on which the Riesz kernel keeps one sign and `|K_j(g1, g2)| >~ d_K(g1, g2)^(-Q)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{
    ball_sample, compose_into, dilate_in_place, distance_of, left_difference_into, norm_of, GroupPoint, Space,
};
use crate::riesz::{sphere_slice_point, RieszKernel};

/// Constructive data of a sector with direction point `g~` (`d_K(g~) = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub space: Space,
    pub j: String,
    pub direction: Vec<f64>,
    pub epsilon: f64,
    pub r_o: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Quasi-triangle constant used for the `4 C eps` safety ball.
    pub c_rho: f64,
    /// `K_j(g~^{-1})`.
    pub k_ref: f64,
    /// `K_j(g~)` (reference for the reversed argument order).
    pub k_ref_reverse: f64,
    /// Smallest `|K_j| / |k_ref|` seen on the certification samples (must exceed 1/2).
    pub margin: f64,
    pub calibration_id: String,
}

/// `tau_g delta_r (G_e)` as a membership-testable region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorRegion {
    pub spec: SectorSpec,
    pub base: Vec<f64>,
    pub scale: f64,
}

const CERT_SAMPLES: usize = 3000;

/// Smallest `|K|/|ref|` (0 on a sign change) over `B(g~^{-1}, 4 C eps)` and over the
/// pair differences `w = q^{-1} o u`, `q in B(g~, eps)`, `|u| < eps`, together with
/// `w^{-1}` against `K(g~)`.
fn certify(kernel: &RieszKernel, dir: &[f64], eps: f64, c_rho: f64, seed: u64) -> Result<f64> {
    let space = kernel.space;
    let g = GroupPoint::new(space, dir.to_vec())?;
    let ginv = g.inverse();
    let k_fwd = kernel.eval(&ginv.coords);
    let k_rev = kernel.eval(&g.coords);
    if k_fwd == 0.0 || k_rev == 0.0 {
        return Ok(0.0);
    }
    let ratio = |v: f64, r: f64| if v * r > 0.0 { v.abs() / r.abs() } else { 0.0 };
    let mut margin = f64::INFINITY;
    for p in ball_sample(&ginv, 4.0 * c_rho * eps, CERT_SAMPLES, seed)? {
        margin = margin.min(ratio(kernel.eval(&p.coords), k_fwd));
    }
    let e = space.identity::<f64>();
    let qs = ball_sample(&g, eps, CERT_SAMPLES, seed ^ 0x9e37)?;
    let us = ball_sample(&e, eps, CERT_SAMPLES, seed ^ 0x7f4a)?;
    let mut w = vec![0.0; space.dim()];
    let mut winv = vec![0.0; space.dim()];
    for (q, u) in qs.iter().zip(&us) {
        let qinv = q.inverse();
        compose_into(space, &qinv.coords, &u.coords, &mut w);
        margin = margin.min(ratio(kernel.eval(&w), k_fwd));
        for (a, b) in winv.iter_mut().zip(&w) {
            *a = -b;
        }
        margin = margin.min(ratio(kernel.eval(&winv), k_rev));
    }
    Ok(margin)
}

/// Sampled `(min, max)` of `d_K` over `B(g~, eps)`, including boundary-heavy samples.
fn norm_range(space: Space, dir: &[f64], eps: f64, seed: u64) -> Result<(f64, f64)> {
    let g = GroupPoint::new(space, dir.to_vec())?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in ball_sample(&g, eps, 20_000, seed)? {
        let d = p.koranyi_norm();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok((lo, hi))
}

/// Builds the sector data for `kernel`.
///
/// `g~` maximises `|K_j(g~^{-1})|` over a `grid x grid` mesh of the unit sphere slice;
/// `eps` is the largest `2^-k` (`k >= 1`) passing [`certify`]; `r_o = 2^gamma > 1/eps`.
pub fn find_direction_point(kernel: &RieszKernel, sphere_grid: usize, seed: u64) -> Result<SectorSpec> {
    let space = kernel.space;
    if sphere_grid < 8 {
        return Err(Error::Argument("sphere grid too coarse".into()));
    }
    let pi = std::f64::consts::PI;
    let grid = sphere_grid + sphere_grid % 2;
    let best = (0..=grid)
        .into_par_iter()
        .map(|pj| {
            let phi = -pi / 2.0 + pi * pj as f64 / grid as f64;
            let mut best = (0.0f64, vec![]);
            for ti in 0..grid {
                let theta = 2.0 * pi * ti as f64 / grid as f64;
                let c = if space.is_heisenberg() {
                    sphere_slice_point(space, kernel.j, theta, phi)
                } else {
                    let mut c = vec![0.0; space.n];
                    c[kernel.j.coord(space)] = if ti % 2 == 0 { 1.0 } else { -1.0 };
                    c
                };
                let inv: Vec<f64> = c.iter().map(|v| -v).collect();
                let v = kernel.eval(&inv).abs();
                if v > best.0 {
                    best = (v, c);
                }
            }
            best
        })
        .reduce(|| (0.0, vec![]), |a, b| if b.0 > a.0 { b } else { a });
    if best.0 <= 1e-12 {
        return Err(Error::KernelDegenerate(
            "no sphere point with nonzero kernel value".into(),
        ));
    }
    let dir = best.1;
    let c_rho = space.metric_info().quasi_triangle_constant;
    let mut chosen = None;
    for k in 1..=20 {
        let eps = 0.5f64.powi(k);
        let m = certify(kernel, &dir, eps, c_rho, seed.wrapping_add(k as u64))?;
        if m > 0.5 {
            chosen = Some((eps, m));
            break;
        }
    }
    let (epsilon, margin) =
        chosen.ok_or_else(|| Error::KernelDegenerate("no admissible aperture down to 2^-20".into()))?;
    let mut gamma = 0;
    while 2f64.powi(gamma) <= 1.0 / epsilon {
        gamma += 1;
    }
    let (alpha, beta) = norm_range(space, &dir, epsilon, seed ^ 0xa1fa)?;
    let g = GroupPoint::new(space, dir.clone())?;
    Ok(SectorSpec {
        space,
        j: kernel.j.to_string(),
        k_ref: kernel.eval(&g.inverse().coords),
        k_ref_reverse: kernel.eval(&g.coords),
        direction: dir,
        epsilon,
        r_o: 2f64.powi(gamma),
        alpha,
        beta,
        c_rho,
        margin,
        calibration_id: kernel.calibration_id.clone(),
    })
}

/// Same construction with the aperture fixed to `eps` (used to compare apertures).
pub fn with_aperture(spec: &SectorSpec, eps: f64, seed: u64) -> Result<SectorSpec> {
    let mut gamma = 0;
    while 2f64.powi(gamma) <= 1.0 / eps {
        gamma += 1;
    }
    let (alpha, beta) = norm_range(spec.space, &spec.direction, eps, seed ^ 0xa1fa)?;
    Ok(SectorSpec {
        epsilon: eps,
        r_o: 2f64.powi(gamma),
        alpha,
        beta,
        ..spec.clone()
    })
}

/// The region `tau_g delta_r G_e` (`r = 1` gives the unscaled sector).
pub fn scaled_sector(spec: &SectorSpec, g: &GroupPoint<f64>, r: f64) -> Result<SectorRegion> {
    if !(r > 0.0) {
        return Err(Error::Argument("scale must be positive".into()));
    }
    if g.space != spec.space {
        return Err(Error::ModeMismatch(
            "base point and sector live on different groups".into(),
        ));
    }
    Ok(SectorRegion {
        spec: spec.clone(),
        base: g.coords.clone(),
        scale: r,
    })
}

impl SectorRegion {
    /// Smallest admissible dilation parameter `r_o / alpha`.
    pub fn s_min(&self) -> f64 {
        self.spec.r_o / self.spec.alpha
    }

    /// Point `g o delta_r(delta_s(q))`.
    pub fn point(&self, s: f64, q: &[f64]) -> Vec<f64> {
        let space = self.spec.space;
        let mut v = q.to_vec();
        dilate_in_place(space, &mut v, s * self.scale);
        let mut out = vec![0.0; space.dim()];
        compose_into(space, &self.base, &v, &mut out);
        out
    }
}

/// Membership of `p` in the region: `min_s d_K(delta_{1/s} w, g~) < eps` over admissible
/// `s`, where `w = delta_{1/r}(g^{-1} o p)`.
pub fn sector_contains(region: &SectorRegion, p: &[f64]) -> bool {
    let spec = &region.spec;
    let space = spec.space;
    let dim = space.dim();
    let mut w = vec![0.0; dim];
    left_difference_into(space, p, &region.base, &mut w);
    dilate_in_place(space, &mut w, 1.0 / region.scale);
    let dw = norm_of(space, &w);
    let lo = (dw / (spec.beta * (1.0 + 1e-9))).max(region.s_min());
    let hi = dw / (spec.alpha * (1.0 - 1e-9));
    if !(lo <= hi) {
        return false;
    }
    let mut q = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut dist = |s: f64| {
        q.copy_from_slice(&w);
        dilate_in_place(space, &mut q, 1.0 / s);
        distance_of(space, &q, &spec.direction, &mut scratch)
    };
    // coarse scan in log s, then golden-section refinement around the best node
    let steps = 24;
    let (la, lb) = (lo.ln(), hi.ln());
    let mut best = (f64::INFINITY, la);
    for k in 0..=steps {
        let ls = la + (lb - la) * k as f64 / steps as f64;
        let d = dist(ls.exp());
        if d < spec.epsilon {
            return true;
        }
        if d < best.0 {
            best = (d, ls);
        }
    }
    let h = (lb - la) / steps as f64;
    let (mut a, mut b) = ((best.1 - h).max(la), (best.1 + h).min(lb));
    let ratio = 0.618_033_988_749_894_9;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = dist(x1.exp());
    let mut f2 = dist(x2.exp());
    while b - a > 1e-8 {
        if f1.min(f2) < spec.epsilon {
            return true;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = dist(x1.exp());
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = dist(x2.exp());
        }
    }
    f1.min(f2) < spec.epsilon
}

/// Outcome of [`lower_bound_verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub pairs: usize,
    /// `min |K_j(g1, g2)| d_K(g1, g2)^Q` over both argument orders.
    pub c_est: f64,
    pub c_est_forward: f64,
    pub c_est_reverse: f64,
    pub sign_forward: bool,
    pub sign_reverse: bool,
    pub sign_constant: bool,
    /// `c_est / |K_j(g~^{-1})|`.
    pub ratio_to_reference: f64,
    /// Smallest sampled `d_K(g, g2)` divided by `r_o r`.
    pub inner_distance_ratio: f64,
}

/// Samples `g1 in B(g, r)` and `g2` in the region (log-stratified in `s` up to `100 s_min`)
/// and measures the lower bound and the sign of the kernel in both argument orders.
pub fn lower_bound_verify(
    kernel: &RieszKernel,
    region: &SectorRegion,
    pair_count: usize,
    seed: u64,
) -> Result<LowerBoundReport> {
    let spec = &region.spec;
    let space = spec.space;
    let q = space.q() as i32;
    let base = GroupPoint::new(space, region.base.clone())?;
    let e = space.identity::<f64>();
    let dir = GroupPoint::new(space, spec.direction.clone())?;
    let vs = ball_sample(&e, 1.0, pair_count, seed)?;
    let qs = ball_sample(&dir, spec.epsilon, pair_count, seed ^ 0x51de)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbead);
    let s_min = region.s_min();
    let ss: Vec<f64> = (0..pair_count)
        .map(|_| s_min * 100f64.powf(rng.random::<f64>()))
        .collect();
    let rows: Vec<(f64, f64, f64)> = (0..pair_count)
        .into_par_iter()
        .map(|k| {
            let mut v = vs[k].coords.clone();
            dilate_in_place(space, &mut v, region.scale);
            let mut g1 = vec![0.0; space.dim()];
            compose_into(space, &base.coords, &v, &mut g1);
            let g2 = region.point(ss[k], &qs[k].coords);
            let mut scratch = vec![0.0; space.dim()];
            let d = distance_of(space, &g1, &g2, &mut scratch);
            let fwd = kernel.eval_pair(&g1, &g2, &mut scratch);
            let rev = kernel.eval_pair(&g2, &g1, &mut scratch);
            let dg = distance_of(space, &g2, &base.coords, &mut scratch);
            (fwd * d.powi(q), rev * d.powi(q), dg)
        })
        .collect();
    let sign_f = spec.k_ref.signum();
    let sign_r = spec.k_ref_reverse.signum();
    let sign_forward = rows.iter().all(|r| r.0.signum() == sign_f);
    let sign_reverse = rows.iter().all(|r| r.1.signum() == sign_r);
    let c_f = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.0.abs()));
    let c_r = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.1.abs()));
    let inner = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.2));
    let c_est = c_f.min(c_r);
    Ok(LowerBoundReport {
        pairs: pair_count,
        c_est,
        c_est_forward: c_f,
        c_est_reverse: c_r,
        sign_forward,
        sign_reverse,
        sign_constant: sign_forward && sign_reverse,
        ratio_to_reference: c_est / spec.k_ref.abs(),
        inner_distance_ratio: inner / (spec.r_o * region.scale),
    })
}

/// One row of [`volume_regularity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeRow {
    pub radius: f64,
    /// `|B(g, R) n G| / R^Q`.
    pub ratio: f64,
    pub std_error: f64,
}

/// Angular box `(phi_lo, phi_hi, theta_half, theta0)` containing the polar directions of
/// `B(g~, eps)` on `H^1`, padded by half its width on each side.
pub fn angular_box(spec: &SectorSpec, seed: u64) -> Result<(f64, f64, f64, f64)> {
    let space = spec.space;
    let g = GroupPoint::new(space, spec.direction.clone())?;
    let theta0 = spec.direction[1].atan2(spec.direction[0]);
    let (mut plo, mut phi_hi, mut th) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for p in ball_sample(&g, spec.epsilon, 20_000, seed)? {
        let (_, phi) = crate::group::polar_of(space, &p.coords);
        plo = plo.min(phi);
        phi_hi = phi_hi.max(phi);
        let mut d = p.coords[1].atan2(p.coords[0]) - theta0;
        d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        th = th.max(d.abs());
    }
    let pad = 0.5 * (phi_hi - plo);
    let half_pi = std::f64::consts::FRAC_PI_2;
    Ok((
        (plo - pad).max(-half_pi),
        (phi_hi + pad).min(half_pi),
        (1.5 * th).min(std::f64::consts::PI),
        theta0,
    ))
}

/// `theta` bin of the angular shadow of `B(g~, eps)` on `H^1` with its `phi` range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripBin {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
}

/// Cover of the polar directions of `B(g~, eps)` on `H^1` by `bins` slices in `theta`,
/// each carrying the `phi` range of its own and neighbouring slices, padded by a quarter
/// of its width. The shadow is a thin strip (the shear ties `t` to the horizontal
/// offset), so a rectangular `(phi, theta)` box would be mostly empty.
pub fn angular_strip(spec: &SectorSpec, bins: usize, seed: u64) -> Result<Vec<StripBin>> {
    let (_, _, th, theta0) = angular_box(spec, seed)?;
    let space = spec.space;
    let g = GroupPoint::new(space, spec.direction.clone())?;
    let bins = bins.max(1);
    let width = 2.0 * th / bins as f64;
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); bins];
    for p in ball_sample(&g, spec.epsilon, 50_000, seed ^ 0x5a5a)? {
        let (_, phi) = crate::group::polar_of(space, &p.coords);
        let mut d = p.coords[1].atan2(p.coords[0]) - theta0;
        d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        let k = (((d + th) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        ranges[k].0 = ranges[k].0.min(phi);
        ranges[k].1 = ranges[k].1.max(phi);
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    Ok((0..bins)
        .filter_map(|k| {
            let (mut lo, mut hi) = ranges[k];
            for j in [k.wrapping_sub(1), k + 1] {
                if let Some(&(a, b)) = ranges.get(j) {
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
            }
            (lo <= hi).then(|| {
                let pad = 0.25 * (hi - lo).max(1e-9);
                StripBin {
                    theta_lo: theta0 - th + k as f64 * width,
                    theta_hi: theta0 - th + (k + 1) as f64 * width,
                    phi_lo: (lo - pad).max(-half_pi),
                    phi_hi: (hi + pad).min(half_pi),
                }
            })
        })
        .collect())
}

/// Monte-Carlo `|B(g, R) n G| / R^Q` for each radius.
///
/// On `H^1` points are drawn uniformly from the polar wedge
/// `{r_o <= rho <= R/r, (phi, theta) in box}` (exact volume) that contains `G n B(g, R)`
/// after undoing `tau_g delta_r`; elsewhere uniformly from `B(g, R)`.
pub fn volume_regularity(region: &SectorRegion, radii: &[f64], mc_count: usize, seed: u64) -> Result<Vec<VolumeRow>> {
    let spec = &region.spec;
    let space = spec.space;
    let q = space.q() as i32;
    let vol = space.unit_ball_volume();
    let base = GroupPoint::new(space, region.base.clone())?;
    let wedge = if space.is_heisenberg() && space.n == 1 {
        Some(angular_box(spec, seed ^ 0x3c3c)?)
    } else {
        None
    };
    radii
        .iter()
        .enumerate()
        .map(|(k, &radius)| {
            if radius <= 2.0 * spec.r_o * region.scale {
                return Err(Error::Argument(format!("radius {radius} must exceed 2 r_o r")));
            }
            let shard_seed = seed.wrapping_add(k as u64);
            let (hits, proposal_volume) = match wedge {
                Some((plo, phi_hi, th, theta0)) => {
                    let lo = spec.r_o;
                    let hi = radius / region.scale;
                    let (lq, hq) = (lo.powi(q), hi.powi(q));
                    let wedge_volume = (hq - lq) / q as f64 * (phi_hi - plo) * 2.0 * th * region.scale.powi(q);
                    let hits = (0..mc_count)
                        .into_par_iter()
                        .chunks(4096)
                        .enumerate()
                        .map(|(c, idx)| {
                            let mut rng = ChaCha8Rng::seed_from_u64(shard_seed ^ (c as u64).wrapping_mul(0x9e37_79b9));
                            let mut count = 0usize;
                            for _ in idx {
                                let rho = (lq + rng.random::<f64>() * (hq - lq)).powf(1.0 / q as f64);
                                let phi = plo + rng.random::<f64>() * (phi_hi - plo);
                                let theta = theta0 + th * (2.0 * rng.random::<f64>() - 1.0);
                                let mut w = crate::group::polar_point(space, rho, phi, &[theta.cos(), theta.sin()]);
                                dilate_in_place(space, &mut w, region.scale);
                                let mut p = vec![0.0; space.dim()];
                                compose_into(space, &region.base, &w, &mut p);
                                if norm_of(space, &w) < radius && sector_contains(region, &p) {
                                    count += 1;
                                }
                            }
                            count
                        })
                        .sum::<usize>();
                    (hits, wedge_volume)
                }
                None => {
                    let pts = ball_sample(&base, radius, mc_count, shard_seed)?;
                    let hits = pts.par_iter().filter(|p| sector_contains(region, &p.coords)).count();
                    (hits, vol * radius.powi(q))
                }
            };
            let f = hits as f64 / mc_count as f64;
            let scale = proposal_volume / radius.powi(q);
            Ok(VolumeRow {
                radius,
                ratio: scale * f,
                std_error: scale * (f * (1.0 - f) / mc_count as f64).sqrt(),
            })
        })
        .collect()
}

/// Analytic lower bar `|delta_{0.99 R/(1+beta)} B(g~, eps)| / R^Q`.
pub fn volume_lower_bar(spec: &SectorSpec) -> f64 {
    let q = spec.space.q() as i32;
    (0.99 / (1.0 + spec.beta)).powi(q) * spec.epsilon.powi(q) * spec.space.unit_ball_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::VectorFieldId;

    fn spec() -> (RieszKernel, SectorSpec) {
        let k = RieszKernel::new(Space::heisenberg(1), VectorFieldId::X(1)).unwrap();
        let s = find_direction_point(&k, 64, 7).unwrap();
        (k, s)
    }

    #[test]
    fn direction_point_contract() {
        let (_, s) = spec();
        let d = norm_of(s.space, &s.direction);
        assert!((d - 1.0).abs() < 1e-10);
        assert!(s.r_o > 1.0 / s.epsilon);
        assert!(s.alpha >= 1.0 - s.c_rho * s.epsilon && s.beta <= 1.0 + s.c_rho * s.epsilon);
        assert!(s.margin > 0.5);
        let (_, again) = spec();
        assert_eq!(s, again);
    }

    #[test]
    fn membership_examples() {
        let (_, s) = spec();
        let g = GroupPoint::heisenberg(&[0.3], &[-1.0], 2.0).unwrap();
        let region = scaled_sector(&s, &g, 1.0).unwrap();
        let on_ray = region.point(2.0 * s.r_o, &s.direction);
        assert!(sector_contains(&region, &on_ray));
        let near = region.point(0.5 * s.r_o * s.alpha / s.beta, &s.direction);
        assert!(!sector_contains(&region, &near));
        // monotone along the generating ray
        let mut seen = false;
        for k in 0..200 {
            let sv = 0.5 * s.r_o + k as f64 * 0.05 * s.r_o;
            let inside = sector_contains(&region, &region.point(sv, &s.direction));
            assert!(!(seen && !inside));
            seen |= inside;
            if sv >= region.s_min() {
                assert!(inside);
            }
        }
    }

    #[test]
    fn membership_is_translation_equivariant() {
        let (_, s) = spec();
        let g = GroupPoint::heisenberg(&[0.3], &[-1.0], 2.0).unwrap();
        let h = GroupPoint::heisenberg(&[-2.0], &[0.5], 1.0).unwrap();
        let r1 = scaled_sector(&s, &g, 1.0).unwrap();
        let r2 = scaled_sector(&s, &h.compose(&g).unwrap(), 1.0).unwrap();
        for p in ball_sample(&g, 4.0 * s.r_o, 400, 3).unwrap() {
            let hp = h.compose(&p).unwrap();
            assert_eq!(sector_contains(&r1, &p.coords), sector_contains(&r2, &hp.coords));
        }
    }
}

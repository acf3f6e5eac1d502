use approx::assert_relative_eq;
use hkit::group::{GroupPoint, Space, VectorFieldId};
use hkit::quadrature::QuadratureConfig;
use hkit::riesz::{
    calibrate_constant, calibration_sample, default_calibration, nonvanishing_report, riesz_formula_eval,
    riesz_subordination_eval, zero_scan, RieszKernel,
};
use hkit::scalar::gamma;

/// `-(2n+1) Gamma(n+1/2) 4^(n+1/2) / (2 sqrt(pi) (4 pi)^(n+1))`, obtained by doing the
/// `h`-integral of the subordination formula in closed form.
fn analytic_constant(n: usize) -> f64 {
    let nf = n as f64;
    let pi = std::f64::consts::PI;
    -(2.0 * nf + 1.0) * gamma(nf + 0.5) * 4f64.powf(nf + 0.5) / (2.0 * pi.sqrt() * (4.0 * pi).powf(nf + 1.0))
}

#[test]
fn calibration_matches_closed_constant() {
    let space = Space::heisenberg(1);
    for j in [VectorFieldId::X(1), VectorFieldId::Y(1)] {
        let cal = default_calibration(space, j).unwrap();
        eprintln!("{j}: {:?}", cal);
        assert_relative_eq!(
            cal.constant_re,
            -3.0 / (8.0 * std::f64::consts::PI.powi(2)),
            max_relative = 1e-7
        );
        assert!(cal.constant_im.abs() < 1e-9);
    }
}

#[test]
fn calibration_on_h2() {
    let space = Space::heisenberg(2);
    let cal = calibrate_constant(
        VectorFieldId::Y(2),
        &calibration_sample(space, 8),
        &QuadratureConfig::default(),
    )
    .unwrap();
    assert_relative_eq!(cal.constant_re, analytic_constant(2), max_relative = 1e-7);
}

#[test]
fn calibration_is_sample_and_scale_independent() {
    let space = Space::heisenberg(1);
    let cfg = QuadratureConfig::default();
    let j = VectorFieldId::X(1);
    let a = calibrate_constant(j, &calibration_sample(space, 9), &cfg).unwrap();
    let b = calibrate_constant(j, &calibration_sample(space, 10), &cfg).unwrap();
    let dilated: Vec<_> = calibration_sample(space, 9)
        .iter()
        .map(|g| g.dilate(3.0).unwrap())
        .collect();
    let c = calibrate_constant(j, &dilated, &cfg).unwrap();
    assert_relative_eq!(a.constant_re, b.constant_re, max_relative = 1e-4);
    assert_relative_eq!(a.constant_re, c.constant_re, max_relative = 1e-4);
}

#[test]
fn inversion_parity() {
    let cfg = QuadratureConfig::default();
    let j = VectorFieldId::X(1);
    // on {t = 0} and on {y_1 = 0} inversion flips the sign
    for g in [
        GroupPoint::heisenberg(&[0.3], &[-0.8], 0.0).unwrap(),
        GroupPoint::heisenberg(&[0.3], &[0.0], 0.45).unwrap(),
    ] {
        let a = riesz_formula_eval(j, &g, &cfg, None).unwrap().raw;
        let b = riesz_formula_eval(j, &g.inverse(), &cfg, None).unwrap().raw;
        assert_relative_eq!(a.norm(), b.norm(), max_relative = 1e-12);
        assert_relative_eq!(a.re, -b.re, max_relative = 1e-12);
    }
    // off those sets it does not, and the subordination path agrees
    let g = GroupPoint::heisenberg(&[0.3], &[-0.8], 0.45).unwrap();
    let a: f64 = riesz_subordination_eval(j, &g, &cfg).unwrap();
    let b: f64 = riesz_subordination_eval(j, &g.inverse(), &cfg).unwrap();
    let fa = riesz_formula_eval(j, &g, &cfg, None).unwrap().raw.re;
    let fb = riesz_formula_eval(j, &g.inverse(), &cfg, None).unwrap().raw.re;
    assert_relative_eq!(a / b, fa / fb, max_relative = 1e-8);
    assert!((a.abs() / b.abs() - 1.0).abs() > 0.1);
    // the reflection (x, y, t) -> (x, -y, -t) is an exact symmetry
    let r = GroupPoint::heisenberg(&[0.3], &[0.8], -0.45).unwrap();
    assert_relative_eq!(riesz_subordination_eval(j, &r, &cfg).unwrap(), a, max_relative = 1e-9);
}

#[test]
fn subordination_homogeneity() {
    let cfg = QuadratureConfig::default();
    let g = GroupPoint::heisenberg(&[0.2], &[-0.9], -0.4).unwrap();
    let base = riesz_subordination_eval(VectorFieldId::X(1), &g, &cfg).unwrap();
    assert_relative_eq!(base, -0.069_936_925_930_469_35, max_relative = 1e-7);
    for r in [0.5f64, 2.0, 7.0] {
        let v = riesz_subordination_eval(VectorFieldId::X(1), &g.dilate(r).unwrap(), &cfg).unwrap();
        assert_relative_eq!(v * r.powi(4), base, max_relative = 1e-8);
    }
}

#[test]
fn euclidean_oracle_n2_n3() {
    let cfg = QuadratureConfig::default();
    for n in [2usize, 3] {
        let mut x = vec![0.0; n];
        for (k, v) in x.iter_mut().enumerate() {
            *v = 0.3 + 0.4 * k as f64;
        }
        let g = GroupPoint::abelian(&x).unwrap();
        let c = gamma((n as f64 + 1.0) / 2.0) * std::f64::consts::PI.powf(-(n as f64 + 1.0) / 2.0);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let want = -c * x[n - 1] * r2.powf(-(n as f64 + 1.0) / 2.0);
        let got = riesz_subordination_eval(VectorFieldId::X(n), &g, &cfg).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-8);
    }
}

#[test]
fn zero_scan_is_refinement_stable() {
    let cfg = QuadratureConfig::default();
    let a = zero_scan(1, 64, &cfg).unwrap();
    let b = zero_scan(1, 128, &cfg).unwrap();
    eprintln!("{a:?}");
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    for (p, q) in a.iter().zip(&b) {
        assert!((p.phi - q.phi).abs() < 1e-6);
        assert!(p.phi.abs() > 0.1);
    }
}

#[test]
fn near_zero_fraction_shrinks() {
    let k = RieszKernel::new(Space::heisenberg(1), VectorFieldId::X(1)).unwrap();
    let mut last = f64::INFINITY;
    for grid in [32, 64, 128] {
        let r = nonvanishing_report(&k, grid, 1e-6).unwrap();
        eprintln!("{r:?}");
        assert!(r.near_zero_fraction < last);
        assert!(r.max_distance_to_locus <= 2.0);
        last = r.near_zero_fraction;
    }
}

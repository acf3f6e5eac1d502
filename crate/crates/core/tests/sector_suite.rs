use hkit::group::{GroupPoint, Space, VectorFieldId};
use hkit::riesz::RieszKernel;
use hkit::sector::{
    find_direction_point, lower_bound_verify, scaled_sector, volume_lower_bar, volume_regularity, with_aperture,
};

fn kernel() -> RieszKernel {
    RieszKernel::new(Space::heisenberg(1), VectorFieldId::X(1)).unwrap()
}

#[test]
fn lower_bound_and_sign() {
    let k = kernel();
    let spec = find_direction_point(&k, 64, 11).unwrap();
    eprintln!("{spec:?}");
    let g = GroupPoint::heisenberg(&[0.2], &[0.1], -0.3).unwrap();
    let region = scaled_sector(&spec, &g, 1.0).unwrap();
    let rep = lower_bound_verify(&k, &region, 10_000, 5).unwrap();
    eprintln!("{rep:?}");
    assert!(rep.sign_constant);
    assert!(rep.c_est >= 0.4 * spec.k_ref.abs());
    let half = with_aperture(&spec, spec.epsilon / 2.0, 11).unwrap();
    let rep2 = lower_bound_verify(&k, &scaled_sector(&half, &g, 1.0).unwrap(), 10_000, 5).unwrap();
    eprintln!("{rep2:?}");
    assert!(rep2.c_est >= rep.c_est);
}

#[test]
fn scaled_sector_is_homogeneous() {
    let k = kernel();
    let spec = find_direction_point(&k, 64, 11).unwrap();
    let g = GroupPoint::heisenberg(&[0.2], &[0.1], -0.3).unwrap();
    let a = lower_bound_verify(&k, &scaled_sector(&spec, &g, 1.0).unwrap(), 4000, 8).unwrap();
    for r in [0.25, 3.0] {
        let b = lower_bound_verify(&k, &scaled_sector(&spec, &g, r).unwrap(), 4000, 8).unwrap();
        assert!((b.c_est / a.c_est - 1.0).abs() < 0.1);
        assert!(
            b.inner_distance_ratio >= 1.0 - 1e-9 && b.inner_distance_ratio < 1.05,
            "{b:?}"
        );
    }
}

#[test]
fn volume_band() {
    let k = kernel();
    let spec = find_direction_point(&k, 64, 11).unwrap();
    let g = GroupPoint::heisenberg(&[0.2], &[0.1], -0.3).unwrap();
    let region = scaled_sector(&spec, &g, 1.0).unwrap();
    let radii: Vec<f64> = [3.0, 10.0, 30.0, 100.0].iter().map(|m| m * spec.r_o).collect();
    let rows = volume_regularity(&region, &radii, 200_000, 3).unwrap();
    eprintln!("{rows:?} bar {}", volume_lower_bar(&spec));
    let lo = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.ratio));
    let hi = rows.iter().fold(0.0f64, |m, r| m.max(r.ratio));
    assert!(lo > 0.0 && hi / lo < 10.0);
    assert!(lo >= volume_lower_bar(&spec));
    assert!(hi <= Space::heisenberg(1).unit_ball_volume());
    let moved = scaled_sector(&spec, &GroupPoint::heisenberg(&[5.0], &[-3.0], 8.0).unwrap(), 1.0).unwrap();
    let rows2 = volume_regularity(&moved, &radii, 200_000, 3).unwrap();
    for (a, b) in rows.iter().zip(&rows2) {
        assert!((a.ratio - b.ratio).abs() <= 3.0 * a.std_error.max(b.std_error) + 1e-12);
    }
}

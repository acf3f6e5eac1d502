use hkit::bmo::{ef_sets, FnField};
use hkit::dyadic::DyadicSystem;
use hkit::grid::Grid;
use hkit::group::norm_of;
use hkit::riesz::RieszKernel;
use hkit::sector::find_direction_point;
use hkit::{Space, VectorFieldId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ef_certificates_on_random_cubes() {
    let space = Space::heisenberg(1);
    let kernel = RieszKernel::new(space, VectorFieldId::X(1)).unwrap();
    let spec = find_direction_point(&kernel, 64, 7).unwrap();
    let grid = Grid::centered(space, &[1.0, 1.0, 1.0], &[32, 32, 96]).unwrap();
    let sys = DyadicSystem::build(&grid, 3, 0.5, 11).unwrap();
    let pool = sys.interior_cubes(32);
    assert!(pool.len() >= 20, "only {} candidate cubes", pool.len());
    let b = FnField(move |p: &[f64]| norm_of(space, p).ln() + 0.3 * p[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let k0 = 2.0 * spec.r_o;
    let mut consts = Vec::new();
    for k in 0..20 {
        let (level, idx) = pool[rng.random_range(0..pool.len())];
        let ef = ef_sets(&kernel, &spec, &b, &sys, level, idx, k0, 20, k as u64).unwrap();
        let r = &ef.report;
        assert!(r.passed(), "{r:?}");
        assert!(r.w > 0.0);
        consts.push(r.property1_constant);
    }
    let (lo, hi) = consts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |a, &c| (a.0.min(c), a.1.max(c)));
    println!("property (1) constant in [{lo:.3e}, {hi:.3e}]");
    assert!(lo > 0.0 && hi / lo < 100.0);
}

#[test]
fn constant_b_gives_trivial_certificate() {
    let space = Space::heisenberg(1);
    let kernel = RieszKernel::new(space, VectorFieldId::X(1)).unwrap();
    let spec = find_direction_point(&kernel, 64, 7).unwrap();
    let grid = Grid::centered(space, &[1.0, 1.0, 1.0], &[16, 16, 32]).unwrap();
    let sys = DyadicSystem::build(&grid, 1, 0.5, 11).unwrap();
    let (level, idx) = sys.interior_cubes(8)[0];
    let b = FnField(|_: &[f64]| 4.0);
    let ef = ef_sets(&kernel, &spec, &b, &sys, level, idx, 2.0 * spec.r_o, 16, 1).unwrap();
    assert!(ef.report.degenerate && ef.report.w == 0.0 && ef.report.property2_ok);
}

use hkit::bmo::{
    ap_constant, bmo_norm, bmo_norm_weighted, local_mean_oscillation, mean_oscillation, median, median_masses, Weight,
};
use hkit::dyadic::DyadicSystem;
use hkit::grid::{Ball, BallFamily, Grid, SampledFunction};
use hkit::group::norm_of;
use hkit::Space;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h1() -> Space {
    Space::heisenberg(1)
}

fn log_norm(grid: &Grid) -> SampledFunction {
    let s = grid.space;
    SampledFunction::from_fn(grid, |p| norm_of(s, p).ln()).unwrap()
}

#[test]
fn depth_six_system_is_certified() {
    let grid = Grid::centered(h1(), &[1.5, 1.5, 1.5], &[40, 40, 40]).unwrap();
    let sys = DyadicSystem::build(&grid, 6, 0.5, 17).unwrap();
    let rep = sys.verify(2000, 20, 5);
    for l in &rep.levels {
        println!(
            "level {} cubes {} interior {} r1 {:.4e} r2 {:.4e} s/r1 {:.3} s/r2 {:.3} viol {}/{}",
            l.level,
            l.cubes,
            l.interior_cubes,
            l.r_inner,
            l.r_outer,
            l.side_over_r_inner,
            l.side_over_r_outer,
            l.grid_violations,
            l.point_violations
        );
        assert!(l.interior_cubes > 0);
        assert!(l.sampled_cubes > 0);
    }
    assert!(rep.partition_ok && rep.nesting_ok && rep.certificates_ok, "{rep:?}");
    assert!(rep.max_radius_ratio < 10.0);
}

#[test]
fn medians_satisfy_both_inequalities() {
    let grid = Grid::centered(h1(), &[1.0, 1.0, 1.0], &[20, 20, 20]).unwrap();
    let b = SampledFunction::from_fn(&grid, |p| (3.0 * p[0]).sin() + p[2] * p[1] + (p[0] * 7.0).floor()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tested = 0;
    while tested < 1000 {
        let c = vec![
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.3..0.3),
        ];
        let ball = Ball::new(c, rng.random_range(0.1..0.5));
        let Ok(cells) = grid.cells_in_ball(&ball) else { continue };
        if cells.is_empty() {
            continue;
        }
        let m = median(&b, &cells).unwrap();
        let (less, more, n) = median_masses(&b, &cells, m);
        assert!(2 * less <= n && 2 * more <= n);
        // smallest admissible value: every smaller sample value fails
        for v in b.values_on(&cells).into_iter().filter(|&v| v < m) {
            let (_, more_v, _) = median_masses(&b, &cells, v);
            assert!(2 * more_v > n);
        }
        tested += 1;
    }
}

#[test]
fn local_oscillation_is_monotone_and_constants_vanish() {
    let grid = Grid::centered(h1(), &[1.5, 1.5, 1.5], &[32, 32, 32]).unwrap();
    let sys = DyadicSystem::build(&grid, 2, 0.5, 3).unwrap();
    let b = log_norm(&grid);
    let c = SampledFunction::constant(&grid, -2.25).unwrap();
    let lambdas = [0.01, 0.05, 0.1, 0.25, 0.45];
    for lev in &sys.levels {
        for cube in lev.cubes.iter().filter(|c| c.cells.len() >= 8) {
            let ws: Vec<f64> = lambdas
                .iter()
                .map(|&l| local_mean_oscillation(&b, &cube.cells, l).unwrap())
                .collect();
            assert!(ws.windows(2).all(|w| w[0] >= w[1]), "{ws:?}");
            for &l in &lambdas {
                assert_eq!(local_mean_oscillation(&c, &cube.cells, l).unwrap(), 0.0);
            }
        }
    }
    let fam = BallFamily::dyadic(&grid, 1.0, 3, 4);
    assert_eq!(bmo_norm(&c, &fam).unwrap().value, 0.0);
    let nu = Weight::power(&grid, 0.5).unwrap();
    assert_eq!(bmo_norm_weighted(&c, &nu, &fam).unwrap().value, 0.0);
    for ball in &fam.balls {
        assert_eq!(mean_oscillation(&c, ball).unwrap(), 0.0);
    }
    // one-sided oscillation chain: positive norm forces a positive local oscillation
    assert!(bmo_norm(&b, &fam).unwrap().value > 0.0);
    let lambda = hkit::bmo::default_lambda(h1());
    let sup_w = sys
        .levels
        .iter()
        .flat_map(|l| l.cubes.iter())
        .filter(|c| c.cells.len() >= 8)
        .map(|c| local_mean_oscillation(&b, &c.cells, lambda).unwrap())
        .fold(0.0, f64::max);
    assert!(sup_w > 0.0);
}

#[test]
fn log_norm_bmo_is_refinement_stable() {
    let base = Grid::centered(h1(), &[1.5, 1.5, 1.5], &[12, 12, 12]).unwrap();
    let fam = BallFamily::ladder(&base, &[1.0, 0.5, 0.25], 5);
    let mut norms = Vec::new();
    let mut sup_abs = Vec::new();
    for f in [1, 2, 4, 8] {
        let g = base.refined(f);
        let b = log_norm(&g);
        norms.push(bmo_norm(&b, &fam).unwrap().value);
        sup_abs.push(b.lp_norm(f64::INFINITY));
    }
    println!("bmo {norms:?} sup|b| {sup_abs:?} over {}", fam.description);
    for w in norms.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.05 * w[1], "{norms:?}");
    }
    // the sup norm keeps growing with resolution (log singularity at the origin)
    assert!(sup_abs.windows(2).all(|w| w[1] > w[0] + 0.3));
    // and over growing domains B(0, R)
    let space = h1();
    let grow: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
        .iter()
        .map(|&r: &f64| (r * norm_of(space, &[1.0, 0.0, 0.0])).ln())
        .collect();
    assert!(grow.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn power_weights_have_increasing_ap_constants() {
    let grid = Grid::centered(h1(), &[1.0, 1.0, 1.0], &[32, 32, 32]).unwrap();
    let fam = BallFamily::dyadic(&grid, 0.8, 3, 5);
    assert!((ap_constant(&Weight::unit(&grid), 2.0, &fam).unwrap().value - 1.0).abs() < 1e-12);
    let mut prev = 1.0;
    for a in [0.25, 0.5, 1.0, 2.0] {
        let v = ap_constant(&Weight::power(&grid, a).unwrap(), 2.0, &fam).unwrap().value;
        println!("a {a} [w]_A2 {v}");
        assert!(v.is_finite() && v > prev);
        prev = v;
    }
}

use hkit::acceptance::theta_families;
use hkit::bmo::{median, FnField};
use hkit::commutator::{
    annulus_decay, atom_pairing, ball_indicator, commutator_apply, default_pv_cut, h1b_condition, h1b_growth,
    hilbert_cross_check, l2_gain, lb_growth, line_fit, llogl_functional, make_atom, phi_test_function,
    psi_test_function, random_bumps, riesz_apply, theta_fit, weak11_experiment, weak_l1_report, AtomPattern,
};
use hkit::grid::{Ball, CellSet, Grid, SampledFunction};
use hkit::group::norm_of;
use hkit::riesz::RieszKernel;
use hkit::sector::find_direction_point;
use hkit::{Space, VectorFieldId};

fn h1() -> Space {
    Space::heisenberg(1)
}

fn kernel() -> RieszKernel {
    RieszKernel::new(h1(), VectorFieldId::X(1)).unwrap()
}

fn grid(cells: usize) -> Grid {
    Grid::centered(h1(), &[1.0, 1.0, 1.0], &[cells, cells, cells]).unwrap()
}

fn sup(f: &SampledFunction) -> f64 {
    f.lp_norm(f64::INFINITY)
}

#[test]
fn constant_symbol_commutes_exactly() {
    let k = kernel();
    let g = grid(14);
    let cut = default_pv_cut(&g);
    let f = random_bumps(&g, 3, (0.3, 0.6), 4).unwrap();
    for c in [0.0, 1.0, -3.25, 1e3] {
        let b = SampledFunction::constant(&g, c).unwrap();
        let u = commutator_apply(&k, &b, &f, cut).unwrap();
        assert!(sup(&u) <= 1e-10, "c = {c}: {}", sup(&u));
    }
    let b = SampledFunction::from_fn(&g, |p| p[1] + 0.5 * p[2]).unwrap();
    assert!(sup(&commutator_apply(&k, &b, &f, cut).unwrap()) > 1e-4);
}

#[test]
fn fused_commutator_matches_the_difference_of_applications() {
    let k = kernel();
    let g = grid(12);
    let cut = default_pv_cut(&g);
    let f = random_bumps(&g, 2, (0.4, 0.7), 9).unwrap();
    let b = SampledFunction::from_fn(&g, |p| (2.0 * p[0]).sin() + p[2] * p[2]).unwrap();
    let fused = commutator_apply(&k, &b, &f, cut).unwrap();
    let rf = riesz_apply(&k, &f, cut).unwrap();
    let bf = b.zip_with(&f, |x, y| x * y).unwrap();
    let rbf = riesz_apply(&k, &bf, cut).unwrap();
    let scale = sup(&fused);
    for i in 0..g.len() {
        let direct = b.values[i] * rf.values[i] - rbf.values[i];
        assert!((fused.values[i] - direct).abs() <= 1e-10 * scale.max(1.0), "cell {i}");
    }
}

#[test]
fn commutator_is_bilinear() {
    let k = kernel();
    let g = grid(10);
    let cut = default_pv_cut(&g);
    let f1 = random_bumps(&g, 2, (0.3, 0.6), 1).unwrap();
    let f2 = random_bumps(&g, 2, (0.3, 0.6), 2).unwrap();
    let b1 = SampledFunction::from_fn(&g, |p| p[0] * p[1]).unwrap();
    let b2 = SampledFunction::from_fn(&g, |p| p[2].cos()).unwrap();
    let f = f1.zip_with(&f2, |x, y| 2.0 * x - 0.5 * y).unwrap();
    let b = b1.zip_with(&b2, |x, y| x + 3.0 * y).unwrap();
    let lhs = commutator_apply(&k, &b, &f, cut).unwrap();
    let c = |b: &SampledFunction, f: &SampledFunction| commutator_apply(&k, b, f, cut).unwrap();
    let parts = [
        (2.0, c(&b1, &f1)),
        (-0.5, c(&b1, &f2)),
        (6.0, c(&b2, &f1)),
        (-1.5, c(&b2, &f2)),
    ];
    let scale = sup(&lhs);
    for i in 0..g.len() {
        let rhs: f64 = parts.iter().map(|(w, u)| w * u.values[i]).sum();
        assert!((lhs.values[i] - rhs).abs() <= 1e-12 * scale, "cell {i}");
    }
}

#[test]
fn hilbert_cross_check_converges() {
    let k = RieszKernel::new(Space::abelian(1), VectorFieldId::X(1)).unwrap();
    let coarse = hilbert_cross_check(&k, 512, 4.0, 1.0).unwrap();
    let fine = hilbert_cross_check(&k, 2048, 4.0, 1.0).unwrap();
    println!("hilbert rel L2: {:.3e} (512) {:.3e} (2048)", coarse.rel_l2, fine.rel_l2);
    assert!(coarse.rel_l2 < 0.02);
    assert!(fine.rel_l2 < coarse.rel_l2);
}

#[test]
fn l2_gain_is_stable_under_refinement() {
    let k = kernel();
    let gains: Vec<f64> = [12usize, 16, 24]
        .iter()
        .map(|&c| {
            let g = grid(c);
            let f = SampledFunction::from_fn(&g, |p| {
                let s = norm_of(h1(), p) / 0.7;
                if s < 1.0 {
                    (1.0 - s * s).powi(3)
                } else {
                    0.0
                }
            })
            .unwrap();
            l2_gain(&k, &f, default_pv_cut(&g)).unwrap()
        })
        .collect();
    println!("L2 gains {gains:?}");
    for w in gains.windows(2) {
        assert!((w[1] - w[0]).abs() < 0.15 * w[1], "{gains:?}");
    }
}

#[test]
fn phi_and_psi_test_functions() {
    let g = grid(16);
    let b = SampledFunction::from_fn(&g, |p| p[0] + 0.3 * p[2] * p[2]).unwrap();
    let ball = Ball::new(vec![0.1, 0.0, 0.0], 0.6);
    let phi = phi_test_function(&b, &ball).unwrap();
    assert_eq!(phi.function.values.iter().sum::<f64>(), 0.0);
    assert!(phi.function.values.iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
    assert_eq!(phi.e1.len(), phi.e2.len());
    let cells = g.cells_in_ball(&ball).unwrap();
    let m = median(&b, &cells).unwrap();
    let mean_dev = cells.cells.iter().map(|&i| (b.values[i] - m).abs()).sum::<f64>() / cells.len() as f64;
    assert!(
        (phi.oscillation - mean_dev).abs() < 1e-12,
        "{} vs {mean_dev}",
        phi.oscillation
    );

    let set = CellSet::new((0..g.len()).step_by(7).collect());
    let psi = psi_test_function(&b, &set).unwrap();
    for i in 0..g.len() {
        let want = if set.contains(i) { b.values[i].signum() } else { 0.0 };
        assert_eq!(psi.values[i], if b.values[i] == 0.0 { 0.0 } else { want });
    }
}

#[test]
fn atoms_have_mean_zero_and_the_size_bound() {
    let g = grid(20);
    for pattern in [AtomPattern::TwoBlock, AtomPattern::Radial] {
        for q in [2.0, 4.0, f64::INFINITY] {
            let a = make_atom(&g, &Ball::new(vec![0.0, 0.1, -0.1], 0.5), pattern, q).unwrap();
            assert!(a.mean().abs() < 1e-12, "{pattern:?} q={q}: mean {}", a.mean());
            assert!(a.lq_norm() <= a.size_bound() * (1.0 + 1e-12), "{pattern:?} q={q}");
            assert!(a.lq_norm() >= 0.99 * a.size_bound());
        }
    }
}

#[test]
fn llogl_of_a_normalized_indicator() {
    let g = grid(20);
    for r in [0.3, 0.6] {
        let f = ball_indicator(&g, &Ball::new(vec![0.0, 0.0, 0.0], r)).unwrap();
        let measure = 1.0 / f.values.iter().cloned().fold(0.0, f64::max);
        let closed = 1.0 + (1.0 / measure).ln().max(0.0);
        assert!((llogl_functional(&f, 1.0) - closed).abs() < 1e-12 * closed);
        assert!((f.integral() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn distribution_report_is_monotone() {
    let k = kernel();
    let g = grid(12);
    let f = random_bumps(&g, 2, (0.3, 0.6), 3).unwrap();
    let b = SampledFunction::from_fn(&g, |p| norm_of(h1(), p).ln()).unwrap();
    let u = commutator_apply(&k, &b, &f, default_pv_cut(&g)).unwrap();
    let rep = weak_l1_report(&u, Some(&f), &[1.0, 0.01, 0.1, 10.0]);
    assert_eq!(rep.thresholds, vec![0.01, 0.1, 1.0, 10.0]);
    assert!(rep.measures.windows(2).all(|w| w[1] <= w[0]));
    assert!(rep.llogl.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn h1b_vanishes_for_constants_and_grows_logarithmically() {
    let k = kernel();
    let g = Grid::centered(h1(), &[1.0, 1.0, 1.0], &[20, 20, 40]).unwrap();
    let ball = Ball::new(vec![0.1, 0.0, 0.05], 0.5);
    let atom = make_atom(&g, &ball, AtomPattern::TwoBlock, 2.0).unwrap();
    let g_tilde = [0.15, 0.0, 0.05];
    let c = SampledFunction::constant(&g, -1.5).unwrap();
    assert_eq!(atom_pairing(&c, &atom).unwrap(), 0.0);
    assert_eq!(h1b_condition(&k, &c, &atom, &g_tilde, 64.0, 1e4).unwrap(), 0.0);

    let b = SampledFunction::from_fn(&g, |p| norm_of(h1(), p).ln()).unwrap();
    let radii: Vec<f64> = (1..=6).map(|i| 32.0 * 2f64.powi(i)).collect();
    let rep = h1b_growth(&k, &b, &atom, &g_tilde, 64.0, &radii).unwrap();
    println!("h1b: pairing {:.4e} fit {:?}", rep.pairing, rep.fit);
    assert!(rep.pairing.abs() > 1e-3);
    assert!(rep.fit.slope > 0.0 && rep.fit.r_squared > 0.99);
}

#[test]
fn lb_grows_logarithmically() {
    let k = kernel();
    let spec = find_direction_point(&k, 64, 11).unwrap();
    let g = Grid::centered(h1(), &[1.0, 1.0, 1.0], &[20, 20, 40]).unwrap();
    let b = SampledFunction::from_fn(&g, |p| norm_of(h1(), p).ln()).unwrap();
    let ball = Ball::new(vec![0.1, 0.0, 0.05], 0.5);
    let ns: Vec<f64> = (1..=6).map(|i| spec.r_o * 0.5 * 2f64.powi(i)).collect();
    let rep = lb_growth(&k, &spec, &b, &ball, &[0.15, 0.0, 0.05], &ns, 12, 5).unwrap();
    println!("lb: oscillation {:.4e} fit {:?}", rep.oscillation, rep.fit);
    assert!(rep.oscillation > 0.0);
    assert!(rep.fit.slope > 0.0 && rep.fit.r_squared > 0.99);
}

#[test]
fn weak11_pointwise_error_is_first_order() {
    let k = kernel();
    let b = FnField(|p: &[f64]| (0.7 * p[0] - 0.4 * p[1] + 0.3 * p[2]).sin() + 0.2 * p[0] * p[1]);
    let g = Grid::centered(h1(), &[1.5, 1.5, 1.5], &[12, 12, 96]).unwrap();
    let far = vec![vec![1.4, 0.3, 1.2], vec![-1.3, 1.1, -0.9]];
    let g_prime = g.center(g.index_of(&[0.0, 0.0, 0.0]).unwrap());
    let lam: Vec<f64> = (0..10).map(|i| 0.01 * 2f64.powi(i)).collect();
    let rep = weak11_experiment(&k, &b, &g_prime, &[1.0, 0.5, 0.25], &g, &far, &lam, 8).unwrap();
    for r in &rep.rows {
        println!(
            "eps {} max err {:.3e} weak sup {:.4}",
            r.epsilon, r.max_error, r.normalized_weak_sup
        );
    }
    assert!(rep.order.slope >= 0.9, "{:?}", rep.order);
    assert!(weak11_experiment(&k, &b, &g_prime, &[0.01], &g, &far, &lam, 8).is_err());
}

#[test]
fn annulus_term_decays_like_l_over_two_to_the_l() {
    let k = kernel();
    let g = grid(16);
    let atom = make_atom(&g, &Ball::new(vec![0.0, 0.0, 0.0], 0.5), AtomPattern::TwoBlock, 2.0).unwrap();
    let b = FnField(|p: &[f64]| norm_of(Space::heisenberg(1), p).max(1e-12).ln());
    let rows = annulus_decay(&k, &b, &atom, 7).unwrap();
    for r in &rows {
        println!(
            "level {} I2 {:.4e} full {:.4e} normalized {:.4}",
            r.level, r.i2, r.full, r.normalized
        );
    }
    let tail: Vec<f64> = rows[2..].iter().map(|r| r.normalized).collect();
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(lo > 0.0 && hi / lo < 3.0, "{tail:?}");
}

#[test]
fn theta_b_fits_are_reported() {
    let k = kernel();
    let g = Grid::centered(h1(), &[2.0, 2.0, 4.0], &[16, 16, 32]).unwrap();
    let b = SampledFunction::from_fn(&g, |p| norm_of(h1(), p).ln()).unwrap();
    let lambdas: Vec<f64> = (0..6).map(|i| 0.02 * 2f64.powi(i)).collect();
    let mut thetas = Vec::new();
    for (name, fs) in theta_families(&g, 3).unwrap() {
        let fit = theta_fit(&k, &b, &name, &fs, &lambdas, default_pv_cut(&g)).unwrap();
        println!(
            "theta_b[{name}] = {:.4e} (max rel residual {:.2})",
            fit.theta, fit.max_rel_residual
        );
        assert!(!fit.rows.is_empty() && fit.rows.len() <= fs.len() * lambdas.len());
        assert!(fit.theta.is_finite() && fit.theta > 0.0);
        thetas.push(fit.theta);
    }
    let (lo, hi) = thetas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    println!("theta_b spread hi/lo = {:.2}", hi / lo);
}

#[test]
fn line_fit_recovers_a_line() {
    let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
    let fit = line_fit(&x, &y);
    assert!((fit.slope - 2.5).abs() < 1e-12 && (fit.intercept + 1.0).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
}

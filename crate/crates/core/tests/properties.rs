use hkit::bmo::{median, median_masses};
use hkit::grid::{CellSet, Grid, SampledFunction};
use hkit::heat::heat_eval;
use hkit::riesz::RieszKernel;
use hkit::{GroupPoint, QuadratureConfig, Space, VectorFieldId};
use proptest::prelude::*;

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, dim)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn h2_law_is_associative(a in coords(5), b in coords(5), c in coords(5)) {
        let s = Space::heisenberg(2);
        let (a, b, c) = (s.point(a).unwrap(), s.point(b).unwrap(), s.point(c).unwrap());
        let l = a.compose(&b).unwrap().compose(&c).unwrap();
        let r = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert!(close(&l.coords, &r.coords, 1e-13));
    }

    #[test]
    fn dilation_is_an_automorphism(a in coords(3), b in coords(3), r in 0.05..20.0f64) {
        let s = Space::heisenberg(1);
        let (a, b) = (s.point(a).unwrap(), s.point(b).unwrap());
        let l = a.compose(&b).unwrap().dilate(r).unwrap();
        let rr = a.dilate(r).unwrap().compose(&b.dilate(r).unwrap()).unwrap();
        prop_assert!(close(&l.coords, &rr.coords, 1e-13));
    }

    #[test]
    fn distance_is_left_invariant_and_symmetric(a in coords(3), b in coords(3), g in coords(3)) {
        let s = Space::heisenberg(1);
        let (a, b, g) = (s.point(a).unwrap(), s.point(b).unwrap(), s.point(g).unwrap());
        let d = a.distance(&b).unwrap();
        let dt = g.compose(&a).unwrap().distance(&g.compose(&b).unwrap()).unwrap();
        prop_assert!((d - dt).abs() <= 1e-12 * d.max(1.0));
        prop_assert!((d - b.distance(&a).unwrap()).abs() <= 1e-12 * d.max(1.0));
    }

    #[test]
    fn single_precision_matches_double(a in coords(3), b in coords(3)) {
        let s = Space::heisenberg(1);
        let a32: GroupPoint<f32> = s.point(a.iter().map(|v| *v as f32).collect()).unwrap();
        let b32: GroupPoint<f32> = s.point(b.iter().map(|v| *v as f32).collect()).unwrap();
        let a64 = a32.to_f64();
        let b64 = b32.to_f64();
        let c32 = a32.compose(&b32).unwrap().to_f64();
        let c64 = a64.compose(&b64).unwrap();
        prop_assert!(close(&c32.coords, &c64.coords, 1e-5));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn heat_kernel_scales(g in coords(3), h in 0.2..5.0f64) {
        let cfg = QuadratureConfig::default();
        let s = Space::heisenberg(1);
        let g = s.point(g.iter().map(|v| v * 0.5).collect()).unwrap();
        let lhs = heat_eval(&g, h, &cfg).unwrap().value;
        let rhs = h.powi(-2) * heat_eval(&g.dilate(1.0 / h.sqrt()).unwrap(), 1.0, &cfg).unwrap().value;
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs);
    }

    #[test]
    fn kernel_is_homogeneous(g in coords(3), r in 0.1..10.0f64) {
        let s = Space::heisenberg(1);
        let k = RieszKernel::new(s, VectorFieldId::Y(1)).unwrap();
        prop_assume!(hkit::group::norm_of(s, &g) > 0.1);
        let mut scratch = vec![0.0; 3];
        let e = vec![0.0; 3];
        let p = s.point(g.clone()).unwrap();
        let v = k.eval_pair(&g, &e, &mut scratch);
        let vr = k.eval_pair(&p.dilate(r).unwrap().coords, &e, &mut scratch);
        prop_assert!((vr * r.powi(4) - v).abs() <= 1e-10 * v.abs().max(1e-12));
    }

    #[test]
    fn median_splits_every_cell_set(vals in prop::collection::vec(-3i32..3, 8), pick in prop::collection::vec(0usize..512, 1..60)) {
        let g = Grid::centered(Space::heisenberg(1), &[1.0, 1.0, 1.0], &[8, 8, 8]).unwrap();
        let b = SampledFunction::from_fn(&g, |p| {
            let i = ((p[0] + 1.0) * 4.0) as usize;
            vals[i.min(7)] as f64 + 0.1 * p[1].signum()
        }).unwrap();
        let cells = CellSet::new(pick);
        let m = median(&b, &cells).unwrap();
        let (less, more, n) = median_masses(&b, &cells, m);
        prop_assert!(2 * less <= n && 2 * more <= n);
    }
}

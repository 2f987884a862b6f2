use bridgebound::bounds::report::format_float;
use bridgebound::bounds::{rho_gaussian_kernel, verify_coupling, verify_continuity};
use bridgebound::linalg::{Matrix, Vector};
use bridgebound::measures::{GaussianKernel, GaussianMeasure, GridLayout, GridMeasure, Support};
use bridgebound::metrics::{bures_sq, kl, kl_gaussian, w2_gaussian, w2_lp, w2_quantile};
use bridgebound::sinkhorn::{run, solve_bridge, Problem, SolveOptions};
use proptest::prelude::*;

fn atoms() -> impl Strategy<Value = GridMeasure> {
    prop::collection::btree_map(-400i32..400, 0.01f64..1.0, 1..12).prop_map(|m| {
        let (pts, w): (Vec<_>, Vec<_>) = m.into_iter().map(|(k, w)| (Vector::from_element(1, k as f64 / 100.0), w)).unzip();
        GridMeasure::normalized(Support::from_points(pts).unwrap(), Vector::from_vec(w)).unwrap()
    })
}

fn on_line(n: usize) -> impl Strategy<Value = GridMeasure> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(move |w| {
        let s = Support::from_layout(GridLayout::new(vec![-2.0], vec![2.0], n).unwrap());
        GridMeasure::normalized(s, Vector::from_vec(w)).unwrap()
    })
}

fn spd(d: usize) -> impl Strategy<Value = Matrix> {
    (prop::collection::vec(-1.0f64..1.0, d * d), 0.2f64..1.5).prop_map(move |(a, shift)| {
        let a = Matrix::from_vec(d, d, a);
        &a * a.transpose() + Matrix::identity(d, d) * shift
    })
}

fn gaussian(d: usize) -> impl Strategy<Value = GaussianMeasure> {
    (prop::collection::vec(-2.0f64..2.0, d), spd(d)).prop_map(|(m, c)| GaussianMeasure::new(Vector::from_vec(m), c).unwrap())
}

fn kernel(d: usize) -> impl Strategy<Value = GaussianKernel> {
    (prop::collection::vec(-1.0f64..1.0, d), prop::collection::vec(-0.4f64..0.4, d * d), spd(d)).prop_map(move |(a, b, t)| {
        let beta = Matrix::identity(d, d) + Matrix::from_vec(d, d, b);
        GaussianKernel::new(Vector::from_vec(a), beta, t).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_entropy_is_nonnegative_and_vanishes_on_the_diagonal(p in on_line(9), q in on_line(9)) {
        prop_assert!(kl(&p, &q).unwrap() >= -1e-15);
        prop_assert!(kl(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn gaussian_relative_entropy_is_nonnegative(a in gaussian(2), b in gaussian(2)) {
        prop_assert!(kl_gaussian(&a, &b).unwrap() >= -1e-12);
        prop_assert!(kl_gaussian(&a, &a).unwrap().abs() < 1e-10);
    }

    #[test]
    fn quantile_and_simplex_agree(a in atoms(), b in atoms()) {
        let q = w2_quantile(&a, &b).unwrap().0;
        prop_assert!((q - w2_lp(&a, &b).unwrap().0).abs() < 1e-10);
        prop_assert!((q - w2_quantile(&b, &a).unwrap().0).abs() < 1e-12);
    }

    #[test]
    fn w2_triangle_inequality(a in atoms(), b in atoms(), c in atoms()) {
        let d = |x: &GridMeasure, y: &GridMeasure| w2_quantile(x, y).unwrap().0;
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&a, &a) < 1e-12);
    }

    #[test]
    fn bures_is_symmetric_and_vanishes_on_the_diagonal(s in spd(3), t in spd(3)) {
        prop_assert!((bures_sq(&s, &t) - bures_sq(&t, &s)).abs() < 1e-9);
        prop_assert!(bures_sq(&s, &t) >= -1e-12);
        prop_assert!(bures_sq(&s, &s).abs() < 1e-9);
    }

    #[test]
    fn gaussian_w2_dominates_the_mean_gap(a in gaussian(2), b in gaussian(2)) {
        let w = w2_gaussian(&a, &b).unwrap().0;
        prop_assert!(w + 1e-12 >= (a.mean() - b.mean()).norm());
    }

    #[test]
    fn discretized_kernels_are_row_stochastic(k in kernel(1), n in 3usize..40) {
        let s = Support::from_layout(GridLayout::new(vec![-3.0], vec![3.0], n).unwrap());
        let g = k.discretize(&s, &s).unwrap();
        for row in g.rows().row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn coupling_bounds_hold(a in atoms(), b in atoms()) {
        for r in verify_coupling("p", &a.into(), &b.into()).unwrap() {
            prop_assert!(r.pass, "{} lhs {} rhs {}", r.name, r.lhs, r.rhs);
        }
    }

    #[test]
    fn entropic_continuity_holds_for_gaussians(mu in gaussian(2), k in kernel(2), l in kernel(2)) {
        let rho = rho_gaussian_kernel(&k);
        for r in verify_continuity("p", &mu.into(), &k.into(), &l.into(), rho).unwrap() {
            prop_assert!(r.pass, "{} lhs {} rhs {}", r.name, r.lhs, r.rhs);
        }
    }

    #[test]
    fn floats_round_trip_through_the_report_format(x in any::<f64>()) {
        let s = format_float(x);
        if x.is_nan() {
            prop_assert_eq!(s, "nan");
        } else {
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sinkhorn_pins_marginals_and_approaches_the_bridge(mu in on_line(15), eta in on_line(15), k in kernel(1)) {
        let s = mu.support().clone();
        let p = Problem::new(mu.into(), eta.into(), k.discretize(&s, &s).unwrap().into()).unwrap();
        let states = run(&p, 12).unwrap();
        let bridge = solve_bridge(&p, SolveOptions { tol: 1e-11, max_iter: 20_000 }).unwrap();
        let mut last = f64::INFINITY;
        for st in &states {
            let (rm, re) = st.residuals();
            let pinned = if st.is_even() { rm } else { re };
            prop_assert!(pinned < 1e-12);
            let h = bridge.kl_from(st).unwrap();
            prop_assert!(h <= last + 1e-12);
            last = h;
        }
    }
}

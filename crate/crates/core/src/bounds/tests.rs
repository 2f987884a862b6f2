use super::*;
use crate::linalg::Vector;
use crate::measures::{GaussianMeasure, GridLayout, Support};
use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn gauss(m: f64, s: f64) -> GaussianMeasure {
    GaussianMeasure::new(v(&[m]), Matrix::from_element(1, 1, s)).unwrap()
}

fn kernel(a: f64, b: f64, t: f64) -> GaussianKernel {
    GaussianKernel::new(v(&[a]), Matrix::from_element(1, 1, b), Matrix::from_element(1, 1, t)).unwrap()
}

#[test]
fn curvature_rule() {
    assert_eq!(rho_from_curvature(1.0, 0.0, 0.0).unwrap(), Rho::Known(1.0));
    assert_eq!(rho_from_curvature(2.0, 0.0, 0.0).unwrap(), Rho::Known(0.5));
    assert_eq!(rho_from_curvature(1.0, 1.0, 0.5).unwrap(), Rho::Unknown);
    assert!(matches!(rho_from_curvature(0.0, 0.0, 0.0), Err(Error::Domain(_))));
    assert!(matches!(rho_from_curvature(-1.0, 0.0, 0.0), Err(Error::Domain(_))));
}

#[test]
fn kernel_rho() {
    let k = GaussianKernel::new(Vector::zeros(2), Matrix::identity(2, 2), Matrix::identity(2, 2)).unwrap();
    assert_abs_diff_eq!(rho_gaussian_kernel(&k), 1.0, epsilon = 1e-14);
    let k = GaussianKernel::new(Vector::zeros(2), Matrix::identity(2, 2), Matrix::from_diagonal(&v(&[0.25, 0.5]))).unwrap();
    assert_abs_diff_eq!(rho_gaussian_kernel(&k), 0.5, epsilon = 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let a = Matrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let tau = &a * a.transpose() + Matrix::identity(3, 3) * 0.1;
        let k = GaussianKernel::new(Vector::zeros(3), Matrix::identity(3, 3), tau.clone()).unwrap();
        let oracle = tau.symmetric_eigen().eigenvalues.max();
        assert_abs_diff_eq!(rho_gaussian_kernel(&k), oracle, epsilon = 1e-12);
    }
}

#[test]
fn epsilon_two_ways() {
    for (au, av, b) in [(0.5, 1.0, 0.5), (2.0, 2.0, 1.0), (1.0, 0.5, 1.0)] {
        let Rho::Known(ru) = rho_from_curvature(au, 0.0, 0.0).unwrap() else { panic!() };
        let Rho::Known(rv) = rho_from_curvature(av, 0.0, 0.0).unwrap() else { panic!() };
        let c = Constants::new(&kernel(0.0, b, 1.0), ru, rv, true).unwrap();
        assert_abs_diff_eq!(c.epsilon, b * b / (au * av), epsilon = 1e-12);
        assert_abs_diff_eq!(c.epsilon, c.kappa * c.kappa * c.rho_u * c.rho_v, epsilon = 1e-12);
    }
}

#[test]
fn coupling_cases() {
    let a: Measure = GridMeasure::dirac(v(&[1.0])).unwrap().into();
    let b: Measure = GridMeasure::dirac(v(&[3.5])).unwrap().into();
    let r = verify_coupling("coupling", &a, &a).unwrap();
    assert!(r.iter().all(|x| x.lhs == 0.0 && x.rhs == 0.0 && x.pass));
    let r = verify_coupling("coupling", &a, &b).unwrap();
    assert_abs_diff_eq!(r[0].lhs, 2.5, epsilon = 1e-14);
    assert_abs_diff_eq!(r[0].rhs, 2.5, epsilon = 1e-14);
    assert!(r.iter().all(|x| x.pass));
}

#[test]
fn continuity_identical_kernels() {
    let mu: Measure = gauss(0.3, 2.0).into();
    let k: Kernel = kernel(0.1, 0.8, 0.5).into();
    let r = verify_continuity("t", &mu, &k, &k, 0.5).unwrap();
    assert!(r.iter().all(|x| x.pass && x.lhs.abs() < 1e-12 && x.rhs.abs() < 1e-12));
}

#[test]
fn continuity_shifted_alpha_has_room() {
    let mu: Measure = gauss(0.3, 2.0).into();
    let kg = kernel(0.1, 0.8, 0.5);
    let k: Kernel = kg.clone().into();
    let l: Kernel = kernel(0.6, 0.8, 0.5).into();
    let r = verify_continuity("t", &mu, &k, &l, rho_gaussian_kernel(&kg)).unwrap();
    assert_eq!(r.len(), 4);
    for x in &r {
        assert!(x.pass, "{x:?}");
    }
    // aggregation is an equality for a pure shift, the entropic links are strict
    assert_abs_diff_eq!(r[0].slack, 0.0, epsilon = 1e-12);
    assert!(r[1].slack > 0.0 || r[1].slack.abs() < 1e-12);
    assert!(r[3].slack > 0.0);
}

#[test]
fn continuity_discrete_with_certificate() {
    let s = Support::from_layout(GridLayout::new(vec![-2.0], vec![2.0], 15).unwrap());
    let k = kernel(0.0, 0.9, 0.4).discretize(&s, &s).unwrap();
    let l = kernel(0.2, 0.7, 0.3).discretize(&s, &s).unwrap();
    let mu: Measure = GridMeasure::uniform(s).unwrap().into();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rho = empirical_rho(&k, &l, 3, &mut rng).unwrap();
    assert!(rho > 0.0);
    let r = verify_continuity("t", &mu, &k.into(), &l.into(), rho).unwrap();
    assert_eq!(r.len(), 6);
    for x in &r {
        assert!(x.pass, "{x:?}");
    }
}

#[test]
fn degenerate_entropy() {
    let s = Support::from_points(vec![v(&[0.0]), v(&[1.0])]).unwrap();
    let k = GridKernel::identity(s.clone());
    let l = GridKernel::new(s.clone(), s.clone(), Matrix::from_element(2, 2, 0.5)).unwrap();
    let mu: Measure = GridMeasure::uniform(s).unwrap().into();
    let r = verify_continuity("t", &mu, &k.into(), &l.into(), 1.0).unwrap();
    let ent = r.iter().find(|x| x.name == "t.w2_entropy").unwrap();
    assert!(ent.degenerate && ent.pass && ent.rhs.is_infinite());
    let json = report::reports_json(&r);
    assert!(json.contains("\"inf\""));
}

fn gaussian_sinkhorn(au: f64, av: f64, b: f64, steps: usize) -> (Problem, Bridge, Vec<SinkhornState>, Constants) {
    let k = kernel(0.0, b, 1.0);
    let p = Problem::new(gauss(0.0, 1.0 / au).into(), gauss(1.0, 1.0 / av).into(), k.clone().into()).unwrap();
    let bridge = solve_bridge(&p, SolveOptions::for_problem(&p)).unwrap();
    let states = crate::sinkhorn::run(&p, steps).unwrap();
    let c = Constants::new(&k, 1.0 / au, 1.0 / av, true).unwrap();
    (p, bridge, states, c)
}

#[test]
fn decay_substitution() {
    let (_, bridge, states, c) = gaussian_sinkhorn(1.0, 1.0, 1.0, 8);
    assert_abs_diff_eq!(c.epsilon, 1.0, epsilon = 1e-14);
    let (curve, reports) = verify_decay("decay", &bridge, &states, &c).unwrap();
    let h0 = curve.entries[0].entropy;
    assert_eq!(curve.entries[0].bound, h0);
    for e in &curve.entries {
        assert_abs_diff_eq!(e.bound, 0.5f64.powi((e.n / 2) as i32) * h0, epsilon = 1e-15);
    }
    assert!(reports.iter().all(|r| r.pass), "{reports:?}");
    let csv = report::decay_csv(&curve);
    assert!(csv.starts_with("n,H_n,bound_n\n0,"));
}

#[test]
fn moment_decay_gaussian() {
    let (p, bridge, states, c) = gaussian_sinkhorn(1.0, 1.0, 1.0, 20);
    let r = verify_moment_decay("md", &p, &bridge, &states, &c).unwrap();
    assert_eq!(r.len(), 42);
    for x in &r {
        assert!(x.pass, "{x:?}");
    }
}

#[test]
fn pi_bounds_cases() {
    let kg = kernel(0.0, 1.0, 1.0);
    let k: Kernel = kg.clone().into();
    let mu: Measure = gauss(0.0, 1.0).into();
    let rho = rho_gaussian_kernel(&kg);
    let kappa = spectral_norm(&kg.chi());
    let same = verify_pi_bounds("pi", &mu, &mu, &k, rho, kappa, None).unwrap();
    for x in &same {
        assert!(x.pass && x.lhs.abs() < 1e-9 && x.rhs.abs() < 1e-9, "{x:?}");
    }
    let r = verify_pi_bounds("pi", &mu, &gauss(0.5, 1.0).into(), &k, rho, kappa, None).unwrap();
    for x in &r {
        assert!(x.pass, "{x:?}");
    }
}

#[test]
fn potential_identities_gaussian() {
    let (p, bridge, states, c) = gaussian_sinkhorn(1.0, 2.0, 0.5, 10);
    let r = verify_potential_identities("pot", &p, &bridge, &states, &c, GAUSSIAN_SLACK).unwrap();
    for x in &r {
        assert!(x.pass, "{x:?}");
        if x.name.ends_with("identity") {
            assert!(x.lhs <= 1e-10, "{x:?}");
        }
    }
}

#[test]
fn functional_inequalities() {
    let r = verify_gaussian_functional("fi", &gauss(1.0, 0.7).into(), &gauss(-0.5, 1.3).into()).unwrap();
    assert!(r.iter().all(|x| x.pass));
}

#[test]
fn summary_is_sorted() {
    let reports = vec![BoundReport::new("b", 1.0, 2.0, 0.0), BoundReport::new("a", 3.0, 2.0, 0.0)];
    let csv = report::summary_csv(&reports);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "name,lhs,rhs,slack,pass");
    assert!(lines[1].starts_with("a,") && lines[1].ends_with(",false"));
    assert!(lines[2].starts_with("b,") && lines[2].ends_with(",true"));
    assert!(!all_pass(&reports));
}

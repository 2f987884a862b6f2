//! Library values against frozen brute-force references (`oracles/derive.py`).

use std::sync::LazyLock;

use approx::assert_abs_diff_eq;
use bridgebound::linalg::{Matrix, Vector};
use bridgebound::measures::{
    discretize, disintegrate, product, push, Coordinate, GaussianJoint, GaussianKernel, GaussianMeasure, GridLayout,
    GridMeasure, Joint, Measure, Support,
};
use bridgebound::metrics::{fisher_kernel_lipschitz, kl_gaussian, kl_weights, w2_lp, w2_quantile};
use bridgebound::sinkhorn::{run, solve_bridge, Problem, SolveOptions};
use serde_json::Value;

static ORACLES: LazyLock<Value> = LazyLock::new(|| {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/oracles.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
});

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn fs(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(f).collect()
}

fn mat(v: &Value) -> Matrix {
    let rows: Vec<Vec<f64>> = v.as_array().unwrap().iter().map(fs).collect();
    Matrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn scalar(m: f64) -> Matrix {
    Matrix::from_element(1, 1, m)
}

fn gauss(m: f64, v: f64) -> GaussianMeasure {
    GaussianMeasure::new(Vector::from_element(1, m), scalar(v)).unwrap()
}

fn kernel(alpha: f64, beta: f64, tau: f64) -> GaussianKernel {
    GaussianKernel::new(Vector::from_element(1, alpha), scalar(beta), scalar(tau)).unwrap()
}

fn assert_close(a: &Matrix, b: &Matrix, eps: f64) {
    assert_eq!(a.shape(), b.shape());
    assert!((a - b).amax() <= eps, "{a} vs {b}");
}

#[test]
fn joint_law_through_a_kernel() {
    for case in ["identity", "affine"] {
        let o = &ORACLES["joint_through_kernel"][case];
        let k = fs(&o["kernel"]);
        let mu: Measure = gauss(0.0, 1.0).into();
        let Joint::Gaussian(j) = product(&mu, &kernel(k[0], k[1], k[2]).into()).unwrap() else { panic!() };
        assert_close(&Matrix::from_column_slice(2, 1, j.mean().as_slice()), &Matrix::from_column_slice(2, 1, &fs(&o["mean"])), 1e-12);
        assert_close(j.cov(), &mat(&o["cov"]), 1e-12);

        let Measure::Gaussian(y) = push(&mu, &kernel(k[0], k[1], k[2]).into()).unwrap() else { panic!() };
        assert_abs_diff_eq!(y.mean()[0], fs(&o["mean"])[1], epsilon = 1e-12);
        assert_abs_diff_eq!(y.cov()[(0, 0)], mat(&o["cov"])[(1, 1)], epsilon = 1e-12);
    }
}

#[test]
fn conditioning_a_gaussian_joint() {
    let j = GaussianJoint::new(Vector::zeros(2), Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])).unwrap();
    let d = disintegrate(&Joint::Gaussian(j), Coordinate::First).unwrap();
    let k = d.kernel.as_gaussian().unwrap();
    for row in ORACLES["conditioning"].as_array().unwrap() {
        let x = Vector::from_element(1, f(&row["x"]));
        assert_abs_diff_eq!(k.mean_at(&x)[0], f(&row["mean"]), epsilon = 1e-12);
        assert_abs_diff_eq!(k.tau()[(0, 0)], f(&row["var"]), epsilon = 1e-12);
    }
}

#[test]
fn relative_entropy_values() {
    let o = &ORACLES["kl"];
    assert_abs_diff_eq!(kl_weights(&[0.5, 0.5], &[0.25, 0.75]), f(&o["bernoulli"]), epsilon = 1e-14);
    assert_abs_diff_eq!(kl_gaussian(&gauss(0.0, 1.0), &gauss(1.0, 1.0)).unwrap(), f(&o["gaussian_shift"]), epsilon = 1e-12);
}

#[test]
fn kernel_fisher_information() {
    let k = kernel(0.0, 3.0, 2.0);
    let j = fisher_kernel_lipschitz(&k, &Vector::from_element(1, 1.0), &Vector::from_element(1, 0.0)).unwrap();
    assert_abs_diff_eq!(j.value, f(&ORACLES["kernel_fisher"]), epsilon = 1e-10);
    assert!(j.value <= j.bound + 1e-12);
}

#[test]
fn discretized_gaussian_transport_cost() {
    let s = Support::from_layout(GridLayout::new(vec![-8.0], vec![8.0], 800).unwrap());
    let a = discretize(&gauss(0.0, 1.0), &s).unwrap();
    let b = discretize(&gauss(0.5, 1.0), &s).unwrap();
    let w = w2_quantile(&a, &b).unwrap().0;
    assert_abs_diff_eq!(w * w, f(&ORACLES["discretized_w2_sq"]), epsilon = 1e-10);
    assert_abs_diff_eq!(w * w, 0.25, epsilon = 1e-3);
}

#[test]
fn exact_transport_matches_a_generic_lp() {
    for case in ORACLES["lp_pairs"].as_array().unwrap() {
        let m = |x: &Value, w: &Value| {
            let pts = fs(x).into_iter().map(|p| Vector::from_element(1, p)).collect();
            GridMeasure::normalized(Support::from_points(pts).unwrap(), Vector::from_vec(fs(w))).unwrap()
        };
        let (a, b) = (m(&case["x"], &case["wx"]), m(&case["y"], &case["wy"]));
        let expected = f(&case["w2_sq"]);
        assert_abs_diff_eq!(w2_lp(&a, &b).unwrap().0.powi(2), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(w2_quantile(&a, &b).unwrap().0.powi(2), expected, epsilon = 1e-9);
    }
}

#[test]
fn gaussian_bridges_and_entropy_trajectories() {
    for o in ORACLES["bridges"].as_array().unwrap() {
        let (mu, eta) = (fs(&o["mu"]), fs(&o["eta"]));
        let p = Problem::new(gauss(mu[0], mu[1]).into(), gauss(eta[0], eta[1]).into(), kernel(0.0, f(&o["beta"]), f(&o["tau"])).into()).unwrap();
        let bridge = solve_bridge(&p, SolveOptions::for_problem(&p)).unwrap();
        let Joint::Gaussian(j) = bridge.joint() else { panic!() };
        assert_close(j.cov(), &mat(&o["cov"]), 1e-9);
        let l = bridge.kernel().unwrap();
        let l = l.as_gaussian().unwrap();
        assert_abs_diff_eq!(l.beta()[(0, 0)], f(&o["cond_slope"]), epsilon = 1e-9);
        assert_abs_diff_eq!(l.alpha()[0], f(&o["cond_intercept"]), epsilon = 1e-9);
        assert_abs_diff_eq!(l.tau()[(0, 0)], f(&o["cond_var"]), epsilon = 1e-9);

        let expected = fs(&o["kl_trajectory"]);
        let states = run(&p, expected.len() - 1).unwrap();
        for (s, h) in states.iter().zip(&expected) {
            let got = bridge.kl_from(s).unwrap();
            assert!((got - h).abs() <= 1e-9 + 1e-8 * h, "n={} got {got} expected {h}", s.n());
        }
    }
}

//! Conditional means and covariances of two kernels, bounded through W2 and
//! relative entropy, on Gaussians and on a grid with an empirical certificate.

use bridgebound::bounds::{empirical_rho, rho_gaussian_kernel, verify_continuity, BoundReport};
use bridgebound::linalg::{Matrix, Vector};
use bridgebound::measures::{GaussianKernel, GaussianMeasure, GridLayout, GridMeasure, Support};
use rand::SeedableRng;

fn show(reports: &[BoundReport]) {
    for r in reports {
        println!("  {:<28} {:>12.6e} <= {:>12.6e}  {}", r.name, r.lhs, r.rhs, if r.pass { "ok" } else { "FAIL" });
    }
}

fn main() -> bridgebound::Result<()> {
    let m = |x: &[f64]| Matrix::from_row_slice(2, 2, x);
    let mu = GaussianMeasure::new(Vector::from_vec(vec![0.0, 1.0]), m(&[1.0, 0.3, 0.3, 0.5]))?;
    let k = GaussianKernel::new(Vector::zeros(2), m(&[1.0, 0.2, 0.0, 0.8]), m(&[0.5, 0.1, 0.1, 0.4]))?;
    let l = GaussianKernel::new(Vector::from_vec(vec![0.3, -0.2]), m(&[0.9, 0.0, 0.1, 0.8]), m(&[0.6, 0.0, 0.0, 0.4]))?;
    let rho = rho_gaussian_kernel(&k);
    println!("Gaussian, rho = {rho:.4}");
    show(&verify_continuity("gauss", &mu.into(), &k.clone().into(), &l.clone().into(), rho)?);

    let s = Support::from_layout(GridLayout::new(vec![-2.5], vec![2.5], 30)?);
    let k1 = GaussianKernel::new(Vector::zeros(1), Matrix::identity(1, 1), Matrix::from_element(1, 1, 0.5))?;
    let l1 = GaussianKernel::new(Vector::from_element(1, 0.2), Matrix::from_element(1, 1, 0.8), Matrix::from_element(1, 1, 0.7))?;
    let (kd, ld) = (k1.discretize(&s, &s)?, l1.discretize(&s, &s)?);
    let mu = GridMeasure::uniform(s)?;
    let rho = empirical_rho(&kd, &ld, 4, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1))?;
    println!("grid, empirical rho = {rho:.4}");
    show(&verify_continuity("grid", &mu.into(), &kd.into(), &ld.into(), rho)?);
    Ok(())
}

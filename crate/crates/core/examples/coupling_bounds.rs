//! Bias and covariance gaps of two discrete laws against their exact W2.

use bridgebound::linalg::Vector;
use bridgebound::bounds::verify_coupling;
use bridgebound::measures::{GridMeasure, Support};

fn line(points: &[f64], weights: &[f64]) -> bridgebound::Result<GridMeasure> {
    let s = Support::from_points(points.iter().map(|&x| Vector::from_element(1, x)).collect())?;
    GridMeasure::normalized(s, Vector::from_column_slice(weights))
}

fn main() -> bridgebound::Result<()> {
    let a = line(&[-1.0, 0.0, 2.0], &[0.2, 0.5, 0.3])?;
    let b = line(&[-0.5, 1.0, 1.5, 3.0], &[0.1, 0.4, 0.4, 0.1])?;
    for r in verify_coupling("pair", &a.into(), &b.into())? {
        println!("{:<10} {:.6} <= {:.6}  slack {:.3e}  {}", r.name, r.lhs, r.rhs, r.slack, if r.pass { "ok" } else { "FAIL" });
    }
    Ok(())
}

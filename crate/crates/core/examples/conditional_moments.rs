//! Disintegrating a joint law and reading off conditional moment fields.

use bridgebound::linalg::{Matrix, Vector};
use bridgebound::measures::{disintegrate, discretize, product, Coordinate, GaussianKernel, GaussianMeasure, GridLayout, Support};
use bridgebound::moments::{cond_cov, cond_mean};

fn main() -> bridgebound::Result<()> {
    let mu = GaussianMeasure::new(Vector::from_element(1, 0.0), Matrix::from_element(1, 1, 1.0))?;
    let k = GaussianKernel::new(Vector::from_element(1, 0.5), Matrix::from_element(1, 1, 0.8), Matrix::from_element(1, 1, 0.3))?;

    let exact = disintegrate(&product(&mu.clone().into(), &k.clone().into())?, Coordinate::Second)?;
    let s = Support::from_layout(GridLayout::new(vec![-6.0], vec![6.0], 241)?);
    let grid = disintegrate(&product(&discretize(&mu, &s)?.into(), &k.discretize(&s, &s)?.into())?, Coordinate::Second)?;

    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "y", "m exact", "m grid", "s exact", "s grid");
    for y in [-1.0, 0.0, 0.5, 1.5] {
        let at = Vector::from_element(1, y);
        let idx = s.points().iter().position(|p| (p[0] - y).abs() < 1e-9).unwrap();
        let (me, se) = (cond_mean(&exact.kernel).eval(&at)?, cond_cov(&exact.kernel).eval(&at)?);
        let (mg, sg) = (cond_mean(&grid.kernel).materialize(&s)?, cond_cov(&grid.kernel).materialize(&s)?);
        println!("{y:>6.2} {:>10.6} {:>10.6} {:>10.6} {:>10.6}", me[(0, 0)], mg.values()[idx][(0, 0)], se[(0, 0)], sg.values()[idx][(0, 0)]);
    }
    Ok(())
}

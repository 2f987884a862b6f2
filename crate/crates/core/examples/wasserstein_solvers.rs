//! The three W2 solvers on the same pair of laws.

use bridgebound::linalg::{Matrix, Vector};
use bridgebound::measures::{discretize, GaussianMeasure, GridLayout, Support};
use bridgebound::metrics::{w2_gaussian, w2_lp, w2_quantile};

fn main() -> bridgebound::Result<()> {
    let a = GaussianMeasure::new(Vector::from_element(1, 0.0), Matrix::from_element(1, 1, 1.0))?;
    let b = GaussianMeasure::new(Vector::from_element(1, 0.8), Matrix::from_element(1, 1, 0.5))?;
    println!("Bures        {:.6}", w2_gaussian(&a, &b)?.0);
    for n in [16, 32, 64] {
        let s = Support::from_layout(GridLayout::new(vec![-6.0], vec![6.0], n)?);
        let (da, db) = (discretize(&a, &s)?, discretize(&b, &s)?);
        println!("n={n:<3} simplex {:.6}  quantile {:.6}", w2_lp(&da, &db)?.0, w2_quantile(&da, &db)?.0);
    }
    let s = Support::from_layout(GridLayout::new(vec![-6.0], vec![6.0], 4000)?);
    println!("n=4000 quantile {:.6}", w2_quantile(&discretize(&a, &s)?, &discretize(&b, &s)?)?.0);
    Ok(())
}

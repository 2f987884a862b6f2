//! Relative entropy, Fisher information and the transport-entropy inequalities
//! they feed.

use bridgebound::bounds::verify_gaussian_functional;
use bridgebound::linalg::{Matrix, Vector};
use bridgebound::measures::{discretize, GaussianMeasure, GridLayout, Support};
use bridgebound::metrics::{fisher, kl};

fn main() -> bridgebound::Result<()> {
    let nu = GaussianMeasure::new(Vector::from_element(1, 0.5), Matrix::from_element(1, 1, 0.7))?;
    let mu = GaussianMeasure::new(Vector::from_element(1, 0.0), Matrix::from_element(1, 1, 1.0))?;
    println!("closed form  H {:.6}  J {:.6}", kl(&nu, &mu)?, fisher(&nu.clone().into(), &mu.clone().into())?);

    let s = Support::from_layout(GridLayout::new(vec![-8.0], vec![8.0], 801)?);
    let (gn, gm) = (discretize(&nu, &s)?, discretize(&mu, &s)?);
    println!("801-node grid H {:.6}  J {:.6}", kl(&gn, &gm)?, fisher(&gn.into(), &gm.into())?);

    for r in verify_gaussian_functional("nu|mu", &nu.into(), &mu.into())? {
        println!("{:<20} {:.6} <= {:.6}", r.name, r.lhs, r.rhs);
    }
    Ok(())
}

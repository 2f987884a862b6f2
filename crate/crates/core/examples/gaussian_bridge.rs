//! Closed-form Gaussian bridge: joint law, potentials, bridge kernel.

use bridgebound::measures::Joint;
use bridgebound::model::{BackendKind, Model};
use bridgebound::sinkhorn::solve_bridge;

fn main() -> bridgebound::Result<()> {
    // mu = N(0, 1), eta = N(2, 0.5), K_0: x -> N(x, 1)
    let model = Model::default_1d(BackendKind::Gaussian);
    let problem = model.problem()?;
    let bridge = solve_bridge(&problem, model.solve_options())?;

    let Joint::Gaussian(p) = bridge.joint() else { unreachable!() };
    println!("iterations {}, residual {:.2e}", bridge.iterations, bridge.residual);
    println!("joint mean {:?}", p.mean().as_slice());
    println!("joint cov  {:?}", p.cov().as_slice());

    let (u, v) = bridge.potentials();
    let (u, v) = (u.as_quadratic().unwrap(), v.as_quadratic().unwrap());
    println!("U*(x) = {:.6} x^2/2 + {:.6} x + {:.6}", u.a[(0, 0)], u.b[0], u.c);
    println!("V*(y) = {:.6} y^2/2 + {:.6} y + {:.6}", v.a[(0, 0)], v.b[0], v.c);

    let l = bridge.kernel()?;
    let l = l.as_gaussian()?;
    println!("L(x) = N({:.6} + {:.6} x, {:.6})", l.alpha()[0], l.beta()[(0, 0)], l.tau()[(0, 0)]);
    Ok(())
}

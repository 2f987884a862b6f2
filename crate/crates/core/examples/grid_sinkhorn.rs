//! Log-domain Sinkhorn on a grid with a non-Gaussian target.

use bridgebound::model::{BackendKind, Model, Perturbation};
use bridgebound::sinkhorn::{run, solve_bridge, trajectory};

fn main() -> bridgebound::Result<()> {
    let mut model = Model::default_1d(BackendKind::Grid);
    model.eta.perturbation = Some(Perturbation { amplitude: 0.4, frequency: 3.0 });
    let problem = model.problem()?;

    let bridge = solve_bridge(&problem, model.solve_options())?;
    println!("converged in {} iterations, Schrodinger residual {:.2e}", bridge.iterations, bridge.system_residual);

    let states = run(&problem, 12)?;
    println!("{:>3} {:>12} {:>12} {:>14}", "n", "res mu", "res eta", "H(P*|P_n)");
    for row in trajectory(&states, Some(&bridge))? {
        println!("{:>3} {:>12.3e} {:>12.3e} {:>14.6e}", row.n, row.residual_mu, row.residual_eta, row.kl_to_bridge.unwrap());
    }
    Ok(())
}

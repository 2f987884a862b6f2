//! H(P*|P_n) against the geometric bound, for a few Gaussian models.

use bridgebound::bounds::verify_decay;
use bridgebound::sinkhorn::{run, solve_bridge};
use bridgebound::suites::gaussian_sweep;

fn main() -> bridgebound::Result<()> {
    for (label, model) in gaussian_sweep().into_iter().step_by(5) {
        let problem = model.problem()?;
        let bridge = solve_bridge(&problem, model.solve_options())?;
        let c = model.constants()?;
        let (curve, reports) = verify_decay(&label, &bridge, &run(&problem, 10)?, &c)?;
        println!("{label}: epsilon {:.4}, rate {:.4}, all pass {}", c.epsilon, c.contraction(), reports.iter().all(|r| r.pass));
        for e in curve.entries.iter().step_by(2) {
            println!("  n={:>2}  H {:>12.4e}  bound {:>12.4e}", e.n, e.entropy, e.bound);
        }
    }
    Ok(())
}

//! Gradient and Hessian of Sinkhorn potentials against conditional moments,
//! on both backends.

use bridgebound::bounds::{verify_potential_identities, GAUSSIAN_SLACK, GRID_STENCIL_TOL};
use bridgebound::model::{BackendKind, Model};
use bridgebound::sinkhorn::{run, solve_bridge};

fn main() -> bridgebound::Result<()> {
    for backend in [BackendKind::Gaussian, BackendKind::Grid] {
        let model = Model::default_1d(backend);
        let problem = model.problem()?;
        let bridge = solve_bridge(&problem, model.solve_options())?;
        let tol = if problem.is_grid() { GRID_STENCIL_TOL } else { GAUSSIAN_SLACK };
        let reports = verify_potential_identities("p", &problem, &bridge, &run(&problem, 6)?, &model.constants()?, tol)?;
        println!("{backend:?}");
        for r in reports.iter().filter(|r| r.name.contains(".n002.") || r.name.contains(".n003.")) {
            println!("  {:<22} {:>12.4e} <= {:>12.4e}  {}", r.name, r.lhs, r.rhs, if r.pass { "ok" } else { "FAIL" });
        }
    }
    Ok(())
}

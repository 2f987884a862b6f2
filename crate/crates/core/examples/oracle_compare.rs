//! Gaussian model against its grid discretization, at two resolutions.

use bridgebound::measures::GridLayout;
use bridgebound::model::{BackendKind, Model};
use bridgebound::suites::oracle_compare;

fn main() -> bridgebound::Result<()> {
    for n in [400, 12] {
        let mut model = Model::default_1d(BackendKind::Grid);
        model.grid = Some(GridLayout::new(vec![-6.0], vec![6.0], n)?);
        let report = oracle_compare(&model)?;
        println!("n = {n}: {}", if report.pass() { "pass" } else { "FAIL" });
        for d in &report.entries {
            println!("  {:<22} {:>10.3e}  (tol {:.0e})", d.name, d.value, d.tolerance);
        }
    }
    Ok(())
}

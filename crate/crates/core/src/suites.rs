//! Verification suites shared by the command line and the acceptance tests.
//!
//! Randomized suites draw one seed per instance from a master ChaCha
//! generator, run the instances in parallel and collect them in order, so the
//! output depends on the seed alone.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use crate::bounds::report::{float_value, object};
use crate::bounds::{
    empirical_rho, rho_gaussian_kernel, verify_moment_decay, verify_decay, verify_gaussian_functional, verify_coupling,
    verify_pi_bounds, verify_potential_identities, verify_continuity, BoundReport, Constants, DecayCurve,
    GAUSSIAN_SLACK, GRID_STENCIL_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::measures::{GaussianKernel, GaussianMeasure, GridLayout, GridMeasure, Measure, Support};
use crate::model::{BackendKind, Marginal, Model};
use crate::moments::{cond_cov, cond_mean, spectral_norm, Field};
use crate::sinkhorn::{grad_potential, run, solve_bridge, Bridge, Potential, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Continuity,
    Coupling,
    MomentDecay,
    Decay,
    PiBounds,
    Potentials,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "theorem1" | "continuity" => Suite::Continuity,
            "lemma" | "coupling" => Suite::Coupling,
            "corollaries" | "moment_decay" => Suite::MomentDecay,
            "decay" => Suite::Decay,
            "pi_bounds" => Suite::PiBounds,
            "potentials" => Suite::Potentials,
            "all" => Suite::All,
            other => return Err(Error::Config(format!("unknown suite {other:?}"))),
        })
    }
}

impl Suite {
    pub fn default_instances(self) -> usize {
        match self {
            Suite::Coupling => 500,
            Suite::PiBounds => 50,
            _ => 200,
        }
    }
}

/// Reports plus any decay curves, keyed by label.
#[derive(Clone, Debug, Default)]
pub struct SuiteOutput {
    pub reports: Vec<BoundReport>,
    pub curves: Vec<(String, DecayCurve)>,
}

impl SuiteOutput {
    fn extend(&mut self, other: SuiteOutput) {
        self.reports.extend(other.reports);
        self.curves.extend(other.curves);
    }
}

/// One seed per instance from a master generator.
pub fn instance_seeds(seed: u64, instances: usize) -> Vec<u64> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..instances).map(|_| master.random()).collect()
}

fn run_instances<F>(seed: u64, instances: usize, f: F) -> Result<Vec<BoundReport>>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Vec<BoundReport>> + Sync,
{
    let per: Vec<Vec<BoundReport>> = instance_seeds(seed, instances)
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| f(i, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

fn random_discrete_1d(rng: &mut ChaCha8Rng) -> Result<GridMeasure> {
    let n = rng.random_range(1..=20);
    let mut pts: Vec<f64> = Vec::with_capacity(n);
    while pts.len() < n {
        let x = (rng.random_range(-3.0..3.0) * 1e6f64).round() / 1e6;
        if !pts.contains(&x) {
            pts.push(x);
        }
    }
    let support = Support::from_points(pts.into_iter().map(|x| Vector::from_element(1, x)).collect())?;
    GridMeasure::normalized(support, Vector::from_fn(n, |_, _| rng.random_range(0.01..1.0)))
}

/// Coupling bounds on random 1-D discrete pairs (up to 20 atoms each).
pub fn coupling_suite(seed: u64, instances: usize) -> Result<Vec<BoundReport>> {
    run_instances(seed, instances, |i, rng| {
        let a = random_discrete_1d(rng)?;
        let b = random_discrete_1d(rng)?;
        let (na, nb) = (a.support().len(), b.support().len());
        Ok(verify_coupling(&format!("coupling.i{i:04}"), &a.into(), &b.into())?
            .into_iter()
            .map(|r| r.with_param("atoms_x", na as f64).with_param("atoms_y", nb as f64))
            .collect())
    })
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Matrix {
    let a = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let diag = Vector::from_fn(d, |_, _| rng.random_range(lo..hi));
    crate::linalg::symmetrize(&(&q * Matrix::from_diagonal(&diag) * q.transpose()))
}

fn random_beta(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    loop {
        let b = Matrix::from_fn(d, d, |i, j| if i == j { rng.random_range(0.4..1.5) } else { rng.random_range(-0.5..0.5) });
        if b.determinant().abs() > 0.1 {
            return b;
        }
    }
}

fn random_gaussian_kernel(rng: &mut ChaCha8Rng, d: usize) -> Result<GaussianKernel> {
    let alpha = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    GaussianKernel::new(alpha, random_beta(rng, d), random_spd(rng, d, 0.2, 2.0))
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Result<GaussianMeasure> {
    GaussianMeasure::new(Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)), random_spd(rng, d, 0.3, 2.0))
}

/// Entropic continuity on random Gaussian triples with `rho = ||tau_K||_2`.
pub fn continuity_gaussian_suite(seed: u64, instances: usize) -> Result<Vec<BoundReport>> {
    run_instances(seed, instances, |i, rng| {
        let d = if rng.random_bool(0.5) { 1 } else { 2 };
        let mu = random_gaussian(rng, d)?;
        let k = random_gaussian_kernel(rng, d)?;
        let l = random_gaussian_kernel(rng, d)?;
        let rho = rho_gaussian_kernel(&k);
        Ok(verify_continuity(&format!("continuity.gaussian.i{i:04}"), &mu.into(), &k.into(), &l.into(), rho)?
            .into_iter()
            .map(|r| r.with_param("d", d as f64))
            .collect())
    })
}

/// Entropic continuity on random grid triples with the empirical certificate.
///
/// Even instances are 1-D (up to 40 nodes), odd ones 2-D on a 6x6 grid so the
/// exact simplex solver applies row by row.
pub fn continuity_discrete_suite(seed: u64, instances: usize) -> Result<Vec<BoundReport>> {
    run_instances(seed, instances, |i, rng| {
        let d = if i % 2 == 0 { 1 } else { 2 };
        let layout = if d == 1 {
            GridLayout::new(vec![-2.5], vec![2.5], rng.random_range(8..=40))?
        } else {
            GridLayout::new(vec![-2.0, -2.0], vec![2.0, 2.0], 6)?
        };
        let s = Support::from_layout(layout);
        let k = random_gaussian_kernel(rng, d)?.discretize(&s, &s)?;
        let l = random_gaussian_kernel(rng, d)?.discretize(&s, &s)?;
        let mu = GridMeasure::normalized(s.clone(), Vector::from_fn(s.len(), |_, _| rng.random_range(0.0..1.0)))?;
        let rho = empirical_rho(&k, &l, 2, rng)?;
        Ok(verify_continuity(&format!("continuity.discrete.i{i:04}"), &mu.into(), &k.into(), &l.into(), rho)?
            .into_iter()
            .map(|r| r.with_param("d", d as f64).with_param("rho_hat", rho).uncertified())
            .collect())
    })
}

/// Transport-entropy and log-Sobolev inequalities of random Gaussian pairs.
pub fn functional_suite(seed: u64, instances: usize) -> Result<Vec<BoundReport>> {
    run_instances(seed, instances, |i, rng| {
        let d = rng.random_range(1..=3);
        let nu = random_gaussian(rng, d)?;
        let mu = random_gaussian(rng, d)?;
        verify_gaussian_functional(&format!("functional.i{i:04}"), &nu.into(), &mu.into())
    })
}

/// Random 1-D Gaussian `(mu, pi, K)` for the bridge-against-reference bounds.
pub fn pi_bounds_suite(seed: u64, instances: usize) -> Result<Vec<BoundReport>> {
    run_instances(seed, instances, |i, rng| {
        let mu = random_gaussian(rng, 1)?;
        let shift = rng.random_range(-1.0..1.0);
        let pi = GaussianMeasure::new(mu.mean().add_scalar(shift), mu.cov() * rng.random_range(0.5..2.0))?;
        let k = random_gaussian_kernel(rng, 1)?;
        let rho = rho_gaussian_kernel(&k);
        let kappa = spectral_norm(&k.chi());
        verify_pi_bounds(&format!("pi.i{i:04}"), &mu.into(), &pi.into(), &k.into(), rho, kappa, None)
    })
}

/// `mu = N(0, 1/a_u)`, `eta = N(1, 1/a_v)`, `K_0: x -> N(beta x, 1)` over
/// `a_u, a_v in {0.5, 1, 2}` and `beta in {0.5, 1}`.
pub fn gaussian_sweep() -> Vec<(String, Model)> {
    let mut out = Vec::new();
    for au in [0.5, 1.0, 2.0] {
        for av in [0.5, 1.0, 2.0] {
            for beta in [0.5, 1.0] {
                let g = |m: f64, a: f64| GaussianMeasure::new(Vector::from_element(1, m), Matrix::from_element(1, 1, 1.0 / a)).expect("valid");
                let mut model = Model::default_1d(BackendKind::Gaussian);
                model.mu = Marginal { gaussian: g(0.0, au), perturbation: None };
                model.eta = Marginal { gaussian: g(1.0, av), perturbation: None };
                model.kernel = GaussianKernel::new(Vector::zeros(1), Matrix::from_element(1, 1, beta), Matrix::identity(1, 1)).expect("valid");
                model.steps = 30;
                out.push((format!("au{au}_av{av}_b{beta}"), model));
            }
        }
    }
    out
}

/// The model behind the potential-identity checks: the default 1-D model on the
/// `[-6, 6]` grid with 400 nodes.
pub fn potentials_models() -> Vec<(String, Model)> {
    let g = Model::default_1d(BackendKind::Gaussian);
    let grid = Model::default_1d(BackendKind::Grid);
    vec![("gaussian".into(), g), ("grid".into(), grid)]
}

struct Solved {
    problem: Problem,
    bridge: Bridge,
    states: Vec<crate::sinkhorn::SinkhornState>,
    constants: Constants,
}

fn solve_model(model: &Model, steps: usize) -> Result<Solved> {
    let problem = model.problem()?;
    let bridge = solve_bridge(&problem, model.solve_options())?;
    let states = run(&problem, steps)?;
    let constants = model.constants()?;
    Ok(Solved { problem, bridge, states, constants })
}

fn tag_model(reports: Vec<BoundReport>, model: &Model) -> Vec<BoundReport> {
    let mut params = BTreeMap::new();
    params.insert("mu_mean".to_string(), model.mu.gaussian.mean()[0]);
    params.insert("mu_var".to_string(), model.mu.gaussian.cov()[(0, 0)]);
    params.insert("eta_mean".to_string(), model.eta.gaussian.mean()[0]);
    params.insert("eta_var".to_string(), model.eta.gaussian.cov()[(0, 0)]);
    params.insert("beta".to_string(), model.kernel.beta()[(0, 0)]);
    params.insert("tau".to_string(), model.kernel.tau()[(0, 0)]);
    reports
        .into_iter()
        .map(|r| {
            let certified = r.certified;
            let r = r.with_params(&params);
            if certified { r } else { r.uncertified() }
        })
        .collect()
}

/// Runs a model-driven suite (`moment_decay`, `decay`, `pi_bounds`, `potentials`) on one model.
pub fn model_suite(label: &str, model: &Model, suite: Suite) -> Result<SuiteOutput> {
    let steps = model.steps;
    let mut out = SuiteOutput::default();
    let prefix = |s: &str| format!("{s}.{label}");
    match suite {
        Suite::MomentDecay => {
            let s = solve_model(model, steps.min(20))?;
            out.reports = verify_moment_decay(&prefix("moment_decay"), &s.problem, &s.bridge, &s.states, &s.constants)?;
        }
        Suite::Decay => {
            let s = solve_model(model, steps)?;
            let (curve, reports) = verify_decay(&prefix("decay"), &s.bridge, &s.states, &s.constants)?;
            out.reports = reports;
            out.curves.push((label.to_string(), curve));
        }
        Suite::Potentials => {
            let s = solve_model(model, steps.min(20))?;
            let tol = if s.problem.is_grid() { GRID_STENCIL_TOL } else { GAUSSIAN_SLACK };
            out.reports = verify_potential_identities(&prefix("potentials"), &s.problem, &s.bridge, &s.states, &s.constants, tol)?;
        }
        Suite::PiBounds => {
            let problem = model.problem()?;
            let rho = rho_gaussian_kernel(&model.kernel);
            let kappa = spectral_norm(&model.kernel.chi());
            out.reports = verify_pi_bounds(
                &prefix("pi"),
                problem.mu(),
                problem.eta(),
                problem.reference(),
                rho,
                kappa,
                Some(model.solve_options()),
            )?;
        }
        Suite::Continuity | Suite::Coupling | Suite::All => {
            return Err(Error::Config(format!("{suite:?} is not a model suite")));
        }
    }
    out.reports = tag_model(out.reports, model);
    Ok(out)
}

/// Runs `suite`; model suites use `model` when given, else their built-in models.
pub fn run_suite(suite: Suite, model: Option<&Model>, seed: u64, instances: Option<usize>) -> Result<SuiteOutput> {
    let n = instances.unwrap_or(suite.default_instances());
    let mut out = SuiteOutput::default();
    match suite {
        Suite::Coupling => out.reports = coupling_suite(seed, n)?,
        Suite::Continuity => {
            out.reports = continuity_gaussian_suite(seed, n)?;
            out.reports.extend(continuity_discrete_suite(seed, n)?);
            out.reports.extend(functional_suite(seed, n)?);
        }
        Suite::PiBounds if model.is_none() => out.reports = pi_bounds_suite(seed, n)?,
        Suite::MomentDecay | Suite::Decay | Suite::Potentials | Suite::PiBounds => {
            let models = match model {
                Some(m) => vec![("model".to_string(), m.clone())],
                None if suite == Suite::Potentials => potentials_models(),
                None => gaussian_sweep(),
            };
            let parts: Vec<SuiteOutput> =
                models.par_iter().map(|(label, m)| model_suite(label, m, suite)).collect::<Result<_>>()?;
            for p in parts {
                out.extend(p);
            }
        }
        Suite::All => {
            for s in [Suite::Coupling, Suite::Continuity, Suite::MomentDecay, Suite::Decay, Suite::PiBounds, Suite::Potentials] {
                out.extend(run_suite(s, model, seed, instances)?);
            }
        }
    }
    Ok(out)
}

/// One cross-backend discrepancy.
#[derive(Clone, Debug, PartialEq)]
pub struct Discrepancy {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Discrepancy {
    pub fn pass(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub entries: Vec<Discrepancy>,
    pub grid_iterations: usize,
    pub gaussian_iterations: usize,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(Discrepancy::pass)
    }

    pub fn get(&self, name: &str) -> Option<&Discrepancy> {
        self.entries.iter().find(|d| d.name == name)
    }

    pub fn to_json(&self) -> Value {
        let entries = self
            .entries
            .iter()
            .map(|d| {
                object(vec![
                    ("name", Value::String(d.name.clone())),
                    ("value", float_value(d.value)),
                    ("tolerance", float_value(d.tolerance)),
                    ("pass", Value::Bool(d.pass())),
                ])
            })
            .collect();
        object(vec![
            ("discrepancies", Value::Array(entries)),
            ("grid_iterations", Value::from(self.grid_iterations)),
            ("gaussian_iterations", Value::from(self.gaussian_iterations)),
            ("pass", Value::Bool(self.pass())),
        ])
    }
}

/// Indices with every coordinate within `width` standard deviations of the mean.
pub fn interior(support: &Support, g: &GaussianMeasure, width: f64) -> Vec<usize> {
    support
        .points()
        .iter()
        .enumerate()
        .filter(|(_, x)| (0..x.len()).all(|k| (x[k] - g.mean()[k]).abs() <= width * g.cov()[(k, k)].sqrt()))
        .map(|(i, _)| i)
        .collect()
}

/// Width, in standard deviations, of the region where grid and Gaussian fields are
/// compared. Wider regions pick up the truncation of kernel rows at the grid edge.
pub const INTERIOR_WIDTH: f64 = 3.0;

fn field_gap(grid: &Field, exact: &Field, support: &Support, idx: &[usize]) -> Result<f64> {
    let a = grid.materialize(support)?;
    let b = exact.materialize(support)?;
    Ok(idx
        .iter()
        .map(|&i| (&a.values()[i] - &b.values()[i]).amax())
        .fold(0.0, f64::max))
}

fn centered_gap(grid: &Potential, exact: &Potential, nu_grid: &Measure, nu: &Measure, idx: &[usize]) -> Result<f64> {
    let (support, gv) = grid.as_grid().ok_or_else(|| Error::Dimension("expected a grid potential".into()))?;
    let ev = exact.values_on(support)?;
    let gm = grid.average(nu_grid)?;
    let em = exact.average(nu)?;
    Ok(idx.iter().map(|&i| ((gv[i] - gm) - (ev[i] - em)).abs()).fold(0.0, f64::max))
}

/// Gaussian model against its grid discretization: bridge conditional moments,
/// entropy trajectory, and centered potentials along the iterates.
pub fn oracle_compare(model: &Model) -> Result<OracleReport> {
    oracle_compare_within(model, INTERIOR_WIDTH)
}

/// [`oracle_compare`] with the comparison region `|x - m| <= width * sd`.
pub fn oracle_compare_within(model: &Model, width: f64) -> Result<OracleReport> {
    let gm = model.with_backend(BackendKind::Gaussian)?;
    let dm = model.with_backend(BackendKind::Grid)?;
    let steps = model.steps;
    let (g, d) = rayon::join(|| solve_model(&gm, steps), || solve_model(&dm, steps));
    let (g, d) = (g?, d?);
    let tol = model.oracle;
    let Measure::Grid(mu_grid) = d.problem.mu() else { unreachable!() };
    let support = mu_grid.support().clone();
    let mu = model.mu.gaussian.clone();
    let eta = model.eta.gaussian.clone();
    let in_mu = interior(&support, &mu, width);
    let in_eta = interior(&support, &eta, width);

    let lg = g.bridge.kernel()?;
    let ld = d.bridge.kernel()?;
    let lgf = g.bridge.conjugate_kernel()?;
    let ldf = d.bridge.conjugate_kernel()?;
    let mut entries = vec![
        Discrepancy { name: "bridge_mean".into(), value: field_gap(&cond_mean(&ld), &cond_mean(&lg), &support, &in_mu)?, tolerance: tol.mean },
        Discrepancy { name: "bridge_cov".into(), value: field_gap(&cond_cov(&ld), &cond_cov(&lg), &support, &in_mu)?, tolerance: tol.cov },
        Discrepancy {
            name: "conjugate_mean".into(),
            value: field_gap(&cond_mean(&ldf), &cond_mean(&lgf), &support, &in_eta)?,
            tolerance: tol.mean,
        },
        Discrepancy {
            name: "conjugate_cov".into(),
            value: field_gap(&cond_cov(&ldf), &cond_cov(&lgf), &support, &in_eta)?,
            tolerance: tol.cov,
        },
    ];

    let mut kl_gap: f64 = 0.0;
    for (a, b) in g.states.iter().zip(&d.states) {
        let ha = g.bridge.kl_from(a)?;
        let hb = d.bridge.kl_from(b)?;
        if ha >= tol.kl_floor {
            kl_gap = kl_gap.max((ha - hb).abs() / ha);
        }
    }
    entries.push(Discrepancy { name: "kl_trajectory".into(), value: kl_gap, tolerance: tol.kl });

    let (ug, vg) = g.bridge.potentials();
    let (ud, vd) = d.bridge.potentials();
    let mut pot = centered_gap(&ud, &ug, d.problem.mu(), g.problem.mu(), &in_mu)?
        .max(centered_gap(&vd, &vg, d.problem.eta(), g.problem.eta(), &in_eta)?);
    for (a, b) in g.states.iter().zip(&d.states) {
        let (ua, va) = a.potentials();
        let (ub, vb) = b.potentials();
        pot = pot.max(centered_gap(ub, ua, d.problem.mu(), g.problem.mu(), &in_mu)?);
        if b.n() > 0 {
            pot = pot.max(centered_gap(vb, va, d.problem.eta(), g.problem.eta(), &in_eta)?);
        }
    }
    entries.push(Discrepancy { name: "potentials".into(), value: pot, tolerance: tol.potential });
    if let (Some(a), Some(b)) = (g.states.get(2), d.states.get(2)) {
        let grad = field_gap(&grad_potential(b.potentials().0)?, &grad_potential(a.potentials().0)?, &support, &in_mu)?;
        entries.push(Discrepancy { name: "potential_gradient_u2".into(), value: grad, tolerance: tol.potential });
    }
    Ok(OracleReport { entries, grid_iterations: d.bridge.iterations, gaussian_iterations: g.bridge.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(instance_seeds(7, 5), instance_seeds(7, 5));
        assert_ne!(instance_seeds(7, 5), instance_seeds(8, 5));
        assert_eq!(&instance_seeds(7, 5)[..3], &instance_seeds(7, 3)[..]);
    }

    #[test]
    fn suite_names() {
        assert_eq!("pi_bounds".parse::<Suite>().unwrap(), Suite::PiBounds);
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn coupling_suite_counts() {
        let r = coupling_suite(7, 10).unwrap();
        assert_eq!(r.len(), 20);
        assert!(r.iter().all(|x| x.pass));
    }

    #[test]
    fn sweep_shape() {
        let s = gaussian_sweep();
        assert_eq!(s.len(), 18);
        assert!(s.iter().all(|(_, m)| m.constants().unwrap().certified));
    }
}

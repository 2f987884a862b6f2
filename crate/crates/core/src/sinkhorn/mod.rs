//! Sinkhorn iterations and the Schrödinger bridge on both backends.
//!
//! Grid runs work on log-masses; Gaussian runs alternate Gaussian conditioning
//! and marginal replacement. Each state also carries the potentials `(U_n, V_n)`
//! from the integral recursions, so that
//! `P_n = exp(-U_n(x) - W(x, y) - V_n(y)) dx dy`.

mod potentials;

use std::fmt::Write as _;

pub use potentials::{gaussian_potential, grad_potential, hess_potential, marginal_potential, Potential};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measures::{
    disintegrate, flip, product, Coordinate, DiscreteJoint, GaussianKernel, GaussianMeasure, GridLayout, Joint, Kernel, Measure, Support,
};
use crate::metrics::{kl_gaussian, kl_weights};
use crate::quadratic::Quadratic;

pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_TOL_GRID: f64 = 1e-10;
pub const DEFAULT_TOL_GAUSSIAN: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Backend {
    Grid {
        /// `U`, `V` on the grids.
        u: Vector,
        v: Vector,
        /// Row-normalized log reference kernel; `-W(x_i, y_j) = log_k[(i, j)] - ln lambda_y`.
        log_k: Matrix,
        ln_lx: f64,
        ln_ly: f64,
    },
    Gaussian {
        u: Quadratic,
        v: Quadratic,
        w: Quadratic,
    },
}

/// Marginals `(mu, eta)` and the reference transition `K_0`.
#[derive(Clone, Debug)]
pub struct Problem {
    mu: Measure,
    eta: Measure,
    reference: Kernel,
    backend: Backend,
}

impl Problem {
    pub fn new(mu: Measure, eta: Measure, reference: Kernel) -> Result<Self> {
        let backend = match (&mu, &eta, &reference) {
            (Measure::Grid(m), Measure::Grid(e), Kernel::Grid(k)) => {
                if !m.support().same_as(k.source()) || !e.support().same_as(k.target()) {
                    return Err(Error::Dimension("marginals must live on the kernel's source and target grids".into()));
                }
                Backend::Grid {
                    u: m.potential(),
                    v: e.potential(),
                    log_k: k.log_rows().clone(),
                    ln_lx: m.cell_volume().ln(),
                    ln_ly: e.cell_volume().ln(),
                }
            }
            (Measure::Gaussian(m), Measure::Gaussian(e), Kernel::Gaussian(k)) => {
                if m.dim() != k.dim() || e.dim() != k.dim() {
                    return Err(Error::Dimension("marginal and kernel dimensions differ".into()));
                }
                Backend::Gaussian {
                    u: Quadratic::neg_log_density(m),
                    v: Quadratic::neg_log_density(e),
                    w: Quadratic::reference_cost(k),
                }
            }
            _ => return Err(Error::Dimension("marginals and reference must share one backend".into())),
        };
        Ok(Self { mu, eta, reference, backend })
    }

    /// The grid counterpart of a Gaussian problem: marginals and reference
    /// kernel restricted to `layout` and renormalized.
    pub fn discretized(
        mu: &GaussianMeasure,
        eta: &GaussianMeasure,
        reference: &GaussianKernel,
        layout: GridLayout,
    ) -> Result<Self> {
        let s = Support::from_layout(layout);
        let m = crate::measures::discretize(mu, &s)?;
        let e = crate::measures::discretize(eta, &s)?;
        let k = reference.discretize(&s, &s)?;
        Self::new(m.into(), e.into(), k.into())
    }

    pub fn mu(&self) -> &Measure {
        &self.mu
    }

    pub fn eta(&self) -> &Measure {
        &self.eta
    }

    pub fn reference(&self) -> &Kernel {
        &self.reference
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.backend, Backend::Grid { .. })
    }

    /// `(U, V)`, the potentials of the marginals.
    pub fn marginal_potentials(&self) -> (Potential, Potential) {
        (marginal_potential(&self.mu), marginal_potential(&self.eta))
    }

    /// `P_0 = mu x K_0` with `V_0 = 0`.
    pub fn initial_state(&self) -> Result<SinkhornState> {
        let (plan, v0) = match &self.backend {
            Backend::Grid { log_k, v, .. } => {
                let mu = self.mu.as_grid()?;
                let mut log_mass = log_k.clone();
                for (mut row, w) in log_mass.row_iter_mut().zip(mu.weights().iter()) {
                    let lw = w.ln();
                    row.apply(|x| *x = if lw == f64::NEG_INFINITY { f64::NEG_INFINITY } else { *x + lw });
                }
                (
                    Plan::Grid {
                        log_mass,
                        x: mu.support().clone(),
                        y: self.eta.as_grid()?.support().clone(),
                    },
                    Potential::Grid { support: self.eta.as_grid()?.support().clone(), values: Vector::zeros(v.len()) },
                )
            }
            Backend::Gaussian { .. } => {
                let Joint::Gaussian(p) = product(&self.mu, &self.reference)? else { unreachable!() };
                (Plan::Gaussian(p), Potential::Quadratic(Quadratic::zero(self.mu.dim())))
            }
        };
        let u0 = self.u_update(&v0)?;
        SinkhornState::assemble(self, 0, plan, u0, v0)
    }

    /// `U + log K_W(exp(-V_n))`.
    fn u_update(&self, v_n: &Potential) -> Result<Potential> {
        match (&self.backend, v_n) {
            (Backend::Grid { u, log_k, .. }, Potential::Grid { values, .. }) => {
                let mut out = u.clone();
                for (i, row) in log_k.row_iter().enumerate() {
                    let s = linalg::log_sum_exp(row.iter().zip(values.iter()).map(|(k, v)| k - v));
                    out[i] = combine(u[i], s, "row")?;
                }
                Ok(Potential::Grid { support: self.mu.as_grid()?.support().clone(), values: out })
            }
            (Backend::Gaussian { u, w, .. }, Potential::Quadratic(v)) => {
                Ok(Potential::Quadratic(u.sub(&w.add(&v.lift(false)).integrate_out_second()?)))
            }
            _ => Err(Error::Dimension("potential does not match the problem backend".into())),
        }
    }

    /// `V + log K_{W flat}(exp(-U_n))`.
    fn v_update(&self, u_n: &Potential) -> Result<Potential> {
        match (&self.backend, u_n) {
            (Backend::Grid { v, log_k, ln_lx, ln_ly, .. }, Potential::Grid { values, .. }) => {
                let mut out = v.clone();
                let shift = ln_lx - ln_ly;
                for (j, col) in log_k.column_iter().enumerate() {
                    let s = linalg::log_sum_exp(col.iter().zip(values.iter()).map(|(k, u)| k + shift - u));
                    out[j] = combine(v[j], s, "column")?;
                }
                Ok(Potential::Grid { support: self.eta.as_grid()?.support().clone(), values: out })
            }
            (Backend::Gaussian { v, w, .. }, Potential::Quadratic(u)) => {
                Ok(Potential::Quadratic(v.sub(&w.add(&u.lift(true)).integrate_out_first()?)))
            }
            _ => Err(Error::Dimension("potential does not match the problem backend".into())),
        }
    }

    /// The coupling `exp(-U_n - W - V_n) dx dy` rebuilt from potentials.
    pub fn plan_from_potentials(&self, u_n: &Potential, v_n: &Potential) -> Result<Joint> {
        match (&self.backend, u_n, v_n) {
            (Backend::Grid { log_k, ln_lx, .. }, Potential::Grid { values: uu, .. }, Potential::Grid { values: vv, .. }) => {
                let log_mass = Matrix::from_fn(log_k.nrows(), log_k.ncols(), |i, j| {
                    if uu[i] == f64::INFINITY || vv[j] == f64::INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        log_k[(i, j)] - uu[i] - vv[j] + ln_lx
                    }
                });
                Ok(Joint::Discrete(self.discrete_joint(&log_mass, false)?))
            }
            (Backend::Gaussian { w, .. }, Potential::Quadratic(u), Potential::Quadratic(v)) => {
                let q = w.add(&u.lift(true)).add(&v.lift(false));
                let cov = linalg::spd_inverse(&linalg::ensure_spd(&q.a, "product-form precision")?)?;
                let mean = -(&cov * &q.b);
                Ok(Joint::Gaussian(crate::measures::GaussianJoint::new(mean, cov)?))
            }
            _ => Err(Error::Dimension("potentials do not match the problem backend".into())),
        }
    }

    fn discrete_joint(&self, log_mass: &Matrix, strict: bool) -> Result<DiscreteJoint> {
        let mut mass = log_mass.map(f64::exp);
        if !strict {
            let total = mass.sum();
            mass /= total;
        }
        DiscreteJoint::new(self.mu.as_grid()?.support().clone(), self.eta.as_grid()?.support().clone(), mass)
    }
}

fn combine(base: f64, log_integral: f64, what: &str) -> Result<f64> {
    if base == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if log_integral == f64::NEG_INFINITY {
        return Err(Error::Support(format!("a {what} with positive target mass has no reference mass")));
    }
    Ok(base + log_integral)
}

#[derive(Clone, Debug)]
enum Plan {
    Grid { log_mass: Matrix, x: Support, y: Support },
    Gaussian(crate::measures::GaussianJoint),
}

/// Snapshot of iterate `n`: the coupling `P_n` and its potentials `(U_n, V_n)`.
#[derive(Clone, Debug)]
pub struct SinkhornState {
    n: usize,
    plan: Plan,
    u: Potential,
    v: Potential,
    gauge: f64,
    residual_mu: f64,
    residual_eta: f64,
}

impl SinkhornState {
    fn assemble(problem: &Problem, n: usize, plan: Plan, u: Potential, v: Potential) -> Result<Self> {
        let (u_ref, _) = problem.marginal_potentials();
        let gauge = u.sub(&u_ref)?.average(&problem.mu)?;
        let (residual_mu, residual_eta) = match &plan {
            Plan::Grid { log_mass: lm, .. } => {
                let mu = problem.mu.as_grid()?;
                let eta = problem.eta.as_grid()?;
                let rows = Vector::from_iterator(lm.nrows(), lm.row_iter().map(|r| r.iter().map(|x| x.exp()).sum()));
                let cols = Vector::from_iterator(lm.ncols(), lm.column_iter().map(|c| c.iter().map(|x| x.exp()).sum()));
                ((rows - mu.weights()).abs().sum(), (cols - eta.weights()).abs().sum())
            }
            Plan::Gaussian(p) => (
                gaussian_gap(&p.first_marginal(), problem.mu.as_gaussian()?),
                gaussian_gap(&p.second_marginal(), problem.eta.as_gaussian()?),
            ),
        };
        Ok(Self { n, plan, u, v, gauge, residual_mu, residual_eta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_even(&self) -> bool {
        self.n % 2 == 0
    }

    pub fn joint(&self) -> Joint {
        match &self.plan {
            Plan::Grid { log_mass, x, y } => {
                let mass = log_mass.map(f64::exp);
                let total = mass.sum();
                Joint::Discrete(DiscreteJoint::new(x.clone(), y.clone(), mass / total).expect("normalized log-mass"))
            }
            Plan::Gaussian(p) => Joint::Gaussian(p.clone()),
        }
    }

    /// `log P_n` entrywise (grid backend).
    pub fn log_mass(&self) -> Option<&Matrix> {
        match &self.plan {
            Plan::Grid { log_mass, .. } => Some(log_mass),
            Plan::Gaussian(_) => None,
        }
    }

    /// Raw potentials `(U_n, V_n)` as produced by the recursions.
    pub fn potentials(&self) -> (&Potential, &Potential) {
        (&self.u, &self.v)
    }

    /// `g_n = mu(U_n - U)`.
    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    /// `(U_n - g_n, V_n + g_n)`, which leaves `P_n` unchanged.
    pub fn centered_potentials(&self) -> (Potential, Potential) {
        (self.u.shift(-self.gauge), self.v.shift(self.gauge))
    }

    /// Marginal residuals against `(mu, eta)`: L1 distance on grids, largest
    /// parameter gap for Gaussians. One of the two is zero by construction.
    pub fn residuals(&self) -> (f64, f64) {
        (self.residual_mu, self.residual_eta)
    }

    /// Residual of the marginal not pinned at this step.
    pub fn free_residual(&self) -> f64 {
        if self.is_even() {
            self.residual_eta
        } else {
            self.residual_mu
        }
    }

    /// The free marginal `pi_n`: `mu K_{2n}` at even steps, the first marginal at odd ones.
    pub fn free_marginal(&self) -> Measure {
        let j = self.joint();
        if self.is_even() {
            j.second_marginal()
        } else {
            j.first_marginal()
        }
    }

    /// `H(self | other)` between two couplings of the same problem.
    pub fn kl_to(&self, other: &SinkhornState) -> Result<f64> {
        match (&self.plan, &other.plan) {
            (Plan::Grid { log_mass: a, .. }, Plan::Grid { log_mass: b, .. }) => {
                if a.shape() != b.shape() {
                    return Err(Error::Dimension("states of different problems".into()));
                }
                let mut s = 0.0;
                for (la, lb) in a.iter().zip(b.iter()) {
                    if *la == f64::NEG_INFINITY {
                        continue;
                    }
                    if *lb == f64::NEG_INFINITY {
                        return Ok(f64::INFINITY);
                    }
                    s += la.exp() * (la - lb);
                }
                Ok(s.max(0.0))
            }
            (Plan::Gaussian(a), Plan::Gaussian(b)) => kl_gaussian(&a.as_measure(), &b.as_measure()),
            _ => Err(Error::Dimension("states of different backends".into())),
        }
    }
}

fn gaussian_gap(a: &GaussianMeasure, b: &GaussianMeasure) -> f64 {
    (a.mean() - b.mean()).amax().max((a.cov() - b.cov()).amax())
}

/// Next potentials `(U_{n+1}, V_{n+1})`: an even index updates `V`, an odd one `U`.
pub fn potentials_update(problem: &Problem, state: &SinkhornState) -> Result<(Potential, Potential)> {
    if state.is_even() {
        let v = problem.v_update(&state.u)?;
        Ok((state.u.clone(), v))
    } else {
        let u = problem.u_update(&state.v)?;
        Ok((u, state.v.clone()))
    }
}

/// One projection: `2n -> 2n+1` replaces the second marginal by `eta`,
/// `2n+1 -> 2n+2` replaces the first by `mu`.
pub fn sinkhorn_step(problem: &Problem, state: &SinkhornState) -> Result<SinkhornState> {
    let plan = match &state.plan {
        Plan::Grid { log_mass, x, y } => {
            let mut lm = log_mass.clone();
            if state.is_even() {
                let eta = problem.eta.as_grid()?;
                for (j, mut col) in lm.column_iter_mut().enumerate() {
                    rescale(col.as_mut_slice(), eta.weights()[j], "column")?;
                }
            } else {
                let mu = problem.mu.as_grid()?;
                let mut t = lm.transpose();
                for (i, mut col) in t.column_iter_mut().enumerate() {
                    rescale(col.as_mut_slice(), mu.weights()[i], "row")?;
                }
                lm = t.transpose();
            }
            Plan::Grid { log_mass: lm, x: x.clone(), y: y.clone() }
        }
        Plan::Gaussian(p) => {
            let p = Joint::Gaussian(p.clone());
            let next = if state.is_even() {
                let d = disintegrate(&p, Coordinate::Second)?;
                flip(&product(&problem.eta, &d.kernel)?)
            } else {
                let d = disintegrate(&p, Coordinate::First)?;
                product(&problem.mu, &d.kernel)?
            };
            let Joint::Gaussian(g) = next else { unreachable!() };
            Plan::Gaussian(g)
        }
    };
    let (u, v) = potentials_update(problem, state)?;
    SinkhornState::assemble(problem, state.n + 1, plan, u, v)
}

fn rescale(line: &mut [f64], target: f64, what: &str) -> Result<()> {
    let z = linalg::log_sum_exp(line.iter().copied());
    if target <= 0.0 {
        line.fill(f64::NEG_INFINITY);
        return Ok(());
    }
    if z == f64::NEG_INFINITY {
        return Err(Error::Support(format!("a {what} with positive target mass carries no coupling mass")));
    }
    let shift = target.ln() - z;
    for x in line.iter_mut() {
        *x += shift;
    }
    Ok(())
}

/// States `P_0, ..., P_steps`.
pub fn run(problem: &Problem, steps: usize) -> Result<Vec<SinkhornState>> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(problem.initial_state()?);
    for _ in 0..steps {
        let next = sinkhorn_step(problem, states.last().expect("nonempty"))?;
        states.push(next);
    }
    Ok(states)
}

/// Stopping parameters for [`solve_bridge`].
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl SolveOptions {
    pub fn for_problem(problem: &Problem) -> Self {
        let tol = if problem.is_grid() { DEFAULT_TOL_GRID } else { DEFAULT_TOL_GAUSSIAN };
        Self { tol, max_iter: DEFAULT_MAX_ITER }
    }
}

/// The Schrödinger bridge `P_{mu,eta}` with potentials, as the Sinkhorn limit.
#[derive(Clone, Debug)]
pub struct Bridge {
    state: SinkhornState,
    pub iterations: usize,
    /// Marginal residual at the stopping iterate.
    pub residual: f64,
    /// Residual of the Schrödinger system at the returned potentials.
    pub system_residual: f64,
}

impl Bridge {
    pub fn state(&self) -> &SinkhornState {
        &self.state
    }

    pub fn joint(&self) -> Joint {
        self.state.joint()
    }

    /// `(U*, V*)`, gauge-centered.
    pub fn potentials(&self) -> (Potential, Potential) {
        self.state.centered_potentials()
    }

    /// `L_{mu,eta}`: the bridge conditioned on its first coordinate.
    pub fn kernel(&self) -> Result<Kernel> {
        Ok(disintegrate(&self.joint(), Coordinate::First)?.kernel)
    }

    /// `L♭_{eta,mu}`: the conjugate bridge conditioned on its first coordinate.
    pub fn conjugate_kernel(&self) -> Result<Kernel> {
        Ok(disintegrate(&flip(&self.joint()), Coordinate::First)?.kernel)
    }

    /// `H(P_{mu,eta} | P_n)`.
    pub fn kl_from(&self, state: &SinkhornState) -> Result<f64> {
        self.state.kl_to(state)
    }
}

pub fn solve_bridge(problem: &Problem, opts: SolveOptions) -> Result<Bridge> {
    let mut state = problem.initial_state()?;
    loop {
        let residual = state.residuals().0.max(state.residuals().1);
        if residual < opts.tol {
            let system_residual = schrodinger_residual(problem, &state.u, &state.v)?;
            return Ok(Bridge { iterations: state.n, residual, system_residual, state });
        }
        if state.n >= opts.max_iter {
            return Err(Error::Convergence { iterations: state.n, residual });
        }
        state = sinkhorn_step(problem, &state)?;
    }
}

/// How far `(U*, V*)` is from solving the Schrödinger system.
///
/// Grid: `max(mu|exp(U' - U*) - 1|, eta|exp(V' - V*) - 1|)` with `(U', V')` the
/// right-hand sides; Gaussian: largest coefficient gap.
pub fn schrodinger_residual(problem: &Problem, u: &Potential, v: &Potential) -> Result<f64> {
    let u2 = problem.u_update(v)?;
    let v2 = problem.v_update(u)?;
    match (u, &u2, v, &v2) {
        (Potential::Grid { values: a, .. }, Potential::Grid { values: a2, .. }, Potential::Grid { values: b, .. }, Potential::Grid { values: b2, .. }) => {
            let side = |m: &Measure, x: &Vector, y: &Vector| -> Result<f64> {
                let w = m.as_grid()?.weights();
                Ok(w.iter()
                    .zip(x.iter().zip(y.iter()))
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, (x, y))| w * ((y - x).exp() - 1.0).abs())
                    .sum())
            };
            Ok(side(&problem.mu, a, a2)?.max(side(&problem.eta, b, b2)?))
        }
        (Potential::Quadratic(a), Potential::Quadratic(a2), Potential::Quadratic(b), Potential::Quadratic(b2)) => {
            Ok(a.max_abs_diff(a2).max(b.max_abs_diff(b2)))
        }
        _ => Err(Error::Dimension("potentials do not match the problem backend".into())),
    }
}

/// `K_{2n}` from `P_{2n}` given the first coordinate, `K_{2n+1}` from `P♭_{2n+1}`.
pub fn kernel_at(state: &SinkhornState) -> Result<Kernel> {
    let j = state.joint();
    let j = if state.is_even() { j } else { flip(&j) };
    Ok(disintegrate(&j, Coordinate::First)?.kernel)
}

/// One trajectory line.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub n: usize,
    pub residual_mu: f64,
    pub residual_eta: f64,
    pub kl_to_bridge: Option<f64>,
    pub gauge: f64,
}

pub fn trajectory(states: &[SinkhornState], bridge: Option<&Bridge>) -> Result<Vec<TrajectoryRow>> {
    states
        .iter()
        .map(|s| {
            Ok(TrajectoryRow {
                n: s.n,
                residual_mu: s.residual_mu,
                residual_eta: s.residual_eta,
                kl_to_bridge: bridge.map(|b| b.kl_from(s)).transpose()?,
                gauge: s.gauge,
            })
        })
        .collect()
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("n,residual_mu,residual_eta,kl_to_bridge,gauge\n");
    for r in rows {
        let kl = r.kl_to_bridge.map_or_else(String::new, |v| format!("{v:.16e}"));
        let _ = writeln!(out, "{},{:.16e},{:.16e},{},{:.16e}", r.n, r.residual_mu, r.residual_eta, kl, r.gauge);
    }
    out
}

/// `H(P* | P_n)` for a discrete pair given as joints; exposed for cross-checks.
pub fn joint_kl(a: &DiscreteJoint, b: &DiscreteJoint) -> f64 {
    kl_weights(a.mass().iter(), b.mass().iter())
}

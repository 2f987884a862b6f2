//! Both sides of every inequality, with the constants they use, as
//! pass/fail [`BoundReport`]s.

pub mod report;

use std::collections::BTreeMap;

use rand::Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measures::{disintegrate, flip, push, Coordinate, GaussianKernel, GridKernel, GridMeasure, Kernel, Measure};
use crate::metrics::{self, kl_disintegrated, kl_weights, w2_kernel_avg};
use crate::moments::{cond_cov, cond_mean, field_norm, spectral_norm, trace_constant, Field};
use crate::sinkhorn::{grad_potential, hess_potential, kernel_at, solve_bridge, Bridge, Problem, SinkhornState, SolveOptions};

use report::{float_value, object};

/// Roundoff allowance for Gaussian closed forms.
pub const GAUSSIAN_SLACK: f64 = 1e-10;

/// Roundoff allowance for discrete computations, relative to the right-hand side.
pub fn discrete_slack(rhs: f64) -> f64 {
    1e-9 * rhs.abs().max(1.0)
}

/// Finite-difference budget of grid potential derivatives.
pub const GRID_STENCIL_TOL: f64 = 5e-3;

/// Outcome of the curvature rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rho {
    Known(f64),
    /// No closed form; the constant must be supplied by the caller.
    Unknown,
}

/// `rho = 1/a` when the curvature lower bound `a` holds everywhere (`delta = 0`).
pub fn rho_from_curvature(a: f64, b: f64, delta: f64) -> Result<Rho> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("curvature a must be positive, got {a}")));
    }
    if !(b >= 0.0) || !(delta >= 0.0) {
        return Err(Error::Domain(format!("need b >= 0 and delta >= 0, got b = {b}, delta = {delta}")));
    }
    Ok(if delta == 0.0 { Rho::Known(1.0 / a) } else { Rho::Unknown })
}

/// `||tau||_2`, the log-Sobolev constant of a Gaussian kernel.
pub fn rho_gaussian_kernel(k: &GaussianKernel) -> f64 {
    spectral_norm(k.tau())
}

/// Constants of the decay and continuity estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Constants {
    pub rho_u: f64,
    pub rho_v: f64,
    /// `||tau||_2`, used for the reference kernel itself.
    pub rho_reference: f64,
    pub chi: Matrix,
    pub kappa: f64,
    pub epsilon: f64,
    /// False when a constant was supplied rather than derived.
    pub certified: bool,
}

impl Constants {
    pub fn new(k: &GaussianKernel, rho_u: f64, rho_v: f64, certified: bool) -> Result<Self> {
        if !(rho_u > 0.0 && rho_v > 0.0 && rho_u.is_finite() && rho_v.is_finite()) {
            return Err(Error::Domain(format!("rho constants must be positive, got {rho_u}, {rho_v}")));
        }
        let chi = k.chi();
        let kappa = spectral_norm(&chi);
        Ok(Self {
            rho_u,
            rho_v,
            rho_reference: rho_gaussian_kernel(k),
            epsilon: kappa * kappa * rho_u * rho_v,
            chi,
            kappa,
            certified,
        })
    }

    /// Per-two-step contraction `(1 + 1/epsilon)^{-1}`.
    pub fn contraction(&self) -> f64 {
        1.0 / (1.0 + 1.0 / self.epsilon)
    }

    fn to_json(&self) -> Value {
        object(vec![
            ("rho_u", float_value(self.rho_u)),
            ("rho_v", float_value(self.rho_v)),
            ("rho_reference", float_value(self.rho_reference)),
            ("kappa", float_value(self.kappa)),
            ("epsilon", float_value(self.epsilon)),
            ("chi", Value::Array(self.chi.row_iter().map(|r| Value::Array(r.iter().map(|x| float_value(*x)).collect())).collect())),
            ("certified", Value::Bool(self.certified)),
        ])
    }
}

/// One verified inequality `lhs <= rhs`.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub numerical_slack: f64,
    pub pass: bool,
    /// Right-hand side infinite (entropy `+inf`): trivially true.
    pub degenerate: bool,
    pub certified: bool,
    pub constants: Option<Constants>,
    /// Instance parameters and intermediate quantities, for replay.
    pub params: BTreeMap<String, f64>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, numerical_slack: f64) -> Self {
        let degenerate = rhs == f64::INFINITY;
        let pass = degenerate || lhs <= rhs + numerical_slack;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: rhs - lhs,
            numerical_slack,
            pass,
            degenerate,
            certified: true,
            constants: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_constants(mut self, c: &Constants) -> Self {
        self.certified &= c.certified;
        self.constants = Some(c.clone());
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_params(mut self, params: &BTreeMap<String, f64>) -> Self {
        self.params.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }

    pub fn uncertified(mut self) -> Self {
        self.certified = false;
        self
    }

    pub fn to_json(&self) -> Value {
        object(vec![
            ("name", Value::String(self.name.clone())),
            ("lhs", float_value(self.lhs)),
            ("rhs", float_value(self.rhs)),
            ("slack", float_value(self.slack)),
            ("numerical_slack", float_value(self.numerical_slack)),
            ("pass", Value::Bool(self.pass)),
            ("degenerate", Value::Bool(self.degenerate)),
            ("certified", Value::Bool(self.certified)),
            ("constants", self.constants.as_ref().map_or(Value::Null, Constants::to_json)),
            (
                "params",
                Value::Object(self.params.iter().map(|(k, v)| (k.clone(), float_value(*v))).collect()),
            ),
        ])
    }
}

/// True when every non-degenerate report passes.
pub fn all_pass(reports: &[BoundReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

fn slack_for(mu: &Measure, rhs: f64) -> f64 {
    match mu {
        Measure::Grid(_) => discrete_slack(rhs),
        Measure::Gaussian(_) => GAUSSIAN_SLACK,
    }
}

fn w2_exact(a: &Measure, b: &Measure) -> Result<f64> {
    match (a, b) {
        (Measure::Grid(x), Measure::Grid(y))
            if x.support().len() <= metrics::LP_MAX_ATOMS && y.support().len() <= metrics::LP_MAX_ATOMS =>
        {
            Ok(metrics::w2_lp(x, y)?.0)
        }
        _ => Ok(metrics::w2(a, b)?.0),
    }
}

/// Bias and covariance estimates between two laws `nu_x`, `nu_y`:
/// `||E X - E Y|| <= D` and `||C_XX - C_YY||_F <= 2 D^2 + 2 D sqrt(Tr C_YY)`.
pub fn verify_coupling(prefix: &str, nu_x: &Measure, nu_y: &Measure) -> Result<Vec<BoundReport>> {
    if nu_x.dim() != nu_y.dim() {
        return Err(Error::Dimension("coupling bounds need laws of one dimension".into()));
    }
    let d = w2_exact(nu_x, nu_y)?;
    let bias = (nu_x.mean() - nu_y.mean()).norm();
    let cy = nu_y.covariance();
    let cov_lhs = (nu_x.covariance() - &cy).norm();
    let cov_rhs = 2.0 * d * d + 2.0 * d * cy.trace().max(0.0).sqrt();
    Ok(vec![
        BoundReport::new(format!("{prefix}.bias"), bias, d, slack_for(nu_x, d)).with_param("w2", d),
        BoundReport::new(format!("{prefix}.cov"), cov_lhs, cov_rhs, slack_for(nu_x, cov_rhs)).with_param("w2", d),
    ])
}

/// Quantities entering the continuity bounds for `(mu, K, L)`.
#[derive(Clone, Debug)]
pub struct ContinuityTerms {
    /// `H(mu x L | mu x K)`.
    pub entropy: f64,
    /// `|||m_K - m_L|||_{2,mu}`.
    pub mean_gap: f64,
    /// `|||sigma_K - sigma_L|||_{1,mu}`.
    pub cov_gap: f64,
    /// `c_{mu,L}`.
    pub trace_constant: f64,
}

pub fn continuity_terms(mu: &Measure, k: &Kernel, l: &Kernel) -> Result<ContinuityTerms> {
    Ok(ContinuityTerms {
        entropy: kl_disintegrated(mu, l, k)?,
        mean_gap: field_norm(&cond_mean(k).sub(&cond_mean(l))?, 2.0, mu)?,
        cov_gap: field_norm(&cond_cov(k).sub(&cond_cov(l))?, 1.0, mu)?,
        trace_constant: trace_constant(mu, l)?,
    })
}

fn entropy_bounds(prefix: &str, t: &ContinuityTerms, rho: f64, mu: &Measure) -> Vec<BoundReport> {
    let h = t.entropy;
    let mean_rhs = 2.0 * rho * h;
    let cov_rhs = 4.0 * rho * h + t.trace_constant * (8.0 * rho * h).sqrt();
    let mean_lhs = t.mean_gap * t.mean_gap;
    vec![
        BoundReport::new(format!("{prefix}.mean"), mean_lhs, mean_rhs, slack_for(mu, mean_rhs)),
        BoundReport::new(format!("{prefix}.cov"), t.cov_gap, cov_rhs, slack_for(mu, cov_rhs))
            .with_param("trace_constant", t.trace_constant),
    ]
    .into_iter()
    .map(|r| r.with_param("entropy", h).with_param("rho", rho))
    .collect()
}

/// Entropic continuity for `(mu, K, L)` with `K` satisfying `T2(rho)`:
/// the two links of `D2(mu L, mu K)^2 <= ∫mu D2(δL, δK)^2 <= 2 rho H`, and
/// the mean and covariance bounds.
pub fn verify_continuity(prefix: &str, mu: &Measure, k: &Kernel, l: &Kernel, rho: f64) -> Result<Vec<BoundReport>> {
    let t = continuity_terms(mu, k, l)?;
    let pl = push(mu, l)?;
    let pk = push(mu, k)?;
    let marginal = w2_exact(&pl, &pk)?;
    let avg = w2_kernel_avg(mu, l, k)?;
    let right = 2.0 * rho * t.entropy;
    let mut out = vec![
        BoundReport::new(format!("{prefix}.w2_aggregation"), marginal * marginal, avg.value, slack_for(mu, avg.value)),
        BoundReport::new(format!("{prefix}.w2_entropy"), avg.value, right, slack_for(mu, right))
            .with_param("entropy", t.entropy)
            .with_param("rho", rho),
    ];
    if let Some(glued) = &avg.glued {
        // the glued coupling is admissible for (mu L, mu K) and costs exactly the average
        let cost: f64 = glued
            .x_support()
            .points()
            .iter()
            .enumerate()
            .flat_map(|(i, x)| {
                glued.y_support().points().iter().enumerate().map(move |(j, y)| glued.mass()[(i, j)] * (x - y).norm_squared())
            })
            .sum();
        let marg = kl_weights(glued.first_marginal().weights().iter(), pl.as_grid()?.weights().iter())
            + kl_weights(glued.second_marginal().weights().iter(), pk.as_grid()?.weights().iter());
        out.push(
            BoundReport::new(format!("{prefix}.glued_cost"), cost, avg.value, discrete_slack(avg.value))
                .with_param("marginal_kl", marg),
        );
        out.push(BoundReport::new(format!("{prefix}.glued_marginals"), marg, 0.0, 1e-12));
    }
    out.extend(entropy_bounds(prefix, &t, rho, mu));
    Ok(out)
}

/// Empirical transport-entropy constant of a grid kernel:
/// `max D2(nu, δ_x K)^2 / (2 H(nu | δ_x K))` over the rows of `probes` and
/// `extra` random reweightings of each row of `K`.
pub fn empirical_rho<R: Rng>(k: &GridKernel, probes: &GridKernel, extra: usize, rng: &mut R) -> Result<f64> {
    let mut best: f64 = 0.0;
    let mut consider = |nu: &GridMeasure, row: &GridMeasure| -> Result<()> {
        let h = kl_weights(nu.weights().iter(), row.weights().iter());
        if h > 1e-14 && h.is_finite() {
            let d = w2_exact(&nu.clone().into(), &row.clone().into())?;
            best = best.max(d * d / (2.0 * h));
        }
        Ok(())
    };
    for i in 0..k.source().len() {
        let row = k.row(i);
        consider(&probes.row(i), &row)?;
        for _ in 0..extra {
            let tilt: Vec<f64> = row.weights().iter().map(|w| w * rng.random_range(0.2..1.8)).collect();
            let nu = GridMeasure::normalized(row.support().clone(), crate::linalg::Vector::from_vec(tilt))?;
            consider(&nu, &row)?;
        }
    }
    Ok(best)
}

/// Conditional-moment bounds along Sinkhorn iterates: even `n` under `mu`
/// with `rho_v` (`rho_reference` at `n = 0`), odd `n` under `eta` with `rho_u`.
pub fn verify_moment_decay(
    prefix: &str,
    problem: &Problem,
    bridge: &Bridge,
    states: &[SinkhornState],
    c: &Constants,
) -> Result<Vec<BoundReport>> {
    let l = bridge.kernel()?;
    let l_flat = bridge.conjugate_kernel()?;
    let mut out = Vec::new();
    for s in states {
        let k = kernel_at(s)?;
        let h = bridge.kl_from(s)?;
        let (nu, lk, rho) = if s.is_even() {
            (problem.mu(), &l, if s.n() == 0 { c.rho_reference } else { c.rho_v })
        } else {
            (problem.eta(), &l_flat, c.rho_u)
        };
        let mut t = continuity_terms(nu, &k, lk)?;
        t.entropy = h;
        for r in entropy_bounds(&format!("{prefix}.n{:03}", s.n()), &t, rho, nu) {
            out.push(r.with_constants(c).with_param("n", s.n() as f64));
        }
    }
    Ok(out)
}

/// `(n, H(P* | P_n), (1 + 1/eps)^{-floor(n/2)} H(P* | P_0))`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayEntry {
    pub n: usize,
    pub entropy: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    pub entries: Vec<DecayEntry>,
}

/// Exponential entropy decay along the trajectory, plus monotonicity.
pub fn verify_decay(
    prefix: &str,
    bridge: &Bridge,
    states: &[SinkhornState],
    c: &Constants,
) -> Result<(DecayCurve, Vec<BoundReport>)> {
    let entropies: Vec<f64> = states.iter().map(|s| bridge.kl_from(s)).collect::<Result<_>>()?;
    let h0 = entropies.first().copied().unwrap_or(0.0);
    let rate = c.contraction();
    let gaussian = !matches!(bridge.joint(), crate::measures::Joint::Discrete(_));
    let slack = |rhs: f64| if gaussian { GAUSSIAN_SLACK } else { discrete_slack(rhs) };
    let mut entries = Vec::new();
    let mut out = Vec::new();
    for (s, &h) in states.iter().zip(&entropies) {
        let bound = rate.powi((s.n() / 2) as i32) * h0;
        entries.push(DecayEntry { n: s.n(), entropy: h, bound });
        if s.n() >= 1 {
            out.push(
                BoundReport::new(format!("{prefix}.entropy.n{:03}", s.n()), h, bound, slack(bound))
                    .with_constants(c)
                    .with_param("n", s.n() as f64)
                    .with_param("h0", h0),
            );
        }
    }
    for w in entries.windows(2) {
        out.push(
            BoundReport::new(format!("{prefix}.monotone.n{:03}", w[1].n), w[1].entropy, w[0].entropy, slack(w[0].entropy))
                .with_param("n", w[1].n as f64),
        );
    }
    Ok((DecayCurve { entries }, out))
}

/// Bounds for the bridge `P_{mu, pi K}` against `mu x K`, for `K` with
/// `LS(rho)` and Fisher-Lipschitz constant `kappa`.
pub fn verify_pi_bounds(
    prefix: &str,
    mu: &Measure,
    pi: &Measure,
    k: &Kernel,
    rho: f64,
    kappa: f64,
    opts: Option<SolveOptions>,
) -> Result<Vec<BoundReport>> {
    let eta = push(pi, k)?;
    let problem = Problem::new(mu.clone(), eta, k.clone())?;
    let opts = opts.unwrap_or_else(|| SolveOptions::for_problem(&problem));
    let bridge = solve_bridge(&problem, opts)?;
    let l = bridge.kernel()?;
    let t = continuity_terms(mu, k, &l)?;
    let d = w2_exact(pi, mu)?;
    let e = kappa * rho * d;
    let ent_rhs = kappa * kappa * rho * d * d;
    let cov_rhs = e * e + t.trace_constant * e;
    Ok(vec![
        BoundReport::new(format!("{prefix}.entropy"), 2.0 * t.entropy, ent_rhs, slack_for(mu, ent_rhs)),
        BoundReport::new(format!("{prefix}.mean"), t.mean_gap, e, slack_for(mu, e)),
        BoundReport::new(format!("{prefix}.cov"), 0.5 * t.cov_gap, cov_rhs, slack_for(mu, cov_rhs))
            .with_param("trace_constant", t.trace_constant),
    ]
    .into_iter()
    .map(|r| {
        r.with_param("w2", d)
            .with_param("entropy", t.entropy)
            .with_param("rho", rho)
            .with_param("kappa", kappa)
            .with_param("bridge_iterations", bridge.iterations as f64)
    })
    .collect())
}

/// Gradient/Hessian identities of the potentials, the resulting bounds, and
/// the end-to-end decay estimates for the `U` side.
///
/// `tol` is the allowed identity residual (roundoff for Gaussians, stencil
/// error on grids); bound comparisons inherit it through their slack.
pub fn verify_potential_identities(
    prefix: &str,
    problem: &Problem,
    bridge: &Bridge,
    states: &[SinkhornState],
    c: &Constants,
    tol: f64,
) -> Result<Vec<BoundReport>> {
    let (u_star, v_star) = bridge.potentials();
    let l = bridge.kernel()?;
    let l_flat = bridge.conjugate_kernel()?;
    let chi = &c.chi;
    let chi_t = chi.transpose();
    let chi2 = c.kappa * c.kappa;
    let h0 = states.first().map(|s| bridge.kl_from(s)).transpose()?.unwrap_or(0.0);
    let c_mu_eta = trace_constant(problem.mu(), &l)?;
    let r = c.contraction();
    let grid = problem.is_grid();
    let bound_slack = |lhs_is_square: bool, rhs: f64| -> f64 {
        let base = if grid { discrete_slack(rhs) } else { GAUSSIAN_SLACK };
        if !grid {
            base
        } else if lhs_is_square {
            base + 2.0 * tol * rhs.max(0.0).sqrt() + tol * tol
        } else {
            base + tol
        }
    };
    let mut out = Vec::new();
    for s in states {
        let n = s.n();
        let (u_n, v_n) = s.potentials();
        let k = kernel_at(s)?;
        let even = s.is_even();
        let (nu, phi_n, phi_star, lk, left, right) = if even {
            (problem.mu(), u_n, &u_star, &l, chi_t.clone(), chi.clone())
        } else {
            (problem.eta(), v_n, &v_star, &l_flat, chi.clone(), chi_t.clone())
        };
        let side = if even { "u" } else { "v" };
        let tag = format!("{prefix}.{side}.n{n:03}");
        let dg = grad_potential(phi_n)?.sub(&grad_potential(phi_star)?)?;
        let dh = hess_potential(phi_n)?.sub(&hess_potential(phi_star)?)?;
        let dm = cond_mean(&k).sub(&cond_mean(lk))?;
        let ds = cond_cov(&k).sub(&cond_cov(lk))?;
        let grad_res = field_norm(&dg.sub(&dm.left_mul(&left))?, 2.0, nu)?;
        let hess_res = field_norm(&dh.sub(&ds.sandwich(&left, &right)?)?, 1.0, nu)?;
        out.push(BoundReport::new(format!("{tag}.grad_identity"), grad_res, 0.0, tol));
        out.push(BoundReport::new(format!("{tag}.hess_identity"), hess_res, 0.0, tol));

        let g = field_norm(&dg, 2.0, nu)?;
        let h = field_norm(&dh, 1.0, nu)?;
        let m = field_norm(&dm, 2.0, nu)?;
        let sg = field_norm(&ds, 1.0, nu)?;
        // the U-side statement is for n >= 1 pairs, the V-side for all odd indices
        if !even || n >= 2 {
            let rhs = chi2 * m * m;
            out.push(BoundReport::new(format!("{tag}.grad_bound"), g * g, rhs, bound_slack(true, rhs)).with_constants(c));
            let rhs = chi2 * sg;
            out.push(BoundReport::new(format!("{tag}.hess_bound"), h, rhs, bound_slack(false, rhs)).with_constants(c));
        }
        if even && n >= 2 {
            let k2 = (n / 2) as i32;
            let decay = r.powi(k2) * h0;
            let half = r.powf(k2 as f64 / 2.0) * h0.sqrt();
            let mean_rhs = 2.0 * c.rho_v * decay;
            let cov_rhs = 4.0 * c.rho_v * decay + 2.0 * c_mu_eta * (2.0 * c.rho_v).sqrt() * half;
            let e = |name: &str, lhs: f64, rhs: f64, slack: f64| {
                BoundReport::new(format!("{tag}.{name}"), lhs, rhs, slack)
                    .with_constants(c)
                    .with_param("h0", h0)
                    .with_param("trace_constant", c_mu_eta)
            };
            out.push(e("mean_decay", m * m, mean_rhs, slack_for(nu, mean_rhs)));
            out.push(e("cov_decay", sg, cov_rhs, slack_for(nu, cov_rhs)));
            out.push(e("grad_decay", g * g, chi2 * mean_rhs, bound_slack(true, chi2 * mean_rhs)));
            out.push(e("hess_decay", h, chi2 * cov_rhs, bound_slack(false, chi2 * cov_rhs)));
        }
    }
    Ok(out)
}

/// Functional inequalities of a Gaussian reference `mu` with `rho = ||Sigma_mu||_2`:
/// `D2^2 / 2 <= rho H(nu|mu)` and `H(nu|mu) <= rho J(nu|mu) / 2`.
pub fn verify_gaussian_functional(prefix: &str, nu: &Measure, mu: &Measure) -> Result<Vec<BoundReport>> {
    let g = mu.as_gaussian()?;
    let rho = spectral_norm(g.cov());
    let h = metrics::kl(nu, mu)?;
    let d = metrics::w2(nu, mu)?.0;
    let j = metrics::fisher(nu, mu)?;
    Ok(vec![
        BoundReport::new(format!("{prefix}.talagrand"), 0.5 * d * d, rho * h, GAUSSIAN_SLACK),
        BoundReport::new(format!("{prefix}.log_sobolev"), h, 0.5 * rho * j, GAUSSIAN_SLACK),
    ]
    .into_iter()
    .map(|r| r.with_param("rho", rho))
    .collect())
}

/// `(m, sigma)` of the bridge kernel `L` and of its conjugate `L♭`.
pub fn bridge_fields(bridge: &Bridge) -> Result<(Field, Field, Field, Field)> {
    let l = disintegrate(&bridge.joint(), Coordinate::First)?.kernel;
    let lf = disintegrate(&flip(&bridge.joint()), Coordinate::First)?.kernel;
    Ok((cond_mean(&l), cond_cov(&l), cond_mean(&lf), cond_cov(&lf)))
}

#[cfg(test)]
mod tests;

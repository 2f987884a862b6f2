//! JSON model definitions and the problems they describe.
//!
//! ```json
//! {
//!   "backend": "grid",
//!   "d": 1,
//!   "mu":  {"mean": [0.0], "cov": [[1.0]]},
//!   "eta": {"mean": [2.0], "cov": [[0.5]], "perturbation": {"amplitude": 0.05, "frequency": 1.0}},
//!   "kernel": {"alpha": [0.0], "beta": [[1.0]], "tau": [[1.0]]},
//!   "grid": {"lo": [-6.0], "hi": [6.24], "n": 400}
//! }
//! ```
//!
//! Optional keys: `suite`, `tol`, `max_iter`, `steps`, `rho_u`, `rho_v`, `oracle`,
//! and `kernel.cutoff`, a Mahalanobis radius outside which the grid reference is
//! zero (grid backend only).

use serde::Deserialize;

use crate::bounds::{rho_from_curvature, Constants, Rho};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measures::{GaussianKernel, GaussianMeasure, GridLayout, GridMeasure, Support};
use crate::sinkhorn::{Problem, SolveOptions, DEFAULT_MAX_ITER, DEFAULT_TOL_GAUSSIAN, DEFAULT_TOL_GRID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Grid,
    Gaussian,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarginal {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    #[serde(default)]
    perturbation: Option<Perturbation>,
}

/// `U(x) += amplitude * sum_k cos(frequency * x_k)`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    pub frequency: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    alpha: Vec<f64>,
    beta: Vec<Vec<f64>>,
    tau: Vec<Vec<f64>>,
    #[serde(default)]
    cutoff: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: usize,
}

/// Tolerances of the cross-backend comparison.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleTolerances {
    pub mean: f64,
    pub cov: f64,
    /// Relative, on `H(P* | P_n)` while it exceeds `kl_floor`.
    pub kl: f64,
    pub kl_floor: f64,
    pub potential: f64,
}

impl Default for OracleTolerances {
    fn default() -> Self {
        Self { mean: 1e-3, cov: 1e-3, kl: 1e-3, kl_floor: 1e-6, potential: 5e-3 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    backend: BackendKind,
    d: usize,
    mu: RawMarginal,
    eta: RawMarginal,
    kernel: RawKernel,
    #[serde(default)]
    grid: Option<RawGrid>,
    #[serde(default)]
    suite: Option<String>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    max_iter: Option<usize>,
    #[serde(default)]
    steps: Option<usize>,
    #[serde(default)]
    rho_u: Option<f64>,
    #[serde(default)]
    rho_v: Option<f64>,
    #[serde(default)]
    oracle: Option<OracleTolerances>,
}

/// A marginal: a Gaussian, optionally tilted by a cosine perturbation (grid only).
#[derive(Clone, Debug)]
pub struct Marginal {
    pub gaussian: GaussianMeasure,
    pub perturbation: Option<Perturbation>,
}

impl Marginal {
    /// Lower bound on the Hessian of the potential.
    pub fn curvature(&self) -> f64 {
        let lmax = self.gaussian.cov().clone().symmetric_eigen().eigenvalues.max();
        let bend = self.perturbation.map_or(0.0, |p| p.amplitude.abs() * p.frequency * p.frequency);
        1.0 / lmax - bend
    }

    pub fn potential(&self, x: &Vector) -> f64 {
        let prec = linalg::spd_inverse(self.gaussian.cov()).expect("validated covariance");
        let c = x - self.gaussian.mean();
        let base = 0.5 * c.dot(&(&prec * &c));
        base + self.perturbation.map_or(0.0, |p| p.amplitude * x.iter().map(|t| (p.frequency * t).cos()).sum::<f64>())
    }

    pub fn on_grid(&self, support: &Support) -> Result<GridMeasure> {
        GridMeasure::from_potential(support.clone(), |x| self.potential(x))
    }
}

/// A validated model.
#[derive(Clone, Debug)]
pub struct Model {
    pub backend: BackendKind,
    pub d: usize,
    pub mu: Marginal,
    pub eta: Marginal,
    pub kernel: GaussianKernel,
    /// Grid reference truncation radius; `None` keeps the full Gaussian rows.
    pub cutoff: Option<f64>,
    /// Grid used by the grid backend and by cross-backend comparisons (`None` for d > 2).
    pub grid: Option<GridLayout>,
    pub suite: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub steps: usize,
    pub rho_u: Option<f64>,
    pub rho_v: Option<f64>,
    pub oracle: OracleTolerances,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn vector(xs: &[f64], d: usize, what: &str) -> Result<Vector> {
    if xs.len() != d {
        return Err(config(format!("{what} has {} entries, expected {d}", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(config(format!("{what} has non-finite entries")));
    }
    Ok(Vector::from_column_slice(xs))
}

fn matrix(rows: &[Vec<f64>], d: usize, what: &str) -> Result<Matrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(config(format!("{what} must be {d}x{d}")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(config(format!("{what} has non-finite entries")));
    }
    Ok(Matrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn marginal(raw: &RawMarginal, d: usize, what: &str) -> Result<Marginal> {
    let gaussian = GaussianMeasure::new(vector(&raw.mean, d, &format!("{what}.mean"))?, matrix(&raw.cov, d, &format!("{what}.cov"))?)
        .map_err(|e| config(format!("{what}: {e}")))?;
    if let Some(p) = raw.perturbation {
        if !(p.amplitude.is_finite() && p.frequency.is_finite()) {
            return Err(config(format!("{what}.perturbation must be finite")));
        }
    }
    Ok(Marginal { gaussian, perturbation: raw.perturbation })
}

/// Default grid: union of `mean +- 6 sd` boxes of both marginals.
pub fn default_layout(mu: &GaussianMeasure, eta: &GaussianMeasure) -> Result<GridLayout> {
    let n = if mu.dim() == 1 { 400 } else { 40 };
    GridLayout::union(&GridLayout::around(mu.mean(), mu.cov(), 6.0, n)?, &GridLayout::around(eta.mean(), eta.cov(), 6.0, n)?)
}

impl Model {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text).map_err(|e| config(format!("malformed model: {e}")))?;
        if !(raw.d == 1 || raw.d == 2) && raw.backend == BackendKind::Grid {
            return Err(config(format!("grid models support d = 1 or 2, got {}", raw.d)));
        }
        if raw.d == 0 {
            return Err(config("d must be positive"));
        }
        let d = raw.d;
        let mu = marginal(&raw.mu, d, "mu")?;
        let eta = marginal(&raw.eta, d, "eta")?;
        if raw.backend == BackendKind::Gaussian && (mu.perturbation.is_some() || eta.perturbation.is_some()) {
            return Err(config("perturbed marginals need the grid backend"));
        }
        let kernel = GaussianKernel::new(
            vector(&raw.kernel.alpha, d, "kernel.alpha")?,
            matrix(&raw.kernel.beta, d, "kernel.beta")?,
            matrix(&raw.kernel.tau, d, "kernel.tau")?,
        )
        .map_err(|e| config(format!("kernel: {e}")))?;
        if let Some(c) = raw.kernel.cutoff {
            if !(c > 0.0 && c.is_finite()) {
                return Err(config("kernel.cutoff must be positive"));
            }
            if raw.backend == BackendKind::Gaussian {
                return Err(config("kernel.cutoff needs the grid backend"));
            }
        }
        let grid = match &raw.grid {
            Some(g) => Some(GridLayout::new(g.lo.clone(), g.hi.clone(), g.n).map_err(|e| config(format!("grid: {e}")))?),
            None if d <= 2 => Some(default_layout(&mu.gaussian, &eta.gaussian)?),
            None => None,
        };
        if let Some(g) = &grid {
            if g.dim() != d {
                return Err(config(format!("grid is {}-dimensional, model is {d}-dimensional", g.dim())));
            }
        }
        if let Some(t) = raw.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config("tol must be positive"));
            }
        }
        for (name, r) in [("rho_u", raw.rho_u), ("rho_v", raw.rho_v)] {
            if let Some(r) = r {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(config(format!("{name} must be positive")));
                }
            }
        }
        Ok(Self {
            backend: raw.backend,
            d,
            mu,
            eta,
            kernel,
            cutoff: raw.kernel.cutoff,
            grid,
            suite: raw.suite,
            tol: raw.tol,
            max_iter: raw.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            steps: raw.steps.unwrap_or(20),
            rho_u: raw.rho_u,
            rho_v: raw.rho_v,
            oracle: raw.oracle.unwrap_or_default(),
        })
    }

    /// `mu = N(0, 1)`, `eta = N(2, 0.5)`, `K_0: x -> N(x, 1)`, grid `[-6, 6]` with 400 nodes.
    pub fn default_1d(backend: BackendKind) -> Self {
        let g = |m: f64, s: f64| GaussianMeasure::new(Vector::from_element(1, m), Matrix::from_element(1, 1, s)).expect("valid");
        let (mu, eta) = (g(0.0, 1.0), g(2.0, 0.5));
        let grid = Some(GridLayout::new(vec![-6.0], vec![6.0], 400).expect("valid layout"));
        Self {
            backend,
            d: 1,
            mu: Marginal { gaussian: mu, perturbation: None },
            eta: Marginal { gaussian: eta, perturbation: None },
            kernel: GaussianKernel::new(Vector::zeros(1), Matrix::identity(1, 1), Matrix::identity(1, 1)).expect("valid"),
            cutoff: None,
            grid,
            suite: None,
            tol: None,
            max_iter: DEFAULT_MAX_ITER,
            steps: 20,
            rho_u: None,
            rho_v: None,
            oracle: OracleTolerances::default(),
        }
    }

    pub fn with_backend(&self, backend: BackendKind) -> Result<Self> {
        if backend == BackendKind::Gaussian && (self.mu.perturbation.is_some() || self.eta.perturbation.is_some()) {
            return Err(config("perturbed marginals have no Gaussian counterpart"));
        }
        if backend == BackendKind::Gaussian && self.cutoff.is_some() {
            return Err(config("a truncated reference has no Gaussian counterpart"));
        }
        Ok(Self { backend, ..self.clone() })
    }

    pub fn problem(&self) -> Result<Problem> {
        match self.backend {
            BackendKind::Gaussian => Problem::new(
                self.mu.gaussian.clone().into(),
                self.eta.gaussian.clone().into(),
                self.kernel.clone().into(),
            ),
            BackendKind::Grid => {
                let layout = self.grid.clone().ok_or_else(|| config("grid backend needs d = 1 or 2"))?;
                let s = Support::from_layout(layout);
                let k = match self.cutoff {
                    Some(c) => self.kernel.discretize_truncated(&s, &s, c)?,
                    None => self.kernel.discretize(&s, &s)?,
                };
                Problem::new(self.mu.on_grid(&s)?.into(), self.eta.on_grid(&s)?.into(), k.into())
            }
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let default = match self.backend {
            BackendKind::Grid => DEFAULT_TOL_GRID,
            BackendKind::Gaussian => DEFAULT_TOL_GAUSSIAN,
        };
        SolveOptions { tol: self.tol.unwrap_or(default), max_iter: self.max_iter }
    }

    /// `rho_u`, `rho_v` from curvature, or from the config (uncertified).
    pub fn constants(&self) -> Result<Constants> {
        let side = |m: &Marginal, over: Option<f64>, name: &str| -> Result<(f64, bool)> {
            if let Some(r) = over {
                return Ok((r, false));
            }
            match rho_from_curvature(m.curvature(), 0.0, 0.0)? {
                Rho::Known(r) => Ok((r, true)),
                Rho::Unknown => Err(config(format!("{name} must be supplied"))),
            }
        };
        let (ru, cu) = side(&self.mu, self.rho_u, "rho_u")?;
        let (rv, cv) = side(&self.eta, self.rho_v, "rho_v")?;
        Constants::new(&self.kernel, ru, rv, cu && cv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSS1D: &str = r#"{
        "backend": "gaussian", "d": 1,
        "mu": {"mean": [0.0], "cov": [[1.0]]},
        "eta": {"mean": [2.0], "cov": [[0.5]]},
        "kernel": {"alpha": [0.0], "beta": [[1.0]], "tau": [[1.0]]}
    }"#;

    #[test]
    fn parses_and_defaults() {
        let m = Model::from_json(GAUSS1D).unwrap();
        assert_eq!(m.backend, BackendKind::Gaussian);
        let g = m.grid.clone().unwrap();
        assert_eq!(g.nodes_per_axis(), 400);
        assert_eq!(g.lo(), &[-6.0]);
        assert!((g.hi()[0] - (2.0 + 6.0 * 0.5f64.sqrt())).abs() < 1e-12);
        let c = m.constants().unwrap();
        assert!(c.certified);
        assert!((c.rho_u - 1.0).abs() < 1e-12 && (c.rho_v - 0.5).abs() < 1e-12);
        assert!(m.problem().is_ok());
        assert!(m.with_backend(BackendKind::Grid).unwrap().problem().unwrap().is_grid());
    }

    #[test]
    fn rejects_bad_models() {
        assert!(matches!(Model::from_json("{"), Err(Error::Config(_))));
        assert!(matches!(Model::from_json(&GAUSS1D.replace("[[0.5]]", "[[-0.5]]")), Err(Error::Config(_))));
        assert!(matches!(Model::from_json(&GAUSS1D.replace("\"d\": 1", "\"d\": 2")), Err(Error::Config(_))));
        assert!(matches!(Model::from_json(&GAUSS1D.replace("\"beta\"", "\"betta\"")), Err(Error::Config(_))));
        let tilted = GAUSS1D.replace("[[0.5]]}", "[[0.5]], \"perturbation\": {\"amplitude\": 0.1, \"frequency\": 1.0}}");
        assert!(matches!(Model::from_json(&tilted), Err(Error::Config(_))));
        let grid = tilted.replace("\"gaussian\"", "\"grid\"");
        let m = Model::from_json(&grid).unwrap();
        // curvature 1/0.5 - 0.1
        assert!((m.constants().unwrap().rho_v - 1.0 / 1.9).abs() < 1e-12);
    }

    #[test]
    fn nonconvex_perturbation_needs_rho() {
        let text = GAUSS1D
            .replace("\"gaussian\"", "\"grid\"")
            .replace("[[0.5]]}", "[[0.5]], \"perturbation\": {\"amplitude\": 3.0, \"frequency\": 1.0}}");
        let m = Model::from_json(&text).unwrap();
        assert!(matches!(m.constants(), Err(Error::Domain(_))));
        let m = Model::from_json(&text.replace("\"d\": 1,", "\"d\": 1, \"rho_v\": 0.8,")).unwrap();
        let c = m.constants().unwrap();
        assert!(!c.certified && c.rho_v == 0.8);
    }
}

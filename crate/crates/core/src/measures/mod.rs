//! Probability measures, Markov kernels and couplings on `R^d`, in two
//! backends: weighted grids and exact Gaussians.
//!
//! Every value is immutable once built. Mixing backends in one operation is
//! rejected; go through [`discretize`] / [`GaussianKernel::discretize`] to
//! move a Gaussian model onto a grid.

pub mod grid;

use std::sync::Arc;

pub use grid::GridLayout;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Tolerance on total mass and row sums.
pub const MASS_TOL: f64 = 1e-12;

/// A finite set of distinct points in `R^d`, optionally laid out on a regular grid.
#[derive(Clone, Debug)]
pub struct Support {
    points: Arc<Vec<Vector>>,
    layout: Option<Arc<GridLayout>>,
}

impl Support {
    pub fn from_layout(layout: GridLayout) -> Self {
        Self {
            points: Arc::new(layout.points()),
            layout: Some(Arc::new(layout)),
        }
    }

    pub fn from_points(points: Vec<Vector>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidMeasure("empty support".into()));
        };
        let d = first.len();
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::Dimension("support points must share one positive dimension".into()));
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidMeasure("non-finite support point".into()));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .iter()
                .zip(points[b].iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if order.windows(2).any(|w| points[w[0]] == points[w[1]]) {
            return Err(Error::InvalidMeasure("support points must be pairwise distinct".into()));
        }
        Ok(Self { points: Arc::new(points), layout: None })
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Vector {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn layout(&self) -> Option<&GridLayout> {
        self.layout.as_deref()
    }

    /// Lebesgue weight of one atom: the grid cell volume, or 1 for scattered points.
    pub fn cell_volume(&self) -> f64 {
        self.layout.as_ref().map_or(1.0, |l| l.cell_volume())
    }

    pub fn same_as(&self, other: &Support) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points == other.points
    }
}

/// Weighted discrete measure on a [`Support`].
#[derive(Clone, Debug)]
pub struct GridMeasure {
    support: Support,
    weights: Vector,
    cell_volume: f64,
}

impl GridMeasure {
    pub fn new(support: Support, weights: Vector) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} support points",
                weights.len(),
                support.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total = weights.sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, expected 1")));
        }
        let cell_volume = support.cell_volume();
        Ok(Self { support, weights, cell_volume })
    }

    /// Normalizes nonnegative raw weights.
    pub fn normalized(support: Support, raw: Vector) -> Result<Self> {
        let total = raw.sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidMeasure(format!("cannot normalize total mass {total}")));
        }
        Self::new(support, raw / total)
    }

    /// Gibbs measure `exp(-U)` normalized on the grid.
    pub fn from_potential(support: Support, potential: impl Fn(&Vector) -> f64) -> Result<Self> {
        let log_w: Vec<f64> = support.points().iter().map(|x| -potential(x)).collect();
        let z = linalg::log_sum_exp(log_w.iter().copied());
        if !z.is_finite() {
            return Err(Error::InvalidMeasure("potential does not define a finite measure on the grid".into()));
        }
        let w = Vector::from_iterator(log_w.len(), log_w.iter().map(|l| (l - z).exp()));
        Self::normalized(support, w)
    }

    pub fn dirac(point: Vector) -> Result<Self> {
        Self::new(Support::from_points(vec![point])?, Vector::from_element(1, 1.0))
    }

    pub fn uniform(support: Support) -> Result<Self> {
        let n = support.len();
        Self::normalized(support, Vector::from_element(n, 1.0))
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// `-log` of the density w.r.t. the cell volume; `+inf` on zero-weight atoms.
    pub fn potential(&self) -> Vector {
        self.weights.map(|w| -(w / self.cell_volume).ln())
    }

    pub fn mean(&self) -> Vector {
        self.support
            .points()
            .iter()
            .zip(self.weights.iter())
            .fold(Vector::zeros(self.dim()), |acc, (x, w)| acc + x * *w)
    }

    pub fn covariance(&self) -> Matrix {
        let m = self.mean();
        self.support
            .points()
            .iter()
            .zip(self.weights.iter())
            .fold(Matrix::zeros(self.dim(), self.dim()), |acc, (x, w)| {
                let c = x - &m;
                acc + &c * c.transpose() * *w
            })
    }
}

/// Gaussian measure `N(mean, cov)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMeasure {
    mean: Vector,
    cov: Matrix,
}

impl GaussianMeasure {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() || mean.is_empty() {
            return Err(Error::Dimension(format!(
                "mean of length {} with {}x{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        if linalg::asymmetry(&cov) > MASS_TOL {
            return Err(Error::NotSpd("covariance is not symmetric".into()));
        }
        let cov = linalg::ensure_spd(&cov, "covariance")?;
        Ok(Self { mean, cov })
    }

    pub fn standard(d: usize) -> Self {
        Self { mean: Vector::zeros(d), cov: Matrix::identity(d, d) }
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_density(&self, x: &Vector) -> f64 {
        let d = self.dim() as f64;
        let prec = linalg::spd_inverse(&self.cov).expect("validated covariance");
        let c = x - &self.mean;
        let logdet = linalg::log_det_spd(&self.cov).expect("validated covariance");
        -0.5 * (c.dot(&(prec * &c)) + d * (2.0 * std::f64::consts::PI).ln() + logdet)
    }
}

/// A probability measure in either backend.
#[derive(Clone, Debug)]
pub enum Measure {
    Grid(GridMeasure),
    Gaussian(GaussianMeasure),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Grid(g) => g.dim(),
            Measure::Gaussian(g) => g.dim(),
        }
    }

    pub fn mean(&self) -> Vector {
        match self {
            Measure::Grid(g) => g.mean(),
            Measure::Gaussian(g) => g.mean.clone(),
        }
    }

    pub fn covariance(&self) -> Matrix {
        match self {
            Measure::Grid(g) => g.covariance(),
            Measure::Gaussian(g) => g.cov.clone(),
        }
    }

    pub fn as_grid(&self) -> Result<&GridMeasure> {
        match self {
            Measure::Grid(g) => Ok(g),
            Measure::Gaussian(_) => Err(Error::Dimension("expected a grid measure".into())),
        }
    }

    pub fn as_gaussian(&self) -> Result<&GaussianMeasure> {
        match self {
            Measure::Gaussian(g) => Ok(g),
            Measure::Grid(_) => Err(Error::Dimension("expected a Gaussian measure".into())),
        }
    }
}

impl From<GridMeasure> for Measure {
    fn from(m: GridMeasure) -> Self {
        Measure::Grid(m)
    }
}

impl From<GaussianMeasure> for Measure {
    fn from(m: GaussianMeasure) -> Self {
        Measure::Gaussian(m)
    }
}

/// Row-stochastic matrix between two supports: `rows[(i, j)] = K(x_i, {y_j})`.
#[derive(Clone, Debug)]
pub struct GridKernel {
    source: Support,
    target: Support,
    rows: Matrix,
    log_rows: Matrix,
}

impl GridKernel {
    pub fn new(source: Support, target: Support, rows: Matrix) -> Result<Self> {
        if rows.nrows() != source.len() || rows.ncols() != target.len() {
            return Err(Error::Dimension(format!(
                "{}x{} kernel between supports of sizes {} and {}",
                rows.nrows(),
                rows.ncols(),
                source.len(),
                target.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMeasure("kernel entries must be finite and nonnegative".into()));
        }
        for (i, row) in rows.row_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidMeasure(format!("kernel row {i} sums to {s}")));
            }
        }
        let log_rows = rows.map(f64::ln);
        Ok(Self { source, target, rows, log_rows })
    }

    /// Builds a kernel from unnormalized log-weights, normalizing each row in log space.
    pub fn from_log_weights(source: Support, target: Support, log_w: &Matrix) -> Result<Self> {
        if log_w.nrows() != source.len() || log_w.ncols() != target.len() {
            return Err(Error::Dimension("log-weight matrix does not match supports".into()));
        }
        let mut log_rows = log_w.clone();
        for mut row in log_rows.row_iter_mut() {
            let z = linalg::log_sum_exp(row.iter().copied());
            if !z.is_finite() {
                return Err(Error::InvalidMeasure("kernel row with no finite weight".into()));
            }
            row.add_scalar_mut(-z);
        }
        let rows = log_rows.map(f64::exp);
        Ok(Self { source, target, rows, log_rows })
    }

    pub fn identity(support: Support) -> Self {
        let n = support.len();
        Self::new(support.clone(), support, Matrix::identity(n, n)).expect("identity is stochastic")
    }

    /// Kernel whose every row is `target`.
    pub fn constant(source: Support, target: &GridMeasure) -> Self {
        let rows = Matrix::from_fn(source.len(), target.support.len(), |_, j| target.weights[j]);
        Self::new(source, target.support.clone(), rows).expect("rows copy a probability vector")
    }

    pub fn source(&self) -> &Support {
        &self.source
    }

    pub fn target(&self) -> &Support {
        &self.target
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn log_rows(&self) -> &Matrix {
        &self.log_rows
    }

    /// `delta_{x_i} K` as a measure on the target support.
    pub fn row(&self, i: usize) -> GridMeasure {
        GridMeasure {
            support: self.target.clone(),
            weights: self.rows.row(i).transpose(),
            cell_volume: self.target.cell_volume(),
        }
    }
}

/// Affine-Gaussian transition `x -> N(alpha + beta x, tau)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    alpha: Vector,
    beta: Matrix,
    tau: Matrix,
}

impl GaussianKernel {
    pub fn new(alpha: Vector, beta: Matrix, tau: Matrix) -> Result<Self> {
        let d = alpha.len();
        if d == 0 || beta.shape() != (d, d) || tau.shape() != (d, d) {
            return Err(Error::Dimension("kernel alpha/beta/tau shapes disagree".into()));
        }
        if beta.iter().any(|v| !v.is_finite()) || alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite kernel coefficients".into()));
        }
        if linalg::asymmetry(&tau) > MASS_TOL {
            return Err(Error::NotSpd("tau is not symmetric".into()));
        }
        let tau = linalg::ensure_spd(&tau, "tau")?;
        let sv = beta.clone().singular_values();
        if !(sv.min() > 0.0 && (sv.max() / sv.min()).is_finite() && sv.min() > 1e-14 * sv.max()) {
            return Err(Error::Domain("beta must be invertible".into()));
        }
        Ok(Self { alpha, beta, tau })
    }

    pub fn alpha(&self) -> &Vector {
        &self.alpha
    }

    pub fn beta(&self) -> &Matrix {
        &self.beta
    }

    pub fn tau(&self) -> &Matrix {
        &self.tau
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn tau_inverse(&self) -> Matrix {
        linalg::spd_inverse(&self.tau).expect("validated tau")
    }

    /// `tau^{-1} beta`.
    pub fn chi(&self) -> Matrix {
        self.tau_inverse() * &self.beta
    }

    pub fn mean_at(&self, x: &Vector) -> Vector {
        &self.alpha + &self.beta * x
    }

    pub fn row(&self, x: &Vector) -> GaussianMeasure {
        GaussianMeasure { mean: self.mean_at(x), cov: self.tau.clone() }
    }

    /// Grid kernel with rows proportional to the transition density at the target nodes.
    pub fn discretize(&self, source: &Support, target: &Support) -> Result<GridKernel> {
        if source.dim() != self.dim() || target.dim() != self.dim() {
            return Err(Error::Dimension("kernel and grid dimensions differ".into()));
        }
        let prec = self.tau_inverse();
        let log_w = Matrix::from_fn(source.len(), target.len(), |i, j| {
            let r = target.point(j) - self.mean_at(source.point(i));
            -0.5 * r.dot(&(&prec * &r))
        });
        GridKernel::from_log_weights(source.clone(), target.clone(), &log_w)
    }

    /// Like [`GaussianKernel::discretize`], with each row restricted to the
    /// ellipsoid of Mahalanobis radius `cutoff` around its mean.
    pub fn discretize_truncated(&self, source: &Support, target: &Support, cutoff: f64) -> Result<GridKernel> {
        if !(cutoff > 0.0) {
            return Err(Error::Domain(format!("kernel cutoff must be positive, got {cutoff}")));
        }
        let full = self.discretize(source, target)?;
        let prec = self.tau_inverse();
        let mut log_w = full.log_rows().clone();
        for i in 0..source.len() {
            let m = self.mean_at(source.point(i));
            for j in 0..target.len() {
                let r = target.point(j) - &m;
                if r.dot(&(&prec * &r)) > cutoff * cutoff {
                    log_w[(i, j)] = f64::NEG_INFINITY;
                }
            }
            if log_w.row(i).iter().all(|&w| w == f64::NEG_INFINITY) {
                return Err(Error::Support(format!("reference row {i} has no grid node within the cutoff")));
            }
        }
        GridKernel::from_log_weights(source.clone(), target.clone(), &log_w)
    }
}

/// A Markov transition in either backend.
#[derive(Clone, Debug)]
pub enum Kernel {
    Grid(GridKernel),
    Gaussian(GaussianKernel),
}

impl Kernel {
    pub fn as_grid(&self) -> Result<&GridKernel> {
        match self {
            Kernel::Grid(k) => Ok(k),
            Kernel::Gaussian(_) => Err(Error::Dimension("expected a grid kernel".into())),
        }
    }

    pub fn as_gaussian(&self) -> Result<&GaussianKernel> {
        match self {
            Kernel::Gaussian(k) => Ok(k),
            Kernel::Grid(_) => Err(Error::Dimension("expected a Gaussian kernel".into())),
        }
    }
}

impl From<GridKernel> for Kernel {
    fn from(k: GridKernel) -> Self {
        Kernel::Grid(k)
    }
}

impl From<GaussianKernel> for Kernel {
    fn from(k: GaussianKernel) -> Self {
        Kernel::Gaussian(k)
    }
}

/// Discrete coupling: `mass[(i, j)] = P({x_i} x {y_j})`.
#[derive(Clone, Debug)]
pub struct DiscreteJoint {
    x: Support,
    y: Support,
    mass: Matrix,
}

impl DiscreteJoint {
    pub fn new(x: Support, y: Support, mass: Matrix) -> Result<Self> {
        if mass.nrows() != x.len() || mass.ncols() != y.len() {
            return Err(Error::Dimension("mass matrix does not match supports".into()));
        }
        if mass.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMeasure("joint mass must be finite and nonnegative".into()));
        }
        let total = mass.sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("joint mass sums to {total}")));
        }
        Ok(Self { x, y, mass })
    }

    pub fn x_support(&self) -> &Support {
        &self.x
    }

    pub fn y_support(&self) -> &Support {
        &self.y
    }

    pub fn mass(&self) -> &Matrix {
        &self.mass
    }

    fn marginal(support: &Support, weights: Vector) -> GridMeasure {
        let total = weights.sum();
        GridMeasure {
            support: support.clone(),
            weights: weights / total,
            cell_volume: support.cell_volume(),
        }
    }

    pub fn first_marginal(&self) -> GridMeasure {
        let w = Vector::from_iterator(self.mass.nrows(), self.mass.row_iter().map(|r| r.sum()));
        Self::marginal(&self.x, w)
    }

    pub fn second_marginal(&self) -> GridMeasure {
        let w = Vector::from_iterator(self.mass.ncols(), self.mass.column_iter().map(|c| c.sum()));
        Self::marginal(&self.y, w)
    }
}

/// Jointly Gaussian coupling on `R^d x R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianJoint {
    mean: Vector,
    cov: Matrix,
}

impl GaussianJoint {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if mean.len() % 2 != 0 || mean.is_empty() {
            return Err(Error::Dimension("joint mean must have even length 2d".into()));
        }
        let g = GaussianMeasure::new(mean, cov)?;
        Ok(Self { mean: g.mean, cov: g.cov })
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    /// Dimension of one coordinate.
    pub fn d(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn as_measure(&self) -> GaussianMeasure {
        GaussianMeasure { mean: self.mean.clone(), cov: self.cov.clone() }
    }

    pub fn first_marginal(&self) -> GaussianMeasure {
        let d = self.d();
        GaussianMeasure {
            mean: self.mean.rows(0, d).into_owned(),
            cov: self.cov.view((0, 0), (d, d)).into_owned(),
        }
    }

    pub fn second_marginal(&self) -> GaussianMeasure {
        let d = self.d();
        GaussianMeasure {
            mean: self.mean.rows(d, d).into_owned(),
            cov: self.cov.view((d, d), (d, d)).into_owned(),
        }
    }

    /// `E[(X - EX)(Y - EY)']`.
    pub fn cross_cov(&self) -> Matrix {
        let d = self.d();
        self.cov.view((0, d), (d, d)).into_owned()
    }
}

/// A coupling on `R^d x R^d` in either backend.
#[derive(Clone, Debug)]
pub enum Joint {
    Discrete(DiscreteJoint),
    Gaussian(GaussianJoint),
}

impl Joint {
    pub fn first_marginal(&self) -> Measure {
        match self {
            Joint::Discrete(j) => j.first_marginal().into(),
            Joint::Gaussian(j) => j.first_marginal().into(),
        }
    }

    pub fn second_marginal(&self) -> Measure {
        match self {
            Joint::Discrete(j) => j.second_marginal().into(),
            Joint::Gaussian(j) => j.second_marginal().into(),
        }
    }

    pub fn as_discrete(&self) -> Result<&DiscreteJoint> {
        match self {
            Joint::Discrete(j) => Ok(j),
            Joint::Gaussian(_) => Err(Error::Dimension("expected a discrete joint".into())),
        }
    }

    pub fn as_gaussian(&self) -> Result<&GaussianJoint> {
        match self {
            Joint::Gaussian(j) => Ok(j),
            Joint::Discrete(_) => Err(Error::Dimension("expected a Gaussian joint".into())),
        }
    }
}

/// Which coordinate of a joint to condition on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinate {
    First,
    Second,
}

/// Non-fatal events raised while disintegrating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    /// The marginal atom carries no mass; its kernel row was set to uniform.
    ZeroMassRow(usize),
}

/// `P = marginal x kernel`.
#[derive(Clone, Debug)]
pub struct Disintegration {
    pub marginal: Measure,
    pub kernel: Kernel,
    pub warnings: Vec<Warning>,
}

fn mismatch(what: &str) -> Error {
    Error::Dimension(format!("{what}: measure and kernel live on different spaces or backends"))
}

/// `mu x K`, the coupling `mu(dx) K(x, dy)`.
pub fn product(mu: &Measure, k: &Kernel) -> Result<Joint> {
    match (mu, k) {
        (Measure::Grid(m), Kernel::Grid(k)) => {
            if !m.support.same_as(&k.source) {
                return Err(mismatch("product"));
            }
            let mut mass = k.rows.clone();
            for (mut row, w) in mass.row_iter_mut().zip(m.weights.iter()) {
                row *= *w;
            }
            Ok(Joint::Discrete(DiscreteJoint { x: m.support.clone(), y: k.target.clone(), mass }))
        }
        (Measure::Gaussian(m), Kernel::Gaussian(k)) => {
            if m.dim() != k.dim() {
                return Err(mismatch("product"));
            }
            let s = &m.cov;
            let sb = s * k.beta.transpose();
            let bs = &k.beta * s;
            let tail = linalg::symmetrize(&(&k.tau + &k.beta * &sb));
            let cov = linalg::from_blocks(s, &sb, &bs, &tail);
            let mean = linalg::stack(&m.mean, &k.mean_at(&m.mean));
            Ok(Joint::Gaussian(GaussianJoint::new(mean, linalg::symmetrize(&cov))?))
        }
        _ => Err(mismatch("product")),
    }
}

/// `mu K`, the second marginal of `mu x K`.
pub fn push(mu: &Measure, k: &Kernel) -> Result<Measure> {
    match (mu, k) {
        (Measure::Grid(m), Kernel::Grid(kk)) => {
            if !m.support.same_as(&kk.source) {
                return Err(mismatch("push"));
            }
            let w = kk.rows.tr_mul(&m.weights);
            Ok(DiscreteJoint::marginal(&kk.target, w).into())
        }
        (Measure::Gaussian(m), Kernel::Gaussian(kk)) => {
            if m.dim() != kk.dim() {
                return Err(mismatch("push"));
            }
            let cov = linalg::symmetrize(&(&kk.tau + &kk.beta * &m.cov * kk.beta.transpose()));
            Ok(GaussianMeasure::new(kk.mean_at(&m.mean), cov)?.into())
        }
        _ => Err(mismatch("push")),
    }
}

/// The conjugate coupling `P_flat(d(x, y)) = P(d(y, x))`.
pub fn flip(p: &Joint) -> Joint {
    match p {
        Joint::Discrete(j) => Joint::Discrete(DiscreteJoint {
            x: j.y.clone(),
            y: j.x.clone(),
            mass: j.mass.transpose(),
        }),
        Joint::Gaussian(j) => {
            let d = j.d();
            let (a11, a12, a21, a22) = linalg::blocks(&j.cov, d);
            let mean = linalg::stack(&j.mean.rows(d, d).into_owned(), &j.mean.rows(0, d).into_owned());
            Joint::Gaussian(GaussianJoint {
                mean,
                cov: linalg::from_blocks(&a22, &a21, &a12, &a11),
            })
        }
    }
}

/// Factorizes `P` as (marginal of `coordinate`) x (conditional law of the other coordinate).
pub fn disintegrate(p: &Joint, coordinate: Coordinate) -> Result<Disintegration> {
    if coordinate == Coordinate::Second {
        return disintegrate(&flip(p), Coordinate::First);
    }
    match p {
        Joint::Discrete(j) => {
            let n = j.y.len();
            let mut rows = j.mass.clone();
            let mut warnings = Vec::new();
            let mut marginal = Vector::zeros(j.x.len());
            for (i, mut row) in rows.row_iter_mut().enumerate() {
                let s = row.sum();
                marginal[i] = s;
                if s > 0.0 {
                    row /= s;
                } else {
                    row.fill(1.0 / n as f64);
                    warnings.push(Warning::ZeroMassRow(i));
                }
            }
            let kernel = GridKernel::new(j.x.clone(), j.y.clone(), rows)?;
            Ok(Disintegration {
                marginal: DiscreteJoint::marginal(&j.x, marginal).into(),
                kernel: kernel.into(),
                warnings,
            })
        }
        Joint::Gaussian(j) => {
            let d = j.d();
            let (s11, s12, s21, s22) = linalg::blocks(&j.cov, d);
            let prec11 = linalg::spd_inverse(&s11)?;
            let beta = &s21 * &prec11;
            let m1 = j.mean.rows(0, d).into_owned();
            let m2 = j.mean.rows(d, d).into_owned();
            let alpha = &m2 - &beta * &m1;
            let tau = linalg::symmetrize(&(&s22 - &beta * &s12));
            Ok(Disintegration {
                marginal: GaussianMeasure::new(m1, s11)?.into(),
                kernel: GaussianKernel::new(alpha, beta, tau)?.into(),
                warnings: Vec::new(),
            })
        }
    }
}

/// Gaussian measure restricted and renormalized onto the nodes of `support`.
pub fn discretize(g: &GaussianMeasure, support: &Support) -> Result<GridMeasure> {
    if support.dim() != g.dim() {
        return Err(Error::Dimension("Gaussian and grid dimensions differ".into()));
    }
    let prec = linalg::spd_inverse(&g.cov)?;
    GridMeasure::from_potential(support.clone(), |x| {
        let c = x - &g.mean;
        0.5 * c.dot(&(&prec * &c))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(points: &[f64]) -> Support {
        Support::from_points(points.iter().map(|&p| Vector::from_element(1, p)).collect()).unwrap()
    }

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn m(r: usize, c: usize, xs: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, xs)
    }

    #[test]
    fn rejects_bad_measures() {
        let s = line(&[0.0, 1.0]);
        assert!(GridMeasure::new(s.clone(), v(&[0.5, 0.4])).is_err());
        assert!(GridMeasure::new(s.clone(), v(&[1.5, -0.5])).is_err());
        assert!(GridMeasure::new(s, v(&[1.0])).is_err());
        assert!(Support::from_points(vec![v(&[1.0]), v(&[1.0])]).is_err());
        assert!(GaussianMeasure::new(v(&[0.0, 0.0]), m(2, 2, &[1.0, 0.1, 0.0, 1.0])).is_err());
        assert!(GaussianKernel::new(v(&[0.0]), m(1, 1, &[0.0]), m(1, 1, &[1.0])).is_err());
    }

    #[test]
    fn dirac_product_is_kernel_row() {
        let mu = GridMeasure::dirac(v(&[0.0])).unwrap();
        let target = line(&[-1.0, 0.0, 2.0]);
        let k = GridKernel::new(mu.support().clone(), target, m(1, 3, &[0.2, 0.3, 0.5])).unwrap();
        let p = product(&mu.clone().into(), &k.clone().into()).unwrap();
        assert_eq!(p.as_discrete().unwrap().mass(), k.rows());
        let pushed = push(&mu.into(), &k.into()).unwrap();
        assert_eq!(pushed.as_grid().unwrap().weights(), &v(&[0.2, 0.3, 0.5]));
    }

    #[test]
    fn uniform_through_identity() {
        let s = line(&[0.0, 1.0]);
        let mu: Measure = GridMeasure::uniform(s.clone()).unwrap().into();
        let k: Kernel = GridKernel::identity(s).into();
        let p = product(&mu, &k).unwrap();
        assert_eq!(p.as_discrete().unwrap().mass(), &m(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert_eq!(push(&mu, &k).unwrap().as_grid().unwrap().weights(), &v(&[0.5, 0.5]));
    }

    #[test]
    fn gaussian_product_and_push() {
        let mu: Measure = GaussianMeasure::standard(1).into();
        let k: Kernel = GaussianKernel::new(v(&[0.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0])).unwrap().into();
        let p = product(&mu, &k).unwrap();
        let g = p.as_gaussian().unwrap();
        assert_eq!(g.mean(), &v(&[0.0, 0.0]));
        assert_abs_diff_eq!(g.cov(), &m(2, 2, &[1.0, 1.0, 1.0, 2.0]), epsilon = 1e-15);

        let k2: Kernel = GaussianKernel::new(v(&[1.0]), m(1, 1, &[2.0]), m(1, 1, &[3.0])).unwrap().into();
        let pushed = push(&mu, &k2).unwrap();
        let pg = pushed.as_gaussian().unwrap();
        assert_abs_diff_eq!(pg.mean()[0], 1.0);
        assert_abs_diff_eq!(pg.cov()[(0, 0)], 7.0);
    }

    #[test]
    fn gaussian_conditioning_recovers_kernel() {
        let p = Joint::Gaussian(GaussianJoint::new(v(&[0.0, 0.0]), m(2, 2, &[1.0, 1.0, 1.0, 2.0])).unwrap());
        let dis = disintegrate(&p, Coordinate::First).unwrap();
        let k = dis.kernel.as_gaussian().unwrap();
        assert_abs_diff_eq!(k.alpha()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.beta()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.tau()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    /// Conditioning oracle: E[Y | X = x] and Var[Y | X = x] from a dense grid
    /// of the joint density, compared with the Schur-complement kernel.
    #[test]
    fn gaussian_conditioning_matches_grid_oracle() {
        let joint = GaussianMeasure::new(v(&[0.0, 0.0]), m(2, 2, &[1.0, 1.0, 1.0, 2.0])).unwrap();
        let n = 4001;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / (n - 1) as f64;
        for &x in &[-1.0, 0.0, 0.7, 2.0] {
            let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for j in 0..n {
                let y = lo + j as f64 * h;
                let w = joint.log_density(&v(&[x, y])).exp();
                z += w;
                s1 += w * y;
                s2 += w * y * y;
            }
            let mean = s1 / z;
            let var = s2 / z - mean * mean;
            assert_abs_diff_eq!(mean, x, epsilon = 1e-9);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn flip_is_an_involution() {
        let p = Joint::Gaussian(GaussianJoint::new(v(&[0.0, 1.0]), m(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap());
        let f = flip(&p);
        let g = f.as_gaussian().unwrap();
        assert_eq!(g.mean(), &v(&[1.0, 0.0]));
        assert_eq!(g.cov(), &m(2, 2, &[2.0, 0.3, 0.3, 1.0]));
        assert_eq!(flip(&f).as_gaussian().unwrap(), p.as_gaussian().unwrap());

        let s = line(&[0.0, 1.0]);
        let sym = DiscreteJoint::new(s.clone(), s, m(2, 2, &[0.1, 0.2, 0.2, 0.5])).unwrap();
        let fs = flip(&Joint::Discrete(sym.clone()));
        assert_eq!(fs.as_discrete().unwrap().mass(), sym.mass());
    }

    #[test]
    fn independent_product_has_constant_rows() {
        let s = line(&[0.0, 1.0, 2.0]);
        let mu = GridMeasure::new(s.clone(), v(&[0.2, 0.3, 0.5])).unwrap();
        let eta = GridMeasure::new(s.clone(), v(&[0.6, 0.1, 0.3])).unwrap();
        let p = product(&mu.into(), &GridKernel::constant(s, &eta).into()).unwrap();
        let dis = disintegrate(&p, Coordinate::First).unwrap();
        let k = dis.kernel.as_grid().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k.rows()[(i, j)], eta.weights()[j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn zero_mass_rows_are_flagged() {
        let s = line(&[0.0, 1.0]);
        let j = DiscreteJoint::new(s.clone(), s, m(2, 2, &[0.4, 0.6, 0.0, 0.0])).unwrap();
        let dis = disintegrate(&Joint::Discrete(j.clone()), Coordinate::First).unwrap();
        assert_eq!(dis.warnings, vec![Warning::ZeroMassRow(1)]);
        assert_eq!(dis.kernel.as_grid().unwrap().rows().row(1).transpose(), v(&[0.5, 0.5]));
        let back = product(&dis.marginal, &dis.kernel).unwrap();
        assert_abs_diff_eq!(back.as_discrete().unwrap().mass(), j.mass(), epsilon = 1e-15);
    }

    #[test]
    fn mixed_backends_are_rejected() {
        let s = line(&[0.0, 1.0]);
        let mu: Measure = GaussianMeasure::standard(1).into();
        let k: Kernel = GridKernel::identity(s).into();
        assert!(matches!(product(&mu, &k), Err(Error::Dimension(_))));
        assert!(matches!(push(&mu, &k), Err(Error::Dimension(_))));
    }

    #[test]
    fn discretized_kernel_rows_are_stochastic() {
        let layout = GridLayout::new(vec![-3.0], vec![3.0], 31).unwrap();
        let s = Support::from_layout(layout);
        let k = GaussianKernel::new(v(&[0.5]), m(1, 1, &[0.8]), m(1, 1, &[0.3])).unwrap();
        let g = k.discretize(&s, &s).unwrap();
        for row in g.rows().row_iter() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-14);
        }
        let wide = Support::from_layout(GridLayout::new(vec![-8.0], vec![8.0], 161).unwrap());
        let mu = discretize(&GaussianMeasure::standard(1), &wide).unwrap();
        assert_abs_diff_eq!(mu.mean()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu.covariance()[(0, 0)], 1.0, epsilon = 1e-3);
    }
}

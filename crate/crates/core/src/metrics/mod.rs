//! Relative entropy, Fisher information and the quadratic Wasserstein
//! distance, each with exact grid and Gaussian evaluations.

pub mod transport;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measures::{
    DiscreteJoint, GaussianJoint, GaussianKernel, GaussianMeasure, GridMeasure, Joint, Kernel, Measure, Support,
};
pub use transport::{LP_MAX_ATOMS, TransportPlan};

/// `sum p log(p / q)` with `0 log(0/.) = 0` and `+inf` when `p > 0 = q`.
pub fn kl_weights<'a>(p: impl IntoIterator<Item = &'a f64>, q: impl IntoIterator<Item = &'a f64>) -> f64 {
    let mut s = 0.0;
    for (&pi, &qi) in p.into_iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            s += pi * (pi / qi).ln();
        }
    }
    s.max(0.0)
}

/// Closed-form `H(N(m1, S1) | N(m2, S2))`.
pub fn kl_gaussian(nu: &GaussianMeasure, mu: &GaussianMeasure) -> Result<f64> {
    if nu.dim() != mu.dim() {
        return Err(Error::Dimension("Gaussian KL across dimensions".into()));
    }
    let prec = linalg::spd_inverse(mu.cov())?;
    let dm = mu.mean() - nu.mean();
    let v = (&prec * nu.cov()).trace() + dm.dot(&(&prec * &dm)) - nu.dim() as f64
        + linalg::log_det_spd(mu.cov())?
        - linalg::log_det_spd(nu.cov())?;
    Ok((0.5 * v).max(0.0))
}

/// Relative entropy `H(self | reference)`.
pub trait RelativeEntropy {
    fn relative_entropy(&self, reference: &Self) -> Result<f64>;
}

impl RelativeEntropy for GridMeasure {
    fn relative_entropy(&self, reference: &Self) -> Result<f64> {
        if !self.support().same_as(reference.support()) {
            return Err(Error::Dimension("KL between measures on different grids".into()));
        }
        Ok(kl_weights(self.weights().iter(), reference.weights().iter()))
    }
}

impl RelativeEntropy for GaussianMeasure {
    fn relative_entropy(&self, reference: &Self) -> Result<f64> {
        kl_gaussian(self, reference)
    }
}

impl RelativeEntropy for Measure {
    fn relative_entropy(&self, reference: &Self) -> Result<f64> {
        match (self, reference) {
            (Measure::Grid(a), Measure::Grid(b)) => a.relative_entropy(b),
            (Measure::Gaussian(a), Measure::Gaussian(b)) => a.relative_entropy(b),
            _ => Err(Error::Dimension("KL across backends".into())),
        }
    }
}

impl RelativeEntropy for DiscreteJoint {
    fn relative_entropy(&self, reference: &Self) -> Result<f64> {
        if !self.x_support().same_as(reference.x_support()) || !self.y_support().same_as(reference.y_support()) {
            return Err(Error::Dimension("KL between joints on different grids".into()));
        }
        Ok(kl_weights(self.mass().iter(), reference.mass().iter()))
    }
}

impl RelativeEntropy for GaussianJoint {
    fn relative_entropy(&self, reference: &Self) -> Result<f64> {
        kl_gaussian(&self.as_measure(), &reference.as_measure())
    }
}

impl RelativeEntropy for Joint {
    fn relative_entropy(&self, reference: &Self) -> Result<f64> {
        match (self, reference) {
            (Joint::Discrete(a), Joint::Discrete(b)) => a.relative_entropy(b),
            (Joint::Gaussian(a), Joint::Gaussian(b)) => a.relative_entropy(b),
            _ => Err(Error::Dimension("KL across backends".into())),
        }
    }
}

pub fn kl<T: RelativeEntropy>(nu: &T, mu: &T) -> Result<f64> {
    nu.relative_entropy(mu)
}

fn same_spaces(l: &Kernel, k: &Kernel) -> Result<()> {
    match (l, k) {
        (Kernel::Grid(a), Kernel::Grid(b)) => {
            if a.source().same_as(b.source()) && a.target().same_as(b.target()) {
                Ok(())
            } else {
                Err(Error::Dimension("kernels live on different grids".into()))
            }
        }
        (Kernel::Gaussian(a), Kernel::Gaussian(b)) if a.dim() == b.dim() => Ok(()),
        _ => Err(Error::Dimension("kernels of different backends or dimensions".into())),
    }
}

/// `∫ mu(dx) H(delta_x L | delta_x K)`, which equals `H(mu x L | mu x K)`.
pub fn kl_disintegrated(mu: &Measure, l: &Kernel, k: &Kernel) -> Result<f64> {
    same_spaces(l, k)?;
    match (mu, l, k) {
        (Measure::Grid(m), Kernel::Grid(l), Kernel::Grid(k)) => {
            if !m.support().same_as(l.source()) {
                return Err(Error::Dimension("measure is not on the kernels' source grid".into()));
            }
            let mut s = 0.0;
            for (i, w) in m.weights().iter().enumerate() {
                if *w > 0.0 {
                    let row = kl_weights(l.rows().row(i).iter(), k.rows().row(i).iter());
                    if row.is_infinite() {
                        return Ok(f64::INFINITY);
                    }
                    s += w * row;
                }
            }
            Ok(s)
        }
        (Measure::Gaussian(m), Kernel::Gaussian(l), Kernel::Gaussian(k)) => {
            if m.dim() != k.dim() {
                return Err(Error::Dimension("measure and kernel dimensions differ".into()));
            }
            let prec = k.tau_inverse();
            let d = k.dim() as f64;
            let cov_part = (&prec * l.tau()).trace() - d + linalg::log_det_spd(k.tau())? - linalg::log_det_spd(l.tau())?;
            let da = l.alpha() - k.alpha();
            let db = l.beta() - k.beta();
            let shift = &da + &db * m.mean();
            let mean_part = shift.dot(&(&prec * &shift)) + (db.transpose() * &prec * &db * m.cov()).trace();
            Ok((0.5 * (cov_part + mean_part)).max(0.0))
        }
        _ => Err(Error::Dimension("KL across backends".into())),
    }
}

/// `J(nu | mu) = nu(||grad log(dnu/dmu)||^2)`.
///
/// Grid measures use the grid's finite-difference gradient (central inside,
/// one-sided on the faces, step = grid spacing).
pub fn fisher(nu: &Measure, mu: &Measure) -> Result<f64> {
    match (nu, mu) {
        (Measure::Gaussian(a), Measure::Gaussian(b)) => fisher_gaussian(a, b),
        (Measure::Grid(a), Measure::Grid(b)) => {
            if !a.support().same_as(b.support()) {
                return Err(Error::Dimension("Fisher information between different grids".into()));
            }
            let layout = a
                .support()
                .layout()
                .ok_or_else(|| Error::Dimension("Fisher information needs a regular grid".into()))?;
            if a.weights().iter().zip(b.weights().iter()).any(|(p, q)| *p > 0.0 && *q <= 0.0) {
                return Ok(f64::INFINITY);
            }
            let log_ratio: Vec<f64> = a
                .weights()
                .iter()
                .zip(b.weights().iter())
                .map(|(p, q)| if *p > 0.0 { (p / q).ln() } else { f64::NEG_INFINITY })
                .collect();
            let grad = layout.gradient(&log_ratio)?;
            let mut s = 0.0;
            for (g, w) in grad.iter().zip(a.weights().iter()) {
                if *w > 0.0 {
                    let n2 = g.norm_squared();
                    if !n2.is_finite() {
                        return Ok(f64::INFINITY);
                    }
                    s += w * n2;
                }
            }
            Ok(s)
        }
        _ => Err(Error::Dimension("Fisher information across backends".into())),
    }
}

/// Closed form: with `A = S2^{-1} - S1^{-1}`, the score difference is
/// `A x + S1^{-1} m1 - S2^{-1} m2`, so `J = ||S2^{-1}(m1 - m2)||^2 + Tr(A S1 A)`.
pub fn fisher_gaussian(nu: &GaussianMeasure, mu: &GaussianMeasure) -> Result<f64> {
    if nu.dim() != mu.dim() {
        return Err(Error::Dimension("Gaussian Fisher information across dimensions".into()));
    }
    let p1 = linalg::spd_inverse(nu.cov())?;
    let p2 = linalg::spd_inverse(mu.cov())?;
    let a = &p2 - &p1;
    let shift = &p2 * (nu.mean() - mu.mean());
    Ok(shift.norm_squared() + (&a * nu.cov() * &a).trace())
}

/// `J(delta_x K | delta_y K)` and its certified bound `kappa^2 ||x - y||^2`.
#[derive(Clone, Copy, Debug)]
pub struct FisherLipschitz {
    pub value: f64,
    pub bound: f64,
    pub kappa: f64,
}

pub fn fisher_kernel_lipschitz(k: &GaussianKernel, x: &Vector, y: &Vector) -> Result<FisherLipschitz> {
    let value = fisher_gaussian(&k.row(x), &k.row(y))?;
    let kappa = crate::moments::spectral_norm(&k.chi());
    Ok(FisherLipschitz { value, bound: kappa * kappa * (x - y).norm_squared(), kappa })
}

/// An optimal coupling returned by [`w2`].
#[derive(Clone, Debug)]
pub enum Coupling {
    Discrete(DiscreteJoint),
    /// `Y = target.mean + map (X - source.mean)` with `X ~ source`.
    GaussianMap { source: GaussianMeasure, target: GaussianMeasure, map: Matrix },
}

impl Coupling {
    pub fn as_discrete(&self) -> Option<&DiscreteJoint> {
        match self {
            Coupling::Discrete(j) => Some(j),
            Coupling::GaussianMap { .. } => None,
        }
    }
}

fn plan_to_coupling(x: &Support, y: &Support, plan: TransportPlan) -> Result<(f64, Coupling)> {
    let total = plan.mass.sum();
    let joint = DiscreteJoint::new(x.clone(), y.clone(), plan.mass / total)?;
    Ok((plan.cost.max(0.0).sqrt(), Coupling::Discrete(joint)))
}

fn sq_distances(x: &Support, y: &Support) -> Matrix {
    Matrix::from_fn(x.len(), y.len(), |i, j| (x.point(i) - y.point(j)).norm_squared())
}

/// Exact `D_2` through the transportation simplex (supports up to [`LP_MAX_ATOMS`]).
pub fn w2_lp(nu: &GridMeasure, mu: &GridMeasure) -> Result<(f64, Coupling)> {
    if nu.dim() != mu.dim() {
        return Err(Error::Dimension("W2 across dimensions".into()));
    }
    let plan = transport::solve_transport(
        nu.weights().as_slice(),
        mu.weights().as_slice(),
        &sq_distances(nu.support(), mu.support()),
    )?;
    plan_to_coupling(nu.support(), mu.support(), plan)
}

/// Exact `D_2` on the line through the monotone coupling.
pub fn w2_quantile(nu: &GridMeasure, mu: &GridMeasure) -> Result<(f64, Coupling)> {
    if nu.dim() != 1 || mu.dim() != 1 {
        return Err(Error::Dimension("quantile coupling is one-dimensional".into()));
    }
    let xs: Vec<f64> = nu.support().points().iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = mu.support().points().iter().map(|p| p[0]).collect();
    let plan = transport::quantile_coupling(&xs, nu.weights().as_slice(), &ys, mu.weights().as_slice())?;
    plan_to_coupling(nu.support(), mu.support(), plan)
}

/// Squared Bures distance between covariances.
pub fn bures_sq(s1: &Matrix, s2: &Matrix) -> f64 {
    let r2 = linalg::sym_sqrt(s2);
    let mid = linalg::sym_sqrt(&linalg::symmetrize(&(&r2 * s1 * &r2)));
    (s1.trace() + s2.trace() - 2.0 * mid.trace()).max(0.0)
}

pub fn w2_gaussian(nu: &GaussianMeasure, mu: &GaussianMeasure) -> Result<(f64, Coupling)> {
    if nu.dim() != mu.dim() {
        return Err(Error::Dimension("W2 across dimensions".into()));
    }
    let d2 = (nu.mean() - mu.mean()).norm_squared() + bures_sq(nu.cov(), mu.cov());
    let r1 = linalg::sym_sqrt(nu.cov());
    let ri = linalg::sym_inv_sqrt(nu.cov());
    let map = &ri * linalg::sym_sqrt(&linalg::symmetrize(&(&r1 * mu.cov() * &r1))) * &ri;
    Ok((
        d2.sqrt(),
        Coupling::GaussianMap { source: nu.clone(), target: mu.clone(), map: linalg::symmetrize(&map) },
    ))
}

/// `D_2(nu, mu)` with an optimal coupling: quantile on 1-D grids, simplex on
/// higher-dimensional grids, Bures for Gaussians.
pub fn w2(nu: &Measure, mu: &Measure) -> Result<(f64, Coupling)> {
    match (nu, mu) {
        (Measure::Grid(a), Measure::Grid(b)) => {
            if a.dim() != b.dim() {
                Err(Error::Dimension("W2 across dimensions".into()))
            } else if a.dim() == 1 {
                w2_quantile(a, b)
            } else {
                w2_lp(a, b)
            }
        }
        (Measure::Gaussian(a), Measure::Gaussian(b)) => w2_gaussian(a, b),
        _ => Err(Error::Dimension("W2 across backends".into())),
    }
}

/// Result of [`w2_kernel_avg`].
#[derive(Clone, Debug)]
pub struct KernelW2 {
    /// `∫ mu(dx) D_2(delta_x L, delta_x K)^2`.
    pub value: f64,
    /// Optimal row couplings `pi_x` (grid backend, `None` on zero-mass rows).
    pub row_couplings: Vec<Option<Coupling>>,
    /// The glued coupling `∫ mu(dx) pi_x`, a member of `Pi(mu L, mu K)` (grid backend).
    pub glued: Option<DiscreteJoint>,
}

pub fn w2_kernel_avg(mu: &Measure, l: &Kernel, k: &Kernel) -> Result<KernelW2> {
    same_spaces(l, k)?;
    match (mu, l, k) {
        (Measure::Grid(m), Kernel::Grid(lg), Kernel::Grid(kg)) => {
            if !m.support().same_as(lg.source()) {
                return Err(Error::Dimension("measure is not on the kernels' source grid".into()));
            }
            let rows: Vec<Option<(f64, Coupling)>> = (0..m.support().len())
                .into_par_iter()
                .map(|i| {
                    if m.weights()[i] > 0.0 {
                        w2(&lg.row(i).into(), &kg.row(i).into()).map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<_>>()?;
            let mut value = 0.0;
            let mut glued = Matrix::zeros(lg.target().len(), kg.target().len());
            for (row, w) in rows.iter().zip(m.weights().iter()) {
                if let Some((d, c)) = row {
                    value += w * d * d;
                    if let Coupling::Discrete(j) = c {
                        glued += j.mass() * *w;
                    }
                }
            }
            let total = glued.sum();
            let glued = DiscreteJoint::new(lg.target().clone(), kg.target().clone(), glued / total)?;
            Ok(KernelW2 {
                value,
                row_couplings: rows.into_iter().map(|r| r.map(|(_, c)| c)).collect(),
                glued: Some(glued),
            })
        }
        (Measure::Gaussian(m), Kernel::Gaussian(lg), Kernel::Gaussian(kg)) => {
            if m.dim() != kg.dim() {
                return Err(Error::Dimension("measure and kernel dimensions differ".into()));
            }
            let da = lg.alpha() - kg.alpha();
            let db = lg.beta() - kg.beta();
            let shift = &da + &db * m.mean();
            let value = shift.norm_squared() + (&db * m.cov() * db.transpose()).trace() + bures_sq(lg.tau(), kg.tau());
            Ok(KernelW2 { value, row_couplings: Vec::new(), glued: None })
        }
        _ => Err(Error::Dimension("W2 across backends".into())),
    }
}

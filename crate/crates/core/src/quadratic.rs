//! Quadratic forms `q(x) = x'Ax/2 + b'x + c`, the closed-form representation
//! of Gaussian potentials and of the Gaussian reference cost `W`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::measures::{GaussianJoint, GaussianKernel, GaussianMeasure};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub a: Matrix,
    pub b: Vector,
    pub c: f64,
}

impl Quadratic {
    pub fn new(a: Matrix, b: Vector, c: f64) -> Self {
        Self { a: linalg::symmetrize(&a), b, c }
    }

    pub fn zero(d: usize) -> Self {
        Self { a: Matrix::zeros(d, d), b: Vector::zeros(d), c: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }

    pub fn add(&self, other: &Quadratic) -> Quadratic {
        Quadratic::new(&self.a + &other.a, &self.b + &other.b, self.c + other.c)
    }

    pub fn sub(&self, other: &Quadratic) -> Quadratic {
        Quadratic::new(&self.a - &other.a, &self.b - &other.b, self.c - other.c)
    }

    pub fn shift(&self, by: f64) -> Quadratic {
        Quadratic { a: self.a.clone(), b: self.b.clone(), c: self.c + by }
    }

    /// `E[q(X)]` for `X ~ g`.
    pub fn expectation(&self, g: &GaussianMeasure) -> f64 {
        let m = g.mean();
        0.5 * (m.dot(&(&self.a * m)) + (&self.a * g.cov()).trace()) + self.b.dot(m) + self.c
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Quadratic) -> f64 {
        (&self.a - &other.a)
            .amax()
            .max((&self.b - &other.b).amax())
            .max((self.c - other.c).abs())
    }

    /// `-log` of the Gaussian density of `g`.
    pub fn neg_log_density(g: &GaussianMeasure) -> Quadratic {
        let prec = linalg::spd_inverse(g.cov()).expect("validated covariance");
        let m = g.mean();
        let logdet = linalg::log_det_spd(g.cov()).expect("validated covariance");
        let b = -(&prec * m);
        let c = 0.5 * m.dot(&(&prec * m)) + 0.5 * (g.dim() as f64 * LN_2PI + logdet);
        Quadratic::new(prec, b, c)
    }

    pub fn joint_neg_log_density(p: &GaussianJoint) -> Quadratic {
        Self::neg_log_density(&p.as_measure())
    }

    /// `W(x, y) = -log g_tau(y - alpha - beta x)` as a form in `(x, y)`.
    pub fn reference_cost(k: &GaussianKernel) -> Quadratic {
        let d = k.dim();
        let prec = k.tau_inverse();
        // y - beta x - alpha = [-beta, I] z - alpha
        let mut lin = Matrix::zeros(d, 2 * d);
        lin.view_mut((0, 0), (d, d)).copy_from(&(-k.beta()));
        lin.view_mut((0, d), (d, d)).copy_from(&Matrix::identity(d, d));
        let a = lin.transpose() * &prec * &lin;
        let b = -(lin.transpose() * (&prec * k.alpha()));
        let logdet = linalg::log_det_spd(k.tau()).expect("validated tau");
        let c = 0.5 * k.alpha().dot(&(&prec * k.alpha())) + 0.5 * (d as f64 * LN_2PI + logdet);
        Quadratic::new(a, b, c)
    }

    /// Lift a form in `x` to `(x, y)` (`first = true`) or in `y` to `(x, y)`.
    pub fn lift(&self, first: bool) -> Quadratic {
        let d = self.dim();
        let off = if first { 0 } else { d };
        let mut a = Matrix::zeros(2 * d, 2 * d);
        a.view_mut((off, off), (d, d)).copy_from(&self.a);
        let mut b = Vector::zeros(2 * d);
        b.rows_mut(off, d).copy_from(&self.b);
        Quadratic { a, b, c: self.c }
    }

    /// `-log ∫ exp(-q(x, y)) dy` for a form in `(x, y)`; requires the `yy` block to be positive-definite.
    pub fn integrate_out_second(&self) -> Result<Quadratic> {
        let d = self.dim() / 2;
        let (axx, axy, ayx, ayy) = linalg::blocks(&self.a, d);
        let inv = linalg::spd_inverse(&linalg::ensure_spd(&ayy, "integrated block")?)?;
        let bx = self.b.rows(0, d).into_owned();
        let by = self.b.rows(d, d).into_owned();
        let a = &axx - &axy * &inv * &ayx;
        let b = &bx - &axy * (&inv * &by);
        let c = self.c - 0.5 * by.dot(&(&inv * &by)) - 0.5 * d as f64 * LN_2PI
            + 0.5 * linalg::log_det_spd(&ayy)?;
        Ok(Quadratic::new(a, b, c))
    }

    /// `-log ∫ exp(-q(x, y)) dx`, as a form in `y`.
    pub fn integrate_out_first(&self) -> Result<Quadratic> {
        self.swap_halves()?.integrate_out_second()
    }

    fn swap_halves(&self) -> Result<Quadratic> {
        if self.dim() % 2 != 0 {
            return Err(Error::Dimension("form is not over a product space".into()));
        }
        let d = self.dim() / 2;
        let (a11, a12, a21, a22) = linalg::blocks(&self.a, d);
        let b = linalg::stack(&self.b.rows(d, d).into_owned(), &self.b.rows(0, d).into_owned());
        Ok(Quadratic { a: linalg::from_blocks(&a22, &a21, &a12, &a11), b, c: self.c })
    }
}

//! Conditional moments of kernels, cross-covariances, and the
//! `L_p(mu)` norms of matrix-valued fields.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::measures::{Joint, Kernel, Measure, Support};

/// A matrix (or column-vector) valued function tabulated on a support.
#[derive(Clone, Debug)]
pub struct MatrixField {
    support: Support,
    values: Vec<Matrix>,
}

impl MatrixField {
    pub fn new(support: Support, values: Vec<Matrix>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(Error::Dimension(format!(
                "{} field values on {} support points",
                values.len(),
                support.len()
            )));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.shape() != first.shape()) {
                return Err(Error::Dimension("field values must share one shape".into()));
            }
        }
        Ok(Self { support, values })
    }

    pub fn from_vectors(support: Support, values: Vec<Vector>) -> Result<Self> {
        let values = values.into_iter().map(|v| Matrix::from_column_slice(v.len(), 1, v.as_slice())).collect();
        Self::new(support, values)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> MatrixField {
        MatrixField { support: self.support.clone(), values: self.values.iter().map(f).collect() }
    }

    fn zip(&self, other: &MatrixField, f: impl Fn(&Matrix, &Matrix) -> Matrix) -> Result<MatrixField> {
        if !self.support.same_as(&other.support) {
            return Err(Error::Dimension("fields live on different supports".into()));
        }
        Ok(MatrixField {
            support: self.support.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        })
    }

    /// Plot-ready CSV: coordinates `x0..`, then matrix entries `v_r_c` row-major.
    pub fn to_csv(&self) -> String {
        let d = self.support.dim();
        let (r, c) = self.values.first().map_or((0, 0), |v| v.shape());
        let mut out = String::new();
        let mut header: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        for i in 0..r {
            for j in 0..c {
                header.push(format!("v_{i}_{j}"));
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for (x, v) in self.support.points().iter().zip(&self.values) {
            let mut cells: Vec<String> = x.iter().map(|t| format!("{t:.16e}")).collect();
            for i in 0..r {
                for j in 0..c {
                    cells.push(format!("{:.16e}", v[(i, j)]));
                }
            }
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// A field in symbolic (Gaussian backend) or tabulated (grid backend) form.
///
/// Symbolic fields are only materialized when compared against a grid.
#[derive(Clone, Debug)]
pub enum Field {
    Grid(MatrixField),
    /// `x -> offset + linear x`, column-vector valued.
    Affine { offset: Vector, linear: Matrix },
    Constant(Matrix),
}

impl Field {
    pub fn eval(&self, x: &Vector) -> Result<Matrix> {
        match self {
            Field::Affine { offset, linear } => {
                let v = offset + linear * x;
                Ok(Matrix::from_column_slice(v.len(), 1, v.as_slice()))
            }
            Field::Constant(c) => Ok(c.clone()),
            Field::Grid(_) => Err(Error::Dimension("tabulated fields cannot be evaluated off their support".into())),
        }
    }

    /// Tabulates the field on `support`.
    pub fn materialize(&self, support: &Support) -> Result<MatrixField> {
        match self {
            Field::Grid(f) => {
                if f.support.same_as(support) {
                    Ok(f.clone())
                } else {
                    Err(Error::Dimension("field support differs from the requested support".into()))
                }
            }
            _ => MatrixField::new(
                support.clone(),
                support.points().iter().map(|x| self.eval(x)).collect::<Result<_>>()?,
            ),
        }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        match (self, other) {
            (Field::Affine { offset: o1, linear: l1 }, Field::Affine { offset: o2, linear: l2 }) => {
                Ok(Field::Affine { offset: o1 - o2, linear: l1 - l2 })
            }
            (Field::Constant(a), Field::Constant(b)) => Ok(Field::Constant(a - b)),
            (Field::Grid(a), b) => Ok(Field::Grid(a.zip(&b.materialize(&a.support)?, |x, y| x - y)?)),
            (a, Field::Grid(b)) => Ok(Field::Grid(a.materialize(&b.support)?.zip(b, |x, y| x - y)?)),
            _ => Err(Error::Dimension("cannot subtract an affine and a constant field".into())),
        }
    }

    /// `m -> left * m`.
    pub fn left_mul(&self, left: &Matrix) -> Field {
        match self {
            Field::Grid(f) => Field::Grid(f.map(|v| left * v)),
            Field::Affine { offset, linear } => Field::Affine { offset: left * offset, linear: left * linear },
            Field::Constant(c) => Field::Constant(left * c),
        }
    }

    /// `m -> left * m * right`, for matrix-valued fields.
    pub fn sandwich(&self, left: &Matrix, right: &Matrix) -> Result<Field> {
        match self {
            Field::Grid(f) => Ok(Field::Grid(f.map(|v| left * v * right))),
            Field::Constant(c) => Ok(Field::Constant(left * c * right)),
            Field::Affine { .. } => Err(Error::Dimension("sandwich needs a matrix-valued field".into())),
        }
    }

    pub fn scale(&self, s: f64) -> Field {
        match self {
            Field::Grid(f) => Field::Grid(f.map(|v| v * s)),
            Field::Affine { offset, linear } => Field::Affine { offset: offset * s, linear: linear * s },
            Field::Constant(c) => Field::Constant(c * s),
        }
    }
}

/// `m_K(x) = ∫ K(x, dy) y`.
pub fn cond_mean(k: &Kernel) -> Field {
    match k {
        Kernel::Gaussian(g) => Field::Affine { offset: g.alpha().clone(), linear: g.beta().clone() },
        Kernel::Grid(g) => {
            let ys = g.target().points();
            let d = g.target().dim();
            let values = g
                .rows()
                .row_iter()
                .map(|row| {
                    let m = row.iter().zip(ys).fold(Vector::zeros(d), |acc, (w, y)| acc + y * *w);
                    Matrix::from_column_slice(d, 1, m.as_slice())
                })
                .collect();
            Field::Grid(MatrixField { support: g.source().clone(), values })
        }
    }
}

/// `sigma_K(x) = ∫ K(x, dy) (y - m_K(x))(y - m_K(x))'`.
pub fn cond_cov(k: &Kernel) -> Field {
    match k {
        Kernel::Gaussian(g) => Field::Constant(g.tau().clone()),
        Kernel::Grid(g) => {
            let ys = g.target().points();
            let d = g.target().dim();
            let values = g
                .rows()
                .row_iter()
                .map(|row| {
                    let m = row.iter().zip(ys).fold(Vector::zeros(d), |acc, (w, y)| acc + y * *w);
                    row.iter().zip(ys).fold(Matrix::zeros(d, d), |acc, (w, y)| {
                        let c = y - &m;
                        acc + &c * c.transpose() * *w
                    })
                })
                .collect();
            Field::Grid(MatrixField { support: g.source().clone(), values })
        }
    }
}

/// `C_{X,Y} = E[(X - EX)(Y - EY)']` under the coupling.
pub fn cross_cov(p: &Joint) -> Matrix {
    match p {
        Joint::Gaussian(g) => g.cross_cov(),
        Joint::Discrete(j) => {
            let mx = j.first_marginal().mean();
            let my = j.second_marginal().mean();
            let xs = j.x_support().points();
            let ys = j.y_support().points();
            let mut c = Matrix::zeros(mx.len(), my.len());
            for (i, x) in xs.iter().enumerate() {
                let cx = x - &mx;
                for (jj, y) in ys.iter().enumerate() {
                    let w = j.mass()[(i, jj)];
                    if w != 0.0 {
                        c += &cx * (y - &my).transpose() * w;
                    }
                }
            }
            c
        }
    }
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.norm()
}

/// `sqrt(lambda_max(M'M))`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Probabilists' Gauss-Hermite rule (nodes and weights for `N(0, 1)`), via Golub-Welsch.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = Matrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..n).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (nodes, weights)
}

const HERMITE_NODES: usize = 12;

/// Trapezoid nodes on [-10, 10] weighted by the standard normal density.
fn trapezoid_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 20.0 / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| -10.0 + i as f64 * h).collect();
    let mut weights: Vec<f64> = nodes.iter().map(|z| h * (-0.5 * z * z).exp()).collect();
    weights[0] *= 0.5;
    weights[n - 1] *= 0.5;
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// `|||f|||_{p,mu} = (∫ mu(dx) ||f(x)||_F^p)^{1/p}`.
pub fn field_norm(f: &Field, p: f64, mu: &Measure) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("field norm needs p >= 1, got {p}")));
    }
    match mu {
        Measure::Grid(m) => {
            let tab = f.materialize(m.support())?;
            let s: f64 = tab
                .values
                .iter()
                .zip(m.weights().iter())
                .filter(|(_, w)| **w > 0.0)
                .map(|(v, w)| w * v.norm().powf(p))
                .sum();
            Ok(s.powf(1.0 / p))
        }
        Measure::Gaussian(g) => match f {
            Field::Grid(_) => Err(Error::Dimension("tabulated field against a Gaussian measure".into())),
            Field::Constant(c) => Ok(c.norm()),
            Field::Affine { offset, linear } => {
                if linear.ncols() != g.dim() {
                    return Err(Error::Dimension("affine field and measure dimensions differ".into()));
                }
                let at_mean = offset + linear * g.mean();
                if p == 2.0 {
                    let spread = (linear * g.cov() * linear.transpose()).trace();
                    return Ok((at_mean.norm_squared() + spread).sqrt());
                }
                // tensor rule on x = m + L z: trapezoid for d <= 2 (robust to the kink of
                // |.|^p), Gauss-Hermite above
                let l = g.cov().clone().cholesky().expect("validated covariance").l();
                let d = g.dim();
                let (nodes, weights) = match d {
                    1 => trapezoid_normal(4001),
                    2 => trapezoid_normal(401),
                    _ => gauss_hermite(HERMITE_NODES),
                };
                let per = nodes.len();
                let total = per.pow(d as u32);
                let mut s = 0.0;
                for flat in 0..total {
                    let mut z = Vector::zeros(d);
                    let mut w = 1.0;
                    let mut rest = flat;
                    for k in 0..d {
                        let i = rest % per;
                        rest /= per;
                        z[k] = nodes[i];
                        w *= weights[i];
                    }
                    s += w * (&at_mean + linear * (&l * z)).norm().powf(p);
                }
                Ok(s.powf(1.0 / p))
            }
        },
    }
}

/// `c_{mu,L} = (∫ mu(dx) Tr(sigma_L(x)))^{1/2}`.
pub fn trace_constant(mu: &Measure, l: &Kernel) -> Result<f64> {
    let sigma = cond_cov(l);
    match (mu, &sigma) {
        (Measure::Gaussian(g), Field::Constant(c)) => {
            if c.nrows() != g.dim() {
                return Err(Error::Dimension("kernel and measure dimensions differ".into()));
            }
            Ok(c.trace().max(0.0).sqrt())
        }
        (Measure::Grid(m), Field::Grid(f)) => {
            if !f.support.same_as(m.support()) {
                return Err(Error::Dimension("kernel source differs from the measure support".into()));
            }
            let s: f64 = f.values.iter().zip(m.weights().iter()).map(|(v, w)| w * v.trace()).sum();
            Ok(s.max(0.0).sqrt())
        }
        _ => Err(Error::Dimension("trace constant across backends".into())),
    }
}

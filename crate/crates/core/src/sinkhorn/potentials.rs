//! Sinkhorn potentials `(U_n, V_n)` in tabulated or quadratic form.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::measures::{GaussianMeasure, GridMeasure, Measure, Support};
use crate::moments::{Field, MatrixField};
use crate::quadratic::Quadratic;

/// A potential function: `-log` of a density up to the product-form constants.
#[derive(Clone, Debug)]
pub enum Potential {
    Grid { support: Support, values: Vector },
    Quadratic(Quadratic),
}

impl Potential {
    pub fn as_grid(&self) -> Option<(&Support, &Vector)> {
        match self {
            Potential::Grid { support, values } => Some((support, values)),
            Potential::Quadratic(_) => None,
        }
    }

    pub fn as_quadratic(&self) -> Option<&Quadratic> {
        match self {
            Potential::Quadratic(q) => Some(q),
            Potential::Grid { .. } => None,
        }
    }

    pub fn shift(&self, by: f64) -> Potential {
        match self {
            Potential::Grid { support, values } => {
                Potential::Grid { support: support.clone(), values: values.add_scalar(by) }
            }
            Potential::Quadratic(q) => Potential::Quadratic(q.shift(by)),
        }
    }

    pub fn sub(&self, other: &Potential) -> Result<Potential> {
        match (self, other) {
            (Potential::Grid { support, values }, Potential::Grid { support: s2, values: v2 }) => {
                if !support.same_as(s2) {
                    return Err(Error::Dimension("potentials on different grids".into()));
                }
                Ok(Potential::Grid { support: support.clone(), values: values - v2 })
            }
            (Potential::Quadratic(a), Potential::Quadratic(b)) => Ok(Potential::Quadratic(a.sub(b))),
            _ => Err(Error::Dimension("potentials of different backends".into())),
        }
    }

    /// Values at the nodes of `support`.
    pub fn values_on(&self, support: &Support) -> Result<Vector> {
        match self {
            Potential::Grid { support: s, values } => {
                if s.same_as(support) {
                    Ok(values.clone())
                } else {
                    Err(Error::Dimension("potential lives on a different grid".into()))
                }
            }
            Potential::Quadratic(q) => {
                if q.dim() != support.dim() {
                    return Err(Error::Dimension("potential and grid dimensions differ".into()));
                }
                Ok(Vector::from_iterator(support.len(), support.points().iter().map(|x| q.eval(x))))
            }
        }
    }

    /// `nu(self)`; atoms of zero mass are skipped so `+inf` values there are harmless.
    pub fn average(&self, nu: &Measure) -> Result<f64> {
        match (self, nu) {
            (Potential::Grid { support, values }, Measure::Grid(m)) => {
                if !support.same_as(m.support()) {
                    return Err(Error::Dimension("potential and measure live on different grids".into()));
                }
                Ok(weighted_sum(m, values))
            }
            (Potential::Quadratic(q), Measure::Gaussian(g)) => Ok(q.expectation(g)),
            _ => Err(Error::Dimension("potential and measure of different backends".into())),
        }
    }
}

fn weighted_sum(m: &GridMeasure, values: &Vector) -> f64 {
    m.weights().iter().zip(values.iter()).filter(|(w, _)| **w > 0.0).map(|(w, v)| w * v).sum()
}

/// `grad phi`: finite differences on a regular grid, exact `A x + b` for a quadratic.
pub fn grad_potential(phi: &Potential) -> Result<Field> {
    match phi {
        Potential::Quadratic(q) => Ok(Field::Affine { offset: q.b.clone(), linear: q.a.clone() }),
        Potential::Grid { support, values } => {
            let layout = support
                .layout()
                .ok_or_else(|| Error::Dimension("finite differences need a regular grid".into()))?;
            let g = layout.gradient(values.as_slice())?;
            Ok(Field::Grid(MatrixField::from_vectors(support.clone(), g)?))
        }
    }
}

/// `hess phi`: second differences on a regular grid, the constant `A` for a quadratic.
pub fn hess_potential(phi: &Potential) -> Result<Field> {
    match phi {
        Potential::Quadratic(q) => Ok(Field::Constant(q.a.clone())),
        Potential::Grid { support, values } => {
            let layout = support
                .layout()
                .ok_or_else(|| Error::Dimension("finite differences need a regular grid".into()))?;
            let h: Vec<Matrix> = layout.hessian(values.as_slice())?;
            Ok(Field::Grid(MatrixField::new(support.clone(), h)?))
        }
    }
}

/// `-log` density of a marginal: `-ln(w / cell_volume)` on a grid, the exact quadratic for a Gaussian.
pub fn marginal_potential(m: &Measure) -> Potential {
    match m {
        Measure::Grid(g) => Potential::Grid { support: g.support().clone(), values: g.potential() },
        Measure::Gaussian(g) => Potential::Quadratic(Quadratic::neg_log_density(g)),
    }
}

/// Convenience for tests and examples: the quadratic of a Gaussian.
pub fn gaussian_potential(g: &GaussianMeasure) -> Potential {
    Potential::Quadratic(Quadratic::neg_log_density(g))
}

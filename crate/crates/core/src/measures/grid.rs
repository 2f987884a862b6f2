//! Regular 1-D and 2-D grids: layout, construction of grid measures from
//! potentials, and finite-difference derivatives of grid functions.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Regular tensor grid with `n` nodes per axis between `lo` and `hi` (inclusive).
///
/// Points are enumerated row-major: the first coordinate varies slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLayout {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: usize,
}

impl GridLayout {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: usize) -> Result<Self> {
        let d = lo.len();
        if d == 0 || d > 2 || hi.len() != d {
            return Err(Error::Dimension(format!(
                "grids are 1-D or 2-D, got lo of length {} and hi of length {}",
                lo.len(),
                hi.len()
            )));
        }
        if n < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 nodes per axis, got {n}")));
        }
        for k in 0..d {
            if !(lo[k].is_finite() && hi[k].is_finite() && hi[k] > lo[k]) {
                return Err(Error::Domain(format!("grid axis {k}: need lo < hi, got [{}, {}]", lo[k], hi[k])));
            }
        }
        Ok(Self { lo, hi, n })
    }

    /// Grid covering `mean ± width * sd` on every axis, where `sd` is the
    /// square root of the covariance diagonal.
    pub fn around(mean: &Vector, cov: &Matrix, width: f64, n: usize) -> Result<Self> {
        let lo = (0..mean.len()).map(|k| mean[k] - width * cov[(k, k)].sqrt()).collect();
        let hi = (0..mean.len()).map(|k| mean[k] + width * cov[(k, k)].sqrt()).collect();
        Self::new(lo, hi, n)
    }

    /// Smallest grid containing both `a` and `b`, with the finer node count.
    pub fn union(a: &Self, b: &Self) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension("grid union of different dimensions".into()));
        }
        let lo = a.lo.iter().zip(&b.lo).map(|(x, y)| x.min(*y)).collect();
        let hi = a.hi.iter().zip(&b.hi).map(|(x, y)| x.max(*y)).collect();
        Self::new(lo, hi, a.n.max(b.n))
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.n - 1) as f64
    }

    /// Lebesgue volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.spacing(axis)
    }

    /// Multi-index of flat index `idx`.
    pub fn unravel(&self, idx: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![idx],
            _ => vec![idx / self.n, idx % self.n],
        }
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        match self.dim() {
            1 => multi[0],
            _ => multi[0] * self.n + multi[1],
        }
    }

    pub fn points(&self) -> Vec<Vector> {
        (0..self.len())
            .map(|idx| {
                let m = self.unravel(idx);
                Vector::from_iterator(self.dim(), (0..self.dim()).map(|k| self.coordinate(k, m[k])))
            })
            .collect()
    }

    /// True when `idx` is at least `margin` nodes away from every face.
    pub fn is_interior(&self, idx: usize, margin: usize) -> bool {
        self.unravel(idx).iter().all(|&i| i >= margin && i + margin < self.n)
    }

    fn shifted(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut m = self.unravel(idx);
        m[axis] = (m[axis] as isize + offset) as usize;
        self.ravel(&m)
    }

    /// First derivative along `axis`: central differences inside, second-order
    /// one-sided stencils on the two boundary faces.
    fn partial(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        let n = self.n;
        (0..f.len())
            .map(|idx| {
                let i = self.unravel(idx)[axis];
                let at = |o: isize| f[self.shifted(idx, axis, o)];
                if i > 0 && i + 1 < n {
                    (at(1) - at(-1)) / (2.0 * h)
                } else if n >= 3 && i == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if n >= 3 {
                    (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                } else if i == 0 {
                    (at(1) - at(0)) / h
                } else {
                    (at(0) - at(-1)) / h
                }
            })
            .collect()
    }

    fn second_partial(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        let n = self.n;
        (0..f.len())
            .map(|idx| {
                let i = self.unravel(idx)[axis];
                let at = |o: isize| f[self.shifted(idx, axis, o)];
                if i > 0 && i + 1 < n {
                    (at(1) - 2.0 * at(0) + at(-1)) / (h * h)
                } else if n >= 4 && i == 0 {
                    (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h)
                } else if n >= 4 {
                    (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / (h * h)
                } else if i == 0 {
                    (at(2.min(n as isize - 1)) - 2.0 * at(1) + at(0)) / (h * h)
                } else {
                    (at(0) - 2.0 * at(-1) + at(-2)) / (h * h)
                }
            })
            .collect()
    }

    /// Finite-difference gradient of a grid function, one vector per node.
    pub fn gradient(&self, f: &[f64]) -> Result<Vec<Vector>> {
        self.check_len(f)?;
        let parts: Vec<Vec<f64>> = (0..self.dim()).map(|k| self.partial(f, k)).collect();
        Ok((0..f.len())
            .map(|idx| Vector::from_iterator(self.dim(), parts.iter().map(|p| p[idx])))
            .collect())
    }

    /// Finite-difference Hessian: three-point second differences on the
    /// diagonal, nested central differences for the mixed partial.
    pub fn hessian(&self, f: &[f64]) -> Result<Vec<Matrix>> {
        self.check_len(f)?;
        let d = self.dim();
        let diag: Vec<Vec<f64>> = (0..d).map(|k| self.second_partial(f, k)).collect();
        let mixed = if d == 2 {
            let fx = self.partial(f, 0);
            Some(self.partial(&fx, 1))
        } else {
            None
        };
        Ok((0..f.len())
            .map(|idx| {
                let mut h = Matrix::zeros(d, d);
                for k in 0..d {
                    h[(k, k)] = diag[k][idx];
                }
                if let Some(m) = &mixed {
                    h[(0, 1)] = m[idx];
                    h[(1, 0)] = m[idx];
                }
                h
            })
            .collect())
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Dimension(format!(
                "grid function has {} values, grid has {} nodes",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_derivatives_are_exact() {
        let g = GridLayout::new(vec![-2.0], vec![3.0], 41).unwrap();
        let a = 1.7;
        let f: Vec<f64> = g.points().iter().map(|x| 0.5 * a * x[0] * x[0]).collect();
        let grad = g.gradient(&f).unwrap();
        let hess = g.hessian(&f).unwrap();
        for (x, (gr, he)) in g.points().iter().zip(grad.iter().zip(&hess)) {
            assert_abs_diff_eq!(gr[0], a * x[0], epsilon = 1e-10);
            assert_abs_diff_eq!(he[(0, 0)], a, epsilon = 1e-8);
        }
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let g = GridLayout::new(vec![0.0, 0.0], vec![1.0, 2.0], 7).unwrap();
        let f = vec![3.0; g.len()];
        for v in g.gradient(&f).unwrap() {
            assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixed_partial_2d() {
        let g = GridLayout::new(vec![-1.0, -1.0], vec![1.0, 2.0], 9).unwrap();
        let f: Vec<f64> = g
            .points()
            .iter()
            .map(|x| 0.5 * x[0] * x[0] + 0.3 * x[0] * x[1] - x[1] * x[1])
            .collect();
        for h in g.hessian(&f).unwrap() {
            assert_abs_diff_eq!(h[(0, 0)], 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(h[(0, 1)], 0.3, epsilon = 1e-8);
            assert_abs_diff_eq!(h[(1, 1)], -2.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn layout_enumeration() {
        let g = GridLayout::new(vec![0.0, 10.0], vec![1.0, 12.0], 3).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 9);
        assert_eq!(p[1].as_slice(), &[0.0, 11.0]);
        assert_eq!(p[3].as_slice(), &[0.5, 10.0]);
        assert!(g.is_interior(4, 1));
        assert!(!g.is_interior(3, 1));
        assert_abs_diff_eq!(g.cell_volume(), 0.5);
    }
}

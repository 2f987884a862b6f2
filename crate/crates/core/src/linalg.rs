//! Small dense linear-algebra helpers shared by the Gaussian code paths.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative eigenvalue floor below which a covariance is rejected.
pub const SPD_RELATIVE_FLOOR: f64 = 1e-12;

/// Eigenvalues are clamped here before taking square roots.
pub const SQRT_EIGEN_FLOOR: f64 = 1e-14;

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Largest absolute entry of `a - a'`, relative to the largest entry of `a`.
pub fn asymmetry(a: &Matrix) -> f64 {
    let scale = a.amax().max(1.0);
    (a - a.transpose()).amax() / scale
}

/// Symmetrizes `a` and checks that its spectrum is bounded away from zero.
pub fn ensure_spd(a: &Matrix, what: &str) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{what} is {}x{}", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSpd(format!("{what} has non-finite entries")));
    }
    let s = symmetrize(a);
    let eig = s.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max <= 0.0 || min < SPD_RELATIVE_FLOOR * max {
        return Err(Error::NotSpd(format!(
            "{what}: eigenvalues in [{min:e}, {max:e}]"
        )));
    }
    Ok(s)
}

fn spectral_map(a: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let eig = symmetrize(a).symmetric_eigen();
    let mapped = eig.eigenvalues.map(f);
    &eig.eigenvectors * Matrix::from_diagonal(&mapped) * eig.eigenvectors.transpose()
}

/// Principal square root of a symmetric positive semi-definite matrix.
pub fn sym_sqrt(a: &Matrix) -> Matrix {
    spectral_map(a, |l| l.max(SQRT_EIGEN_FLOOR).sqrt())
}

pub fn sym_inv_sqrt(a: &Matrix) -> Matrix {
    spectral_map(a, |l| 1.0 / l.max(SQRT_EIGEN_FLOOR).sqrt())
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let chol = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn log_det_spd(a: &Matrix) -> Result<f64> {
    let chol = symmetrize(a)
        .cholesky()
        .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn inverse(a: &Matrix, what: &str) -> Result<Matrix> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain(format!("{what} is singular")))
}

/// Splits a `2d x 2d` matrix into its four `d x d` blocks.
pub fn blocks(a: &Matrix, d: usize) -> (Matrix, Matrix, Matrix, Matrix) {
    (
        a.view((0, 0), (d, d)).into_owned(),
        a.view((0, d), (d, d)).into_owned(),
        a.view((d, 0), (d, d)).into_owned(),
        a.view((d, d), (d, d)).into_owned(),
    )
}

pub fn from_blocks(a11: &Matrix, a12: &Matrix, a21: &Matrix, a22: &Matrix) -> Matrix {
    let d1 = a11.nrows();
    let d2 = a22.nrows();
    let mut out = Matrix::zeros(d1 + d2, d1 + d2);
    out.view_mut((0, 0), (d1, d1)).copy_from(a11);
    out.view_mut((0, d1), (d1, d2)).copy_from(a12);
    out.view_mut((d1, 0), (d2, d1)).copy_from(a21);
    out.view_mut((d1, d1), (d2, d2)).copy_from(a22);
    out
}

pub fn stack(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// `log(sum(exp(v)))` with the usual max shift; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = sym_sqrt(&a);
        assert_relative_eq!(&r * &r, a, epsilon = 1e-13);
        let ri = sym_inv_sqrt(&a);
        assert_relative_eq!(&ri * &a * &ri, Matrix::identity(2, 2), epsilon = 1e-13);
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ensure_spd(&a, "a").is_err());
        let tiny = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert!(ensure_spd(&tiny, "tiny").is_err());
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp([1000.0, 1000.0]), 1000.0 + 2f64.ln());
        assert_relative_eq!(log_sum_exp([0.0_f64.ln(), 0.0]), 0.0);
    }

    #[test]
    fn log_det_matches_determinant() {
        let a = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(log_det_spd(&a).unwrap(), 5f64.ln(), epsilon = 1e-14);
    }
}

//! Small dense linear-algebra kernels shared by the certificate, propagator
//! and oracle modules. Everything here targets the low-dimensional systems
//! (n up to a few dozen) the toolkit is built for.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues below this are clipped when forming symmetric roots.
pub const EIGEN_CLIP: f64 = 1e-14;

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "matrix exponential",
            expected: "square matrix".into(),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if !all_finite(m) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    let e = if m.nrows() == 1 { DMatrix::from_element(1, 1, m[(0, 0)].exp()) } else { m.clone().exp() };
    if !all_finite(&e) {
        return Err(Error::NonFinite("matrix exponential output"));
    }
    Ok(e)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    a.is_square() && all_finite(a) && spectral_abscissa(a) < 0.0
}

/// (smallest, largest) eigenvalue of the symmetric part of `m`.
pub fn sym_eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = symmetrize(m).symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn sym_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen_extremes(m).1
}

pub fn sym_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen_extremes(m).0
}

/// `m^{-1/2}` for symmetric positive definite `m`, eigenvalues clipped at
/// [`EIGEN_CLIP`].
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let d = eig.eigenvalues.map(|l| 1.0 / l.max(EIGEN_CLIP).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// A factor `L` with `L Lᵀ = m` for symmetric positive semidefinite `m`.
/// Negative rounding noise in the spectrum is clipped to zero, so rank
/// deficient covariances (e.g. a single Wiener input into a 2-state system)
/// are handled without a Cholesky failure.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

/// Induced 2-norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Solves `A X + X Aᵀ + Q = 0` by Kronecker vectorization.
///
/// The operator `I ⊗ A + A ⊗ I` is nonsingular whenever no two eigenvalues
/// of `A` sum to zero, which holds for Hurwitz `A`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "Lyapunov equation",
            expected: format!("{n}x{n}"),
            got: format!("A {:?}, Q {:?}", a.shape(), q.shape()),
        });
    }
    if !all_finite(a) || !all_finite(q) {
        return Err(Error::NonFinite("Lyapunov equation input"));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let vec_x = op
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Lyapunov operator"))?;
    let x = DMatrix::from_column_slice(n, n, vec_x.as_slice());
    if !all_finite(&x) {
        return Err(Error::NonFinite("Lyapunov solution"));
    }
    Ok(symmetrize(&x))
}

/// Residual `‖A X + X Aᵀ + Q‖_max`.
pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (a * x + x * a.transpose() + q).amax()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            context: "matrix rows",
            expected: format!("{ncols} columns in every row"),
            got: format!("{:?}", rows.iter().map(Vec::len).collect::<Vec<_>>()),
        });
    }
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flat_map(|r| r.iter().copied()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_element(1, 1, -2.0);
        let q = DMatrix::from_element(1, 1, 1.0);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!((x[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_residual_small() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -0.5, -3.0, 1.0, 0.0, 0.2, -0.7]);
        let q = DMatrix::identity(3, 3);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!(lyapunov_residual(&a, &x, &q) < 1e-12);
    }

    #[test]
    fn psd_factor_handles_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0]);
        let m = &v * v.transpose();
        let l = psd_factor(&m);
        assert!((&l * l.transpose() - m).amax() < 1e-12);
    }

    #[test]
    fn inv_sqrt_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_inv_sqrt(&m);
        let back = &r * &m * &r;
        assert!((back - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn abscissa_of_companion() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        assert!((spectral_abscissa(&a) + 1.0).abs() < 1e-12);
        assert!(is_hurwitz(&a));
        assert!(!is_hurwitz(&DMatrix::from_element(1, 1, 1.0)));
    }
}

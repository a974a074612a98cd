//! Spectral noise covariance, whitening, and the Anscombe transform.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cube::BandMatrix;
use crate::error::{Error, Result};

/// Relative eigenvalue floor applied to estimated covariances.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Spectral noise covariance `C` with `sqrt(C)` and `sqrt(C^-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    cov: DMatrix<f64>,
    sqrt_cov: DMatrix<f64>,
    inv_sqrt_cov: DMatrix<f64>,
}

impl NoiseModel {
    /// Builds the model from a symmetric positive-definite covariance.
    pub fn from_covariance(cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square and non-empty, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let asym = (&cov - cov.transpose()).norm();
        if asym > 1e-12 * cov.norm() {
            return Err(Error::InvalidParameter(format!(
                "covariance is not symmetric (|C - C'| = {asym:e})"
            )));
        }
        let cov = symmetrize(&cov);
        let (sqrt_cov, inv_sqrt_cov) = spd_sqrt(&cov)?;
        Ok(NoiseModel {
            cov,
            sqrt_cov,
            inv_sqrt_cov,
        })
    }

    /// White noise with standard deviation `sigma` in every band.
    pub fn isotropic(bands: usize, sigma: f64) -> Result<Self> {
        Self::from_covariance(DMatrix::from_diagonal_element(bands, bands, sigma * sigma))
    }

    pub fn bands(&self) -> usize {
        self.cov.nrows()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn sqrt_cov(&self) -> &DMatrix<f64> {
        &self.sqrt_cov
    }

    pub fn inv_sqrt_cov(&self) -> &DMatrix<f64> {
        &self.inv_sqrt_cov
    }

    /// Per-band noise standard deviation, `sqrt(diag(C))`.
    pub fn band_std(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    /// Noise std of the coefficient on each column of `basis`:
    /// `sqrt(e_i' C e_i)`.
    pub fn projected_std(&self, basis: &DMatrix<f64>) -> Vec<f64> {
        basis
            .column_iter()
            .map(|e| (e.transpose() * &self.cov * e)[(0, 0)].max(0.0).sqrt())
            .collect()
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Square root and inverse square root of an SPD matrix, both built from
/// one symmetric eigendecomposition.
pub fn spd_sqrt(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(symmetrize(cov));
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let q = &eig.eigenvectors;
    let root = eig.eigenvalues.map(f64::sqrt);
    let sqrt = q * DMatrix::from_diagonal(&root) * q.transpose();
    let inv = q * DMatrix::from_diagonal(&root.map(|r| 1.0 / r)) * q.transpose();
    Ok((symmetrize(&sqrt), symmetrize(&inv)))
}

/// Estimates the noise covariance by multiple regression: every band is
/// regressed on all the others and the residuals are taken as noise.
///
/// The resulting covariance has its eigenvalues floored at
/// `EIGEN_FLOOR * max(lambda_max, mean(y^2))`, so it stays invertible even
/// when some bands carry no noise at all.
pub fn estimate_noise_covariance(y: &BandMatrix) -> Result<NoiseModel> {
    let (nb, n) = (y.bands(), y.pixels());
    if n <= nb {
        return Err(Error::Underdetermined {
            pixels: n,
            bands: nb,
        });
    }
    let m = y.matrix();
    let gram = m * m.transpose();
    let mut residuals = DMatrix::zeros(nb, n);
    for band in 0..nb {
        let others: Vec<usize> = (0..nb).filter(|&b| b != band).collect();
        let target = m.row(band);
        if others.is_empty() {
            residuals.row_mut(band).copy_from(&target);
            continue;
        }
        let sub = gram.select_rows(&others).select_columns(&others);
        let rhs = gram.select_rows(&others).column(band).into_owned();
        let beta = pseudo_solve(sub, &rhs);
        let fit = beta.transpose() * m.select_rows(&others);
        residuals.row_mut(band).copy_from(&(target - fit));
    }
    let cov = symmetrize(&(&residuals * residuals.transpose() / n as f64));
    let scale = m.norm_squared() / (nb * n) as f64;
    NoiseModel::from_covariance(floor_eigenvalues(&cov, scale))
}

/// Minimum-norm least-squares solution of a symmetric PSD system.
fn pseudo_solve(a: DMatrix<f64>, b: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.amax();
    let cutoff = 1e-12 * max;
    let qtb = eig.eigenvectors.transpose() * b;
    let scaled = qtb.zip_map(&eig.eigenvalues, |v, l| if l > cutoff { v / l } else { 0.0 });
    &eig.eigenvectors * scaled
}

/// Clamps eigenvalues of a symmetric matrix to
/// `EIGEN_FLOOR * max(lambda_max, scale)`.
pub fn floor_eigenvalues(cov: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(cov));
    let floor = EIGEN_FLOOR * eig.eigenvalues.max().max(scale);
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&vals) * q.transpose()))
}

fn check_model(y: &BandMatrix, nm: &NoiseModel) -> Result<()> {
    if y.bands() != nm.bands() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} bands, noise model has {}",
            y.bands(),
            nm.bands()
        )));
    }
    Ok(())
}

/// `sqrt(C^-1) y`: makes the noise white with unit variance.
pub fn whiten(y: &BandMatrix, nm: &NoiseModel) -> Result<BandMatrix> {
    check_model(y, nm)?;
    Ok(BandMatrix::from_finite(&nm.inv_sqrt_cov * y.matrix()))
}

/// `sqrt(C) x`: inverse of [`whiten`].
pub fn unwhiten(x: &BandMatrix, nm: &NoiseModel) -> Result<BandMatrix> {
    check_model(x, nm)?;
    Ok(BandMatrix::from_finite(&nm.sqrt_cov * x.matrix()))
}

/// `2 sqrt(y + 3/8)`.
pub fn anscombe_forward(y: &BandMatrix) -> Result<BandMatrix> {
    let m = y.matrix();
    for pixel in 0..m.ncols() {
        for band in 0..m.nrows() {
            let value = m[(band, pixel)];
            if value < 0.0 {
                return Err(Error::NegativeInput { band, pixel, value });
            }
        }
    }
    Ok(BandMatrix::from_finite(m.map(|v| 2.0 * (v + 0.375).sqrt())))
}

/// Algebraic inverse `(t/2)^2 - 3/8`.
///
/// Inputs below `2 sqrt(3/8)` are outside the range of the forward map;
/// they are clamped there so the result is never negative.
pub fn anscombe_inverse(t: &BandMatrix) -> BandMatrix {
    let low = 2.0 * 0.375f64.sqrt();
    BandMatrix::from_finite(t.matrix().map(|v| {
        let v = v.max(low);
        (v * 0.5) * (v * 0.5) - 0.375
    }))
}

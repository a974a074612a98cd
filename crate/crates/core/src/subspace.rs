//! Signal subspace: estimation from the leading left singular vectors,
//! projection onto eigen-image coefficients and reconstruction.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cube::BandMatrix;
use crate::error::{Error, Result};

/// Orthonormal `bands x p` basis of the signal subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
    singular_values: Vec<f64>,
}

impl SubspaceBasis {
    /// Wraps a basis with orthonormal columns. `singular_values` may be
    /// empty when the basis did not come from data.
    pub fn from_orthonormal(basis: DMatrix<f64>, singular_values: Vec<f64>) -> Result<Self> {
        let p = basis.ncols();
        if p == 0 || p > basis.nrows() {
            return Err(Error::InvalidParameter(format!(
                "subspace dimension {p} must be in 1..={}",
                basis.nrows()
            )));
        }
        let gram_err = (basis.transpose() * &basis - DMatrix::identity(p, p)).norm();
        if gram_err > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "basis columns are not orthonormal (|E'E - I| = {gram_err:e})"
            )));
        }
        Ok(SubspaceBasis {
            basis,
            singular_values,
        })
    }

    pub fn bands(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// The matrix `E`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// All singular values of the data, largest first.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Cumulative fraction of energy `sum_{i<=k} s_i^2 / sum s_i^2` for
    /// `k = 1..=len`.
    pub fn energy_fractions(&self) -> Vec<f64> {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        let mut acc = 0.0;
        self.singular_values
            .iter()
            .map(|s| {
                acc += s * s;
                if total > 0.0 {
                    acc / total
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// `(I - EE')m`: the part of `m` outside the subspace.
    pub fn orthogonal_residual(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m - &self.basis * (self.basis.transpose() * m)
    }
}

/// Top-`p` left singular vectors of `y`.
///
/// Computed from the eigendecomposition of the `bands x bands` Gram
/// matrix, which is cheap when pixels vastly outnumber bands. Each vector
/// is signed so that its largest-magnitude entry is positive.
pub fn estimate_basis(y: &BandMatrix, p: usize) -> Result<SubspaceBasis> {
    let (nb, n) = (y.bands(), y.pixels());
    let rank_bound = nb.min(n);
    if p == 0 || p > rank_bound {
        return Err(Error::InvalidParameter(format!(
            "subspace dimension {p} must be in 1..={rank_bound}"
        )));
    }
    let m = y.matrix();
    let gram = m * m.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut basis = DMatrix::zeros(nb, p);
    for (k, &j) in order.iter().take(p).enumerate() {
        let mut v = eig.eigenvectors.column(j).into_owned();
        let mut lead = 0;
        for i in 1..nb {
            if v[i].abs() > v[lead].abs() {
                lead = i;
            }
        }
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        basis.set_column(k, &v);
    }
    let singular_values = order
        .iter()
        .take(rank_bound)
        .map(|&j| eig.eigenvalues[j].max(0.0).sqrt())
        .collect();
    Ok(SubspaceBasis {
        basis,
        singular_values,
    })
}

fn check_bands(y: &BandMatrix, sb: &SubspaceBasis) -> Result<()> {
    if y.bands() != sb.bands() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} bands, basis has {}",
            y.bands(),
            sb.bands()
        )));
    }
    Ok(())
}

/// Eigen-image coefficients `Z = E'y` (`p x n`).
pub fn project(y: &BandMatrix, sb: &SubspaceBasis) -> Result<BandMatrix> {
    check_bands(y, sb)?;
    Ok(BandMatrix::from_finite(sb.basis.transpose() * y.matrix()))
}

/// `E z`.
pub fn reconstruct(z: &BandMatrix, sb: &SubspaceBasis) -> Result<BandMatrix> {
    if z.bands() != sb.dim() {
        return Err(Error::DimensionMismatch(format!(
            "coefficients have {} rows, basis dimension is {}",
            z.bands(),
            sb.dim()
        )));
    }
    Ok(BandMatrix::from_finite(&sb.basis * z.matrix()))
}

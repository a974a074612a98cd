use nalgebra::DMatrix;

use super::matching::{corner_grid, Plane};
use super::transform::Dct2;
use super::{check_sigma, Aggregator, Denoiser};
use crate::error::{Error, Result};

/// Sliding-window DCT hard thresholding.
#[derive(Debug, Clone)]
pub struct DctDenoiser {
    pub patch: usize,
    pub stride: usize,
    /// Non-DC coefficients below `threshold * sigma` are zeroed.
    pub threshold: f64,
}

impl Default for DctDenoiser {
    fn default() -> Self {
        DctDenoiser {
            patch: 8,
            stride: 1,
            threshold: 3.0,
        }
    }
}

impl DctDenoiser {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.stride == 0 || !(self.threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!("invalid dct denoiser settings {self:?}")));
        }
        Ok(())
    }
}

impl Denoiser for DctDenoiser {
    fn name(&self) -> &str {
        "dct"
    }

    fn denoise(&self, image: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
        check_sigma(sigma)?;
        self.validate()?;
        let (rows, cols) = image.shape();
        if sigma == 0.0 || rows == 0 || cols == 0 {
            return Ok(image.clone());
        }
        // Work relative to one pixel value: a constant image becomes exactly
        // zero, and the offset only touches the untouched DC coefficient.
        let offset = image[(0, 0)];
        let mut plane = Plane::from_matrix(image);
        plane.data.iter_mut().for_each(|v| *v -= offset);

        let d = self.patch.min(rows).min(cols);
        let dct = Dct2::new(d);
        let thr = self.threshold * sigma;
        let mut agg = Aggregator::new(rows, cols);
        let mut patch = vec![0.0; d * d];
        let mut scratch = vec![0.0; d * d];
        for &r in &corner_grid(rows, d, self.stride) {
            for &c in &corner_grid(cols, d, self.stride) {
                plane.copy_patch((r, c), d, &mut patch);
                dct.forward(&mut patch, &mut scratch);
                for v in &mut patch[1..] {
                    if v.abs() < thr {
                        *v = 0.0;
                    }
                }
                dct.inverse(&mut patch, &mut scratch);
                agg.add((r, c), d, &patch);
            }
        }
        plane.data = agg.finish(&plane.data);
        plane.data.iter_mut().for_each(|v| *v += offset);
        Ok(plane.to_matrix())
    }
}

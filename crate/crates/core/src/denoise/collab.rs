use nalgebra::DMatrix;

use super::matching::{corner_grid, match_corners, Plane};
use super::transform::{haar_forward, haar_inverse, Dct2};
use super::{check_sigma, Aggregator, Denoiser};
use crate::error::{Error, Result};

/// Single-stage block-matching collaborative filter.
///
/// For every reference patch on a `stride` grid, similar patches are
/// stacked into a group, transformed by a 2-D DCT per patch and a Haar
/// transform across the group, hard-thresholded (DC planes excepted),
/// transformed back and averaged into the output.
#[derive(Debug, Clone)]
pub struct CollabDenoiser {
    pub patch: usize,
    pub stride: usize,
    /// Search radius around each reference corner.
    pub window: usize,
    pub k_max: usize,
    /// Coefficients below `threshold * sigma` are zeroed.
    pub threshold: f64,
}

impl Default for CollabDenoiser {
    fn default() -> Self {
        CollabDenoiser {
            patch: 8,
            stride: 4,
            window: 16,
            k_max: 16,
            threshold: 2.7,
        }
    }
}

impl CollabDenoiser {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.stride == 0 || self.k_max == 0 || !(self.threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!("invalid collab denoiser settings {self:?}")));
        }
        Ok(())
    }
}

impl Denoiser for CollabDenoiser {
    fn name(&self) -> &str {
        "collab"
    }

    fn denoise(&self, image: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
        check_sigma(sigma)?;
        self.validate()?;
        let (rows, cols) = image.shape();
        if sigma == 0.0 || rows == 0 || cols == 0 {
            return Ok(image.clone());
        }
        let offset = image[(0, 0)];
        let mut plane = Plane::from_matrix(image);
        plane.data.iter_mut().for_each(|v| *v -= offset);

        let d = self.patch.min(rows).min(cols);
        let area = d * d;
        let dct = Dct2::new(d);
        let thr = self.threshold * sigma;
        let max_group = self.k_max.next_power_of_two();

        let mut agg = Aggregator::new(rows, cols);
        // group[m * area + k]: coefficient k of member m
        let mut group = vec![0.0; max_group * area];
        let mut scratch = vec![0.0; area.max(max_group)];
        let mut column = vec![0.0; max_group];

        for &r in &corner_grid(rows, d, self.stride) {
            for &c in &corner_grid(cols, d, self.stride) {
                let members = match_corners(&plane, (r, c), d, self.window, self.k_max);
                let size = members.len().next_power_of_two();
                for (m, &corner) in members.iter().enumerate() {
                    let slot = &mut group[m * area..(m + 1) * area];
                    plane.copy_patch(corner, d, slot);
                    dct.forward(slot, &mut scratch);
                }
                // pad by repeating the last member
                let last = members.len() - 1;
                for m in members.len()..size {
                    group.copy_within(last * area..(last + 1) * area, m * area);
                }

                for k in 0..area {
                    for m in 0..size {
                        column[m] = group[m * area + k];
                    }
                    haar_forward(&mut column[..size], &mut scratch);
                    if k != 0 {
                        for v in &mut column[..size] {
                            if v.abs() < thr {
                                *v = 0.0;
                            }
                        }
                    }
                    haar_inverse(&mut column[..size], &mut scratch);
                    for m in 0..size {
                        group[m * area + k] = column[m];
                    }
                }

                for (m, &corner) in members.iter().enumerate() {
                    let slot = &mut group[m * area..(m + 1) * area];
                    dct.inverse(slot, &mut scratch);
                    agg.add(corner, d, slot);
                }
            }
        }
        plane.data = agg.finish(&plane.data);
        plane.data.iter_mut().for_each(|v| *v += offset);
        Ok(plane.to_matrix())
    }
}

#[cfg(test)]
mod tests {
    use super::super::DctDenoiser;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn piecewise_constant(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |r, c| match (r * 3 / n, c * 3 / n) {
            (0, _) => 0.2,
            (1, 0) | (1, 1) => 0.8,
            (1, _) => 0.5,
            (_, 2) => 1.0,
            _ => 0.0,
        })
    }

    fn mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm_squared() / a.len() as f64
    }

    fn noisy(clean: &DMatrix<f64>, sigma: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        clean.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn collab_halves_the_error() {
        let clean = piecewise_constant(64);
        let y = noisy(&clean, 0.1, 11);
        let out = CollabDenoiser::default().denoise(&y, 0.1).unwrap();
        let (before, after) = (mse(&y, &clean), mse(&out, &clean));
        assert!(after < 0.5 * before, "{after} vs {before}");
    }

    #[test]
    fn dct_reduces_the_error() {
        let clean = piecewise_constant(64);
        let y = noisy(&clean, 0.1, 11);
        let out = DctDenoiser::default().denoise(&y, 0.1).unwrap();
        let (before, after) = (mse(&y, &clean), mse(&out, &clean));
        assert!(after < 0.7 * before, "{after} vs {before}");
    }

    #[test]
    fn shift_consistency() {
        let n = 64;
        let clean = piecewise_constant(n);
        let y = noisy(&clean, 0.1, 12);
        let den = CollabDenoiser::default();
        let base = mse(&den.denoise(&y, 0.1).unwrap(), &clean);
        // translate by 3 pixels, cropping the wrapped border
        let shift = 3;
        let ys = DMatrix::from_fn(n - shift, n - shift, |r, c| y[(r + shift, c + shift)]);
        let cs = DMatrix::from_fn(n - shift, n - shift, |r, c| clean[(r + shift, c + shift)]);
        let shifted = mse(&den.denoise(&ys, 0.1).unwrap(), &cs);
        assert!((shifted - base).abs() < 0.2 * base, "{shifted} vs {base}");
    }
}

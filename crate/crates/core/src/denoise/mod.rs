//! Single-band denoisers plugged into the eigen-image update.
//!
//! Every denoiser honours the same contract:
//!
//! - finite input gives finite output;
//! - `sigma == 0` returns the input unchanged;
//! - a constant image is returned unchanged for any `sigma`;
//! - the output depends only on the inputs.

mod collab;
mod dct;
pub mod matching;
pub mod transform;

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use collab::CollabDenoiser;
pub use dct::DctDenoiser;
pub use matching::{find_similar_patches, PatchGroup};

pub trait Denoiser: Send + Sync {
    fn name(&self) -> &str;

    /// Denoises a `rows x cols` image corrupted by white Gaussian noise
    /// with standard deviation `sigma`.
    fn denoise(&self, image: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>>;
}

impl fmt::Debug for dyn Denoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Denoiser({})", self.name())
    }
}

/// Returns its input; turns the eigen-image prior off.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn name(&self) -> &str {
        "identity"
    }

    fn denoise(&self, image: &DMatrix<f64>, _sigma: f64) -> Result<DMatrix<f64>> {
        Ok(image.clone())
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("noise std {sigma} must be finite and >= 0")))
    }
}

/// Builds a denoiser by name (`identity`, `dct` or `collab`) with
/// `key=value` overrides of its defaults.
pub fn by_name(name: &str, options: &[(String, String)]) -> Result<Box<dyn Denoiser>> {
    match name {
        "identity" => {
            if let Some((k, _)) = options.first() {
                return Err(Error::InvalidParameter(format!("identity denoiser has no option {k:?}")));
            }
            Ok(Box::new(IdentityDenoiser))
        }
        "dct" => {
            let mut d = DctDenoiser::default();
            for (k, v) in options {
                match k.as_str() {
                    "patch" => d.patch = parse_opt(k, v)?,
                    "stride" => d.stride = parse_opt(k, v)?,
                    "threshold" => d.threshold = parse_opt(k, v)?,
                    _ => return Err(unknown_option(name, k)),
                }
            }
            d.validate()?;
            Ok(Box::new(d))
        }
        "collab" => {
            let mut d = CollabDenoiser::default();
            for (k, v) in options {
                match k.as_str() {
                    "patch" => d.patch = parse_opt(k, v)?,
                    "stride" => d.stride = parse_opt(k, v)?,
                    "window" => d.window = parse_opt(k, v)?,
                    "k_max" => d.k_max = parse_opt(k, v)?,
                    "threshold" => d.threshold = parse_opt(k, v)?,
                    _ => return Err(unknown_option(name, k)),
                }
            }
            d.validate()?;
            Ok(Box::new(d))
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown denoiser {other:?} (expected collab, dct or identity)"
        ))),
    }
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value {value:?} for denoiser option {key}")))
}

fn unknown_option(name: &str, key: &str) -> Error {
    Error::InvalidParameter(format!("denoiser {name} has no option {key:?}"))
}

/// Accumulates overlapping patch estimates with uniform weights.
pub(crate) struct Aggregator {
    cols: usize,
    sum: Vec<f64>,
    weight: Vec<f64>,
}

impl Aggregator {
    pub fn new(rows: usize, cols: usize) -> Self {
        Aggregator {
            cols,
            sum: vec![0.0; rows * cols],
            weight: vec![0.0; rows * cols],
        }
    }

    pub fn add(&mut self, (r0, c0): (usize, usize), d: usize, patch: &[f64]) {
        for i in 0..d {
            let base = (r0 + i) * self.cols + c0;
            for j in 0..d {
                self.sum[base + j] += patch[i * d + j];
                self.weight[base + j] += 1.0;
            }
        }
    }

    /// Per-pixel weighted average; uncovered pixels fall back to `fallback`.
    pub fn finish(self, fallback: &[f64]) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.weight)
            .zip(fallback)
            .map(|((s, w), f)| if *w > 0.0 { s / w } else { *f })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn registered() -> Vec<Box<dyn Denoiser>> {
        ["identity", "dct", "collab"]
            .iter()
            .map(|n| by_name(n, &[]).unwrap())
            .collect()
    }

    fn noisy_image(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |r, c| ((r / 5 + c / 7) % 3) as f64 + 0.3 * rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn contract_sigma_zero_is_identity() {
        let img = noisy_image(20, 17, 1);
        for d in registered() {
            assert_eq!(d.denoise(&img, 0.0).unwrap(), img, "{}", d.name());
        }
    }

    #[test]
    fn contract_constant_preserved() {
        for value in [0.0, 0.1, -3.7, 1e5] {
            let img = DMatrix::from_element(19, 23, value);
            for d in registered() {
                for sigma in [0.01, 0.5, 10.0] {
                    assert_eq!(d.denoise(&img, sigma).unwrap(), img, "{} {value} {sigma}", d.name());
                }
            }
        }
    }

    #[test]
    fn contract_finite_and_deterministic() {
        let img = noisy_image(24, 30, 2);
        for d in registered() {
            let a = d.denoise(&img, 0.3).unwrap();
            let b = d.denoise(&img, 0.3).unwrap();
            assert!(a.iter().all(|v| v.is_finite()));
            assert_eq!(a, b, "{}", d.name());
            assert_eq!(a.shape(), img.shape());
        }
    }

    #[test]
    fn contract_tiny_images() {
        let img = noisy_image(3, 5, 3);
        for d in registered() {
            let out = d.denoise(&img, 0.3).unwrap();
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn rejects_negative_sigma() {
        let img = noisy_image(10, 10, 4);
        for name in ["dct", "collab"] {
            assert!(by_name(name, &[]).unwrap().denoise(&img, -1.0).is_err());
        }
    }

    #[test]
    fn options_parsing() {
        let opts = vec![("patch".to_string(), "4".to_string()), ("k_max".into(), "8".into())];
        assert_eq!(by_name("collab", &opts).unwrap().name(), "collab");
        assert!(by_name("collab", &[("bogus".into(), "1".into())]).is_err());
        assert!(by_name("dct", &[("patch".into(), "x".into())]).is_err());
        assert!(by_name("dct", &[("patch".into(), "0".into())]).is_err());
        assert!(by_name("bm3d", &[]).is_err());
    }
}

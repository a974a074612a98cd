//! The end-to-end denoising pipeline: optional Anscombe, noise whitening,
//! subspace estimation, the robust solver, and the way back.

use crate::cube::{BandMatrix, GridShape};
use crate::denoise::Denoiser;
use crate::error::Result;
use crate::noise::{anscombe_forward, anscombe_inverse, estimate_noise_covariance, unwhiten, whiten, NoiseModel};
use crate::solver::{rhyde_denoise, RhydeParams, RhydeResult};
use crate::subspace::{estimate_basis, SubspaceBasis};

#[derive(Debug, Clone)]
pub enum NoiseSource {
    /// Estimate the covariance from the data by band regression.
    Estimate,
    Known(NoiseModel),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub params: RhydeParams,
    /// Stabilize Poisson-like noise before whitening.
    pub anscombe: bool,
    pub noise: NoiseSource,
}

impl PipelineConfig {
    pub fn new(p: usize) -> Self {
        PipelineConfig {
            params: RhydeParams::new(p),
            anscombe: false,
            noise: NoiseSource::Estimate,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Denoised image in the input domain.
    pub denoised: BandMatrix,
    /// Solver output in the whitened domain.
    pub solve: RhydeResult,
    pub noise: NoiseModel,
    /// Basis of the whitened data.
    pub basis: SubspaceBasis,
}

pub fn denoise_image(
    y: &BandMatrix,
    shape: GridShape,
    config: &PipelineConfig,
    denoiser: &dyn Denoiser,
) -> Result<PipelineOutput> {
    config.params.validate()?;
    let stabilized;
    let input = if config.anscombe {
        stabilized = anscombe_forward(y)?;
        &stabilized
    } else {
        y
    };
    let noise = match &config.noise {
        NoiseSource::Estimate => estimate_noise_covariance(input)?,
        NoiseSource::Known(nm) => nm.clone(),
    };
    let yw = whiten(input, &noise)?;
    let basis = estimate_basis(&yw, config.params.p)?;
    log::info!(
        "whitened {} bands x {} pixels, p = {}, leading singular value {:.4e}",
        yw.bands(),
        yw.pixels(),
        basis.dim(),
        basis.singular_values().first().copied().unwrap_or(0.0)
    );
    let solve = rhyde_denoise(&yw, shape, &basis, &config.params, denoiser)?;
    let mut denoised = unwhiten(&solve.x_hat, &noise)?;
    if config.anscombe {
        denoised = anscombe_inverse(&denoised);
    }
    Ok(PipelineOutput {
        denoised,
        solve,
        noise,
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::IdentityDenoiser;
    use nalgebra::DMatrix;

    fn in_subspace(nb: usize, shape: GridShape) -> BandMatrix {
        let e = DMatrix::from_fn(nb, 2, |b, k| if k == 0 { 1.0 } else { (b as f64 * 0.4).sin() });
        let z = DMatrix::from_fn(2, shape.pixels(), |k, i| {
            let (r, c) = shape.position(i);
            2.0 + ((r + 3 * c + k) as f64 * 0.3).cos()
        });
        BandMatrix::new(e * z).unwrap()
    }

    #[test]
    fn noiseless_in_subspace_round_trip() {
        let shape = GridShape::new(10, 10);
        let y = in_subspace(6, shape);
        let mut cfg = PipelineConfig::new(2);
        cfg.noise = NoiseSource::Known(NoiseModel::isotropic(6, 0.01).unwrap());
        let out = denoise_image(&y, shape, &cfg, &IdentityDenoiser).unwrap();
        let rel = (out.denoised.matrix() - y.matrix()).norm() / y.frobenius_norm();
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn anscombe_branch_round_trips() {
        let shape = GridShape::new(10, 10);
        let y = BandMatrix::new(in_subspace(6, shape).matrix() * 10.0).unwrap();
        let mut cfg = PipelineConfig::new(2);
        cfg.anscombe = true;
        cfg.noise = NoiseSource::Known(NoiseModel::isotropic(6, 1.0).unwrap());
        cfg.params.max_iters = 1;
        let out = denoise_image(&y, shape, &cfg, &IdentityDenoiser).unwrap();
        assert!(out.denoised.matrix().iter().all(|v| *v >= 0.0));
        let neg = BandMatrix::new(DMatrix::from_element(6, 100, -1.0)).unwrap();
        assert!(denoise_image(&neg, shape, &cfg, &IdentityDenoiser).is_err());
    }
}

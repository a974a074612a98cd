//! Robust hyperspectral denoising.
//!
//! Images are modelled as a low-rank background plus a column-sparse set
//! of rare pixels plus Gaussian noise. [`pipeline::denoise_image`]
//! whitens the noise, estimates the signal subspace and runs the ADMM
//! solver; the rare-pixel part comes back separately for detection.
//!
//! ```
//! use rhyde::denoise::CollabDenoiser;
//! use rhyde::detect::{rhyde_scores, roc_curve};
//! use rhyde::pipeline::{denoise_image, PipelineConfig};
//! use rhyde::simulate::{simulate_semireal, AnomalySpectrum, SimulationSpec};
//!
//! let spec = SimulationSpec {
//!     rows: 24,
//!     cols: 24,
//!     bands: 12,
//!     p_true: 3,
//!     implant_rate: 0.005,
//!     anomaly: AnomalySpectrum::Orthogonal { norm: 0.5 },
//!     noise_u: 0.02,
//!     seed: 1,
//! };
//! let sim = simulate_semireal(&spec)?;
//! let out = denoise_image(&sim.noisy, spec.shape(), &PipelineConfig::new(3), &CollabDenoiser::default())?;
//! let roc = roc_curve(&rhyde_scores(&out.solve.s_hat), &sim.mask)?;
//! assert!(roc.auc > 0.99);
//! # Ok::<(), rhyde::Error>(())
//! ```

pub mod cube;
pub mod denoise;
pub mod detect;
pub mod error;
pub mod hsc;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod rng;
pub mod simulate;
pub mod solver;
pub mod subspace;

pub use error::{Error, ErrorKind, Result};

//! Semi-real experiment generator.
//!
//! A clean low-rank image is synthesized from smooth random spectra mixed
//! by smooth nonnegative abundance fields, a small fraction of pixels is
//! replaced by an anomalous spectrum, and band-dependent Gaussian noise is
//! added last.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::cube::{AnomalyMask, BandMatrix, GridShape};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::subspace::SubspaceBasis;

/// Where the implanted spectrum comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum AnomalySpectrum {
    /// Use this spectrum verbatim.
    Explicit(Vec<f64>),
    /// A random direction orthogonal to the clean signal subspace, scaled
    /// to the given Euclidean norm.
    Orthogonal { norm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub p_true: usize,
    pub implant_rate: f64,
    pub anomaly: AnomalySpectrum,
    /// Per-band noise std is drawn from `U(0, noise_u)`.
    pub noise_u: f64,
    pub seed: u64,
}

impl SimulationSpec {
    /// 100x100x50 image of rank 5 with 0.02% anomalies of norm 11 and
    /// `u = 0.065`.
    pub fn case3_analog(seed: u64) -> Self {
        SimulationSpec {
            rows: 100,
            cols: 100,
            bands: 50,
            p_true: 5,
            implant_rate: 0.0002,
            anomaly: AnomalySpectrum::Orthogonal { norm: 11.0 },
            noise_u: 0.065,
            seed,
        }
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(self.rows, self.cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.bands == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        if self.p_true == 0 || self.p_true > self.bands {
            return Err(Error::InvalidParameter(format!(
                "p_true {} must be in 1..={}",
                self.p_true, self.bands
            )));
        }
        if !(0.0..1.0).contains(&self.implant_rate) {
            return Err(Error::InvalidParameter(format!(
                "implant rate {} outside [0, 1)",
                self.implant_rate
            )));
        }
        if !(self.noise_u >= 0.0 && self.noise_u.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise bound {} must be >= 0", self.noise_u)));
        }
        match &self.anomaly {
            AnomalySpectrum::Explicit(s) => {
                if s.len() != self.bands {
                    return Err(Error::DimensionMismatch(format!(
                        "anomaly spectrum has {} entries for {} bands",
                        s.len(),
                        self.bands
                    )));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("anomaly spectrum must be finite".into()));
                }
            }
            AnomalySpectrum::Orthogonal { norm } => {
                if !(*norm >= 0.0 && norm.is_finite()) {
                    return Err(Error::InvalidParameter(format!("anomaly norm {norm} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    /// Number of implanted pixels: `round(implant_rate * pixels)`.
    pub fn anomaly_count(&self) -> usize {
        (self.implant_rate * (self.rows * self.cols) as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// Clean image including implanted anomalies.
    pub clean: BandMatrix,
    /// Clean image before implantation, exactly rank `p_true`.
    pub background: BandMatrix,
    pub noisy: BandMatrix,
    pub mask: AnomalyMask,
    pub noise_std: Vec<f64>,
    /// Unit-norm endmember spectra, one per column.
    pub endmembers: DMatrix<f64>,
    pub anomaly_spectrum: DVector<f64>,
}

impl Simulation {
    /// `noisy - clean`.
    pub fn noise(&self) -> DMatrix<f64> {
        self.noisy.matrix() - self.clean.matrix()
    }

    /// Orthonormal basis of the true signal subspace.
    pub fn true_basis(&self) -> SubspaceBasis {
        orthonormal_basis(&self.endmembers)
    }
}

fn orthonormal_basis(m: &DMatrix<f64>) -> SubspaceBasis {
    let q = m.clone().qr().q();
    SubspaceBasis::from_orthonormal(q, vec![]).expect("QR factor is orthonormal")
}

/// Random-walk spectra, shifted nonnegative and normalized.
fn endmembers(bands: usize, count: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, Stream::Endmembers);
    let mut m = DMatrix::zeros(bands, count);
    for k in 0..count {
        let mut walk = Vec::with_capacity(bands);
        let mut acc = 0.0;
        for _ in 0..bands {
            acc += rng.sample::<f64, _>(StandardNormal);
            walk.push(acc);
        }
        let lo = walk.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = walk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let offset = 0.2 * (hi - lo) + 1e-3;
        let mut col = DVector::from_iterator(bands, walk.iter().map(|v| v - lo + offset));
        col /= col.norm();
        m.set_column(k, &col);
    }
    m
}

/// 1-D Gaussian kernel truncated at 3 sigma.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable blur with reflecting borders.
fn blur(field: &DMatrix<f64>, kernel: &[f64]) -> DMatrix<f64> {
    let (rows, cols) = field.shape();
    let radius = (kernel.len() / 2) as isize;
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - i - 1;
            } else {
                return i as usize;
            }
        }
    };
    let horiz = DMatrix::from_fn(rows, cols, |r, c| -> f64 {
        kernel
            .iter()
            .enumerate()
            .map(|(k, w)| w * field[(r, reflect(c as isize + k as isize - radius, cols))])
            .sum()
    });
    DMatrix::from_fn(rows, cols, |r, c| -> f64 {
        kernel
            .iter()
            .enumerate()
            .map(|(k, w)| w * horiz[(reflect(r as isize + k as isize - radius, rows), c)])
            .sum()
    })
}

/// Smooth nonnegative abundance fields, one per row (`count x pixels`).
fn abundances(shape: GridShape, count: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, Stream::Abundances);
    let sigma = (shape.rows.min(shape.cols) as f64 / 12.0).max(1.0);
    let kernel = gaussian_kernel(sigma);
    let mut out = DMatrix::zeros(count, shape.pixels());
    for k in 0..count {
        let white = DMatrix::from_fn(shape.rows, shape.cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        let smooth = blur(&white, &kernel);
        let lo = smooth.min();
        let hi = smooth.max();
        let span = if hi > lo { hi - lo } else { 1.0 };
        for r in 0..shape.rows {
            for c in 0..shape.cols {
                out[(k, shape.index(r, c))] = 0.1 + (smooth[(r, c)] - lo) / span;
            }
        }
    }
    out
}

/// Generates a semi-real test image; fully determined by `spec.seed`.
pub fn simulate_semireal(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let shape = spec.shape();
    let n = shape.pixels();
    let e = endmembers(spec.bands, spec.p_true, spec.seed);
    let z = abundances(shape, spec.p_true, spec.seed);
    let mut background = &e * z;
    // data range [0, 1]
    let peak = background.max();
    background /= peak;

    let anomaly = match &spec.anomaly {
        AnomalySpectrum::Explicit(s) => DVector::from_column_slice(s),
        AnomalySpectrum::Orthogonal { norm } => {
            let mut rng = stream(spec.seed, Stream::AnomalySpectrum);
            let basis = orthonormal_basis(&e);
            let draw = DMatrix::from_fn(spec.bands, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = basis.orthogonal_residual(&draw).column(0).into_owned();
            let len = v.norm();
            v * (*norm / len)
        }
    };

    let count = spec.anomaly_count().min(n);
    let mut sites = {
        let mut rng = stream(spec.seed, Stream::ImplantSites);
        index::sample(&mut rng, n, count).into_vec()
    };
    sites.sort_unstable();
    let mut clean = background.clone();
    for &i in &sites {
        clean.set_column(i, &anomaly);
    }

    let noise_std: Vec<f64> = {
        let mut rng = stream(spec.seed, Stream::NoiseLevels);
        (0..spec.bands)
            .map(|_| spec.noise_u * rng.random::<f64>())
            .collect()
    };
    let mut noisy = clean.clone();
    {
        let mut rng = stream(spec.seed, Stream::NoiseSamples);
        for i in 0..n {
            for b in 0..spec.bands {
                let g: f64 = rng.sample(StandardNormal);
                noisy[(b, i)] += noise_std[b] * g;
            }
        }
    }

    Ok(Simulation {
        clean: BandMatrix::new(clean)?,
        background: BandMatrix::new(background)?,
        noisy: BandMatrix::new(noisy)?,
        mask: AnomalyMask::from_indices(n, &sites)?,
        noise_std,
        endmembers: e,
        anomaly_spectrum: anomaly,
    })
}

/// Out-of-subspace energy of the noiseless data relative to that of the
/// noise: `|(I - EE')(Y - N)|_F / |(I - EE')N|_F`.
pub fn orthogonal_residual_power_ratio(
    clean_with_anomalies: &BandMatrix,
    noise: &BandMatrix,
    basis: &SubspaceBasis,
) -> Result<f64> {
    let (x, n) = (clean_with_anomalies.matrix(), noise.matrix());
    if x.shape() != n.shape() || x.nrows() != basis.bands() {
        return Err(Error::DimensionMismatch(format!(
            "signal {:?}, noise {:?}, basis with {} bands",
            x.shape(),
            n.shape(),
            basis.bands()
        )));
    }
    let denom = basis.orthogonal_residual(n).norm();
    if denom == 0.0 {
        return Err(Error::ZeroDenominator(
            "noise lies entirely inside the subspace".into(),
        ));
    }
    Ok(basis.orthogonal_residual(x).norm() / denom)
}

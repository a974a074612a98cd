//! Image-quality criteria: PSNR, 3D-PSNR, SSIM, spectral angle.
//!
//! Infinite PSNR (exact reconstruction) is reported as `f64::INFINITY`
//! and written as `inf` in CSV.

use std::io::Write;

use nalgebra::DMatrix;

use crate::cube::{BandMatrix, GridShape};
use crate::error::{Error, Result};

/// SSIM window side.
pub const SSIM_WINDOW: usize = 8;

/// Peak used for per-band PSNR and SSIM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Peak {
    /// Maximum of each clean band.
    PerBand,
    Global(f64),
}

fn check_same(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_peak(peak: f64) -> Result<()> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!("peak {peak} must be positive")));
    }
    Ok(())
}

/// `10 log10(peak^2 / MSE)`; `+inf` when the images agree.
pub fn psnr_band(x_clean: &DMatrix<f64>, x_hat: &DMatrix<f64>, peak: f64) -> Result<f64> {
    check_same(x_clean, x_hat)?;
    check_peak(peak)?;
    let mse = (x_clean - x_hat).norm_squared() / x_clean.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// `10 log10(x_max^2 / |X - X_hat|_F^2)`, with the total (not mean)
/// squared error in the denominator.
pub fn psnr_3d(x_clean: &BandMatrix, x_hat: &BandMatrix, x_max: f64) -> Result<f64> {
    check_same(x_clean.matrix(), x_hat.matrix())?;
    check_peak(x_max)?;
    let err = (x_clean.matrix() - x_hat.matrix()).norm_squared();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (x_max * x_max / err).log10())
}

/// Mean SSIM over all 8x8 windows at stride 1, uniform weights,
/// `C1 = (0.01 peak)^2`, `C2 = (0.03 peak)^2`.
pub fn ssim_band(x_clean: &DMatrix<f64>, x_hat: &DMatrix<f64>, peak: f64) -> Result<f64> {
    check_same(x_clean, x_hat)?;
    check_peak(peak)?;
    let (rows, cols) = x_clean.shape();
    let w = SSIM_WINDOW;
    if rows < w || cols < w {
        return Err(Error::InvalidParameter(format!(
            "{rows}x{cols} image is smaller than the {w}x{w} SSIM window"
        )));
    }
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let area = (w * w) as f64;
    let mut total = 0.0;
    for r in 0..=rows - w {
        for c in 0..=cols - w {
            let a = x_clean.view((r, c), (w, w));
            let b = x_hat.view((r, c), (w, w));
            let (ma, mb) = (a.sum() / area, b.sum() / area);
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for (x, y) in a.iter().zip(b.iter()) {
                let (dx, dy) = (x - ma, y - mb);
                va += dx * dx;
                vb += dy * dy;
                cov += dx * dy;
            }
            let (va, vb, cov) = (va / area, vb / area, cov / area);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / ((rows - w + 1) * (cols - w + 1)) as f64)
}

/// Mean spectral angle in degrees. Pixels with a zero spectrum in either
/// input are skipped.
pub fn msam(x_clean: &BandMatrix, x_hat: &BandMatrix) -> Result<f64> {
    check_same(x_clean.matrix(), x_hat.matrix())?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, b) in x_clean.matrix().column_iter().zip(x_hat.matrix().column_iter()) {
        let (na, nb) = (a.norm(), b.norm());
        if na == 0.0 || nb == 0.0 {
            continue;
        }
        let (ua, ub) = (a / na, b / nb);
        sum += 2.0 * (&ua - &ub).norm().atan2((&ua + &ub).norm());
        used += 1;
    }
    let skipped = x_clean.pixels() - used;
    if used == 0 {
        return Err(Error::ZeroDenominator("every pixel has a zero spectrum".into()));
    }
    if skipped > 0 {
        log::warn!("spectral angle skipped {skipped} zero-spectrum pixels");
    }
    Ok((sum / used as f64).to_degrees())
}

fn band_peak(clean: &DMatrix<f64>, peak: Peak) -> Result<f64> {
    let p = match peak {
        Peak::PerBand => clean.max(),
        Peak::Global(p) => p,
    };
    check_peak(p)?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub per_band_psnr: Vec<f64>,
    pub mpsnr: f64,
    pub psnr_3d: f64,
    pub per_band_ssim: Vec<f64>,
    pub mssim: f64,
    pub msam: f64,
}

impl QualityReport {
    /// All criteria for `x_hat` against `x_clean`. 3D-PSNR uses the
    /// largest clean entry as `x_max`.
    pub fn compute(x_clean: &BandMatrix, x_hat: &BandMatrix, shape: GridShape, peak: Peak) -> Result<Self> {
        check_same(x_clean.matrix(), x_hat.matrix())?;
        let mut per_band_psnr = Vec::with_capacity(x_clean.bands());
        let mut per_band_ssim = Vec::with_capacity(x_clean.bands());
        for b in 0..x_clean.bands() {
            let c = x_clean.band_image(b, shape)?;
            let h = x_hat.band_image(b, shape)?;
            let pk = band_peak(&c, peak)?;
            per_band_psnr.push(psnr_band(&c, &h, pk)?);
            per_band_ssim.push(ssim_band(&c, &h, pk)?);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(QualityReport {
            mpsnr: mean(&per_band_psnr),
            mssim: mean(&per_band_ssim),
            psnr_3d: psnr_3d(x_clean, x_hat, x_clean.matrix().max())?,
            msam: msam(x_clean, x_hat)?,
            per_band_psnr,
            per_band_ssim,
        })
    }

    /// `band,psnr_db,ssim` per band, then `mpsnr`, `psnr3d_db`, `mssim`,
    /// `msam_deg` rows with the value in the second column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let err = |e: csv::Error| Error::Csv(e.to_string());
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["band", "psnr_db", "ssim"]).map_err(err)?;
        for (b, (p, s)) in self.per_band_psnr.iter().zip(&self.per_band_ssim).enumerate() {
            wtr.write_record([b.to_string(), p.to_string(), s.to_string()])
                .map_err(err)?;
        }
        for (k, v) in [
            ("mpsnr", self.mpsnr),
            ("psnr3d_db", self.psnr_3d),
            ("mssim", self.mssim),
            ("msam_deg", self.msam),
        ] {
            wtr.write_record([k.to_string(), v.to_string(), String::new()])
                .map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// Mean of per-band PSNR with per-band peaks.
pub fn mpsnr(x_clean: &BandMatrix, x_hat: &BandMatrix) -> Result<f64> {
    check_same(x_clean.matrix(), x_hat.matrix())?;
    let (c, h) = (x_clean.matrix(), x_hat.matrix());
    let mut total = 0.0;
    for b in 0..c.nrows() {
        let pk = c.row(b).max();
        check_peak(pk)?;
        let mse = (c.row(b) - h.row(b)).norm_squared() / c.ncols() as f64;
        total += if mse == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (pk * pk / mse).log10()
        };
    }
    Ok(total / c.nrows() as f64)
}

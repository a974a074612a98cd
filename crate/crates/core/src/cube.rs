//! Image containers and the cube/matrix reshaping.
//!
//! A cube is stored band-sequentially: band outermost, then row, then
//! column. Pixels are numbered row-major, so pixel `r * cols + c` of the
//! band matrix is the spectrum at `(r, c)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Spatial size of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        GridShape { rows, cols }
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major pixel index of `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn position(&self, pixel: usize) -> (usize, usize) {
        (pixel / self.cols, pixel % self.cols)
    }
}

/// A `rows x cols x bands` hyperspectral image.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    shape: GridShape,
    bands: usize,
    samples: Vec<f64>,
}

impl HsiCube {
    /// Builds a cube from band-sequential samples.
    pub fn new(rows: usize, cols: usize, bands: usize, samples: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::DimensionMismatch(format!(
                "cube dimensions must be positive, got {rows}x{cols}x{bands}"
            )));
        }
        let expected = rows * cols * bands;
        if samples.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols}x{bands} cube needs {expected} samples, got {}",
                samples.len()
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(HsiCube {
            shape: GridShape::new(rows, cols),
            bands,
            samples,
        })
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    /// Band-sequential samples.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.samples[(band * self.shape.rows + row) * self.shape.cols + col]
    }

    /// One band as a `rows x cols` image.
    pub fn band(&self, band: usize) -> DMatrix<f64> {
        let plane = self.shape.pixels();
        let start = band * plane;
        DMatrix::from_row_slice(
            self.shape.rows,
            self.shape.cols,
            &self.samples[start..start + plane],
        )
    }
}

/// Bands-by-pixels matrix; column `i` is the spectrum of pixel `i`.
///
/// Storage is column-major, so each spectrum is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix(DMatrix<f64>);

impl BandMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(BandMatrix(entries))
    }

    /// Wraps a matrix produced by internal arithmetic on finite inputs.
    pub(crate) fn from_finite(entries: DMatrix<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        BandMatrix(entries)
    }

    pub fn zeros(bands: usize, pixels: usize) -> Self {
        BandMatrix(DMatrix::zeros(bands, pixels))
    }

    pub fn bands(&self) -> usize {
        self.0.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn spectrum(&self, pixel: usize) -> DVector<f64> {
        self.0.column(pixel).into_owned()
    }

    /// Row `band` reshaped to the image grid.
    pub fn band_image(&self, band: usize, shape: GridShape) -> Result<DMatrix<f64>> {
        check_grid(shape, self.pixels())?;
        let row = self.0.row(band);
        Ok(DMatrix::from_fn(shape.rows, shape.cols, |r, c| {
            row[shape.index(r, c)]
        }))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

fn check_grid(shape: GridShape, pixels: usize) -> Result<()> {
    if shape.pixels() != pixels {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} grid has {} pixels but the matrix has {pixels} columns",
            shape.rows,
            shape.cols,
            shape.pixels()
        )));
    }
    Ok(())
}

pub fn cube_to_matrix(cube: &HsiCube) -> BandMatrix {
    let plane = cube.shape.pixels();
    let m = DMatrix::from_fn(cube.bands, plane, |b, i| cube.samples[b * plane + i]);
    BandMatrix(m)
}

pub fn matrix_to_cube(m: &BandMatrix, rows: usize, cols: usize) -> Result<HsiCube> {
    let shape = GridShape::new(rows, cols);
    check_grid(shape, m.pixels())?;
    if rows == 0 || cols == 0 || m.bands() == 0 {
        return Err(Error::DimensionMismatch(
            "cube dimensions must be positive".into(),
        ));
    }
    // Row-major over (band, pixel) is exactly band-sequential order.
    let samples = m.0.transpose().as_slice().to_vec();
    Ok(HsiCube {
        shape,
        bands: m.bands(),
        samples,
    })
}

/// Ground-truth anomaly flags, one per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyMask {
    flags: Vec<bool>,
}

impl AnomalyMask {
    pub fn new(flags: Vec<bool>) -> Self {
        AnomalyMask { flags }
    }

    pub fn from_indices(pixels: usize, indices: &[usize]) -> Result<Self> {
        let mut flags = vec![false; pixels];
        for &i in indices {
            if i >= pixels {
                return Err(Error::DimensionMismatch(format!(
                    "anomaly index {i} outside {pixels} pixels"
                )));
            }
            flags[i] = true;
        }
        Ok(AnomalyMask { flags })
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Indices of flagged pixels in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_cube() {
        let cube = HsiCube::new(1, 1, 3, vec![5.0, 6.0, 7.0]).unwrap();
        let m = cube_to_matrix(&cube);
        assert_eq!(m.bands(), 3);
        assert_eq!(m.pixels(), 1);
        assert_eq!(m.matrix().column(0).as_slice(), &[5.0, 6.0, 7.0]);
        assert_eq!(matrix_to_cube(&m, 1, 1).unwrap(), cube);
    }

    #[test]
    fn pixel_order_is_row_major() {
        // a b
        // c d
        let cube = HsiCube::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = cube_to_matrix(&cube);
        assert_eq!(m.matrix().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cube.get(0, 1, 0), 3.0);
    }

    #[test]
    fn reshape_rejects_mismatch() {
        let m = BandMatrix::zeros(1, 4);
        let err = matrix_to_cube(&m, 2, 3).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
        assert!(err.to_string().contains("6 pixels"));
    }

    #[test]
    fn cube_rejects_non_finite() {
        let err = HsiCube::new(1, 1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
    }

    #[test]
    fn band_image_matches_cube_band() {
        let samples: Vec<f64> = (0..24).map(f64::from).collect();
        let cube = HsiCube::new(2, 3, 4, samples).unwrap();
        let m = cube_to_matrix(&cube);
        for b in 0..4 {
            assert_eq!(m.band_image(b, cube.shape()).unwrap(), cube.band(b));
        }
    }

    #[test]
    fn mask_indices() {
        let mask = AnomalyMask::from_indices(5, &[3, 1]).unwrap();
        assert_eq!(mask.indices(), vec![1, 3]);
        assert_eq!(mask.count(), 2);
        assert!(AnomalyMask::from_indices(2, &[2]).is_err());
    }

    proptest! {
        #[test]
        fn reshaping_is_a_bijection(rows in 1usize..7, cols in 1usize..7, bands in 1usize..6, seed in any::<u64>()) {
            let n = rows * cols * bands;
            let samples: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 - 500.0).collect();
            let cube = HsiCube::new(rows, cols, bands, samples).unwrap();
            let m = cube_to_matrix(&cube);
            prop_assert_eq!(m.pixels(), rows * cols);
            prop_assert_eq!(&matrix_to_cube(&m, rows, cols).unwrap(), &cube);
            let m2 = cube_to_matrix(&matrix_to_cube(&m, rows, cols).unwrap());
            prop_assert_eq!(m2, m);
        }
    }
}

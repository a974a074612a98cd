//! Orthonormal 2-D DCT on square patches and the multilevel Haar
//! transform used across patch groups.

use std::f64::consts::PI;

/// Orthonormal DCT-II basis for square patches of side `d`.
#[derive(Debug, Clone)]
pub struct Dct2 {
    d: usize,
    /// Row-major `d x d`; row `k` is the `k`-th basis vector.
    basis: Vec<f64>,
}

impl Dct2 {
    pub fn new(d: usize) -> Self {
        let mut basis = vec![0.0; d * d];
        for k in 0..d {
            let alpha = if k == 0 {
                (1.0 / d as f64).sqrt()
            } else {
                (2.0 / d as f64).sqrt()
            };
            for i in 0..d {
                basis[k * d + i] = alpha * (PI * (2 * i + 1) as f64 * k as f64 / (2 * d) as f64).cos();
            }
        }
        Dct2 { d, basis }
    }

    pub fn size(&self) -> usize {
        self.d
    }

    /// `C P C'` for a row-major patch. `scratch` must hold `d*d` values.
    pub fn forward(&self, patch: &mut [f64], scratch: &mut [f64]) {
        self.apply(patch, scratch, false);
    }

    /// `C' P C`, the inverse of [`Dct2::forward`].
    pub fn inverse(&self, coeffs: &mut [f64], scratch: &mut [f64]) {
        self.apply(coeffs, scratch, true);
    }

    fn apply(&self, p: &mut [f64], tmp: &mut [f64], transpose: bool) {
        let d = self.d;
        let c = |k: usize, i: usize| {
            if transpose {
                self.basis[i * d + k]
            } else {
                self.basis[k * d + i]
            }
        };
        // along columns: tmp = C p
        for k in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for i in 0..d {
                    s += c(k, i) * p[i * d + j];
                }
                tmp[k * d + j] = s;
            }
        }
        // along rows: p = tmp C'
        for i in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    s += tmp[i * d + j] * c(k, j);
                }
                p[i * d + k] = s;
            }
        }
    }
}

/// In-place orthonormal multilevel Haar transform; `x.len()` must be a
/// power of two.
pub fn haar_forward(x: &mut [f64], scratch: &mut [f64]) {
    debug_assert!(x.len().is_power_of_two());
    let mut len = x.len();
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            scratch[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
            scratch[half + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
        }
        x[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
}

pub fn haar_inverse(x: &mut [f64], scratch: &mut [f64]) {
    debug_assert!(x.len().is_power_of_two());
    let mut len = 2;
    while len <= x.len() {
        let half = len / 2;
        for i in 0..half {
            let (a, d) = (x[i], x[half + i]);
            scratch[2 * i] = (a + d) * std::f64::consts::FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (a - d) * std::f64::consts::FRAC_1_SQRT_2;
        }
        x[..len].copy_from_slice(&scratch[..len]);
        len *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn energy(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn dct_round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in [1, 2, 4, 7, 8] {
            let dct = Dct2::new(d);
            let mut scratch = vec![0.0; d * d];
            for _ in 0..20 {
                let p: Vec<f64> = (0..d * d).map(|_| rng.random_range(-5.0..5.0)).collect();
                let mut c = p.clone();
                dct.forward(&mut c, &mut scratch);
                assert!((energy(&c) - energy(&p)).abs() < 1e-10 * energy(&p).max(1.0));
                dct.inverse(&mut c, &mut scratch);
                for (a, b) in c.iter().zip(&p) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let dct = Dct2::new(8);
        let mut p = vec![0.5; 64];
        let mut s = vec![0.0; 64];
        dct.forward(&mut p, &mut s);
        assert!((p[0] - 4.0).abs() < 1e-12);
        assert!(p[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn haar_round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for len in [1, 2, 4, 16, 32] {
            let mut s = vec![0.0; len];
            for _ in 0..20 {
                let x: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
                let mut y = x.clone();
                haar_forward(&mut y, &mut s);
                assert!((energy(&y) - energy(&x)).abs() < 1e-10 * energy(&x).max(1.0));
                haar_inverse(&mut y, &mut s);
                for (a, b) in y.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn haar_of_constant_group() {
        let mut x = vec![3.0; 4];
        let mut s = vec![0.0; 4];
        haar_forward(&mut x, &mut s);
        assert!((x[0] - 6.0).abs() < 1e-12);
        assert!(x[1..].iter().all(|v| v.abs() < 1e-12));
    }
}

//! Chi-square quantiles for the outlier-penalty rule.

use crate::error::{Error, Result};

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // continued fraction for Q, modified Lentz
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        (1.0 - (log_prefix + h.ln()).exp()).max(0.0)
    }
}

pub fn chi_square_cdf(x: f64, dof: usize) -> f64 {
    regularized_gamma_p(dof as f64 / 2.0, x / 2.0)
}

fn chi_square_pdf(x: f64, dof: usize) -> f64 {
    let k = dof as f64 / 2.0;
    if x <= 0.0 {
        return 0.0;
    }
    ((k - 1.0) * x.ln() - x / 2.0 - k * 2f64.ln() - ln_gamma(k)).exp()
}

/// Quantile `q` with `P(chi2_dof <= q) = prob`.
///
/// Newton steps on the CDF, kept inside a shrinking bisection bracket.
pub fn chi_square_inverse_cdf(prob: f64, dof: usize) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidParameter(format!("probability {prob} outside (0, 1)")));
    }
    if dof == 0 {
        return Err(Error::InvalidParameter("chi-square needs at least one degree of freedom".into()));
    }
    let (mut lo, mut hi) = (0.0, dof as f64 + 1.0);
    while chi_square_cdf(hi, dof) < prob {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = chi_square_cdf(x, dof) - prob;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = chi_square_pdf(x, dof);
        let newton = x - f / pdf;
        x = if pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-15 * hi || (f / pdf.max(f64::MIN_POSITIVE)).abs() <= 1e-15 * x {
            break;
        }
    }
    Ok(x)
}

/// `sqrt(chi2inv(1 - p_value, bands))`: the norm a column of pure
/// unit-variance noise stays below with probability `1 - p_value`.
pub fn lambda2_from_pvalue(p_value: f64, bands: usize) -> Result<f64> {
    if !(p_value > 0.0 && p_value < 1.0) {
        return Err(Error::InvalidParameter(format!("p-value {p_value} outside (0, 1)")));
    }
    Ok(chi_square_inverse_cdf(1.0 - p_value, bands)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};
    use statrs::function::gamma::gamma_lr;

    /// Independent route: plain bisection on statrs' incomplete gamma.
    fn oracle(prob: f64, dof: usize) -> f64 {
        let cdf = |x: f64| gamma_lr(dof as f64 / 2.0, x / 2.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        while cdf(hi) < prob {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < prob {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn median_with_two_dof() {
        let q = chi_square_inverse_cdf(0.5, 2).unwrap();
        assert!((q - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((lambda2_from_pvalue(0.5, 2).unwrap() - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn one_dof_matches_normal_quantile() {
        let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.995);
        let q = chi_square_inverse_cdf(0.99, 1).unwrap();
        assert!((q - 6.634_896_601).abs() < 1e-6);
        assert!((q - z * z).abs() < 1e-8);
        let l = lambda2_from_pvalue(0.01, 1).unwrap();
        assert!((l - 2.575_829_304).abs() < 1e-6);
    }

    #[test]
    fn inverse_hits_the_cdf() {
        for dof in [1, 2, 3, 10, 50, 191, 500] {
            for prob in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.99, 0.999_999] {
                let q = chi_square_inverse_cdf(prob, dof).unwrap();
                assert!((chi_square_cdf(q, dof) - prob).abs() < 1e-8, "dof {dof} prob {prob}");
                assert!((gamma_lr(dof as f64 / 2.0, q / 2.0) - prob).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn agrees_with_bisection_oracle() {
        for dof in [1, 50, 191] {
            let ours = lambda2_from_pvalue(0.01, dof).unwrap();
            let theirs = oracle(0.99, dof).sqrt();
            assert!((ours - theirs).abs() < 1e-6, "dof {dof}: {ours} vs {theirs}");
        }
    }

    #[test]
    fn monotone() {
        for k in [1, 10, 100] {
            assert!(chi_square_inverse_cdf(0.9, k).unwrap() < chi_square_inverse_cdf(0.99, k).unwrap());
        }
        let mut prev = f64::INFINITY;
        for p in [0.001, 0.01, 0.1, 0.5, 0.9] {
            let l = lambda2_from_pvalue(p, 20).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(chi_square_inverse_cdf(p, 3).is_err());
            assert!(lambda2_from_pvalue(p, 3).is_err());
        }
    }
}

//! Anomaly scores and their evaluation against ground truth.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cube::{AnomalyMask, BandMatrix, GridShape};
use crate::error::{Error, Result};
use crate::noise::EIGEN_FLOOR;

/// One nonnegative score per pixel; higher is more anomalous.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    scores: Vec<f64>,
}

impl ScoreMap {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if scores.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidParameter("scores must be nonnegative".into()));
        }
        Ok(ScoreMap { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Pixel indices sorted by decreasing score, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }
}

/// `r_i = |s_i|_2`.
pub fn rhyde_scores(s_hat: &BandMatrix) -> ScoreMap {
    ScoreMap {
        scores: s_hat.matrix().column_iter().map(|c| c.norm()).collect(),
    }
}

/// Global RX: Mahalanobis distance of each spectrum to the sample mean
/// under the sample covariance.
pub fn global_rx(y: &BandMatrix) -> Result<ScoreMap> {
    let (nb, n) = (y.bands(), y.pixels());
    if n <= nb {
        return Err(Error::Underdetermined { pixels: n, bands: nb });
    }
    let m = y.matrix();
    let mean = m.column_mean();
    let mut centered = m.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / n as f64;
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.max();
    let scale = m.norm_squared() / m.len() as f64;
    if !(top > 1e-20 * scale) {
        return Err(Error::DegenerateCovariance("all pixels are identical".into()));
    }
    let floor = EIGEN_FLOOR * top;
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let mut proj: DMatrix<f64> = eig.eigenvectors.transpose() * centered;
    for (mut row, s) in proj.row_iter_mut().zip(inv_sqrt.iter()) {
        row *= *s;
    }
    ScoreMap::new(proj.column_iter().map(|c| c.norm_squared()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false_alarm_rate, detection_rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Score threshold of each point; the first is `+inf`.
    pub thresholds: Vec<f64>,
    pub auc: f64,
    pub min_fa_at_full_detection: f64,
}

/// Sweeps the threshold over every distinct score, flagging pixels with
/// `score >= threshold`. Equal scores enter together.
pub fn roc_curve(scores: &ScoreMap, truth: &AnomalyMask) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for a mask of {} pixels",
            scores.len(),
            truth.len()
        )));
    }
    let positives = truth.count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    let s = scores.scores();
    let order = scores.ranking();
    let (np, nn) = (positives as f64, negatives as f64);

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = s[order[k]];
        while k < order.len() && s[order[k]] == t {
            if truth.flags()[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / nn, tp as f64 / np));
        thresholds.push(t);
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum();
    let min_fa_at_full_detection = points
        .iter()
        .filter(|p| p.1 == 1.0)
        .map(|p| p.0)
        .fold(1.0, f64::min);
    Ok(RocCurve {
        points,
        thresholds,
        auc,
        min_fa_at_full_detection,
    })
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Csv(e.to_string())
}

/// `threshold,fa_rate,det_rate` rows.
pub fn write_roc_csv<W: Write>(roc: &RocCurve, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["threshold", "fa_rate", "det_rate"]).map_err(csv_err)?;
    for (t, (fa, pd)) in roc.thresholds.iter().zip(&roc.points) {
        wtr.write_record([t.to_string(), fa.to_string(), pd.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(csv_err)
}

/// `row,col,score` rows in pixel order.
pub fn write_scores_csv<W: Write>(scores: &ScoreMap, shape: GridShape, w: W) -> Result<()> {
    if scores.len() != shape.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for a {}x{} grid",
            scores.len(),
            shape.rows,
            shape.cols
        )));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["row", "col", "score"]).map_err(csv_err)?;
    for (i, s) in scores.scores().iter().enumerate() {
        let (r, c) = shape.position(i);
        wtr.write_record([r.to_string(), c.to_string(), s.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn mann_whitney(s: &[f64], truth: &[bool]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &ti) in truth.iter().enumerate() {
            for (j, &tj) in truth.iter().enumerate() {
                if ti && !tj {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        wins += 1.0;
                    } else if s[i] == s[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn kahan_norm(v: impl Iterator<Item = f64>) -> f64 {
        let (mut sum, mut c) = (0.0f64, 0.0f64);
        for x in v {
            let y = x * x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum.sqrt()
    }

    #[test]
    fn rhyde_scores_examples() {
        assert!(rhyde_scores(&BandMatrix::zeros(3, 4)).scores().iter().all(|s| *s == 0.0));
        let mut m = DMatrix::zeros(2, 3);
        m[(0, 1)] = 3.0;
        m[(1, 1)] = 4.0;
        let s = rhyde_scores(&BandMatrix::new(m).unwrap());
        assert_eq!(s.scores(), &[0.0, 5.0, 0.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(17, 40, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = rhyde_scores(&BandMatrix::new(m.clone()).unwrap());
        for (i, v) in s.scores().iter().enumerate() {
            let oracle = kahan_norm(m.column(i).iter().copied());
            assert!((v - oracle).abs() < 1e-12 * oracle);
        }
    }

    #[test]
    fn rx_with_identity_covariance_is_squared_distance() {
        // +-1 patterns in orthogonal directions: zero mean, covariance I
        let nb = 4;
        let mut cols = Vec::new();
        for b in 0..nb {
            for sign in [1.0, -1.0] {
                let mut v = vec![0.0; nb];
                v[b] = sign * (nb as f64).sqrt();
                cols.extend(v);
            }
        }
        let m = DMatrix::from_column_slice(nb, 2 * nb, &cols);
        let cov = &m * m.transpose() / (2 * nb) as f64;
        assert!((cov - DMatrix::identity(nb, nb)).norm() < 1e-14);
        let s = global_rx(&BandMatrix::new(m.clone()).unwrap()).unwrap();
        for (i, v) in s.scores().iter().enumerate() {
            assert!((v - m.column(i).norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn rx_rejects_constant_and_underdetermined() {
        let y = BandMatrix::new(DMatrix::from_element(3, 10, 0.5)).unwrap();
        assert!(matches!(global_rx(&y), Err(Error::DegenerateCovariance(_))));
        let y = BandMatrix::new(DMatrix::from_fn(5, 5, |r, c| (r * c) as f64)).unwrap();
        assert!(matches!(global_rx(&y), Err(Error::Underdetermined { .. })));
    }

    #[test]
    fn rx_finds_a_spike() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (nb, n) = (10, 10_000);
        let mut m = DMatrix::from_fn(nb, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        m.column_mut(1234).add_scalar_mut(10.0);
        let s = global_rx(&BandMatrix::new(m).unwrap()).unwrap();
        assert_eq!(s.ranking()[0], 1234);
    }

    #[test]
    fn rx_is_invariant_to_band_recoloring() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (nb, n) = (5, 300);
        let m = DMatrix::from_fn(nb, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let t = DMatrix::from_fn(nb, nb, |r, c| if r == c { 2.0 } else { rng.random_range(-0.5..0.5) });
        let shifted = &t * &m + DMatrix::from_element(nb, n, 3.0);
        let a = global_rx(&BandMatrix::new(m).unwrap()).unwrap();
        let b = global_rx(&BandMatrix::new(shifted).unwrap()).unwrap();
        assert_eq!(a.ranking(), b.ranking());
    }

    #[test]
    fn roc_examples() {
        let truth = AnomalyMask::new(vec![true, false, true, false, false]);
        let perfect = ScoreMap::new(vec![5.0, 1.0, 4.0, 2.0, 0.0]).unwrap();
        let roc = roc_curve(&perfect, &truth).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.min_fa_at_full_detection, 0.0);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));

        let swapped = AnomalyMask::new(truth.flags().iter().map(|f| !f).collect());
        assert_eq!(roc_curve(&perfect, &swapped).unwrap().auc, 0.0);

        let ties = ScoreMap::new(vec![1.0; 5]).unwrap();
        let roc = roc_curve(&ties, &truth).unwrap();
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc.auc, 0.5);
    }

    #[test]
    fn roc_errors() {
        let s = ScoreMap::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(roc_curve(&s, &AnomalyMask::new(vec![true, true])), Err(Error::SingleClass { .. })));
        assert!(matches!(roc_curve(&s, &AnomalyMask::new(vec![false, false])), Err(Error::SingleClass { .. })));
        assert!(roc_curve(&s, &AnomalyMask::new(vec![true, false, false])).is_err());
    }

    #[test]
    fn uninformative_scores_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let s = ScoreMap::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let truth = AnomalyMask::from_indices(n, &rand::seq::index::sample(&mut rng, n, n / 100).into_vec()).unwrap();
        let auc = roc_curve(&s, &truth).unwrap().auc;
        assert!((0.45..=0.55).contains(&auc), "{auc}");
    }

    #[test]
    fn csv_outputs() {
        let truth = AnomalyMask::new(vec![true, false, false]);
        let s = ScoreMap::new(vec![2.0, 1.0, 1.0]).unwrap();
        let roc = roc_curve(&s, &truth).unwrap();
        let mut buf = Vec::new();
        write_roc_csv(&roc, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "threshold,fa_rate,det_rate\ninf,0,0\n2,0,1\n1,1,1\n");
        let mut buf = Vec::new();
        write_scores_csv(&s, GridShape::new(1, 3), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,col,score\n0,0,2\n0,1,1\n0,2,1\n");
        assert!(write_scores_csv(&s, GridShape::new(2, 2), Vec::new()).is_err());
    }

    fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..500).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..20, n).prop_map(|v| v.into_iter().map(f64::from).collect()),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("both classes", |(_, t)| t.iter().any(|x| *x) && t.iter().any(|x| !*x))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn auc_is_mann_whitney((s, t) in labelled()) {
            let roc = roc_curve(&ScoreMap::new(s.clone()).unwrap(), &AnomalyMask::new(t.clone())).unwrap();
            prop_assert!((roc.auc - mann_whitney(&s, &t)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&roc.auc));
            for w in roc.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert_eq!(roc.points.last().copied(), Some((1.0, 1.0)));
            let full: Vec<f64> = roc.points.iter().filter(|p| p.1 == 1.0).map(|p| p.0).collect();
            prop_assert_eq!(roc.min_fa_at_full_detection, full[0]);
        }

        #[test]
        fn monotone_transform_invariance((s, t) in labelled()) {
            let truth = AnomalyMask::new(t);
            let a = roc_curve(&ScoreMap::new(s.clone()).unwrap(), &truth).unwrap();
            let warped: Vec<f64> = s.iter().map(|v| (v * 0.3).exp() + 7.0).collect();
            let b = roc_curve(&ScoreMap::new(warped).unwrap(), &truth).unwrap();
            prop_assert_eq!(a.points, b.points);
            prop_assert_eq!(a.auc, b.auc);
            prop_assert_eq!(a.min_fa_at_full_detection, b.min_fa_at_full_detection);
        }
    }
}

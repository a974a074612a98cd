use nalgebra::{DMatrix, DVectorViewMut};

/// Proximity operator of `tau * |.|_2`: shrinks `x` toward the origin by
/// `tau`, returning zero when `|x| <= tau`.
pub fn vector_soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    shrink(&mut out, tau);
    out
}

fn shrink(x: &mut [f64], tau: f64) {
    if tau <= 0.0 {
        return;
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let keep = (norm - tau).max(0.0);
    let scale = if keep > 0.0 { keep / (keep + tau) } else { 0.0 };
    x.iter_mut().for_each(|v| *v *= scale);
}

fn shrink_column(mut col: DVectorViewMut<'_, f64>, tau: f64) {
    shrink(col.as_mut_slice(), tau);
}

/// Column-wise [`vector_soft_threshold`]: the proximity operator of the
/// sum of column norms.
pub fn group_soft_threshold(m: &mut DMatrix<f64>, tau: f64) {
    for col in m.column_iter_mut() {
        shrink_column(col, tau);
    }
}

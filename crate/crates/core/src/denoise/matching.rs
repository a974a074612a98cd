//! Block matching: gathers patches resembling a reference patch.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-major copy of a single-band image, for tight inner loops.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(m[(r, c)]);
            }
        }
        Plane { rows, cols, data }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn copy_patch(&self, (r0, c0): (usize, usize), d: usize, out: &mut [f64]) {
        for i in 0..d {
            let start = (r0 + i) * self.cols + c0;
            out[i * d..(i + 1) * d].copy_from_slice(&self.data[start..start + d]);
        }
    }

    fn distance(&self, a: (usize, usize), b: (usize, usize), d: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            let ra = &self.data[(a.0 + i) * self.cols + a.1..][..d];
            let rb = &self.data[(b.0 + i) * self.cols + b.1..][..d];
            for (x, y) in ra.iter().zip(rb) {
                let t = x - y;
                s += t * t;
            }
        }
        s
    }
}

/// Top-left corners `0, step, 2*step, ...` plus the last valid corner.
pub(crate) fn corner_grid(len: usize, d: usize, step: usize) -> Vec<usize> {
    let last = len - d;
    let mut v: Vec<usize> = (0..=last).step_by(step.max(1)).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Reference patch plus its most similar neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGroup {
    pub reference: (usize, usize),
    /// Top-left corners, reference first, then by increasing distance.
    pub members: Vec<(usize, usize)>,
    pub patch_size: usize,
    /// Row-major `d x d` patches, in member order.
    pub patches: Vec<Vec<f64>>,
}

/// Collects up to `k_max` patches of side `d` whose corners lie within
/// `window` pixels of `reference`, ranked by squared L2 distance.
///
/// The reference always comes first; equal distances keep row-major scan
/// order.
pub fn find_similar_patches(
    image: &DMatrix<f64>,
    reference: (usize, usize),
    d: usize,
    window: usize,
    k_max: usize,
) -> Result<PatchGroup> {
    let (rows, cols) = image.shape();
    if d == 0 || d > rows || d > cols {
        return Err(Error::InvalidParameter(format!(
            "patch side {d} does not fit a {rows}x{cols} image"
        )));
    }
    if reference.0 + d > rows || reference.1 + d > cols {
        return Err(Error::InvalidParameter(format!(
            "reference patch at {reference:?} leaves the image"
        )));
    }
    let plane = Plane::from_matrix(image);
    let members = match_corners(&plane, reference, d, window, k_max.max(1));
    let patches = members
        .iter()
        .map(|&m| {
            let mut p = vec![0.0; d * d];
            plane.copy_patch(m, d, &mut p);
            p
        })
        .collect();
    Ok(PatchGroup {
        reference,
        members,
        patch_size: d,
        patches,
    })
}

pub(crate) fn match_corners(
    plane: &Plane,
    reference: (usize, usize),
    d: usize,
    window: usize,
    k_max: usize,
) -> Vec<(usize, usize)> {
    let r_lo = reference.0.saturating_sub(window);
    let r_hi = (reference.0 + window).min(plane.rows - d);
    let c_lo = reference.1.saturating_sub(window);
    let c_hi = (reference.1 + window).min(plane.cols - d);
    let mut scored = Vec::with_capacity((r_hi - r_lo + 1) * (c_hi - c_lo + 1));
    for r in r_lo..=r_hi {
        for c in c_lo..=c_hi {
            if (r, c) != reference {
                scored.push((plane.distance(reference, (r, c), d), (r, c)));
            }
        }
    }
    let keep = (k_max - 1).min(scored.len());
    if keep < scored.len() {
        // stable partial ordering: index breaks distance ties
        scored.select_nth_unstable_by(keep, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(keep);
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    std::iter::once(reference)
        .chain(scored.into_iter().map(|(_, p)| p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_tiles_fill_in_scan_order() {
        let img = DMatrix::from_element(10, 10, 1.5);
        let g = find_similar_patches(&img, (3, 3), 4, 2, 5).unwrap();
        assert_eq!(g.members, vec![(3, 3), (1, 1), (1, 2), (1, 3), (1, 4)]);
        assert!(g.patches.iter().all(|p| p.iter().all(|&v| v == 1.5)));
    }

    #[test]
    fn single_member_group() {
        let img = DMatrix::from_fn(6, 6, |r, c| (r * 6 + c) as f64);
        let g = find_similar_patches(&img, (1, 2), 3, 3, 1).unwrap();
        assert_eq!(g.members, vec![(1, 2)]);
        assert_eq!(g.patches[0][..3], [8.0, 9.0, 10.0]);
    }

    #[test]
    fn planted_duplicate_ranks_second() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut img = DMatrix::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0));
        for i in 0..4 {
            for j in 0..4 {
                img[(4 + i, 3 + j)] = img[(i, j)];
            }
        }
        let g = find_similar_patches(&img, (0, 0), 4, 8, 6).unwrap();
        // exhaustive oracle
        let mut all = Vec::new();
        for r in 0..=4 {
            for c in 0..=4 {
                let mut s = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        s += (img[(i, j)] - img[(r + i, c + j)]).powi(2);
                    }
                }
                all.push((s, (r, c)));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expect: Vec<_> = all.iter().take(6).map(|x| x.1).collect();
        assert_eq!(g.members, expect);
        assert_eq!(g.members[1], (4, 3));
    }

    #[test]
    fn window_limits_candidates() {
        let img = DMatrix::from_element(20, 20, 0.0);
        let g = find_similar_patches(&img, (10, 10), 4, 1, 100).unwrap();
        assert_eq!(g.members.len(), 9);
        assert!(g.members.iter().all(|&(r, c)| (9..=11).contains(&r) && (9..=11).contains(&c)));
    }

    #[test]
    fn patch_larger_than_image() {
        let img = DMatrix::from_element(3, 5, 0.0);
        assert!(find_similar_patches(&img, (0, 0), 4, 2, 4).is_err());
    }

    #[test]
    fn corner_grid_covers_edges() {
        assert_eq!(corner_grid(10, 4, 4), vec![0, 4, 6]);
        assert_eq!(corner_grid(8, 4, 4), vec![0, 4]);
        assert_eq!(corner_grid(4, 4, 4), vec![0]);
    }
}

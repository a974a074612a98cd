//! The robust subspace denoiser.
//!
//! Solves
//!
//! ```text
//! min_{Z,S}  1/2 |EZ + S - Y|_F^2 + phi(Z) + lambda2 * sum_i |s_i|_2
//! ```
//!
//! with `A = [Z; S]` split as `V1 = [E I]A`, `V2 = [I 0]A`, `V3 = [0 I]A`
//! and iterated by ADMM. The `V2` step is the eigen-image prior, applied
//! by a plugged single-band [`Denoiser`]; the `V3` step is the column-wise
//! soft threshold that isolates rare pixels in `S`.

mod chi2;
mod prox;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::cube::{BandMatrix, GridShape};
use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::subspace::SubspaceBasis;

pub use chi2::{chi_square_cdf, chi_square_inverse_cdf, lambda2_from_pvalue, regularized_gamma_p};
pub use prox::{group_soft_threshold, vector_soft_threshold};

#[derive(Debug, Clone, PartialEq)]
pub struct RhydeParams {
    /// Subspace dimension.
    pub p: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// Outlier penalty; `None` derives it from `p_value`.
    pub lambda2: Option<f64>,
    pub p_value: f64,
    pub max_iters: usize,
    /// Stop once the relative change of `A` drops below this.
    pub rel_tol: f64,
    /// Noise std handed to the denoiser for each eigen-image.
    pub eigen_noise_std: Vec<f64>,
}

impl RhydeParams {
    /// Defaults for whitened data: unit penalties, `p_value = 0.01`, 30
    /// iterations, `rel_tol = 1e-3`, unit eigen-image noise.
    pub fn new(p: usize) -> Self {
        RhydeParams {
            p,
            mu1: 1.0,
            mu2: 1.0,
            mu3: 1.0,
            lambda2: None,
            p_value: 1e-2,
            max_iters: 30,
            rel_tol: 1e-3,
            eigen_noise_std: vec![1.0; p],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.p == 0 {
            return bad("subspace dimension must be positive".into());
        }
        for (name, mu) in [("mu1", self.mu1), ("mu2", self.mu2), ("mu3", self.mu3)] {
            if !(mu > 0.0 && mu.is_finite()) {
                return bad(format!("{name} = {mu} must be positive"));
            }
        }
        if let Some(l) = self.lambda2 {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda2 = {l} must be >= 0"));
            }
        }
        if !(self.p_value > 0.0 && self.p_value < 1.0) {
            return bad(format!("p_value = {} outside (0, 1)", self.p_value));
        }
        if !(self.rel_tol >= 0.0) {
            return bad(format!("rel_tol = {} must be >= 0", self.rel_tol));
        }
        if self.eigen_noise_std.len() != self.p {
            return bad(format!(
                "{} eigen-image noise levels for subspace dimension {}",
                self.eigen_noise_std.len(),
                self.p
            ));
        }
        if self.eigen_noise_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("eigen-image noise levels must be >= 0".into());
        }
        Ok(())
    }

    /// The explicit `lambda2`, or `sqrt(chi2inv(1 - p_value, bands))`.
    pub fn effective_lambda2(&self, bands: usize) -> Result<f64> {
        match self.lambda2 {
            Some(l) => Ok(l),
            None => lambda2_from_pvalue(self.p_value, bands),
        }
    }
}

/// ADMM iterate. `a` stacks `[Z; S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub a: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub v3: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub d3: DMatrix<f64>,
    pub iter: usize,
}

impl SolverState {
    /// `A = 0`, `V1 = Y`, `V2 = E'Y`, `V3 = 0`, zero duals.
    pub fn initial(y: &BandMatrix, basis: &SubspaceBasis) -> Self {
        let (nb, n, p) = (y.bands(), y.pixels(), basis.dim());
        SolverState {
            a: DMatrix::zeros(p + nb, n),
            v1: y.matrix().clone(),
            v2: basis.basis().transpose() * y.matrix(),
            v3: DMatrix::zeros(nb, n),
            d1: DMatrix::zeros(nb, n),
            d2: DMatrix::zeros(p, n),
            d3: DMatrix::zeros(nb, n),
            iter: 0,
        }
    }

    pub fn z(&self, p: usize) -> DMatrix<f64> {
        self.a.rows(0, p).into_owned()
    }

    pub fn s(&self, p: usize) -> DMatrix<f64> {
        self.a.rows(p, self.a.nrows() - p).into_owned()
    }

    /// Constraint violations `|V_i - L_i A|_F` for the three splits.
    pub fn residuals(&self, basis: &SubspaceBasis) -> [f64; 3] {
        let p = basis.dim();
        let (z, s) = (self.z(p), self.s(p));
        [
            (&self.v1 - (basis.basis() * &z + &s)).norm(),
            (&self.v2 - z).norm(),
            (&self.v3 - s).norm(),
        ]
    }

    fn check_shapes(&self, bands: usize, pixels: usize, p: usize) -> Result<()> {
        let ok = self.a.shape() == (p + bands, pixels)
            && self.v1.shape() == (bands, pixels)
            && self.d1.shape() == (bands, pixels)
            && self.v2.shape() == (p, pixels)
            && self.d2.shape() == (p, pixels)
            && self.v3.shape() == (bands, pixels)
            && self.d3.shape() == (bands, pixels);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "solver state does not fit {bands} bands, {pixels} pixels, p = {p}"
            )))
        }
    }

    fn is_finite(&self) -> bool {
        [&self.a, &self.v1, &self.v2, &self.v3, &self.d1, &self.d2, &self.d3]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone)]
pub struct RhydeResult {
    /// `E Z + S`.
    pub x_hat: BandMatrix,
    /// `Z` is read from `A`; `S` from the thresholded split `V3`, so
    /// columns below the penalty are exactly zero.
    pub z_hat: BandMatrix,
    pub s_hat: BandMatrix,
    /// Relative change of `A` after each iteration.
    pub trace: Vec<f64>,
    pub iters_run: usize,
    pub lambda2: f64,
}

/// The `A`-step normal equations, factorized once per solve:
///
/// ```text
/// [ (mu1+mu2) I_p   mu1 E'           ] A = mu1 [E I]'(V1 - D1)
/// [ mu1 E           (mu1+mu3) I_nb   ]     + mu2 [I 0]'(V2 - D2) + mu3 [0 I]'(V3 - D3)
/// ```
#[derive(Debug, Clone)]
pub struct ASystem {
    basis: DMatrix<f64>,
    mu: [f64; 3],
    factor: Cholesky<f64, Dyn>,
}

impl ASystem {
    pub fn new(basis: &SubspaceBasis, mu1: f64, mu2: f64, mu3: f64) -> Result<Self> {
        let e = basis.basis();
        let (nb, p) = e.shape();
        let mut m = DMatrix::zeros(p + nb, p + nb);
        m.view_mut((0, 0), (p, p)).fill_with_identity();
        m.view_mut((0, 0), (p, p)).scale_mut(mu1 + mu2);
        m.view_mut((p, p), (nb, nb)).fill_with_identity();
        m.view_mut((p, p), (nb, nb)).scale_mut(mu1 + mu3);
        m.view_mut((0, p), (p, nb)).copy_from(&(e.transpose() * mu1));
        m.view_mut((p, 0), (nb, p)).copy_from(&(e * mu1));
        let factor = Cholesky::new(m).ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
        })?;
        Ok(ASystem {
            basis: e.clone(),
            mu: [mu1, mu2, mu3],
            factor,
        })
    }

    pub fn rhs(&self, state: &SolverState) -> DMatrix<f64> {
        let (nb, p) = self.basis.shape();
        let [mu1, mu2, mu3] = self.mu;
        let w1 = (&state.v1 - &state.d1) * mu1;
        let mut rhs = DMatrix::zeros(p + nb, w1.ncols());
        rhs.rows_mut(0, p)
            .copy_from(&(self.basis.transpose() * &w1 + (&state.v2 - &state.d2) * mu2));
        rhs.rows_mut(p, nb)
            .copy_from(&(w1 + (&state.v3 - &state.d3) * mu3));
        rhs
    }

    pub fn solve(&self, state: &SolverState) -> DMatrix<f64> {
        self.factor.solve(&self.rhs(state))
    }
}

/// Minimizer of the `A`-step quadratic for the current state.
pub fn update_a(state: &SolverState, params: &RhydeParams, basis: &SubspaceBasis) -> Result<DMatrix<f64>> {
    if basis.dim() != params.p {
        return Err(Error::DimensionMismatch(format!(
            "basis dimension {} differs from p = {}",
            basis.dim(),
            params.p
        )));
    }
    state.check_shapes(basis.bands(), state.a.ncols(), params.p)?;
    Ok(ASystem::new(basis, params.mu1, params.mu2, params.mu3)?.solve(state))
}

/// `[E I] A`.
fn data_map(a: &DMatrix<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let p = basis.ncols();
    basis * a.rows(0, p) + a.rows(p, a.nrows() - p)
}

/// `V1 = (Y + mu1 ([E I]A + D1)) / (1 + mu1)`.
pub fn update_v1(
    y: &DMatrix<f64>,
    a: &DMatrix<f64>,
    d1: &DMatrix<f64>,
    mu1: f64,
    basis: &SubspaceBasis,
) -> DMatrix<f64> {
    (y + (data_map(a, basis.basis()) + d1) * mu1) / (1.0 + mu1)
}

/// Denoises each row of `[I 0]A + D2` as an image.
pub fn update_v2(
    a: &DMatrix<f64>,
    d2: &DMatrix<f64>,
    params: &RhydeParams,
    shape: GridShape,
    denoiser: &dyn Denoiser,
) -> Result<DMatrix<f64>> {
    let p = params.p;
    let noisy = a.rows(0, p) + d2;
    if noisy.ncols() != shape.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "{} pixels do not fill a {}x{} grid",
            noisy.ncols(),
            shape.rows,
            shape.cols
        )));
    }
    let mut out = DMatrix::zeros(p, noisy.ncols());
    for row in 0..p {
        let r = noisy.row(row);
        let image = DMatrix::from_fn(shape.rows, shape.cols, |i, j| r[shape.index(i, j)]);
        let clean = denoiser
            .denoise(&image, params.eigen_noise_std[row])
            .map_err(|e| Error::Denoiser {
                row,
                message: e.to_string(),
            })?;
        if clean.shape() != image.shape() {
            return Err(Error::Denoiser {
                row,
                message: format!("returned shape {:?}, expected {:?}", clean.shape(), image.shape()),
            });
        }
        for i in 0..shape.rows {
            for j in 0..shape.cols {
                out[(row, shape.index(i, j))] = clean[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Column-wise soft threshold of `[0 I]A + D3` at `lambda2 / mu3`.
pub fn update_v3(a: &DMatrix<f64>, d3: &DMatrix<f64>, p: usize, lambda2: f64, mu3: f64) -> DMatrix<f64> {
    let mut v = a.rows(p, a.nrows() - p) + d3;
    group_soft_threshold(&mut v, lambda2 / mu3);
    v
}

/// `|next - prev|_F / |prev|_F`, or `+inf` when `prev` is zero.
pub fn relative_change(prev: &DMatrix<f64>, next: &DMatrix<f64>) -> f64 {
    let denom = prev.norm();
    if denom == 0.0 {
        log::warn!("relative change from a zero matrix is undefined; reporting +inf");
        return f64::INFINITY;
    }
    (next - prev).norm() / denom
}

/// One configured solve.
pub struct Rhyde<'a> {
    y: &'a BandMatrix,
    shape: GridShape,
    basis: &'a SubspaceBasis,
    params: &'a RhydeParams,
    denoiser: &'a dyn Denoiser,
    system: ASystem,
    lambda2: f64,
}

impl<'a> Rhyde<'a> {
    pub fn new(
        y: &'a BandMatrix,
        shape: GridShape,
        basis: &'a SubspaceBasis,
        params: &'a RhydeParams,
        denoiser: &'a dyn Denoiser,
    ) -> Result<Self> {
        params.validate()?;
        if basis.dim() != params.p {
            return Err(Error::DimensionMismatch(format!(
                "basis dimension {} differs from p = {}",
                basis.dim(),
                params.p
            )));
        }
        if basis.bands() != y.bands() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} bands, basis has {}",
                y.bands(),
                basis.bands()
            )));
        }
        if shape.pixels() != y.pixels() {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels do not fill a {}x{} grid",
                y.pixels(),
                shape.rows,
                shape.cols
            )));
        }
        let lambda2 = params.effective_lambda2(y.bands())?;
        let system = ASystem::new(basis, params.mu1, params.mu2, params.mu3)?;
        Ok(Rhyde {
            y,
            shape,
            basis,
            params,
            denoiser,
            system,
            lambda2,
        })
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn initial_state(&self) -> SolverState {
        SolverState::initial(self.y, self.basis)
    }

    /// One ADMM sweep; returns the relative change of `A`.
    pub fn step(&self, state: &mut SolverState) -> Result<f64> {
        let p = self.params.p;
        let e = self.basis.basis();
        let a = self.system.solve(state);
        let v1 = update_v1(self.y.matrix(), &a, &state.d1, self.params.mu1, self.basis);
        let v2 = update_v2(&a, &state.d2, self.params, self.shape, self.denoiser)?;
        let v3 = update_v3(&a, &state.d3, p, self.lambda2, self.params.mu3);

        state.d1 -= &v1 - data_map(&a, e);
        state.d2 -= &v2 - a.rows(0, p);
        state.d3 -= &v3 - a.rows(p, a.nrows() - p);
        let change = relative_change(&state.a, &a);
        state.a = a;
        state.v1 = v1;
        state.v2 = v2;
        state.v3 = v3;
        state.iter += 1;
        if !state.is_finite() {
            return Err(Error::Diverged {
                iteration: state.iter,
            });
        }
        Ok(change)
    }

    /// Iterates from `state` until the relative change of `A` falls below
    /// `rel_tol` or `max_iters` sweeps have run.
    pub fn run_from(&self, mut state: SolverState) -> Result<(RhydeResult, SolverState)> {
        state.check_shapes(self.y.bands(), self.y.pixels(), self.params.p)?;
        let mut trace = Vec::new();
        for _ in 0..self.params.max_iters {
            let change = self.step(&mut state)?;
            log::debug!("iteration {}: relative change {change:e}", state.iter);
            trace.push(change);
            if change < self.params.rel_tol {
                break;
            }
        }
        let p = self.params.p;
        let z = state.z(p);
        let s = state.v3.clone();
        let x = self.basis.basis() * &z + &s;
        let result = RhydeResult {
            x_hat: BandMatrix::from_finite(x),
            z_hat: BandMatrix::from_finite(z),
            s_hat: BandMatrix::from_finite(s),
            iters_run: trace.len(),
            trace,
            lambda2: self.lambda2,
        };
        Ok((result, state))
    }

    pub fn run(&self) -> Result<RhydeResult> {
        Ok(self.run_from(self.initial_state())?.0)
    }
}

/// Denoises whitened data `y` laid out on `shape`.
pub fn rhyde_denoise(
    y_whitened: &BandMatrix,
    shape: GridShape,
    basis: &SubspaceBasis,
    params: &RhydeParams,
    denoiser: &dyn Denoiser,
) -> Result<RhydeResult> {
    Rhyde::new(y_whitened, shape, basis, params, denoiser)?.run()
}

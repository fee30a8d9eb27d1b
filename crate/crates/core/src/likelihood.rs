//! Gaussian quasi-log-likelihood of the log-squared model.
//!
//! For `ÿ_t = vec(ln Y_t^2)` the residuals are
//! `r_t = S ÿ_t - vec(Ã) - (Π' ⊗ I) ÿ_{t-1}` and
//!
//! ```text
//! ln L = -(T n p / 2) ln(2π σ²_u) + T ln|S| - (1 / (2 σ²_u)) Σ_t r_t' r_t
//! ```
//!
//! Everything is evaluated in matrix form (`R_t = L_t - W L_t Ψ - Ã - L_{t-1} Π`)
//! so no `np x np` matrix is ever built; `ln|S|` comes from the cached
//! spectrum of `W`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{log_sq_transform, unpack_params, AMode, ATilde, Dimensions, Panel, ParamSet};
use crate::scalar::Real;
use crate::spectral::{dense_s, log_det_s_dense, WeightSpectrum};
use crate::weights::SpatialWeights;

#[derive(Debug, Clone)]
enum LogDet<T: Real> {
    Spectral(WeightSpectrum<T>),
    /// Eigen decomposition of `W` failed; fall back to dense LU of `S`.
    Dense,
}

/// Precomputed data for repeated likelihood evaluations on one panel.
#[derive(Debug, Clone)]
pub struct LikelihoodWorkspace<T: Real> {
    dims: Dimensions,
    weights: SpatialWeights<T>,
    /// `ln Y_t^2` for `t = 0..=T`, each `n x p`.
    log_sq: Vec<DMatrix<T>>,
    /// `W ln Y_t^2` for `t = 0..=T`.
    lagged: Vec<DMatrix<T>>,
    log_det: LogDet<T>,
}

impl<T: Real> LikelihoodWorkspace<T> {
    /// Transforms the panel and caches the spectrum of `W`.
    pub fn new(panel: &Panel<T>, w: &SpatialWeights<T>) -> Result<Self> {
        let transformed = log_sq_transform(panel)?;
        Self::from_log_sq(panel.dims, &transformed, w)
    }

    /// Builds a workspace from already transformed values in panel layout.
    pub fn from_log_sq(dims: Dimensions, log_sq: &[T], w: &SpatialWeights<T>) -> Result<Self> {
        if w.n() != dims.n {
            return Err(Error::Shape(format!("weights are {0}x{0}, panel has n = {1}", w.n(), dims.n)));
        }
        if log_sq.len() != dims.len() {
            return Err(Error::Shape("transformed panel has the wrong length".into()));
        }
        if log_sq.iter().any(|v| !v.finite()) {
            return Err(Error::Data("ln Y^2 is not finite everywhere".into()));
        }
        let np = dims.np();
        let slices: Vec<DMatrix<T>> = (0..dims.slices())
            .map(|t| DMatrix::from_column_slice(dims.n, dims.p, &log_sq[t * np..(t + 1) * np]))
            .collect();
        let lagged = slices.iter().map(|m| w.lag(m)).collect();
        let log_det = match WeightSpectrum::new(w) {
            Some(s) => LogDet::Spectral(s),
            None => LogDet::Dense,
        };
        Ok(Self { dims, weights: w.clone(), log_sq: slices, lagged, log_det })
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn weights(&self) -> &SpatialWeights<T> {
        &self.weights
    }

    /// Cached spectrum of `W`, if the eigen solver converged.
    pub fn spectrum(&self) -> Option<&WeightSpectrum<T>> {
        match &self.log_det {
            LogDet::Spectral(s) => Some(s),
            LogDet::Dense => None,
        }
    }

    /// `ln Y_t^2` as an `n x p` matrix.
    pub fn log_sq(&self, t: usize) -> &DMatrix<T> {
        &self.log_sq[t]
    }

    pub fn unpack(&self, theta: &[T], mode: AMode, sigma2_u: T) -> Result<ParamSet<T>> {
        if self.dims.t_len == 1 && mode == AMode::FreePerLocation {
            return Err(Error::InvalidParameter("T = 1 requires a constant intercept".into()));
        }
        unpack_params(theta, self.dims.n, self.dims.p, mode, sigma2_u)
    }

    /// `ln |det S|` for the given `Ψ`.
    pub fn log_det_s(&self, psi: &DMatrix<T>) -> Result<T> {
        match &self.log_det {
            LogDet::Spectral(s) => s.log_det_s(psi),
            LogDet::Dense => log_det_s_dense(psi, &self.weights),
        }
    }

    fn log_det_s_gradient(&self, psi: &DMatrix<T>) -> Result<DMatrix<T>> {
        match &self.log_det {
            LogDet::Spectral(s) => s.log_det_s_gradient(psi),
            LogDet::Dense => {
                // -tr(S^{-1}[k, l] W) from the (k, l) block of the dense inverse
                let (n, p) = (self.dims.n, self.dims.p);
                let inv = dense_s(psi, &self.weights).try_inverse().ok_or(Error::SingularJacobian(0.0))?;
                let w = self.weights.to_dense();
                Ok(DMatrix::from_fn(p, p, |k, l| {
                    -(inv.view((k * n, l * n), (n, n)) * &w).trace()
                }))
            }
        }
    }

    fn residual_matrices(&self, params: &ParamSet<T>) -> Vec<DMatrix<T>> {
        let a = params.a_tilde.to_matrix(self.dims.n);
        (1..=self.dims.t_len)
            .map(|t| &self.log_sq[t] - &self.lagged[t] * &params.psi - &a - &self.log_sq[t - 1] * &params.pi)
            .collect()
    }

    fn value_parts(&self, params: &ParamSet<T>, sigma2_u: T) -> Result<(T, Vec<DMatrix<T>>)> {
        let d = self.dims;
        let log_det = self.log_det_s(&params.psi)?;
        let resid = self.residual_matrices(params);
        let q: T = resid.iter().map(|r| r.norm_squared()).fold(T::zero(), |a, b| a + b);
        let tnp = T::of_usize(d.t_len * d.np());
        let two_pi = T::two_pi();
        let value = -tnp / T::of(2.0) * (two_pi * sigma2_u).ln() + T::of_usize(d.t_len) * log_det
            - q / (T::of(2.0) * sigma2_u);
        Ok((value, resid))
    }
}

/// `ln |det(I - Ψ' ⊗ W)|` from the eigenvalues of `W`.
pub use crate::spectral::log_det_s;

/// Residual vectors `r_1..r_T`, each of length `n p`.
pub fn residuals<T: Real>(theta: &[T], ws: &LikelihoodWorkspace<T>, mode: AMode) -> Result<Vec<DVector<T>>> {
    let params = ws.unpack(theta, mode, T::one())?;
    Ok(ws
        .residual_matrices(&params)
        .into_iter()
        .map(|r| DVector::from_column_slice(r.as_slice()))
        .collect())
}

/// Gaussian quasi-log-likelihood at `theta`.
pub fn log_likelihood<T: Real>(theta: &[T], ws: &LikelihoodWorkspace<T>, sigma2_u: T, mode: AMode) -> Result<T> {
    let params = ws.unpack(theta, mode, sigma2_u)?;
    Ok(ws.value_parts(&params, sigma2_u)?.0)
}

/// `ln L / (T n p)`, the per-observation objective.
pub fn per_observation_log_likelihood<T: Real>(
    theta: &[T],
    ws: &LikelihoodWorkspace<T>,
    sigma2_u: T,
    mode: AMode,
) -> Result<T> {
    let d = ws.dims();
    Ok(log_likelihood(theta, ws, sigma2_u, mode)? / T::of_usize(d.t_len * d.np()))
}

/// Analytic gradient in packed layout.
pub fn log_likelihood_gradient<T: Real>(
    theta: &[T],
    ws: &LikelihoodWorkspace<T>,
    sigma2_u: T,
    mode: AMode,
) -> Result<DVector<T>> {
    Ok(value_and_gradient(theta, ws, sigma2_u, mode)?.1)
}

/// Value and analytic gradient in one pass.
pub fn value_and_gradient<T: Real>(
    theta: &[T],
    ws: &LikelihoodWorkspace<T>,
    sigma2_u: T,
    mode: AMode,
) -> Result<(T, DVector<T>)> {
    let d = ws.dims();
    let params = ws.unpack(theta, mode, sigma2_u)?;
    let (value, resid) = ws.value_parts(&params, sigma2_u)?;
    let inv_s2 = T::one() / sigma2_u;

    let mut sum_r = DMatrix::<T>::zeros(d.n, d.p);
    let mut g_psi = DMatrix::<T>::zeros(d.p, d.p);
    let mut g_pi = DMatrix::<T>::zeros(d.p, d.p);
    for (k, r) in resid.iter().enumerate() {
        let t = k + 1;
        sum_r += r;
        g_psi += ws.lagged[t].tr_mul(r);
        g_pi += ws.log_sq[t - 1].tr_mul(r);
    }
    g_psi = g_psi * inv_s2 + ws.log_det_s_gradient(&params.psi)? * T::of_usize(d.t_len);
    g_pi *= inv_s2;
    sum_r *= inv_s2;

    let a_grad: Vec<T> = match params.a_tilde {
        ATilde::Constant(_) => sum_r.row_sum().iter().copied().collect(),
        ATilde::Free(_) => sum_r.as_slice().to_vec(),
    };
    let grad: Vec<T> = a_grad
        .into_iter()
        .chain(g_psi.as_slice().iter().copied())
        .chain(g_pi.as_slice().iter().copied())
        .collect();
    Ok((value, DVector::from_vec(grad)))
}

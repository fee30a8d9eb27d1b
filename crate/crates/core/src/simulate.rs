//! Sample paths of the vec-spARCH process.
//!
//! Each period solves the instantaneous spatial system
//! `S vec(ln Y_t^2) = vec(Ã) + (Π' ⊗ I) vec(ln Y_{t-1}^2) + vec(U_t)` exactly,
//! then recovers `ln H_t = ln Y_t^2 - ln Ξ_t^2` and `Y_t = exp(ln H_t / 2) ∘ Ξ_t`.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::gmres;
use crate::model::{ModelConfig, Panel, ParamSet};
use crate::scalar::Real;
use crate::spectral::dense_s;
use crate::stability::{apply_s, apply_temporal, check_stability, stationary_log_mean};
use crate::weights::SpatialWeights;

/// Systems with `n * p` up to this size are factorised densely once per path.
pub const DENSE_SOLVE_LIMIT: usize = 1024;

const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    /// i.i.d. draws from the configured error distribution.
    Random,
    /// `|ε| = exp(E ln ε² / 2)` with random signs, so `U_t ≡ 0`.
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub burn_in: usize,
    pub store_innovations: bool,
    pub noise: Noise,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { burn_in: 50, store_innovations: false, noise: Noise::Random }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput<T: Real> {
    /// Simulated `Y`, slice 0 being the conditioning observation.
    pub panel: Panel<T>,
    /// `ln H_t` with the same layout as the panel (all `T + 1` slices).
    pub log_h: Vec<T>,
    /// `Ξ_t` draws, same layout, when requested.
    pub innovations: Option<Vec<T>>,
}

enum Solver<T: Real> {
    Dense(LU<T, Dyn, Dyn>),
    Iterative,
}

/// Factored (or matrix-free) `S = I - Ψ' ⊗ W`.
struct SpatialSystem<'a, T: Real> {
    w: &'a SpatialWeights<T>,
    psi: &'a DMatrix<T>,
    solver: Solver<T>,
}

impl<'a, T: Real> SpatialSystem<'a, T> {
    fn new(w: &'a SpatialWeights<T>, psi: &'a DMatrix<T>) -> Self {
        let solver = if w.n() * psi.nrows() <= DENSE_SOLVE_LIMIT {
            Solver::Dense(dense_s(psi, w).lu())
        } else {
            Solver::Iterative
        };
        Self { w, psi, solver }
    }

    fn solve(&self, rhs: &DVector<T>, guess: Option<&DVector<T>>) -> Result<DVector<T>> {
        let x = match &self.solver {
            Solver::Dense(lu) => lu.solve(rhs).ok_or_else(|| Error::LinearSolve("S is singular".into()))?,
            Solver::Iterative => {
                let np = rhs.len();
                gmres(|v| apply_s(self.w, self.psi, v), rhs, guess, 40, 1e-13, 50 * np.max(50))?.0
            }
        };
        let resid = (apply_s(self.w, self.psi, &x) - rhs).norm();
        if resid > T::of(RESIDUAL_TOL) * rhs.norm() {
            return Err(Error::LinearSolve(format!(
                "residual {:e} exceeds tolerance relative to |rhs| = {:e}",
                resid.to_f64_lossy(),
                rhs.norm().to_f64_lossy()
            )));
        }
        Ok(x)
    }
}

/// Simulates `T + 1` retained periods after `burn_in` discarded ones,
/// starting from the stationary mean. Deterministic in `config.seed`.
pub fn simulate<T: Real>(config: &ModelConfig<T>, params: &ParamSet<T>, opts: SimOptions) -> Result<SimOutput<T>> {
    let dims = config.dims;
    let (n, p) = (dims.n, dims.p);
    let w = config.weights.as_ref();
    if params.p() != p {
        return Err(Error::Shape(format!("parameters have p = {}, config has p = {p}", params.p())));
    }
    if params.a_mode() != config.a_mode {
        return Err(Error::Shape("intercept mode differs from the model configuration".into()));
    }
    let report = check_stability(params, w)?;
    if !report.stable {
        return Err(Error::Unstable { radius: report.spectral_radius, s_invertible: report.s_invertible });
    }

    let system = SpatialSystem::new(w, &params.psi);
    let a = DVector::from_column_slice(params.a_tilde.to_matrix(n).as_slice());
    let mean_log_sq = T::of(config.error_dist.mean_log_sq);
    let zero_scale = T::of((config.error_dist.mean_log_sq / 2.0).exp());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let np = dims.np();
    let mut values = Vec::with_capacity(dims.len());
    let mut log_h = Vec::with_capacity(dims.len());
    let mut innovations = opts.store_innovations.then(|| Vec::with_capacity(dims.len()));

    let mut state = stationary_log_mean(params, w)?;
    let mut xi = vec![T::zero(); np];
    let mut log_xi_sq = DVector::<T>::zeros(np);
    for step in 0..opts.burn_in + dims.slices() {
        // column by column: variable j's n-vector of innovations
        for k in 0..np {
            let e = match opts.noise {
                Noise::Random => T::of(config.error_dist.draw(&mut rng)),
                Noise::Zero => {
                    if rng.random::<bool>() { zero_scale } else { -zero_scale }
                }
            };
            xi[k] = e;
            log_xi_sq[k] = match opts.noise {
                Noise::Random => (e * e).ln(),
                Noise::Zero => mean_log_sq,
            };
        }
        let u = log_xi_sq.add_scalar(-mean_log_sq);
        let rhs = &a + apply_temporal(n, &params.pi, &state) + u;
        let next = system.solve(&rhs, Some(&state))?;
        if step >= opts.burn_in {
            for k in 0..np {
                let lh = next[k] - log_xi_sq[k];
                log_h.push(lh);
                values.push((lh / T::of(2.0)).exp() * xi[k]);
            }
            if let Some(buf) = innovations.as_mut() {
                buf.extend_from_slice(&xi);
            }
        }
        state = next;
    }
    let panel = Panel::with_default_labels(dims, values)?;
    Ok(SimOutput { panel, log_h, innovations })
}

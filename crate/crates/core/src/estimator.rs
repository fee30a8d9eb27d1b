//! Quasi-maximum-likelihood estimation with stability-constrained BFGS,
//! observed-information standard errors and assumption diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, PanelIndex, Result};
use crate::likelihood::{log_likelihood, log_likelihood_gradient, residuals, value_and_gradient, LikelihoodWorkspace};
use crate::model::{packed_len, AMode, ATilde, ErrorDist, Panel, ParamSet};
use crate::optim::{minimize, BfgsOptions};
use crate::scalar::Real;
use crate::stability::{check_stability, StabilityReport};
use crate::weights::{validate_weights, SpatialWeights, ValidationReport};

/// Trial points with `min |1 - λ μ|` below this are infeasible.
pub const JACOBIAN_TOL: f64 = 1e-10;

/// Relative deviation of the residual variance from `σ²_u` tolerated by
/// [`validate_assumptions`].
pub const MOMENT_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Bound on the sup-norm of the gradient of `ln L / (T n p)`.
    pub gradient_tolerance: f64,
    pub initial_theta: Option<Vec<f64>>,
    /// Largest spectral radius admitted during the search.
    pub stability_margin: f64,
    /// Extra randomly perturbed starts drawn from `seed`.
    pub multistart_count: usize,
    pub seed: u64,
    /// Weight of the logarithmic stability barrier.
    pub barrier_weight: f64,
    /// Known `σ²_u`; `None` takes the error distribution's `Var ln eps^2`.
    pub sigma2_u: Option<f64>,
    pub compute_std_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            initial_theta: None,
            stability_margin: 0.999,
            multistart_count: 0,
            seed: 0,
            barrier_weight: 1e-6,
            sigma2_u: None,
            compute_std_errors: true,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidParameter("gradient_tolerance must be positive".into()));
        }
        if !(self.stability_margin > 0.0 && self.stability_margin < 1.0) {
            return Err(Error::InvalidParameter("stability_margin must lie in (0, 1)".into()));
        }
        if !(self.barrier_weight >= 0.0) {
            return Err(Error::InvalidParameter("barrier_weight must be nonnegative".into()));
        }
        if let Some(s) = self.sigma2_u {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter("sigma2_u must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    /// Estimates on the transformed scale (`Ã`, `Ψ`, `Π`, `σ²_u`).
    pub params: ParamSet<T>,
    /// Back-transformed intercept `A = Ã - E ln eps^2`.
    pub a: ATilde<T>,
    pub theta: DVector<T>,
    pub a_mode: AMode,
    pub error_dist: ErrorDist,
    /// Per packed coordinate; `None` where the information matrix gives none.
    pub std_errors: Vec<Option<T>>,
    pub t_values: Vec<Option<T>>,
    pub hessian_negative_definite: bool,
    pub log_lik: T,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the per-observation gradient at the solution.
    pub gradient_norm: f64,
    pub spectral_radius_at_solution: f64,
}

/// Observed-information standard errors.
#[derive(Debug, Clone)]
pub struct StdErrors<T: Real> {
    pub values: Vec<Option<T>>,
    pub negative_definite: bool,
}

struct Problem<'a, T: Real> {
    ws: &'a LikelihoodWorkspace<T>,
    mode: AMode,
    sigma2_u: T,
    scale: T,
    margin: f64,
    barrier_weight: f64,
}

impl<T: Real> Problem<'_, T> {
    fn radius(&self, params: &ParamSet<T>) -> Option<f64> {
        match self.ws.spectrum() {
            Some(spectrum) => {
                if spectrum.min_factor(&params.psi).to_f64_lossy() < JACOBIAN_TOL {
                    return None;
                }
                spectrum.transition_radius(&params.psi, &params.pi).ok().map(|r| r.to_f64_lossy())
            }
            None => {
                let rep = check_stability(params, self.ws.weights()).ok()?;
                rep.s_invertible.then_some(rep.spectral_radius)
            }
        }
    }

    /// `μ ln²((m - ρ) / (m / 2))` for `ρ > m / 2`, zero below.
    fn barrier(&self, rho: f64) -> (f64, f64) {
        let half = self.margin / 2.0;
        if rho <= half || self.barrier_weight == 0.0 {
            return (0.0, 0.0);
        }
        let l = ((self.margin - rho) / half).ln();
        (self.barrier_weight * l * l, -2.0 * self.barrier_weight * l / (self.margin - rho))
    }

    /// `-ln L / (T n p)` plus the stability barrier, or `None` if infeasible.
    fn objective(&self, theta: &DVector<T>) -> Option<(T, DVector<T>)> {
        let params = self.ws.unpack(theta.as_slice(), self.mode, self.sigma2_u).ok()?;
        let rho = self.radius(&params)?;
        if !(rho < self.margin) {
            return None;
        }
        let (ll, grad) = value_and_gradient(theta.as_slice(), self.ws, self.sigma2_u, self.mode).ok()?;
        let mut value = -ll / self.scale;
        let mut g = -grad / self.scale;
        let (b, db) = self.barrier(rho);
        if b > 0.0 {
            value += T::of(b);
            let start = theta.len() - 2 * params.p() * params.p();
            let h = 1e-7;
            for k in start..theta.len() {
                let mut up = theta.clone();
                up[k] += T::of(h);
                let mut dn = theta.clone();
                dn[k] -= T::of(h);
                let r_up = self.radius(&self.ws.unpack(up.as_slice(), self.mode, self.sigma2_u).ok()?)?;
                let r_dn = self.radius(&self.ws.unpack(dn.as_slice(), self.mode, self.sigma2_u).ok()?)?;
                g[k] += T::of(db * (r_up - r_dn) / (2.0 * h));
            }
        }
        Some((value, g))
    }
}

/// Ψ = Π = 0 start with `Ã` at the sample means of `ln Y^2` over `t = 1..T`.
pub fn default_start<T: Real>(ws: &LikelihoodWorkspace<T>, mode: AMode) -> Result<DVector<T>> {
    let d = ws.dims();
    for j in 0..d.p {
        let first = ws.log_sq(0)[(0, j)];
        let constant = (0..d.slices()).all(|t| ws.log_sq(t).column(j).iter().all(|v| *v == first));
        if constant {
            return Err(Error::DegenerateData(format!("ln Y^2 of variable {j} is constant")));
        }
    }
    let mut sum = DMatrix::<T>::zeros(d.n, d.p);
    for t in 1..=d.t_len {
        sum += ws.log_sq(t);
    }
    let mean = sum / T::of_usize(d.t_len);
    let a: Vec<T> = match mode {
        AMode::ConstantAcrossSpace => (0..d.p).map(|j| mean.column(j).mean()).collect(),
        AMode::FreePerLocation => mean.as_slice().to_vec(),
    };
    let mut theta = a;
    theta.resize(packed_len(d.n, d.p, mode), T::zero());
    Ok(DVector::from_vec(theta))
}

/// Fits the model to a panel.
pub fn fit<T: Real>(
    panel: &Panel<T>,
    w: &SpatialWeights<T>,
    error_dist: &ErrorDist,
    a_mode: AMode,
    options: &FitOptions,
) -> Result<FitResult<T>> {
    let ws = LikelihoodWorkspace::new(panel, w)?;
    fit_workspace(&ws, error_dist, a_mode, options)
}

/// Fits the model using a prepared likelihood workspace.
pub fn fit_workspace<T: Real>(
    ws: &LikelihoodWorkspace<T>,
    error_dist: &ErrorDist,
    a_mode: AMode,
    options: &FitOptions,
) -> Result<FitResult<T>> {
    options.validate()?;
    let d = ws.dims();
    if d.t_len == 1 && a_mode == AMode::FreePerLocation {
        return Err(Error::InvalidParameter("T = 1 requires a constant intercept".into()));
    }
    let sigma2_u = T::of(options.sigma2_u.unwrap_or(error_dist.var_log_sq));
    let problem = Problem {
        ws,
        mode: a_mode,
        sigma2_u,
        scale: T::of_usize(d.t_len * d.np()),
        margin: options.stability_margin,
        barrier_weight: options.barrier_weight,
    };
    let dim = packed_len(d.n, d.p, a_mode);
    let start = match &options.initial_theta {
        Some(v) if v.len() != dim => {
            return Err(Error::Shape(format!("initial_theta has length {}, expected {dim}", v.len())))
        }
        Some(v) => DVector::from_iterator(dim, v.iter().map(|x| T::of(*x))),
        None => default_start(ws, a_mode)?,
    };
    let mut starts = vec![start.clone()];
    if options.multistart_count > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let jitter = Normal::new(0.0, 0.1).expect("valid sd");
        let off = dim - 2 * d.p * d.p;
        for _ in 0..options.multistart_count {
            let mut s = start.clone();
            for k in off..dim {
                s[k] += T::of(jitter.sample(&mut rng));
            }
            starts.push(s);
        }
    }
    let bfgs = BfgsOptions { max_iterations: options.max_iterations, gradient_tolerance: options.gradient_tolerance };
    let mut best = None;
    for s in starts {
        let Some(out) = minimize(|x| problem.objective(x), s, bfgs) else { continue };
        let better = match &best {
            None => true,
            Some(b) => {
                let b: &crate::optim::BfgsOutcome<T> = b;
                (out.converged, -out.value) > (b.converged, -b.value)
            }
        };
        if better {
            best = Some(out);
        }
    }
    let out = best.ok_or_else(|| Error::InvalidParameter("no feasible starting point".into()))?;

    let params = ws.unpack(out.x.as_slice(), a_mode, sigma2_u)?;
    let log_lik = log_likelihood(out.x.as_slice(), ws, sigma2_u, a_mode)?;
    let radius = problem.radius(&params).unwrap_or(f64::INFINITY);
    let se = if options.compute_std_errors {
        standard_errors(out.x.as_slice(), ws, sigma2_u, a_mode)?
    } else {
        StdErrors { values: vec![None; dim], negative_definite: false }
    };
    let t_values = out.x.iter().zip(&se.values).map(|(x, s)| s.map(|s| *x / s)).collect();
    let gradient_norm = out.gradient.amax().to_f64_lossy();
    Ok(FitResult {
        a: params.a(error_dist.mean_log_sq),
        params,
        theta: out.x,
        a_mode,
        error_dist: *error_dist,
        std_errors: se.values,
        t_values,
        hessian_negative_definite: se.negative_definite,
        log_lik,
        converged: out.converged && radius < 1.0,
        iterations: out.iterations,
        gradient_norm,
        spectral_radius_at_solution: radius,
    })
}

/// Standard errors from the inverse negative Hessian of `ln L` at `theta_hat`.
pub fn standard_errors<T: Real>(
    theta_hat: &[T],
    ws: &LikelihoodWorkspace<T>,
    sigma2_u: T,
    a_mode: AMode,
) -> Result<StdErrors<T>> {
    let hessian = match numerical_hessian(|x| log_likelihood_gradient(x, ws, sigma2_u, a_mode), theta_hat) {
        Ok(h) => h,
        Err(Error::SingularJacobian(_)) => {
            return Ok(StdErrors { values: vec![None; theta_hat.len()], negative_definite: false })
        }
        Err(e) => return Err(e),
    };
    Ok(std_errors_from_hessian(&hessian))
}

/// Central differences of an analytic gradient, step `1e-5 max(1, |θ_i|)`,
/// symmetrised.
pub fn numerical_hessian<T: Real>(grad: impl Fn(&[T]) -> Result<DVector<T>>, theta: &[T]) -> Result<DMatrix<T>> {
    let k = theta.len();
    let mut h = DMatrix::<T>::zeros(k, k);
    let mut x = theta.to_vec();
    for i in 0..k {
        let step = T::of(1e-5) * theta[i].abs().max(T::one());
        x[i] = theta[i] + step;
        let up = grad(&x)?;
        x[i] = theta[i] - step;
        let dn = grad(&x)?;
        x[i] = theta[i];
        h.set_column(i, &((up - dn) / (step + step)));
    }
    Ok((&h + h.transpose()) * T::of(0.5))
}

/// SEs from a log-likelihood Hessian; coordinates whose variance is not
/// positive are reported as `None`.
pub fn std_errors_from_hessian<T: Real>(hessian: &DMatrix<T>) -> StdErrors<T> {
    let info = -hessian;
    let k = info.nrows();
    if let Some(chol) = info.clone().cholesky() {
        let cov = chol.inverse();
        return StdErrors { values: (0..k).map(|i| Some(cov[(i, i)].sqrt())).collect(), negative_definite: true };
    }
    let values = match info.try_inverse() {
        Some(cov) => (0..k)
            .map(|i| {
                let v = cov[(i, i)];
                (v > T::zero() && v.finite()).then(|| v.sqrt())
            })
            .collect(),
        None => vec![None; k],
    };
    StdErrors { values, negative_definite: false }
}

/// Outcome of the model-assumption checks at a fitted parameter.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub zero_free: bool,
    pub zero_entries: Vec<PanelIndex>,
    pub jittered_entries: usize,
    pub weights: ValidationReport,
    pub s_invertible: bool,
    pub stability: Option<StabilityReport>,
    pub residual_mean: Option<f64>,
    pub residual_variance: Option<f64>,
    /// `|var(residuals) / σ²_u - 1|`.
    pub variance_relative_deviation: Option<f64>,
    pub moments_ok: bool,
    /// `T = 1` is only identified with a spatially constant intercept.
    pub intercept_mode_ok: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.zero_free
            && self.weights.passes()
            && self.s_invertible
            && self.stability.is_some_and(|s| s.stable)
            && self.moments_ok
            && self.intercept_mode_ok
    }

    pub fn to_text(&self) -> String {
        let flag = |ok: bool| if ok { "ok" } else { "VIOLATED" };
        let mut out = String::new();
        out.push_str(&format!("A1 zero-free panel: {}", flag(self.zero_free)));
        if !self.zero_free {
            out.push_str(&format!(" (zeros at {:?})", self.zero_entries));
        }
        out.push_str(&format!("; jittered entries: {}\n", self.jittered_entries));
        let var = self.residual_variance.map_or("n/a".into(), |v| format!("{v:.4}"));
        let dev = self.variance_relative_deviation.map_or("n/a".into(), |v| format!("{v:.4}"));
        out.push_str(&format!(
            "A2 residual moments: {} (variance {var}, relative deviation {dev})\n",
            flag(self.moments_ok)
        ));
        let rad = self.stability.map_or("n/a".into(), |s| format!("{:.6}", s.spectral_radius));
        out.push_str(&format!(
            "A3 stability: {} (spectral radius {rad})\n",
            flag(self.stability.is_some_and(|s| s.stable))
        ));
        out.push_str(&format!(
            "A4 weights bounded: {}; S invertible: {}\n",
            flag(self.weights.passes()),
            flag(self.s_invertible)
        ));
        out.push_str(&format!("intercept mode for T: {}\n", flag(self.intercept_mode_ok)));
        out
    }
}

/// Checks the model assumptions against a fitted result.
pub fn validate_assumptions<T: Real>(panel: &Panel<T>, w: &SpatialWeights<T>, result: &FitResult<T>) -> AssumptionReport {
    let zero_entries = panel.zero_entries();
    let stability = check_stability(&result.params, w).ok();
    let s_invertible = stability.is_some_and(|s| s.s_invertible);
    let moments = LikelihoodWorkspace::new(panel, w)
        .and_then(|ws| residuals(result.theta.as_slice(), &ws, result.a_mode))
        .ok()
        .map(|res| {
            let all: Vec<f64> = res.iter().flat_map(|r| r.iter().map(|v| v.to_f64_lossy())).collect();
            let m = all.iter().sum::<f64>() / all.len() as f64;
            let v = all.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / all.len() as f64;
            (m, v)
        });
    let s2 = result.params.sigma2_u.to_f64_lossy();
    let deviation = moments.map(|(_, v)| (v / s2 - 1.0).abs());
    AssumptionReport {
        zero_free: zero_entries.is_empty(),
        zero_entries,
        jittered_entries: panel.jittered.len(),
        weights: validate_weights(w, 1.0),
        s_invertible,
        stability,
        residual_mean: moments.map(|m| m.0),
        residual_variance: moments.map(|m| m.1),
        variance_relative_deviation: deviation,
        moments_ok: deviation.is_some_and(|d| d <= MOMENT_TOLERANCE),
        intercept_mode_ok: panel.dims.t_len > 1 || result.a_mode == AMode::ConstantAcrossSpace,
    }
}

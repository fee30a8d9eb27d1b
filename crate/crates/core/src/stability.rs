//! Stability of the spatiotemporal recursion: the spectral radius of
//! `S^{-1}(Π' ⊗ I)` must stay below one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gmres, spectral_radius_real};
use crate::model::ParamSet;
use crate::scalar::Real;
use crate::spectral::{dense_s, WeightSpectrum};
use crate::weights::SpatialWeights;

/// Largest `n * p` for which the full operator is formed densely.
pub const DENSE_OPERATOR_LIMIT: usize = 2000;

/// `S` counts as invertible when `min |1 - λ μ|` (or the smallest LU pivot
/// magnitude) exceeds this.
pub const INVERTIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMethod {
    /// `Ψ = 0` or `Π = 0`: the radius is read off `Π` directly.
    Closed,
    Dense,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub spectral_radius: f64,
    pub stable: bool,
    pub s_invertible: bool,
    pub method: StabilityMethod,
}

fn check_shapes<T: Real>(params: &ParamSet<T>, w: &SpatialWeights<T>) -> Result<()> {
    params.check_locations(w.n())?;
    if params.psi.nrows() != params.pi.nrows() {
        return Err(Error::Shape("Psi and Pi differ in size".into()));
    }
    Ok(())
}

/// `S` invertibility from the eigenvalue products, falling back to LU pivots.
fn s_invertible<T: Real>(psi: &DMatrix<T>, w: &SpatialWeights<T>) -> bool {
    if psi.iter().all(|v| *v == T::zero()) {
        return true;
    }
    if let Some(spectrum) = WeightSpectrum::new(w) {
        return spectrum.min_factor(psi).to_f64_lossy() > INVERTIBILITY_TOL;
    }
    let lu = dense_s(psi, w).lu();
    let u = lu.u();
    (0..u.nrows()).all(|i| u[(i, i)].abs().to_f64_lossy() > INVERTIBILITY_TOL)
}

/// Checks the spectral-radius stability condition.
///
/// For `n p <= 2000` the operator `S^{-1}(Π' ⊗ I)` is formed densely;
/// otherwise the radius comes from power iteration on the matrix-free
/// operator. Singular `S` is reported, not raised.
pub fn check_stability<T: Real>(params: &ParamSet<T>, w: &SpatialWeights<T>) -> Result<StabilityReport> {
    check_shapes(params, w)?;
    let (n, p) = (w.n(), params.p());
    let psi_zero = params.psi.iter().all(|v| *v == T::zero());
    let pi_zero = params.pi.iter().all(|v| *v == T::zero());
    let invertible = s_invertible(&params.psi, w);
    if !invertible {
        return Ok(StabilityReport {
            spectral_radius: f64::INFINITY,
            stable: false,
            s_invertible: false,
            method: StabilityMethod::Closed,
        });
    }
    let (radius, method) = if pi_zero {
        (0.0, StabilityMethod::Closed)
    } else if psi_zero {
        // S = I, so the operator is Π' ⊗ I with the eigenvalues of Π
        let r = spectral_radius_real(&params.pi)
            .ok_or_else(|| Error::LinearSolve("eigen solver did not converge".into()))?;
        (r.to_f64_lossy(), StabilityMethod::Closed)
    } else if n * p <= DENSE_OPERATOR_LIMIT {
        (dense_transition_radius(params, w)?.to_f64_lossy(), StabilityMethod::Dense)
    } else {
        (power_transition_radius(params, w)?.to_f64_lossy(), StabilityMethod::PowerIteration)
    };
    Ok(StabilityReport {
        spectral_radius: radius,
        stable: radius < 1.0,
        s_invertible: true,
        method,
    })
}

/// Spectral radius of the densely formed `S^{-1}(Π' ⊗ I)`.
pub fn dense_transition_radius<T: Real>(params: &ParamSet<T>, w: &SpatialWeights<T>) -> Result<T> {
    let n = w.n();
    let s = dense_s(&params.psi, w);
    let k = params.pi.transpose().kronecker(&DMatrix::<T>::identity(n, n));
    let m = s
        .lu()
        .solve(&k)
        .ok_or_else(|| Error::SingularJacobian(0.0))?;
    spectral_radius_real(&m).ok_or_else(|| Error::LinearSolve("eigen solver did not converge".into()))
}

/// Applies `S x = x - vec(W X Ψ)` for `x = vec(X)`.
pub(crate) fn apply_s<T: Real>(w: &SpatialWeights<T>, psi: &DMatrix<T>, x: &DVector<T>) -> DVector<T> {
    let (n, p) = (w.n(), psi.nrows());
    let xm = DMatrix::from_column_slice(n, p, x.as_slice());
    let lag = w.lag(&xm) * psi;
    x - DVector::from_column_slice(lag.as_slice())
}

/// Applies `(Π' ⊗ I) x = vec(X Π)`.
pub(crate) fn apply_temporal<T: Real>(n: usize, pi: &DMatrix<T>, x: &DVector<T>) -> DVector<T> {
    let p = pi.nrows();
    let xm = DMatrix::from_column_slice(n, p, x.as_slice());
    DVector::from_column_slice((xm * pi).as_slice())
}

/// Power iteration on `x ↦ S^{-1}((Π' ⊗ I) x)` with GMRES inner solves.
///
/// The radius is the geometric mean growth factor over a trailing window,
/// which converges for complex dominant pairs as well.
pub fn power_transition_radius<T: Real>(params: &ParamSet<T>, w: &SpatialWeights<T>) -> Result<T> {
    const WINDOW: usize = 25;
    const MAX_ITER: usize = 2000;
    let n = w.n();
    let np = n * params.p();
    let mut x = DVector::from_fn(np, |i, _| T::one() + T::of(0.37 * ((i as f64) * 1.3).sin()));
    x /= x.norm();
    let mut logs: Vec<f64> = Vec::with_capacity(MAX_ITER);
    let mut prev_est = f64::NAN;
    let mut guess: Option<DVector<T>> = None;
    for it in 0..MAX_ITER {
        let rhs = apply_temporal(n, &params.pi, &x);
        let (y, _) = gmres(|v| apply_s(w, &params.psi, v), &rhs, guess.as_ref(), 40, 1e-13, 20 * np.max(50))?;
        let norm = y.norm();
        if norm == T::zero() {
            return Ok(T::zero());
        }
        logs.push(norm.to_f64_lossy().ln());
        x = &y / norm;
        guess = Some(x.clone() * norm);
        if (it + 1) % WINDOW == 0 && logs.len() >= 2 * WINDOW {
            let tail = &logs[logs.len() - WINDOW..];
            let est = (tail.iter().sum::<f64>() / WINDOW as f64).exp();
            if (est - prev_est).abs() <= 1e-9 * est.max(1e-300) {
                return Ok(T::of(est));
            }
            prev_est = est;
        }
    }
    Ok(T::of(prev_est))
}

/// Long-run mean of `vec(ln Y_t^2)`: `(I - S^{-1}(Π' ⊗ I))^{-1} S^{-1} vec(Ã)`,
/// computed as the solution of `(S - Π' ⊗ I) x = vec(Ã)`.
pub fn stationary_log_mean<T: Real>(params: &ParamSet<T>, w: &SpatialWeights<T>) -> Result<DVector<T>> {
    let report = check_stability(params, w)?;
    if !report.stable {
        return Err(Error::Unstable { radius: report.spectral_radius, s_invertible: report.s_invertible });
    }
    let n = w.n();
    let p = params.p();
    let a = DVector::from_column_slice(params.a_tilde.to_matrix(n).as_slice());
    if n * p <= crate::simulate::DENSE_SOLVE_LIMIT {
        let k = params.pi.transpose().kronecker(&DMatrix::<T>::identity(n, n));
        let sys = dense_s(&params.psi, w) - k;
        sys.lu().solve(&a).ok_or_else(|| Error::LinearSolve("I - S^-1 (Pi' x I) is singular".into()))
    } else {
        let (x, _) = gmres(
            |v| apply_s(w, &params.psi, v) - apply_temporal(n, &params.pi, v),
            &a,
            None,
            50,
            1e-13,
            50 * n * p,
        )?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ATilde;
    use crate::weights::Contiguity;

    fn ps(p: usize, a: f64, psi: &[f64], pi: &[f64]) -> ParamSet<f64> {
        ParamSet::new(
            ATilde::Constant(DVector::from_element(p, a)),
            DMatrix::from_row_slice(p, p, psi),
            DMatrix::from_row_slice(p, p, pi),
            4.93,
        )
        .unwrap()
    }

    #[test]
    fn zero_psi_reduces_to_pi() {
        let w = SpatialWeights::grid_contiguity(3, 3, Contiguity::Queen).unwrap().row_standardize().unwrap();
        let r = check_stability(&ps(2, 0.0, &[0.0; 4], &[0.3, 0.0, 0.0, 0.3]), &w).unwrap();
        assert!((r.spectral_radius - 0.3).abs() < 1e-12);
        assert!(r.stable && r.s_invertible);
    }

    #[test]
    fn model_a_is_stable_on_standardized_grids() {
        for side in [3, 5, 7, 10] {
            let w = SpatialWeights::grid_contiguity(side, side, Contiguity::Queen).unwrap().row_standardize().unwrap();
            let r = check_stability(&ps(2, 0.0, &[0.5, 0.1, 0.1, 0.5], &[0.3, 0.0, 0.0, 0.3]), &w).unwrap();
            assert!(r.stable, "side {side}: {r:?}");
            assert_eq!(r.method, StabilityMethod::Dense);
        }
    }

    #[test]
    fn two_cell_unstable_example() {
        let w = SpatialWeights::grid_contiguity(2, 1, Contiguity::Rook).unwrap();
        let r = check_stability(&ps(1, 0.0, &[0.5], &[0.9]), &w).unwrap();
        // eigenvalues 0.9 / (1 -+ 0.5)
        assert!((r.spectral_radius - 1.8).abs() < 1e-12);
        assert!(!r.stable);
    }

    #[test]
    fn singular_s_is_reported() {
        let w = SpatialWeights::grid_contiguity(2, 1, Contiguity::Rook).unwrap();
        let r = check_stability(&ps(1, 0.0, &[1.0], &[0.2]), &w).unwrap();
        assert!(!r.s_invertible && !r.stable);
    }

    #[test]
    fn structured_radius_matches_dense() {
        let w = SpatialWeights::grid_contiguity(4, 5, Contiguity::Queen).unwrap().row_standardize().unwrap();
        let spectrum = WeightSpectrum::new(&w).unwrap();
        let p = ps(2, 0.0, &[0.2, 0.4, 0.4, 0.2], &[0.3, 0.1, -0.05, 0.3]);
        let a = spectrum.transition_radius(&p.psi, &p.pi).unwrap();
        let b = dense_transition_radius(&p, &w).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn power_iteration_matches_structured_radius() {
        let w = SpatialWeights::grid_contiguity(6, 7, Contiguity::Queen).unwrap().row_standardize().unwrap();
        let spectrum = WeightSpectrum::new(&w).unwrap();
        let p = ps(2, 0.0, &[0.5, 0.1, 0.1, 0.5], &[0.3, 0.0, 0.0, 0.3]);
        let a = spectrum.transition_radius(&p.psi, &p.pi).unwrap();
        let b = power_transition_radius(&p, &w).unwrap();
        assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn stationary_mean_closed_forms() {
        let w = SpatialWeights::grid_contiguity(2, 1, Contiguity::Rook).unwrap();
        let zero = ps(1, 1.7, &[0.0], &[0.0]);
        let m = stationary_log_mean(&zero, &w).unwrap();
        assert!(m.iter().all(|v| (*v - 1.7).abs() < 1e-15));

        // x = a + psi W x + pi x with W the 2-cell swap: both entries equal a / (1 - psi - pi)
        let p = ps(1, 1.0, &[0.5], &[0.3]);
        let m = stationary_log_mean(&p, &w).unwrap();
        let dense = (DMatrix::identity(2, 2) - DMatrix::from_row_slice(2, 2, &[0.3, 0.5, 0.5, 0.3]))
            .lu()
            .solve(&DVector::from_element(2, 1.0))
            .unwrap();
        for i in 0..2 {
            assert!((m[i] - 5.0).abs() < 1e-12);
            assert!((m[i] - dense[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_mean_refuses_unstable() {
        let w = SpatialWeights::grid_contiguity(2, 1, Contiguity::Rook).unwrap();
        assert!(matches!(stationary_log_mean(&ps(1, 1.0, &[0.5], &[0.9]), &w), Err(Error::Unstable { .. })));
    }
}

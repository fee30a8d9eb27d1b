//! Kronecker-structured quantities computed from the spectrum of `W`.
//!
//! With `W = Q T Q*` (complex Schur), `S = I - Ψ' ⊗ W` is similar to a block
//! triangular matrix whose diagonal blocks are `I_p - μ_j Ψ'`, one per
//! eigenvalue `μ_j` of `W`. Log-determinants and the spectrum of
//! `S^{-1}(Π' ⊗ I)` reduce to `n` independent `p x p` problems.

use nalgebra::{Complex, ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{log_abs_det_lu, spectral_radius_complex};
use crate::scalar::Real;
use crate::weights::SpatialWeights;

/// Threshold on `|1 - λ μ|` below which `S` is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Cached eigenvalues `μ_1..μ_n` of a weight matrix.
#[derive(Debug, Clone)]
pub struct WeightSpectrum<T: Real> {
    mu: Vec<Complex<T>>,
}

impl<T: Real> WeightSpectrum<T> {
    pub fn new(w: &SpatialWeights<T>) -> Option<Self> {
        w.eigenvalues().map(|mu| Self { mu })
    }

    pub fn from_eigenvalues(mu: Vec<Complex<T>>) -> Self {
        Self { mu }
    }

    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.mu
    }

    pub fn max_modulus(&self) -> T {
        self.mu.iter().map(|z| z.modulus()).fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// `min_{i,j} |1 - λ_i(Ψ) μ_j|`.
    pub fn min_factor(&self, psi: &DMatrix<T>) -> T {
        let lambda = crate::linalg::eigenvalues(psi);
        let one = Complex::new(T::one(), T::zero());
        let mut min = T::max_value().unwrap_or_else(|| T::of(f64::MAX));
        for l in lambda.iter() {
            for m in &self.mu {
                let f = (one - *l * *m).modulus();
                if f < min {
                    min = f;
                }
            }
        }
        min
    }

    /// `ln |det(I - Ψ' ⊗ W)| = Σ_i Σ_j ln |1 - λ_i μ_j|`.
    pub fn log_det_s(&self, psi: &DMatrix<T>) -> Result<T> {
        log_det_s(psi, &self.mu)
    }

    /// Gradient of `ln |det S|` with respect to `Ψ` (a `p x p` matrix):
    /// `∂/∂ψ_kl = -Re Σ_j μ_j [(I - μ_j Ψ')^{-1}]_{kl}`.
    pub fn log_det_s_gradient(&self, psi: &DMatrix<T>) -> Result<DMatrix<T>> {
        let p = psi.nrows();
        let psi_t = psi.transpose().map(|v| Complex::new(v, T::zero()));
        let eye = DMatrix::<Complex<T>>::identity(p, p);
        let mut grad = DMatrix::<T>::zeros(p, p);
        for m in &self.mu {
            if *m == Complex::new(T::zero(), T::zero()) {
                continue;
            }
            let block = &eye - psi_t.map(|z| z * *m);
            let inv = block
                .try_inverse()
                .ok_or_else(|| Error::SingularJacobian(0.0))?;
            for k in 0..p {
                for l in 0..p {
                    grad[(k, l)] -= (*m * inv[(k, l)]).re;
                }
            }
        }
        Ok(grad)
    }

    /// Spectral radius of `S^{-1}(Π' ⊗ I)` as the largest spectral radius of
    /// the blocks `(I - μ_j Ψ')^{-1} Π'`.
    pub fn transition_radius(&self, psi: &DMatrix<T>, pi: &DMatrix<T>) -> Result<T> {
        let p = psi.nrows();
        let psi_t = psi.transpose().map(|v| Complex::new(v, T::zero()));
        let pi_t = pi.transpose().map(|v| Complex::new(v, T::zero()));
        let eye = DMatrix::<Complex<T>>::identity(p, p);
        let mut radius = T::zero();
        let mut seen: Vec<Complex<T>> = Vec::new();
        let tol = T::of(1e-13);
        for m in &self.mu {
            // grid spectra repeat eigenvalues heavily
            if seen.iter().any(|s| (*s - *m).modulus() <= tol) {
                continue;
            }
            seen.push(*m);
            let block = &eye - psi_t.map(|z| z * *m);
            let inv = block.try_inverse().ok_or_else(|| Error::SingularJacobian(0.0))?;
            let r = spectral_radius_complex(&(inv * &pi_t))
                .ok_or_else(|| Error::LinearSolve("eigen solver did not converge".into()))?;
            if r > radius {
                radius = r;
            }
        }
        Ok(radius)
    }
}

/// `ln |det(I - Ψ' ⊗ W)|` from the eigenvalues of `Ψ` and of `W`.
///
/// Fails with [`Error::SingularJacobian`] if any `|1 - λ μ| < 1e-12`.
pub fn log_det_s<T: Real>(psi: &DMatrix<T>, w_eigenvalues: &[Complex<T>]) -> Result<T> {
    let lambda = crate::linalg::eigenvalues(psi);
    let one = Complex::new(T::one(), T::zero());
    let tol = T::of(SINGULAR_TOL);
    let mut acc = T::zero();
    for l in lambda.iter() {
        for m in w_eigenvalues {
            let f = (one - *l * *m).modulus();
            if f < tol {
                return Err(Error::SingularJacobian(f.to_f64_lossy()));
            }
            acc += f.ln();
        }
    }
    Ok(acc)
}

/// Dense `S = I - Ψ' ⊗ W`.
pub fn dense_s<T: Real>(psi: &DMatrix<T>, w: &SpatialWeights<T>) -> DMatrix<T> {
    let k = psi.transpose().kronecker(&w.to_dense());
    DMatrix::identity(k.nrows(), k.ncols()) - k
}

/// `ln |det S|` by dense LU, used when the eigen solver fails.
pub fn log_det_s_dense<T: Real>(psi: &DMatrix<T>, w: &SpatialWeights<T>) -> Result<T> {
    log_abs_det_lu(dense_s(psi, w)).ok_or(Error::SingularJacobian(0.0))
}

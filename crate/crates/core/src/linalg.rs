//! Small dense and matrix-free linear-algebra kernels.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Dyn, Schur};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `ln |det M|` via LU, or `None` if a pivot vanishes.
pub fn log_abs_det_lu<T: Real>(m: DMatrix<T>) -> Option<T> {
    let lu = m.lu();
    let u = lu.u();
    let mut acc = T::zero();
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if d == T::zero() {
            return None;
        }
        acc += d.ln();
    }
    Some(acc)
}

/// Deflation tolerances tried in turn, as multiples of machine epsilon. The
/// shifted QR iteration can stall at the tightest one.
const SCHUR_TOLERANCE_STEPS: [f64; 5] = [1.0, 8.0, 64.0, 512.0, 4096.0];

fn schur_iteration_cap(n: usize) -> usize {
    200 * n.max(10)
}

/// Real Schur form of a square matrix.
pub fn real_schur<T: Real>(m: &DMatrix<T>) -> Option<Schur<T, Dyn>> {
    let cap = schur_iteration_cap(m.nrows());
    SCHUR_TOLERANCE_STEPS
        .iter()
        .find_map(|f| Schur::try_new(m.clone(), T::default_epsilon() * T::of(*f), cap))
}

/// Complex eigenvalues of a small real matrix.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<Complex<T>> {
    match real_schur(m) {
        Some(s) => s.complex_eigenvalues().iter().copied().collect(),
        None => m.complex_eigenvalues().iter().copied().collect(),
    }
}

/// Largest eigenvalue modulus of a real square matrix.
pub fn spectral_radius_real<T: Real>(m: &DMatrix<T>) -> Option<T> {
    if m.nrows() == 0 {
        return Some(T::zero());
    }
    let schur = real_schur(m)?;
    Some(
        schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.modulus())
            .fold(T::zero(), |a, b| if b > a { b } else { a }),
    )
}

/// Largest eigenvalue modulus of a complex square matrix.
pub fn spectral_radius_complex<T: Real>(m: &DMatrix<Complex<T>>) -> Option<T> {
    if m.iter().all(|z| z.im == T::zero()) {
        return spectral_radius_real(&m.map(|z| z.re));
    }
    let n = m.nrows();
    if n == 1 {
        return Some(m[(0, 0)].modulus());
    }
    if n == 2 {
        // closed-form roots of the characteristic polynomial
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let half = Complex::new(T::of(0.5), T::zero());
        let tr = (a + d) * half;
        let disc = ComplexField::sqrt(tr * tr - (a * d - b * c));
        let r = (tr + disc).modulus().max((tr - disc).modulus());
        return Some(r);
    }
    let cap = schur_iteration_cap(n);
    let schur = SCHUR_TOLERANCE_STEPS
        .iter()
        .find_map(|f| Schur::try_new(m.clone(), T::default_epsilon() * T::of(*f), cap))?;
    let (_, t) = schur.unpack();
    Some((0..n).map(|i| t[(i, i)].modulus()).fold(T::zero(), |a, b| if b > a { b } else { a }))
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Restarted GMRES for `A x = b` with a matrix-free operator.
///
/// Stops when `||b - A x|| <= tol * ||b||`; the true residual is recomputed
/// at every restart.
pub fn gmres<T: Real>(
    apply: impl Fn(&DVector<T>) -> DVector<T>,
    b: &DVector<T>,
    x0: Option<&DVector<T>>,
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<T>, SolveInfo)> {
    let n = b.len();
    let bnorm = b.norm();
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    if bnorm == T::zero() {
        return Ok((DVector::zeros(n), SolveInfo { iterations: 0, relative_residual: 0.0 }));
    }
    let tol_t = T::of(tol) * bnorm;
    let m = restart.max(1).min(n.max(1));
    let mut total = 0usize;
    loop {
        let r = b - apply(&x);
        let beta = r.norm();
        let rel = (beta / bnorm).to_f64_lossy();
        if beta <= tol_t {
            return Ok((x, SolveInfo { iterations: total, relative_residual: rel }));
        }
        if total >= max_iter {
            return Err(Error::LinearSolve(format!(
                "GMRES did not converge in {max_iter} iterations (relative residual {rel:e})"
            )));
        }
        let mut basis: Vec<DVector<T>> = Vec::with_capacity(m + 1);
        basis.push(r / beta);
        let mut h = DMatrix::<T>::zeros(m + 1, m);
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = DVector::<T>::zeros(m + 1);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let mut v = apply(&basis[k]);
            // modified Gram-Schmidt, applied twice for stability
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let hij = q.dot(&v);
                    h[(i, k)] += hij;
                    v.axpy(-hij, q, T::one());
                }
            }
            let vnorm = v.norm();
            h[(k + 1, k)] = vnorm;
            for i in 0..k {
                let tmp = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = tmp;
            }
            let denom = (h[(k, k)] * h[(k, k)] + h[(k + 1, k)] * h[(k + 1, k)]).sqrt();
            if denom == T::zero() {
                cs[k] = T::one();
                sn[k] = T::zero();
            } else {
                cs[k] = h[(k, k)] / denom;
                sn[k] = h[(k + 1, k)] / denom;
            }
            h[(k, k)] = cs[k] * h[(k, k)] + sn[k] * h[(k + 1, k)];
            h[(k + 1, k)] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol_t || vnorm == T::zero() || total >= max_iter {
                break;
            }
            basis.push(v / vnorm);
        }
        // back substitution on the k_used x k_used triangle
        let mut y = DVector::<T>::zeros(k_used);
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[(i, j)] * y[j];
            }
            if h[(i, i)] == T::zero() {
                return Err(Error::LinearSolve("GMRES breakdown: singular Hessenberg matrix".into()));
            }
            y[i] = acc / h[(i, i)];
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i], T::one());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let off: f64 = rng.random_range(-0.1..0.1);
            if i == j { 2.0 + off } else { off / 3.0 }
        });
        let b = DVector::from_fn(n, |i, _| (i as f64).sin());
        let (x, info) = gmres(|v| &a * v, &b, None, 10, 1e-12, 1000).unwrap();
        assert!((&a * &x - &b).norm() <= 1e-11 * b.norm());
        assert!(info.relative_residual <= 1e-12);
        let direct = a.lu().solve(&b).unwrap();
        assert!((x - direct).norm() < 1e-9);
    }

    #[test]
    fn log_det_matches_product_of_diagonal() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 1.0, -3.0, 0.0, 4.0, 5.0, 0.5]);
        assert!((log_abs_det_lu(m).unwrap() - 3f64.ln()).abs() < 1e-14);
        assert!(log_abs_det_lu(DMatrix::<f64>::zeros(2, 2)).is_none());
    }

    #[test]
    fn complex_radius_closed_form_and_schur_agree() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex::new(0.5, 0.1),
                Complex::new(0.2, 0.0),
                Complex::new(0.0, 0.3),
                Complex::new(0.1, -0.2),
                Complex::new(-0.4, 0.0),
                Complex::new(0.3, 0.0),
                Complex::new(0.0, 0.0),
                Complex::new(0.2, 0.2),
                Complex::new(0.1, 0.0),
            ],
        );
        // power iteration oracle
        let mut v = DVector::from_element(3, Complex::new(1.0, 0.3));
        let mut est = 0.0;
        for _ in 0..2000 {
            let w = &m * &v;
            est = w.norm() / v.norm();
            v = w.unscale(w.norm());
        }
        let r = spectral_radius_complex(&m).unwrap();
        assert!((r - est).abs() < 1e-8, "{r} vs {est}");

        let m2 = m.view((0, 0), (2, 2)).into_owned();
        let closed = spectral_radius_complex(&m2).unwrap();
        let (_, t) = Schur::new(m2).unpack();
        let via_schur = f64::max(t[(0, 0)].norm(), t[(1, 1)].norm());
        assert!((closed - via_schur).abs() < 1e-12);
    }
}

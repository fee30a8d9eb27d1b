//! BFGS minimisation with backtracking over a possibly infeasible domain.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop once `max_i |∇f_i|` falls to this level.
    pub gradient_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome<T: Real> {
    pub x: DVector<T>,
    pub value: T,
    pub gradient: DVector<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective values of the start and of every accepted step.
    pub trace: Vec<T>,
}

fn sup_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, x| if x.abs() > m { x.abs() } else { m })
}

/// Minimises `f`, which returns `None` for points outside the feasible set.
///
/// Infeasible or non-finite trial points are treated as `+∞`, so the
/// backtracking line search never leaves the feasible set. Returns `None`
/// only if the start itself is infeasible.
pub fn minimize<T: Real>(
    mut f: impl FnMut(&DVector<T>) -> Option<(T, DVector<T>)>,
    x0: DVector<T>,
    opts: BfgsOptions,
) -> Option<BfgsOutcome<T>> {
    let mut eval = |x: &DVector<T>| f(x).filter(|(v, g)| v.finite() && g.iter().all(|z| z.finite()));
    let (mut fx, mut gx) = eval(&x0)?;
    let mut x = x0;
    let dim = x.len();
    let tol = T::of(opts.gradient_tolerance);
    let c1 = T::of(ARMIJO_C1);
    let half = T::of(0.5);
    let mut h = DMatrix::<T>::identity(dim, dim);
    let mut fresh = true;
    let mut trace = vec![fx];
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if sup_norm(&gx) <= tol {
            break;
        }
        let mut d = -(&h * &gx);
        let mut slope = d.dot(&gx);
        if !(slope < T::zero()) {
            h = DMatrix::identity(dim, dim);
            fresh = true;
            d = -gx.clone();
            slope = d.dot(&gx);
        }
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &d * step;
            if let Some((ft, gt)) = eval(&trial) {
                if ft <= fx + c1 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= half;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                break;
            }
            // curvature information went stale; retry from steepest descent
            h = DMatrix::identity(dim, dim);
            fresh = true;
            continue;
        };
        iterations += 1;
        let s = &xn - &x;
        let y = &gn - &gx;
        let sy = s.dot(&y);
        if sy > T::default_epsilon() * s.norm() * y.norm() {
            if fresh {
                h *= sy / y.dot(&y);
            }
            let rho = T::one() / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(H y s' + s y' H) + (ρ² y'Hy + ρ) s s'
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        x = xn;
        fx = fn_;
        gx = gn;
        trace.push(fx);
    }
    let converged = sup_norm(&gx) <= tol;
    Some(BfgsOutcome { x, value: fx, gradient: gx, iterations, converged, trace })
}

//! Polygamma helpers needed for the moments of ln(eps^2).

use std::f64::consts::PI;

pub use statrs::function::gamma::digamma;

/// Trigamma function psi'(x) for x > 0.
///
/// Upward recurrence to x >= 10, then the asymptotic Bernoulli series.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
    let series = inv
        * (1.0
            + inv / 2.0
            + inv2
                * (1.0 / 6.0
                    + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0))))));
    acc + series
}

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// trigamma(1/2) = pi^2 / 2.
pub const TRIGAMMA_HALF: f64 = PI * PI / 2.0;

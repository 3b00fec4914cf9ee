//! Standard normal tails and truncated-Gaussian moments.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

/// Mills-ratio formulas switch to a continued fraction above this point.
pub const ASYMPTOTIC_THRESHOLD: f64 = 37.0;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Phi(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `Q(x) = 1 - Phi(x)`, accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `Phi(b) - Phi(a)` for `a <= b`, evaluated on the side that avoids cancellation.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_cdf(b) - normal_cdf(a)
    } else {
        1.0 - normal_cdf(a) - normal_sf(b)
    }
}

/// Tails of the continued fraction `Q(z)/phi(z) = 1/(z + 1/(z + 2/(z + ...)))`:
/// returns `(u1, u2)` with `u1 = 1/(z + u2)` and `u2 = 2/(z + 3/(z + ...))`.
fn mills_fraction(z: f64) -> (f64, f64) {
    let mut t = 0.0;
    for k in (2..=200).rev() {
        t = k as f64 / (z + t);
    }
    (1.0 / (z + t), t)
}

/// `E[Z | Z >= z]` for a standard normal `Z`.
pub fn truncated_gaussian_mean(z: f64) -> f64 {
    if z > ASYMPTOTIC_THRESHOLD {
        // phi/Q = z + u1.
        return z + mills_fraction(z).0;
    }
    let q = normal_sf(z);
    normal_pdf(z) / q
}

/// `Var(Z | Z >= z)` for a standard normal `Z`.
pub fn truncated_gaussian_variance(z: f64) -> f64 {
    if z > ASYMPTOTIC_THRESHOLD {
        // With lambda = z + u1 the variance 1 + z lambda - lambda^2 reduces to
        // u1 (u2 - u1) once the continued fraction is unrolled twice.
        let (u1, u2) = mills_fraction(z);
        return u1 * (u2 - u1);
    }
    let lam = truncated_gaussian_mean(z);
    (1.0 + z * lam - lam * lam).max(0.0)
}

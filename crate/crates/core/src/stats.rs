//! Normal and truncated-normal helpers.

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - phi(x)`, accurate for large positive `x`.
#[inline]
pub fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// Mass of the standard normal on `[a, b]`, computed on the side of zero
/// that avoids cancellation.
pub fn standard_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        phi(b) - phi(a)
    } else {
        1.0 - phi(a) - upper_tail(b)
    }
}

/// Mass of `Normal(mean, sd^2)` on `[lo, hi]`.
#[inline]
pub fn truncation_mass(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    standard_mass((lo - mean) / sd, (hi - mean) / sd)
}

/// Draws from `Normal(mean, sd^2)` truncated to `[lo, hi]` by inverting the
/// CDF on the tail that keeps precision. `sd == 0` returns `mean` clamped.
pub fn sample_truncated<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if sd <= 0.0 || lo >= hi {
        return mean.clamp(lo, hi);
    }
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let u: f64 = rng.random();
    let z = if a >= 0.0 {
        // Upper tail: Q(z) uniform on (Q(b), Q(a)].
        let (qa, qb) = (upper_tail(a), upper_tail(b));
        if qa - qb <= 0.0 {
            return lo;
        }
        let q = qb + u * (qa - qb);
        SQRT_2 * erfc_inv(2.0 * q)
    } else {
        let (pa, pb) = (phi(a), phi(b));
        if pb - pa <= 0.0 {
            return hi;
        }
        let p = pa + u * (pb - pa);
        -SQRT_2 * erfc_inv(2.0 * p)
    };
    (mean + sd * z).clamp(lo, hi)
}

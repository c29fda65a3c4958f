//! Scalar special functions on top of `libm`.
//!
//! Everything here works without `std`, which is why the Beta family
//! helpers (incomplete Beta, its inverse) are implemented locally.

use core::f64::consts::PI;

use libm::{erfc, exp, fabs, lgamma, log, log1p, sqrt, tan};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
pub const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

#[inline]
pub fn sq(x: f64) -> f64 {
    x * x
}

/// `1 / (1 + e^{-x})` without overflow for large `|x|`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -37.0 {
        exp(x)
    } else {
        log1p(exp(x))
    }
}

/// `ln(logistic(x))`.
#[inline]
pub fn log_logistic(x: f64) -> f64 {
    -log1pexp(-x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    lgamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Digamma function ψ(x).
///
/// Shifts the argument above 10 with ψ(x) = ψ(x+1) − 1/x, then applies the
/// asymptotic expansion. Negative non-integer arguments use the reflection
/// formula.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return f64::NAN;
    }
    if x <= 0.0 {
        if x == libm::floor(x) {
            return f64::NAN;
        }
        // ψ(1 − x) − ψ(x) = π cot(πx)
        return digamma(1.0 - x) - PI / tan(PI * x);
    }
    let mut acc = 0.0;
    let mut z = x;
    while z < 10.0 {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let f = 1.0 / (z * z);
    let series = f
        * (1.0 / 12.0
            - f * (1.0 / 120.0
                - f * (1.0 / 252.0
                    - f * (1.0 / 240.0
                        - f * (1.0 / 132.0 - f * (691.0 / 32760.0 - f / 12.0))))));
    acc + log(z) - 0.5 / z - series
}

/// Continued fraction for the incomplete Beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Natural log of the regularized incomplete Beta function `I_x(a, b)`.
///
/// Stays accurate deep in the lower tail, e.g. `x = 1e-6` with `a < 1`.
pub fn ln_beta_inc_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let ln_front = a * log(x) + b * log1p(-x) - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front + log(beta_cf(a, b, x)) - log(a)
    } else {
        let upper = exp(ln_front + log(beta_cf(b, a, 1.0 - x)) - log(b));
        log1p(-upper)
    }
}

pub fn beta_inc_reg(a: f64, b: f64, x: f64) -> f64 {
    exp(ln_beta_inc_reg(a, b, x))
}

/// Inverse of `I_x(a, b)` in `x`, by bisection to machine precision.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_inc_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Log density of Beta(a, b) at `y ∈ (0, 1)`.
pub fn beta_ln_pdf(y: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * log(y) + (b - 1.0) * log1p(-y) - ln_beta(a, b)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

/// Upper-tail probability `P(Z > x)` for a standard normal.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (Acklam's rational approximation, refined with
/// one Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = sqrt(-2.0 * log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * sqrt(2.0 * PI) * exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// `ln Σ exp(v)` over a slice; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| exp(v - max)).sum();
    max + log(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digamma_at_one_is_minus_euler_gamma() {
        assert!((digamma(1.0) + EULER_MASCHERONI).abs() < 1e-10);
    }

    #[test]
    fn digamma_recurrence_holds_on_grid() {
        let mut x = 0.01;
        while x < 60.0 {
            let lhs = digamma(x + 1.0);
            let rhs = digamma(x) + 1.0 / x;
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()), "x={x}");
            x *= 1.37;
        }
    }

    #[test]
    fn digamma_matches_statrs() {
        for &x in &[0.003, 0.2, 0.5, 1.5, 3.3, 9.99, 10.0, 42.0, 1e4] {
            let reference = statrs::function::gamma::digamma(x);
            assert!((digamma(x) - reference).abs() < 1e-9 * (1.0 + reference.abs()));
        }
    }

    #[test]
    fn digamma_half_and_reflection() {
        // ψ(1/2) = −γ − 2 ln 2
        let expected = -EULER_MASCHERONI - 2.0 * core::f64::consts::LN_2;
        assert!((digamma(0.5) - expected).abs() < 1e-12);
        let x = -0.3;
        let lhs = digamma(1.0 - x) - digamma(x);
        assert!((lhs - PI / libm::tan(PI * x)).abs() < 1e-9);
    }

    #[test]
    fn incomplete_beta_matches_statrs() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 5.0), (0.15, 1.25), (30.0, 12.0)] {
            for &x in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let reference = statrs::function::beta::beta_reg(a, b, x);
                let got = beta_inc_reg(a, b, x);
                assert!((got - reference).abs() < 1e-10, "a={a} b={b} x={x}: {got} vs {reference}");
            }
        }
    }

    #[test]
    fn beta_quantile_inverts_cdf() {
        for &(a, b) in &[(4.0, 16.0), (0.7, 0.7), (12.0, 3.0)] {
            for &p in &[0.01, 0.138, 0.5, 0.95] {
                let q = beta_quantile(a, b, p);
                assert!((beta_inc_reg(a, b, q) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_quantile_round_trip() {
        for &p in &[1e-10, 0.001, 0.0243, 0.3, 0.5, 0.9, 0.999_999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-14 + 1e-12 * p);
        }
        assert!(normal_quantile(0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(1000.0), 1.0);
        assert_eq!(logistic(-1000.0), 0.0);
        assert!((log_logistic(-800.0) + 800.0).abs() < 1e-12);
        assert!((logistic(0.0) - 0.5).abs() < 1e-16);
    }
}

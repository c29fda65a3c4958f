//! The zero-inflated Beta distribution in mean–precision form.

use libm::log;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::math::beta_ln_pdf;

/// Largest double below one; Beta draws are kept inside `[0, 1)`.
pub const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// `ln f(y)` with `f(0) = α` and `f(y) = (1 − α)·Beta(y; μφ, (1 − μ)φ)` on
/// `(0, 1)`.
pub fn zib_logpdf(y: f64, mu: f64, phi: f64, alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::invalid(alloc::format!(
            "ZIB support is [0, 1), got y = {y}"
        )));
    }
    if y == 0.0 {
        return Ok(log(alpha));
    }
    Ok(libm::log1p(-alpha) + beta_ln_pdf(y, mu * phi, (1.0 - mu) * phi))
}

/// One Beta(a, b) draw, kept strictly inside `(0, 1)`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let a = a.clamp(1e-300, 1e300);
    let b = b.clamp(1e-300, 1e300);
    let draw = match Beta::new(a, b) {
        Ok(dist) => dist.sample(rng),
        Err(_) => a / (a + b),
    };
    if draw.is_nan() {
        // Both shapes tiny: the mass sits at the endpoints in ratio a : b.
        return if rng.random::<f64>() < a / (a + b) {
            ONE_BELOW
        } else {
            f64::MIN_POSITIVE
        };
    }
    draw.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

/// One ZIB draw: exactly 0 with probability `α`, otherwise a Beta draw.
pub fn sample_zib<R: Rng + ?Sized>(rng: &mut R, mu: f64, phi: f64, alpha: f64) -> f64 {
    let u: f64 = rng.random();
    if u < alpha {
        0.0
    } else {
        sample_beta(rng, mu * phi, (1.0 - mu) * phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_at_zero() {
        assert!((zib_logpdf(0.0, 0.3, 5.0, 0.25).unwrap() - log(0.25)).abs() < 1e-15);
    }

    #[test]
    fn uniform_beta() {
        assert!(zib_logpdf(0.5, 0.5, 2.0, 0.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn support_is_checked() {
        assert!(zib_logpdf(1.0, 0.5, 2.0, 0.1).is_err());
        assert!(zib_logpdf(-0.1, 0.5, 2.0, 0.1).is_err());
    }
}

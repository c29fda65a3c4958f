//! Log posterior of the regression with its analytic gradient.

use alloc::format;
use alloc::vec::Vec;

use core::f64::consts::PI;
use libm::{exp, log, log1p};
use serde::{Deserialize, Serialize};

use crate::bayes::design::Design;
use crate::error::{Error, Result};
use crate::math::{digamma, ln_gamma, log_logistic, logistic, LN_SQRT_2PI};

/// A differentiable log density for the sampler.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Writes `∇ log p(q)` into `grad` and returns `log p(q)` (up to a
    /// constant). Non-finite evaluations are reported as
    /// [`Error::NumericDomain`].
    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// Observation model. `Beta` is the simpler baseline without zero
/// inflation; its zero targets are nudged to [`BETA_ZERO_NUDGE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    ZeroInflatedBeta,
    Beta,
}

pub const BETA_ZERO_NUDGE: f64 = 1e-6;

impl Family {
    /// Number of linear predictors (coefficient blocks).
    pub fn n_links(&self) -> usize {
        match self {
            Family::ZeroInflatedBeta => 3,
            Family::Beta => 2,
        }
    }
}

#[inline]
fn normal_prior(b: f64) -> (f64, f64) {
    (-LN_SQRT_2PI - 0.5 * b * b, -b)
}

#[inline]
fn cauchy_prior(b: f64) -> (f64, f64) {
    let s = 1.0 + b * b;
    (-log(PI) - log(s), -2.0 * b / s)
}

/// Log prior of a coefficient vector laid out as `[β_μ | β_φ | β_α]`
/// (the last block only for the zero-inflated family).
pub fn log_prior(family: Family, n_cov: usize, position: &[f64], grad: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (k, (&b, g)) in position.iter().zip(grad.iter_mut()).enumerate() {
        let block = k / n_cov.max(1);
        let (lp, dlp) = if block == 1 {
            cauchy_prior(b)
        } else {
            normal_prior(b)
        };
        debug_assert!(block < family.n_links());
        total += lp;
        *g += dlp;
    }
    total
}

/// Log posterior of the regression over a fixed design.
#[derive(Debug, Clone)]
pub struct RegressionPosterior<'a> {
    design: &'a Design,
    family: Family,
    log_y: Vec<f64>,
    log1m_y: Vec<f64>,
}

impl<'a> RegressionPosterior<'a> {
    pub fn new(design: &'a Design, family: Family) -> Self {
        let effective = |y: f64| {
            if y == 0.0 && family == Family::Beta {
                BETA_ZERO_NUDGE
            } else {
                y
            }
        };
        RegressionPosterior {
            design,
            family,
            log_y: design.y.iter().map(|&y| log(effective(y))).collect(),
            log1m_y: design.y.iter().map(|&y| log1p(-effective(y))).collect(),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn design(&self) -> &Design {
        self.design
    }

    /// Log likelihood only (no prior), with gradient accumulated into `grad`.
    pub fn log_likelihood_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64> {
        let p = self.design.n_cov;
        let (b_mu, rest) = position.split_at(p);
        let (b_phi, b_alpha) = rest.split_at(p);
        let (g_mu, g_rest) = grad.split_at_mut(p);
        let (g_phi, g_alpha) = g_rest.split_at_mut(p);
        let zero_inflated = self.family == Family::ZeroInflatedBeta;

        let mut total = 0.0;
        for (i, x) in self.design.rows().enumerate() {
            let y = self.design.y[i];
            let mut eta_mu = 0.0;
            let mut eta_phi = 0.0;
            let mut eta_alpha = 0.0;
            for j in 0..p {
                eta_mu += x[j] * b_mu[j];
                eta_phi += x[j] * b_phi[j];
                if zero_inflated {
                    eta_alpha += x[j] * b_alpha[j];
                }
            }

            if zero_inflated && y == 0.0 {
                total += log_logistic(eta_alpha);
                let d_alpha = logistic(-eta_alpha);
                for j in 0..p {
                    g_alpha[j] += d_alpha * x[j];
                }
                continue;
            }

            let mut d_alpha = 0.0;
            if zero_inflated {
                total += log_logistic(-eta_alpha);
                d_alpha = -logistic(eta_alpha);
            }

            let mu = logistic(eta_mu);
            let one_minus_mu = logistic(-eta_mu);
            let phi = exp(eta_phi);
            let a = mu * phi;
            let b = one_minus_mu * phi;
            let (ly, l1y) = (self.log_y[i], self.log1m_y[i]);
            let ll = ln_gamma(phi) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * ly + (b - 1.0) * l1y;
            let psi_a = digamma(a);
            let psi_b = digamma(b);
            let d_mu = phi * (psi_b - psi_a + ly - l1y) * mu * one_minus_mu;
            let d_phi =
                (digamma(phi) + mu * (ly - psi_a) + one_minus_mu * (l1y - psi_b)) * phi;
            if !(ll.is_finite() && d_mu.is_finite() && d_phi.is_finite()) {
                return Err(Error::NumericDomain(format!(
                    "non-finite Beta term at row {i} (mu = {mu}, phi = {phi})"
                )));
            }
            total += ll;
            for j in 0..p {
                g_mu[j] += d_mu * x[j];
                g_phi[j] += d_phi * x[j];
                if zero_inflated {
                    g_alpha[j] += d_alpha * x[j];
                }
            }
        }
        Ok(total)
    }
}

impl LogDensity for RegressionPosterior<'_> {
    fn dim(&self) -> usize {
        self.design.n_cov * self.family.n_links()
    }

    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64> {
        if position.len() != self.dim() || grad.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: position.len(),
            });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        // `split_at` needs all three blocks; pad the Beta family with an
        // empty α block.
        let value = if self.family == Family::Beta {
            let p = self.design.n_cov;
            let mut padded = Vec::with_capacity(3 * p);
            padded.extend_from_slice(position);
            padded.resize(3 * p, 0.0);
            let mut g = alloc::vec![0.0; 3 * p];
            let v = self.log_likelihood_grad(&padded, &mut g)?;
            grad.copy_from_slice(&g[..2 * p]);
            v
        } else {
            self.log_likelihood_grad(position, grad)?
        };
        let prior = log_prior(self.family, self.design.n_cov, position, grad);
        let total = value + prior;
        if !total.is_finite() {
            return Err(Error::NumericDomain("log posterior is not finite".into()));
        }
        Ok(total)
    }
}

//! Fitting, prediction and predictive checks for the regression.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::design::{Design, Standardizer};
use crate::bayes::diagnostics::{diagnose, DiagnosticsReport, MIN_DRAWS};
use crate::bayes::hmc::{hmc_sample, HmcConfig, Samples};
use crate::bayes::posterior::{Family, RegressionPosterior, BETA_ZERO_NUDGE};
use crate::bayes::zib::{sample_beta, sample_zib};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::math::{beta_ln_pdf, ln_beta_inc_reg, log_logistic, log_sum_exp, logistic};
use crate::stats::quantile_sorted;

pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub hmc: HmcConfig,
    #[serde(default)]
    pub family: Family,
    /// Adds a constant column in front of the standardized covariates.
    #[serde(default = "intercept_default")]
    pub intercept: bool,
}

fn intercept_default() -> bool {
    true
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            hmc: HmcConfig::default(),
            family: Family::ZeroInflatedBeta,
            intercept: intercept_default(),
        }
    }
}

/// Link-scale parameters of one coefficient draw at one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkValues {
    pub mu: f64,
    pub phi: f64,
    pub alpha: f64,
}

/// Evaluates the three links at standardized row `x`.
pub fn links(family: Family, coef: &[f64], x: &[f64]) -> LinkValues {
    let p = x.len();
    let dot = |block: usize| -> f64 {
        coef[block * p..(block + 1) * p]
            .iter()
            .zip(x)
            .map(|(b, v)| b * v)
            .sum()
    };
    let alpha = match family {
        Family::ZeroInflatedBeta => logistic(dot(2)),
        Family::Beta => 0.0,
    };
    LinkValues {
        mu: logistic(dot(0)),
        phi: exp(dot(1)),
        alpha,
    }
}

/// Log predictive density of `y` under one coefficient draw.
///
/// The plain Beta family has no point mass, so a zero is scored by the
/// probability of falling below the nudge it was fitted with.
pub fn draw_log_density(family: Family, coef: &[f64], x: &[f64], y: f64) -> f64 {
    let p = x.len();
    let dot = |block: usize| -> f64 {
        coef[block * p..(block + 1) * p]
            .iter()
            .zip(x)
            .map(|(b, v)| b * v)
            .sum()
    };
    let eta_mu = dot(0);
    let phi = exp(dot(1));
    let a = logistic(eta_mu) * phi;
    let b = logistic(-eta_mu) * phi;
    match family {
        Family::ZeroInflatedBeta => {
            let eta_alpha = dot(2);
            if y == 0.0 {
                log_logistic(eta_alpha)
            } else {
                log_logistic(-eta_alpha) + beta_ln_pdf(y, a, b)
            }
        }
        Family::Beta => {
            if y <= BETA_ZERO_NUDGE {
                ln_beta_inc_reg(a, b, BETA_ZERO_NUDGE)
            } else {
                beta_ln_pdf(y, a, b)
            }
        }
    }
}

fn sample_outcome<R: Rng + ?Sized>(rng: &mut R, family: Family, l: LinkValues) -> f64 {
    match family {
        Family::ZeroInflatedBeta => sample_zib(rng, l.mu, l.phi, l.alpha),
        Family::Beta => sample_beta(rng, l.mu * l.phi, (1.0 - l.mu) * l.phi),
    }
}

/// Predictive distribution of BRE at one covariate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub samples: Vec<f64>,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub zero_probability: f64,
}

impl PredictiveDistribution {
    pub fn from_samples(samples: Vec<f64>, zero_probability: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no predictive samples".into()));
        }
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(PredictiveDistribution {
            median: quantile_sorted(&sorted, 0.5),
            q05: quantile_sorted(&sorted, 0.05),
            q95: quantile_sorted(&sorted, 0.95),
            samples,
            zero_probability,
        })
    }
}

/// Posterior draws of the regression together with the transform that
/// produced its design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZibPosterior {
    pub config: FitConfig,
    pub standardizer: Standardizer,
    /// Names of the design columns, intercept first when present.
    pub columns: Vec<String>,
    pub samples: Samples,
    pub diagnostics: Option<DiagnosticsReport>,
}

/// Names of every coefficient in `[β_μ | β_φ | β_α]` order.
pub fn parameter_names(family: Family, columns: &[String]) -> Vec<String> {
    let blocks: &[&str] = match family {
        Family::ZeroInflatedBeta => &["mu", "phi", "alpha"],
        Family::Beta => &["mu", "phi"],
    };
    blocks
        .iter()
        .flat_map(|b| columns.iter().map(move |c| alloc::format!("beta_{b}[{c}]")))
        .collect()
}

/// Samples the posterior of an already standardized design.
pub fn sample_design<E: Executor>(
    design: &Design,
    family: Family,
    cfg: &HmcConfig,
    names: &[String],
    exec: &E,
) -> Result<(Samples, Option<DiagnosticsReport>)> {
    let target = RegressionPosterior::new(design, family);
    let samples = match hmc_sample(&target, cfg, exec) {
        Err(Error::SamplerFailure { message, .. }) => {
            return Err(Error::SamplerFailure {
                message,
                diagnostics: None,
            })
        }
        other => other?,
    };
    let report = if samples.n_chains() >= 2 && samples.n_draws() >= MIN_DRAWS {
        Some(diagnose(&samples, &parameter_names(family, names))?)
    } else {
        log::warn!("too few chains or draws for convergence diagnostics");
        None
    };
    if let Some(r) = &report {
        if !r.pass.all() {
            log::warn!(
                "diagnostics flagged: max R-hat {:.4}, min ESS ratio {:.3}, {} divergences",
                r.max_rhat(),
                r.min_ess_ratio(),
                r.divergence_count
            );
        }
    }
    Ok((samples, report))
}

/// Standardizes raw covariate rows and samples the regression posterior.
pub fn fit_regression<E: Executor>(
    names: &[String],
    rows: &[Vec<f64>],
    targets: &[f64],
    cfg: &FitConfig,
    exec: &E,
) -> Result<ZibPosterior> {
    if rows.len() != targets.len() {
        return Err(Error::Shape {
            expected: rows.len(),
            actual: targets.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let standardizer = Standardizer::fit(names, rows)?;
    let mut columns = Vec::new();
    if cfg.intercept {
        columns.push(INTERCEPT_NAME.to_string());
    }
    columns.extend(standardizer.kept_names());
    let mut design = Design::new(columns.len());
    for (row, &y) in rows.iter().zip(targets) {
        let x = design_row(&standardizer, cfg.intercept, row)?;
        design.push(&x, y)?;
    }
    let (samples, diagnostics) = sample_design(&design, cfg.family, &cfg.hmc, &columns, exec)?;
    Ok(ZibPosterior {
        config: cfg.clone(),
        standardizer,
        columns,
        samples,
        diagnostics,
    })
}

fn design_row(standardizer: &Standardizer, intercept: bool, raw: &[f64]) -> Result<Vec<f64>> {
    let z = standardizer.transform(raw)?;
    if !intercept {
        return Ok(z);
    }
    let mut x = Vec::with_capacity(z.len() + 1);
    x.push(1.0);
    x.extend(z);
    Ok(x)
}

impl ZibPosterior {
    pub fn family(&self) -> Family {
        self.config.family
    }

    /// Raw covariate names expected by [`ZibPosterior::predict`].
    pub fn input_names(&self) -> &[String] {
        &self.standardizer.names
    }

    /// Maps a raw covariate row onto the design scale.
    pub fn standardize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        design_row(&self.standardizer, self.config.intercept, raw)
    }

    /// Design matrix of raw rows on this posterior's scale.
    pub fn design(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<Design> {
        if rows.len() != targets.len() {
            return Err(Error::Shape {
                expected: rows.len(),
                actual: targets.len(),
            });
        }
        let mut design = Design::new(self.columns.len());
        for (row, &y) in rows.iter().zip(targets) {
            design.push(&design_row(&self.standardizer, self.config.intercept, row)?, y)?;
        }
        Ok(design)
    }

    /// Predictive distribution at a raw covariate row.
    pub fn predict(&self, raw: &[f64], seed: u64) -> Result<PredictiveDistribution> {
        let x = self.standardize(raw)?;
        self.predict_standardized(&x, seed)
    }

    /// Pushes every coefficient draw through the links and samples one BRE
    /// per draw.
    pub fn predict_standardized(&self, x: &[f64], seed: u64) -> Result<PredictiveDistribution> {
        if x.len() != self.columns.len() {
            return Err(Error::Shape {
                expected: self.columns.len(),
                actual: x.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = self.family();
        let mut samples = Vec::with_capacity(self.samples.total_draws());
        let mut alpha_sum = 0.0;
        for coef in self.samples.iter_draws() {
            let l = links(family, coef, x);
            alpha_sum += l.alpha;
            samples.push(sample_outcome(&mut rng, family, l));
        }
        let zero_probability = alpha_sum / samples.len().max(1) as f64;
        PredictiveDistribution::from_samples(samples, zero_probability)
    }

    /// `ln (1/S) Σ_s p(y | x, θ_s)` at a standardized row.
    pub fn log_predictive_density(&self, x: &[f64], y: f64) -> Result<f64> {
        if x.len() != self.columns.len() {
            return Err(Error::Shape {
                expected: self.columns.len(),
                actual: x.len(),
            });
        }
        let family = self.family();
        let terms: Vec<f64> = self
            .samples
            .iter_draws()
            .map(|coef| draw_log_density(family, coef, x, y))
            .collect();
        let value = log_sum_exp(&terms) - log(terms.len() as f64);
        if value.is_nan() {
            return Err(Error::NumericDomain("log predictive density is NaN".into()));
        }
        Ok(value)
    }

    /// Sum of log predictive densities over a standardized design.
    pub fn elpd(&self, design: &Design) -> Result<f64> {
        let mut total = 0.0;
        for (i, x) in design.rows().enumerate() {
            total += self.log_predictive_density(x, design.y[i])?;
        }
        Ok(total)
    }

    /// Posterior medians of every coefficient.
    pub fn coefficient_medians(&self) -> Vec<f64> {
        (0..self.samples.dim)
            .map(|j| crate::stats::median(&self.samples.coordinate(j).concat()))
            .collect()
    }
}

/// Draws coefficients from the priors and samples one BRE per row for each.
/// Output is `n_draws × rows`, draw-major.
pub fn prior_predictive(design: &Design, family: Family, n_draws: usize, seed: u64) -> Vec<f64> {
    let p = design.n_cov;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
    let mut out = Vec::with_capacity(n_draws * design.n_rows());
    let mut coef = vec![0.0; 3 * p];
    for _ in 0..n_draws {
        for (k, c) in coef.iter_mut().enumerate() {
            *c = if k / p.max(1) == 1 {
                cauchy.sample(&mut rng)
            } else {
                StandardNormal.sample(&mut rng)
            };
        }
        for x in design.rows() {
            out.push(sample_outcome(&mut rng, family, links(family, &coef, x)));
        }
    }
    out
}

/// One BRE per row for every retained coefficient draw, draw-major.
pub fn posterior_predictive(posterior: &ZibPosterior, design: &Design, seed: u64) -> Result<Vec<f64>> {
    if design.n_cov != posterior.columns.len() {
        return Err(Error::Shape {
            expected: posterior.columns.len(),
            actual: design.n_cov,
        });
    }
    let family = posterior.family();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(posterior.samples.total_draws() * design.n_rows());
    for coef in posterior.samples.iter_draws() {
        for x in design.rows() {
            out.push(sample_outcome(&mut rng, family, links(family, coef, x)));
        }
    }
    Ok(out)
}

/// Fits on `train` and scores the held-out `test` rows. Both designs must
/// already be on the same standardized scale.
pub fn elpd_holdout<E: Executor>(
    train: &Design,
    test: &Design,
    cfg: &FitConfig,
    exec: &E,
) -> Result<f64> {
    let columns: Vec<String> = (0..train.n_cov).map(|j| alloc::format!("x{j}")).collect();
    let (samples, diagnostics) = sample_design(train, cfg.family, &cfg.hmc, &columns, exec)?;
    let posterior = ZibPosterior {
        config: cfg.clone(),
        standardizer: Standardizer::identity(&columns),
        columns,
        samples,
        diagnostics,
    };
    posterior.elpd(test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn toy_design(n: usize, seed: u64) -> Design {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Design::new(2);
        for _ in 0..n {
            let x = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            let l = links(Family::ZeroInflatedBeta, &[0.5, -0.3, 1.0, 0.5, -0.5, 0.0], &x);
            let y = sample_zib(&mut rng, l.mu, l.phi, l.alpha);
            d.push(&x, y).unwrap();
        }
        d
    }

    #[test]
    fn prior_predictive_support_and_determinism() {
        let d = toy_design(20, 1);
        let a = prior_predictive(&d, Family::ZeroInflatedBeta, 50, 9);
        assert!(a.iter().all(|y| (0.0..1.0).contains(y)));
        assert_eq!(a, prior_predictive(&d, Family::ZeroInflatedBeta, 50, 9));
    }

    #[test]
    fn duplicated_test_set_doubles_elpd() {
        let train = toy_design(150, 2);
        let test = toy_design(20, 3);
        let mut doubled = test.clone();
        for i in 0..test.n_rows() {
            doubled.push(test.row(i), test.y[i]).unwrap();
        }
        let cfg = FitConfig {
            hmc: HmcConfig {
                chains: 2,
                warmup: 200,
                draws: 200,
                ..HmcConfig::default()
            },
            ..FitConfig::default()
        };
        let a = elpd_holdout(&train, &test, &cfg, &Sequential).unwrap();
        let b = elpd_holdout(&train, &doubled, &cfg, &Sequential).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn quantiles_are_ordered() {
        let pd = PredictiveDistribution::from_samples(vec![0.0, 0.3, 0.1, 0.9, 0.2], 0.2).unwrap();
        assert!(pd.q05 <= pd.median && pd.median <= pd.q95);
    }
}

//! Zero-inflated Beta regression sampled with Hamiltonian Monte Carlo.
//!
//! `BRE_i ~ ZIB(μ_i, φ_i, α_i)` with `logit μ_i = x_i·β_μ`,
//! `log φ_i = x_i·β_φ`, `logit α_i = x_i·β_α`, and priors
//! `β_μ, β_α ~ Normal(0, 1)`, `β_φ ~ Cauchy(0, 1)`.

pub mod design;
pub mod diagnostics;
pub mod hmc;
pub mod model;
pub mod posterior;
pub mod zib;

pub use design::{Design, Standardizer};
pub use diagnostics::{diagnose, DiagnosticsReport, PassFlags};
pub use hmc::{hmc_sample, ChainDraws, HmcConfig, Samples};
pub use model::{
    elpd_holdout, fit_regression, posterior_predictive, prior_predictive, FitConfig,
    PredictiveDistribution, ZibPosterior,
};
pub use posterior::{Family, LogDensity, RegressionPosterior};
pub use zib::zib_logpdf;

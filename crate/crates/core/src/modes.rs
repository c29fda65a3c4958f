//! Global, global-iterative and dynamic prediction modes.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::model::{fit_regression, FitConfig, PredictiveDistribution, ZibPosterior};
use crate::cluster::{classify_partial, ClusterModel, PatternLabel};
use crate::data::{epic_outcome, Dataset, PredictorVector, MILESTONES};
use crate::error::{Error, Result};
use crate::exec::Executor;

pub const MILESTONE_COLUMN: &str = "milestone";
pub const DSP_COLUMN: &str = "dsp";
pub const PATTERN_COLUMN: &str = "pattern";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Global,
    #[serde(rename = "global-iter")]
    GlobalIterative,
    Dynamic,
    #[serde(rename = "dynamic-nopatterns")]
    DynamicNoPatterns,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::Global,
        Mode::GlobalIterative,
        Mode::Dynamic,
        Mode::DynamicNoPatterns,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Global => "global",
            Mode::GlobalIterative => "global-iter",
            Mode::Dynamic => "dynamic",
            Mode::DynamicNoPatterns => "dynamic-nopatterns",
        }
    }

    pub fn needs_clusters(&self) -> bool {
        *self == Mode::Dynamic
    }

    /// Ordered covariate names the mode trains on.
    pub fn schema(&self) -> Vec<String> {
        let mut names: Vec<String> = PredictorVector::NAMES.iter().map(|s| s.to_string()).collect();
        match self {
            Mode::Global | Mode::GlobalIterative => names.push(DSP_COLUMN.into()),
            Mode::DynamicNoPatterns => {
                names.push(MILESTONE_COLUMN.into());
                names.push(DSP_COLUMN.into());
            }
            Mode::Dynamic => {
                names.push(MILESTONE_COLUMN.into());
                names.push(DSP_COLUMN.into());
                names.push(PATTERN_COLUMN.into());
            }
        }
        names
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Mode::Global),
            "global-iter" | "global-iterative" => Ok(Mode::GlobalIterative),
            "dynamic" => Ok(Mode::Dynamic),
            "dynamic-nopatterns" => Ok(Mode::DynamicNoPatterns),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// One design row before standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateRow {
    pub epic_id: String,
    pub milestone: u8,
    pub values: Vec<f64>,
    pub target: f64,
}

fn check_milestone(m: usize) -> Result<()> {
    if !(1..=MILESTONES).contains(&m) {
        return Err(Error::invalid(format!("milestone must be in 1..=10, got {m}")));
    }
    Ok(())
}

/// Pattern covariate at milestone `m`: the label of the DSP prefix over
/// milestones `1..m−1`, or `NaN` (imputed to the training mean) while
/// fewer than two milestones have been seen.
pub fn pattern_covariate(dsp: &[u32; MILESTONES], m: usize, clusters: &ClusterModel) -> f64 {
    match classify_partial(&dsp[..m - 1], clusters) {
        PatternLabel::Unavailable => f64::NAN,
        PatternLabel::Label(l) => l as f64,
    }
}

/// Raw covariates of `epic_id` at milestone `m` under `mode`.
pub fn covariates_at(
    dataset: &Dataset,
    mode: Mode,
    clusters: Option<&ClusterModel>,
    epic_id: &str,
    m: usize,
) -> Result<Vec<f64>> {
    check_milestone(m)?;
    let at = match mode {
        Mode::Global => 1,
        _ => m,
    };
    let snap = dataset.require_snapshot(epic_id, at as u8)?;
    let mut values: Vec<f64> = snap.predictors.to_array().to_vec();
    if matches!(mode, Mode::Dynamic | Mode::DynamicNoPatterns) {
        values.push(m as f64);
    }
    values.push(snap.dsp_raw as f64);
    if mode == Mode::Dynamic {
        let clusters = clusters.ok_or_else(|| Error::invalid("dynamic mode needs a cluster model"))?;
        let epic = dataset
            .epic(epic_id)
            .ok_or_else(|| Error::invalid(format!("unknown epic {epic_id}")))?;
        let mut dsp = [0u32; MILESTONES];
        for (j, d) in dsp.iter_mut().enumerate() {
            *d = dataset.require_snapshot(&epic.epic_id, (j + 1) as u8)?.dsp_raw;
        }
        values.push(pattern_covariate(&dsp, m, clusters));
    }
    Ok(values)
}

/// Training rows: one per epic for the global modes, one per (epic,
/// milestone) for the dynamic ones. The target is the epic's final BRE.
pub fn build_rows(
    dataset: &Dataset,
    mode: Mode,
    clusters: Option<&ClusterModel>,
) -> Result<Vec<CovariateRow>> {
    if mode.needs_clusters() && clusters.is_none() {
        return Err(Error::invalid("dynamic mode needs a cluster model"));
    }
    let milestones: &[usize] = match mode {
        Mode::Global | Mode::GlobalIterative => &[1],
        Mode::Dynamic | Mode::DynamicNoPatterns => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    };
    let train_mode = if mode == Mode::GlobalIterative {
        Mode::Global
    } else {
        mode
    };
    let mut rows = Vec::with_capacity(dataset.len() * milestones.len());
    for epic in dataset.epics() {
        let target = epic_outcome(epic)?.bre;
        for &m in milestones {
            rows.push(CovariateRow {
                epic_id: epic.epic_id.clone(),
                milestone: m as u8,
                values: covariates_at(dataset, train_mode, clusters, &epic.epic_id, m)?,
                target,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub mode: Mode,
    pub schema: Vec<String>,
    pub posterior: ZibPosterior,
    pub cluster_model: Option<ClusterModel>,
    /// Pattern-free model used by [`Mode::Dynamic`] while no pattern is
    /// available, so both dynamic variants agree at milestones 1–2.
    pub fallback: Option<Box<FittedModel>>,
    /// Set when convergence diagnostics failed or could not be computed.
    pub flagged: bool,
    pub seed: u64,
}

/// Fits `mode` on `train`. A dynamic fit also fits its pattern-free
/// fallback with the same seed.
pub fn fit<E: Executor>(
    mode: Mode,
    train: &Dataset,
    clusters: Option<&ClusterModel>,
    cfg: &FitConfig,
    seed: u64,
    exec: &E,
) -> Result<FittedModel> {
    let fallback = if mode == Mode::Dynamic {
        Some(fit(Mode::DynamicNoPatterns, train, None, cfg, seed, exec)?)
    } else {
        None
    };
    fit_with_fallback(mode, train, clusters, cfg, seed, fallback, exec)
}

/// Like [`fit`] but reuses an already fitted pattern-free model as the
/// dynamic fallback.
pub fn fit_with_fallback<E: Executor>(
    mode: Mode,
    train: &Dataset,
    clusters: Option<&ClusterModel>,
    cfg: &FitConfig,
    seed: u64,
    fallback: Option<FittedModel>,
    exec: &E,
) -> Result<FittedModel> {
    let rows = build_rows(train, mode, clusters)?;
    let schema = mode.schema();
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let mut cfg = cfg.clone();
    cfg.hmc.seed = seed;
    let posterior = fit_regression(&schema, &x, &y, &cfg, exec)
        .map_err(|e| e.context(format!("fitting {mode} model")))?;
    let flagged = posterior
        .diagnostics
        .as_ref()
        .is_none_or(|d| !d.pass.all());
    if let Some(f) = &fallback {
        if f.mode != Mode::DynamicNoPatterns {
            return Err(Error::invalid("fallback must be a dynamic-nopatterns model"));
        }
    }
    Ok(FittedModel {
        mode,
        schema,
        posterior,
        cluster_model: if mode.needs_clusters() { clusters.cloned() } else { None },
        fallback: if mode == Mode::Dynamic { fallback.map(Box::new) } else { None },
        flagged,
        seed,
    })
}

/// FNV-1a over the bit patterns of a covariate row, so identical inputs get
/// identical predictive draws.
fn row_seed(base: u64, values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base;
    for v in values {
        // NaN payloads vary; all NaNs hash alike.
        let bits = if v.is_nan() { f64::NAN.to_bits() } else { v.to_bits() };
        for b in bits.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl FittedModel {
    /// Predicts from raw covariates given under `names`, which must match
    /// the training schema exactly.
    pub fn predict_covariates(&self, names: &[String], values: &[f64]) -> Result<PredictiveDistribution> {
        if names != self.schema.as_slice() {
            return Err(Error::Schema(format!(
                "covariates {names:?} do not match the {} schema {:?}",
                self.mode, self.schema
            )));
        }
        if values.len() != names.len() {
            return Err(Error::Shape {
                expected: names.len(),
                actual: values.len(),
            });
        }
        self.posterior.predict(values, row_seed(self.seed, values))
    }

    /// Raw covariates this model would use for `epic_id` at milestone `m`.
    pub fn covariates_at(&self, dataset: &Dataset, epic_id: &str, m: usize) -> Result<Vec<f64>> {
        covariates_at(dataset, self.mode, self.cluster_model.as_ref(), epic_id, m)
    }

    /// Predictive distribution of the final BRE of `epic_id` at milestone `m`.
    pub fn predict_at(&self, dataset: &Dataset, epic_id: &str, m: usize) -> Result<PredictiveDistribution> {
        let values = self.covariates_at(dataset, epic_id, m)?;
        if self.mode == Mode::Dynamic && values.last().is_some_and(|p| p.is_nan()) {
            if let Some(fallback) = &self.fallback {
                return fallback.predict_at(dataset, epic_id, m);
            }
        }
        self.predict_covariates(&self.schema, &values)
    }
}

//! Time-ordered cross-validation, accuracy measures and mode comparisons.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::fabs;
use serde::{Deserialize, Serialize};

use crate::bayes::model::{FitConfig, PredictiveDistribution};
use crate::cluster::{cluster_auto, ClusterModel, DelayProfile};
use crate::data::{Dataset, MILESTONES};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::modes::{fit, fit_with_fallback, FittedModel, Mode};
use crate::stats::sorted_copy;

pub use crate::stats::{a12, wilcoxon_signed_rank};

/// Floor of the RWidth90 denominator.
pub const RWIDTH_EPSILON: f64 = 0.01;

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::invalid("MAE of an empty sample"));
    }
    let total: f64 = actual.iter().zip(predicted).map(|(a, p)| fabs(a - p)).sum();
    Ok(total / actual.len() as f64)
}

/// Expected MAE of guessing each case with a uniformly drawn other case:
/// `(1/n) Σ_i (1/(n−1)) Σ_{j≠i} |y_j − y_i|`, computed from the gaps
/// between sorted values in `O(n log n)`.
pub fn mae_rg_exact(actuals: &[f64]) -> Result<f64> {
    let n = actuals.len();
    if n < 2 {
        return Err(Error::invalid("MAE of random guessing needs at least two cases"));
    }
    let sorted = sorted_copy(actuals);
    // Each gap between neighbours is crossed by k·(n − k) pairs.
    let pair_sum: f64 = sorted
        .windows(2)
        .enumerate()
        .map(|(i, w)| (w[1] - w[0]) * ((i + 1) * (n - i - 1)) as f64)
        .sum();
    let nf = n as f64;
    Ok(2.0 * pair_sum / (nf * (nf - 1.0)))
}

/// Standardized accuracy `(1 − MAE / MAE_rg)·100`.
pub fn sa(mae_model: f64, mae_rg: f64) -> Result<f64> {
    if mae_rg == 0.0 {
        return Err(Error::UndefinedSa);
    }
    Ok((1.0 - mae_model / mae_rg) * 100.0)
}

/// Relative width of the 90% interval, `(q95 − q05) / max(median, ε)`.
pub fn rwidth90(pred: &PredictiveDistribution) -> f64 {
    (pred.q95 - pred.q05) / pred.median.max(RWIDTH_EPSILON)
}

/// Folds of epics ordered by actual start date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<String>>,
}

/// One training/test split of a [`FoldPlan`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    /// 1-based; split `k` trains on folds `1..=k`.
    pub index: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl FoldPlan {
    pub fn splits(&self) -> Vec<Split> {
        (1..self.folds.len())
            .map(|k| Split {
                index: k,
                train: self.folds[..k].concat(),
                test: self.folds[k].clone(),
            })
            .collect()
    }
}

/// Sorts by actual start (ties by id) and cuts into `folds` contiguous,
/// near-equal folds; the first `n mod folds` folds get one extra epic.
pub fn time_cv_splits(dataset: &Dataset, folds: usize) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(Error::invalid("time-based cross-validation needs at least 2 folds"));
    }
    if dataset.len() < folds {
        return Err(Error::invalid(format!(
            "{} epics cannot fill {folds} folds",
            dataset.len()
        )));
    }
    let mut order: Vec<(chrono::NaiveDate, &str)> = Vec::with_capacity(dataset.len());
    for e in dataset.epics() {
        let start = e.actual_start.ok_or_else(|| {
            Error::invalid(format!("epic {} has no actual start date", e.epic_id))
        })?;
        order.push((start, e.epic_id.as_str()));
    }
    order.sort();
    let n = order.len();
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut it = order.into_iter();
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(it.by_ref().take(size).map(|(_, id)| id.to_string()).collect());
    }
    Ok(FoldPlan { folds: out })
}

/// Point and interval summary of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub split: usize,
    pub model: String,
    pub epic_id: String,
    pub milestone: u8,
    pub actual: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub zero_probability: f64,
}

impl PredictionRecord {
    pub fn abs_error(&self) -> f64 {
        fabs(self.actual - self.median)
    }

    pub fn rwidth90(&self) -> f64 {
        (self.q95 - self.q05) / self.median.max(RWIDTH_EPSILON)
    }
}

/// Anything that can be trained on one split and predict its test epics at
/// every milestone.
pub trait Estimator: Sync {
    /// Model names this estimator reports, in output order.
    fn names(&self) -> Vec<String>;

    /// Fits on `train` and returns predictions for every test epic and
    /// milestone. `dataset` holds both sets; only `train` may inform the fit.
    fn fit_predict(
        &self,
        dataset: &Dataset,
        split: &Split,
        seed: u64,
    ) -> Result<Vec<PredictionRecord>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub folds: usize,
    pub fit: FitConfig,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let mut fit = FitConfig::default();
        fit.hmc.chains = 2;
        fit.hmc.warmup = 300;
        fit.hmc.draws = 300;
        BenchmarkConfig {
            folds: 10,
            fit,
            k_min: 1,
            k_max: 10,
            seed: 1,
        }
    }
}

/// Delay pattern model of a training set: elbow-selected clustering,
/// relabelled so that label 1 has the highest median BRE.
pub fn fit_clusters(train: &Dataset, k_min: usize, k_max: usize) -> Result<ClusterModel> {
    let outcomes = train.outcomes()?;
    let profiles: Vec<DelayProfile> = outcomes.iter().map(DelayProfile::from_outcome).collect();
    let model = cluster_auto(&profiles, k_min, k_max)?;
    let bre: BTreeMap<String, f64> = outcomes.iter().map(|o| (o.epic_id.clone(), o.bre)).collect();
    Ok(model.relabel_by_outcome(&bre))
}

/// The prediction modes as an [`Estimator`]. The global-iterative mode
/// reuses the global posterior and the dynamic mode reuses the
/// pattern-free fit as its fallback, so every posterior is fitted once.
#[derive(Debug, Clone)]
pub struct ModeSuite {
    pub modes: Vec<Mode>,
    pub fit: FitConfig,
    pub k_min: usize,
    pub k_max: usize,
}

impl ModeSuite {
    fn fit_models(&self, train: &Dataset, seed: u64) -> Result<Vec<(Mode, FittedModel)>> {
        let wants = |m: Mode| self.modes.contains(&m);
        let exec = Sequential;
        let global = if wants(Mode::Global) || wants(Mode::GlobalIterative) {
            Some(fit(Mode::Global, train, None, &self.fit, seed, &exec)?)
        } else {
            None
        };
        let no_patterns = if wants(Mode::Dynamic) || wants(Mode::DynamicNoPatterns) {
            Some(fit(Mode::DynamicNoPatterns, train, None, &self.fit, seed, &exec)?)
        } else {
            None
        };
        let dynamic = if wants(Mode::Dynamic) {
            let clusters = fit_clusters(train, self.k_min, self.k_max)?;
            Some(fit_with_fallback(
                Mode::Dynamic,
                train,
                Some(&clusters),
                &self.fit,
                seed,
                no_patterns.clone(),
                &exec,
            )?)
        } else {
            None
        };
        let mut out = Vec::new();
        for &mode in &self.modes {
            let model = match mode {
                Mode::Global => global.clone(),
                Mode::GlobalIterative => global.clone().map(|g| FittedModel {
                    mode: Mode::GlobalIterative,
                    ..g
                }),
                Mode::DynamicNoPatterns => no_patterns.clone(),
                Mode::Dynamic => dynamic.clone(),
            };
            out.push((mode, model.expect("fitted above")));
        }
        Ok(out)
    }
}

impl Estimator for ModeSuite {
    fn names(&self) -> Vec<String> {
        self.modes.iter().map(|m| m.as_str().to_string()).collect()
    }

    fn fit_predict(&self, dataset: &Dataset, split: &Split, seed: u64) -> Result<Vec<PredictionRecord>> {
        let train = dataset.subset(&split.train)?;
        let models = self.fit_models(&train, seed)?;
        let mut out = Vec::with_capacity(models.len() * split.test.len() * MILESTONES);
        for (mode, model) in &models {
            if model.flagged {
                log::warn!("split {}: {mode} model did not pass diagnostics", split.index);
            }
            for epic_id in &split.test {
                let actual = crate::data::epic_outcome(
                    dataset
                        .epic(epic_id)
                        .ok_or_else(|| Error::invalid(format!("unknown epic {epic_id}")))?,
                )?
                .bre;
                for m in 1..=MILESTONES {
                    let pred = model
                        .predict_at(dataset, epic_id, m)
                        .map_err(|e| e.context(format!("mode {mode}, milestone {m}")))?;
                    out.push(PredictionRecord {
                        split: split.index,
                        model: mode.as_str().to_string(),
                        epic_id: epic_id.clone(),
                        milestone: m as u8,
                        actual,
                        median: pred.median,
                        q05: pred.q05,
                        q95: pred.q95,
                        zero_probability: pred.zero_probability,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Accuracy of one model at one milestone; `split = None` pools all splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub split: Option<usize>,
    pub model: String,
    pub milestone: u8,
    pub n: usize,
    pub mae: f64,
    pub mae_rg: f64,
    /// `None` when every actual is equal.
    pub sa: Option<f64>,
    pub mean_rwidth90: f64,
}

/// Paired comparison of two models at one milestone over pooled test epics.
/// `a12 > 0.5` means `model_a` has the larger absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub milestone: u8,
    pub model_a: String,
    pub model_b: String,
    pub mae_a: f64,
    pub mae_b: f64,
    /// `None` when fewer than five pairs differ.
    pub wilcoxon_p: Option<f64>,
    pub a12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub models: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub predictions: Vec<PredictionRecord>,
}

impl BenchmarkResult {
    pub fn pooled(&self, model: &str, milestone: u8) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.split.is_none() && r.model == model && r.milestone == milestone)
    }

    pub fn comparison(&self, a: &str, b: &str, milestone: u8) -> Option<&ComparisonRow> {
        self.comparisons
            .iter()
            .find(|c| c.milestone == milestone && c.model_a == a && c.model_b == b)
    }
}

fn split_seed(seed: u64, split: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(split as u64)
}

fn summarize(split: Option<usize>, model: &str, milestone: u8, recs: &[&PredictionRecord]) -> Result<ResultRow> {
    let actual: Vec<f64> = recs.iter().map(|r| r.actual).collect();
    let predicted: Vec<f64> = recs.iter().map(|r| r.median).collect();
    let mae_v = mae(&actual, &predicted)?;
    let mae_rg = if actual.len() >= 2 { mae_rg_exact(&actual)? } else { 0.0 };
    let sa_v = match sa(mae_v, mae_rg) {
        Ok(v) => Some(v),
        Err(Error::UndefinedSa) => None,
        Err(e) => return Err(e),
    };
    let mean_rwidth90 = recs.iter().map(|r| r.rwidth90()).sum::<f64>() / recs.len() as f64;
    Ok(ResultRow {
        split,
        model: model.to_string(),
        milestone,
        n: recs.len(),
        mae: mae_v,
        mae_rg,
        sa: sa_v,
        mean_rwidth90,
    })
}

/// Aggregates predictions into per-split and pooled accuracy rows and
/// pairwise comparisons.
pub fn aggregate(models: &[String], predictions: Vec<PredictionRecord>) -> Result<BenchmarkResult> {
    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    let splits: Vec<usize> = {
        let mut s: Vec<usize> = predictions.iter().map(|p| p.split).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    for &split in &splits {
        for model in models {
            for m in 1..=MILESTONES as u8 {
                let recs: Vec<&PredictionRecord> = predictions
                    .iter()
                    .filter(|p| p.split == split && &p.model == model && p.milestone == m)
                    .collect();
                if !recs.is_empty() {
                    rows.push(summarize(Some(split), model, m, &recs)?);
                }
            }
        }
    }
    // Errors keyed by (split, epic) so pairs line up across models.
    let mut errors: BTreeMap<(&str, u8), BTreeMap<(usize, &str), f64>> = BTreeMap::new();
    for p in &predictions {
        errors
            .entry((p.model.as_str(), p.milestone))
            .or_default()
            .insert((p.split, p.epic_id.as_str()), p.abs_error());
    }
    for model in models {
        for m in 1..=MILESTONES as u8 {
            let recs: Vec<&PredictionRecord> = predictions
                .iter()
                .filter(|p| &p.model == model && p.milestone == m)
                .collect();
            if !recs.is_empty() {
                rows.push(summarize(None, model, m, &recs)?);
            }
        }
    }
    for m in 1..=MILESTONES as u8 {
        for (i, a) in models.iter().enumerate() {
            for b in &models[i + 1..] {
                let (Some(ea), Some(eb)) = (errors.get(&(a.as_str(), m)), errors.get(&(b.as_str(), m))) else {
                    continue;
                };
                let mut xa = Vec::new();
                let mut xb = Vec::new();
                for (key, va) in ea {
                    if let Some(vb) = eb.get(key) {
                        xa.push(*va);
                        xb.push(*vb);
                    }
                }
                if xa.is_empty() {
                    continue;
                }
                let wilcoxon_p = match wilcoxon_signed_rank(&xa, &xb) {
                    Ok(p) => Some(p),
                    Err(Error::InsufficientData(_)) => None,
                    Err(e) => return Err(e),
                };
                comparisons.push(ComparisonRow {
                    milestone: m,
                    model_a: a.clone(),
                    model_b: b.clone(),
                    mae_a: crate::stats::mean(&xa),
                    mae_b: crate::stats::mean(&xb),
                    wilcoxon_p,
                    a12: a12(&xa, &xb)?,
                });
            }
        }
    }
    Ok(BenchmarkResult {
        models: models.to_vec(),
        rows,
        comparisons,
        predictions,
    })
}

/// Runs every estimator on every time-ordered split. Splits run through
/// `exec`; results are merged in split order.
pub fn run_estimators<E: Executor>(
    dataset: &Dataset,
    estimators: &[&dyn Estimator],
    folds: usize,
    seed: u64,
    exec: &E,
) -> Result<BenchmarkResult> {
    let plan = time_cv_splits(dataset, folds)?;
    let splits = plan.splits();
    let models: Vec<String> = estimators.iter().flat_map(|e| e.names()).collect();
    let per_split = exec.map(splits.len(), |i| {
        let split = &splits[i];
        let mut recs = Vec::new();
        for est in estimators {
            let mut r = est
                .fit_predict(dataset, split, split_seed(seed, split.index))
                .map_err(|e| e.context(format!("split {}", split.index)))?;
            recs.append(&mut r);
        }
        Ok(recs)
    });
    let mut predictions = Vec::new();
    for r in per_split {
        predictions.extend(r?);
    }
    aggregate(&models, predictions)
}

/// Benchmarks the given prediction modes under time-based cross-validation.
pub fn run_benchmark<E: Executor>(
    dataset: &Dataset,
    modes: &[Mode],
    config: &BenchmarkConfig,
    exec: &E,
) -> Result<BenchmarkResult> {
    if modes.is_empty() {
        return Err(Error::invalid("no modes to benchmark"));
    }
    let suite = ModeSuite {
        modes: modes.to_vec(),
        fit: config.fit.clone(),
        k_min: config.k_min,
        k_max: config.k_max,
    };
    run_estimators(dataset, &[&suite], config.folds, config.seed, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::clean_dataset;
    use crate::synth::{generate, GeneratorConfig};
    use alloc::vec;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 0.0);
        assert!((mae(&[0.0, 0.5], &[0.1, 0.3]).unwrap() - 0.15).abs() < 1e-15);
        assert!(matches!(mae(&[0.0], &[0.0, 1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn mae_rg_examples() {
        assert!((mae_rg_exact(&[0.0, 0.5, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(mae_rg_exact(&[0.4; 5]).unwrap(), 0.0);
        assert!(mae_rg_exact(&[0.4]).is_err());
    }

    #[test]
    fn sa_examples() {
        assert_eq!(sa(0.0, 0.3).unwrap(), 100.0);
        assert_eq!(sa(0.3, 0.3).unwrap(), 0.0);
        assert!((sa(0.1, 0.4).unwrap() - 75.0).abs() < 1e-12);
        assert!(matches!(sa(0.1, 0.0), Err(Error::UndefinedSa)));
    }

    #[test]
    fn rwidth_examples() {
        let pd = |q05, median, q95| PredictiveDistribution {
            samples: vec![],
            median,
            q05,
            q95,
            zero_probability: 0.0,
        };
        assert!((rwidth90(&pd(0.05, 0.2, 0.25)) - 1.0).abs() < 1e-12);
        assert_eq!(rwidth90(&pd(0.1, 0.1, 0.1)), 0.0);
        assert!((rwidth90(&pd(0.0, 0.0, 0.02)) - 2.0).abs() < 1e-12);
    }

    fn dataset(n: usize) -> Dataset {
        let cfg = GeneratorConfig {
            n_epics: n,
            seed: 5,
            ..GeneratorConfig::default()
        };
        clean_dataset(&generate(&cfg).unwrap().0).unwrap()
    }

    #[test]
    fn folds_are_contiguous_and_ordered() {
        let d = dataset(20);
        let plan = time_cv_splits(&d, 10).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), d.len());
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let start = |id: &str| d.epic(id).unwrap().actual_start.unwrap();
        let splits = plan.splits();
        assert_eq!(splits.len(), 9);
        for s in &splits {
            let latest = s.train.iter().map(|id| start(id)).max().unwrap();
            let earliest = s.test.iter().map(|id| start(id)).min().unwrap();
            assert!(latest <= earliest);
        }
        for w in splits.windows(2) {
            assert!(w[1].train.starts_with(&w[0].train));
        }
        assert!(time_cv_splits(&d.subset(&plan.folds[0]).unwrap(), 10).is_err());
    }

    struct Oracle;

    impl Estimator for Oracle {
        fn names(&self) -> Vec<String> {
            vec!["oracle".into()]
        }

        fn fit_predict(&self, dataset: &Dataset, split: &Split, _seed: u64) -> Result<Vec<PredictionRecord>> {
            let mut out = Vec::new();
            for id in &split.test {
                let y = crate::data::epic_outcome(dataset.epic(id).unwrap())?.bre;
                for m in 1..=10 {
                    out.push(PredictionRecord {
                        split: split.index,
                        model: "oracle".into(),
                        epic_id: id.clone(),
                        milestone: m,
                        actual: y,
                        median: y,
                        q05: y,
                        q95: y,
                        zero_probability: 0.0,
                    });
                }
            }
            Ok(out)
        }
    }

    #[test]
    fn oracle_has_perfect_sa() {
        let d = dataset(80);
        let r = run_estimators(&d, &[&Oracle], 10, 1, &Sequential).unwrap();
        for row in &r.rows {
            if let Some(s) = row.sa {
                assert_eq!(s, 100.0);
            }
        }
        for m in 1..=10 {
            assert_eq!(r.pooled("oracle", m).unwrap().sa, Some(100.0));
        }
    }
}

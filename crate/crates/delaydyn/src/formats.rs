//! Tabular output formats of the evaluation and prediction commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use delaydyn_core::cluster::{CentroidBand, CharacterizationReport, ClusterModel, DelayProfile};
use delaydyn_core::eval::{BenchmarkResult, PredictionRecord};

use crate::error::Result;
use crate::io::{read_csv, write_csv};

pub const RESULTS_FILE: &str = "results.csv";
pub const COMPARISONS_FILE: &str = "comparisons.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const CHARACTERIZATION_FILE: &str = "characterization.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultCsvRow {
    pub split: String,
    pub mode: String,
    pub milestone: u8,
    pub n: usize,
    #[serde(rename = "MAE")]
    pub mae: f64,
    #[serde(rename = "SA")]
    pub sa: Option<f64>,
    pub mean_rwidth90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCsvRow {
    pub milestone: u8,
    pub mode_a: String,
    pub mode_b: String,
    pub wilcoxon_p: Option<f64>,
    pub a12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCsvRow {
    pub split: usize,
    pub mode: String,
    pub epic_id: String,
    pub milestone: u8,
    pub actual: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub zero_probability: f64,
}

/// Output of the `predict` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictCsvRow {
    pub epic_id: String,
    pub milestone: u8,
    pub mode: String,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub zero_probability: f64,
}

/// Draws for external density plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawCsvRow {
    pub draw_set_id: String,
    pub bre_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCsvRow {
    pub epic_id: String,
    pub cluster: usize,
    pub bre: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m6: f64,
    pub m7: f64,
    pub m8: f64,
    pub m9: f64,
    pub m10: f64,
}

impl ProfileCsvRow {
    pub fn new(profile: &DelayProfile, cluster: usize, bre: f64) -> Self {
        let v = &profile.values;
        ProfileCsvRow {
            epic_id: profile.epic_id.clone(),
            cluster,
            bre,
            m1: v[0],
            m2: v[1],
            m3: v[2],
            m4: v[3],
            m5: v[4],
            m6: v[5],
            m7: v[6],
            m8: v[7],
            m9: v[8],
            m10: v[9],
        }
    }

    pub fn profile(&self) -> DelayProfile {
        DelayProfile {
            epic_id: self.epic_id.clone(),
            values: vec![
                self.m1, self.m2, self.m3, self.m4, self.m5, self.m6, self.m7, self.m8, self.m9,
                self.m10,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationCsvRow {
    pub variable: String,
    pub cluster: usize,
    pub size: usize,
    pub median: f64,
    pub significant: bool,
    pub tested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WssCsvRow {
    pub k: usize,
    pub wss: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCsvRow {
    pub cluster: usize,
    pub milestone: usize,
    pub p25: f64,
    pub centroid: f64,
    pub p75: f64,
}

impl From<&CentroidBand> for BandCsvRow {
    fn from(b: &CentroidBand) -> Self {
        BandCsvRow {
            cluster: b.label,
            milestone: b.milestone,
            p25: b.p25,
            centroid: b.centroid,
            p75: b.p75,
        }
    }
}

pub fn write_results(dir: &Path, result: &BenchmarkResult) -> Result<()> {
    write_csv(
        &dir.join(RESULTS_FILE),
        result.rows.iter().map(|r| ResultCsvRow {
            split: r.split.map_or_else(|| "pooled".to_string(), |s| s.to_string()),
            mode: r.model.clone(),
            milestone: r.milestone,
            n: r.n,
            mae: r.mae,
            sa: r.sa,
            mean_rwidth90: r.mean_rwidth90,
        }),
    )?;
    write_csv(
        &dir.join(COMPARISONS_FILE),
        result.comparisons.iter().map(|c| ComparisonCsvRow {
            milestone: c.milestone,
            mode_a: c.model_a.clone(),
            mode_b: c.model_b.clone(),
            wilcoxon_p: c.wilcoxon_p,
            a12: c.a12,
        }),
    )?;
    write_predictions(&dir.join(PREDICTIONS_FILE), &result.predictions)
}

pub fn write_predictions(path: &Path, predictions: &[PredictionRecord]) -> Result<()> {
    write_csv(
        path,
        predictions.iter().map(|p| PredictionCsvRow {
            split: p.split,
            mode: p.model.clone(),
            epic_id: p.epic_id.clone(),
            milestone: p.milestone,
            actual: p.actual,
            median: p.median,
            q05: p.q05,
            q95: p.q95,
            zero_probability: p.zero_probability,
        }),
    )
}

pub fn read_results(path: &Path) -> Result<Vec<ResultCsvRow>> {
    read_csv(path)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionCsvRow>> {
    read_csv(path)
}

pub fn read_profiles(path: &Path) -> Result<Vec<ProfileCsvRow>> {
    read_csv(path)
}

pub fn write_characterization(path: &Path, report: &CharacterizationReport) -> Result<()> {
    let mut rows = Vec::new();
    for (v, name) in report.variables.iter().enumerate() {
        for c in &report.clusters {
            rows.push(CharacterizationCsvRow {
                variable: name.clone(),
                cluster: c.label,
                size: c.size,
                median: c.medians[v],
                significant: c.stars[v],
                tested: c.tested,
            });
        }
    }
    write_csv(path, rows)
}

pub fn write_wss_curve(path: &Path, model: &ClusterModel) -> Result<()> {
    write_csv(
        path,
        model.wss_curve.iter().map(|(&k, &wss)| WssCsvRow {
            k,
            wss,
            selected: k == model.k,
        }),
    )
}

//! Plot-ready CSVs derived from an evaluation output directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use delaydyn_core::cluster::{centroid_bands, ClusterModel};

use crate::error::Result;
use crate::formats::{
    read_predictions, read_profiles, read_results, write_wss_curve, BandCsvRow, DrawCsvRow,
    CLUSTERS_FILE, PREDICTIONS_FILE, PROFILES_FILE, RESULTS_FILE,
};
use crate::io::{read_csv, read_json, write_csv};

pub const WSS_FILE: &str = "wss_curve.csv";
pub const BANDS_FILE: &str = "centroid_bands.csv";
pub const ACCURACY_FILE: &str = "accuracy_by_milestone.csv";
pub const RWIDTH_FILE: &str = "rwidth_by_milestone.csv";
pub const DENSITY_FILE: &str = "densities.csv";
/// Optional predictive-check draws placed in the results directory by `fit --checks`.
pub const CHECK_FILES: [&str; 2] = ["prior_predictive.csv", "posterior_predictive.csv"];

pub const DENSITY_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCsvRow {
    pub mode: String,
    pub milestone: u8,
    #[serde(rename = "MAE")]
    pub mae: f64,
    #[serde(rename = "SA")]
    pub sa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwidthCsvRow {
    pub mode: String,
    pub milestone: u8,
    pub mean_rwidth90: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCsvRow {
    pub series: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub density: f64,
}

/// Histogram density on [0, 1]. The value 1 falls in the last bin.
pub fn histogram(series: &str, values: &[f64], bins: usize) -> Vec<DensityCsvRow> {
    let mut counts = vec![0usize; bins];
    let mut n = 0usize;
    for &v in values {
        if !v.is_finite() {
            continue;
        }
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
        n += 1;
    }
    let width = 1.0 / bins as f64;
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| DensityCsvRow {
            series: series.to_string(),
            bin_lo: b as f64 * width,
            bin_hi: (b + 1) as f64 * width,
            density: if n == 0 { 0.0 } else { c as f64 / (n as f64 * width) },
        })
        .collect()
}

pub fn write_report(results_dir: &Path, out_dir: &Path) -> Result<()> {
    let results = read_results(&results_dir.join(RESULTS_FILE))?;
    let pooled: Vec<_> = results.iter().filter(|r| r.split == "pooled").collect();
    write_csv(
        &out_dir.join(ACCURACY_FILE),
        pooled.iter().map(|r| AccuracyCsvRow {
            mode: r.mode.clone(),
            milestone: r.milestone,
            mae: r.mae,
            sa: r.sa,
        }),
    )?;
    write_csv(
        &out_dir.join(RWIDTH_FILE),
        pooled.iter().map(|r| RwidthCsvRow {
            mode: r.mode.clone(),
            milestone: r.milestone,
            mean_rwidth90: r.mean_rwidth90,
        }),
    )?;

    let clusters_path = results_dir.join(CLUSTERS_FILE);
    if clusters_path.exists() {
        let model: ClusterModel = read_json(&clusters_path)?;
        write_wss_curve(&out_dir.join(WSS_FILE), &model)?;
        let profiles_path = results_dir.join(PROFILES_FILE);
        if profiles_path.exists() {
            let profiles: Vec<_> = read_profiles(&profiles_path)?
                .iter()
                .map(|r| r.profile())
                .collect();
            let bands = centroid_bands(&model, &profiles);
            write_csv(&out_dir.join(BANDS_FILE), bands.iter().map(BandCsvRow::from))?;
        }
    }

    let predictions = read_predictions(&results_dir.join(PREDICTIONS_FILE))?;
    let mut rows = Vec::new();
    let mut actual: BTreeMap<(String, u8), f64> = BTreeMap::new();
    let mut medians: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in &predictions {
        actual.insert((p.epic_id.clone(), p.milestone), p.actual);
        medians.entry(p.mode.clone()).or_default().push(p.median);
    }
    let observed: Vec<f64> = actual.values().copied().collect();
    rows.extend(histogram("observed", &observed, DENSITY_BINS));
    for (mode, values) in &medians {
        rows.extend(histogram(&format!("median:{mode}"), values, DENSITY_BINS));
    }
    for file in CHECK_FILES {
        let path = results_dir.join(file);
        if !path.exists() {
            continue;
        }
        let draws: Vec<DrawCsvRow> = read_csv(&path)?;
        let mut sets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for d in draws {
            sets.entry(d.draw_set_id).or_default().push(d.bre_value);
        }
        for (id, values) in &sets {
            rows.extend(histogram(id, values, DENSITY_BINS));
        }
    }
    write_csv(&out_dir.join(DENSITY_FILE), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_integrates_to_one() {
        let values = [0.0, 0.0, 0.1, 0.35, 0.5, 0.99, 1.0];
        let rows = histogram("x", &values, 10);
        let mass: f64 = rows.iter().map(|r| r.density * (r.bin_hi - r.bin_lo)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert_eq!(rows[0].density, 2.0 / 7.0 * 10.0);
        assert_eq!(rows[9].density, 2.0 / 7.0 * 10.0);
    }

    #[test]
    fn empty_histogram_is_zero() {
        assert!(histogram("x", &[], 5).iter().all(|r| r.density == 0.0));
    }
}

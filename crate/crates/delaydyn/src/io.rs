//! CSV ingestion and export of backlog datasets.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use delaydyn_core::data::{Dataset, EpicRecord, EpicStatus, IterationRecord, PredictorVector};
use delaydyn_core::synth::GroundTruth;
use delaydyn_core::Error as CoreError;

use crate::error::{CliError, Result};

pub const EPICS_FILE: &str = "epics.csv";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const PREDICTORS_FILE: &str = "predictors.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Serialize, Deserialize)]
struct EpicRow {
    epic_id: String,
    status: String,
    created: Option<NaiveDate>,
    planned_start: Option<NaiveDate>,
    actual_start: Option<NaiveDate>,
    planned_end: Option<NaiveDate>,
    actual_end: Option<NaiveDate>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IterationRow {
    epic_id: String,
    index: u32,
    start: NaiveDate,
    end: NaiveDate,
    committed_points: u32,
    completed_points: u32,
    carried_over_points: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictorRow {
    epic_id: String,
    milestone: u8,
    out_degree: f64,
    changed_leads: f64,
    stability_ratio: f64,
    dev_age_ing: f64,
    team_existence: f64,
    hist_performance: f64,
    dev_workload: f64,
    nr_incidents: f64,
    unplanned_stories: f64,
    nr_stories: f64,
    nr_sprints: f64,
    team_size: f64,
    security_level: f64,
}

impl PredictorRow {
    fn new(epic_id: String, milestone: u8, p: &PredictorVector) -> Self {
        PredictorRow {
            epic_id,
            milestone,
            out_degree: p.out_degree,
            changed_leads: p.changed_leads,
            stability_ratio: p.stability_ratio,
            dev_age_ing: p.dev_age_ing,
            team_existence: p.team_existence,
            hist_performance: p.hist_performance,
            dev_workload: p.dev_workload,
            nr_incidents: p.nr_incidents,
            unplanned_stories: p.unplanned_stories,
            nr_stories: p.nr_stories,
            nr_sprints: p.nr_sprints,
            team_size: p.team_size,
            security_level: p.security_level,
        }
    }

    fn predictors(&self) -> PredictorVector {
        PredictorVector {
            out_degree: self.out_degree,
            changed_leads: self.changed_leads,
            stability_ratio: self.stability_ratio,
            dev_age_ing: self.dev_age_ing,
            team_existence: self.team_existence,
            hist_performance: self.hist_performance,
            dev_workload: self.dev_workload,
            nr_incidents: self.nr_incidents,
            unplanned_stories: self.unplanned_stories,
            nr_stories: self.nr_stories,
            nr_sprints: self.nr_sprints,
            team_size: self.team_size,
            security_level: self.security_level,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthRow {
    epic_id: String,
    true_cluster: usize,
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
    }
    File::create(path).map_err(|e| CliError::io(path, e))
}

/// Reads every row of a headed CSV file.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.map_err(|e| CliError::csv(path, e))?);
    }
    Ok(rows)
}

/// Writes rows with a header derived from `T`.
pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::csv(path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

/// Writes an explicit header followed by string records; used when the
/// header must be emitted even for zero rows.
pub fn write_records(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    writer.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        writer.write_record(row).map_err(|e| CliError::csv(path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

/// Loads the three dataset tables and joins them by `epic_id`.
pub fn load_dataset(epics_path: &Path, iterations_path: &Path, predictors_path: &Path) -> Result<Dataset> {
    let epic_rows: Vec<EpicRow> = read_csv(epics_path)?;
    let iteration_rows: Vec<IterationRow> = read_csv(iterations_path)?;
    let predictor_rows: Vec<PredictorRow> = read_csv(predictors_path)?;

    let mut iterations: BTreeMap<String, Vec<IterationRecord>> =
        epic_rows.iter().map(|e| (e.epic_id.clone(), Vec::new())).collect();
    for (line, row) in iteration_rows.into_iter().enumerate() {
        let list = iterations.get_mut(&row.epic_id).ok_or_else(|| {
            CliError::Core(CoreError::ReferentialIntegrity(format!(
                "{} row {}: unknown epic_id {}",
                iterations_path.display(),
                line + 2,
                row.epic_id
            )))
        })?;
        list.push(IterationRecord {
            index: row.index,
            start: row.start,
            end: row.end,
            committed_points: row.committed_points,
            completed_points: row.completed_points,
            carried_over_points: row.carried_over_points,
        });
    }

    let mut epics = Vec::with_capacity(epic_rows.len());
    for row in epic_rows {
        let mut its = iterations.remove(&row.epic_id).unwrap_or_default();
        its.sort_by_key(|i| i.index);
        let epic = EpicRecord {
            epic_id: row.epic_id,
            status: EpicStatus::parse(&row.status),
            created: row.created,
            planned_start: row.planned_start,
            actual_start: row.actual_start,
            planned_end: row.planned_end,
            actual_end: row.actual_end,
            iterations: its,
        };
        epic.validate()
            .map_err(|e| e.context(epics_path.display().to_string()))?;
        epics.push(epic);
    }

    let rows = predictor_rows
        .into_iter()
        .map(|r| {
            let p = r.predictors();
            p.validate()?;
            Ok((r.epic_id, r.milestone, p))
        })
        .collect::<std::result::Result<Vec<_>, CoreError>>()
        .map_err(|e| e.context(predictors_path.display().to_string()))?;
    Ok(Dataset::from_predictor_rows(epics, rows)?)
}

pub fn dataset_paths(dir: &Path) -> [PathBuf; 3] {
    [
        dir.join(EPICS_FILE),
        dir.join(ITERATIONS_FILE),
        dir.join(PREDICTORS_FILE),
    ]
}

pub fn load_dataset_dir(dir: &Path) -> Result<Dataset> {
    let [e, i, p] = dataset_paths(dir);
    load_dataset(&e, &i, &p)
}

/// Writes `epics.csv`, `iterations.csv` and `predictors.csv` into `dir`.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    let [e, i, p] = dataset_paths(dir);
    write_csv(
        &e,
        dataset.epics().iter().map(|x| EpicRow {
            epic_id: x.epic_id.clone(),
            status: x.status.as_str().to_string(),
            created: x.created,
            planned_start: x.planned_start,
            actual_start: x.actual_start,
            planned_end: x.planned_end,
            actual_end: x.actual_end,
        }),
    )?;
    write_csv(
        &i,
        dataset.epics().iter().flat_map(|x| {
            x.iterations.iter().map(move |it| IterationRow {
                epic_id: x.epic_id.clone(),
                index: it.index,
                start: it.start,
                end: it.end,
                committed_points: it.committed_points,
                completed_points: it.completed_points,
                carried_over_points: it.carried_over_points,
            })
        }),
    )?;
    write_csv(
        &p,
        dataset
            .snapshots()
            .iter()
            .map(|s| PredictorRow::new(s.epic_id.clone(), s.milestone, &s.predictors)),
    )
}

pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    write_csv(
        path,
        truth.labels.iter().map(|(id, c)| GroundTruthRow {
            epic_id: id.clone(),
            true_cluster: *c,
        }),
    )
}

pub fn read_ground_truth(path: &Path) -> Result<BTreeMap<String, usize>> {
    let rows: Vec<GroundTruthRow> = read_csv(path)?;
    Ok(rows.into_iter().map(|r| (r.epic_id, r.true_cluster)).collect())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = std::io::BufReader::new(open(path)?);
    serde_json::from_reader(file).map_err(|e| CliError::json(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::json(path, e))?;
    text.push('\n');
    let mut file = create(path)?;
    std::io::Write::write_all(&mut file, text.as_bytes()).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use delaydyn_core::synth::{generate, GeneratorConfig};

    #[test]
    fn round_trip_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GeneratorConfig {
            n_epics: 30,
            seed: 4,
            ..GeneratorConfig::default()
        };
        let (d, truth) = generate(&cfg).unwrap();
        write_dataset(dir.path(), &d).unwrap();
        let back = load_dataset_dir(dir.path()).unwrap();
        assert_eq!(back, d);
        let gt = dir.path().join(GROUND_TRUTH_FILE);
        write_ground_truth(&gt, &truth).unwrap();
        assert_eq!(read_ground_truth(&gt).unwrap(), truth.label_map());
    }

    #[test]
    fn dangling_iteration_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let [e, i, p] = dataset_paths(dir.path());
        fs::write(&e, "epic_id,status,created,planned_start,actual_start,planned_end,actual_end\nA,Completed,2020-01-01,2020-01-02,2020-01-02,2020-06-01,2020-06-01\n").unwrap();
        fs::write(&i, "epic_id,index,start,end,committed_points,completed_points,carried_over_points\nB,1,2020-01-02,2020-01-15,10,8,2\n").unwrap();
        fs::write(&p, "epic_id,milestone,out_degree,changed_leads,stability_ratio,dev_age_ing,team_existence,hist_performance,dev_workload,nr_incidents,unplanned_stories,nr_stories,nr_sprints,team_size,security_level\n").unwrap();
        let err = load_dataset(&e, &i, &p).unwrap_err();
        assert!(matches!(err, CliError::Core(CoreError::ReferentialIntegrity(_))), "{err}");
    }

    #[test]
    fn malformed_row_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let [e, i, p] = dataset_paths(dir.path());
        fs::write(&e, "epic_id,status,created,planned_start,actual_start,planned_end,actual_end\nA,Completed,2020-01-01,2020-01-02,2020-01-02,not-a-date,2020-06-01\n").unwrap();
        fs::write(&i, "epic_id,index,start,end,committed_points,completed_points,carried_over_points\n").unwrap();
        fs::write(&p, "epic_id,milestone\n").unwrap();
        let err = load_dataset(&e, &i, &p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epics.csv:2"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }
}

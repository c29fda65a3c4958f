//! Dataset schema, milestone timeline and outcome computations.
//!
//! An epic's iterations are divided into [`MILESTONES`] checkpoints by
//! completion rate: milestone `j` closes at iteration `floor(j·T/10)`.
//! Schedule deviation is measured as balanced relative error (BRE) and the
//! intermediate delay signal is the number of story points carried over
//! from the last iteration of each milestone (DSP).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub const MILESTONES: usize = 10;
pub const MIN_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpicStatus {
    Completed,
    Other,
}

impl EpicStatus {
    pub fn parse(s: &str) -> Self {
        if s.trim().eq_ignore_ascii_case("completed") {
            EpicStatus::Completed
        } else {
            EpicStatus::Other
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EpicStatus::Completed => "Completed",
            EpicStatus::Other => "Other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based ordinal within the epic.
    pub index: u32,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub committed_points: u32,
    pub completed_points: u32,
    /// Points moved to the next iteration.
    pub carried_over_points: u32,
}

impl IterationRecord {
    pub fn ledger_balances(&self) -> bool {
        self.carried_over_points <= self.committed_points
            && self.completed_points + self.carried_over_points == self.committed_points
    }
}

/// One epic as ingested. Dates are optional because raw exports contain
/// blanks; cleaning keeps only epics with a full schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpicRecord {
    pub epic_id: String,
    pub status: EpicStatus,
    pub created: Option<NaiveDate>,
    pub planned_start: Option<NaiveDate>,
    pub actual_start: Option<NaiveDate>,
    pub planned_end: Option<NaiveDate>,
    pub actual_end: Option<NaiveDate>,
    pub iterations: Vec<IterationRecord>,
}

/// The four dates BRE depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub planned_start: NaiveDate,
    pub planned_end: NaiveDate,
    pub actual_start: NaiveDate,
    pub actual_end: NaiveDate,
}

impl EpicRecord {
    pub fn schedule(&self) -> Option<Schedule> {
        Some(Schedule {
            planned_start: self.planned_start?,
            planned_end: self.planned_end?,
            actual_start: self.actual_start?,
            actual_end: self.actual_end?,
        })
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.len()
    }

    /// Checks the record-level invariants: date ordering and consecutive,
    /// non-overlapping, sorted iterations with balanced ledgers.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("epic {}: {msg}", self.epic_id)));
        if let (Some(s), Some(e)) = (self.planned_start, self.planned_end) {
            if s > e {
                return bad("planned_start after planned_end");
            }
        }
        if let (Some(s), Some(e)) = (self.actual_start, self.actual_end) {
            if s > e {
                return bad("actual_start after actual_end");
            }
        }
        for (pos, it) in self.iterations.iter().enumerate() {
            if it.index as usize != pos + 1 {
                return bad("iteration indices must be 1..T in order");
            }
            if it.start > it.end {
                return bad("iteration starts after it ends");
            }
            if pos > 0 && it.start <= self.iterations[pos - 1].end {
                return bad("iterations overlap or are unsorted");
            }
            if !it.ledger_balances() {
                return bad("iteration ledger does not balance");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictorVector {
    pub out_degree: f64,
    pub changed_leads: f64,
    pub stability_ratio: f64,
    pub dev_age_ing: f64,
    pub team_existence: f64,
    pub hist_performance: f64,
    pub dev_workload: f64,
    pub nr_incidents: f64,
    pub unplanned_stories: f64,
    pub nr_stories: f64,
    pub nr_sprints: f64,
    pub team_size: f64,
    pub security_level: f64,
}

impl PredictorVector {
    pub const LEN: usize = 13;

    /// Column names in CSV order.
    pub const NAMES: [&'static str; 13] = [
        "out_degree",
        "changed_leads",
        "stability_ratio",
        "dev_age_ing",
        "team_existence",
        "hist_performance",
        "dev_workload",
        "nr_incidents",
        "unplanned_stories",
        "nr_stories",
        "nr_sprints",
        "team_size",
        "security_level",
    ];

    const RATIO_FIELDS: [usize; 3] = [2, 5, 12];

    pub fn to_array(&self) -> [f64; 13] {
        [
            self.out_degree,
            self.changed_leads,
            self.stability_ratio,
            self.dev_age_ing,
            self.team_existence,
            self.hist_performance,
            self.dev_workload,
            self.nr_incidents,
            self.unplanned_stories,
            self.nr_stories,
            self.nr_sprints,
            self.team_size,
            self.security_level,
        ]
    }

    pub fn from_array(v: [f64; 13]) -> Self {
        PredictorVector {
            out_degree: v[0],
            changed_leads: v[1],
            stability_ratio: v[2],
            dev_age_ing: v[3],
            team_existence: v[4],
            hist_performance: v[5],
            dev_workload: v[6],
            nr_incidents: v[7],
            unplanned_stories: v[8],
            nr_stories: v[9],
            nr_sprints: v[10],
            team_size: v[11],
            security_level: v[12],
        }
    }

    /// Ratios in `[0, 1]`, everything else finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.to_array().iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::invalid(format!(
                    "predictor {} must be finite and nonnegative, got {v}",
                    Self::NAMES[i]
                )));
            }
            if Self::RATIO_FIELDS.contains(&i) && *v > 1.0 {
                return Err(Error::invalid(format!(
                    "predictor {} is a ratio and must lie in [0,1], got {v}",
                    Self::NAMES[i]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneSnapshot {
    pub epic_id: String,
    /// 1..=10
    pub milestone: u8,
    pub predictors: PredictorVector,
    /// Carry-over at the milestone's boundary iteration; 0 when the epic has
    /// fewer than 10 iterations (such epics never survive cleaning).
    pub dsp_raw: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpicOutcome {
    pub epic_id: String,
    pub bre_signed: f64,
    pub bre: f64,
    pub dsp_series: [u32; MILESTONES],
}

/// Last iteration (1-based) of milestone `j` for an epic with `T` iterations.
///
/// Milestone `j` covers iterations `(boundary(j−1), boundary(j)]`.
pub fn milestone_boundary(total_iterations: usize, milestone: usize) -> Result<usize> {
    if total_iterations < MIN_ITERATIONS {
        return Err(Error::invalid(format!(
            "milestones need at least {MIN_ITERATIONS} iterations, got {total_iterations}"
        )));
    }
    if !(1..=MILESTONES).contains(&milestone) {
        return Err(Error::invalid(format!(
            "milestone must be in 1..=10, got {milestone}"
        )));
    }
    Ok(milestone * total_iterations / MILESTONES)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bre {
    pub signed: f64,
    /// `max(signed, 0)`, the modeling target.
    pub clamped: f64,
}

/// Balanced relative error of a delivery.
///
/// Late deliveries are normalized by the planned duration, early ones by the
/// actual duration.
pub fn compute_bre(
    planned_start: NaiveDate,
    planned_end: NaiveDate,
    actual_start: NaiveDate,
    actual_end: NaiveDate,
) -> Result<Bre> {
    let planned = (planned_end - planned_start).num_days();
    let actual = (actual_end - actual_start).num_days();
    if planned <= 0 || actual <= 0 {
        return Err(Error::DegenerateDuration(format!(
            "planned {planned} d, actual {actual} d"
        )));
    }
    let deviation = (actual_end - planned_end).num_days() as f64;
    let signed = if deviation >= 0.0 {
        deviation / planned as f64
    } else {
        deviation / actual as f64
    };
    Ok(Bre {
        signed,
        clamped: signed.max(0.0),
    })
}

/// Delayed story points at milestone `j`: the carry-over of the milestone's
/// boundary iteration (not cumulative).
pub fn compute_dsp(epic: &EpicRecord, milestone: usize) -> Result<u32> {
    let boundary = milestone_boundary(epic.total_iterations(), milestone)?;
    Ok(epic.iterations[boundary - 1].carried_over_points)
}

pub fn dsp_series(epic: &EpicRecord) -> Result<[u32; MILESTONES]> {
    let mut out = [0; MILESTONES];
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = compute_dsp(epic, j + 1)?;
    }
    Ok(out)
}

pub fn epic_outcome(epic: &EpicRecord) -> Result<EpicOutcome> {
    let s = epic
        .schedule()
        .ok_or_else(|| Error::invalid(format!("epic {} has missing dates", epic.epic_id)))?;
    let bre = compute_bre(s.planned_start, s.planned_end, s.actual_start, s.actual_end)
        .map_err(|_| Error::DegenerateDuration(epic.epic_id.clone()))?;
    if bre.clamped >= 1.0 {
        log::warn!("epic {} has BRE {} >= 1", epic.epic_id, bre.clamped);
    }
    Ok(EpicOutcome {
        epic_id: epic.epic_id.clone(),
        bre_signed: bre.signed,
        bre: bre.clamped,
        dsp_series: dsp_series(epic)?,
    })
}

/// Epics plus their per-milestone snapshots, referentially joined.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    epics: Vec<EpicRecord>,
    snapshots: Vec<MilestoneSnapshot>,
    epic_index: BTreeMap<String, usize>,
    snapshot_index: BTreeMap<(String, u8), usize>,
}

impl Dataset {
    /// Joins epics and snapshots. Every snapshot must reference an existing
    /// epic and each `(epic, milestone)` pair may appear once.
    pub fn new(epics: Vec<EpicRecord>, snapshots: Vec<MilestoneSnapshot>) -> Result<Self> {
        let mut epic_index = BTreeMap::new();
        for (i, e) in epics.iter().enumerate() {
            if epic_index.insert(e.epic_id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate epic_id {}", e.epic_id)));
            }
        }
        let mut snapshot_index = BTreeMap::new();
        for (i, s) in snapshots.iter().enumerate() {
            if !epic_index.contains_key(&s.epic_id) {
                return Err(Error::ReferentialIntegrity(format!(
                    "snapshot references unknown epic_id {}",
                    s.epic_id
                )));
            }
            if !(1..=MILESTONES as u8).contains(&s.milestone) {
                return Err(Error::invalid(format!(
                    "snapshot for {} has milestone {} outside 1..=10",
                    s.epic_id, s.milestone
                )));
            }
            if snapshot_index
                .insert((s.epic_id.clone(), s.milestone), i)
                .is_some()
            {
                return Err(Error::invalid(format!(
                    "duplicate snapshot for epic {} milestone {}",
                    s.epic_id, s.milestone
                )));
            }
        }
        Ok(Dataset {
            epics,
            snapshots,
            epic_index,
            snapshot_index,
        })
    }

    /// Builds snapshots from per-milestone predictor rows, filling `dsp_raw`
    /// from the iteration ledger.
    pub fn from_predictor_rows(
        epics: Vec<EpicRecord>,
        rows: Vec<(String, u8, PredictorVector)>,
    ) -> Result<Self> {
        let by_id: BTreeMap<&str, &EpicRecord> =
            epics.iter().map(|e| (e.epic_id.as_str(), e)).collect();
        let mut snapshots = Vec::with_capacity(rows.len());
        for (epic_id, milestone, predictors) in rows {
            let epic = by_id.get(epic_id.as_str()).ok_or_else(|| {
                Error::ReferentialIntegrity(format!(
                    "predictor row references unknown epic_id {epic_id}"
                ))
            })?;
            let dsp_raw = if epic.total_iterations() >= MIN_ITERATIONS {
                compute_dsp(epic, milestone as usize)?
            } else {
                0
            };
            snapshots.push(MilestoneSnapshot {
                epic_id,
                milestone,
                predictors,
                dsp_raw,
            });
        }
        Dataset::new(epics, snapshots)
    }

    pub fn epics(&self) -> &[EpicRecord] {
        &self.epics
    }

    pub fn snapshots(&self) -> &[MilestoneSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.epics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epics.is_empty()
    }

    pub fn epic(&self, epic_id: &str) -> Option<&EpicRecord> {
        self.epic_index.get(epic_id).map(|&i| &self.epics[i])
    }

    pub fn snapshot(&self, epic_id: &str, milestone: u8) -> Option<&MilestoneSnapshot> {
        self.snapshot_index
            .get(&(epic_id.to_string(), milestone))
            .map(|&i| &self.snapshots[i])
    }

    pub fn require_snapshot(&self, epic_id: &str, milestone: u8) -> Result<&MilestoneSnapshot> {
        self.snapshot(epic_id, milestone).ok_or_else(|| Error::DataGap {
            epic_id: epic_id.to_string(),
            milestone,
        })
    }

    pub fn outcomes(&self) -> Result<Vec<EpicOutcome>> {
        self.epics.iter().map(epic_outcome).collect()
    }

    /// The sub-dataset containing only the given epics (in the given order).
    pub fn subset(&self, epic_ids: &[String]) -> Result<Dataset> {
        let wanted: BTreeSet<&str> = epic_ids.iter().map(String::as_str).collect();
        let mut epics = Vec::with_capacity(epic_ids.len());
        for id in epic_ids {
            epics.push(
                self.epic(id)
                    .ok_or_else(|| Error::invalid(format!("unknown epic_id {id}")))?
                    .clone(),
            );
        }
        let snapshots = self
            .snapshots
            .iter()
            .filter(|s| wanted.contains(s.epic_id.as_str()))
            .cloned()
            .collect();
        Dataset::new(epics, snapshots)
    }

    fn retain_epics(&self, keep: &BTreeSet<String>) -> Result<Dataset> {
        let epics = self
            .epics
            .iter()
            .filter(|e| keep.contains(&e.epic_id))
            .cloned()
            .collect();
        let snapshots = self
            .snapshots
            .iter()
            .filter(|s| keep.contains(&s.epic_id))
            .cloned()
            .collect();
        Dataset::new(epics, snapshots)
    }
}

/// Why an epic was removed during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    NotCompleted,
    MissingDates,
    NoTeam,
    TooFewIterations,
    DegenerateDuration,
    Outlier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningReport {
    pub dropped: Vec<(String, DropReason)>,
    pub bre_mean: f64,
    pub bre_sd: f64,
}

pub fn clean_dataset(dataset: &Dataset) -> Result<Dataset> {
    clean_dataset_with_report(dataset).map(|(d, _)| d)
}

/// Removes unusable epics, then epics whose signed BRE lies more than two
/// sample standard deviations from the mean (one pass, after the other
/// filters).
pub fn clean_dataset_with_report(dataset: &Dataset) -> Result<(Dataset, CleaningReport)> {
    let mut dropped = Vec::new();
    let mut survivors: Vec<(String, f64)> = Vec::new();
    for epic in dataset.epics() {
        let reason = if epic.status != EpicStatus::Completed {
            Some(DropReason::NotCompleted)
        } else if epic.schedule().is_none() {
            Some(DropReason::MissingDates)
        } else if !has_team(dataset, &epic.epic_id) {
            Some(DropReason::NoTeam)
        } else if epic.total_iterations() < MIN_ITERATIONS {
            Some(DropReason::TooFewIterations)
        } else {
            None
        };
        if let Some(r) = reason {
            dropped.push((epic.epic_id.clone(), r));
            continue;
        }
        let s = epic.schedule().expect("checked above");
        match compute_bre(s.planned_start, s.planned_end, s.actual_start, s.actual_end) {
            Ok(bre) => survivors.push((epic.epic_id.clone(), bre.signed)),
            Err(_) => dropped.push((epic.epic_id.clone(), DropReason::DegenerateDuration)),
        }
    }

    let values: Vec<f64> = survivors.iter().map(|(_, b)| *b).collect();
    let bre_mean = stats::mean(&values);
    let bre_sd = stats::sample_sd(&values);
    let mut keep = BTreeSet::new();
    for (id, b) in survivors {
        if bre_sd.is_finite() && libm::fabs(b - bre_mean) > 2.0 * bre_sd {
            dropped.push((id, DropReason::Outlier));
        } else {
            keep.insert(id);
        }
    }
    if keep.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (id, reason) in &dropped {
        log::debug!("cleaning dropped {id}: {reason:?}");
    }
    Ok((
        dataset.retain_epics(&keep)?,
        CleaningReport {
            dropped,
            bre_mean,
            bre_sd,
        },
    ))
}

/// An epic is assigned to a team when some snapshot reports a positive team
/// size.
fn has_team(dataset: &Dataset, epic_id: &str) -> bool {
    (1..=MILESTONES as u8).any(|m| {
        dataset
            .snapshot(epic_id, m)
            .is_some_and(|s| s.predictors.team_size > 0.0)
    })
}

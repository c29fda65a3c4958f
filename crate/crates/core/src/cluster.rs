//! Delay-pattern discovery: normalized DSP profiles, average-linkage
//! clustering on the DTW distance matrix, elbow selection of `k`,
//! classification of partially observed series, and cluster
//! characterization against the predictors.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EpicOutcome, PredictorVector, MILESTONES};
use crate::dtw::dtw_unchecked;
use crate::error::{Error, Result};
use crate::stats;

/// Max-normalized DSP series of one epic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    pub epic_id: String,
    pub values: Vec<f64>,
}

impl DelayProfile {
    pub fn from_outcome(outcome: &EpicOutcome) -> Self {
        DelayProfile {
            epic_id: outcome.epic_id.clone(),
            values: normalize_profile(&outcome.dsp_series),
        }
    }
}

/// Divides each entry by the series maximum; an all-zero series stays zero.
pub fn normalize_profile(raw: &[u32]) -> Vec<f64> {
    let max = raw.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|&v| v as f64 / max as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Average,
}

/// Pairwise DTW distances in condensed upper-triangle form.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_profiles(profiles: &[DelayProfile]) -> Self {
        let n = profiles.len();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                data.push(dtw_unchecked(&profiles[i].values, &profiles[j].values));
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            core::cmp::Ordering::Equal => 0.0,
            core::cmp::Ordering::Less => self.data[self.slot(i, j)],
            core::cmp::Ordering::Greater => self.data[self.slot(j, i)],
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = if i < j { self.slot(i, j) } else { self.slot(j, i) };
        self.data[s] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Surviving cluster slot (the smaller index).
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Full agglomeration history of `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

/// Average-linkage agglomeration. On equal linkage distance the pair with the
/// lexicographically smallest `(i, j)` cluster slots merges first.
pub fn average_linkage(mut dist: DistanceMatrix) -> Dendrogram {
    let n = dist.len();
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut nearest: Vec<Option<(f64, usize)>> = vec![None; n];

    let row_nearest = |dist: &DistanceMatrix, active: &[bool], i: usize| {
        let mut best: Option<(f64, usize)> = None;
        for j in (i + 1)..dist.len() {
            if !active[j] {
                continue;
            }
            let d = dist.get(i, j);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        best
    };

    for i in 0..n {
        nearest[i] = row_nearest(&dist, &active, i);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if let Some((d, j)) = nearest[i] {
                if pick.is_none_or(|(bd, _, _)| d < bd) {
                    pick = Some((d, i, j));
                }
            }
        }
        let (d, a, b) = pick.expect("at least two active clusters");
        merges.push(Merge { a, b, distance: d });

        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for x in 0..n {
            if !active[x] || x == a || x == b {
                continue;
            }
            let merged = (sa * dist.get(a, x) + sb * dist.get(b, x)) / (sa + sb);
            dist.set(a, x, merged);
        }
        active[b] = false;
        size[a] += size[b];
        nearest[b] = None;

        for x in 0..n {
            if !active[x] {
                continue;
            }
            if x == a {
                nearest[x] = row_nearest(&dist, &active, x);
            } else if x < a {
                match nearest[x] {
                    Some((_, j)) if j == a || j == b => {
                        nearest[x] = row_nearest(&dist, &active, x);
                    }
                    Some((bd, bj)) => {
                        let da = dist.get(x, a);
                        if da < bd || (da == bd && a < bj) {
                            nearest[x] = Some((da, a));
                        }
                    }
                    None => nearest[x] = row_nearest(&dist, &active, x),
                }
            } else if x < b && matches!(nearest[x], Some((_, j)) if j == b) {
                nearest[x] = row_nearest(&dist, &active, x);
            }
        }
    }
    Dendrogram { n, merges }
}

impl Dendrogram {
    /// Flat labels in `1..=k` after applying the first `n − k` merges.
    /// Labels are numbered by each cluster's smallest member index.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k < 1 || k > self.n {
            return Err(Error::invalid(format!(
                "cannot cut {} points into {k} clusters",
                self.n
            )));
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in &self.merges[..self.n - k] {
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
        let mut label_of_root = BTreeMap::new();
        let mut labels = vec![0; self.n];
        for (i, slot) in labels.iter_mut().enumerate() {
            let r = find(&mut parent, i);
            let next = label_of_root.len() + 1;
            *slot = *label_of_root.entry(r).or_insert(next);
        }
        Ok(labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub linkage: Linkage,
    /// `centroids[l − 1]` is the pointwise mean profile of label `l`.
    pub centroids: Vec<Vec<f64>>,
    pub assignments: BTreeMap<String, usize>,
    pub wss_curve: BTreeMap<usize, f64>,
}

impl ClusterModel {
    pub fn label_of(&self, epic_id: &str) -> Option<usize> {
        self.assignments.get(epic_id).copied()
    }

    pub fn members(&self, label: usize) -> impl Iterator<Item = &str> {
        self.assignments
            .iter()
            .filter(move |(_, &l)| l == label)
            .map(|(id, _)| id.as_str())
    }

    /// Renumbers labels so that label 1 has the highest median outcome, label
    /// 2 the next, and so on (ties: higher mean first, then the old label).
    /// The pattern covariate is ordinal, so this puts the labels on an
    /// outcome-monotone scale.
    pub fn relabel_by_outcome(&self, outcome: &BTreeMap<String, f64>) -> ClusterModel {
        let mut scored: Vec<(usize, f64, f64)> = (1..=self.k)
            .map(|l| {
                let vals: Vec<f64> = self
                    .members(l)
                    .filter_map(|id| outcome.get(id).copied())
                    .collect();
                if vals.is_empty() {
                    (l, f64::NEG_INFINITY, f64::NEG_INFINITY)
                } else {
                    (l, stats::median(&vals), stats::mean(&vals))
                }
            })
            .collect();
        scored.sort_by(|x, y| {
            y.1.total_cmp(&x.1)
                .then(y.2.total_cmp(&x.2))
                .then(x.0.cmp(&y.0))
        });
        let mut new_of_old = vec![0; self.k + 1];
        for (new, (old, _, _)) in scored.iter().enumerate() {
            new_of_old[*old] = new + 1;
        }
        let centroids = scored
            .iter()
            .map(|(old, _, _)| self.centroids[old - 1].clone())
            .collect();
        let assignments = self
            .assignments
            .iter()
            .map(|(id, &l)| (id.clone(), new_of_old[l]))
            .collect();
        ClusterModel {
            k: self.k,
            linkage: self.linkage,
            centroids,
            assignments,
            wss_curve: self.wss_curve.clone(),
        }
    }

    /// Label of the DTW-nearest centroid (smallest label on ties).
    pub fn nearest(&self, values: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 1);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = dtw_unchecked(values, c);
            if d < best.0 {
                best = (d, i + 1);
            }
        }
        best.1
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "k must be in 1..={n}, got {k}"
        )));
    }
    Ok(())
}

fn centroids_for(profiles: &[DelayProfile], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let len = profiles.first().map_or(MILESTONES, |p| p.values.len());
    let mut sums = vec![vec![0.0; len]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in profiles.iter().zip(labels) {
        counts[l - 1] += 1;
        for (s, v) in sums[l - 1].iter_mut().zip(&p.values) {
            *s += v;
        }
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= (*c).max(1) as f64;
        }
    }
    sums
}

fn wss_for(profiles: &[DelayProfile], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    profiles
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            let d = dtw_unchecked(&p.values, &centroids[l - 1]);
            d * d
        })
        .sum()
}

fn check_profiles(profiles: &[DelayProfile]) -> Result<()> {
    if profiles.iter().any(|p| p.values.is_empty()) {
        return Err(Error::invalid("profiles must be nonempty"));
    }
    Ok(())
}

fn model_from_cut(
    profiles: &[DelayProfile],
    labels: Vec<usize>,
    k: usize,
    wss_curve: BTreeMap<usize, f64>,
) -> ClusterModel {
    let centroids = centroids_for(profiles, &labels, k);
    let assignments = profiles
        .iter()
        .zip(&labels)
        .map(|(p, &l)| (p.epic_id.clone(), l))
        .collect();
    ClusterModel {
        k,
        linkage: Linkage::Average,
        centroids,
        assignments,
        wss_curve,
    }
}

/// Average-linkage DTW clustering cut at `k` clusters.
pub fn hierarchical_cluster(profiles: &[DelayProfile], k: usize) -> Result<ClusterModel> {
    check_k(profiles.len(), k)?;
    check_profiles(profiles)?;
    let dendrogram = average_linkage(DistanceMatrix::from_profiles(profiles));
    let labels = dendrogram.cut(k)?;
    let centroids = centroids_for(profiles, &labels, k);
    let mut curve = BTreeMap::new();
    curve.insert(k, wss_for(profiles, &labels, &centroids));
    Ok(model_from_cut(profiles, labels, k, curve))
}

/// Within-cluster sum of squared DTW distances to the centroids.
pub fn wss(model: &ClusterModel, profiles: &[DelayProfile]) -> Result<f64> {
    let mut total = 0.0;
    for p in profiles {
        let label = model.label_of(&p.epic_id).ok_or_else(|| {
            Error::invalid(format!("profile {} is not in the cluster model", p.epic_id))
        })?;
        let d = dtw_unchecked(&p.values, &model.centroids[label - 1]);
        total += d * d;
    }
    Ok(total)
}

/// WSS for every `k` in `k_min..=k_max`, from one agglomeration.
pub fn wss_curve(
    profiles: &[DelayProfile],
    k_min: usize,
    k_max: usize,
) -> Result<BTreeMap<usize, f64>> {
    check_profiles(profiles)?;
    if k_min < 1 || k_max > profiles.len() || k_min > k_max {
        return Err(Error::invalid(format!(
            "k range {k_min}..={k_max} must lie within 1..={}",
            profiles.len()
        )));
    }
    let dendrogram = average_linkage(DistanceMatrix::from_profiles(profiles));
    curve_from_dendrogram(&dendrogram, profiles, k_min, k_max)
}

fn curve_from_dendrogram(
    dendrogram: &Dendrogram,
    profiles: &[DelayProfile],
    k_min: usize,
    k_max: usize,
) -> Result<BTreeMap<usize, f64>> {
    let mut curve = BTreeMap::new();
    for k in k_min..=k_max {
        let labels = dendrogram.cut(k)?;
        let centroids = centroids_for(profiles, &labels, k);
        curve.insert(k, wss_for(profiles, &labels, &centroids));
    }
    Ok(curve)
}

/// Elbow of a WSS curve: the interior `k` with the largest second difference
/// of `ln WSS` (smallest `k` on ties).
///
/// The log scale measures curvature in relative reductions, so one dominant
/// early split does not mask the bend where further splits stop paying off.
/// Zero WSS values are floored at `1e-9` of the first value.
pub fn select_elbow(curve: &BTreeMap<usize, f64>) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::InsufficientCurve(curve.len()));
    }
    let points: Vec<(usize, f64)> = curve.iter().map(|(&k, &w)| (k, w)).collect();
    let floor = points[0].1.abs().max(f64::MIN_POSITIVE) * 1e-9;
    let logs: Vec<f64> = points.iter().map(|(_, w)| libm::log(w.max(floor))).collect();
    let mut best = (f64::NEG_INFINITY, points[1].0);
    for i in 1..points.len() - 1 {
        let d2 = logs[i - 1] - 2.0 * logs[i] + logs[i + 1];
        if d2 > best.0 {
            best = (d2, points[i].0);
        }
    }
    Ok(best.1)
}

pub fn elbow_select_k(profiles: &[DelayProfile], k_min: usize, k_max: usize) -> Result<usize> {
    if k_max < k_min || k_max - k_min + 1 < 3 {
        return Err(Error::InsufficientCurve(
            (k_max + 1).saturating_sub(k_min),
        ));
    }
    select_elbow(&wss_curve(profiles, k_min, k_max)?)
}

/// Clusters with `k` picked by the elbow over `k_min..=k_max` (clipped to the
/// number of profiles); the model carries the whole WSS curve.
pub fn cluster_auto(profiles: &[DelayProfile], k_min: usize, k_max: usize) -> Result<ClusterModel> {
    check_profiles(profiles)?;
    let k_max = k_max.min(profiles.len());
    if k_max < k_min || k_max - k_min + 1 < 3 {
        return Err(Error::InsufficientCurve(
            (k_max + 1).saturating_sub(k_min),
        ));
    }
    let dendrogram = average_linkage(DistanceMatrix::from_profiles(profiles));
    let curve = curve_from_dendrogram(&dendrogram, profiles, k_min, k_max)?;
    let k = select_elbow(&curve)?;
    let labels = dendrogram.cut(k)?;
    Ok(model_from_cut(profiles, labels, k, curve))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternLabel {
    /// Fewer than two milestones observed.
    Unavailable,
    Label(usize),
}

impl PatternLabel {
    pub fn value(&self) -> Option<usize> {
        match self {
            PatternLabel::Unavailable => None,
            PatternLabel::Label(l) => Some(*l),
        }
    }
}

/// Classifies the DSP observed over milestones `1..m−1`: the prefix is
/// max-normalized, future milestones are set to zero, and the nearest
/// centroid wins.
pub fn classify_partial(observed: &[u32], model: &ClusterModel) -> PatternLabel {
    if observed.len() < 2 {
        return PatternLabel::Unavailable;
    }
    let len = model.centroids.first().map_or(MILESTONES, Vec::len);
    let mut values = normalize_profile(&observed[..observed.len().min(len)]);
    values.resize(len, 0.0);
    PatternLabel::Label(model.nearest(&values))
}

/// Adjusted Rand index between two flat labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| c2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| c2(v)).sum();
    let total = c2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Pointwise 25th percentile, mean and 75th percentile of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidBand {
    pub label: usize,
    pub milestone: usize,
    pub p25: f64,
    pub centroid: f64,
    pub p75: f64,
}

pub fn centroid_bands(model: &ClusterModel, profiles: &[DelayProfile]) -> Vec<CentroidBand> {
    let mut out = Vec::new();
    for label in 1..=model.k {
        let members: Vec<&DelayProfile> = profiles
            .iter()
            .filter(|p| model.label_of(&p.epic_id) == Some(label))
            .collect();
        let len = model.centroids[label - 1].len();
        for m in 0..len {
            let column: Vec<f64> = members.iter().map(|p| p.values[m]).collect();
            let sorted = stats::sorted_copy(&column);
            out.push(CentroidBand {
                label,
                milestone: m + 1,
                p25: stats::quantile_sorted(&sorted, 0.25),
                centroid: model.centroids[label - 1][m],
                p75: stats::quantile_sorted(&sorted, 0.75),
            });
        }
    }
    out
}

/// Family-wise significance level before Bonferroni division.
pub const CHARACTERIZATION_ALPHA: f64 = 0.05;
pub const MIN_CLUSTER_SIZE_FOR_TESTS: usize = 3;

/// Variable names of a characterization row: the 13 predictors, then BRE.
pub fn characterization_variables() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = PredictorVector::NAMES.to_vec();
    v.push("bre");
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub label: usize,
    pub size: usize,
    /// Medians of the 13 predictors followed by BRE.
    pub medians: Vec<f64>,
    /// `stars[v]`: significantly different from every other tested cluster.
    pub stars: Vec<bool>,
    pub tested: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub variables: Vec<String>,
    pub clusters: Vec<ClusterStats>,
    pub bonferroni_alpha: f64,
    pub warnings: Vec<String>,
}

/// Per-cluster medians of the predictors (taken from each epic's last
/// available snapshot) and BRE, with pairwise two-sided Wilcoxon rank-sum
/// tests at a Bonferroni-corrected level. Clusters with fewer than three
/// members are reported but not tested.
pub fn characterize_clusters(
    model: &ClusterModel,
    dataset: &Dataset,
    outcomes: &[EpicOutcome],
) -> Result<CharacterizationReport> {
    let n_vars = PredictorVector::LEN + 1;
    let mut columns: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_vars]; model.k];
    for outcome in outcomes {
        let Some(label) = model.label_of(&outcome.epic_id) else {
            continue;
        };
        let snapshot = (1..=MILESTONES as u8)
            .rev()
            .find_map(|m| dataset.snapshot(&outcome.epic_id, m))
            .ok_or_else(|| Error::DataGap {
                epic_id: outcome.epic_id.clone(),
                milestone: MILESTONES as u8,
            })?;
        for (v, value) in snapshot.predictors.to_array().iter().enumerate() {
            columns[label - 1][v].push(*value);
        }
        columns[label - 1][n_vars - 1].push(outcome.bre);
    }

    let mut warnings = Vec::new();
    let tested: Vec<bool> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ok = c[0].len() >= MIN_CLUSTER_SIZE_FOR_TESTS;
            if !ok {
                let msg = format!(
                    "cluster {} has {} members; excluded from significance tests",
                    i + 1,
                    c[0].len()
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
            ok
        })
        .collect();
    let tested_labels: Vec<usize> = (0..model.k).filter(|&i| tested[i]).collect();
    let n_pairs = tested_labels.len() * tested_labels.len().saturating_sub(1) / 2;
    let alpha = if n_pairs > 0 {
        CHARACTERIZATION_ALPHA / n_pairs as f64
    } else {
        CHARACTERIZATION_ALPHA
    };

    // significant[v][i][j] for tested clusters i, j
    let mut stars = vec![vec![false; n_vars]; model.k];
    for v in 0..n_vars {
        for &i in &tested_labels {
            let mut all = tested_labels.len() > 1;
            for &j in &tested_labels {
                if i == j {
                    continue;
                }
                let p = stats::rank_sum_test(&columns[i][v], &columns[j][v])?;
                if p >= alpha {
                    all = false;
                    break;
                }
            }
            stars[i][v] = all;
        }
    }

    let clusters = (0..model.k)
        .map(|i| ClusterStats {
            label: i + 1,
            size: columns[i][0].len(),
            medians: columns[i].iter().map(|c| stats::median(c)).collect(),
            stars: stars[i].clone(),
            tested: tested[i],
        })
        .collect();
    Ok(CharacterizationReport {
        variables: characterization_variables().into_iter().map(String::from).collect(),
        clusters,
        bonferroni_alpha: alpha,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn profile(id: &str, values: &[f64]) -> DelayProfile {
        DelayProfile {
            epic_id: id.to_string(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_profile(&[2, 4, 8, 0, 0, 0, 0, 0, 0, 0]),
            [0.25, 0.5, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(normalize_profile(&[0; 10]), [0.0; 10]);
        let raw = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3];
        let tripled = raw.map(|v| v * 3);
        assert_eq!(normalize_profile(&raw), normalize_profile(&tripled));
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let ps = [
            profile("a", &[0.0, 1.0]),
            profile("b", &[1.0, 0.0]),
            profile("c", &[0.5, 0.5]),
        ];
        let model = hierarchical_cluster(&ps, 3).unwrap();
        for p in &ps {
            let l = model.label_of(&p.epic_id).unwrap();
            assert_eq!(model.centroids[l - 1], p.values);
        }
        assert_eq!(wss(&model, &ps).unwrap(), 0.0);
    }

    #[test]
    fn k_out_of_range() {
        let ps = [profile("a", &[0.0, 1.0])];
        assert!(hierarchical_cluster(&ps, 0).is_err());
        assert!(hierarchical_cluster(&ps, 2).is_err());
    }

    #[test]
    fn elbow_needs_three_points() {
        let ps: Vec<DelayProfile> = (0..5)
            .map(|i| profile(&i.to_string(), &[i as f64, 0.0]))
            .collect();
        assert_eq!(
            elbow_select_k(&ps, 1, 2),
            Err(Error::InsufficientCurve(2))
        );
    }

    #[test]
    fn ties_merge_lexicographically() {
        let d = DistanceMatrix {
            n: 4,
            data: vec![1.0; 6],
        };
        let dendro = average_linkage(d);
        let pairs: Vec<(usize, usize)> = dendro.merges.iter().map(|m| (m.a, m.b)).collect();
        assert_eq!(pairs, [(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn partial_unavailable_before_third_milestone() {
        let model = ClusterModel {
            k: 1,
            linkage: Linkage::Average,
            centroids: vec![vec![0.5; 10]],
            assignments: BTreeMap::new(),
            wss_curve: BTreeMap::new(),
        };
        assert_eq!(classify_partial(&[], &model), PatternLabel::Unavailable);
        assert_eq!(classify_partial(&[4], &model), PatternLabel::Unavailable);
        assert_eq!(classify_partial(&[4, 2], &model), PatternLabel::Label(1));
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[2, 2, 1, 1]), 1.0);
        let ari = adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]);
        assert!(ari < 0.0);
    }

    #[test]
    fn relabel_orders_by_outcome() {
        let mut assignments = BTreeMap::new();
        assignments.insert("x".to_string(), 1);
        assignments.insert("y".to_string(), 2);
        let model = ClusterModel {
            k: 2,
            linkage: Linkage::Average,
            centroids: vec![vec![0.0], vec![1.0]],
            assignments,
            wss_curve: BTreeMap::new(),
        };
        let mut bre = BTreeMap::new();
        bre.insert("x".to_string(), 0.1);
        bre.insert("y".to_string(), 0.3);
        let relabeled = model.relabel_by_outcome(&bre);
        assert_eq!(relabeled.label_of("y"), Some(1));
        assert_eq!(relabeled.centroids[0], vec![1.0]);
    }
}

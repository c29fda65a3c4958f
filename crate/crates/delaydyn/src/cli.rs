//! Command-line interface: generate → cluster → fit → predict → evaluate → report.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use delaydyn_core::bayes::model::{posterior_predictive, prior_predictive, FitConfig};
use delaydyn_core::cluster::{characterize_clusters, hierarchical_cluster, ClusterModel, DelayProfile};
use delaydyn_core::data::{clean_dataset_with_report, Dataset};
use delaydyn_core::eval::{fit_clusters, run_benchmark, BenchmarkConfig};
use delaydyn_core::modes::{self, FittedModel, Mode};
use delaydyn_core::synth::{generate, GeneratorConfig};

use crate::error::{CliError, Result};
use crate::formats::{
    write_characterization, write_results, DrawCsvRow, PredictCsvRow, ProfileCsvRow,
    CHARACTERIZATION_FILE, CLUSTERS_FILE, MANIFEST_FILE, PROFILES_FILE,
};
use crate::io::{load_dataset_dir, read_json, write_csv, write_dataset, write_ground_truth, write_json, GROUND_TRUTH_FILE};
use crate::parallel::RayonExecutor;
use crate::report::{write_report, CHECK_FILES};

#[derive(Debug, Parser)]
#[command(name = "delaydyn", version, about = "Dynamic delay prediction for agile epics")]
pub struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, env = "DELAYDYN_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic backlog dataset.
    Generate(GenerateArgs),
    /// Cluster delay profiles of completed epics.
    Cluster(ClusterArgs),
    /// Fit one prediction mode.
    Fit(FitArgs),
    /// Predict final BRE at a milestone with a fitted model.
    Predict(PredictArgs),
    /// Benchmark prediction modes under time-based cross-validation.
    Evaluate(EvaluateArgs),
    /// Emit plot-ready CSVs from an evaluation directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator configuration (JSON); omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
}

/// `auto` or a fixed cluster count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

impl FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
            _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "auto")]
    pub k: KChoice,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long)]
    pub max_leapfrog: Option<usize>,
    /// Drop the intercept column from every linear predictor.
    #[arg(long)]
    pub no_intercept: bool,
}

impl SamplerArgs {
    fn apply(&self, cfg: &mut FitConfig) {
        let h = &mut cfg.hmc;
        if let Some(v) = self.chains {
            h.chains = v;
        }
        if let Some(v) = self.warmup {
            h.warmup = v;
        }
        if let Some(v) = self.draws {
            h.draws = v;
        }
        if let Some(v) = self.target_accept {
            h.target_accept = v;
        }
        if let Some(v) = self.max_leapfrog {
            h.max_leapfrog = v;
            h.min_leapfrog = h.min_leapfrog.min(v);
        }
        cfg.intercept &= !self.no_intercept;
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Cluster model; required for the dynamic mode.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long)]
    pub mode: Mode,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Write prior and posterior predictive draws into this directory.
    #[arg(long)]
    pub checks: Option<PathBuf>,
    /// Draw sets per predictive check.
    #[arg(long, default_value_t = 50)]
    pub check_draws: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    pub milestone: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "global,global-iter,dynamic,dynamic-nopatterns")]
    pub modes: Vec<Mode>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Seed and configuration of a stochastic run. Holds no paths, timestamps
/// or thread counts so that reruns are byte-identical.
#[derive(Debug, Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<&'static str>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epics_loaded: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epics_used: Option<usize>,
}

fn manifest<'a, C: Serialize>(command: &'a str, seed: u64, config: &'a C) -> RunManifest<'a, C> {
    RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        modes: None,
        epics_loaded: None,
        epics_used: None,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = RayonExecutor::new(cli.threads)?;
    log::debug!("using {} worker threads", exec.threads());
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Fit(a) => cmd_fit(&a, &exec),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a, &exec),
        Command::Report(a) => write_report(&a.results, &a.out),
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "directory not found"),
        ))
    }
}

/// Loads a dataset directory and applies the cleaning filters.
fn load_clean(dir: &Path) -> Result<(usize, Dataset)> {
    require_dir(dir)?;
    let raw = load_dataset_dir(dir)?;
    let (clean, report) = clean_dataset_with_report(&raw)?;
    log::info!(
        "loaded {} epics, kept {} after cleaning ({} dropped)",
        raw.len(),
        clean.len(),
        report.dropped.len()
    );
    Ok((raw.len(), clean))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let mut cfg: GeneratorConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => GeneratorConfig::default(),
    };
    cfg.seed = a.seed;
    log::info!("generating {} epics with seed {}", cfg.n_epics, cfg.seed);
    let (dataset, truth) = generate(&cfg)?;
    write_dataset(&a.out, &dataset)?;
    write_ground_truth(&a.out.join(GROUND_TRUTH_FILE), &truth)?;
    write_json(&a.out.join(MANIFEST_FILE), &manifest("generate", a.seed, &cfg))
}

fn cluster_dataset(dataset: &Dataset, k: KChoice, k_min: usize, k_max: usize) -> Result<ClusterModel> {
    match k {
        KChoice::Auto => Ok(fit_clusters(dataset, k_min, k_max)?),
        KChoice::Fixed(k) => {
            let outcomes = dataset.outcomes()?;
            let profiles: Vec<DelayProfile> = outcomes.iter().map(DelayProfile::from_outcome).collect();
            let model = hierarchical_cluster(&profiles, k)?;
            let bre = outcomes.iter().map(|o| (o.epic_id.clone(), o.bre)).collect();
            Ok(model.relabel_by_outcome(&bre))
        }
    }
}

fn cmd_cluster(a: &ClusterArgs) -> Result<()> {
    if a.k_min < 1 || a.k_min > a.k_max {
        return Err(CliError::Usage(format!(
            "invalid k range {}..={}",
            a.k_min, a.k_max
        )));
    }
    let (_, dataset) = load_clean(&a.data)?;
    let model = cluster_dataset(&dataset, a.k, a.k_min, a.k_max)?;
    log::info!("selected k = {}", model.k);
    write_json(&a.out, &model)
}

fn cmd_fit(a: &FitArgs, exec: &RayonExecutor) -> Result<()> {
    let clusters: Option<ClusterModel> = match &a.clusters {
        Some(p) => Some(read_json(p)?),
        None if a.mode.needs_clusters() => {
            return Err(CliError::Usage(format!(
                "mode {} requires --clusters",
                a.mode
            )))
        }
        None => None,
    };
    let (_, dataset) = load_clean(&a.data)?;
    let mut cfg = FitConfig::default();
    a.sampler.apply(&mut cfg);
    log::info!("fitting {} with seed {}", a.mode, a.seed);
    let model = modes::fit(a.mode, &dataset, clusters.as_ref(), &cfg, a.seed, exec)?;
    if model.flagged {
        log::warn!("{} model did not pass convergence diagnostics", a.mode);
    }
    write_json(&a.out, &model)?;
    if let Some(dir) = &a.checks {
        write_checks(dir, &model, &dataset, a.check_draws, a.seed)?;
    }
    Ok(())
}

/// Prior and posterior predictive draw sets over the training rows, plus
/// the observed outcomes.
fn write_checks(dir: &Path, model: &FittedModel, dataset: &Dataset, n_sets: usize, seed: u64) -> Result<()> {
    let rows = modes::build_rows(dataset, model.mode, model.cluster_model.as_ref())?;
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let design = model.posterior.design(&x, &y)?;
    let n = design.n_rows();
    let observed = || y.iter().map(|&v| DrawCsvRow { draw_set_id: "observed".into(), bre_value: v });

    let prior = prior_predictive(&design, model.posterior.family(), n_sets, seed);
    let mut out: Vec<DrawCsvRow> = observed().collect();
    for (d, chunk) in prior.chunks(n).enumerate() {
        out.extend(chunk.iter().map(|&v| DrawCsvRow {
            draw_set_id: format!("prior-{d:03}"),
            bre_value: v,
        }));
    }
    write_csv(&dir.join(CHECK_FILES[0]), out)?;

    let post = posterior_predictive(&model.posterior, &design, seed)?;
    let total = post.len() / n.max(1);
    let stride = (total / n_sets.max(1)).max(1);
    let mut out: Vec<DrawCsvRow> = observed().collect();
    for (d, chunk) in post.chunks(n).step_by(stride).take(n_sets).enumerate() {
        out.extend(chunk.iter().map(|&v| DrawCsvRow {
            draw_set_id: format!("posterior-{d:03}"),
            bre_value: v,
        }));
    }
    write_csv(&dir.join(CHECK_FILES[1]), out)
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model: FittedModel = read_json(&a.model)?;
    require_dir(&a.data)?;
    let dataset = load_dataset_dir(&a.data)?;
    let m = a.milestone as usize;
    let mut rows = Vec::with_capacity(dataset.len());
    for epic in dataset.epics() {
        let pred = model
            .predict_at(&dataset, &epic.epic_id, m)
            .map_err(|e| e.context(format!("epic {}", epic.epic_id)))?;
        rows.push(PredictCsvRow {
            epic_id: epic.epic_id.clone(),
            milestone: a.milestone,
            mode: model.mode.as_str().to_string(),
            median: pred.median,
            q05: pred.q05,
            q95: pred.q95,
            zero_probability: pred.zero_probability,
        });
    }
    write_csv(&a.out, rows)
}

fn cmd_evaluate(a: &EvaluateArgs, exec: &RayonExecutor) -> Result<()> {
    if a.modes.is_empty() {
        return Err(CliError::Usage("no modes given".into()));
    }
    let mut cfg = BenchmarkConfig::default();
    cfg.seed = a.seed;
    cfg.folds = a.folds.unwrap_or(cfg.folds);
    cfg.k_min = a.k_min.unwrap_or(cfg.k_min);
    cfg.k_max = a.k_max.unwrap_or(cfg.k_max);
    if cfg.k_min < 1 || cfg.k_min > cfg.k_max {
        return Err(CliError::Usage(format!(
            "invalid k range {}..={}",
            cfg.k_min, cfg.k_max
        )));
    }
    a.sampler.apply(&mut cfg.fit);
    let (loaded, dataset) = load_clean(&a.data)?;
    log::info!("evaluating {:?} with seed {}", a.modes, a.seed);

    let result = run_benchmark(&dataset, &a.modes, &cfg, exec)?;
    write_results(&a.out, &result)?;

    let clusters = fit_clusters(&dataset, cfg.k_min, cfg.k_max)?;
    write_json(&a.out.join(CLUSTERS_FILE), &clusters)?;
    let outcomes = dataset.outcomes()?;
    write_csv(
        &a.out.join(PROFILES_FILE),
        outcomes.iter().map(|o| {
            ProfileCsvRow::new(
                &DelayProfile::from_outcome(o),
                clusters.label_of(&o.epic_id).unwrap_or(0),
                o.bre,
            )
        }),
    )?;
    let report = characterize_clusters(&clusters, &dataset, &outcomes)?;
    write_characterization(&a.out.join(CHARACTERIZATION_FILE), &report)?;

    let mut m = manifest("evaluate", a.seed, &cfg);
    m.modes = Some(a.modes.iter().map(Mode::as_str).collect());
    m.epics_loaded = Some(loaded);
    m.epics_used = Some(dataset.len());
    write_json(&a.out.join(MANIFEST_FILE), &m)
}

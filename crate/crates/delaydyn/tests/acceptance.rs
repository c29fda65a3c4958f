//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 3 4`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use delaydyn_core::bayes::diagnostics::{ess_geyer, rhat_and_ess};
use delaydyn_core::bayes::model::{elpd_holdout, links, sample_design, FitConfig};
use delaydyn_core::bayes::posterior::{Family, LogDensity, RegressionPosterior};
use delaydyn_core::bayes::zib::sample_zib;
use delaydyn_core::bayes::{hmc_sample, zib_logpdf, Design, HmcConfig, Standardizer};
use delaydyn_core::cluster::adjusted_rand_index;
use delaydyn_core::data::{clean_dataset, milestone_boundary, Dataset};
use delaydyn_core::dtw::dtw_distance;
use delaydyn_core::eval::{
    fit_clusters, mae_rg_exact, run_benchmark, time_cv_splits, BenchmarkConfig, BenchmarkResult,
};
use delaydyn_core::exec::Sequential;
use delaydyn_core::modes::{build_rows, Mode};
use delaydyn_core::stats::{a12, median, midranks, quantile, wilcoxon_signed_rank};
use delaydyn_core::synth::{generate, GeneratorConfig};
use delaydyn_core::Result as CoreResult;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn core<T>(r: CoreResult<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

// -- 1 --------------------------------------------------------------------

/// Minimum over an explicit enumeration of every monotone warping path.
fn dtw_paths(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = (a[i] - b[j]).abs() + acc;
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

fn random_series(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max_len);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..200 {
        let a = random_series(&mut rng, 6);
        let b = random_series(&mut rng, 6);
        if core(dtw_distance(&a, &b))? != dtw_paths(&a, &b) {
            mismatches += 1;
        }
    }
    let mut violations = 0;
    for _ in 0..1000 {
        let a = random_series(&mut rng, 10);
        let b = random_series(&mut rng, 10);
        let ab = core(dtw_distance(&a, &b))?;
        let ba = core(dtw_distance(&b, &a))?;
        if ab != ba || core(dtw_distance(&a, &a))? != 0.0 {
            violations += 1;
        }
    }
    ensure(
        mismatches == 0 && violations == 0,
        format!("{mismatches}/200 brute-force mismatches, {violations}/1000 symmetry or identity violations"),
    )
}

// -- 2 --------------------------------------------------------------------

fn criterion_2() -> Check {
    let ex1 = core(milestone_boundary(20, 1))?;
    let ex2 = core(milestone_boundary(18, 6))?;
    let mut bad = Vec::new();
    for t in 10..=200 {
        let mut prev = 0;
        for j in 1..=10 {
            let b = core(milestone_boundary(t, j))?;
            if b <= prev {
                bad.push((t, j));
            }
            prev = b;
        }
        if prev != t {
            bad.push((t, 10));
        }
    }
    ensure(
        ex1 == 2 && ex2 == 10 && bad.is_empty(),
        format!("(20,1)->{ex1}, (18,6)->{ex2}, {} partition failures over T in [10,200]", bad.len()),
    )
}

// -- 3 --------------------------------------------------------------------

/// Composite Simpson rule with the endpoints nudged inside the interval.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let eval = |x: f64| f(x.clamp(lo + 1e-9 * h, hi - 1e-9 * h));
    let mut total = eval(lo) + eval(hi);
    for i in 1..n {
        total += if i % 2 == 1 { 4.0 } else { 2.0 } * eval(lo + i as f64 * h);
    }
    total * h / 3.0
}

/// Integral of `dens` over d in (0, ½], where `dens` behaves like
/// d^(shape − 1) near zero. Substituting d = s^k turns this into
/// k·s^(k·shape − 1), which is smooth enough for Simpson once k·shape ≥ 4.
fn half_mass(dens: impl Fn(f64) -> f64, shape: f64, n: usize) -> f64 {
    let k = 4.0 / shape.min(1.0);
    let f = |s: f64| match s.powf(k) {
        // The transformed integrand vanishes at s = 0.
        d if d <= 0.0 => 0.0,
        d => dens(d) * k * s.powf(k - 1.0),
    };
    simpson(f, 0.0, 0.5f64.powf(1.0 / k), n)
}

/// Mass of a ZIB distribution: the point mass plus the Beta part integrated
/// by quadrature over (0, ½] and [½, 1).
fn zib_total_mass(mu: f64, phi: f64, alpha: f64) -> std::result::Result<f64, String> {
    let (a, b) = (mu * phi, (1.0 - mu) * phi);
    let density = |y: f64, m: f64| -> f64 { zib_logpdf(y, m, phi, 0.0).map_or(0.0, f64::exp) };
    let beta = |y: f64| density(y, mu);
    // Beta(a, b) at 1 − d is Beta(b, a) at d; mirroring avoids rounding
    // 1 − d onto the endpoint.
    if (beta(0.8) - density(0.2, 1.0 - mu)).abs() > 1e-9 * beta(0.8).max(1.0) {
        return Err("Beta density is not mirror-symmetric in mu".into());
    }
    let left = half_mass(beta, a, 20_000);
    let right = half_mass(|d| density(d, 1.0 - mu), b, 20_000);
    let zero = core(zib_logpdf(0.0, mu, phi, alpha))?.exp();
    // Cross-check the (1 − α) weighting at an interior point.
    let y = 0.37;
    let weighted = core(zib_logpdf(y, mu, phi, alpha))?.exp();
    if alpha < 1.0 && (weighted - (1.0 - alpha) * beta(y)).abs() > 1e-12 * beta(y).max(1.0) {
        return Err(format!("density at {y} is not (1 - alpha)-weighted"));
    }
    Ok(zero + (1.0 - alpha) * (left + right))
}

fn criterion_3() -> Check {
    let mus = [0.1, 0.3, 0.5, 0.7, 0.9];
    let phis = [1.5, 5.0, 15.0, 50.0, 150.0];
    let alphas = [0.0, 0.2, 0.4, 0.6, 0.8];
    let mut worst: f64 = 0.0;
    for &mu in &mus {
        for &phi in &phis {
            for &alpha in &alphas {
                worst = worst.max((zib_total_mass(mu, phi, alpha)? - 1.0).abs());
            }
        }
    }
    ensure(worst < 1e-6, format!("max |mass - 1| = {worst:.2e} over 125 grid points"))
}

// -- 4 --------------------------------------------------------------------

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = 4;
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = (0..50)
        .map(|_| if rng.random::<f64>() < 0.4 { 0.0 } else { rng.random_range(0.01..0.95) })
        .collect();
    let design = core(Design::from_rows(&rows, &y))?;
    let target = RegressionPosterior::new(&design, Family::ZeroInflatedBeta);
    let dim = target.dim();
    let mut worst: f64 = 0.0;
    let mut grad = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for _ in 0..20 {
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        core(target.log_density_grad(&q, &mut grad))?;
        for k in 0..dim {
            let h = 1e-5 * q[k].abs().max(1.0);
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[k] += h;
            qm[k] -= h;
            let fd = (core(target.log_density_grad(&qp, &mut scratch))?
                - core(target.log_density_grad(&qm, &mut scratch))?)
                / (2.0 * h);
            let scale = grad[k].abs().max(fd.abs()).max(1e-8);
            worst = worst.max((fd - grad[k]).abs() / scale);
        }
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.2e} over 20 points x {dim} coordinates"))
}

// -- 5 --------------------------------------------------------------------

struct Gaussian {
    /// Precision matrix, row-major.
    precision: Vec<f64>,
    dim: usize,
}

impl LogDensity for Gaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density_grad(&self, q: &[f64], grad: &mut [f64]) -> CoreResult<f64> {
        let mut lp = 0.0;
        for i in 0..self.dim {
            let row: f64 = (0..self.dim).map(|j| self.precision[i * self.dim + j] * q[j]).sum();
            grad[i] = -row;
            lp -= 0.5 * q[i] * row;
        }
        Ok(lp)
    }
}

/// Checks one moment series: `(estimate − truth)` against 3 MC standard
/// errors. Returns the z score.
fn moment_z(chains: &[Vec<f64>], truth: f64) -> f64 {
    let all: Vec<f64> = chains.concat();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / ess_geyer(chains)).sqrt();
    (mean - truth) / se
}

fn gaussian_check(name: &str, target: &Gaussian, cov: &[f64]) -> std::result::Result<(bool, String), String> {
    let cfg = HmcConfig {
        chains: 4,
        warmup: 1000,
        draws: 1000,
        seed: 5,
        ..HmcConfig::default()
    };
    let samples = core(hmc_sample(target, &cfg, &Sequential))?;
    let d = target.dim;
    let coords: Vec<Vec<Vec<f64>>> = (0..d).map(|j| samples.coordinate(j)).collect();
    let mut worst_z: f64 = 0.0;
    let (mut worst_rhat, mut worst_ess): (f64, f64) = (0.0, f64::INFINITY);
    for j in 0..d {
        worst_z = worst_z.max(moment_z(&coords[j], 0.0).abs());
        let (rhat, ess) = core(rhat_and_ess(&coords[j]))?;
        worst_rhat = worst_rhat.max(rhat);
        worst_ess = worst_ess.min(ess / samples.total_draws() as f64);
        for k in j..d {
            // Second moments about the known zero mean.
            let prod: Vec<Vec<f64>> = coords[j]
                .iter()
                .zip(&coords[k])
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
                .collect();
            worst_z = worst_z.max(moment_z(&prod, cov[j * d + k]).abs());
        }
    }
    let ok = worst_z < 3.0 && worst_rhat < 1.01 && worst_ess > 0.2;
    Ok((
        ok,
        format!("{name}: max |z| {worst_z:.2}, max R-hat {worst_rhat:.4}, min ESS ratio {worst_ess:.2}"),
    ))
}

fn criterion_5() -> Check {
    let (ok1, d1) = gaussian_check("N(0,1)", &Gaussian { precision: vec![1.0], dim: 1 }, &[1.0])?;
    let rho: f64 = 0.8;
    let s = 1.0 / (1.0 - rho * rho);
    let target = Gaussian {
        precision: vec![s, -rho * s, -rho * s, s],
        dim: 2,
    };
    let (ok2, d2) = gaussian_check("2D rho=0.8", &target, &[1.0, rho, rho, 1.0])?;
    ensure(ok1 && ok2, format!("{d1}; {d2}"))
}

// -- 6 --------------------------------------------------------------------

const TRUE_COEF: [f64; 9] = [
    0.6, -0.3, 0.0, // mu
    0.3, 0.0, -0.6, // phi
    -0.3, 0.6, 0.0, // alpha
];

fn recovery_replicate(seed: u64) -> std::result::Result<(Vec<f64>, Vec<(f64, f64)>), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let p = 3;
    let mut design = Design::new(p);
    for _ in 0..2000 {
        let x: Vec<f64> = (0..p).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let l = links(Family::ZeroInflatedBeta, &TRUE_COEF, &x);
        let y = sample_zib(&mut rng, l.mu, l.phi, l.alpha);
        core(design.push(&x, y))?;
    }
    let cfg = HmcConfig {
        chains: 2,
        warmup: 400,
        draws: 400,
        seed,
        ..HmcConfig::default()
    };
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let (samples, _) = core(sample_design(&design, Family::ZeroInflatedBeta, &cfg, &names, &Sequential))?;
    let mut medians = Vec::new();
    let mut intervals = Vec::new();
    for j in 0..TRUE_COEF.len() {
        let draws = samples.coordinate(j).concat();
        medians.push(median(&draws));
        intervals.push((quantile(&draws, 0.05), quantile(&draws, 0.95)));
    }
    Ok((medians, intervals))
}

fn criterion_6() -> Check {
    let mut covered = 0usize;
    let mut total = 0usize;
    let mut worst_dev: f64 = 0.0;
    for seed in 0..20 {
        let (medians, intervals) = recovery_replicate(seed)?;
        for (j, &truth) in TRUE_COEF.iter().enumerate() {
            if truth.abs() >= 0.3 {
                worst_dev = worst_dev.max((medians[j] - truth).abs());
            }
            let (lo, hi) = intervals[j];
            covered += usize::from(lo <= truth && truth <= hi);
            total += 1;
        }
    }
    let coverage = covered as f64 / total as f64;
    ensure(
        worst_dev <= 0.15 && (0.75..=0.98).contains(&coverage),
        format!("max |median - truth| {worst_dev:.3} (|beta| >= 0.3), 90% CI coverage {coverage:.3} over {total} intervals"),
    )
}

// -- 7 --------------------------------------------------------------------

fn criterion_7() -> Check {
    let cfg = GeneratorConfig {
        n_epics: 400,
        noise_sd: 0.1,
        seed: 7,
        ..GeneratorConfig::default()
    };
    let (raw, truth) = core(generate(&cfg))?;
    let data = core(clean_dataset(&raw))?;
    let model = core(fit_clusters(&data, 1, 10))?;
    let outcomes = core(data.outcomes())?;
    let labels = truth.label_map();
    let a: Vec<usize> = outcomes.iter().map(|o| labels[&o.epic_id]).collect();
    let b: Vec<usize> = outcomes.iter().map(|o| model.label_of(&o.epic_id).unwrap_or(0)).collect();
    let ari = adjusted_rand_index(&a, &b);
    let mut by_label: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for o in &outcomes {
        by_label.entry(model.label_of(&o.epic_id).unwrap_or(0)).or_default().push(o.bre);
    }
    let medians: Vec<f64> = by_label.values().map(|v| median(v)).collect();
    let targets = [0.23, 0.17, 0.11, 0.09];
    let medians_ok = medians.len() == 4 && medians.iter().zip(&targets).all(|(m, t)| (m - t).abs() <= 0.03);
    ensure(
        model.k == 4 && ari >= 0.8 && medians_ok,
        format!("k = {}, ARI = {ari:.3}, cluster BRE medians {medians:.3?}", model.k),
    )
}

// -- 8 --------------------------------------------------------------------

fn enumerated_signed_rank_p(diffs: &[f64]) -> f64 {
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let observed: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let n = diffs.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0..(1u64 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        le += u64::from(w <= observed + 1e-9);
        ge += u64::from(w >= observed - 1e-9);
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut notes = Vec::new();

    // MAE of random guessing against simulation.
    let ys: Vec<f64> = (0..60)
        .map(|_| if rng.random::<f64>() < 0.4 { 0.0 } else { rng.random::<f64>() })
        .collect();
    let exact = core(mae_rg_exact(&ys))?;
    let draws = 1_000_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let i = rng.random_range(0..ys.len());
        let mut j = rng.random_range(0..ys.len() - 1);
        if j >= i {
            j += 1;
        }
        acc += (ys[i] - ys[j]).abs();
    }
    let sim = acc / draws as f64;
    let sim_ok = ((sim - exact) / exact).abs() < 0.005;
    notes.push(format!("MAE_rg exact {exact:.5} vs simulated {sim:.5}"));

    // MAE of random guessing against full enumeration.
    let mut enum_ok = true;
    for n in 2..=8 {
        for _ in 0..20 {
            let v: Vec<f64> = (0..n).map(|_| (rng.random_range(0..5) as f64) / 4.0).collect();
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        total += (v[i] - v[j]).abs();
                    }
                }
            }
            let expected = total / (n * (n - 1)) as f64;
            enum_ok &= (core(mae_rg_exact(&v))? - expected).abs() <= 1e-12 * expected.max(1.0);
        }
    }

    // Exact Wilcoxon p against 2^n sign enumeration, with and without ties.
    let mut wil_ok = true;
    for n in 5..=12 {
        for trial in 0..10 {
            let diffs: Vec<f64> = (0..n)
                .map(|_| {
                    let m = if trial % 2 == 0 {
                        rng.random_range(0.01..1.0)
                    } else {
                        rng.random_range(1..4) as f64
                    };
                    if rng.random::<f64>() < 0.35 { -m } else { m }
                })
                .collect();
            let zeros = vec![0.0; n];
            let p = core(wilcoxon_signed_rank(&diffs, &zeros))?;
            wil_ok &= (p - enumerated_signed_rank_p(&diffs)).abs() < 1e-12;
        }
    }

    // A12 against pair enumeration.
    let mut a12_ok = true;
    for _ in 0..100 {
        let x: Vec<f64> = (0..rng.random_range(1..15)).map(|_| rng.random_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..rng.random_range(1..15)).map(|_| rng.random_range(0..6) as f64).collect();
        let mut score = 0.0;
        for a in &x {
            for b in &y {
                score += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        a12_ok &= core(a12(&x, &y))? == score / (x.len() * y.len()) as f64;
    }
    notes.push(format!(
        "enumeration n<=8 {}, Wilcoxon n<=12 {}, A12 {}",
        if enum_ok { "exact" } else { "MISMATCH" },
        if wil_ok { "exact" } else { "MISMATCH" },
        if a12_ok { "exact" } else { "MISMATCH" }
    ));
    ensure(sim_ok && enum_ok && wil_ok && a12_ok, notes.join("; "))
}

// -- 9, 10 ----------------------------------------------------------------

fn default_benchmark_data() -> CoreResult<Dataset> {
    let (raw, _) = generate(&GeneratorConfig::default())?;
    clean_dataset(&raw)
}

fn benchmark() -> &'static std::result::Result<(BenchmarkResult, Duration), String> {
    static RESULT: OnceLock<std::result::Result<(BenchmarkResult, Duration), String>> = OnceLock::new();
    RESULT.get_or_init(|| {
        let start = Instant::now();
        let data = core(default_benchmark_data())?;
        let r = core(run_benchmark(&data, &Mode::ALL, &BenchmarkConfig::default(), &Sequential))?;
        Ok((r, start.elapsed()))
    })
}

fn criterion_9() -> Check {
    let (r, elapsed) = benchmark().as_ref().map_err(Clone::clone)?;
    let mae = |mode: Mode, m: u8| r.pooled(mode.as_str(), m).map(|row| row.mae).unwrap_or(f64::NAN);
    let p = |a: Mode, b: Mode, m: u8| {
        r.comparison(a.as_str(), b.as_str(), m)
            .or_else(|| r.comparison(b.as_str(), a.as_str(), m))
            .and_then(|c| c.wilcoxon_p)
            .unwrap_or(f64::NAN)
    };
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for m in 1..=10u8 {
        let (g, gi, dy, np) = (
            mae(Mode::Global, m),
            mae(Mode::GlobalIterative, m),
            mae(Mode::Dynamic, m),
            mae(Mode::DynamicNoPatterns, m),
        );
        let p_dy_gi = p(Mode::Dynamic, Mode::GlobalIterative, m);
        lines.push(format!("m{m}: g {g:.4} gi {gi:.4} dy {dy:.4} np {np:.4} p(dy,gi) {p_dy_gi:.3}"));
        if m >= 5 && !(dy < gi && p_dy_gi < 0.05 && gi <= g) {
            failures.push(format!("RQ1 at m{m}"));
        }
        if m >= 3 && dy > np {
            failures.push(format!("RQ2 at m{m}"));
        }
        if m <= 2 && dy != np {
            failures.push(format!("RQ2 equality at m{m}"));
        }
    }
    if *elapsed > Duration::from_secs(30 * 60) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    let detail = format!("{}; {}", lines.join(", "), if failures.is_empty() { "all hold".into() } else { format!("violated: {}", failures.join(", ")) });
    ensure(failures.is_empty(), detail)
}

fn criterion_10() -> Check {
    let (r, _) = benchmark().as_ref().map_err(Clone::clone)?;
    let widths: Vec<f64> = [2u8, 5, 7, 10]
        .iter()
        .map(|&m| r.pooled(Mode::Dynamic.as_str(), m).map(|row| row.mean_rwidth90).unwrap_or(f64::NAN))
        .collect();
    let decreasing = widths.windows(2).all(|w| w[1] < w[0]);
    ensure(decreasing, format!("dynamic mean RWidth90 at milestones 2,5,7,10: {widths:.3?}"))
}

// -- 11 -------------------------------------------------------------------

fn criterion_11() -> Check {
    let data = core(default_benchmark_data())?;
    let plan = core(time_cv_splits(&data, 10))?;
    let mut fit = FitConfig::default();
    fit.hmc.chains = 2;
    fit.hmc.warmup = 300;
    fit.hmc.draws = 300;
    let mut beta_cfg = fit.clone();
    beta_cfg.family = Family::Beta;
    let schema = Mode::Global.schema();
    let mut wins = 0;
    let mut lines = Vec::new();
    let splits = plan.splits();
    for split in &splits {
        let design_of = |ids: &[String], s: Option<&Standardizer>| -> std::result::Result<(Design, Standardizer), String> {
            let subset = core(data.subset(ids))?;
            let rows = core(build_rows(&subset, Mode::Global, None))?;
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.target).collect();
            let st = match s {
                Some(s) => s.clone(),
                None => core(Standardizer::fit(&schema, &x))?,
            };
            let mut z: Vec<Vec<f64>> = x.iter().map(|r| st.transform(r)).collect::<CoreResult<_>>().map_err(|e| e.to_string())?;
            if fit.intercept {
                z.iter_mut().for_each(|r| r.insert(0, 1.0));
            }
            Ok((core(Design::from_rows(&z, &y))?, st))
        };
        let (train, st) = design_of(&split.train, None)?;
        let (test, _) = design_of(&split.test, Some(&st))?;
        let zib = core(elpd_holdout(&train, &test, &fit, &Sequential))?;
        let beta = core(elpd_holdout(&train, &test, &beta_cfg, &Sequential))?;
        wins += usize::from(zib > beta);
        lines.push(format!("{}: {zib:.1} vs {beta:.1}", split.index));
    }
    ensure(
        wins == splits.len() && splits.len() == 9,
        format!("ZIB ELPD above Beta in {wins}/{} splits ({})", splits.len(), lines.join(", ")),
    )
}

// -- 12 -------------------------------------------------------------------

fn run_cli(args: &[&str], threads: usize) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_delaydyn"))
        .args(args)
        .env("DELAYDYN_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline(root: &Path, threads: usize) -> std::result::Result<BTreeMap<String, Vec<u8>>, String> {
    let p = |s: &str| root.join(s).display().to_string();
    std::fs::write(root.join("gen.json"), "{\"n_epics\": 150}").map_err(|e| e.to_string())?;
    let (data, clusters, model) = (p("data"), p("out/clusters.json"), p("out/posterior.json"));
    let (checks, results) = (p("out/checks"), p("out/results"));
    let sampler = ["--chains", "2", "--warmup", "120", "--draws", "120"];
    run_cli(&["generate", "--config", &p("gen.json"), "--out", &data, "--seed", "7"], threads)?;
    run_cli(&["cluster", "--data", &data, "--k", "auto", "--out", &clusters], threads)?;
    let mut fit = vec![
        "fit", "--data", &data, "--clusters", &clusters, "--mode", "dynamic", "--out", &model, "--seed", "7",
        "--checks", &checks,
    ];
    fit.extend_from_slice(&sampler);
    run_cli(&fit, threads)?;
    run_cli(
        &["predict", "--model", &model, "--data", &data, "--milestone", "5", "--out", &p("out/preds.csv")],
        threads,
    )?;
    let mut eval = vec!["evaluate", "--data", &data, "--out", &results, "--seed", "7"];
    eval.extend_from_slice(&sampler);
    run_cli(&eval, threads)?;
    run_cli(&["report", "--results", &results, "--out", &p("out/report")], threads)?;

    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).expect("under root").display().to_string();
                files.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(files)
}

fn criterion_12() -> Check {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().expect("temp dir")).collect();
    let a = pipeline(dirs[0].path(), 1)?;
    let b = pipeline(dirs[1].path(), 1)?;
    let c = pipeline(dirs[2].path(), 4)?;
    let differing = |x: &BTreeMap<String, Vec<u8>>, y: &BTreeMap<String, Vec<u8>>| -> Vec<String> {
        let mut names: Vec<String> = x.keys().chain(y.keys()).cloned().collect();
        names.dedup();
        names.into_iter().filter(|n| x.get(n) != y.get(n)).collect()
    };
    let rerun = differing(&a, &b);
    let threads = differing(&a, &c);
    ensure(
        rerun.is_empty() && threads.is_empty() && a.len() > 10,
        format!(
            "{} files; rerun differences {rerun:?}; 1 vs 4 thread differences {threads:?}",
            a.len()
        ),
    )
}

// -------------------------------------------------------------------------

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "DTW brute-force oracle", budget: Some(Duration::from_secs(10)), run: criterion_1 },
        Criterion { id: 2, name: "milestone boundaries", budget: None, run: criterion_2 },
        Criterion { id: 3, name: "ZIB normalization", budget: Some(Duration::from_secs(5)), run: criterion_3 },
        Criterion { id: 4, name: "log-posterior gradient", budget: Some(Duration::from_secs(10)), run: criterion_4 },
        Criterion { id: 5, name: "HMC on Gaussians", budget: Some(Duration::from_secs(60)), run: criterion_5 },
        Criterion { id: 6, name: "parameter recovery", budget: Some(Duration::from_secs(15 * 60)), run: criterion_6 },
        Criterion { id: 7, name: "cluster recovery", budget: Some(Duration::from_secs(120)), run: criterion_7 },
        Criterion { id: 8, name: "exact statistics oracles", budget: Some(Duration::from_secs(60)), run: criterion_8 },
        Criterion { id: 9, name: "mode ordering (RQ1/RQ2)", budget: None, run: criterion_9 },
        Criterion { id: 10, name: "interval narrowing (RQ4)", budget: None, run: criterion_10 },
        Criterion { id: 11, name: "ZIB vs Beta ELPD", budget: None, run: criterion_11 },
        Criterion { id: 12, name: "CLI determinism", budget: None, run: criterion_12 },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(d), Some(b)) if elapsed > b => Err(format!("{d}; over the {}s budget", b.as_secs())),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        println!("criterion {:2} {tag} {} ({:.1}s): {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

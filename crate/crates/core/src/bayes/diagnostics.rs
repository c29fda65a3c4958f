//! Convergence diagnostics: rank-normalized split-R̂, bulk ESS, E-BFMI.

use alloc::string::String;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::bayes::hmc::Samples;
use crate::error::{Error, Result};
use crate::math::sq;
use crate::math::normal_quantile;
use crate::stats::{median, midranks};

pub const RHAT_THRESHOLD: f64 = 1.01;
pub const ESS_RATIO_THRESHOLD: f64 = 0.2;
pub const EBFMI_THRESHOLD: f64 = 0.2;
pub const MIN_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassFlags {
    pub rhat: bool,
    pub ess: bool,
    pub divergences: bool,
    pub ebfmi: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.rhat && self.ess && self.divergences && self.ebfmi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub parameter_names: Vec<String>,
    pub split_rhat: Vec<f64>,
    pub ess_bulk: Vec<f64>,
    pub ess_ratio: Vec<f64>,
    pub divergence_count: usize,
    pub ebfmi: Vec<f64>,
    pub pass: PassFlags,
}

impl DiagnosticsReport {
    pub fn max_rhat(&self) -> f64 {
        self.split_rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess_ratio(&self) -> f64 {
        self.ess_ratio.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replaces every value by the normal score of its pooled rank.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.concat();
    let s = pooled.len() as f64;
    let ranks = midranks(&pooled);
    let mut it = ranks
        .into_iter()
        .map(|r| normal_quantile((r - 0.375) / (s + 0.25)));
    chains
        .iter()
        .map(|c| it.by_ref().take(c.len()).collect())
        .collect()
}

fn fold(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = median(&chains.concat());
    chains
        .iter()
        .map(|c| c.iter().map(|x| (x - m).abs()).collect())
        .collect()
}

fn chain_mean_var(c: &[f64]) -> (f64, f64) {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Classic potential scale reduction over equal-length chains.
pub fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| chain_mean_var(c)).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n / (m - 1.0) * stats.iter().map(|s| sq(s.0 - grand)).sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    sqrt(var_plus / w)
}

/// Rank-normalized split-R̂: the larger of the bulk and folded statistics.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let s = split(chains);
    let bulk = rhat_basic(&rank_normalize(&s));
    let tail = rhat_basic(&rank_normalize(&fold(&s)));
    bulk.max(tail)
}

fn autocovariance(c: &[f64], mean: f64, lag: usize) -> f64 {
    let n = c.len();
    let mut acc = 0.0;
    for i in 0..n - lag {
        acc += (c[i] - mean) * (c[i + lag] - mean);
    }
    acc / n as f64
}

/// Effective sample size with Geyer's initial monotone sequence estimator.
pub fn ess_geyer(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| chain_mean_var(c)).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 {
        stats.iter().map(|s| sq(s.0 - grand)).sum::<f64>() / (m as f64 - 1.0)
    } else {
        0.0
    };
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if !(var_plus > 0.0) {
        return total;
    }
    let rho = |lag: usize| {
        let mean_acov = chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| autocovariance(c, s.0, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        prev_pair = pair;
        sum_pairs += pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / libm::log10(total.max(10.0)));
    total / tau
}

/// Bulk ESS: Geyer ESS of the rank-normalized split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> f64 {
    ess_geyer(&rank_normalize(&split(chains)))
}

/// Energy Bayesian fraction of missing information for one chain.
pub fn ebfmi(energy: &[f64]) -> f64 {
    let n = energy.len() as f64;
    let mean = energy.iter().sum::<f64>() / n;
    let denom: f64 = energy.iter().map(|e| (e - mean) * (e - mean)).sum();
    let numer: f64 = energy.windows(2).map(|w| sq(w[1] - w[0])).sum();
    if denom <= 0.0 {
        return 0.0;
    }
    numer / denom
}

fn check_shape(chains: &[Vec<f64>]) -> Result<()> {
    if chains.len() < 2 {
        return Err(Error::InsufficientChains(chains.len()));
    }
    let n = chains[0].len();
    if n < MIN_DRAWS {
        return Err(Error::InsufficientData(alloc::format!(
            "diagnostics need at least {MIN_DRAWS} draws per chain, got {n}"
        )));
    }
    if let Some(bad) = chains.iter().find(|c| c.len() != n) {
        return Err(Error::Shape {
            expected: n,
            actual: bad.len(),
        });
    }
    Ok(())
}

/// Computes per-parameter and per-chain diagnostics from `samples`.
pub fn diagnose(samples: &Samples, names: &[String]) -> Result<DiagnosticsReport> {
    check_shape(
        &samples
            .chains
            .iter()
            .map(|c| c.energy.clone())
            .collect::<Vec<_>>(),
    )?;
    let total = samples.total_draws() as f64;
    let mut split_rhat_v = Vec::with_capacity(samples.dim);
    let mut ess_v = Vec::with_capacity(samples.dim);
    for j in 0..samples.dim {
        let coord = samples.coordinate(j);
        split_rhat_v.push(split_rhat(&coord));
        ess_v.push(ess_bulk(&coord));
    }
    let ess_ratio: Vec<f64> = ess_v.iter().map(|e| e / total).collect();
    let ebfmi_v: Vec<f64> = samples.chains.iter().map(|c| ebfmi(&c.energy)).collect();
    let divergence_count = samples.divergences();
    let pass = PassFlags {
        rhat: split_rhat_v.iter().all(|r| *r < RHAT_THRESHOLD),
        ess: ess_ratio.iter().all(|r| *r > ESS_RATIO_THRESHOLD),
        divergences: divergence_count == 0,
        ebfmi: ebfmi_v.iter().all(|e| *e > EBFMI_THRESHOLD),
    };
    let parameter_names = if names.len() == samples.dim {
        names.to_vec()
    } else {
        (0..samples.dim).map(|j| alloc::format!("theta[{j}]")).collect()
    };
    Ok(DiagnosticsReport {
        parameter_names,
        split_rhat: split_rhat_v,
        ess_bulk: ess_v,
        ess_ratio,
        divergence_count,
        ebfmi: ebfmi_v,
        pass,
    })
}

/// Same checks over raw per-chain draws of a single quantity.
pub fn rhat_and_ess(chains: &[Vec<f64>]) -> Result<(f64, f64)> {
    check_shape(chains)?;
    Ok((split_rhat(chains), ess_bulk(chains)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        let draws = iid(4000, 1);
        let chains: Vec<Vec<f64>> = draws.chunks(1000).map(|c| c.to_vec()).collect();
        let r = split_rhat(&chains);
        assert!((0.99..=1.01).contains(&r), "{r}");
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        let a = iid(500, 2);
        let b: Vec<f64> = iid(500, 3).into_iter().map(|x| x + 2.0).collect();
        assert!(split_rhat(&[a, b]) > 1.1);
    }

    #[test]
    fn iid_ess_ratio_near_one() {
        let draws = iid(4000, 4);
        let chains: Vec<Vec<f64>> = draws.chunks(1000).map(|c| c.to_vec()).collect();
        let ratio = ess_bulk(&chains) / 4000.0;
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn autocorrelated_chain_has_low_ess() {
        let eps = iid(4000, 5);
        let mut x = 0.0;
        let ar: Vec<f64> = eps
            .iter()
            .map(|e| {
                x = 0.9 * x + e;
                x
            })
            .collect();
        let chains: Vec<Vec<f64>> = ar.chunks(1000).map(|c| c.to_vec()).collect();
        // AR(1) with rho = 0.9 has ESS/N = (1 - rho) / (1 + rho) ≈ 0.053.
        let ratio = ess_bulk(&chains) / 4000.0;
        assert!(ratio > 0.03 && ratio < 0.08, "{ratio}");
    }

    #[test]
    fn white_noise_energy_has_ebfmi_near_two() {
        let e = iid(5000, 6);
        assert!((ebfmi(&e) - 2.0).abs() < 0.1);
    }

    #[test]
    fn single_chain_rejected() {
        let c = vec![iid(200, 7)];
        assert!(matches!(rhat_and_ess(&c), Err(Error::InsufficientChains(1))));
    }
}

//! Hamiltonian Monte Carlo with a diagonal metric and step-size adaptation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes::posterior::LogDensity;
use crate::error::{Error, Result};
use crate::math::sq;
use crate::exec::Executor;

const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    /// Target acceptance statistic for dual averaging.
    pub target_accept: f64,
    pub min_leapfrog: usize,
    pub max_leapfrog: usize,
    /// Initial positions are drawn uniformly from `[-init_radius, init_radius]`;
    /// zero starts every chain at the origin.
    pub init_radius: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            chains: 4,
            warmup: 1000,
            draws: 1000,
            seed: 1,
            target_accept: 0.8,
            min_leapfrog: 8,
            max_leapfrog: 64,
            init_radius: 0.0,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 {
            return Err(Error::invalid("chains and draws must be positive"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid("target_accept must lie in (0, 1)"));
        }
        if self.min_leapfrog == 0 || self.min_leapfrog > self.max_leapfrog {
            return Err(Error::invalid("leapfrog range must satisfy 1 <= min <= max"));
        }
        Ok(())
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    /// Row-major `draws × dim`.
    pub positions: Vec<f64>,
    pub energy: Vec<f64>,
    pub accept_stat: Vec<f64>,
    pub divergent: Vec<bool>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
}

impl ChainDraws {
    pub fn n_draws(&self) -> usize {
        self.energy.len()
    }

    pub fn draw(&self, i: usize, dim: usize) -> &[f64] {
        &self.positions[i * dim..(i + 1) * dim]
    }

    pub fn divergences(&self) -> usize {
        self.divergent.iter().filter(|d| **d).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub dim: usize,
    pub chains: Vec<ChainDraws>,
}

impl Samples {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_draws(&self) -> usize {
        self.chains.first().map_or(0, ChainDraws::n_draws)
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(ChainDraws::n_draws).sum()
    }

    /// Draws of coordinate `j`, one vector per chain.
    pub fn coordinate(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| (0..c.n_draws()).map(|i| c.positions[i * self.dim + j]).collect())
            .collect()
    }

    /// All draws pooled across chains in chain order.
    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> {
        let dim = self.dim;
        self.chains
            .iter()
            .flat_map(move |c| c.positions.chunks_exact(dim))
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().map(ChainDraws::divergences).sum()
    }
}

struct State {
    q: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Chain<'a, D: LogDensity> {
    target: &'a D,
    inv_metric: Vec<f64>,
    rng: ChaCha8Rng,
}

struct Transition {
    accept_stat: f64,
    divergent: bool,
    energy: f64,
}

impl<D: LogDensity> Chain<'_, D> {
    fn eval(&self, q: Vec<f64>) -> Option<State> {
        let mut grad = vec![0.0; q.len()];
        match self.target.log_density_grad(&q, &mut grad) {
            Ok(logp) if logp.is_finite() && grad.iter().all(|g| g.is_finite()) => {
                Some(State { q, grad, logp })
            }
            _ => None,
        }
    }

    fn sample_momentum(&mut self) -> Vec<f64> {
        self.inv_metric
            .iter()
            .map(|&m| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                z / sqrt(m)
            })
            .collect()
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p
            .iter()
            .zip(&self.inv_metric)
            .map(|(p, m)| p * p * m)
            .sum::<f64>()
    }

    /// Runs `steps` leapfrog steps. Returns `None` when the trajectory leaves
    /// the region where the density is finite.
    fn leapfrog(&self, start: &State, p: &mut [f64], eps: f64, steps: usize) -> Option<State> {
        let mut q = start.q.clone();
        let mut grad = start.grad.clone();
        let mut logp = start.logp;
        for _ in 0..steps {
            for (pi, gi) in p.iter_mut().zip(&grad) {
                *pi += 0.5 * eps * gi;
            }
            for ((qi, pi), mi) in q.iter_mut().zip(p.iter()).zip(&self.inv_metric) {
                *qi += eps * mi * pi;
            }
            let next = self.eval(q)?;
            q = next.q;
            grad = next.grad;
            logp = next.logp;
            for (pi, gi) in p.iter_mut().zip(&grad) {
                *pi += 0.5 * eps * gi;
            }
        }
        Some(State { q, grad, logp })
    }

    fn transition(&mut self, state: &mut State, eps: f64, cfg: &HmcConfig) -> Transition {
        let steps = self.rng.random_range(cfg.min_leapfrog..=cfg.max_leapfrog);
        let mut p = self.sample_momentum();
        let h0 = -state.logp + self.kinetic(&p);
        let proposal = self.leapfrog(state, &mut p, eps, steps);
        let Some(proposal) = proposal else {
            return Transition {
                accept_stat: 0.0,
                divergent: true,
                energy: h0,
            };
        };
        let h1 = -proposal.logp + self.kinetic(&p);
        let delta = h1 - h0;
        if !delta.is_finite() || delta > MAX_ENERGY_ERROR {
            return Transition {
                accept_stat: 0.0,
                divergent: true,
                energy: h0,
            };
        }
        let accept_stat = if delta < 0.0 { 1.0 } else { exp(-delta) };
        let u: f64 = self.rng.random();
        if u < accept_stat {
            *state = proposal;
            Transition {
                accept_stat,
                divergent: false,
                energy: h1,
            }
        } else {
            Transition {
                accept_stat,
                divergent: false,
                energy: h0,
            }
        }
    }

    /// Doubles or halves a single-step trial until the acceptance
    /// probability crosses one half.
    fn reasonable_step_size(&mut self, state: &State) -> f64 {
        let mut eps = 0.1;
        let accept_prob = |chain: &mut Self, eps: f64| {
            let mut p = chain.sample_momentum();
            let h0 = -state.logp + chain.kinetic(&p);
            match chain.leapfrog(state, &mut p, eps, 1) {
                Some(next) => {
                    let d = h0 - (-next.logp + chain.kinetic(&p));
                    if d.is_finite() {
                        d.min(0.0)
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                None => f64::NEG_INFINITY,
            }
        };
        let ln_half = -core::f64::consts::LN_2;
        let first = accept_prob(self, eps);
        let direction = if first > ln_half { 1.0 } else { -1.0 };
        for _ in 0..100 {
            let a = accept_prob(self, eps);
            if direction * a <= direction * ln_half {
                break;
            }
            eps *= if direction > 0.0 { 2.0 } else { 0.5 };
            if !(1e-10..=1e3).contains(&eps) {
                break;
            }
        }
        eps.clamp(1e-10, 1e3)
    }
}

/// Nesterov dual averaging of the log step size.
#[derive(Debug, Clone)]
struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    t: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        DualAveraging {
            mu: log(10.0 * eps),
            target,
            h_bar: 0.0,
            log_eps: log(eps),
            log_eps_bar: 0.0,
            t: 0.0,
        }
    }

    fn update(&mut self, accept_stat: f64) -> f64 {
        self.t += 1.0;
        let w = 1.0 / (self.t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat);
        self.log_eps = self.mu - sqrt(self.t) / Self::GAMMA * self.h_bar;
        let eta = libm::pow(self.t, -Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
        exp(self.log_eps)
    }

    fn final_step(&self) -> f64 {
        exp(self.log_eps_bar)
    }
}

fn initial_state<D: LogDensity>(chain: &mut Chain<'_, D>, radius: f64) -> Result<State> {
    let dim = chain.target.dim();
    if radius == 0.0 {
        return chain.eval(vec![0.0; dim]).ok_or_else(|| Error::SamplerFailure {
            message: "log density is not finite at the origin".into(),
            diagnostics: None,
        });
    }
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim)
            .map(|_| chain.rng.random_range(-radius..=radius))
            .collect();
        if let Some(s) = chain.eval(q) {
            return Ok(s);
        }
    }
    Err(Error::SamplerFailure {
        message: "no finite initial position found".into(),
        diagnostics: None,
    })
}

/// Runs one chain: warmup with step-size and metric adaptation, then draws.
pub fn run_chain<D: LogDensity>(target: &D, cfg: &HmcConfig, chain_id: usize) -> Result<ChainDraws> {
    let dim = target.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain_id as u64 + 1);
    let mut chain = Chain {
        target,
        inv_metric: vec![1.0; dim],
        rng,
    };
    let mut state = initial_state(&mut chain, cfg.init_radius.max(0.0))?;

    let mut eps = chain.reasonable_step_size(&state);
    let mut da = DualAveraging::new(eps, cfg.target_accept);

    let first_end = cfg.warmup / 2;
    let metric_end = first_end + (cfg.warmup * 35) / 100;
    let mut collected: Vec<Vec<f64>> = Vec::new();
    let mut warmup_divergences = 0;
    for it in 0..cfg.warmup {
        let tr = chain.transition(&mut state, eps, cfg);
        warmup_divergences += usize::from(tr.divergent);
        eps = da.update(tr.accept_stat);
        if it >= first_end && it < metric_end {
            collected.push(state.q.clone());
        }
        if it + 1 == metric_end && collected.len() >= 10 {
            chain.inv_metric = regularized_variance(&collected);
            eps = chain.reasonable_step_size(&state);
            da = DualAveraging::new(eps, cfg.target_accept);
        }
    }
    if cfg.warmup > 0 {
        if warmup_divergences == cfg.warmup {
            return Err(Error::SamplerFailure {
                message: format!("chain {chain_id}: every warmup transition diverged"),
                diagnostics: None,
            });
        }
        eps = da.final_step();
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::SamplerFailure {
            message: format!("chain {chain_id}: adapted step size is {eps}"),
            diagnostics: None,
        });
    }

    let mut out = ChainDraws {
        positions: Vec::with_capacity(cfg.draws * dim),
        energy: Vec::with_capacity(cfg.draws),
        accept_stat: Vec::with_capacity(cfg.draws),
        divergent: Vec::with_capacity(cfg.draws),
        step_size: eps,
        inv_metric: chain.inv_metric.clone(),
        warmup_divergences,
    };
    for _ in 0..cfg.draws {
        let tr = chain.transition(&mut state, eps, cfg);
        out.positions.extend_from_slice(&state.q);
        out.energy.push(tr.energy);
        out.accept_stat.push(tr.accept_stat);
        out.divergent.push(tr.divergent);
    }
    log::debug!(
        "chain {chain_id}: step size {eps:.4}, {} divergences",
        out.divergences()
    );
    Ok(out)
}

fn regularized_variance(draws: &[Vec<f64>]) -> Vec<f64> {
    let n = draws.len() as f64;
    let dim = draws[0].len();
    (0..dim)
        .map(|j| {
            let mean = draws.iter().map(|d| d[j]).sum::<f64>() / n;
            let var = draws.iter().map(|d| sq(d[j] - mean)).sum::<f64>() / (n - 1.0);
            (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
        })
        .collect()
}

/// Runs `cfg.chains` independent chains through `exec`.
pub fn hmc_sample<D, E>(target: &D, cfg: &HmcConfig, exec: &E) -> Result<Samples>
where
    D: LogDensity + Sync,
    E: Executor,
{
    cfg.validate()?;
    let results = exec.map(cfg.chains, |c| run_chain(target, cfg, c));
    let chains = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Samples {
        dim: target.dim(),
        chains,
    })
}

//! Metropolis-within-Gibbs sampler over the model parameters and the
//! likelihood variance.
//!
//! Each iteration makes one Metropolis-Hastings move on the free parameters
//! with a truncated Gaussian proposal. It then draws the variance exactly
//! from its inverse-gamma conditional.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SeriesKind;
use crate::error::{Error, Result};
use crate::loss::{FitWindow, COUNT_FLOOR};
use crate::optimize::SearchSpace;
use crate::params::{ModelParams, ParamId, ParamTable};
use crate::seed::derive_seed;
use crate::stats::{sample_truncated, truncation_mass};
use crate::synthdata::Dataset;

type Params = ModelParams<f64>;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Draw attempts when looking for a feasible over-dispersed start.
const START_ATTEMPTS: usize = 1000;

/// Which observed series enter the likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodComponents {
    /// Active, recovered and deceased.
    #[default]
    Observed,
    /// The observed three plus their total.
    WithTotal,
}

impl LikelihoodComponents {
    pub fn kinds(self) -> &'static [SeriesKind] {
        match self {
            LikelihoodComponents::Observed => &SeriesKind::OBSERVED,
            LikelihoodComponents::WithTotal => &SeriesKind::ALL,
        }
    }
}

/// Burn-in tuning of the proposal scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adaptation {
    /// Proposal variances are used as configured throughout.
    #[default]
    Off,
    /// During burn-in only, one global factor multiplying every proposal
    /// standard deviation follows a Robbins-Monro update towards
    /// `target_accept`. The factor is frozen once burn-in ends.
    BurnIn { target_accept: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub space: SearchSpace,
    pub proposal_variances: ParamTable<f64>,
    /// Inverse-gamma prior shape.
    pub u: f64,
    /// Inverse-gamma prior scale.
    pub v: f64,
    pub window: FitWindow,
    /// Iterations per chain, burn-in included.
    pub n_samples: usize,
    pub n_burn: usize,
    pub n_chains: usize,
    pub thin: usize,
    pub seed: u64,
    #[serde(default = "yes")]
    pub hastings_correction: bool,
    #[serde(default)]
    pub components: LikelihoodComponents,
    #[serde(default)]
    pub adaptation: Adaptation,
}

fn yes() -> bool {
    true
}

impl McmcConfig {
    /// Reference settings: full box, reference proposal variances,
    /// `u = 40`, `v = 2/700`, 4 chains of 20 000 iterations, 5 000 burn-in,
    /// thinning 5, burn-in scale adaptation towards 23.4% acceptance.
    pub fn new(space: SearchSpace, window: FitWindow, seed: u64) -> Self {
        McmcConfig {
            space,
            proposal_variances: ParamTable::proposal_variances(),
            u: 40.0,
            v: 2.0 / 700.0,
            window,
            n_samples: 20_000,
            n_burn: 5_000,
            n_chains: 4,
            thin: 5,
            seed,
            hastings_correction: true,
            components: LikelihoodComponents::Observed,
            adaptation: Adaptation::BurnIn { target_accept: 0.234 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        for id in ParamId::ALL {
            let var = *self.proposal_variances.get(id);
            if !(var >= 0.0 && var.is_finite()) {
                return Err(Error::config(format!("proposal variance of {id} must be finite and >= 0")));
            }
        }
        if !(self.u > 0.0 && self.v > 0.0 && self.u.is_finite() && self.v.is_finite()) {
            return Err(Error::config("inverse-gamma hyperparameters u, v must be > 0"));
        }
        if self.n_burn >= self.n_samples {
            return Err(Error::config("n_burn must be smaller than n_samples"));
        }
        if self.n_chains == 0 || self.thin == 0 {
            return Err(Error::config("n_chains and thin must be >= 1"));
        }
        if let Adaptation::BurnIn { target_accept } = self.adaptation {
            if !(target_accept > 0.0 && target_accept < 1.0) {
                return Err(Error::config("adaptation target_accept must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    fn sd(&self, id: ParamId) -> f64 {
        self.proposal_variances.get(id).sqrt()
    }
}

/// Posterior target split the way the sampler needs it: an expensive
/// per-parameter statistic, then cheap functions of that statistic and `s`.
pub trait GibbsTarget: Sync {
    /// Sufficient statistic at `theta`; `None` where the likelihood is zero.
    fn statistic(&self, theta: &Params) -> Option<f64>;
    fn log_likelihood(&self, statistic: f64, s: f64) -> f64;
    fn draw_variance(&self, statistic: f64, rng: &mut ChaCha8Rng) -> f64;
}

/// `z[t] = ln max(x[t], 1) - ln max(x[t-1], 1)`.
pub fn log_diff(series: &[f64]) -> Vec<f64> {
    series
        .windows(2)
        .map(|w| w[1].max(COUNT_FLOOR).ln() - w[0].max(COUNT_FLOOR).ln())
        .collect()
}

/// Gaussian likelihood on daily log-differences of the observed series.
pub struct SeiardTarget<'a> {
    dataset: &'a Dataset<f64>,
    window: FitWindow,
    components: LikelihoodComponents,
    observed: Vec<Vec<f64>>,
    shape: f64,
    v: f64,
}

impl<'a> SeiardTarget<'a> {
    pub fn new(
        dataset: &'a Dataset<f64>,
        window: FitWindow,
        components: LikelihoodComponents,
        u: f64,
        v: f64,
    ) -> Result<Self> {
        window.check_within(dataset.horizon())?;
        let r = window.t_begin as usize..=window.t_end as usize;
        let observed = components
            .kinds()
            .iter()
            .map(|k| log_diff(&dataset.observed.series(*k)[r.clone()]))
            .collect();
        Ok(SeiardTarget {
            dataset,
            window,
            components,
            observed,
            shape: posterior_shape(u, window),
            v,
        })
    }

    fn from_config(dataset: &'a Dataset<f64>, config: &McmcConfig) -> Result<Self> {
        Self::new(dataset, config.window, config.components, config.u, config.v)
    }

    /// Number of residual terms, series count times transitions.
    pub fn residual_count(&self) -> usize {
        self.observed.len() * (self.window.t_end - self.window.t_begin) as usize
    }

    /// Inverse-gamma conditional `(u_k, v_k)` of the variance at `theta`.
    pub fn variance_posterior(&self, theta: &Params) -> Option<(f64, f64)> {
        self.statistic(theta).map(|ssr| (self.shape, self.v + ssr / 2.0))
    }
}

/// `u + 2 (t_j - t_i - 1)`.
pub fn posterior_shape(u: f64, window: FitWindow) -> f64 {
    u + 2.0 * (f64::from(window.t_end) - f64::from(window.t_begin) - 1.0)
}

impl GibbsTarget for SeiardTarget<'_> {
    /// Sum of squared log-difference residuals.
    fn statistic(&self, theta: &Params) -> Option<f64> {
        let pred = self.dataset.simulate(theta, self.window.t_end).ok()?;
        let r = self.window.t_begin as usize..=self.window.t_end as usize;
        let mut ssr = 0.0;
        for (kind, z) in self.components.kinds().iter().zip(&self.observed) {
            let zhat = log_diff(&pred.series(*kind)[r.clone()]);
            ssr += z.iter().zip(&zhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        ssr.is_finite().then_some(ssr)
    }

    fn log_likelihood(&self, ssr: f64, s: f64) -> f64 {
        let n = self.residual_count() as f64;
        -ssr / (2.0 * s) - 0.5 * n * (LN_2PI + s.ln())
    }

    fn draw_variance(&self, ssr: f64, rng: &mut ChaCha8Rng) -> f64 {
        draw_inverse_gamma(self.shape, self.v + ssr / 2.0, rng)
    }
}

/// `1 / Gamma(shape, rate)`.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("positive inverse-gamma parameters");
    1.0 / g.sample(rng)
}

/// Log-likelihood of `params` with variance `s` over the observed series;
/// `-inf` when the forward solve fails.
pub fn log_likelihood(dataset: &Dataset<f64>, params: &Params, s: f64, window: FitWindow) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::contract(format!("variance must be > 0, got {s}")));
    }
    let t = SeiardTarget::new(dataset, window, LikelihoodComponents::Observed, 1.0, 1.0)?;
    Ok(match t.statistic(params) {
        Some(ssr) => t.log_likelihood(ssr, s),
        None => f64::NEG_INFINITY,
    })
}

/// Proposes a new point around `prev`, scaling every standard deviation by
/// `scale`. Returns it with the log Hastings correction
/// `Σ ln Z(prev) - ln Z(new)`, where `Z(x)` is the mass the proposal centred
/// at `x` places inside the bounds.
pub fn propose_scaled<R: Rng + ?Sized>(prev: &Params, config: &McmcConfig, scale: f64, rng: &mut R) -> (Params, f64) {
    let mut next = *prev;
    let mut correction = 0.0;
    for id in config.space.free() {
        let sd = config.sd(id) * scale;
        if sd <= 0.0 {
            continue;
        }
        let b = config.space.bounds(id);
        let old = prev.get(id);
        let new = sample_truncated(rng, old, sd, b.lo, b.hi);
        next.set(id, new);
        correction += truncation_mass(old, sd, b.lo, b.hi).ln() - truncation_mass(new, sd, b.lo, b.hi).ln();
    }
    (next, correction)
}

pub fn propose<R: Rng + ?Sized>(prev: &Params, config: &McmcConfig, rng: &mut R) -> (Params, f64) {
    propose_scaled(prev, config, 1.0, rng)
}

/// Gibbs draw of the variance at `theta`; `None` if the forward solve fails.
pub fn sample_s<R: Rng + ?Sized>(
    theta: &Params,
    dataset: &Dataset<f64>,
    config: &McmcConfig,
    rng: &mut R,
) -> Result<Option<f64>> {
    let t = SeiardTarget::from_config(dataset, config)?;
    Ok(t
        .variance_posterior(theta)
        .map(|(shape, scale)| draw_inverse_gamma(shape, scale, rng)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub theta: Params,
    pub s: f64,
    pub log_post: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSamples {
    pub chain_id: usize,
    pub draws: Vec<Draw>,
    /// Acceptance rate over the retained (post burn-in) iterations.
    pub accept_rate: f64,
    pub burn_in_accept_rate: f64,
    /// Final proposal scale factor, 1 without adaptation.
    pub proposal_scale: f64,
    pub start: Params,
}

impl ChainSamples {
    pub fn values(&self, id: ParamId) -> Vec<f64> {
        self.draws.iter().map(|d| d.theta.get(id)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcRun {
    pub chains: Vec<ChainSamples>,
    /// Potential scale reduction per free parameter.
    pub rhat: BTreeMap<ParamId, f64>,
}

impl McmcRun {
    /// Draws of `id` pooled over chains in chain order.
    pub fn pooled(&self, id: ParamId) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.values(id)).collect()
    }

    pub fn pooled_draws(&self) -> Vec<Draw> {
        self.chains.iter().flat_map(|c| c.draws.iter().copied()).collect()
    }

    pub fn max_rhat(&self) -> f64 {
        self.rhat.values().copied().fold(1.0, f64::max)
    }
}

fn uniform_start(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Params {
    let mut p = space.centre();
    for id in space.free() {
        let b = space.bounds(id);
        p.set(id, b.lo + rng.random::<f64>() * b.width());
    }
    p
}

/// Runs one chain of `target` started uniformly over the box.
pub fn run_chain_with<G: GibbsTarget>(target: &G, config: &McmcConfig, chain_id: usize) -> Result<ChainSamples> {
    config.validate()?;
    let seed = derive_seed(config.seed, &format!("mcmc/chain/{chain_id}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut start = None;
    for _ in 0..START_ATTEMPTS {
        let p = uniform_start(&config.space, &mut rng);
        if let Some(stat) = target.statistic(&p) {
            start = Some((p, stat));
            break;
        }
    }
    let (mut theta, mut stat) = start.ok_or(Error::NoFeasiblePoint(START_ATTEMPTS))?;
    let start = theta;
    let mut s = target.draw_variance(stat, &mut rng);

    let mut scale = 1.0;
    let mut accepted_burn = 0usize;
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity((config.n_samples - config.n_burn) / config.thin + 1);
    for iter in 0..config.n_samples {
        let (cand, correction) = propose_scaled(&theta, config, scale, &mut rng);
        let mut accept_prob = 0.0;
        if cand != theta {
            if let Some(cand_stat) = target.statistic(&cand) {
                let mut log_ratio = target.log_likelihood(cand_stat, s) - target.log_likelihood(stat, s);
                if config.hastings_correction {
                    log_ratio += correction;
                }
                accept_prob = log_ratio.min(0.0).exp();
                if rng.random::<f64>() < accept_prob {
                    theta = cand;
                    stat = cand_stat;
                    if iter < config.n_burn {
                        accepted_burn += 1;
                    } else {
                        accepted += 1;
                    }
                }
            }
        }
        if iter < config.n_burn {
            if let Adaptation::BurnIn { target_accept } = config.adaptation {
                let step = 1.0 / ((iter + 1) as f64).sqrt();
                scale *= (step * (accept_prob - target_accept)).exp();
            }
        }
        s = target.draw_variance(stat, &mut rng);
        if iter >= config.n_burn && (iter - config.n_burn) % config.thin == 0 {
            draws.push(Draw {
                theta,
                s,
                log_post: target.log_likelihood(stat, s),
            });
        }
    }
    let kept = config.n_samples - config.n_burn;
    Ok(ChainSamples {
        chain_id,
        draws,
        accept_rate: accepted as f64 / kept as f64,
        burn_in_accept_rate: if config.n_burn == 0 {
            0.0
        } else {
            accepted_burn as f64 / config.n_burn as f64
        },
        proposal_scale: scale,
        start,
    })
}

/// Runs `n_chains` independent chains in parallel and computes R-hat.
pub fn run_chains_with<G: GibbsTarget>(target: &G, config: &McmcConfig) -> Result<McmcRun> {
    config.validate()?;
    let chains = (0..config.n_chains)
        .into_par_iter()
        .map(|k| run_chain_with(target, config, k))
        .collect::<Result<Vec<_>>>()?;
    let rhat = config
        .space
        .free()
        .into_iter()
        .map(|id| {
            let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.values(id)).collect();
            (id, gelman_rubin(&per_chain))
        })
        .collect();
    Ok(McmcRun { chains, rhat })
}

pub fn run_chain(dataset: &Dataset<f64>, config: &McmcConfig, chain_id: usize) -> Result<ChainSamples> {
    run_chain_with(&SeiardTarget::from_config(dataset, config)?, config, chain_id)
}

pub fn run_chains(dataset: &Dataset<f64>, config: &McmcConfig) -> Result<McmcRun> {
    run_chains_with(&SeiardTarget::from_config(dataset, config)?, config)
}

/// Classic potential scale reduction factor over equally long chains.
/// Returns 1 for a single chain or chains that agree exactly, and `+inf` when
/// every chain is constant but they disagree.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m < 2 || n < 2 {
        return 1.0;
    }
    let means: Vec<f64> = chains.iter().map(|c| c[..n].iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c[..n].iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1) as f64 / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

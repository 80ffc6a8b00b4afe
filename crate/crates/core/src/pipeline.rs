//! End-to-end analysis steps driven by a [`RunConfig`].

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ThresholdMode, Variant};
use crate::dynamics::SeriesKind;
use crate::error::{Error, Result};
use crate::loss::{fit_loss_unchecked, mape, FitWindow};
use crate::mcmc::{run_chains, McmcRun};
use crate::optimize::{minimize, OptResult, SearchSpace};
use crate::params::{ModelParams, ParamId};
use crate::posterior::{
    correlation_matrix, hpdi, kde_at, loss_quantile, silverman_bandwidth, spearman, CorrelationMatrix, Hpdi,
};
use crate::profile::{
    build_grid, centred_grid, chi2_threshold, pl_interval, profile_likelihood, unimodality_verdict, GridSpacing,
    PlCurve, PlInterval, Verdict,
};
use crate::seed::derive_seed;
use crate::structural::{sensitivity_matrix, SensitivityReport, SensitivitySetup};
use crate::synthdata::{generate, Dataset};

type Params = ModelParams<f64>;

pub fn dataset(cfg: &RunConfig) -> Result<Dataset<f64>> {
    generate(&cfg.dataset)
}

/// Global fit of the configured variant on `window`. `repeat` selects an
/// independent optimizer seed.
pub fn fit(cfg: &RunConfig, ds: &Dataset<f64>, window: FitWindow, repeat: usize) -> Result<OptResult> {
    window.check_within(ds.horizon())?;
    let seed = derive_seed(cfg.seed, &format!("fit/{:?}/{}/{repeat}", cfg.variant, window.t_end));
    minimize(|p| fit_loss_unchecked(ds, p, window), &cfg.space()?, &cfg.optimizer(), seed)
}

pub fn mcmc(cfg: &RunConfig, ds: &Dataset<f64>, window: FitWindow) -> Result<McmcRun> {
    run_chains(ds, &cfg.mcmc_config(window)?)
}

/// Fit loss on `window` at every pooled posterior draw.
pub fn posterior_losses(ds: &Dataset<f64>, run: &McmcRun, window: FitWindow) -> Vec<f64> {
    run.pooled_draws()
        .par_iter()
        .map(|d| fit_loss_unchecked(ds, &d.theta, window))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub window: FitWindow,
    pub alpha: f64,
    pub hpdi: BTreeMap<ParamId, Hpdi<f64>>,
    pub mean: BTreeMap<ParamId, f64>,
    pub rhat: BTreeMap<ParamId, f64>,
    pub accept_rates: Vec<f64>,
    /// Free quantities in matrix order.
    pub correlation_params: Vec<ParamId>,
    pub correlation: CorrelationMatrix<f64>,
    /// Alpha-quantile of the fit loss over the draws.
    pub loss_threshold: f64,
}

pub fn summarize(
    ds: &Dataset<f64>,
    space: &SearchSpace,
    run: &McmcRun,
    window: FitWindow,
    alpha: f64,
) -> Result<PosteriorSummary> {
    let free = space.free();
    let mut hpdis = BTreeMap::new();
    let mut means = BTreeMap::new();
    let mut columns = Vec::new();
    for id in &free {
        let v = run.pooled(*id);
        hpdis.insert(*id, hpdi(&v, alpha)?);
        means.insert(*id, v.iter().sum::<f64>() / v.len() as f64);
        columns.push(v);
    }
    let losses = posterior_losses(ds, run, window);
    Ok(PosteriorSummary {
        window,
        alpha,
        hpdi: hpdis,
        mean: means,
        rhat: run.rhat.clone(),
        accept_rates: run.chains.iter().map(|c| c.accept_rate).collect(),
        correlation_params: free,
        correlation: correlation_matrix(&columns)?,
        loss_threshold: loss_quantile(&losses, alpha)?,
    })
}

/// Explicit grid if configured, otherwise the default grid centred on `center`.
pub fn profile_grid(cfg: &RunConfig, space: &SearchSpace, id: ParamId, center: f64) -> Result<Vec<f64>> {
    let p = &cfg.profile;
    match p.grids.get(&id) {
        Some(g) => build_grid(
            g.lo,
            g.hi,
            g.points.unwrap_or(p.points),
            g.spacing.unwrap_or_else(|| GridSpacing::default_for(id)),
        ),
        None => centred_grid(space, id, center, p.rel_span, p.points, GridSpacing::default_for(id)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub variant: Variant,
    pub window: FitWindow,
    pub curve: PlCurve,
    pub verdict: Verdict,
    pub interval: PlInterval,
}

/// Profiles `id` on `grid` and intersects it with `threshold`, or with the
/// chi-square offset when no threshold is given.
pub fn profile(
    cfg: &RunConfig,
    ds: &Dataset<f64>,
    window: FitWindow,
    id: ParamId,
    grid: &[f64],
    center: &Params,
    threshold: Option<f64>,
) -> Result<ProfileReport> {
    let space = cfg.space()?;
    let curve = profile_likelihood(ds, id, grid, &space, window, &cfg.profile_settings(window), Some(center))?;
    let level = match threshold {
        Some(t) => t,
        None => chi2_threshold(&curve, cfg.profile.alpha)?,
    };
    let mut interval = pl_interval(&curve, level);
    interval.alpha = Some(cfg.profile.alpha);
    let verdict = if curve.grid.len() >= 5 {
        unimodality_verdict(&curve, cfg.profile.rel_tol)?
    } else {
        Verdict::Inconclusive
    };
    Ok(ProfileReport {
        variant: cfg.variant,
        window,
        curve,
        verdict,
        interval,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowAnalysis {
    pub window: FitWindow,
    pub fit: OptResult,
    pub posterior: Option<PosteriorSummary>,
    #[serde(skip)]
    pub mcmc: Option<McmcRun>,
    pub profiles: Vec<ProfileReport>,
}

/// Fit, optional posterior (needed for the posterior-quantile threshold) and
/// profiles of every configured parameter on one window.
pub fn analyse_window(cfg: &RunConfig, ds: &Dataset<f64>, window: FitWindow) -> Result<WindowAnalysis> {
    let space = cfg.space()?;
    for id in &cfg.profile.params {
        if !space.is_free(*id) {
            return Err(Error::config(format!("{id} is pinned in the {:?} variant", cfg.variant)));
        }
    }
    let best = fit(cfg, ds, window, 0)?;
    let (run, posterior) = match cfg.profile.threshold {
        ThresholdMode::PosteriorQuantile => {
            let run = mcmc(cfg, ds, window)?;
            let summary = summarize(ds, &space, &run, window, cfg.profile.alpha)?;
            (Some(run), Some(summary))
        }
        ThresholdMode::Chi2 => (None, None),
    };
    let threshold = posterior.as_ref().map(|s| s.loss_threshold);
    let profiles = cfg
        .profile
        .params
        .iter()
        .map(|id| {
            let grid = profile_grid(cfg, &space, *id, best.best_params.get(*id))?;
            profile(cfg, ds, window, *id, &grid, &best.best_params, threshold)
        })
        .collect::<Result<_>>()?;
    Ok(WindowAnalysis {
        window,
        fit: best,
        posterior,
        mcmc: run,
        profiles,
    })
}

/// Profile curve and posterior negative log density of one quantity on a
/// shared grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityComparison {
    pub param: ParamId,
    pub grid: Vec<f64>,
    pub profiled_loss: Vec<f64>,
    pub neg_log_density: Vec<f64>,
    pub bandwidth: f64,
    pub rank_correlation: f64,
}

/// Grid spanning the draw range padded by half of it on both sides, clamped
/// to the search bounds.
pub fn comparison_grid(draws: &[f64], space: &SearchSpace, id: ParamId, points: usize) -> Result<Vec<f64>> {
    let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::contract("no finite draws"));
    }
    let pad = 0.5 * (hi - lo).max(1e-6 * hi.abs().max(1.0));
    let b = space.bounds(id);
    build_grid((lo - pad).max(b.lo), (hi + pad).min(b.hi), points, GridSpacing::Linear)
}

pub fn density_comparison(
    cfg: &RunConfig,
    ds: &Dataset<f64>,
    run: &McmcRun,
    window: FitWindow,
    id: ParamId,
    center: &Params,
) -> Result<DensityComparison> {
    let space = cfg.space()?;
    let draws = run.pooled(id);
    let grid = comparison_grid(&draws, &space, id, cfg.profile.points)?;
    let curve = profile_likelihood(ds, id, &grid, &space, window, &cfg.profile_settings(window), Some(center))?;
    let bandwidth = silverman_bandwidth(&draws)?;
    let neg_log_density: Vec<f64> = kde_at(&draws, bandwidth, &grid)
        .into_iter()
        .map(|d| -d.max(f64::MIN_POSITIVE).ln())
        .collect();
    let rank_correlation = spearman(&curve.profiled_loss, &neg_log_density)?;
    Ok(DensityComparison {
        param: id,
        grid,
        profiled_loss: curve.profiled_loss,
        neg_log_density,
        bandwidth,
        rank_correlation,
    })
}

/// Windows named by `profile.windows`, or the fit window.
pub fn profile_windows(cfg: &RunConfig) -> Result<Vec<FitWindow>> {
    if cfg.profile.windows.is_empty() {
        Ok(vec![cfg.window])
    } else {
        cfg.profile.windows.iter().map(|d| FitWindow::leading(*d)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub variant: Variant,
    pub repeat: usize,
    pub train_loss: f64,
    /// Total-series MAPE over `[t_end, t_end + h]` per configured horizon.
    pub test_mape: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastTable {
    pub window: FitWindow,
    pub horizons: Vec<u32>,
    pub rows: Vec<ForecastRow>,
    pub median: BTreeMap<Variant, Vec<f64>>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits both variants `forecast.repeats` times on the fit window and scores
/// their forecasts of the total series beyond it.
pub fn forecast_eval(cfg: &RunConfig, ds: &Dataset<f64>) -> Result<ForecastTable> {
    let horizons = &cfg.forecast.horizons;
    if horizons.is_empty() {
        return Err(Error::config("forecast horizons must not be empty"));
    }
    if cfg.forecast.repeats == 0 {
        return Err(Error::config("forecast repeats must be >= 1"));
    }
    let t_end = cfg.window.t_end;
    let last = t_end + horizons.iter().copied().max().expect("non-empty");
    if last > ds.horizon() {
        return Err(Error::config(format!(
            "forecast reaches day {last} beyond the dataset horizon {}",
            ds.horizon()
        )));
    }
    let jobs: Vec<(Variant, usize)> = [Variant::Original, Variant::Reparam]
        .into_iter()
        .flat_map(|v| (0..cfg.forecast.repeats).map(move |r| (v, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|(variant, repeat)| {
            let vcfg = cfg.with_variant(*variant);
            let r = fit(&vcfg, ds, cfg.window, *repeat)?;
            let pred = ds.simulate(&r.best_params, last)?;
            let truth = ds.observed.series(SeriesKind::Total);
            let guess = pred.series(SeriesKind::Total);
            let test_mape = horizons
                .iter()
                .map(|h| {
                    let span = t_end as usize..=(t_end + h) as usize;
                    mape(&truth[span.clone()], &guess[span])
                })
                .collect::<Result<_>>()?;
            Ok(ForecastRow {
                variant: *variant,
                repeat: *repeat,
                train_loss: r.best_loss,
                test_mape,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut med = BTreeMap::new();
    for variant in [Variant::Original, Variant::Reparam] {
        let per_h = (0..horizons.len())
            .map(|k| median(rows.iter().filter(|r| r.variant == variant).map(|r| r.test_mape[k]).collect()))
            .collect();
        med.insert(variant, per_h);
    }
    Ok(ForecastTable {
        window: cfg.window,
        horizons: horizons.clone(),
        rows,
        median: med,
    })
}

/// Sensitivity rank screen of the variant's free quantities at the dataset
/// truth over days `1..=t_end` of the fit window.
pub fn structural(cfg: &RunConfig) -> Result<SensitivityReport> {
    let d = &cfg.dataset;
    let setup = SensitivitySetup {
        population_n: d.population_n,
        init_observed: d.init_observed,
        active_split: d.active_split,
        dt: d.dt,
    };
    let times: Vec<u32> = (cfg.window.t_begin.max(1)..=cfg.window.t_end).collect();
    sensitivity_matrix(&d.true_params, &cfg.space()?.free(), &setup, &times, cfg.structural.rel_step)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn reparam_fit_is_tight() {
        let cfg = RunConfig::reference(Variant::Reparam);
        let ds = dataset(&cfg).unwrap();
        let r = fit(&cfg, &ds, cfg.window, 0).unwrap();
        assert!(r.best_loss < 0.5, "{}", r.best_loss);
        assert_eq!(r.best_params.t_inf, 6.6);
    }

    #[test]
    fn forecast_contract() {
        let mut cfg = RunConfig::reference(Variant::Reparam);
        cfg.forecast.horizons.clear();
        let ds = dataset(&cfg).unwrap();
        assert!(forecast_eval(&cfg, &ds).is_err());
        cfg.forecast.horizons = vec![1000];
        assert!(forecast_eval(&cfg, &ds).is_err());
    }
}

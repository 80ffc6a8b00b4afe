//! Profile-likelihood curves, identifiability verdicts and level-set
//! intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::loss::{fit_loss_unchecked, FitWindow};
use crate::optimize::{minimize_from, OptimizerConfig, SearchSpace};
use crate::params::{ModelParams, ParamId};
use crate::seed::derive_seed;
use crate::synthdata::Dataset;

type Params = ModelParams<f64>;

/// Default number of grid points per profiled parameter.
pub const DEFAULT_GRID_POINTS: usize = 25;

/// Share of the grid span a flat minimum may cover before the curve is
/// declared non-identifiable.
pub const PLATEAU_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    Linear,
    Log,
}

impl GridSpacing {
    /// Log spacing for time constants, linear otherwise.
    pub fn default_for(id: ParamId) -> Self {
        if id.is_time_constant() {
            GridSpacing::Log
        } else {
            GridSpacing::Linear
        }
    }
}

/// `points` values from `lo` to `hi` inclusive.
pub fn build_grid(lo: f64, hi: f64, points: usize, spacing: GridSpacing) -> Result<Vec<f64>> {
    if points == 0 || !(lo.is_finite() && hi.is_finite()) || lo > hi || (points > 1 && lo == hi) {
        return Err(Error::config(format!(
            "grid needs finite lo < hi and points >= 1, got [{lo}, {hi}] x {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let last = (points - 1) as f64;
    let grid = match spacing {
        GridSpacing::Linear => (0..points).map(|k| lo + (hi - lo) * k as f64 / last).collect(),
        GridSpacing::Log => {
            if lo <= 0.0 {
                return Err(Error::config("log-spaced grid needs lo > 0"));
            }
            let (a, b) = (lo.ln(), hi.ln());
            (0..points).map(|k| (a + (b - a) * k as f64 / last).exp()).collect()
        }
    };
    Ok(grid)
}

/// Grid covering `center * (1 ± rel_span)` clipped to the parameter bounds.
pub fn centred_grid(
    space: &SearchSpace,
    id: ParamId,
    center: f64,
    rel_span: f64,
    points: usize,
    spacing: GridSpacing,
) -> Result<Vec<f64>> {
    let b = space.bounds(id);
    let half = (center.abs() * rel_span).max(1e-3 * b.width());
    let lo = b.clamp(center - half);
    let hi = b.clamp(center + half);
    let lo = if spacing == GridSpacing::Log { lo.max(1e-12) } else { lo };
    build_grid(lo, hi, points, spacing)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSettings {
    /// Inner optimizer per grid point.
    pub optimizer: OptimizerConfig,
    /// Sweep outwards from the grid point nearest the global fit, seeding
    /// each inner run with its neighbour's argmin.
    pub warm_start: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlCurve {
    pub param: ParamId,
    pub grid: Vec<f64>,
    pub profiled_loss: Vec<f64>,
    pub argmins: Vec<Params>,
    /// Inner objective evaluations per grid point.
    pub evaluations: Vec<usize>,
    /// Grid points whose inner run found no feasible point.
    pub failed: Vec<bool>,
}

impl PlCurve {
    pub fn min_loss(&self) -> f64 {
        self.profiled_loss.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmin_index(&self) -> Option<usize> {
        let m = self.min_loss();
        self.profiled_loss.iter().position(|v| *v == m && v.is_finite())
    }
}

fn nearest_index(grid: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (k, g) in grid.iter().enumerate() {
        if (g - x).abs() < (grid[best] - x).abs() {
            best = k;
        }
    }
    best
}

struct PointResult {
    loss: f64,
    argmin: Params,
    evaluations: usize,
    failed: bool,
}

fn profile_point(
    dataset: &Dataset<f64>,
    id: ParamId,
    value: f64,
    space: &SearchSpace,
    window: FitWindow,
    settings: &ProfileSettings,
    index: usize,
    start: Option<&Params>,
) -> Result<PointResult> {
    let inner = space.clone().pin(id, value)?;
    let seed = derive_seed(settings.seed, &format!("profile/{id}/{index}"));
    let starts: Vec<Params> = start.map(|p| p.with(id, value)).into_iter().collect();
    let objective = |p: &Params| fit_loss_unchecked(dataset, p, window);
    match minimize_from(objective, &inner, &settings.optimizer, seed, &starts) {
        Ok(r) => Ok(PointResult {
            loss: r.best_loss,
            argmin: r.best_params,
            evaluations: r.budget_used,
            failed: false,
        }),
        Err(Error::NoFeasiblePoint(n)) => Ok(PointResult {
            loss: f64::INFINITY,
            argmin: inner.centre(),
            evaluations: n,
            failed: true,
        }),
        Err(e) => Err(e),
    }
}

/// Profiles `id` over `grid`: every grid value is pinned and the remaining
/// free parameters are minimized out.
///
/// With warm starts the sweep begins at the grid point nearest `center`
/// (the global fit) and runs outwards in both directions, injecting the
/// neighbouring argmin into each inner run. Without warm starts grid
/// points are independent and profiled in parallel.
pub fn profile_likelihood(
    dataset: &Dataset<f64>,
    id: ParamId,
    grid: &[f64],
    space: &SearchSpace,
    window: FitWindow,
    settings: &ProfileSettings,
    center: Option<&Params>,
) -> Result<PlCurve> {
    if grid.is_empty() {
        return Err(Error::contract("profile grid is empty"));
    }
    if !space.is_free(id) {
        return Err(Error::contract(format!("{id} is pinned and cannot be profiled")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("profile grid must be strictly increasing"));
    }
    let b = space.bounds(id);
    if grid.iter().any(|g| !b.contains(*g)) {
        return Err(Error::contract(format!("profile grid for {id} leaves [{}, {}]", b.lo, b.hi)));
    }
    space.validate()?;
    window.check_within(dataset.horizon())?;

    let results: Vec<PointResult> = if settings.warm_start {
        let mut slots: Vec<Option<PointResult>> = (0..grid.len()).map(|_| None).collect();
        let origin = center.map_or(grid.len() / 2, |c| nearest_index(grid, c.get(id)));
        let mut prev = center.copied();
        for j in origin..grid.len() {
            let r = profile_point(dataset, id, grid[j], space, window, settings, j, prev.as_ref())?;
            if !r.failed {
                prev = Some(r.argmin);
            }
            slots[j] = Some(r);
        }
        let mut prev = slots[origin].as_ref().filter(|r| !r.failed).map(|r| r.argmin).or(center.copied());
        for j in (0..origin).rev() {
            let r = profile_point(dataset, id, grid[j], space, window, settings, j, prev.as_ref())?;
            if !r.failed {
                prev = Some(r.argmin);
            }
            slots[j] = Some(r);
        }
        slots.into_iter().map(|r| r.expect("every grid point visited")).collect()
    } else {
        grid.par_iter()
            .enumerate()
            .map(|(j, g)| profile_point(dataset, id, *g, space, window, settings, j, center))
            .collect::<Result<_>>()?
    };

    Ok(PlCurve {
        param: id,
        grid: grid.to_vec(),
        profiled_loss: results.iter().map(|r| r.loss).collect(),
        argmins: results.iter().map(|r| r.argmin).collect(),
        evaluations: results.iter().map(|r| r.evaluations).collect(),
        failed: results.iter().map(|r| r.failed).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Identifiable,
    NonIdentifiable,
    Inconclusive,
}

/// Shape test of a profile curve. Differences smaller than
/// `rel_tol * (max - min)` count as flat. A flat minimum wider than 20% of the
/// grid span or two or more separated basins give `NonIdentifiable`; a single
/// descent followed by a single ascent gives `Identifiable`.
pub fn unimodality_verdict(curve: &PlCurve, rel_tol: f64) -> Result<Verdict> {
    let (x, y) = (&curve.grid, &curve.profiled_loss);
    if x.len() < 5 || y.len() != x.len() {
        return Err(Error::contract(format!(
            "verdict needs at least 5 grid points, got {}",
            x.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Ok(Verdict::Inconclusive);
    }
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = rel_tol.max(0.0) * (max - min);

    let arg = y.iter().position(|v| *v == min).expect("finite minimum");
    let (mut lo, mut hi) = (arg, arg);
    while lo > 0 && y[lo - 1] <= min + tol {
        lo -= 1;
    }
    while hi + 1 < y.len() && y[hi + 1] <= min + tol {
        hi += 1;
    }
    let span = x[x.len() - 1] - x[0];
    if x[hi] - x[lo] > PLATEAU_FRACTION * span || max - min == 0.0 {
        return Ok(Verdict::NonIdentifiable);
    }

    let signs: Vec<i8> = y
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            if d.abs() <= tol {
                None
            } else if d > 0.0 {
                Some(1)
            } else {
                Some(-1)
            }
        })
        .collect();
    let mut basins = 0;
    let mut changes = 0;
    for w in signs.windows(2) {
        if w[0] != w[1] {
            changes += 1;
            if w[0] < 0 {
                basins += 1;
            }
        }
    }
    if basins >= 2 {
        return Ok(Verdict::NonIdentifiable);
    }
    let descends_first = signs.first() == Some(&-1);
    if changes == 1 && descends_first {
        return Ok(Verdict::Identifiable);
    }
    Ok(Verdict::Inconclusive)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlInterval {
    /// Confidence mass the threshold was derived for, when known.
    pub alpha: Option<f64>,
    pub threshold: f64,
    /// Disjoint `[lo, hi]` pieces of the sub-level set, increasing.
    pub segments: Vec<[f64; 2]>,
    pub censored_left: bool,
    pub censored_right: bool,
}

impl PlInterval {
    /// Hull `[first lo, last hi]` of all segments.
    pub fn hull(&self) -> Option<[f64; 2]> {
        Some([self.segments.first()?[0], self.segments.last()?[1]])
    }

    pub fn hull_width(&self) -> f64 {
        self.hull().map_or(0.0, |[a, b]| b - a)
    }

    /// Total length of all segments.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|[a, b]| b - a).sum()
    }

    pub fn is_censored(&self) -> bool {
        self.censored_left || self.censored_right
    }

    pub fn contains(&self, x: f64) -> bool {
        self.segments.iter().any(|[a, b]| x >= *a && x <= *b)
    }
}

fn crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if !y0.is_finite() || !y1.is_finite() || y1 == y0 {
        // Unevaluable neighbour: stop at the last point inside.
        return if y0 <= level { x0 } else { x1 };
    }
    x0 + (level - y0) / (y1 - y0) * (x1 - x0)
}

/// Sub-level set `{θ : profile(θ) <= threshold}` on the grid, with crossing
/// points linearly interpolated between grid values.
pub fn pl_interval(curve: &PlCurve, threshold: f64) -> PlInterval {
    let (x, y) = (&curve.grid, &curve.profiled_loss);
    let n = x.len();
    let inside: Vec<bool> = y.iter().map(|v| *v <= threshold).collect();
    let mut segments = Vec::new();
    let mut j = 0;
    while j < n {
        if !inside[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j + 1 < n && inside[j + 1] {
            j += 1;
        }
        let lo = if start == 0 {
            x[0]
        } else {
            crossing(x[start], y[start], x[start - 1], y[start - 1], threshold)
        };
        let hi = if j + 1 == n {
            x[n - 1]
        } else {
            crossing(x[j], y[j], x[j + 1], y[j + 1], threshold)
        };
        segments.push([lo, hi]);
        j += 1;
    }
    PlInterval {
        alpha: None,
        threshold,
        censored_left: inside.first().copied().unwrap_or(false),
        censored_right: inside.last().copied().unwrap_or(false),
        segments,
    }
}

/// `min + chi2_1 quantile(alpha)`, the squared-loss calibration.
pub fn chi2_threshold(curve: &PlCurve, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::contract(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    Ok(curve.min_loss() + chi.inverse_cdf(alpha))
}

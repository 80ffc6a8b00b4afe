//! Zeroth-order bounded minimization over the parameter box.
//!
//! Both methods work in the unit cube of the free coordinates; pinned
//! coordinates are carried verbatim into every evaluated point.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Interval, ModelParams, ParamId, ParamTable};
use crate::stats::{normal_log_pdf, sample_truncated, truncation_mass};

type Params = ModelParams<f64>;

/// Per-parameter box with an optional set of pinned coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub bounds: ParamTable<Interval>,
    #[serde(default)]
    pub pinned: BTreeMap<ParamId, f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            bounds: ParamTable::search_bounds(),
            pinned: BTreeMap::new(),
        }
    }
}

impl SearchSpace {
    pub fn new(bounds: ParamTable<Interval>) -> Self {
        SearchSpace {
            bounds,
            pinned: BTreeMap::new(),
        }
    }

    pub fn pin(mut self, id: ParamId, value: f64) -> Result<Self> {
        self.pinned.insert(id, value);
        self.validate()?;
        Ok(self)
    }

    pub fn bounds(&self, id: ParamId) -> Interval {
        *self.bounds.get(id)
    }

    pub fn pinned_value(&self, id: ParamId) -> Option<f64> {
        self.pinned.get(&id).copied()
    }

    pub fn is_free(&self, id: ParamId) -> bool {
        !self.pinned.contains_key(&id)
    }

    /// Free coordinates in canonical parameter order.
    pub fn free(&self) -> Vec<ParamId> {
        ParamId::ALL
            .into_iter()
            .filter(|id| self.is_free(*id))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for id in ParamId::ALL {
            let b = self.bounds(id);
            if !(b.lo.is_finite() && b.hi.is_finite()) {
                return Err(Error::config(format!("bounds of {id} must be finite")));
            }
            match self.pinned_value(id) {
                Some(v) if !b.contains(v) => {
                    return Err(Error::config(format!(
                        "pinned {id} = {v} outside [{}, {}]",
                        b.lo, b.hi
                    )))
                }
                None if !(b.lo < b.hi) => {
                    return Err(Error::config(format!(
                        "free parameter {id} needs lo < hi, got [{}, {}]",
                        b.lo, b.hi
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Params) -> bool {
        ParamId::ALL.into_iter().all(|id| {
            let v = p.get(id);
            match self.pinned_value(id) {
                Some(pin) => v == pin,
                None => self.bounds(id).contains(v),
            }
        })
    }

    /// Pinned values, free coordinates at the box centre.
    pub fn centre(&self) -> Params {
        let mut p = ModelParams::from_array([0.0; 8]);
        for id in ParamId::ALL {
            let b = self.bounds(id);
            p.set(id, self.pinned_value(id).unwrap_or(0.5 * (b.lo + b.hi)));
        }
        p
    }

    /// Replaces pinned coordinates with their pinned values and clamps the
    /// rest into the box.
    pub fn project(&self, p: &Params) -> Params {
        let mut out = *p;
        for id in ParamId::ALL {
            let v = match self.pinned_value(id) {
                Some(pin) => pin,
                None => self.bounds(id).clamp(p.get(id)),
            };
            out.set(id, v);
        }
        out
    }

    fn decode(&self, free: &[ParamId], unit: &[f64], base: &Params) -> Params {
        let mut p = *base;
        for (id, u) in free.iter().zip(unit) {
            let b = self.bounds(*id);
            p.set(*id, b.lo + u.clamp(0.0, 1.0) * b.width());
        }
        p
    }

    fn encode(&self, free: &[ParamId], p: &Params) -> Vec<f64> {
        free.iter()
            .map(|id| {
                let b = self.bounds(*id);
                ((p.get(*id) - b.lo) / b.width()).clamp(0.0, 1.0)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Tree-structured Parzen estimator.
    #[serde(rename = "tpe")]
    Tpe,
    /// Uniform random search followed by box-clipped Nelder-Mead.
    #[serde(rename = "random+nm")]
    RandomNelderMead,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tpe" => Ok(Method::Tpe),
            "random+nm" | "random-nm" | "nm" => Ok(Method::RandomNelderMead),
            other => Err(Error::config(format!("unknown optimizer method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeSettings {
    /// Random draws before the density model takes over.
    pub n_init: usize,
    /// Fraction of evaluations labelled "good".
    pub gamma: f64,
    /// Candidates scored per proposal.
    pub candidates: usize,
}

impl Default for TpeSettings {
    fn default() -> Self {
        TpeSettings {
            n_init: 20,
            gamma: 0.25,
            candidates: 24,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadSettings {
    /// Random draws (including injected starts) before the simplex phase.
    pub n_random: usize,
    /// Initial simplex edge in unit-cube coordinates.
    pub initial_step: f64,
    /// Simplex diameter (unit cube) below which the simplex is restarted.
    pub x_tol: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        NelderMeadSettings {
            n_random: 50,
            initial_step: 0.1,
            x_tol: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    pub budget: usize,
    #[serde(default)]
    pub tpe: TpeSettings,
    #[serde(default)]
    pub nelder_mead: NelderMeadSettings,
}

impl OptimizerConfig {
    pub fn new(method: Method, budget: usize) -> Self {
        OptimizerConfig {
            method,
            budget,
            tpe: TpeSettings::default(),
            nelder_mead: NelderMeadSettings::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub params: Params,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: Params,
    pub best_loss: f64,
    pub evaluations: Vec<Evaluation>,
    pub budget_used: usize,
}

/// Minimizes `objective` over `space` within `config.budget` evaluations.
pub fn minimize<F>(objective: F, space: &SearchSpace, config: &OptimizerConfig, seed: u64) -> Result<OptResult>
where
    F: Fn(&Params) -> f64,
{
    minimize_from(objective, space, config, seed, &[])
}

/// Like [`minimize`], evaluating `starts` (projected into the space) first.
pub fn minimize_from<F>(
    objective: F,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seed: u64,
    starts: &[Params],
) -> Result<OptResult>
where
    F: Fn(&Params) -> f64,
{
    if config.budget == 0 {
        return Err(Error::contract("optimizer budget must be >= 1"));
    }
    space.validate()?;
    let free = space.free();
    let base = space.centre();
    let mut tracker = Tracker {
        objective: &objective,
        space,
        free: &free,
        base,
        budget: config.budget,
        evaluations: Vec::with_capacity(config.budget),
        points: Vec::with_capacity(config.budget),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if free.is_empty() {
        tracker.eval(&[]);
    } else {
        for p in starts {
            tracker.eval_params(&space.project(p));
        }
        match config.method {
            Method::Tpe => run_tpe(&mut tracker, &config.tpe, &mut rng)?,
            Method::RandomNelderMead => run_random_nm(&mut tracker, &config.nelder_mead, &mut rng),
        }
    }
    tracker.finish()
}

struct Tracker<'a, F> {
    objective: &'a F,
    space: &'a SearchSpace,
    free: &'a [ParamId],
    base: Params,
    budget: usize,
    evaluations: Vec<Evaluation>,
    points: Vec<Vec<f64>>,
}

impl<F: Fn(&Params) -> f64> Tracker<'_, F> {
    fn exhausted(&self) -> bool {
        self.evaluations.len() >= self.budget
    }

    /// Evaluates a unit-cube point; `None` once the budget is spent.
    fn eval(&mut self, unit: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        let unit: Vec<f64> = unit.iter().map(|u| u.clamp(0.0, 1.0)).collect();
        let params = self.space.decode(self.free, &unit, &self.base);
        let raw = (self.objective)(&params);
        let loss = if raw.is_nan() { f64::INFINITY } else { raw };
        self.evaluations.push(Evaluation { params, loss });
        self.points.push(unit);
        Some(loss)
    }

    /// Evaluates `params` as given, recording its unit-cube image.
    fn eval_params(&mut self, params: &Params) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        let raw = (self.objective)(params);
        let loss = if raw.is_nan() { f64::INFINITY } else { raw };
        self.evaluations.push(Evaluation { params: *params, loss });
        let unit = self.space.encode(self.free, params).into_iter().map(|u| u.clamp(0.0, 1.0)).collect();
        self.points.push(unit);
        Some(loss)
    }

    fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (k, e) in self.evaluations.iter().enumerate() {
            if best.is_none_or(|b| e.loss < self.evaluations[b].loss) {
                best = Some(k);
            }
        }
        best
    }

    fn finish(self) -> Result<OptResult> {
        let best = self.best().expect("at least one evaluation");
        let best_eval = self.evaluations[best];
        if best_eval.loss == f64::INFINITY {
            return Err(Error::NoFeasiblePoint(self.evaluations.len()));
        }
        Ok(OptResult {
            best_params: best_eval.params,
            best_loss: best_eval.loss,
            budget_used: self.evaluations.len(),
            evaluations: self.evaluations,
        })
    }
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>()).collect()
}

/// One-dimensional Parzen mixture on `[0, 1]`: a uniform prior component plus
/// one truncated Gaussian per observation, equally weighted.
struct Parzen {
    mus: Vec<f64>,
    bandwidth: f64,
    /// Per-component log density offset: `-ln(Z * bandwidth * sqrt(2 pi))`.
    offsets: Vec<f64>,
}

impl Parzen {
    fn new(mus: Vec<f64>) -> Self {
        let bandwidth = 1.0 / (mus.len().max(1) as f64).sqrt();
        let offsets = mus
            .iter()
            .map(|m| normal_log_pdf(0.0, 0.0, bandwidth) - truncation_mass(*m, bandwidth, 0.0, 1.0).max(1e-300).ln())
            .collect();
        Parzen {
            mus,
            bandwidth,
            offsets,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let pick = rng.random_range(0..=self.mus.len());
        if pick == self.mus.len() {
            rng.random()
        } else {
            sample_truncated(rng, self.mus[pick], self.bandwidth, 0.0, 1.0)
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        // Log-sum-exp over components; the prior has density 1, log 0.
        let inv = 1.0 / self.bandwidth;
        let term = |m: f64, off: f64| {
            let z = (x - m) * inv;
            off - 0.5 * z * z
        };
        let max = self
            .mus
            .iter()
            .zip(&self.offsets)
            .fold(0.0f64, |acc, (m, o)| acc.max(term(*m, *o)));
        let sum: f64 = self
            .mus
            .iter()
            .zip(&self.offsets)
            .map(|(m, o)| (term(*m, *o) - max).exp())
            .sum::<f64>()
            + (-max).exp();
        max + sum.ln() - ((self.mus.len() + 1) as f64).ln()
    }
}

fn run_tpe<F, R>(
    tracker: &mut Tracker<'_, F>,
    settings: &TpeSettings,
    rng: &mut R,
) -> Result<()>
where
    F: Fn(&Params) -> f64,
    R: Rng,
{
    if !(settings.gamma > 0.0 && settings.gamma < 1.0) || settings.candidates == 0 {
        return Err(Error::config("tpe needs 0 < gamma < 1 and candidates >= 1"));
    }
    let d = tracker.free.len();
    while tracker.evaluations.len() < settings.n_init.max(2) {
        let u = random_unit(rng, d);
        if tracker.eval(&u).is_none() {
            return Ok(());
        }
    }
    while !tracker.exhausted() {
        let n = tracker.evaluations.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| {
            tracker.evaluations[*a]
                .loss
                .total_cmp(&tracker.evaluations[*b].loss)
                .then(a.cmp(b))
        });
        let n_good = ((settings.gamma * n as f64).ceil() as usize).clamp(1, n - 1);
        let (good, bad) = order.split_at(n_good);
        let models: Vec<(Parzen, Parzen)> = (0..d)
            .map(|k| {
                let col = |idx: &[usize]| idx.iter().map(|i| tracker.points[*i][k]).collect();
                (Parzen::new(col(good)), Parzen::new(col(bad)))
            })
            .collect();

        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..settings.candidates {
            let cand: Vec<f64> = models.iter().map(|(l, _)| l.sample(rng)).collect();
            let score: f64 = cand
                .iter()
                .zip(&models)
                .map(|(x, (l, g))| l.log_density(*x) - g.log_density(*x))
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cand));
            }
        }
        let (_, next) = best.expect("candidates >= 1");
        tracker.eval(&next);
    }
    Ok(())
}

fn run_random_nm<F, R>(
    tracker: &mut Tracker<'_, F>,
    settings: &NelderMeadSettings,
    rng: &mut R,
) where
    F: Fn(&Params) -> f64,
    R: Rng,
{
    let d = tracker.free.len();
    while tracker.evaluations.len() < settings.n_random.max(1) {
        let u = random_unit(rng, d);
        if tracker.eval(&u).is_none() {
            return;
        }
    }

    let mut step = settings.initial_step;
    let mut last_best = f64::INFINITY;
    while !tracker.exhausted() {
        let b = tracker.best().expect("evaluated");
        let (x0, f0) = (tracker.points[b].clone(), tracker.evaluations[b].loss);
        if f0 < last_best {
            step = settings.initial_step;
        } else {
            step *= 0.5;
            if step < 1e-6 {
                step = settings.initial_step;
            }
        }
        last_best = f0;
        if nelder_mead(tracker, x0, f0, step, settings.x_tol).is_none() {
            return;
        }
    }
}

/// One Nelder-Mead descent from `x0` until the simplex collapses. Returns
/// `None` when the budget runs out.
fn nelder_mead<F>(tracker: &mut Tracker<'_, F>, x0: Vec<f64>, f0: f64, step: f64, x_tol: f64) -> Option<()>
where
    F: Fn(&Params) -> f64,
{
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let d = x0.len();
    let clip = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), f0)];
    for k in 0..d {
        let mut v = x0.clone();
        v[k] = if v[k] + step <= 1.0 { v[k] + step } else { v[k] - step };
        let f = tracker.eval(&v)?;
        simplex.push((clip(v), f));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < x_tol {
            return Some(());
        }

        let worst = simplex[d].clone();
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(v, _)| v[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            clip(
                centroid
                    .iter()
                    .zip(from)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };

        let xr = along(REFLECT, &worst.0);
        let fr = tracker.eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(EXPAND, &worst.0);
            let fe = tracker.eval(&xe)?;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(CONTRACT * REFLECT, &worst.0);
            let fc = tracker.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-CONTRACT, &worst.0);
            let fc = tracker.eval(&xc)?;
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[d] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            let f = tracker.eval(&v)?;
            *vertex = (v, f);
        }
    }
}

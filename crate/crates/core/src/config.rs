//! Run configuration shared by the pipeline and the command line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::loss::FitWindow;
use crate::mcmc::{Adaptation, LikelihoodComponents, McmcConfig};
use crate::optimize::{Method, NelderMeadSettings, OptimizerConfig, SearchSpace, TpeSettings};
use crate::params::{Interval, ParamId, ParamTable};
use crate::profile::{GridSpacing, ProfileSettings, DEFAULT_GRID_POINTS};
use crate::seed::derive_seed;
use crate::structural::DEFAULT_REL_STEP;
use crate::synthdata::DatasetConfig;

/// Parameters pinned by the reparameterized variant.
pub const REPARAM_PINNED: [ParamId; 3] = [ParamId::TInc, ParamId::TInf, ParamId::TFatal];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// All eight quantities free.
    #[default]
    Original,
    /// Incubation, infectious and fatal delays pinned.
    Reparam,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Reparam => "reparam",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" => Ok(Variant::Original),
            "reparam" => Ok(Variant::Reparam),
            other => Err(Error::config(format!("unknown variant `{other}` (original | reparam)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub method: Method,
    /// `None` picks 2000 evaluations for the original variant and 500 for
    /// the reparameterized one.
    pub budget: Option<usize>,
    pub tpe: TpeSettings,
    pub nelder_mead: NelderMeadSettings,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            method: Method::RandomNelderMead,
            budget: None,
            tpe: TpeSettings::default(),
            nelder_mead: NelderMeadSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcSettings {
    pub proposal_variances: ParamTable<f64>,
    pub u: f64,
    pub v: f64,
    pub n_samples: usize,
    pub n_burn: usize,
    pub n_chains: usize,
    pub thin: usize,
    pub hastings_correction: bool,
    pub components: LikelihoodComponents,
    pub adaptation: Adaptation,
}

impl Default for McmcSettings {
    fn default() -> Self {
        let c = McmcConfig::new(SearchSpace::default(), FitWindow { t_begin: 0, t_end: 28 }, 0);
        McmcSettings {
            proposal_variances: c.proposal_variances,
            u: c.u,
            v: c.v,
            n_samples: c.n_samples,
            n_burn: c.n_burn,
            n_chains: c.n_chains,
            thin: c.thin,
            hastings_correction: c.hastings_correction,
            components: c.components,
            adaptation: c.adaptation,
        }
    }
}

/// How the level for profile intervals is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Alpha-quantile of the fit loss over posterior draws.
    #[default]
    PosteriorQuantile,
    /// Profile minimum plus the chi-square(1) alpha-quantile.
    Chi2,
}

/// Explicit grid for one parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Option<GridSpacing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileConfig {
    pub params: Vec<ParamId>,
    pub points: usize,
    /// Half-width of default grids relative to the global fit value.
    pub rel_span: f64,
    /// Explicit grids overriding the default for individual parameters.
    pub grids: BTreeMap<ParamId, GridSpec>,
    pub inner_method: Method,
    pub inner_budget: usize,
    pub warm_start: bool,
    pub rel_tol: f64,
    pub alpha: f64,
    pub threshold: ThresholdMode,
    /// Training durations (days from day 0) to profile over; empty means the
    /// configured fit window only.
    pub windows: Vec<u32>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            params: vec![ParamId::Beta, ParamId::PFatal],
            points: DEFAULT_GRID_POINTS,
            rel_span: 0.5,
            grids: BTreeMap::new(),
            inner_method: Method::RandomNelderMead,
            inner_budget: 500,
            warm_start: true,
            rel_tol: 0.01,
            alpha: 0.95,
            threshold: ThresholdMode::PosteriorQuantile,
            windows: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Days past the end of the fit window.
    pub horizons: Vec<u32>,
    /// Number of independent fits (optimizer seeds) per variant.
    pub repeats: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            horizons: vec![0, 7, 14, 25, 50, 100, 150],
            repeats: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuralConfig {
    pub rel_step: f64,
}

impl Default for StructuralConfig {
    fn default() -> Self {
        StructuralConfig {
            rel_step: DEFAULT_REL_STEP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig<f64>,
    pub variant: Variant,
    /// Values the reparameterized variant pins; missing entries fall back to
    /// the dataset truth.
    pub reparam_pins: BTreeMap<ParamId, f64>,
    pub bounds: ParamTable<Interval>,
    pub window: FitWindow,
    pub fit: FitSettings,
    pub mcmc: McmcSettings,
    pub profile: ProfileConfig,
    pub forecast: ForecastConfig,
    pub structural: StructuralConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: DatasetConfig::reference(),
            variant: Variant::Original,
            reparam_pins: BTreeMap::new(),
            bounds: ParamTable::search_bounds(),
            window: FitWindow { t_begin: 0, t_end: 28 },
            fit: FitSettings::default(),
            mcmc: McmcSettings::default(),
            profile: ProfileConfig::default(),
            forecast: ForecastConfig::default(),
            structural: StructuralConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn reference(variant: Variant) -> Self {
        RunConfig {
            variant,
            ..RunConfig::default()
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        RunConfig {
            variant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.window.check_within(self.dataset.horizon).map_err(|e| Error::config(e.to_string()))?;
        for id in self.reparam_pins.keys() {
            if !REPARAM_PINNED.contains(id) {
                return Err(Error::config(format!(
                    "reparam_pins may only pin t_inc, t_inf, t_fatal, got {id}"
                )));
            }
        }
        self.space()?.validate()?;
        if self.fit.budget == Some(0) || self.profile.inner_budget == 0 {
            return Err(Error::config("optimizer budgets must be >= 1"));
        }
        if !(self.profile.alpha > 0.0 && self.profile.alpha < 1.0) {
            return Err(Error::config("profile.alpha must lie in (0, 1)"));
        }
        if self.profile.points < 1 {
            return Err(Error::config("profile.points must be >= 1"));
        }
        for w in &self.profile.windows {
            FitWindow::leading(*w)
                .and_then(|fw| fw.check_within(self.dataset.horizon))
                .map_err(|e| Error::config(e.to_string()))?;
        }
        self.mcmc_config(self.window)?.validate()
    }

    /// Search box with the variant's pins applied.
    pub fn space(&self) -> Result<SearchSpace> {
        let mut space = SearchSpace::new(self.bounds.clone());
        if self.variant == Variant::Reparam {
            for id in REPARAM_PINNED {
                let value = self
                    .reparam_pins
                    .get(&id)
                    .copied()
                    .unwrap_or_else(|| self.dataset.true_params.get(id));
                space = space.pin(id, value)?;
            }
        }
        Ok(space)
    }

    pub fn fit_budget(&self) -> usize {
        self.fit.budget.unwrap_or(match self.variant {
            Variant::Original => 2000,
            Variant::Reparam => 500,
        })
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            method: self.fit.method,
            budget: self.fit_budget(),
            tpe: self.fit.tpe,
            nelder_mead: self.fit.nelder_mead,
        }
    }

    pub fn mcmc_config(&self, window: FitWindow) -> Result<McmcConfig> {
        let m = &self.mcmc;
        Ok(McmcConfig {
            space: self.space()?,
            proposal_variances: m.proposal_variances.clone(),
            u: m.u,
            v: m.v,
            window,
            n_samples: m.n_samples,
            n_burn: m.n_burn,
            n_chains: m.n_chains,
            thin: m.thin,
            seed: derive_seed(self.seed, &format!("mcmc/{}", window.t_end)),
            hastings_correction: m.hastings_correction,
            components: m.components,
            adaptation: m.adaptation,
        })
    }

    pub fn profile_settings(&self, window: FitWindow) -> ProfileSettings {
        let mut optimizer = OptimizerConfig::new(self.profile.inner_method, self.profile.inner_budget);
        optimizer.tpe = self.fit.tpe;
        optimizer.nelder_mead = self.fit.nelder_mead;
        ProfileSettings {
            optimizer,
            warm_start: self.profile.warm_start,
            seed: derive_seed(self.seed, &format!("profile/{}", window.t_end)),
        }
    }

}

/// Applies `path=value` overrides to a JSON document. `path` is dot separated;
/// missing objects are created. `value` is parsed as JSON and falls back to a
/// plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{assignment}` is not path=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if path.is_empty() || keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("override path `{path}` is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        node = match node {
            Value::Object(map) => map
                .entry((*key).to_string())
                .or_insert_with(|| Value::Object(Default::default())),
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::config(format!("`{key}` in `{path}` indexes an array")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(format!("index {idx} out of range in `{path}`")))?
            }
            _ => return Err(Error::config(format!("`{path}` descends into a scalar"))),
        };
    }
    let last = keys[keys.len() - 1];
    match node {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
        }
        Value::Array(items) => {
            let idx: usize = last
                .parse()
                .map_err(|_| Error::config(format!("`{last}` in `{path}` indexes an array")))?;
            *items
                .get_mut(idx)
                .ok_or_else(|| Error::config(format!("index {idx} out of range in `{path}`")))? = value;
        }
        _ => return Err(Error::config(format!("`{path}` descends into a scalar"))),
    }
    Ok(())
}

/// Builds a configuration from an optional JSON document plus overrides.
/// Unknown fields are rejected by re-serialization round trip.
pub fn load(doc: Option<Value>, overrides: &[String]) -> Result<RunConfig> {
    let mut doc = match doc {
        Some(d) => d,
        None => serde_json::to_value(RunConfig::default())?,
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(doc.clone()).map_err(|e| Error::config(e.to_string()))?;
    check_known_fields(&doc, &serde_json::to_value(&cfg)?, "")?;
    cfg.validate()?;
    Ok(cfg)
}

fn check_known_fields(given: &Value, parsed: &Value, prefix: &str) -> Result<()> {
    if let (Value::Object(g), Value::Object(p)) = (given, parsed) {
        for (k, v) in g {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match p.get(k) {
                Some(pv) => check_known_fields(v, pv, &path)?,
                None => return Err(Error::config(format!("unknown configuration field `{path}`"))),
            }
        }
    }
    Ok(())
}

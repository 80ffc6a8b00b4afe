//! Synthetic ground-truth datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate, observe, seeded_state, ActiveSplit, InitialObserved, ObservedSeries, SeriesKind,
};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::scalar::Scalar;

/// Observation noise model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    Off,
    /// `value * exp(eps)`, `eps ~ Normal(0, sigma^2)`, independent per series and day.
    LogNormal { sigma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct DatasetConfig<T> {
    pub true_params: ModelParams<T>,
    pub population_n: T,
    /// Days simulated after day 0.
    pub horizon: u32,
    pub init_observed: InitialObserved<T>,
    #[serde(default)]
    pub active_split: ActiveSplit,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    /// RK4 step (days).
    pub dt: T,
}

impl<T: Scalar> DatasetConfig<T> {
    /// Reference truth, `N = 1e7`, 400-day horizon, `(A0, R0, D0) = (5, 0, 0)`,
    /// noise off.
    pub fn reference() -> Self {
        DatasetConfig {
            true_params: ModelParams::reference(),
            population_n: T::lit(1e7),
            horizon: 400,
            init_observed: InitialObserved::reference(),
            active_split: ActiveSplit::Proportional,
            noise: NoiseSpec::Off,
            seed: 0,
            dt: T::lit(0.1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::config("dataset horizon must be at least 1 day"));
        }
        if let NoiseSpec::LogNormal { sigma } = self.noise {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::config("noise sigma must be finite and >= 0"));
            }
        }
        self.true_params.validate()
    }
}

/// Observed series over `[0, horizon]` together with the configuration that
/// produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct Dataset<T> {
    pub observed: ObservedSeries<T>,
    pub config: DatasetConfig<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn horizon(&self) -> u32 {
        self.config.horizon
    }

    /// Simulates `params` from day 0 under this dataset's population, initial
    /// observations and step size, returning observations on `0..=horizon`.
    pub fn simulate(&self, params: &ModelParams<T>, horizon: u32) -> Result<ObservedSeries<T>> {
        let c = &self.config;
        let init = seeded_state(params, c.population_n, &c.init_observed, c.active_split)?;
        let traj = integrate(params, &init, c.population_n, horizon, c.dt)?;
        Ok(observe(&traj))
    }
}

/// Simulates the configured truth and applies the optional noise model.
pub fn generate<T: Scalar>(config: &DatasetConfig<T>) -> Result<Dataset<T>> {
    config.validate()?;
    let mut dataset = Dataset {
        observed: ObservedSeries {
            days: Vec::new(),
            active: Vec::new(),
            recovered: Vec::new(),
            deceased: Vec::new(),
            total: Vec::new(),
        },
        config: config.clone(),
    };
    dataset.observed = dataset.simulate(&config.true_params, config.horizon)?;

    if let NoiseSpec::LogNormal { sigma } = config.noise {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::config(e.to_string()))?;
        for (stream, kind) in SeriesKind::OBSERVED.into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream as u64);
            let series = dataset.observed.series_mut(kind);
            for v in series.iter_mut() {
                let eps: f64 = normal.sample(&mut rng);
                *v *= T::lit(eps.exp());
            }
            if matches!(kind, SeriesKind::Recovered | SeriesKind::Deceased) {
                let mut running = T::neg_infinity();
                for v in series.iter_mut() {
                    running = running.max(*v);
                    *v = running;
                }
            }
        }
        dataset.observed.refresh_total();
    }
    Ok(dataset)
}

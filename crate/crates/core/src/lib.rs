//! Simulation, fitting and identifiability analysis for the SEIARD
//! compartmental epidemic model.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod loss;
pub mod mcmc;
pub mod optimize;
pub mod params;
pub mod pipeline;
pub mod posterior;
pub mod profile;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod structural;
pub mod synthdata;

pub use error::{Error, Result};
pub use params::{Interval, ModelParams, ParamId, ParamTable};
pub use scalar::Scalar;

pub type ModelParams64 = ModelParams<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type State64 = dynamics::State<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
pub type ObservedSeries64 = dynamics::ObservedSeries<f64>;
pub type Dataset64 = synthdata::Dataset<f64>;
pub type Dataset32 = synthdata::Dataset<f32>;
pub type DatasetConfig64 = synthdata::DatasetConfig<f64>;
pub type Hpdi64 = posterior::Hpdi<f64>;

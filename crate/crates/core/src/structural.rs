//! Local numeric identifiability screen: rank of the output sensitivity
//! matrix with respect to the free quantities.
//!
//! This is local numeric evidence at one parameter point, not a symbolic
//! observability test.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, observe, seeded_state, ActiveSplit, InitialObserved, SeriesKind};
use crate::error::{Error, Result};
use crate::loss::COUNT_FLOOR;
use crate::params::{ModelParams, ParamId};

type Params = ModelParams<f64>;

/// Default relative finite-difference step.
pub const DEFAULT_REL_STEP: f64 = 1e-4;

/// Ratio `sigma_min / sigma_max` below which a direction is reported as
/// nearly unidentifiable.
pub const NEAR_NULL_RATIO: f64 = 1e-4;

/// Everything besides the parameters that fixes the forward map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySetup {
    pub population_n: f64,
    pub init_observed: InitialObserved<f64>,
    #[serde(default)]
    pub active_split: ActiveSplit,
    pub dt: f64,
}

impl SensitivitySetup {
    pub fn reference() -> Self {
        SensitivitySetup {
            population_n: 1e7,
            init_observed: InitialObserved::reference(),
            active_split: ActiveSplit::Proportional,
            dt: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullDirection {
    pub singular_value: f64,
    /// Unit-norm right singular vector, keyed by quantity.
    pub loadings: BTreeMap<ParamId, f64>,
}

impl NullDirection {
    /// Quantities ordered by decreasing absolute loading.
    pub fn dominant(&self) -> Vec<(ParamId, f64)> {
        let mut v: Vec<(ParamId, f64)> = self.loadings.iter().map(|(k, x)| (*k, *x)).collect();
        v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub quantities: Vec<ParamId>,
    pub times: Vec<u32>,
    /// Row-major `(3 * times) x quantities`; rows are grouped by day
    /// (active, recovered, deceased).
    pub matrix: Vec<Vec<f64>>,
    /// Singular values of the column-normalized matrix, decreasing.
    pub singular_values: Vec<f64>,
    pub numeric_rank: usize,
    pub rank_tolerance: f64,
    pub condition_number: f64,
    /// Smallest-singular-value direction, followed by any other direction
    /// with `sigma / sigma_max < 1e-4`, weakest first.
    pub near_null: Vec<NullDirection>,
}

impl SensitivityReport {
    pub fn is_full_rank(&self) -> bool {
        self.numeric_rank == self.quantities.len()
    }
}

fn outputs(params: &Params, setup: &SensitivitySetup, times: &[u32]) -> Result<Vec<f64>> {
    let horizon = *times.iter().max().expect("non-empty times");
    let init = seeded_state(params, setup.population_n, &setup.init_observed, setup.active_split)?;
    let obs = observe(&integrate(params, &init, setup.population_n, horizon, setup.dt)?);
    let mut out = Vec::with_capacity(times.len() * 3);
    for t in times {
        for kind in SeriesKind::OBSERVED {
            out.push(obs.series(kind)[*t as usize]);
        }
    }
    Ok(out)
}

/// Central-difference log sensitivities `∂y/∂θ · |θ| / max(y, 1)` of the
/// observed series at `times` with respect to `quantities`, followed by an
/// SVD rank analysis.
pub fn sensitivity_matrix(
    params: &Params,
    quantities: &[ParamId],
    setup: &SensitivitySetup,
    times: &[u32],
    rel_step: f64,
) -> Result<SensitivityReport> {
    if times.is_empty() || quantities.is_empty() {
        return Err(Error::contract("sensitivity needs at least one time and one quantity"));
    }
    if !(rel_step > 0.0 && rel_step < 0.5) {
        return Err(Error::contract(format!("rel_step must lie in (0, 0.5), got {rel_step}")));
    }
    params.validate()?;
    let base = outputs(params, setup, times)?;
    let row_scale = |y: f64| y.abs().max(COUNT_FLOOR);
    let columns: Vec<Vec<f64>> = quantities
        .par_iter()
        .map(|id| {
            let x = params.get(*id);
            let scale = if x != 0.0 { x.abs() } else { 1.0 };
            let h = rel_step * scale;
            let wrap = |e: Error| Error::Sensitivity {
                param: *id,
                source: Box::new(e),
            };
            let up = outputs(&params.with(*id, x + h), setup, times).map_err(wrap)?;
            let down = outputs(&params.with(*id, x - h), setup, times).map_err(wrap)?;
            Ok(up
                .iter()
                .zip(&down)
                .zip(&base)
                .map(|((a, b), y)| (a - b) / (2.0 * h) * scale / row_scale(*y))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(analyse(quantities, times, &columns))
}

/// Rank analysis of given sensitivity columns. Columns are scaled to unit
/// norm first, so the result does not depend on how each quantity is scaled.
pub fn analyse(quantities: &[ParamId], times: &[u32], columns: &[Vec<f64>]) -> SensitivityReport {
    let rows = columns[0].len();
    let k = columns.len();
    let norms: Vec<f64> = columns
        .iter()
        .map(|c| {
            let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 { n } else { 1.0 }
        })
        .collect();
    let m = DMatrix::from_fn(rows, k, |r, c| columns[c][r] / norms[c]);
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let singular_values: Vec<f64> = order.iter().map(|i| svd.singular_values[*i]).collect();

    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tol = sigma_max * rows.max(k) as f64 * f64::EPSILON * 1e3;
    let numeric_rank = singular_values.iter().filter(|s| **s > tol).count();
    let sigma_min = singular_values.last().copied().unwrap_or(0.0);
    let condition_number = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };

    let direction = |pos: usize| {
        let row = order[pos];
        NullDirection {
            singular_value: singular_values[pos],
            loadings: quantities.iter().enumerate().map(|(c, id)| (*id, v_t[(row, c)])).collect(),
        }
    };
    let mut near_null = Vec::new();
    if k <= rows {
        for pos in (0..singular_values.len()).rev() {
            if pos == singular_values.len() - 1 || singular_values[pos] < NEAR_NULL_RATIO * sigma_max {
                near_null.push(direction(pos));
            } else {
                break;
            }
        }
    }

    SensitivityReport {
        quantities: quantities.to_vec(),
        times: times.to_vec(),
        matrix: (0..rows).map(|r| (0..k).map(|c| columns[c][r]).collect()).collect(),
        singular_values,
        numeric_rank,
        rank_tolerance: tol,
        condition_number,
        near_null,
    }
}

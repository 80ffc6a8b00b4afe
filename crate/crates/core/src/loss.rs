//! Fitting objective: mean of the per-series MAPEs over a window.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ObservedSeries, SeriesKind};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::scalar::Scalar;
use crate::synthdata::Dataset;

/// Denominator floor (persons) for MAPE and the log guard of the likelihood.
pub const COUNT_FLOOR: f64 = 1.0;

/// Inclusive day range `[t_begin, t_end]` into a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_begin: u32,
    pub t_end: u32,
}

impl FitWindow {
    pub fn new(t_begin: u32, t_end: u32) -> Result<Self> {
        if t_begin >= t_end {
            return Err(Error::contract(format!(
                "fit window needs t_begin < t_end, got [{t_begin}, {t_end}]"
            )));
        }
        Ok(FitWindow { t_begin, t_end })
    }

    /// Window of `days` daily transitions starting at day 0.
    pub fn leading(days: u32) -> Result<Self> {
        Self::new(0, days)
    }

    pub fn check_within(&self, horizon: u32) -> Result<()> {
        if self.t_begin >= self.t_end || self.t_end > horizon {
            return Err(Error::contract(format!(
                "fit window [{}, {}] not inside [0, {horizon}]",
                self.t_begin, self.t_end
            )));
        }
        Ok(())
    }

    /// Number of observation days in the window.
    pub fn points(&self) -> usize {
        (self.t_end - self.t_begin) as usize + 1
    }

    pub(crate) fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.t_begin as usize..=self.t_end as usize
    }
}

/// Mean absolute percentage error, `(100/n) Σ |truth - pred| / max(truth, 1)`.
pub fn mape<T: Scalar>(truth: &[T], pred: &[T]) -> Result<T> {
    if truth.len() != pred.len() {
        return Err(Error::contract(format!(
            "mape length mismatch: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::contract("mape of empty series"));
    }
    Ok(mape_unchecked(truth, pred))
}

#[inline]
fn mape_unchecked<T: Scalar>(truth: &[T], pred: &[T]) -> T {
    let floor = T::lit(COUNT_FLOOR);
    let sum: T = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (*t - *p).abs() / t.max(floor))
        .sum();
    T::lit(100.0) * sum / T::lit(truth.len() as f64)
}

/// Unweighted mean of the active/recovered/deceased/total MAPEs between two
/// series restricted to `window`.
pub fn window_mape<T: Scalar>(
    truth: &ObservedSeries<T>,
    pred: &ObservedSeries<T>,
    window: FitWindow,
) -> T {
    let r = window.range();
    let sum: T = SeriesKind::ALL
        .into_iter()
        .map(|k| mape_unchecked(&truth.series(k)[r.clone()], &pred.series(k)[r.clone()]))
        .sum();
    sum / T::lit(4.0)
}

/// Loss of `params` against `dataset` on `window`; `+inf` if the simulation
/// diverges or the parameters leave their domain.
pub fn fit_loss<T: Scalar>(dataset: &Dataset<T>, params: &ModelParams<T>, window: FitWindow) -> Result<T> {
    window.check_within(dataset.horizon())?;
    Ok(fit_loss_unchecked(dataset, params, window))
}

/// [`fit_loss`] without the window check, for inner loops that validated once.
pub(crate) fn fit_loss_unchecked<T: Scalar>(
    dataset: &Dataset<T>,
    params: &ModelParams<T>,
    window: FitWindow,
) -> T {
    match dataset.simulate(params, window.t_end) {
        Ok(pred) => {
            let loss = window_mape(&dataset.observed, &pred, window);
            if loss.is_nan() {
                T::infinity()
            } else {
                loss
            }
        }
        Err(_) => T::infinity(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamId;
    use crate::synthdata::{generate, DatasetConfig};

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[10.0, 20.0], &[10.0, 20.0]).unwrap(), 0.0);
        assert!((mape::<f64>(&[10.0], &[11.0]).unwrap() - 10.0).abs() < 1e-12);
        assert!((mape::<f64>(&[10.0, 20.0], &[12.0, 18.0]).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn mape_floors_small_denominators() {
        assert!((mape::<f64>(&[0.0], &[0.5]).unwrap() - 50.0).abs() < 1e-12);
        assert!((mape(&[0.25f32], &[0.75]).unwrap() - 50.0).abs() < 1e-5);
    }

    #[test]
    fn mape_contract() {
        assert!(mape(&[1.0, 2.0], &[1.0]).is_err());
        assert!(mape::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn window_validation() {
        assert!(FitWindow::new(5, 5).is_err());
        let w = FitWindow::leading(28).unwrap();
        assert_eq!(w.points(), 29);
        assert!(w.check_within(27).is_err());
        assert!(w.check_within(28).is_ok());
    }

    #[test]
    fn truth_has_zero_loss_and_perturbations_do_not() {
        let ds = generate(&DatasetConfig::<f64>::reference()).unwrap();
        let w = FitWindow::leading(28).unwrap();
        let truth = ModelParams::reference();
        assert!(fit_loss(&ds, &truth, w).unwrap() <= 1e-9);

        let at_truth = fit_loss(&ds, &truth, w).unwrap();
        let bumped = fit_loss(&ds, &truth.with(ParamId::Beta, 0.275), w).unwrap();
        assert!(bumped > at_truth);
        let flat = fit_loss(&ds, &truth.with(ParamId::Beta, 0.0), w).unwrap();
        assert!(flat > 0.0);
    }

    #[test]
    fn invalid_params_give_infinite_loss() {
        let ds = generate(&DatasetConfig::<f64>::reference()).unwrap();
        let w = FitWindow::leading(28).unwrap();
        let bad = ModelParams::<f64>::reference().with(ParamId::TInc, -2.0);
        assert_eq!(fit_loss(&ds, &bad, w).unwrap(), f64::INFINITY);
        assert!(fit_loss(&ds, &bad, FitWindow::leading(500).unwrap()).is_err());
    }
}

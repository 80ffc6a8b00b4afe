//! Model parameters and per-parameter tables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Identifies one of the eight fitted quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamId {
    Beta,
    TInc,
    TInf,
    TRecov,
    TFatal,
    PFatal,
    E0,
    I0,
}

impl ParamId {
    pub const ALL: [ParamId; 8] = [
        ParamId::Beta,
        ParamId::TInc,
        ParamId::TInf,
        ParamId::TRecov,
        ParamId::TFatal,
        ParamId::PFatal,
        ParamId::E0,
        ParamId::I0,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Beta => "beta",
            ParamId::TInc => "t_inc",
            ParamId::TInf => "t_inf",
            ParamId::TRecov => "t_recov",
            ParamId::TFatal => "t_fatal",
            ParamId::PFatal => "p_fatal",
            ParamId::E0 => "e0",
            ParamId::I0 => "i0",
        }
    }

    /// Time constants span two decades and are profiled on a log grid.
    pub fn is_time_constant(self) -> bool {
        matches!(
            self,
            ParamId::TInc | ParamId::TInf | ParamId::TRecov | ParamId::TFatal
        )
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamId::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown parameter name `{s}`")))
    }
}

/// The six rate/probability parameters plus the two unobserved initial counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Transmission rate (1/day).
    pub beta: T,
    /// Incubation period (days).
    pub t_inc: T,
    /// Infectious period (days).
    pub t_inf: T,
    /// Recovery duration (days).
    pub t_recov: T,
    /// Fatality duration (days).
    pub t_fatal: T,
    /// Probability of the fatal branch.
    pub p_fatal: T,
    /// Initial exposed count (persons).
    pub e0: T,
    /// Initial infectious count (persons).
    pub i0: T,
}

/// Values used to generate the reference synthetic dataset, in [`ParamId::ALL`] order.
pub const TRUE_VALUES: [f64; 8] = [0.25, 5.10, 6.60, 14.00, 10.00, 0.03, 1.00, 1.00];

/// Default search box, in [`ParamId::ALL`] order.
pub const SEARCH_BOUNDS: [(f64, f64); 8] = [
    (0.0, 1.0),
    (1.0, 100.0),
    (1.0, 100.0),
    (1.0, 100.0),
    (1.0, 100.0),
    (0.0, 1.0),
    (0.0, 5.0),
    (0.0, 5.0),
];

/// Diagonal of the sampler's proposal covariance, in [`ParamId::ALL`] order.
pub const PROPOSAL_VARIANCES: [f64; 8] = [0.10, 4.00, 4.00, 4.00, 4.00, 0.01, 0.50, 0.50];

impl<T: Scalar> ModelParams<T> {
    pub fn from_array(v: [T; 8]) -> Self {
        ModelParams {
            beta: v[0],
            t_inc: v[1],
            t_inf: v[2],
            t_recov: v[3],
            t_fatal: v[4],
            p_fatal: v[5],
            e0: v[6],
            i0: v[7],
        }
    }

    pub fn to_array(&self) -> [T; 8] {
        [
            self.beta,
            self.t_inc,
            self.t_inf,
            self.t_recov,
            self.t_fatal,
            self.p_fatal,
            self.e0,
            self.i0,
        ]
    }

    /// The reference ("true") parameter set.
    pub fn reference() -> Self {
        Self::from_array(TRUE_VALUES.map(T::lit))
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> T {
        self.to_array()[id.index()]
    }

    pub fn set(&mut self, id: ParamId, value: T) {
        match id {
            ParamId::Beta => self.beta = value,
            ParamId::TInc => self.t_inc = value,
            ParamId::TInf => self.t_inf = value,
            ParamId::TRecov => self.t_recov = value,
            ParamId::TFatal => self.t_fatal = value,
            ParamId::PFatal => self.p_fatal = value,
            ParamId::E0 => self.e0 = value,
            ParamId::I0 => self.i0 = value,
        }
    }

    pub fn with(mut self, id: ParamId, value: T) -> Self {
        self.set(id, value);
        self
    }

    /// Incubation rate σ = 1/T_inc.
    #[inline]
    pub fn sigma(&self) -> T {
        self.t_inc.recip()
    }

    /// Removal rate γ = 1/T_inf.
    #[inline]
    pub fn gamma(&self) -> T {
        self.t_inf.recip()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |id: ParamId, v: T, reason: &'static str| {
            Err(Error::ParameterDomain {
                param: id.name(),
                value: v.as_f64(),
                reason,
            })
        };
        for id in ParamId::ALL {
            let v = self.get(id);
            if !v.is_finite() {
                return fail(id, v, "must be finite");
            }
        }
        if self.beta < T::zero() {
            return fail(ParamId::Beta, self.beta, "must be >= 0");
        }
        for id in [ParamId::TInc, ParamId::TInf, ParamId::TRecov, ParamId::TFatal] {
            let v = self.get(id);
            if v <= T::zero() {
                return fail(id, v, "time constants must be > 0");
            }
        }
        if self.p_fatal < T::zero() || self.p_fatal > T::one() {
            return fail(ParamId::PFatal, self.p_fatal, "must lie in [0, 1]");
        }
        if self.e0 < T::zero() {
            return fail(ParamId::E0, self.e0, "must be >= 0");
        }
        if self.i0 < T::zero() {
            return fail(ParamId::I0, self.i0, "must be >= 0");
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams::from_array(self.to_array().map(|v| U::lit(v.as_f64())))
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// One value per model parameter. Serializes as a map keyed by parameter name
/// and requires every key on input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<ParamId, V>",
    into = "BTreeMap<ParamId, V>",
    bound(
        serialize = "V: Serialize + Clone",
        deserialize = "V: Deserialize<'de>"
    )
)]
pub struct ParamTable<V>(pub [V; 8]);

impl<V> ParamTable<V> {
    #[inline]
    pub fn get(&self, id: ParamId) -> &V {
        &self.0[id.index()]
    }

    #[inline]
    pub fn set(&mut self, id: ParamId, value: V) {
        self.0[id.index()] = value;
    }
}

impl<V> TryFrom<BTreeMap<ParamId, V>> for ParamTable<V> {
    type Error = String;

    fn try_from(mut map: BTreeMap<ParamId, V>) -> std::result::Result<Self, String> {
        let mut slots: [Option<V>; 8] = Default::default();
        for id in ParamId::ALL {
            slots[id.index()] = Some(
                map.remove(&id)
                    .ok_or_else(|| format!("missing entry for `{id}`"))?,
            );
        }
        Ok(ParamTable(slots.map(|v| v.expect("filled above"))))
    }
}

impl<V> From<ParamTable<V>> for BTreeMap<ParamId, V> {
    fn from(table: ParamTable<V>) -> Self {
        ParamId::ALL.into_iter().zip(table.0).collect()
    }
}

impl ParamTable<Interval> {
    pub fn search_bounds() -> Self {
        ParamTable(SEARCH_BOUNDS.map(|(lo, hi)| Interval::new(lo, hi)))
    }
}

impl ParamTable<f64> {
    pub fn proposal_variances() -> Self {
        ParamTable(PROPOSAL_VARIANCES)
    }
}

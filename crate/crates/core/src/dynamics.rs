//! SEIARD state space, right-hand side, fixed-step RK4 integration and the
//! early-epidemic linear (LTI) approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::scalar::Scalar;

/// Column labels for trajectory CSV output, in state order.
pub const COMPARTMENT_NAMES: [&str; 7] = ["S", "E", "I", "A_recov", "A_fatal", "R", "D"];

/// Dips below zero smaller than this are treated as rounding and clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

/// Compartment populations (persons).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State<T> {
    pub s: T,
    pub e: T,
    pub i: T,
    pub a_recov: T,
    pub a_fatal: T,
    pub r: T,
    pub d: T,
}

impl<T: Scalar> State<T> {
    pub fn zero() -> Self {
        Self::from_array([T::zero(); 7])
    }

    pub fn from_array(v: [T; 7]) -> Self {
        State {
            s: v[0],
            e: v[1],
            i: v[2],
            a_recov: v[3],
            a_fatal: v[4],
            r: v[5],
            d: v[6],
        }
    }

    pub fn to_array(&self) -> [T; 7] {
        [
            self.s,
            self.e,
            self.i,
            self.a_recov,
            self.a_fatal,
            self.r,
            self.d,
        ]
    }

    /// Sum over all seven compartments.
    pub fn total(&self) -> T {
        self.to_array().into_iter().sum()
    }

    pub fn active(&self) -> T {
        self.a_recov + self.a_fatal
    }
}

/// Day-0 values of the observed series (A0, R0, D0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialObserved<T> {
    pub active: T,
    pub recovered: T,
    pub deceased: T,
}

impl<T: Scalar> InitialObserved<T> {
    /// A0 = 5, R0 = 0, D0 = 0.
    pub fn reference() -> Self {
        InitialObserved {
            active: T::lit(5.0),
            recovered: T::zero(),
            deceased: T::zero(),
        }
    }
}

/// How the observed initial active count is split between the two active
/// compartments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActiveSplit {
    /// `A_fatal = p_fatal * A0`, the steady inflow ratio.
    #[default]
    Proportional,
    /// `A_fatal = fraction * A0` independent of the parameters.
    FatalFraction { fraction: f64 },
}

/// Builds the day-0 state from the observed initial counts and the unobserved
/// `e0`, `i0`; `S` absorbs the remainder of the population.
pub fn seeded_state<T: Scalar>(
    params: &ModelParams<T>,
    population_n: T,
    observed: &InitialObserved<T>,
    split: ActiveSplit,
) -> Result<State<T>> {
    let fatal_fraction = match split {
        ActiveSplit::Proportional => params.p_fatal,
        ActiveSplit::FatalFraction { fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::config("fatal fraction of A0 must lie in [0, 1]"));
            }
            T::lit(fraction)
        }
    };
    let a_fatal = fatal_fraction * observed.active;
    let a_recov = observed.active - a_fatal;
    let seeded = params.e0 + params.i0 + observed.active + observed.recovered + observed.deceased;
    let s = population_n - seeded;
    if s < T::zero() {
        return Err(Error::contract(format!(
            "initial compartments ({seeded}) exceed the population ({population_n})"
        )));
    }
    Ok(State {
        s,
        e: params.e0,
        i: params.i0,
        a_recov,
        a_fatal,
        r: observed.recovered,
        d: observed.deceased,
    })
}

#[derive(Clone, Copy)]
struct Rates<T> {
    beta_over_n: T,
    sigma: T,
    gamma: T,
    p_fatal: T,
    recov_rate: T,
    fatal_rate: T,
}

impl<T: Scalar> Rates<T> {
    fn new(p: &ModelParams<T>, population_n: T) -> Self {
        Rates {
            beta_over_n: p.beta / population_n,
            sigma: p.sigma(),
            gamma: p.gamma(),
            p_fatal: p.p_fatal,
            recov_rate: p.t_recov.recip(),
            fatal_rate: p.t_fatal.recip(),
        }
    }

    #[inline]
    fn rhs(&self, x: &[T; 7]) -> [T; 7] {
        let [s, e, i, a_recov, a_fatal, _, _] = *x;
        let infection = self.beta_over_n * i * s;
        let incubation = self.sigma * e;
        let removal = self.gamma * i;
        let to_fatal = self.p_fatal * removal;
        let to_recov = removal - to_fatal;
        let recovering = a_recov * self.recov_rate;
        let dying = a_fatal * self.fatal_rate;
        [
            -infection,
            infection - incubation,
            incubation - removal,
            to_recov - recovering,
            to_fatal - dying,
            recovering,
            dying,
        ]
    }
}

fn check_population<T: Scalar>(population_n: T) -> Result<()> {
    if !(population_n > T::zero()) || !population_n.is_finite() {
        return Err(Error::contract(format!(
            "population must be positive and finite, got {population_n}"
        )));
    }
    Ok(())
}

/// Time derivative of the state under the SEIARD equations.
pub fn derivative<T: Scalar>(
    state: &State<T>,
    params: &ModelParams<T>,
    population_n: T,
) -> Result<State<T>> {
    params.validate()?;
    check_population(population_n)?;
    Ok(State::from_array(
        Rates::new(params, population_n).rhs(&state.to_array()),
    ))
}

/// Daily-sampled solution of the SEIARD system.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    /// Sampling times (days), `0, 1, ..., horizon`.
    pub times: Vec<T>,
    pub states: Vec<State<T>>,
    pub population_n: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest absolute drift of the total population from its initial value.
    pub fn max_mass_drift(&self) -> T {
        let start = self.states.first().map(State::total).unwrap_or_else(T::zero);
        self.states
            .iter()
            .map(|s| (s.total() - start).abs())
            .fold(T::zero(), T::max)
    }
}

/// Number of RK4 sub-steps per day for a step size that divides one day.
pub(crate) fn steps_per_day<T: Scalar>(dt: T) -> Result<usize> {
    if !(dt > T::zero() && dt <= T::one()) {
        return Err(Error::contract(format!("dt must lie in (0, 1], got {dt}")));
    }
    let steps = (T::one() / dt).round();
    if ((steps * dt) - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::contract(format!(
            "dt = {dt} does not divide one day into whole steps"
        )));
    }
    Ok(steps.to_usize().expect("positive step count"))
}

#[inline]
fn axpy<T: Scalar>(x: &[T; 7], a: T, y: &[T; 7]) -> [T; 7] {
    std::array::from_fn(|k| x[k] + a * y[k])
}

#[inline]
fn rk4_step<T: Scalar>(f: impl Fn(&[T; 7]) -> [T; 7], x: &[T; 7], h: T) -> [T; 7] {
    let half = h * T::lit(0.5);
    let k1 = f(x);
    let k2 = f(&axpy(x, half, &k1));
    let k3 = f(&axpy(x, half, &k2));
    let k4 = f(&axpy(x, h, &k3));
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    std::array::from_fn(|k| x[k] + sixth * (k1[k] + two * (k2[k] + k3[k]) + k4[k]))
}

/// Applies the clamping rule after one step; errors on non-finite values or
/// a real negative excursion.
#[inline]
fn settle<T: Scalar>(x: &mut [T; 7], step: usize, time: T) -> Result<()> {
    let tol = T::lit(NEGATIVE_CLAMP);
    for (k, v) in x.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::Divergence {
                step,
                time: time.as_f64(),
                reason: format!("{} is not finite", COMPARTMENT_NAMES[k]),
            });
        }
        if *v < T::zero() {
            if *v < -tol {
                return Err(Error::Divergence {
                    step,
                    time: time.as_f64(),
                    reason: format!("{} fell to {}", COMPARTMENT_NAMES[k], *v),
                });
            }
            *v = T::zero();
        }
    }
    Ok(())
}

/// Integrates the nonlinear system with classical RK4 at step `dt` and samples
/// the solution at integer days `0..=horizon`.
pub fn integrate<T: Scalar>(
    params: &ModelParams<T>,
    init: &State<T>,
    population_n: T,
    horizon: u32,
    dt: T,
) -> Result<Trajectory<T>> {
    params.validate()?;
    check_population(population_n)?;
    if horizon == 0 {
        return Err(Error::contract("horizon must be at least one day"));
    }
    if init.to_array().iter().any(|v| !(*v >= T::zero())) {
        return Err(Error::contract("initial compartments must be >= 0"));
    }
    let sub_steps = steps_per_day(dt)?;
    let h = T::one() / T::lit(sub_steps as f64);
    let rates = Rates::new(params, population_n);

    let days = horizon as usize + 1;
    let mut times = Vec::with_capacity(days);
    let mut states = Vec::with_capacity(days);
    let mut x = init.to_array();
    times.push(T::zero());
    states.push(*init);
    let mut step = 0usize;
    for day in 0..horizon as usize {
        for sub in 0..sub_steps {
            x = rk4_step(|y| rates.rhs(y), &x, h);
            step += 1;
            let t = T::lit(day as f64) + T::lit((sub + 1) as f64) * h;
            settle(&mut x, step, t)?;
        }
        times.push(T::lit((day + 1) as f64));
        states.push(State::from_array(x));
    }
    Ok(Trajectory {
        times,
        states,
        population_n,
    })
}

/// Linear approximation `x' = B x`, `y = C x`, valid while `S ≈ N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiSystem<T> {
    pub b_matrix: [[T; 7]; 7],
    pub c_matrix: [[T; 7]; 3],
}

/// Dynamics and observation matrices of the early-epidemic linearization.
///
/// The `I`-row diagonal is `-1/T_inf`, the sign implied by `dI/dt = σE - γI`;
/// with it every column of `B` sums to zero.
pub fn lti_matrices<T: Scalar>(params: &ModelParams<T>) -> Result<LtiSystem<T>> {
    params.validate()?;
    let z = T::zero();
    let o = T::one();
    let sigma = params.sigma();
    let gamma = params.gamma();
    let p = params.p_fatal;
    let kr = params.t_recov.recip();
    let kf = params.t_fatal.recip();
    let beta = params.beta;
    let b_matrix = [
        [z, z, -beta, z, z, z, z],
        [z, -sigma, beta, z, z, z, z],
        [z, sigma, -gamma, z, z, z, z],
        [z, z, (o - p) * gamma, -kr, z, z, z],
        [z, z, p * gamma, z, -kf, z, z],
        [z, z, z, kr, z, z, z],
        [z, z, z, z, kf, z, z],
    ];
    let c_matrix = [
        [z, z, z, o, o, z, z],
        [z, z, z, z, z, o, z],
        [z, z, z, z, z, z, o],
    ];
    Ok(LtiSystem { b_matrix, c_matrix })
}

impl<T: Scalar> LtiSystem<T> {
    pub fn apply(&self, x: &[T; 7]) -> [T; 7] {
        std::array::from_fn(|r| {
            self.b_matrix[r]
                .iter()
                .zip(x)
                .map(|(b, v)| *b * *v)
                .sum()
        })
    }

    pub fn output(&self, x: &[T; 7]) -> [T; 3] {
        std::array::from_fn(|r| {
            self.c_matrix[r]
                .iter()
                .zip(x)
                .map(|(c, v)| *c * *v)
                .sum()
        })
    }

    /// RK4 solution of `x' = B x` sampled at integer days. No clamping: the
    /// linear system is only meaningful near the disease-free state.
    pub fn integrate(&self, init: &State<T>, horizon: u32, dt: T) -> Result<Vec<State<T>>> {
        let sub_steps = steps_per_day(dt)?;
        let h = T::one() / T::lit(sub_steps as f64);
        let mut x = init.to_array();
        let mut out = Vec::with_capacity(horizon as usize + 1);
        out.push(*init);
        for _ in 0..horizon {
            for _ in 0..sub_steps {
                x = rk4_step(|y| self.apply(y), &x, h);
            }
            out.push(State::from_array(x));
        }
        Ok(out)
    }
}

/// Which observed series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Active,
    Recovered,
    Deceased,
    Total,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 4] = [
        SeriesKind::Active,
        SeriesKind::Recovered,
        SeriesKind::Deceased,
        SeriesKind::Total,
    ];
    pub const OBSERVED: [SeriesKind; 3] = [
        SeriesKind::Active,
        SeriesKind::Recovered,
        SeriesKind::Deceased,
    ];
}

/// Daily observed counts: active, recovered, deceased and their sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries<T> {
    pub days: Vec<u32>,
    pub active: Vec<T>,
    pub recovered: Vec<T>,
    pub deceased: Vec<T>,
    pub total: Vec<T>,
}

impl<T: Scalar> ObservedSeries<T> {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn series(&self, kind: SeriesKind) -> &[T] {
        match kind {
            SeriesKind::Active => &self.active,
            SeriesKind::Recovered => &self.recovered,
            SeriesKind::Deceased => &self.deceased,
            SeriesKind::Total => &self.total,
        }
    }

    pub(crate) fn series_mut(&mut self, kind: SeriesKind) -> &mut Vec<T> {
        match kind {
            SeriesKind::Active => &mut self.active,
            SeriesKind::Recovered => &mut self.recovered,
            SeriesKind::Deceased => &mut self.deceased,
            SeriesKind::Total => &mut self.total,
        }
    }

    /// Recomputes `total` from the three observed series.
    pub(crate) fn refresh_total(&mut self) {
        self.total = self
            .active
            .iter()
            .zip(&self.recovered)
            .zip(&self.deceased)
            .map(|((a, r), d)| *a + *r + *d)
            .collect();
    }
}

/// Maps compartments to observations: active = A_recov + A_fatal, recovered = R,
/// deceased = D.
pub fn observe<T: Scalar>(traj: &Trajectory<T>) -> ObservedSeries<T> {
    let mut out = ObservedSeries {
        days: traj
            .times
            .iter()
            .map(|t| t.to_u32().expect("non-negative day"))
            .collect(),
        active: traj.states.iter().map(State::active).collect(),
        recovered: traj.states.iter().map(|s| s.r).collect(),
        deceased: traj.states.iter().map(|s| s.d).collect(),
        total: Vec::new(),
    };
    out.refresh_total();
    out
}

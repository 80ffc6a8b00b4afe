//! Posterior summaries over sample arrays: HPDI, loss quantiles, correlation
//! matrices and kernel density estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum number of draws for interval and density summaries.
pub const MIN_DRAWS: usize = 100;

/// Points in a default density grid.
pub const DENSITY_GRID_POINTS: usize = 256;

/// Highest posterior density interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hpdi<T> {
    pub alpha: f64,
    pub lo: T,
    pub hi: T,
    /// Fraction of the draws inside `[lo, hi]`.
    pub mass_check: f64,
}

impl<T: Scalar> Hpdi<T> {
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }
}

fn sorted<T: Scalar>(samples: &[T]) -> Result<Vec<T>> {
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::contract("samples contain NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(v)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::contract(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Number of sorted draws an `alpha`-interval must contain: `ceil(alpha * n)`.
pub fn window_count(n: usize, alpha: f64) -> usize {
    let raw = alpha * n as f64;
    // Guard against 0.95 * 1000 = 950.0000000000001 style rounding.
    let m = (raw - 1e-9 * raw.max(1.0)).ceil() as usize;
    m.clamp(1, n)
}

/// Shortest interval spanning `ceil(alpha * n)` sorted draws; ties go to the
/// leftmost window.
pub fn hpdi<T: Scalar>(samples: &[T], alpha: f64) -> Result<Hpdi<T>> {
    check_alpha(alpha)?;
    if samples.len() < MIN_DRAWS {
        return Err(Error::contract(format!(
            "hpdi needs at least {MIN_DRAWS} draws, got {}",
            samples.len()
        )));
    }
    let x = sorted(samples)?;
    let n = x.len();
    let m = window_count(n, alpha);
    let mut best = 0;
    let mut best_width = x[m - 1] - x[0];
    for start in 1..=n - m {
        let w = x[start + m - 1] - x[start];
        if w < best_width {
            best = start;
            best_width = w;
        }
    }
    Ok(Hpdi {
        alpha,
        lo: x[best],
        hi: x[best + m - 1],
        mass_check: m as f64 / n as f64,
    })
}

/// Empirical `alpha`-quantile with linear interpolation between order
/// statistics at position `(n - 1) * alpha`.
pub fn loss_quantile<T: Scalar>(values: &[T], alpha: f64) -> Result<T> {
    if values.is_empty() {
        return Err(Error::contract("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::contract(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let x = sorted(values)?;
    let h = (x.len() - 1) as f64 * alpha;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    if x[lo].is_infinite() || x[hi].is_infinite() {
        return Ok(if frac > T::zero() { x[hi] } else { x[lo] });
    }
    Ok(x[lo] + frac * (x[hi] - x[lo]))
}

/// Pearson correlation matrix of several equally long columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix<T> {
    pub values: Vec<Vec<T>>,
    /// Columns with zero variance; their off-diagonal entries are reported as 0.
    pub degenerate: Vec<bool>,
}

pub fn correlation_matrix<T: Scalar>(columns: &[Vec<T>]) -> Result<CorrelationMatrix<T>> {
    let k = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::contract("correlation columns differ in length"));
    }
    if n < MIN_DRAWS {
        return Err(Error::contract(format!(
            "correlation needs at least {MIN_DRAWS} draws, got {n}"
        )));
    }
    let nf = T::lit(n as f64);
    let centred: Vec<Vec<T>> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().copied().sum::<T>() / nf;
            c.iter().map(|v| *v - mean).collect()
        })
        .collect();
    let norms: Vec<T> = centred
        .iter()
        .map(|c| c.iter().map(|v| *v * *v).sum::<T>().sqrt())
        .collect();
    let degenerate: Vec<bool> = norms.iter().map(|s| !(*s > T::zero())).collect();
    let mut values = vec![vec![T::zero(); k]; k];
    for a in 0..k {
        values[a][a] = T::one();
        for b in a + 1..k {
            if degenerate[a] || degenerate[b] {
                continue;
            }
            let dot: T = centred[a].iter().zip(&centred[b]).map(|(x, y)| *x * *y).sum();
            let r = (dot / (norms[a] * norms[b])).max(-T::one()).min(T::one());
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    Ok(CorrelationMatrix { values, degenerate })
}

/// Sampled curve `values[k] = f(grid[k])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub bandwidth: T,
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR/1.34) n^(-1/5)`; falls back to
/// whichever spread is non-zero.
pub fn silverman_bandwidth<T: Scalar>(draws: &[T]) -> Result<T> {
    let x = sorted(draws)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::contract("bandwidth needs at least two draws"));
    }
    let nf = T::lit(n as f64);
    let mean = x.iter().copied().sum::<T>() / nf;
    let var = x.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / T::lit((n - 1) as f64);
    let sd = var.sqrt();
    let iqr = (loss_quantile(&x, 0.75)? - loss_quantile(&x, 0.25)?) / T::lit(1.34);
    let spread = match (sd > T::zero(), iqr > T::zero()) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => T::zero(),
    };
    Ok(T::lit(0.9) * spread * nf.powf(T::lit(-0.2)))
}

/// Gaussian kernel density of `draws` evaluated at `points`.
pub fn kde_at<T: Scalar>(draws: &[T], bandwidth: T, points: &[T]) -> Vec<T> {
    let norm = T::one() / (T::lit(draws.len() as f64) * bandwidth * T::TAU().sqrt());
    points
        .iter()
        .map(|p| {
            let s: T = draws
                .iter()
                .map(|d| {
                    let z = (*p - *d) / bandwidth;
                    (T::lit(-0.5) * z * z).exp()
                })
                .sum();
            s * norm
        })
        .collect()
}

/// Kernel density on a 256-point grid spanning the draws padded by three
/// bandwidths. `bandwidth = None` selects Silverman's rule.
pub fn marginal_density<T: Scalar>(draws: &[T], bandwidth: Option<T>) -> Result<DensityCurve<T>> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::contract(format!(
            "density needs at least {MIN_DRAWS} draws, got {}",
            draws.len()
        )));
    }
    let mut h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(draws)?,
    };
    let x = sorted(draws)?;
    let (lo, hi) = (x[0], x[x.len() - 1]);
    if !(h > T::zero()) {
        // Constant draws: any positive width gives a spike at the common value.
        h = T::lit(1e-6) * lo.abs().max(T::one());
    }
    let a = lo - T::lit(3.0) * h;
    let b = hi + T::lit(3.0) * h;
    let step = (b - a) / T::lit((DENSITY_GRID_POINTS - 1) as f64);
    let grid: Vec<T> = (0..DENSITY_GRID_POINTS)
        .map(|k| a + step * T::lit(k as f64))
        .collect();
    let values = kde_at(&x, h, &grid);
    Ok(DensityCurve {
        grid,
        values,
        bandwidth: h,
    })
}

/// Pointwise `-ln(max(p, floor))` with `floor` the smallest positive normal.
pub fn neg_log_density<T: Scalar>(curve: &DensityCurve<T>) -> DensityCurve<T> {
    DensityCurve {
        grid: curve.grid.clone(),
        values: curve
            .values
            .iter()
            .map(|p| -(p.max(T::min_positive_value())).ln())
            .collect(),
        bandwidth: curve.bandwidth,
    }
}

fn ranks<T: Scalar>(v: &[T]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].partial_cmp(&v[*b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman<T: Scalar>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::contract("spearman needs two equally long series (n >= 2)"));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}

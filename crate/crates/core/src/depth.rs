//! Depth functions for point processes.
//!
//! The overall depth of a realization `s` with `k` events is
//! `w(k)^r * D_c(s)`: a normalized one-dimensional depth of the cardinality
//! times a conditional depth of the event locations given `k`. Conditional
//! depths here are the ILR depth (two algebraically equivalent routes), its
//! Gaussian simplification, and the time-rescaled ILR depth for processes
//! with a known or estimated cumulative intensity.
//!
//! All conditional depths use the normalization `c = (k+1)^(k+1)`, so the
//! maximum is 1, attained at equally spaced (or equally Λ-spaced) events.
//! Realizations on the boundary (coincident events, or events at a domain
//! endpoint) have depth 0. The empty realization has conditional depth 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::density::log_sum_exp;
use crate::error::{Error, Result};
use crate::geometry::{to_iet, ContrastMatrix, IlrVector, PointProcess};

/// Distribution of the number of events per realization.
#[derive(Debug, Clone, PartialEq)]
pub enum CardinalityDistribution {
    Poisson { mean: f64 },
    /// `pmf[j]` is the probability of exactly `j` events.
    Empirical { pmf: Vec<f64> },
}

impl CardinalityDistribution {
    pub fn poisson(mean: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidArgument(format!("Poisson mean must be positive, got {mean}")));
        }
        Ok(Self::Poisson { mean })
    }

    /// Normalized histogram of observed counts.
    pub fn from_counts(counts: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut hist: Vec<u64> = Vec::new();
        let mut n = 0u64;
        for c in counts {
            if c >= hist.len() {
                hist.resize(c + 1, 0);
            }
            hist[c] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyDistribution);
        }
        let pmf = hist.into_iter().map(|h| h as f64 / n as f64).collect();
        Ok(Self::Empirical { pmf })
    }

    /// `P(|S| <= k)`.
    pub fn cdf(&self, k: usize) -> f64 {
        match self {
            Self::Poisson { mean } => poisson(*mean).cdf(k as u64),
            Self::Empirical { pmf } => pmf.iter().take(k + 1).sum::<f64>().min(1.0),
        }
    }

    /// `P(|S| >= k)`.
    pub fn survival(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self {
            Self::Poisson { mean } => poisson(*mean).sf(k as u64 - 1),
            Self::Empirical { pmf } => pmf.iter().skip(k).sum::<f64>().min(1.0),
        }
    }

    pub fn pmf(&self, k: usize) -> f64 {
        match self {
            Self::Poisson { mean } => {
                statrs::distribution::Discrete::pmf(&poisson(*mean), k as u64)
            }
            Self::Empirical { pmf } => pmf.get(k).copied().unwrap_or(0.0),
        }
    }

    /// `min{P(|S| <= k), P(|S| >= k)}`.
    pub fn d1(&self, k: usize) -> f64 {
        self.cdf(k).min(self.survival(k))
    }

    /// Counts over which `d1` is maximized. For the Poisson case the search
    /// stops at `mean + 10 sqrt(mean)`; `d1` beyond is a far tail.
    fn search_range(&self) -> std::ops::RangeInclusive<usize> {
        match self {
            Self::Poisson { mean } => 0..=(mean + 10.0 * mean.sqrt()).ceil() as usize,
            Self::Empirical { pmf } => 0..=pmf.len() - 1,
        }
    }

    pub fn max_d1(&self) -> f64 {
        self.search_range().map(|j| self.d1(j)).fold(0.0, f64::max)
    }

    /// The count attaining `max_d1` (smallest one on ties).
    pub fn mode_of_d1(&self) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for j in self.search_range() {
            let d = self.d1(j);
            if d > best.1 {
                best = (j, d);
            }
        }
        best.0
    }
}

fn poisson(mean: f64) -> Poisson {
    Poisson::new(mean).expect("mean validated at construction")
}

/// Returns `(d1, w)` where `w = d1 / max_j d1(j)`.
pub fn cardinality_depth(k: usize, dist: &CardinalityDistribution) -> Result<(f64, f64)> {
    if let CardinalityDistribution::Empirical { pmf } = dist {
        if pmf.is_empty() {
            return Err(Error::EmptyDistribution);
        }
    }
    let d1 = dist.d1(k);
    let max = dist.max_d1();
    Ok((d1, if max > 0.0 { (d1 / max).min(1.0) } else { 0.0 }))
}

/// `1 / (1 - L)` for `L = log(c * prod(gaps) / total^(k+1))`. By AM-GM `L <= 0`;
/// positive values can only come from rounding and are clamped.
fn depth_from_log_ratio(log_ratio: f64) -> f64 {
    1.0 / (1.0 - log_ratio.min(0.0))
}

/// `sum_i log((k+1) g_i / total)` over strictly positive gaps.
fn log_ratio_from_gaps(gaps: impl ExactSizeIterator<Item = f64>, total: f64) -> f64 {
    let scale = gaps.len() as f64 / total;
    gaps.map(|g| (scale * g).ln()).sum()
}

/// ILR depth of a homogeneous Poisson realization, computed from event times.
pub fn ilr_depth_hpp(p: &PointProcess) -> f64 {
    if p.is_empty() {
        return 1.0;
    }
    if p.on_boundary() {
        return 0.0;
    }
    let u = to_iet(p);
    depth_from_log_ratio(log_ratio_from_gaps(u.as_slice().iter().copied(), u.total()))
}

/// ILR depth computed in ILR coordinates:
/// `1 / (1 - log((k+1)^(k+1) / (sum_p exp(v . Psi[:, p]))^(k+1)))`.
pub fn ilr_depth_from_ilr(v: &IlrVector, psi: &ContrastMatrix) -> Result<f64> {
    let k1 = (psi.k() + 1) as f64;
    let lse = log_sum_exp(&psi.column_scores(v)?);
    Ok(depth_from_log_ratio(k1 * (k1.ln() - lse)))
}

/// Gaussian-approximation depth `1 / (1 + |ilr(u)|^2 / 2)`, evaluated through
/// the centered log-ratios so no basis is needed.
pub fn simplified_ilr_depth(p: &PointProcess) -> f64 {
    if p.is_empty() {
        return 1.0;
    }
    if p.on_boundary() {
        return 0.0;
    }
    let clr = to_iet(p).clr().expect("interior process has positive IETs");
    let sq: f64 = clr.iter().map(|x| x * x).sum();
    1.0 / (1.0 + 0.5 * sq)
}

/// Time-rescaled ILR depth from the cumulative intensity evaluated at
/// `(T1, s_1, ..., s_k, T2)`. The values need not start at zero.
pub fn rescaled_depth_from_values(p: &PointProcess, cumulative: &[f64]) -> Result<f64> {
    if cumulative.len() != p.len() + 2 {
        return Err(Error::DimensionMismatch { expected: p.len() + 2, got: cumulative.len() });
    }
    if p.is_empty() {
        return Ok(1.0);
    }
    if p.on_boundary() {
        return Ok(0.0);
    }
    let gaps: Vec<f64> = cumulative.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = gaps.iter().position(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(Error::InvalidIntensity(format!(
            "cumulative intensity not strictly increasing between {} and {}",
            p.padded()[i],
            p.padded()[i + 1]
        )));
    }
    let total = cumulative[cumulative.len() - 1] - cumulative[0];
    Ok(depth_from_log_ratio(log_ratio_from_gaps(gaps.into_iter(), total)))
}

/// Time-rescaled ILR depth for a deterministic cumulative intensity `Λ`.
pub fn time_rescaled_depth(p: &PointProcess, cumulative: impl Fn(f64) -> f64) -> Result<f64> {
    let values: Vec<f64> = p.padded().into_iter().map(&cumulative).collect();
    rescaled_depth_from_values(p, &values)
}

/// One row of a depth ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub id: String,
    pub k: usize,
    pub d1: f64,
    pub w: f64,
    pub d_cond: f64,
    pub d_overall: f64,
    /// 1-based; 0 until [`rank`] runs.
    pub rank: usize,
}

pub fn overall_depth(
    id: impl Into<String>,
    p: &PointProcess,
    dist: &CardinalityDistribution,
    cond: impl Fn(&PointProcess) -> Result<f64>,
    r: f64,
) -> Result<DepthReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("weight exponent r must be positive, got {r}")));
    }
    let k = p.len();
    let (d1, w) = cardinality_depth(k, dist)?;
    let d_cond = cond(p)?;
    Ok(DepthReport { id: id.into(), k, d1, w, d_cond, d_overall: w.powf(r) * d_cond, rank: 0 })
}

/// Overall depth for a whole sample, computed in parallel. Output order
/// follows input order; pass the result to [`rank`].
pub fn depth_reports<F>(
    ids: &[String],
    sample: &[PointProcess],
    dist: &CardinalityDistribution,
    cond: F,
    r: f64,
) -> Result<Vec<DepthReport>>
where
    F: Fn(usize, &PointProcess) -> Result<f64> + Sync,
{
    if ids.len() != sample.len() {
        return Err(Error::DimensionMismatch { expected: sample.len(), got: ids.len() });
    }
    ids.par_iter()
        .zip(sample)
        .enumerate()
        .map(|(i, (id, p))| overall_depth(id.clone(), p, dist, |q| cond(i, q), r))
        .collect()
}

/// Sorts by overall depth, deepest first, and assigns ranks `1..=n`. The sort
/// is stable, so equal depths keep their input order.
pub fn rank(mut reports: Vec<DepthReport>) -> Vec<DepthReport> {
    reports.sort_by(|a, b| b.d_overall.total_cmp(&a.d_overall));
    for (i, r) in reports.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    reports
}

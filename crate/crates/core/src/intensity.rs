//! Intensity models and estimators: piecewise-constant histograms, their
//! exact cumulative integrals, the factorized Markov-interval estimator and
//! an empirical convergence harness for the histogram estimator.

use rayon::prelude::*;
use serde::Serialize;

use crate::depth::CardinalityDistribution;
use crate::error::{Error, Result};
use crate::geometry::{PointProcess, TimeDomain};
use crate::simulation::{simulate_ipp, SeededRng};
use crate::stats::{cumulative_integral, integrate, linspace};

/// Empty bins are raised to this multiple of the mean bin value.
pub const FLOOR_FRACTION: f64 = 1e-8;
/// Survival below this stops the hazard division.
pub const SURVIVAL_CAP: f64 = 1e-8;
/// Points in the sup-error grid of [`convergence_experiment`].
pub const SUP_GRID_POINTS: usize = 10_000;

/// Bin index for `x` on `m` equal bins of `d`: left-closed, right-open, the
/// last bin closed. Values outside the domain clamp to the end bins.
fn bin_index(d: TimeDomain, m: usize, x: f64) -> usize {
    let raw = ((x - d.t1()) / d.width() * m as f64).floor();
    if !(raw >= 0.0) {
        0
    } else {
        (raw as usize).min(m - 1)
    }
}

fn bin_edges(d: TimeDomain, m: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=m).map(|j| d.t1() + d.width() * j as f64 / m as f64).collect();
    edges[m] = d.t2();
    edges
}

fn same_domain(sample: &[PointProcess]) -> Result<TimeDomain> {
    let first = sample
        .first()
        .ok_or_else(|| Error::InvalidArgument("sample is empty".into()))?
        .domain();
    if sample.iter().any(|p| p.domain() != first) {
        return Err(Error::MismatchedDomains);
    }
    Ok(first)
}

fn check_bins(m: usize, what: &str) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument(format!("{what} must be at least 1")));
    }
    Ok(())
}

/// A step function on `m` equal bins. Raw values are kept as estimated;
/// [`value`](Self::value) reports them raised to a small positive floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseConstantIntensity {
    domain: TimeDomain,
    raw: Vec<f64>,
    floor: f64,
}

impl PiecewiseConstantIntensity {
    pub fn new(domain: TimeDomain, raw: Vec<f64>) -> Result<Self> {
        check_bins(raw.len(), "bin count")?;
        if raw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidIntensity("bin values must be finite and nonnegative".into()));
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let floor = FLOOR_FRACTION * if mean > 0.0 { mean } else { 1.0 };
        Ok(Self { domain, raw, floor })
    }

    pub fn constant(domain: TimeDomain, value: f64) -> Result<Self> {
        Self::new(domain, vec![value])
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn bins(&self) -> usize {
        self.raw.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.domain.width() / self.raw.len() as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        bin_edges(self.domain, self.raw.len())
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.raw
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn bin_value(&self, j: usize) -> f64 {
        self.raw[j].max(self.floor)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.bins()).map(|j| self.bin_value(j)).collect()
    }

    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(self.domain, self.raw.len(), x)
    }

    /// Floored value at `x`; arguments beyond the domain take the end bins.
    pub fn value(&self, x: f64) -> f64 {
        self.bin_value(self.bin_of(x))
    }
}

/// Exact antiderivative of a [`PiecewiseConstantIntensity`], anchored at 0
/// on the left end of the domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulativeIntensity {
    domain: TimeDomain,
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CumulativeIntensity {
    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    fn segment(&self, t: f64) -> usize {
        let m = self.slopes.len();
        let mut j = bin_index(self.domain, m, t);
        if j > 0 && t < self.knots[j] {
            j -= 1;
        } else if j + 1 < m && t >= self.knots[j + 1] {
            j += 1;
        }
        j
    }

    /// `Λ(t)`, clamped to the domain.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(self.domain.t1(), self.domain.t2());
        let j = self.segment(t);
        if t == self.knots[j + 1] {
            return self.values[j + 1];
        }
        self.values[j] + self.slopes[j] * (t - self.knots[j])
    }

    /// The `t` with `Λ(t) = y`, clamped to `[0, Λ(T2)]`.
    pub fn inverse(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, self.total());
        let j = match self.values.partition_point(|&v| v <= y) {
            0 => 0,
            p => (p - 1).min(self.slopes.len() - 1),
        };
        if y == self.values[j] {
            return self.knots[j];
        }
        (self.knots[j] + (y - self.values[j]) / self.slopes[j]).min(self.knots[j + 1])
    }
}

pub fn cumulative(lambda: &PiecewiseConstantIntensity) -> CumulativeIntensity {
    let knots = lambda.edges();
    let slopes = lambda.values();
    let mut values = Vec::with_capacity(knots.len());
    values.push(0.0);
    for (j, s) in slopes.iter().enumerate() {
        values.push(values[j] + s * (knots[j + 1] - knots[j]));
    }
    CumulativeIntensity { domain: lambda.domain(), knots, values, slopes }
}

fn bin_counts(sample: &[PointProcess], d: TimeDomain, m: usize) -> Vec<u64> {
    sample
        .par_iter()
        .fold(
            || vec![0u64; m],
            |mut acc, p| {
                for &s in p.events() {
                    acc[bin_index(d, m, s)] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Pooled event histogram scaled to a rate per realization per unit time.
pub fn histogram_estimate(sample: &[PointProcess], m: usize) -> Result<PiecewiseConstantIntensity> {
    check_bins(m, "bin count")?;
    let d = same_domain(sample)?;
    let scale = m as f64 / (sample.len() as f64 * d.width());
    let raw = bin_counts(sample, d, m).into_iter().map(|c| c as f64 * scale).collect();
    PiecewiseConstantIntensity::new(d, raw)
}

/// Factorized conditional intensity `λ1(t)·λ2(t − s*(t))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImiIntensity {
    pub lambda1: PiecewiseConstantIntensity,
    pub lambda2: PiecewiseConstantIntensity,
}

impl ImiIntensity {
    pub fn domain(&self) -> TimeDomain {
        self.lambda1.domain()
    }

    /// Intensity at `t` given the most recent event `last` (`T1` if none).
    pub fn conditional_intensity(&self, t: f64, last: f64) -> f64 {
        self.lambda1.value(t) * self.lambda2.value(t - last)
    }
}

/// The last event strictly before `t`, or `t1`.
fn last_before(events: &[f64], t: f64, t1: f64) -> f64 {
    match events.partition_point(|&s| s < t) {
        0 => t1,
        i => events[i - 1],
    }
}

pub fn imi_estimate(sample: &[PointProcess], m1: usize, m2: usize) -> Result<ImiIntensity> {
    check_bins(m1, "time bin count")?;
    check_bins(m2, "interval bin count")?;
    let d = same_domain(sample)?;
    let gaps: Vec<Vec<f64>> = sample
        .iter()
        .map(|p| {
            let mut prev = d.t1();
            p.events()
                .iter()
                .map(|&s| {
                    let u = s - prev;
                    prev = s;
                    u
                })
                .collect()
        })
        .collect();
    let total: usize = gaps.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::NoEvents);
    }
    let longest = gaps.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let tau_domain = TimeDomain::new(0.0, longest).map_err(|_| {
        Error::InvalidArgument("every inter-event time is zero; the interval range is empty".into())
    })?;

    // hazard of the pooled inter-event time density, evaluated mid-bin
    let dt = tau_domain.width() / m2 as f64;
    let mut tau_counts = vec![0u64; m2];
    for &u in gaps.iter().flatten() {
        tau_counts[bin_index(tau_domain, m2, u)] += 1;
    }
    let mut hazard = Vec::with_capacity(m2);
    let mut below = 0.0;
    let mut last_finite = 0.0;
    for &c in &tau_counts {
        let prob = c as f64 / total as f64;
        let survival = 1.0 - below - 0.5 * prob;
        let h = if survival >= SURVIVAL_CAP { prob / dt / survival } else { last_finite };
        last_finite = h;
        hazard.push(h);
        below += prob;
    }
    let lambda2 = PiecewiseConstantIntensity::new(tau_domain, hazard)?;

    // time factor: events per bin over the expected count under λ2 alone
    let width = d.width() / m1 as f64;
    let counts = bin_counts(sample, d, m1);
    let raw = (0..m1)
        .into_par_iter()
        .map(|k| {
            let center = d.t1() + (k as f64 + 0.5) * width;
            let exposure: f64 = sample
                .iter()
                .map(|p| lambda2.value(center - last_before(p.events(), center, d.t1())))
                .sum();
            counts[k] as f64 / (width * exposure)
        })
        .collect();
    let lambda1 = PiecewiseConstantIntensity::new(d, raw)?;
    Ok(ImiIntensity { lambda1, lambda2 })
}

/// `Λ` at `(T1, s_1, …, s_k, T2)` for an IMI model, integrating the product of
/// the two step functions exactly over the pieces cut by both bin grids.
pub fn imi_cumulative(model: &ImiIntensity, p: &PointProcess) -> Vec<f64> {
    let t_edges = model.lambda1.edges();
    let tau_edges = model.lambda2.edges();
    let padded = p.padded();
    let mut out = Vec::with_capacity(padded.len());
    out.push(0.0);
    let mut acc = 0.0;
    for w in padded.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut cuts: Vec<f64> = t_edges
            .iter()
            .copied()
            .chain(tau_edges.iter().map(|e| a + e))
            .filter(|&x| x > a && x < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        let mut lo = a;
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            if hi > lo {
                let mid = 0.5 * (lo + hi);
                acc += model.conditional_intensity(mid, a) * (hi - lo);
            }
            lo = hi;
        }
        out.push(acc);
    }
    out
}

/// `Λ` at `(T1, s_1, …, s_k, T2)` for a history-dependent intensity
/// `f(t, last)` that is smooth between events, by Gauss-Legendre quadrature.
pub fn conditional_cumulative(p: &PointProcess, f: impl Fn(f64, f64) -> f64, panels_per_domain: usize) -> Vec<f64> {
    let d = p.domain();
    let padded = p.padded();
    let mut out = Vec::with_capacity(padded.len());
    out.push(0.0);
    let mut acc = 0.0;
    for w in padded.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) / d.width() * panels_per_domain as f64).ceil().max(1.0) as usize;
        acc += integrate(|t| f(t, a), a, b, panels);
        out.push(acc);
    }
    out
}

pub fn empirical_cardinality(sample: &[PointProcess]) -> Result<CardinalityDistribution> {
    CardinalityDistribution::from_counts(sample.iter().map(PointProcess::len))
}

/// Gaps of the unit-rate process formed by laying the rescaled realizations
/// end to end. Each entry of `cumulative` holds `Λ` at a realization's padded
/// points. The censored stretch after the final event is dropped.
pub fn pooled_rescaled_intervals(cumulative: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut offset = 0.0;
    let mut last = 0.0;
    for values in cumulative {
        let Some((&end, inner)) = values.split_last() else { continue };
        let base = values[0];
        for &v in inner.iter().skip(1) {
            let x = offset + (v - base);
            out.push(x - last);
            last = x;
        }
        offset += end - base;
    }
    out
}

/// How the bin count grows with the number of realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinRule {
    FourthRoot,
    Sqrt,
    Linear,
    Fixed(usize),
}

fn ceil_root(n: usize, power: u32) -> usize {
    let mut m = (n as f64).powf(1.0 / power as f64).floor() as usize;
    while (m as u128).pow(power) < n as u128 {
        m += 1;
    }
    while m > 1 && ((m - 1) as u128).pow(power) >= n as u128 {
        m -= 1;
    }
    m.max(1)
}

impl BinRule {
    pub fn bins(self, n: usize) -> usize {
        match self {
            BinRule::FourthRoot => ceil_root(n, 4),
            BinRule::Sqrt => ceil_root(n, 2),
            BinRule::Linear => n.max(1),
            BinRule::Fixed(m) => m.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub m: usize,
    pub sup_error: f64,
}

/// For each `n`, simulates `n` realizations by thinning, fits the histogram
/// estimator and reports `sup |Λ̂ − Λ|` on a fine grid. Each `n` draws from
/// its own stream of `seed`, so rows are independent of scheduling.
pub fn convergence_experiment(
    intensity: &(dyn Fn(f64) -> f64 + Sync),
    lambda_max: f64,
    domain: TimeDomain,
    n_grid: &[usize],
    rule: BinRule,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    let grid = linspace(domain.t1(), domain.t2(), SUP_GRID_POINTS);
    let truth = cumulative_integral(intensity, &grid, 2);
    n_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &n)| {
            if n == 0 {
                return Err(Error::InvalidArgument("realization count must be positive".into()));
            }
            let mut rng = SeededRng::stream(seed, idx as u64);
            let sample = (0..n)
                .map(|_| simulate_ipp(intensity, lambda_max, domain, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let m = rule.bins(n);
            let est = cumulative(&histogram_estimate(&sample, m)?);
            let sup_error = grid
                .iter()
                .zip(&truth)
                .map(|(&t, &l)| (est.eval(t) - l).abs())
                .fold(0.0, f64::max);
            Ok(ConvergenceRow { n, m, sup_error })
        })
        .collect()
}

//! Seeded samplers for homogeneous Poisson, inhomogeneous Poisson (thinning)
//! and inhomogeneous Markov interval processes.
//!
//! All randomness flows through [`SeededRng`], a ChaCha8 stream cipher
//! generator. ChaCha is counter-based and fully specified, so a given
//! `(seed, stream)` pair yields the same realizations on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{PointProcess, TimeDomain};

/// Relative slack when checking an intensity against its declared bound.
const BOUND_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// An independent stream derived from the same seed. Streams with
    /// different ids never overlap.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn poisson_count(mean: f64, rng: &mut SeededRng) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::InvalidArgument(format!("Poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}

fn sorted_uniforms(k: usize, d: TimeDomain, rng: &mut SeededRng) -> Vec<f64> {
    let mut events: Vec<f64> = (0..k).map(|_| d.t1() + d.width() * rng.uniform()).collect();
    events.sort_by(f64::total_cmp);
    events
}

pub fn simulate_hpp(rate: f64, d: TimeDomain, rng: &mut SeededRng) -> Result<PointProcess> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("HPP rate must be positive, got {rate}")));
    }
    let k = poisson_count(rate * d.width(), rng)?;
    PointProcess::new(d, sorted_uniforms(k, d, rng))
}

/// HPP conditioned on exactly `k` events: the order statistics of `k`
/// uniforms, whose inter-event times are uniform on the simplex.
pub fn simulate_hpp_conditional(k: usize, d: TimeDomain, rng: &mut SeededRng) -> Result<PointProcess> {
    PointProcess::new(d, sorted_uniforms(k, d, rng))
}

fn check_intensity(t: f64, value: f64, bound: f64) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::InvalidIntensity(format!("intensity {value} at t = {t}")));
    }
    if value > bound * (1.0 + BOUND_RTOL) {
        return Err(Error::BoundViolation { t, value, bound });
    }
    Ok(())
}

/// Lewis-Shedler thinning: candidates from HPP(`lambda_max`), each kept with
/// probability `intensity(t) / lambda_max`.
pub fn simulate_ipp(
    intensity: impl Fn(f64) -> f64,
    lambda_max: f64,
    d: TimeDomain,
    rng: &mut SeededRng,
) -> Result<PointProcess> {
    let candidates = simulate_hpp(lambda_max, d, rng)?;
    let mut events = Vec::with_capacity(candidates.len());
    for &t in candidates.events() {
        let value = intensity(t);
        check_intensity(t, value, lambda_max)?;
        if rng.uniform() * lambda_max < value {
            events.push(t);
        }
    }
    PointProcess::new(d, events)
}

/// Ogata thinning against `lambda1(t) * lambda2(t - s*(t))`, where `s*(t)` is
/// the last accepted event before `t` (`T1` if none). `bound` must dominate
/// the product everywhere it is evaluated.
pub fn simulate_imi(
    lambda1: impl Fn(f64) -> f64,
    lambda2: impl Fn(f64) -> f64,
    bound: f64,
    d: TimeDomain,
    rng: &mut SeededRng,
) -> Result<PointProcess> {
    let waits = Exp::new(bound)
        .map_err(|e| Error::InvalidArgument(format!("bound {bound}: {e}")))?;
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::InvalidArgument(format!("bound must be positive, got {bound}")));
    }
    let mut events = Vec::new();
    let mut last = d.t1();
    let mut t = d.t1();
    loop {
        t += waits.sample(rng);
        if t > d.t2() {
            break;
        }
        let value = lambda1(t) * lambda2(t - last);
        check_intensity(t, value, bound)?;
        if rng.uniform() * bound < value {
            events.push(t);
            last = t;
        }
    }
    PointProcess::new(d, events)
}

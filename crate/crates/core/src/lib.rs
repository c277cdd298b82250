//! Depth-based ranking of temporal point-process realizations.
//!
//! A realization on `[T1, T2]` is mapped to its inter-event times, which live
//! on a simplex, and then through the isometric log-ratio (ILR) transform into
//! `R^k`. The ILR image of a homogeneous Poisson process has a closed-form,
//! log-concave density centered at the origin; the conditional depth is a
//! monotone transform of that density. General processes are handled by
//! rescaling time through the (estimated) cumulative conditional intensity.
//!
//! Module map:
//!
//! - [`geometry`]: inter-event times, contrast matrices, ILR and its inverse.
//! - [`density`]: the ILR density, its normalizing constant, gradient, Hessian.
//! - [`depth`]: cardinality depth, ILR / simplified / time-rescaled depth, ranking.
//! - [`intensity`]: histogram and IMI intensity estimators, cumulative intensity.
//! - [`simulation`]: seeded HPP / IPP / IMI samplers.
//! - [`stats`]: Kolmogorov-Smirnov tests and quadrature helpers.

pub mod density;
pub mod depth;
pub mod error;
pub mod geometry;
pub mod intensity;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};

//! Density of the ILR-transformed inter-event times of a homogeneous Poisson
//! process conditioned on its cardinality `k`:
//!
//! ```text
//! f(v) = c / (sum_p exp(v . Psi[:, p]))^(k+1)
//! ```
//!
//! Everything is exposed in log space. The raw density underflows quickly
//! away from the origin once `k` is moderate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{ContrastMatrix, IlrVector};

/// `log(sum exp(x))` with the maximum factored out.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized weights `exp(a_p) / sum_q exp(a_q)`.
fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Unnormalized log density: `-(k+1) log sum_p exp(v . Psi[:, p])`.
pub fn log_kernel(v: &IlrVector, psi: &ContrastMatrix) -> Result<f64> {
    let scores = psi.column_scores(v)?;
    Ok(-((psi.k() + 1) as f64) * log_sum_exp(&scores))
}

/// Log of the normalizing constant, `log(k!) + log|det D|`, where `D` has
/// first row `Psi[:,1] - Psi[:,k+1]` and row `j >= 2` equal to
/// `Psi[:,j] - Psi[:,1]` (1-based columns).
pub fn log_norm_const(psi: &ContrastMatrix) -> Result<f64> {
    let k = psi.k();
    let m = psi.matrix();
    let mut d = DMatrix::zeros(k, k);
    for s in 0..k {
        d[(0, s)] = m[(s, 0)] - m[(s, k)];
        for j in 1..k {
            d[(j, s)] = m[(s, j)] - m[(s, 0)];
        }
    }
    let det = d.determinant().abs();
    if !(det > 0.0 && det.is_finite()) {
        return Err(Error::Singular);
    }
    let log_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
    Ok(log_fact + det.ln())
}

/// Gradient of the log density.
pub fn grad_log_density(v: &IlrVector, psi: &ContrastMatrix) -> Result<DVector<f64>> {
    let k = psi.k();
    let pi = softmax(&psi.column_scores(v)?);
    let m = psi.matrix();
    Ok(DVector::from_fn(k, |s, _| {
        -((k + 1) as f64) * (0..=k).map(|p| m[(s, p)] * pi[p]).sum::<f64>()
    }))
}

/// Hessian of the log density in the pairwise form
/// `H = -(k+1) / S^2 * B B^T`, where column `(p, q)` of `B` is
/// `(Psi[:,p] - Psi[:,q]) sqrt(e_p e_q)` and `S = sum_p e_p`.
pub fn hessian_log_density(v: &IlrVector, psi: &ContrastMatrix) -> Result<DMatrix<f64>> {
    let k = psi.k();
    let pi = softmax(&psi.column_scores(v)?);
    let m = psi.matrix();
    let mut bbt = DMatrix::zeros(k, k);
    for p in 0..=k {
        for q in p + 1..=k {
            let diff = m.column(p) - m.column(q);
            bbt += (pi[p] * pi[q]) * &diff * diff.transpose();
        }
    }
    Ok(-((k + 1) as f64) * bbt)
}

/// Standard multivariate normal log density, the Laplace approximation at
/// the mode.
pub fn normal_approx_log_density(v: &IlrVector) -> f64 {
    let k = v.k() as f64;
    -0.5 * k * (2.0 * std::f64::consts::PI).ln() - 0.5 * v.norm_squared()
}

pub fn max_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue below `-tol`.
pub fn is_negative_definite(h: &DMatrix<f64>, tol: f64) -> bool {
    max_eigenvalue(h) < -tol
}

/// The normalized ILR density for a fixed basis.
#[derive(Debug, Clone)]
pub struct IlrDensity {
    psi: ContrastMatrix,
    log_norm_const: f64,
}

impl IlrDensity {
    pub fn new(psi: ContrastMatrix) -> Result<Self> {
        let log_norm_const = log_norm_const(&psi)?;
        Ok(Self { psi, log_norm_const })
    }

    pub fn helmert(k: usize) -> Result<Self> {
        Self::new(ContrastMatrix::helmert(k)?)
    }

    pub fn k(&self) -> usize {
        self.psi.k()
    }

    pub fn psi(&self) -> &ContrastMatrix {
        &self.psi
    }

    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    pub fn log_density(&self, v: &IlrVector) -> Result<f64> {
        Ok(self.log_norm_const + log_kernel(v, &self.psi)?)
    }

    pub fn density(&self, v: &IlrVector) -> Result<f64> {
        self.log_density(v).map(f64::exp)
    }
}

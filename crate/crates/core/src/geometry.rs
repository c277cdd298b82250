//! Simplex geometry of inter-event times.
//!
//! A realization `s_1 <= ... <= s_k` on `[T1, T2]` is equivalent to its
//! inter-event-time (IET) vector `u = (s_1 - T1, s_2 - s_1, ..., T2 - s_k)`,
//! which lies on the simplex `{u >= 0, sum(u) = T2 - T1}`. The isometric
//! log-ratio transform maps the open simplex onto `R^k` through a contrast
//! matrix `Psi` (k x (k+1)) with `Psi Psi^T = I_k` and
//! `Psi^T Psi = I_{k+1} - 11^T / (k+1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `sum(u) == total`.
pub const SIMPLEX_SUM_RTOL: f64 = 1e-9;

/// Entrywise tolerance for accepting a user-supplied contrast matrix.
pub const CONTRAST_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeDomain {
    t1: f64,
    t2: f64,
}

impl TimeDomain {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite() && t1 < t2) {
            return Err(Error::InvalidDomain { t1, t2 });
        }
        Ok(Self { t1, t2 })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn width(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t1 && t <= self.t2
    }
}

/// An ordered set of event times inside a [`TimeDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointProcess {
    domain: TimeDomain,
    events: Vec<f64>,
}

impl PointProcess {
    /// Builds a process from already-sorted event times.
    pub fn new(domain: TimeDomain, events: Vec<f64>) -> Result<Self> {
        for (i, &s) in events.iter().enumerate() {
            if !s.is_finite() || !domain.contains(s) {
                return Err(Error::InvalidProcess(format!(
                    "event {i} = {s} outside [{}, {}]",
                    domain.t1, domain.t2
                )));
            }
        }
        if let Some(i) = events.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidProcess(format!(
                "events not sorted at position {}",
                i + 1
            )));
        }
        Ok(Self { domain, events })
    }

    /// Sorts the events before validating them.
    pub fn from_unsorted(domain: TimeDomain, mut events: Vec<f64>) -> Result<Self> {
        if events.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidProcess("NaN event time".into()));
        }
        events.sort_by(f64::total_cmp);
        Self::new(domain, events)
    }

    pub fn empty(domain: TimeDomain) -> Self {
        Self { domain, events: Vec::new() }
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// True iff some equality holds in `T1 <= s_1 <= ... <= s_k <= T2`.
    pub fn on_boundary(&self) -> bool {
        let Some((&first, &last)) = self.events.first().zip(self.events.last()) else {
            return false;
        };
        first == self.domain.t1
            || last == self.domain.t2
            || self.events.windows(2).any(|w| w[0] == w[1])
    }

    /// The event times with both domain endpoints attached:
    /// `(T1, s_1, ..., s_k, T2)`.
    pub fn padded(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.events.len() + 2);
        out.push(self.domain.t1);
        out.extend_from_slice(&self.events);
        out.push(self.domain.t2);
        out
    }

    /// Applies `t -> a t + b` to the events and the domain.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("affine map needs a > 0, got a = {a}")));
        }
        let domain = TimeDomain::new(a * self.domain.t1 + b, a * self.domain.t2 + b)?;
        let events = self.events.iter().map(|&s| a * s + b).collect();
        Self::new(domain, events)
    }
}

/// Inter-event times: a point on the closed simplex of total `total`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterEventTimes {
    total: f64,
    u: Vec<f64>,
}

impl InterEventTimes {
    pub fn new(u: Vec<f64>, total: f64) -> Result<Self> {
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidArgument(format!("IET total must be positive, got {total}")));
        }
        if u.is_empty() {
            return Err(Error::InvalidArgument("IET vector must be non-empty".into()));
        }
        if let Some((i, &x)) = u.iter().enumerate().find(|(_, x)| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument(format!("IET {i} = {x} is negative or not finite")));
        }
        let sum: f64 = u.iter().sum();
        if (sum - total).abs() > SIMPLEX_SUM_RTOL * total {
            return Err(Error::TotalMismatch { expected: total, got: sum });
        }
        Ok(Self { total, u })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// All components strictly positive.
    pub fn is_interior(&self) -> bool {
        self.u.iter().all(|&x| x > 0.0)
    }

    /// Centered log-ratio coordinates `log(u_i / g(u))`.
    pub fn clr(&self) -> Result<Vec<f64>> {
        if let Some((index, &value)) = self.u.iter().enumerate().find(|(_, x)| **x <= 0.0) {
            return Err(Error::Boundary { index, value });
        }
        let logs: Vec<f64> = self.u.iter().map(|x| x.ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        Ok(logs.into_iter().map(|l| l - mean).collect())
    }
}

/// A `k x (k+1)` contrast matrix defining one ILR basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    psi: DMatrix<f64>,
}

impl ContrastMatrix {
    /// Helmert contrasts: row `i` (1-based) is `1/sqrt(i(i+1))` on columns
    /// `1..=i`, `-i/sqrt(i(i+1))` on column `i+1`, zero afterward.
    pub fn helmert(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyContrast);
        }
        let mut psi = DMatrix::zeros(k, k + 1);
        for i in 1..=k {
            let scale = 1.0 / ((i * (i + 1)) as f64).sqrt();
            for j in 0..i {
                psi[(i - 1, j)] = scale;
            }
            psi[(i - 1, i)] = -(i as f64) * scale;
        }
        Ok(Self { psi })
    }

    /// Accepts an arbitrary basis after checking both defining identities.
    pub fn from_matrix(psi: DMatrix<f64>) -> Result<Self> {
        let k = psi.nrows();
        if k == 0 {
            return Err(Error::EmptyContrast);
        }
        if psi.ncols() != k + 1 {
            return Err(Error::DimensionMismatch { expected: k + 1, got: psi.ncols() });
        }
        let gram = &psi * psi.transpose();
        let id = DMatrix::<f64>::identity(k, k);
        let centering = DMatrix::<f64>::identity(k + 1, k + 1)
            - DMatrix::from_element(k + 1, k + 1, 1.0 / (k + 1) as f64);
        let proj = psi.transpose() * &psi;
        if (gram - id).amax() > CONTRAST_TOL || (proj - centering).amax() > CONTRAST_TOL {
            return Err(Error::InvalidArgument(
                "matrix does not satisfy the contrast identities".into(),
            ));
        }
        Ok(Self { psi })
    }

    pub fn k(&self) -> usize {
        self.psi.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// Column `p` (0-based), a vertex of the regular simplex spanned by the basis.
    pub fn column(&self, p: usize) -> DVector<f64> {
        self.psi.column(p).into_owned()
    }

    /// The basis with its columns reordered: column `i` of the result is
    /// column `perm[i]` of `self`. Still a valid contrast matrix.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.k() + 1)?;
        let cols: Vec<_> = perm.iter().map(|&p| self.psi.column(p).into_owned()).collect();
        Ok(Self { psi: DMatrix::from_columns(&cols) })
    }

    /// `Psi^T v`, the inner products of `v` with every column.
    pub fn column_scores(&self, v: &IlrVector) -> Result<Vec<f64>> {
        if v.k() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), got: v.k() });
        }
        let k = self.k();
        Ok((0..=k)
            .map(|p| (0..k).map(|i| self.psi[(i, p)] * v.0[i]).sum())
            .collect())
    }
}

/// A point in ILR coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct IlrVector(Vec<f64>);

impl IlrVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::EmptyContrast);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("ILR coordinates must be finite".into()));
        }
        Ok(Self(v))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|x| a * x).collect())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }
}

pub fn build_contrast_matrix(k: usize) -> Result<ContrastMatrix> {
    ContrastMatrix::helmert(k)
}

pub fn to_iet(p: &PointProcess) -> InterEventTimes {
    let padded = p.padded();
    let u = padded.windows(2).map(|w| w[1] - w[0]).collect();
    InterEventTimes { total: p.domain.width(), u }
}

pub fn from_iet(u: &InterEventTimes, d: TimeDomain) -> Result<PointProcess> {
    if (u.total - d.width()).abs() > SIMPLEX_SUM_RTOL * d.width() {
        return Err(Error::TotalMismatch { expected: d.width(), got: u.total });
    }
    let k = u.len() - 1;
    let mut events = Vec::with_capacity(k);
    let mut acc = d.t1;
    for &x in &u.u[..k] {
        acc += x;
        events.push(acc.min(d.t2));
    }
    PointProcess::new(d, events)
}

/// `Psi * clr(u)`. Fails with [`Error::Boundary`] off the open simplex.
pub fn ilr(u: &InterEventTimes, psi: &ContrastMatrix) -> Result<IlrVector> {
    if u.len() != psi.k() + 1 {
        return Err(Error::DimensionMismatch { expected: psi.k() + 1, got: u.len() });
    }
    let clr = DVector::from_vec(u.clr()?);
    IlrVector::from_dvector(&(psi.matrix() * clr))
}

pub fn ilr_inverse(v: &IlrVector, psi: &ContrastMatrix, total: f64) -> Result<InterEventTimes> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidArgument(format!("total must be positive, got {total}")));
    }
    let scores = psi.column_scores(v)?;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|a| (a - max).exp()).collect();
    let norm: f64 = weights.iter().sum();
    let u = weights.iter().map(|w| total * w / norm).collect();
    InterEventTimes::new(u, total)
}

fn check_permutation(r: &[usize], n: usize) -> Result<()> {
    if r.len() != n {
        return Err(Error::InvalidPermutation(format!("length {} != {n}", r.len())));
    }
    let mut seen = vec![false; n];
    for &i in r {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidPermutation(format!("{r:?} is not a permutation of 0..{n}")));
        }
    }
    Ok(())
}

/// `A_r = Psi Psi_r^T` for a 0-based permutation `r` of the `k+1` columns.
///
/// `A_r` is orthogonal and satisfies `A_r^T Psi[:, i] = Psi[:, r[i]]`. The
/// family is closed under products: `A_r A_q = A_{q . r}` where
/// `(q . r)[i] = q[r[i]]`.
pub fn permutation_orthogonal(psi: &ContrastMatrix, r: &[usize]) -> Result<DMatrix<f64>> {
    let permuted = psi.permuted(r)?;
    Ok(psi.matrix() * permuted.matrix().transpose())
}

/// Every permutation of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn domain(a: f64, b: f64) -> TimeDomain {
        TimeDomain::new(a, b).unwrap()
    }

    #[test]
    fn helmert_small_cases() {
        let p1 = build_contrast_matrix(1).unwrap();
        assert_relative_eq!(p1.matrix()[(0, 0)], 1.0 / 2f64.sqrt());
        assert_relative_eq!(p1.matrix()[(0, 1)], -1.0 / 2f64.sqrt());

        let p2 = build_contrast_matrix(2).unwrap();
        let expect = [
            [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0],
            [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()],
        ];
        for i in 0..2 {
            for j in 0..3 {
                assert_relative_eq!(p2.matrix()[(i, j)], expect[i][j], epsilon = 1e-15);
            }
        }
        assert!(ContrastMatrix::from_matrix(p2.matrix().clone()).is_ok());
    }

    #[test]
    fn k_zero_rejected() {
        assert_eq!(build_contrast_matrix(0), Err(Error::EmptyContrast));
    }

    #[test]
    fn contrast_identities_and_regular_simplex() {
        for k in 1..=8 {
            let psi = build_contrast_matrix(k).unwrap();
            let m = psi.matrix();
            assert!((m * m.transpose() - DMatrix::identity(k, k)).amax() < 1e-10);
            let row_sums = m * DVector::from_element(k + 1, 1.0);
            assert!(row_sums.amax() < 1e-12);
            for p in 0..=k {
                assert_relative_eq!(
                    psi.column(p).norm_squared(),
                    k as f64 / (k + 1) as f64,
                    epsilon = 1e-12
                );
                for q in p + 1..=k {
                    let ip = psi.column(p).dot(&psi.column(q));
                    assert_relative_eq!(ip, -1.0 / (k + 1) as f64, epsilon = 1e-12);
                    let dist = (psi.column(p) - psi.column(q)).norm();
                    assert_relative_eq!(dist, 2f64.sqrt(), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn iet_examples() {
        let p = PointProcess::new(domain(0.0, 2.0), vec![0.5, 1.0]).unwrap();
        assert_eq!(to_iet(&p).as_slice(), &[0.5, 0.5, 1.0]);

        let empty = PointProcess::empty(domain(0.0, 5.0));
        assert_eq!(to_iet(&empty).as_slice(), &[5.0]);

        let b = PointProcess::new(domain(0.0, 3.0), vec![1.0, 1.0, 2.0]).unwrap();
        let u = to_iet(&b);
        assert_eq!(u.as_slice(), &[1.0, 0.0, 1.0, 1.0]);
        assert!(!u.is_interior());
        assert!(b.on_boundary());
    }

    #[test]
    fn from_iet_examples() {
        let d = domain(0.0, 2.0);
        let u = InterEventTimes::new(vec![0.5, 0.5, 1.0], 2.0).unwrap();
        assert_eq!(from_iet(&u, d).unwrap().events(), &[0.5, 1.0]);

        let u = InterEventTimes::new(vec![5.0], 5.0).unwrap();
        assert!(from_iet(&u, domain(0.0, 5.0)).unwrap().is_empty());

        let u = InterEventTimes::new(vec![1.0, 1.0, 1.0], 3.0).unwrap();
        assert_eq!(from_iet(&u, domain(0.0, 3.0)).unwrap().events(), &[1.0, 2.0]);

        assert!(matches!(from_iet(&u, domain(0.0, 4.0)), Err(Error::TotalMismatch { .. })));
    }

    #[test]
    fn boundary_flag() {
        let d = domain(0.0, 1.0);
        assert!(!PointProcess::empty(d).on_boundary());
        assert!(PointProcess::new(d, vec![0.0, 0.5]).unwrap().on_boundary());
        assert!(PointProcess::new(d, vec![0.5, 1.0]).unwrap().on_boundary());
        assert!(!PointProcess::new(d, vec![0.25, 0.5]).unwrap().on_boundary());
        assert!(PointProcess::new(d, vec![0.5, 0.25]).is_err());
        assert!(PointProcess::new(d, vec![1.5]).is_err());
    }

    #[test]
    fn ilr_examples() {
        let psi = build_contrast_matrix(2).unwrap();
        let u = InterEventTimes::new(vec![1.0, 1.0, 1.0], 3.0).unwrap();
        let v = ilr(&u, &psi).unwrap();
        assert!(v.as_slice().iter().all(|x| x.abs() < 1e-15));

        // log(u_i / g) for u = (0.5, 0.5, 1.0): g = 0.25^(1/3), so the clr is
        // (-ln2/3, -ln2/3, 2 ln2/3) and the squared norm is (2/3) ln(2)^2.
        let u = InterEventTimes::new(vec![0.5, 0.5, 1.0], 2.0).unwrap();
        let v = ilr(&u, &psi).unwrap();
        let expected = 2.0 / 3.0 * std::f64::consts::LN_2.powi(2);
        assert_relative_eq!(v.norm_squared(), expected, max_relative = 1e-12);
        assert_relative_eq!(v.norm_squared(), 0.320_302_009_278_801, max_relative = 1e-12);

        let u = InterEventTimes::new(vec![1.0, 0.0, 1.0], 2.0).unwrap();
        assert!(matches!(ilr(&u, &psi), Err(Error::Boundary { index: 1, .. })));
    }

    #[test]
    fn ilr_inverse_examples() {
        let psi = build_contrast_matrix(2).unwrap();
        let u = ilr_inverse(&IlrVector::zeros(2), &psi, 3.0).unwrap();
        for x in u.as_slice() {
            assert_relative_eq!(*x, 1.0, epsilon = 1e-15);
        }

        let u0 = InterEventTimes::new(vec![0.2, 0.7, 1.1], 2.0).unwrap();
        let back = ilr_inverse(&ilr(&u0, &psi).unwrap(), &psi, 2.0).unwrap();
        for (a, b) in back.as_slice().iter().zip(u0.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }

        let far = IlrVector::new(vec![30.0, 40.0]).unwrap();
        let u = ilr_inverse(&far, &psi, 2.0).unwrap();
        assert!(u.as_slice().iter().all(|&x| x > 0.0));
        assert_relative_eq!(u.as_slice().iter().sum::<f64>(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn permutation_matrices_k2() {
        let psi = build_contrast_matrix(2).unwrap();
        let id = permutation_orthogonal(&psi, &[0, 1, 2]).unwrap();
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-12);

        let cycle = permutation_orthogonal(&psi, &[1, 2, 0]).unwrap();
        assert_relative_eq!(cycle.determinant(), 1.0, epsilon = 1e-12);
        let angle = 2.0 * std::f64::consts::PI / 3.0;
        assert_relative_eq!(cycle.trace(), 2.0 * angle.cos(), epsilon = 1e-12);

        let swap = permutation_orthogonal(&psi, &[1, 0, 2]).unwrap();
        assert_relative_eq!(swap.determinant(), -1.0, epsilon = 1e-12);

        let rotations = all_permutations(3)
            .iter()
            .filter(|r| permutation_orthogonal(&psi, r).unwrap().determinant() > 0.0)
            .count();
        assert_eq!(rotations, 3);
    }

    #[test]
    fn permutation_maps_columns() {
        let psi = build_contrast_matrix(3).unwrap();
        for r in all_permutations(4) {
            let a = permutation_orthogonal(&psi, &r).unwrap();
            assert!((&a * a.transpose() - DMatrix::identity(3, 3)).amax() < 1e-10);
            for i in 0..4 {
                let lhs = a.transpose() * psi.column(i);
                assert!((lhs - psi.column(r[i])).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn invalid_permutation() {
        let psi = build_contrast_matrix(2).unwrap();
        assert!(permutation_orthogonal(&psi, &[0, 0, 1]).is_err());
        assert!(permutation_orthogonal(&psi, &[0, 1]).is_err());
        assert!(permutation_orthogonal(&psi, &[0, 1, 3]).is_err());
    }

    #[test]
    fn affine_map_moves_domain() {
        let p = PointProcess::new(domain(0.0, 1.0), vec![0.25, 0.5]).unwrap();
        let q = p.affine(2.0, 3.0).unwrap();
        assert_eq!(q.domain(), domain(3.0, 5.0));
        assert_eq!(q.events(), &[3.5, 4.0]);
    }
}

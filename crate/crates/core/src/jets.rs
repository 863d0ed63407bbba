//! Truncated matrix jets at a single basepoint.
//!
//! Two flavours: [`HoloJet`] holds `∂^I Φ(z0)` of a holomorphic matrix
//! function, and [`GramJet`] holds `∂^I ∂̄^J H(z0, z0)` of a kernel that is
//! holomorphic in the first variable and anti-holomorphic in the second.
//! Tables store derivative values, not Taylor coefficients; conversion to
//! coefficients divides by `I!·J!`.

use crate::multiindex::{IndexOrdering, MultiIndex};
use crate::util;
use crate::{CMatrix, C64};
use thiserror::Error;

/// Condition-number ceiling for treating a leading coefficient as invertible.
pub const INVERTIBILITY_COND_LIMIT: f64 = 1e12;

/// Relative eigenvalue floor for Hermitian positive definiteness checks.
pub const PD_RELATIVE_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum JetError {
    #[error("jet shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("jets have different basepoints")]
    BasepointMismatch,
    #[error("leading coefficient is numerically singular (condition {cond:.3e})")]
    SingularLeadingCoefficient { cond: f64 },
    #[error("matrix is not Hermitian positive definite (min/max eigenvalue {min_eig:.3e}/{max_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },
}

/// Jet of a holomorphic matrix-valued function: `coeff(I) = ∂^I Φ(z0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloJet {
    vars: usize,
    rank: usize,
    order: u32,
    basepoint: Vec<C64>,
    ordering: IndexOrdering,
    coeffs: Vec<CMatrix>,
}

impl HoloJet {
    pub fn from_fn(
        vars: usize,
        rank: usize,
        order: u32,
        basepoint: Vec<C64>,
        mut f: impl FnMut(&MultiIndex) -> CMatrix,
    ) -> Self {
        assert_eq!(basepoint.len(), vars, "basepoint dimension mismatch");
        let ordering = IndexOrdering::new(vars, order);
        let coeffs = ordering
            .iter()
            .map(|i| {
                let m = f(i);
                assert_eq!(m.shape(), (rank, rank), "coefficient shape mismatch");
                m
            })
            .collect();
        HoloJet {
            vars,
            rank,
            order,
            basepoint,
            ordering,
            coeffs,
        }
    }

    /// Jet of a constant function.
    pub fn constant(vars: usize, order: u32, basepoint: Vec<C64>, value: CMatrix) -> Self {
        assert_eq!(value.nrows(), value.ncols(), "constant jet must be square");
        let rank = value.nrows();
        Self::from_fn(vars, rank, order, basepoint, |i| {
            if i.is_zero() {
                value.clone()
            } else {
                CMatrix::zeros(rank, rank)
            }
        })
    }

    /// Jet of the constant identity.
    pub fn identity(vars: usize, rank: usize, order: u32, basepoint: Vec<C64>) -> Self {
        Self::constant(vars, order, basepoint, CMatrix::identity(rank, rank))
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn basepoint(&self) -> &[C64] {
        &self.basepoint
    }

    pub fn ordering(&self) -> &IndexOrdering {
        &self.ordering
    }

    pub fn coeff(&self, index: &MultiIndex) -> &CMatrix {
        let pos = self
            .ordering
            .position(index)
            .expect("index outside jet order");
        &self.coeffs[pos]
    }

    pub fn coeff_at(&self, pos: usize) -> &CMatrix {
        &self.coeffs[pos]
    }

    fn compatible(&self, other: &Self) -> Result<(), JetError> {
        if self.vars != other.vars || self.order != other.order {
            return Err(JetError::ShapeMismatch(format!(
                "vars/order ({}, {}) vs ({}, {})",
                self.vars, self.order, other.vars, other.order
            )));
        }
        if self.rank != other.rank {
            return Err(JetError::ShapeMismatch(format!(
                "rank {} vs {}",
                self.rank, other.rank
            )));
        }
        if self.basepoint != other.basepoint {
            return Err(JetError::BasepointMismatch);
        }
        Ok(())
    }

    /// Jet of the pointwise product `self(z) · rhs(z)` (Leibniz rule).
    pub fn product(&self, rhs: &Self) -> Result<Self, JetError> {
        self.compatible(rhs)?;
        let ord = &self.ordering;
        let coeffs = ord
            .iter()
            .map(|i| {
                let mut acc = CMatrix::zeros(self.rank, self.rank);
                for a in ord.iter().filter(|a| i.geq(a)) {
                    let rest = i.checked_sub(a).expect("dominated by construction");
                    let c = C64::new(i.binom(a) as f64, 0.0);
                    acc += self.coeff(a) * rhs.coeff(&rest) * c;
                }
                acc
            })
            .collect();
        Ok(HoloJet {
            coeffs,
            ordering: ord.clone(),
            basepoint: self.basepoint.clone(),
            ..*self
        })
    }

    /// Jet of the pointwise inverse `self(z)^{-1}`, by degree-graded
    /// recursion. Fails when the leading coefficient is singular.
    pub fn invert(&self) -> Result<Self, JetError> {
        let lead = &self.coeffs[0];
        let svd = lead.clone().svd(false, false);
        let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
        for &s in svd.singular_values.iter() {
            smin = smin.min(s);
            smax = smax.max(s);
        }
        if smax == 0.0 || smax / smin > INVERTIBILITY_COND_LIMIT {
            return Err(JetError::SingularLeadingCoefficient {
                cond: if smin == 0.0 {
                    f64::INFINITY
                } else {
                    smax / smin
                },
            });
        }
        let lead_inv = lead
            .clone()
            .try_inverse()
            .ok_or(JetError::SingularLeadingCoefficient {
                cond: f64::INFINITY,
            })?;

        let ord = &self.ordering;
        let mut inv: Vec<CMatrix> = Vec::with_capacity(ord.len());
        // graded ordering guarantees inv[I-A] is available before inv[I]
        for (pos, i) in ord.iter().enumerate() {
            if pos == 0 {
                inv.push(lead_inv.clone());
                continue;
            }
            let mut acc = CMatrix::zeros(self.rank, self.rank);
            for a in ord.iter().filter(|a| !a.is_zero() && i.geq(a)) {
                let rest = i.checked_sub(a).expect("dominated");
                let rest_pos = ord.position(&rest).expect("within order");
                let c = C64::new(i.binom(a) as f64, 0.0);
                acc += self.coeff(a) * &inv[rest_pos] * c;
            }
            inv.push(-&lead_inv * acc);
        }
        Ok(HoloJet {
            coeffs: inv,
            ordering: ord.clone(),
            basepoint: self.basepoint.clone(),
            ..*self
        })
    }
}

/// Two-variable jet of a Gram kernel: `entry(I, J) = ∂^I ∂̄^J H(z0, z0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramJet {
    vars: usize,
    rank: usize,
    order: u32,
    basepoint: Vec<C64>,
    ordering: IndexOrdering,
    table: Vec<CMatrix>,
}

impl GramJet {
    pub fn from_fn(
        vars: usize,
        rank: usize,
        order: u32,
        basepoint: Vec<C64>,
        mut f: impl FnMut(&MultiIndex, &MultiIndex) -> CMatrix,
    ) -> Self {
        assert_eq!(basepoint.len(), vars, "basepoint dimension mismatch");
        let ordering = IndexOrdering::new(vars, order);
        let len = ordering.len();
        let mut table = Vec::with_capacity(len * len);
        for i in ordering.iter() {
            for j in ordering.iter() {
                let m = f(i, j);
                assert_eq!(m.shape(), (rank, rank), "entry shape mismatch");
                table.push(m);
            }
        }
        GramJet {
            vars,
            rank,
            order,
            basepoint,
            ordering,
            table,
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn basepoint(&self) -> &[C64] {
        &self.basepoint
    }

    pub fn ordering(&self) -> &IndexOrdering {
        &self.ordering
    }

    pub fn entry(&self, i: &MultiIndex, j: &MultiIndex) -> &CMatrix {
        let pi = self.ordering.position(i).expect("index outside jet order");
        let pj = self.ordering.position(j).expect("index outside jet order");
        self.entry_at(pi, pj)
    }

    pub fn entry_at(&self, pi: usize, pj: usize) -> &CMatrix {
        &self.table[pi * self.ordering.len() + pj]
    }

    /// Entrywise real scaling.
    pub fn scale(&self, factor: f64) -> Self {
        let c = C64::new(factor, 0.0);
        GramJet {
            table: self.table.iter().map(|m| m * c).collect(),
            ordering: self.ordering.clone(),
            basepoint: self.basepoint.clone(),
            ..*self
        }
    }

    /// Max defect of the Hermitian pairing `D[J][I] = D[I][J]*`.
    pub fn hermitian_pairing_defect(&self) -> f64 {
        let len = self.ordering.len();
        let mut worst = 0.0f64;
        for pi in 0..len {
            for pj in 0..len {
                let d = util::max_abs_diff(self.entry_at(pj, pi), &self.entry_at(pi, pj).adjoint());
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Max deviation from the normalized shape: `D[0][0] = I` and vanishing
    /// `D[I][0]`, `D[0][J]` borders for `|I|, |J| ≥ 1`.
    pub fn normalization_defect(&self) -> f64 {
        let n = self.rank;
        let mut worst = util::max_abs_diff(self.entry_at(0, 0), &CMatrix::identity(n, n));
        for p in 1..self.ordering.len() {
            worst = worst.max(util::max_abs(self.entry_at(p, 0)));
            worst = worst.max(util::max_abs(self.entry_at(0, p)));
        }
        worst
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.normalization_defect() <= tol
    }

    /// Holomorphic jet of `z ↦ H(z, z0)`: the `J = 0` column.
    pub fn restrict_left(&self) -> HoloJet {
        HoloJet::from_fn(
            self.vars,
            self.rank,
            self.order,
            self.basepoint.clone(),
            |i| self.entry(i, &MultiIndex::zeros(self.vars)).clone(),
        )
    }

    /// Block-diagonal join of two jets over the same basepoint (ranks add).
    pub fn block_diag(a: &GramJet, b: &GramJet) -> Result<GramJet, JetError> {
        if a.vars != b.vars || a.order != b.order {
            return Err(JetError::ShapeMismatch(format!(
                "vars/order ({}, {}) vs ({}, {})",
                a.vars, a.order, b.vars, b.order
            )));
        }
        if a.basepoint != b.basepoint {
            return Err(JetError::BasepointMismatch);
        }
        let rank = a.rank + b.rank;
        Ok(GramJet::from_fn(
            a.vars,
            rank,
            a.order,
            a.basepoint.clone(),
            |i, j| {
                let mut m = CMatrix::zeros(rank, rank);
                m.view_mut((0, 0), (a.rank, a.rank))
                    .copy_from(a.entry(i, j));
                m.view_mut((a.rank, a.rank), (b.rank, b.rank))
                    .copy_from(b.entry(i, j));
                m
            },
        ))
    }
}

/// Jet of `Φ_L(z) · H(z, w) · Φ_R(w)*` by the two-variable Leibniz rule.
pub fn sandwich(left: &HoloJet, mid: &GramJet, right: &HoloJet) -> Result<GramJet, JetError> {
    for side in [left, right] {
        if side.vars() != mid.vars || side.order() != mid.order {
            return Err(JetError::ShapeMismatch(format!(
                "sandwich vars/order ({}, {}) vs ({}, {})",
                side.vars(),
                side.order(),
                mid.vars,
                mid.order
            )));
        }
        if side.rank() != mid.rank {
            return Err(JetError::ShapeMismatch(format!(
                "sandwich rank {} vs {}",
                side.rank(),
                mid.rank
            )));
        }
        if side.basepoint() != mid.basepoint {
            return Err(JetError::BasepointMismatch);
        }
    }
    let ord = &mid.ordering;
    Ok(GramJet::from_fn(
        mid.vars,
        mid.rank,
        mid.order,
        mid.basepoint.clone(),
        |i, j| {
            let mut acc = CMatrix::zeros(mid.rank, mid.rank);
            for a in ord.iter().filter(|a| i.geq(a)) {
                let di = i.checked_sub(a).expect("dominated");
                let ca = i.binom(a) as f64;
                let la = left.coeff(a);
                for b in ord.iter().filter(|b| j.geq(b)) {
                    let dj = j.checked_sub(b).expect("dominated");
                    let c = C64::new(ca * j.binom(b) as f64, 0.0);
                    acc += la * mid.entry(&di, &dj) * right.coeff(b).adjoint() * c;
                }
            }
            acc
        },
    ))
}

/// Unique Hermitian positive definite square root, via eigendecomposition.
pub fn hermitian_sqrt(a: &CMatrix) -> Result<CMatrix, JetError> {
    assert_eq!(a.nrows(), a.ncols(), "square matrix required");
    let herm = util::hermitian_part(a);
    let eig = herm.symmetric_eigen();
    let (mut min, mut max) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        min = min.min(l);
        max = max.max(l);
    }
    if min <= PD_RELATIVE_FLOOR * max.max(1e-300) || max <= 0.0 {
        return Err(JetError::NotPositiveDefinite {
            min_eig: min,
            max_eig: max,
        });
    }
    let q = &eig.eigenvectors;
    let sqrt_diag = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.sqrt(), 0.0)));
    Ok(q * sqrt_diag * q.adjoint())
}

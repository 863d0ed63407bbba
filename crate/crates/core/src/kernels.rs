//! Reproducing-kernel models and jet extraction.
//!
//! A model describes a Gram kernel `K(z, w)`, holomorphic in `z` and
//! anti-holomorphic in `w`, from which two-variable jets are pulled at a
//! basepoint. Disc-product and ball kernels have exact closed-form jets;
//! every model also exposes a pointwise evaluator so the Cauchy-quadrature
//! path can cross-validate the closed forms.

use crate::jets::{sandwich, GramJet, HoloJet, JetError, PD_RELATIVE_FLOOR};
use crate::multiindex::{IndexOrdering, MultiIndex};
use crate::util;
use crate::{CMatrix, C64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("basepoint outside the model domain")]
    OutsideDomain,
    #[error(
        "kernel is degenerate at the basepoint (eigenvalues in [{min_eig:.3e}, {max_eig:.3e}])"
    )]
    Degenerate { min_eig: f64, max_eig: f64 },
    #[error("coefficient table violates the Hermitian pairing (defect {defect:.3e})")]
    NotHermitianPairing { defect: f64 },
    #[error("kernel evaluation failed: {0}")]
    EvaluationFailed(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// `z^I = ∏ z_l^{i_l}` with the convention `0^0 = 1`.
fn monomial(point: &[C64], exp: &MultiIndex) -> C64 {
    point
        .iter()
        .zip(exp.entries())
        .map(|(z, &e)| z.powu(e))
        .product()
}

/// Generalized binomial coefficient `C(-λ, j)`.
fn neg_weight_binom(lambda: f64, j: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..j {
        acc *= (-lambda - i as f64) / (i as f64 + 1.0);
    }
    acc
}

/// Finite power-series kernel `K(z, w) = Σ A[P][Q] z^P w̄^Q` with matrix
/// coefficients satisfying `A[Q][P] = A[P][Q]*`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeriesKernel {
    vars: usize,
    rank: usize,
    terms: Vec<(MultiIndex, MultiIndex, CMatrix)>,
}

impl PowerSeriesKernel {
    pub fn new(
        vars: usize,
        rank: usize,
        terms: Vec<(MultiIndex, MultiIndex, CMatrix)>,
    ) -> Result<Self, KernelError> {
        let mut merged: Vec<(MultiIndex, MultiIndex, CMatrix)> = Vec::new();
        for (p, q, a) in terms {
            if p.len() != vars || q.len() != vars {
                return Err(KernelError::InvalidParameter(format!(
                    "exponent length {}/{} does not match {} variables",
                    p.len(),
                    q.len(),
                    vars
                )));
            }
            if a.shape() != (rank, rank) {
                return Err(KernelError::InvalidParameter(format!(
                    "coefficient shape {:?} does not match rank {}",
                    a.shape(),
                    rank
                )));
            }
            match merged.iter_mut().find(|(mp, mq, _)| mp == &p && mq == &q) {
                Some((_, _, m)) => *m += a,
                None => merged.push((p, q, a)),
            }
        }
        merged.sort_by(|(p1, q1, _), (p2, q2, _)| (p1, q1).cmp(&(p2, q2)));

        // pairing check: the table must define a genuine Gram kernel
        let mut scale = 1.0f64;
        for (_, _, a) in &merged {
            scale = scale.max(util::max_abs(a));
        }
        let mut defect = 0.0f64;
        for (p, q, a) in &merged {
            let partner = merged
                .iter()
                .find(|(mp, mq, _)| mp == q && mq == p)
                .map(|(_, _, m)| m.clone())
                .unwrap_or_else(|| CMatrix::zeros(rank, rank));
            defect = defect.max(util::max_abs_diff(&partner, &a.adjoint()));
        }
        if defect > 1e-12 * scale {
            return Err(KernelError::NotHermitianPairing { defect });
        }
        Ok(PowerSeriesKernel {
            vars,
            rank,
            terms: merged,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn terms(&self) -> &[(MultiIndex, MultiIndex, CMatrix)] {
        &self.terms
    }

    /// Largest per-variable exponent over both variable groups.
    pub fn max_exponent(&self) -> u32 {
        self.terms
            .iter()
            .flat_map(|(p, q, _)| p.entries().iter().chain(q.entries()))
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, z: &[C64], w: &[C64]) -> CMatrix {
        let mut acc = CMatrix::zeros(self.rank, self.rank);
        let wbar: Vec<C64> = w.iter().map(|x| x.conj()).collect();
        for (p, q, a) in &self.terms {
            acc += a * (monomial(z, p) * monomial(&wbar, q));
        }
        acc
    }

    /// Termwise differentiation: `D[I][J] = Σ (P)_I (Q)_J z0^{P-I} z̄0^{Q-J} A`.
    fn jet_at(&self, z0: &[C64], order: u32) -> GramJet {
        let z0bar: Vec<C64> = z0.iter().map(|x| x.conj()).collect();
        GramJet::from_fn(self.vars, self.rank, order, z0.to_vec(), |i, j| {
            let mut acc = CMatrix::zeros(self.rank, self.rank);
            for (p, q, a) in &self.terms {
                let fp = p.falling(i);
                let fq = q.falling(j);
                if fp == 0 || fq == 0 {
                    continue;
                }
                let zp = monomial(z0, &p.checked_sub(i).expect("dominated"));
                let zq = monomial(&z0bar, &q.checked_sub(j).expect("dominated"));
                acc += a * (zp * zq * (fp * fq) as f64);
            }
            acc
        })
    }
}

/// Matrix polynomial `Φ(z) = Σ C_P z^P`, used as a holomorphic frame change.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPolynomial {
    vars: usize,
    rank: usize,
    terms: Vec<(MultiIndex, CMatrix)>,
}

impl MatrixPolynomial {
    pub fn new(
        vars: usize,
        rank: usize,
        terms: Vec<(MultiIndex, CMatrix)>,
    ) -> Result<Self, KernelError> {
        for (p, c) in &terms {
            if p.len() != vars {
                return Err(KernelError::InvalidParameter(format!(
                    "exponent length {} does not match {} variables",
                    p.len(),
                    vars
                )));
            }
            if c.shape() != (rank, rank) {
                return Err(KernelError::InvalidParameter(format!(
                    "coefficient shape {:?} does not match rank {}",
                    c.shape(),
                    rank
                )));
            }
        }
        Ok(MatrixPolynomial { vars, rank, terms })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn terms(&self) -> &[(MultiIndex, CMatrix)] {
        &self.terms
    }

    pub fn eval(&self, z: &[C64]) -> CMatrix {
        let mut acc = CMatrix::zeros(self.rank, self.rank);
        for (p, c) in &self.terms {
            acc += c * monomial(z, p);
        }
        acc
    }

    pub fn holo_jet(&self, z0: &[C64], order: u32) -> HoloJet {
        HoloJet::from_fn(self.vars, self.rank, order, z0.to_vec(), |i| {
            let mut acc = CMatrix::zeros(self.rank, self.rank);
            for (p, c) in &self.terms {
                let f = p.falling(i);
                if f == 0 {
                    continue;
                }
                acc += c * (monomial(z0, &p.checked_sub(i).expect("dominated")) * f as f64);
            }
            acc
        })
    }
}

/// Holomorphic frame change attached to a `ConjugateBy` model.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameMap {
    Constant(CMatrix),
    Polynomial(MatrixPolynomial),
}

impl FrameMap {
    pub fn rank(&self) -> usize {
        match self {
            FrameMap::Constant(m) => m.nrows(),
            FrameMap::Polynomial(p) => p.rank(),
        }
    }

    pub fn eval(&self, z: &[C64]) -> CMatrix {
        match self {
            FrameMap::Constant(m) => m.clone(),
            FrameMap::Polynomial(p) => p.eval(z),
        }
    }

    fn holo_jet(&self, z0: &[C64], order: u32) -> HoloJet {
        match self {
            FrameMap::Constant(m) => HoloJet::constant(z0.len(), order, z0.to_vec(), m.clone()),
            FrameMap::Polynomial(p) => p.holo_jet(z0, order),
        }
    }
}

/// Descriptor of a kernel model; immutable, jets are extracted on demand.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelModel {
    /// `K(z, w) = ∏ (1 - z_l w̄_l)^{-λ_l}` on the unit polydisc, rank 1.
    ProductPolydisc {
        weights: Vec<f64>,
    },
    /// `K(z, w) = (1 - ⟨z, w⟩)^{-λ}` on the unit ball, rank 1.
    Ball {
        vars: usize,
        weight: f64,
    },
    PowerSeries(PowerSeriesKernel),
    /// Ranks add; both summands share the variable count.
    DirectSum(Box<KernelModel>, Box<KernelModel>),
    /// `Φ(z) K(z, w) Φ(w)*` for a constant or polynomial frame change.
    ConjugateBy {
        inner: Box<KernelModel>,
        frame: FrameMap,
    },
    /// `c · K(z, w)` for `c > 0`.
    Scale {
        inner: Box<KernelModel>,
        factor: f64,
    },
}

impl KernelModel {
    pub fn product_polydisc(weights: Vec<f64>) -> Result<Self, KernelError> {
        if weights.is_empty() {
            return Err(KernelError::InvalidParameter(
                "polydisc kernel needs at least one weight".into(),
            ));
        }
        if weights.iter().any(|&l| !l.is_finite() || l <= 0.0) {
            return Err(KernelError::InvalidParameter(
                "polydisc weights must be positive".into(),
            ));
        }
        Ok(KernelModel::ProductPolydisc { weights })
    }

    pub fn ball(vars: usize, weight: f64) -> Result<Self, KernelError> {
        if vars == 0 {
            return Err(KernelError::InvalidParameter(
                "ball kernel needs at least one variable".into(),
            ));
        }
        if !weight.is_finite() || weight <= 0.0 {
            return Err(KernelError::InvalidParameter(
                "ball weight must be positive".into(),
            ));
        }
        Ok(KernelModel::Ball { vars, weight })
    }

    pub fn direct_sum(a: KernelModel, b: KernelModel) -> Result<Self, KernelError> {
        if a.vars() != b.vars() {
            return Err(KernelError::InvalidParameter(format!(
                "direct sum over {} vs {} variables",
                a.vars(),
                b.vars()
            )));
        }
        Ok(KernelModel::DirectSum(Box::new(a), Box::new(b)))
    }

    pub fn conjugate_by(inner: KernelModel, frame: FrameMap) -> Result<Self, KernelError> {
        if frame.rank() != inner.rank() {
            return Err(KernelError::InvalidParameter(format!(
                "frame rank {} does not match model rank {}",
                frame.rank(),
                inner.rank()
            )));
        }
        if let FrameMap::Constant(m) = &frame {
            if m.nrows() != m.ncols() {
                return Err(KernelError::InvalidParameter(
                    "frame matrix must be square".into(),
                ));
            }
            let svd = m.clone().svd(false, false);
            let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
            for &s in svd.singular_values.iter() {
                smin = smin.min(s);
                smax = smax.max(s);
            }
            if smax == 0.0 || smax / smin > 1e12 {
                return Err(KernelError::InvalidParameter(
                    "frame matrix must be invertible".into(),
                ));
            }
        }
        if let FrameMap::Polynomial(p) = &frame {
            if p.vars() != inner.vars() {
                return Err(KernelError::InvalidParameter(format!(
                    "frame polynomial over {} vs {} variables",
                    p.vars(),
                    inner.vars()
                )));
            }
        }
        Ok(KernelModel::ConjugateBy {
            inner: Box::new(inner),
            frame,
        })
    }

    pub fn scale(inner: KernelModel, factor: f64) -> Result<Self, KernelError> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(KernelError::InvalidParameter(
                "scale factor must be positive".into(),
            ));
        }
        Ok(KernelModel::Scale {
            inner: Box::new(inner),
            factor,
        })
    }

    pub fn vars(&self) -> usize {
        match self {
            KernelModel::ProductPolydisc { weights } => weights.len(),
            KernelModel::Ball { vars, .. } => *vars,
            KernelModel::PowerSeries(ps) => ps.vars(),
            KernelModel::DirectSum(a, _) => a.vars(),
            KernelModel::ConjugateBy { inner, .. } => inner.vars(),
            KernelModel::Scale { inner, .. } => inner.vars(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            KernelModel::ProductPolydisc { .. } | KernelModel::Ball { .. } => 1,
            KernelModel::PowerSeries(ps) => ps.rank(),
            KernelModel::DirectSum(a, b) => a.rank() + b.rank(),
            KernelModel::ConjugateBy { inner, .. } => inner.rank(),
            KernelModel::Scale { inner, .. } => inner.rank(),
        }
    }

    /// Whether `z0` lies strictly inside the model's domain.
    pub fn contains(&self, z0: &[C64]) -> bool {
        if z0.len() != self.vars() {
            return false;
        }
        match self {
            KernelModel::ProductPolydisc { .. } => z0.iter().all(|z| z.norm() < 1.0),
            KernelModel::Ball { .. } => z0.iter().map(|z| z.norm_sqr()).sum::<f64>() < 1.0,
            KernelModel::PowerSeries(_) => true,
            KernelModel::DirectSum(a, b) => a.contains(z0) && b.contains(z0),
            KernelModel::ConjugateBy { inner, .. } => inner.contains(z0),
            KernelModel::Scale { inner, .. } => inner.contains(z0),
        }
    }

    /// Largest `r` such that moving every coordinate of `z0` by up to `r`
    /// stays in the domain; `None` for entire kernels.
    pub fn boundary_distance(&self, z0: &[C64]) -> Option<f64> {
        match self {
            KernelModel::ProductPolydisc { .. } => z0
                .iter()
                .map(|z| 1.0 - z.norm())
                .fold(None, |acc: Option<f64>, d| {
                    Some(acc.map_or(d, |a| a.min(d)))
                }),
            KernelModel::Ball { vars, .. } => {
                let norm = z0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                Some((1.0 - norm) / (*vars as f64).sqrt())
            }
            KernelModel::PowerSeries(_) => None,
            KernelModel::DirectSum(a, b) => {
                match (a.boundary_distance(z0), b.boundary_distance(z0)) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (Some(x), None) | (None, Some(x)) => Some(x),
                    (None, None) => None,
                }
            }
            KernelModel::ConjugateBy { inner, .. } => inner.boundary_distance(z0),
            KernelModel::Scale { inner, .. } => inner.boundary_distance(z0),
        }
    }

    /// Exact jet of the Gram kernel at `z0`, to derivative order `order` in
    /// each variable group. Checks that `K(z0, z0)` is positive definite.
    pub fn jet_at(&self, z0: &[C64], order: u32) -> Result<GramJet, KernelError> {
        if z0.len() != self.vars() {
            return Err(KernelError::InvalidParameter(format!(
                "basepoint has {} coordinates, model has {} variables",
                z0.len(),
                self.vars()
            )));
        }
        if !self.contains(z0) {
            return Err(KernelError::OutsideDomain);
        }
        let jet = self.jet_at_unchecked(z0, order)?;
        let (min_eig, max_eig) = util::hermitian_eig_range(jet.entry_at(0, 0));
        if min_eig <= PD_RELATIVE_FLOOR * max_eig.max(1e-300) || max_eig <= 0.0 {
            return Err(KernelError::Degenerate { min_eig, max_eig });
        }
        Ok(jet)
    }

    fn jet_at_unchecked(&self, z0: &[C64], order: u32) -> Result<GramJet, KernelError> {
        match self {
            KernelModel::ProductPolydisc { weights } => {
                let tables: Vec<Vec<Vec<C64>>> = z0
                    .iter()
                    .zip(weights)
                    .map(|(&a, &l)| disc_factor_table(a, l, order))
                    .collect();
                Ok(GramJet::from_fn(
                    weights.len(),
                    1,
                    order,
                    z0.to_vec(),
                    |i, j| {
                        let v: C64 = i
                            .entries()
                            .iter()
                            .zip(j.entries())
                            .zip(&tables)
                            .map(|((&p, &q), t)| t[p as usize][q as usize])
                            .product();
                        CMatrix::from_element(1, 1, v)
                    },
                ))
            }
            KernelModel::Ball { vars, weight } => Ok(ball_jet(z0, *vars, *weight, order)),
            KernelModel::PowerSeries(ps) => Ok(ps.jet_at(z0, order)),
            KernelModel::DirectSum(a, b) => {
                let ja = a.jet_at_unchecked(z0, order)?;
                let jb = b.jet_at_unchecked(z0, order)?;
                Ok(GramJet::block_diag(&ja, &jb)?)
            }
            KernelModel::ConjugateBy { inner, frame } => {
                let jet = inner.jet_at_unchecked(z0, order)?;
                let phi = frame.holo_jet(z0, order);
                Ok(sandwich(&phi, &jet, &phi)?)
            }
            KernelModel::Scale { inner, factor } => {
                Ok(inner.jet_at_unchecked(z0, order)?.scale(*factor))
            }
        }
    }
}

/// Pointwise Gram-kernel evaluation, holomorphic in `z`, anti-holomorphic
/// in `w`. User-supplied evaluators feed the quadrature path.
pub trait KernelEvaluator {
    fn vars(&self) -> usize;
    fn rank(&self) -> usize;
    fn eval(&self, z: &[C64], w: &[C64]) -> CMatrix;
}

impl KernelEvaluator for KernelModel {
    fn vars(&self) -> usize {
        KernelModel::vars(self)
    }

    fn rank(&self) -> usize {
        KernelModel::rank(self)
    }

    fn eval(&self, z: &[C64], w: &[C64]) -> CMatrix {
        match self {
            KernelModel::ProductPolydisc { weights } => {
                let v: C64 = z
                    .iter()
                    .zip(w)
                    .zip(weights)
                    .map(|((&zi, &wi), &l)| (C64::new(1.0, 0.0) - zi * wi.conj()).powf(-l))
                    .product();
                CMatrix::from_element(1, 1, v)
            }
            KernelModel::Ball { weight, .. } => {
                let pairing: C64 = z.iter().zip(w).map(|(&zi, &wi)| zi * wi.conj()).sum();
                CMatrix::from_element(1, 1, (C64::new(1.0, 0.0) - pairing).powf(-weight))
            }
            KernelModel::PowerSeries(ps) => ps.eval(z, w),
            KernelModel::DirectSum(a, b) => {
                let (ka, kb) = (a.eval(z, w), b.eval(z, w));
                let (na, nb) = (a.rank(), b.rank());
                let mut m = CMatrix::zeros(na + nb, na + nb);
                m.view_mut((0, 0), (na, na)).copy_from(&ka);
                m.view_mut((na, na), (nb, nb)).copy_from(&kb);
                m
            }
            KernelModel::ConjugateBy { inner, frame } => {
                frame.eval(z) * inner.eval(z, w) * frame.eval(w).adjoint()
            }
            KernelModel::Scale { inner, factor } => inner.eval(z, w) * C64::new(*factor, 0.0),
        }
    }
}

/// One-variable factor jet `T[p][q] = ∂_z^p ∂̄_w^q (1 - z w̄)^{-λ}` at `a`.
///
/// Writes `1 - z w̄ = c0 (1 + x)` with `x = (-ā δz - a δv - δz δv)/c0` around
/// the diagonal point and expands `(1 + x)^{-λ}`; the expansion terminates
/// because `x` has no constant term.
fn disc_factor_table(a: C64, lambda: f64, order: u32) -> Vec<Vec<C64>> {
    let c0 = 1.0 - a.norm_sqr();
    debug_assert!(c0 > 0.0, "basepoint outside the unit disc");
    let prefactor = c0.powf(-lambda);
    let alpha = -a.conj() / c0;
    let beta = -a / c0;
    let gamma = C64::new(-1.0 / c0, 0.0);
    let d = order as usize;
    let fact: Vec<f64> = (0..=2 * d as u32)
        .map(|k| crate::multiindex::factorial(k) as f64)
        .collect();
    let mut table = vec![vec![C64::new(0.0, 0.0); d + 1]; d + 1];
    for p in 0..=d {
        for q in 0..=d {
            let mut sum = C64::new(0.0, 0.0);
            for t in 0..=p.min(q) {
                let j = p + q - t;
                let trinomial = fact[j] / (fact[p - t] * fact[q - t] * fact[t]);
                sum += alpha.powu((p - t) as u32)
                    * beta.powu((q - t) as u32)
                    * gamma.powu(t as u32)
                    * (neg_weight_binom(lambda, j as u32) * trinomial);
            }
            table[p][q] = sum * (prefactor * fact[p] * fact[q]);
        }
    }
    table
}

/// Truncated polynomial in the two variable groups (δz, δv), coefficients
/// addressed by a pair of multi-indices of total degree ≤ d each.
struct BiPoly {
    ordering: IndexOrdering,
    coeffs: Vec<C64>,
}

impl BiPoly {
    fn zeros(vars: usize, order: u32) -> Self {
        let ordering = IndexOrdering::new(vars, order);
        let len = ordering.len();
        BiPoly {
            ordering,
            coeffs: vec![C64::new(0.0, 0.0); len * len],
        }
    }

    fn one(vars: usize, order: u32) -> Self {
        let mut p = Self::zeros(vars, order);
        p.coeffs[0] = C64::new(1.0, 0.0);
        p
    }

    fn at(&self, pi: usize, pj: usize) -> C64 {
        self.coeffs[pi * self.ordering.len() + pj]
    }

    fn set(&mut self, i: &MultiIndex, j: &MultiIndex, v: C64) {
        let pi = self.ordering.position(i).expect("within order");
        let pj = self.ordering.position(j).expect("within order");
        let l = self.ordering.len();
        self.coeffs[pi * l + pj] = v;
    }

    /// Product truncated to the stored degree range; terms escaping the
    /// range can never re-enter it, so truncation is exact for kept entries.
    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.ordering.vars(), self.ordering.degree_bound());
        let l = self.ordering.len();
        for ai in 0..l {
            for aj in 0..l {
                let ca = self.at(ai, aj);
                if ca.norm_sqr() == 0.0 {
                    continue;
                }
                for bi in 0..l {
                    for bj in 0..l {
                        let cb = other.at(bi, bj);
                        if cb.norm_sqr() == 0.0 {
                            continue;
                        }
                        let si = sum_index(&self.ordering, ai, bi);
                        let sj = sum_index(&self.ordering, aj, bj);
                        if let (Some(pi), Some(pj)) = (si, sj) {
                            out.coeffs[pi * l + pj] += ca * cb;
                        }
                    }
                }
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Self, factor: f64) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * factor;
        }
    }
}

fn sum_index(ordering: &IndexOrdering, a: usize, b: usize) -> Option<usize> {
    let ia = ordering.index(a);
    let ib = ordering.index(b);
    let sum = MultiIndex::new(
        ia.entries()
            .iter()
            .zip(ib.entries())
            .map(|(x, y)| x + y)
            .collect(),
    );
    ordering.position(&sum)
}

/// Exact jet of the ball kernel `(1 - ⟨z, w⟩)^{-λ}` at `z0`.
fn ball_jet(z0: &[C64], vars: usize, lambda: f64, order: u32) -> GramJet {
    let c0 = 1.0 - z0.iter().map(|z| z.norm_sqr()).sum::<f64>();
    debug_assert!(c0 > 0.0, "basepoint outside the unit ball");
    let prefactor = c0.powf(-lambda);

    // 1 - ⟨z, w⟩ = c0 (1 + x) around the diagonal point
    let mut x = BiPoly::zeros(vars, order);
    if order >= 1 {
        for (l, z) in z0.iter().enumerate() {
            let unit = MultiIndex::unit(vars, l);
            let zero = MultiIndex::zeros(vars);
            x.set(&unit, &zero, -z.conj() / c0);
            x.set(&zero, &unit, -z / c0);
            x.set(&unit, &unit, C64::new(-1.0 / c0, 0.0));
        }
    }
    let mut acc = BiPoly::one(vars, order);
    let mut power = BiPoly::one(vars, order);
    for j in 1..=2 * order {
        power = power.mul(&x);
        acc.add_scaled(&power, neg_weight_binom(lambda, j));
    }

    let ordering = IndexOrdering::new(vars, order);
    GramJet::from_fn(vars, 1, order, z0.to_vec(), |i, j| {
        let pi = ordering.position(i).unwrap();
        let pj = ordering.position(j).unwrap();
        let v = acc.at(pi, pj) * (prefactor * (i.factorial() * j.factorial()) as f64);
        CMatrix::from_element(1, 1, v)
    })
}

/// Two-variable derivatives by tensor-product Cauchy quadrature over tori
/// of radius `radius` with `nodes` points per circle.
///
/// Exact up to roundoff when the kernel is a polynomial of per-variable
/// degree `< nodes` in `z` and `w̄`.
pub fn jet_at_numeric(
    kernel: &dyn KernelEvaluator,
    z0: &[C64],
    order: u32,
    radius: f64,
    nodes: usize,
) -> Result<GramJet, KernelError> {
    let vars = kernel.vars();
    let rank = kernel.rank();
    if z0.len() != vars {
        return Err(KernelError::InvalidParameter(format!(
            "basepoint has {} coordinates, kernel has {} variables",
            z0.len(),
            vars
        )));
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(KernelError::InvalidParameter(
            "quadrature radius must be positive".into(),
        ));
    }
    if nodes <= order as usize {
        return Err(KernelError::InvalidParameter(format!(
            "need more than {order} nodes per circle, got {nodes}"
        )));
    }

    let ordering = IndexOrdering::new(vars, order);
    let len = ordering.len();
    // roots[c] = e^{-2πi c/N}
    let roots: Vec<C64> = (0..nodes)
        .map(|c| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * c as f64 / nodes as f64))
        .collect();
    let total = nodes.pow(vars as u32);

    // per node tuple: the two torus points and e^{-i K·θ} for every index K
    struct Node {
        plus: Vec<C64>,  // z0 + r e^{+iθ}, first-variable circle
        minus: Vec<C64>, // z0 + r e^{-iθ}, for the anti-holomorphic side
        phases: Vec<C64>,
    }
    let node_data: Vec<Node> = (0..total)
        .map(|mut flat| {
            let mut digit = vec![0usize; vars];
            for slot in digit.iter_mut() {
                *slot = flat % nodes;
                flat /= nodes;
            }
            let plus = (0..vars)
                .map(|l| z0[l] + roots[(nodes - digit[l]) % nodes] * radius)
                .collect();
            let minus = (0..vars)
                .map(|l| z0[l] + roots[digit[l]] * radius)
                .collect();
            let phases = ordering
                .iter()
                .map(|k| {
                    k.entries()
                        .iter()
                        .zip(&digit)
                        .map(|(&e, &a)| roots[(e as usize * a) % nodes])
                        .product()
                })
                .collect();
            Node {
                plus,
                minus,
                phases,
            }
        })
        .collect();

    let mut acc = vec![CMatrix::zeros(rank, rank); len * len];
    for a in &node_data {
        for b in &node_data {
            // z runs over the +θ torus, w over -φ so that w̄ runs over +φ
            let value = kernel.eval(&a.plus, &b.minus);
            if value.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(KernelError::EvaluationFailed(
                    "non-finite kernel value on the quadrature torus".into(),
                ));
            }
            for pi in 0..len {
                let pz = a.phases[pi];
                for pj in 0..len {
                    let weight = pz * b.phases[pj];
                    let slot = &mut acc[pi * len + pj];
                    for (dst, src) in slot.iter_mut().zip(value.iter()) {
                        *dst += src * weight;
                    }
                }
            }
        }
    }

    let norm = (total * total) as f64;
    let jet = GramJet::from_fn(vars, rank, order, z0.to_vec(), |i, j| {
        let pi = ordering.position(i).unwrap();
        let pj = ordering.position(j).unwrap();
        let scalefac = (i.factorial() * j.factorial()) as f64
            / (norm * radius.powi((i.degree() + j.degree()) as i32));
        &acc[pi * len + pj] * C64::new(scalefac, 0.0)
    });
    if (0..len * len).any(|t| {
        jet.entry_at(t / len, t % len)
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
    }) {
        return Err(KernelError::EvaluationFailed("non-finite jet entry".into()));
    }
    Ok(jet)
}

/// Default quadrature radius: half the distance from `z0` to the domain
/// boundary (measured per-coordinate), or 1 for entire kernels.
pub fn default_quadrature_radius(model: &KernelModel, z0: &[C64]) -> f64 {
    match model.boundary_distance(z0) {
        Some(d) => 0.5 * d,
        None => 1.0,
    }
}

/// Default node count per circle for a given jet order.
///
/// Truncation error decays like `(r/R)^N`; six nodes per order keep the
/// catalog under 1e-8 at order 3 where four would not.
pub fn default_quadrature_nodes(order: u32) -> usize {
    6 * (order as usize + 1)
}

/// Named standard models used by tests and the comparison examples.
/// All entries have rank ≤ 2 and at most two variables.
pub fn catalog() -> Vec<(&'static str, KernelModel)> {
    let szego = KernelModel::product_polydisc(vec![1.0]).unwrap();
    let bergman = KernelModel::product_polydisc(vec![2.0]).unwrap();
    let weighted_bidisc = KernelModel::product_polydisc(vec![1.0, 2.0]).unwrap();
    let ball_two = KernelModel::ball(2, 1.5).unwrap();

    // truncated diagonal series: a genuine finite-rank Gram kernel
    let truncated_szego = KernelModel::PowerSeries(
        PowerSeriesKernel::new(
            1,
            1,
            (0..=4u32)
                .map(|p| {
                    (
                        MultiIndex::new(vec![p]),
                        MultiIndex::new(vec![p]),
                        CMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
                    )
                })
                .collect(),
        )
        .unwrap(),
    );

    let two_sum = KernelModel::direct_sum(szego.clone(), bergman.clone()).unwrap();
    let reframed_sum = KernelModel::conjugate_by(
        two_sum.clone(),
        FrameMap::Constant(CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.3, 0.0),
                C64::new(0.0, -0.2),
                C64::new(0.8, 0.0),
            ],
        )),
    )
    .unwrap();
    let reframed_bergman = KernelModel::conjugate_by(
        bergman.clone(),
        FrameMap::Polynomial(
            MatrixPolynomial::new(
                1,
                1,
                vec![
                    (
                        MultiIndex::zeros(1),
                        CMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
                    ),
                    (
                        MultiIndex::new(vec![1]),
                        CMatrix::from_element(1, 1, C64::new(0.5, 0.0)),
                    ),
                ],
            )
            .unwrap(),
        ),
    )
    .unwrap();

    vec![
        ("szego_disc", szego),
        ("bergman_disc", bergman),
        ("weighted_bidisc", weighted_bidisc),
        ("ball_two", ball_two),
        ("truncated_szego", truncated_szego),
        ("szego_plus_bergman", two_sum),
        ("reframed_sum", reframed_sum),
        ("reframed_bergman", reframed_bergman),
    ]
}

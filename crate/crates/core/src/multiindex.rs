//! Multi-index arithmetic and the graded-lexicographic ordering used to
//! address jet tables and block matrices.
//!
//! All combinatorics here are exact integer arithmetic; orders stay small
//! (degree bounds of a handful), so `u64` never overflows.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MultiIndexError {
    #[error("multi-index length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{minuend} does not dominate {subtrahend} componentwise")]
    NotDominated {
        minuend: MultiIndex,
        subtrahend: MultiIndex,
    },
}

/// Tuple of non-negative exponents addressing a mixed partial derivative.
///
/// The derived `Ord` is plain lexicographic on the entries; the graded
/// ordering used for block layouts lives in [`IndexOrdering`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one entry");
        MultiIndex(entries)
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0; len])
    }

    /// Unit index with a single 1 at `axis`.
    pub fn unit(len: usize, axis: usize) -> Self {
        let mut e = vec![0; len];
        e[axis] = 1;
        Self::new(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor forbids empty indices
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Total degree `|I|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `I! = i_1! ⋯ i_m!`.
    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&k| factorial(k)).product()
    }

    /// Componentwise `self ≥ other`.
    pub fn geq(&self, other: &Self) -> bool {
        assert_eq!(
            self.len(),
            other.len(),
            "comparing multi-indices of different lengths"
        );
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// Componentwise difference, defined only when `self ≥ other`.
    pub fn checked_sub(&self, other: &Self) -> Result<Self, MultiIndexError> {
        if self.len() != other.len() {
            return Err(MultiIndexError::LengthMismatch(self.len(), other.len()));
        }
        if !self.geq(other) {
            return Err(MultiIndexError::NotDominated {
                minuend: self.clone(),
                subtrahend: other.clone(),
            });
        }
        Ok(Self::new(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Falling coefficient `self!/(self-lower)!` when `self ≥ lower`, else 0.
    ///
    /// The zero branch absorbs the "otherwise 0" case of the derivative
    /// action, so callers never need to guard.
    pub fn falling(&self, lower: &Self) -> u64 {
        assert_eq!(self.len(), lower.len(), "falling on mismatched lengths");
        if !self.geq(lower) {
            return 0;
        }
        self.0
            .iter()
            .zip(&lower.0)
            .map(|(&j, &i)| falling_1d(j, i))
            .product()
    }

    /// Product of componentwise binomial coefficients; 0 unless `self ≥ lower`.
    pub fn binom(&self, lower: &Self) -> u64 {
        let f = self.falling(lower);
        if f == 0 && !self.geq(lower) {
            return 0;
        }
        f / lower.factorial()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn factorial(k: u32) -> u64 {
    (1..=k as u64).product()
}

/// One-variable falling factorial `j·(j-1)⋯(j-i+1)`, 0 when `i > j`.
fn falling_1d(j: u32, i: u32) -> u64 {
    if i > j {
        return 0;
    }
    ((j - i + 1) as u64..=j as u64).product()
}

/// Binomial coefficient, exact in `u64` for the small arguments used here.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All multi-indices of length `vars` with total degree at most
/// `degree_bound`, in graded order (degree-major, lexicographic within each
/// degree), together with the position map σ.
///
/// The zero index always sits at position 0; the same ordering is shared by
/// every module that lays out blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexOrdering {
    vars: usize,
    degree_bound: u32,
    indices: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

impl IndexOrdering {
    pub fn new(vars: usize, degree_bound: u32) -> Self {
        assert!(vars >= 1, "need at least one variable");
        let mut indices = Vec::new();
        let mut current = vec![0u32; vars];
        collect_indices(&mut current, 0, degree_bound, &mut indices);
        // collect_indices emits in plain lex order; a stable sort by degree
        // keeps lex order within each degree.
        indices.sort_by_key(|i| i.degree());
        let positions = indices
            .iter()
            .cloned()
            .enumerate()
            .map(|(p, i)| (i, p))
            .collect();
        IndexOrdering {
            vars,
            degree_bound,
            indices,
            positions,
        }
    }

    /// Number of indices, `L = C(vars + degree_bound, vars)`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn degree_bound(&self) -> u32 {
        self.degree_bound
    }

    /// The index at position `pos` (σ⁻¹).
    #[allow(clippy::should_implement_trait)]
    pub fn index(&self, pos: usize) -> &MultiIndex {
        &self.indices[pos]
    }

    /// Position of `index` (σ), if it is within the degree bound.
    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }
}

fn collect_indices(current: &mut Vec<u32>, slot: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if slot == current.len() {
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    for v in 0..=remaining {
        current[slot] = v;
        collect_indices(current, slot + 1, remaining - v, out);
        current[slot] = 0;
    }
}

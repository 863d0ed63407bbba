//! Joint unitary equivalence of finite matrix tuples.
//!
//! Two complementary engines: trace-word screening (unitary invariants
//! `tr w(A, A*)`, which certify inequivalence and, when every word up to the
//! sufficiency bound matches, equivalence) and a constructive certificate
//! search that samples the joint intertwiner space and projects onto the
//! unitary group by polar decomposition.

use crate::util;
use crate::{CMatrix, C64};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpechtError {
    #[error("tuples have different dimensions: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("tuples have different member counts: {0} vs {1}")]
    MemberCountMismatch(usize, usize),
    #[error("a matrix tuple needs at least one member")]
    EmptyTuple,
    #[error("members must be square matrices of equal dimension")]
    InvalidMember,
    #[error("word refers to member {member}, tuple has {count}")]
    LetterOutOfRange { member: usize, count: usize },
    #[error("trace words must be non-empty")]
    EmptyWord,
}

/// Ordered tuple of same-size square matrices with stable member labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    dim: usize,
    members: Vec<CMatrix>,
    labels: Vec<String>,
}

impl MatrixTuple {
    pub fn new(members: Vec<CMatrix>) -> Result<Self, SpechtError> {
        let labels = (0..members.len()).map(|i| format!("a{i}")).collect();
        Self::with_labels(members, labels)
    }

    pub fn with_labels(members: Vec<CMatrix>, labels: Vec<String>) -> Result<Self, SpechtError> {
        if members.is_empty() {
            return Err(SpechtError::EmptyTuple);
        }
        if labels.len() != members.len() {
            return Err(SpechtError::InvalidMember);
        }
        let dim = members[0].nrows();
        if members.iter().any(|m| m.shape() != (dim, dim)) {
            return Err(SpechtError::InvalidMember);
        }
        Ok(MatrixTuple {
            dim,
            members,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor forbids empty tuples
    }

    pub fn member(&self, index: usize) -> &CMatrix {
        &self.members[index]
    }

    pub fn members(&self) -> &[CMatrix] {
        &self.members
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Conjugated tuple `{U A_α U*}`.
    pub fn conjugated(&self, unitary: &CMatrix) -> MatrixTuple {
        MatrixTuple {
            dim: self.dim,
            members: self
                .members
                .iter()
                .map(|m| unitary * m * unitary.adjoint())
                .collect(),
            labels: self.labels.clone(),
        }
    }

    /// Largest member Frobenius norm, floored at 1; used to scale trace
    /// tolerances with word length.
    fn norm_bound(&self) -> f64 {
        self.members.iter().map(util::fro_norm).fold(1.0, f64::max)
    }
}

/// One letter of a trace word: a tuple member, possibly starred.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Letter {
    pub member: usize,
    pub starred: bool,
}

/// Formal product of tuple members and adjoints whose trace is a unitary
/// invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceWord {
    letters: Vec<Letter>,
}

impl TraceWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self, SpechtError> {
        if letters.is_empty() {
            return Err(SpechtError::EmptyWord);
        }
        Ok(TraceWord { letters })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor forbids empty words
    }

    /// Render with the tuple's member labels.
    pub fn render(&self, labels: &[String]) -> String {
        self.letters
            .iter()
            .map(|l| {
                let name = labels
                    .get(l.member)
                    .cloned()
                    .unwrap_or_else(|| format!("a{}", l.member));
                if l.starred {
                    format!("{name}*")
                } else {
                    name
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for TraceWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "a{}{}", l.member, if l.starred { "*" } else { "" })?;
        }
        Ok(())
    }
}

/// Trace of the ordered product designated by the word.
pub fn trace_word_value(tuple: &MatrixTuple, word: &TraceWord) -> Result<C64, SpechtError> {
    let mut acc = CMatrix::identity(tuple.dim(), tuple.dim());
    for letter in word.letters() {
        if letter.member >= tuple.len() {
            return Err(SpechtError::LetterOutOfRange {
                member: letter.member,
                count: tuple.len(),
            });
        }
        let m = tuple.member(letter.member);
        if letter.starred {
            acc *= m.adjoint();
        } else {
            acc *= m;
        }
    }
    Ok(acc.trace())
}

/// Number of words of length 1..=max_len over `members` letters and their
/// stars: Σ (2s)^j.
pub fn word_count(members: usize, max_len: usize) -> u128 {
    let base = 2 * members as u128;
    let mut total = 0u128;
    let mut power = 1u128;
    for _ in 1..=max_len {
        power = power.saturating_mul(base);
        total = total.saturating_add(power);
    }
    total
}

/// All words of length 1..=max_len, shortest first, lexicographic within a
/// length (member-major, plain before starred).
pub fn words(members: usize, max_len: usize) -> impl Iterator<Item = TraceWord> {
    let base = 2 * members;
    (1..=max_len).flat_map(move |len| {
        let total = (base as u128).pow(len as u32);
        (0..total).map(move |flat| {
            let mut letters = Vec::with_capacity(len);
            let mut rest = flat;
            for slot in (0..len).rev() {
                let digit = (rest / (base as u128).pow(slot as u32)) as usize % base;
                rest %= (base as u128).pow(slot as u32);
                letters.push(Letter {
                    member: digit / 2,
                    starred: digit % 2 == 1,
                });
            }
            TraceWord { letters }
        })
    })
}

/// Word length that guarantees equivalence when all traces match
/// (conservative classical bound; configurable because it is an
/// implementation choice, not a sharp constant).
pub fn sufficiency_bound(dim: usize) -> usize {
    2 * dim * dim
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Equivalent,
    Inequivalent,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Equivalent => "equivalent",
            Status::Inequivalent => "inequivalent",
            Status::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// Unitary witnessing equivalence, with its conjugation residual.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub unitary: CMatrix,
    pub residual: f64,
}

/// Trace word witnessing inequivalence, with the two trace values.
#[derive(Clone, Debug)]
pub struct Witness {
    pub word: TraceWord,
    pub value_a: C64,
    pub value_b: C64,
}

#[derive(Clone, Debug)]
pub struct EquivalenceVerdict {
    pub status: Status,
    pub certificate: Option<Certificate>,
    pub witness: Option<Witness>,
    pub reason: String,
}

/// Tuning knobs for the combined decision procedure.
#[derive(Clone, Debug)]
pub struct SpechtOptions {
    /// Requested enumeration depth for trace words.
    pub max_word_len: usize,
    /// Base tolerance for trace comparison; scaled by `norm_bound^len`.
    pub trace_tol: f64,
    /// Residual tolerance for accepting a certificate.
    pub cert_tol: f64,
    pub seed: u64,
    /// Random samples drawn from the intertwiner space.
    pub retries: usize,
    /// Hard cap on enumerated words; the depth is clamped to stay under it.
    pub word_budget: u128,
}

impl Default for SpechtOptions {
    fn default() -> Self {
        SpechtOptions {
            max_word_len: 8,
            trace_tol: 1e-8,
            cert_tol: 1e-6,
            seed: 0,
            retries: 32,
            word_budget: 250_000,
        }
    }
}

/// Verdict plus the best conjugation distance seen by the search, for
/// reporting `max_α ‖A_α − U B_α U*‖` even on inequivalent pairs.
#[derive(Clone, Debug)]
pub struct TupleComparison {
    pub verdict: EquivalenceVerdict,
    pub distance: f64,
}

/// Trace-word test as a standalone operation.
pub fn specht_test(
    tuple_a: &MatrixTuple,
    tuple_b: &MatrixTuple,
    max_len: usize,
    tol: f64,
) -> Result<EquivalenceVerdict, SpechtError> {
    let opts = SpechtOptions {
        max_word_len: max_len,
        trace_tol: tol,
        ..SpechtOptions::default()
    };
    Ok(compare_tuples(tuple_a, tuple_b, &opts)?.verdict)
}

/// Full decision procedure: trace-word screening plus certificate search.
pub fn compare_tuples(
    tuple_a: &MatrixTuple,
    tuple_b: &MatrixTuple,
    opts: &SpechtOptions,
) -> Result<TupleComparison, SpechtError> {
    if tuple_a.dim() != tuple_b.dim() {
        return Err(SpechtError::DimensionMismatch(tuple_a.dim(), tuple_b.dim()));
    }
    if tuple_a.len() != tuple_b.len() {
        return Err(SpechtError::MemberCountMismatch(
            tuple_a.len(),
            tuple_b.len(),
        ));
    }
    let dim = tuple_a.dim();
    let members = tuple_a.len();
    let norm_bound = tuple_a.norm_bound().max(tuple_b.norm_bound());

    // clamp enumeration depth to the word budget
    let mut effective_len = 0;
    for len in 1..=opts.max_word_len {
        if word_count(members, len) > opts.word_budget {
            break;
        }
        effective_len = len;
    }
    let clamped = effective_len < opts.max_word_len;

    let mut witness = None;
    'screen: for word in words(members, effective_len) {
        let va = trace_word_value(tuple_a, &word)?;
        let vb = trace_word_value(tuple_b, &word)?;
        let scaled_tol = opts.trace_tol * norm_bound.powi(word.len() as i32);
        if (va - vb).norm() > scaled_tol {
            witness = Some(Witness {
                word,
                value_a: va,
                value_b: vb,
            });
            break 'screen;
        }
    }

    let search = search_certificate(tuple_a, tuple_b, opts);
    let bound_proved = !clamped && effective_len >= sufficiency_bound(dim) && witness.is_none();

    let verdict = match (&witness, &search.certificate) {
        (Some(w), None) => EquivalenceVerdict {
            status: Status::Inequivalent,
            certificate: None,
            reason: format!(
                "trace word {} separates the tuples (|Δ| = {:.3e})",
                w.word.render(tuple_a.labels()),
                (w.value_a - w.value_b).norm()
            ),
            witness,
        },
        (Some(w), Some(c)) => EquivalenceVerdict {
            status: Status::Inconclusive,
            certificate: search.certificate.clone(),
            reason: format!(
                "contradictory evidence: word {} separates traces (|Δ| = {:.3e}) but a certificate with residual {:.3e} was found; tolerances are likely too tight",
                w.word.render(tuple_a.labels()),
                (w.value_a - w.value_b).norm(),
                c.residual
            ),
            witness,
        },
        (None, Some(c)) => EquivalenceVerdict {
            status: Status::Equivalent,
            reason: if bound_proved {
                format!(
                    "all trace words up to length {} match (≥ sufficiency bound {}) and a certificate with residual {:.3e} confirms",
                    effective_len,
                    sufficiency_bound(dim),
                    c.residual
                )
            } else {
                format!(
                    "certificate with residual {:.3e}; trace words up to length {} all match",
                    c.residual, effective_len
                )
            },
            certificate: search.certificate.clone(),
            witness: None,
        },
        (None, None) => {
            if bound_proved {
                EquivalenceVerdict {
                    status: Status::Equivalent,
                    certificate: None,
                    witness: None,
                    reason: format!(
                        "all trace words up to length {} match the sufficiency bound {}; no certificate was recovered",
                        effective_len,
                        sufficiency_bound(dim)
                    ),
                }
            } else {
                EquivalenceVerdict {
                    status: Status::Inconclusive,
                    certificate: None,
                    witness: None,
                    reason: format!(
                        "trace words up to length {}{} all match but no certificate was found within the retry budget",
                        effective_len,
                        if clamped { " (depth clamped by word budget)" } else { "" }
                    ),
                }
            }
        }
    };
    Ok(TupleComparison {
        verdict,
        distance: search.best_residual,
    })
}

/// Search outcome: an accepted certificate, if any, plus the best residual
/// seen over all candidates (identity fallback when the intertwiner space is
/// trivial).
struct SearchOutcome {
    certificate: Option<Certificate>,
    best_residual: f64,
}

/// Conjugation residual `max_α ‖U A_α U* − B_α‖_F`.
pub fn conjugation_residual(
    tuple_a: &MatrixTuple,
    tuple_b: &MatrixTuple,
    unitary: &CMatrix,
) -> f64 {
    tuple_a
        .members()
        .iter()
        .zip(tuple_b.members())
        .map(|(a, b)| util::fro_diff(&(unitary * a * unitary.adjoint()), b))
        .fold(0.0, f64::max)
}

/// Constructive certificate search.
///
/// Builds the joint intertwiner space `{S : S A_α = B_α S, S A_α* = B_α* S}`
/// from stacked Kronecker conditions, samples it (projection of the identity
/// first, then seeded random elements), and returns the first unitary polar
/// factor whose conjugation residual is within `tol`.
pub fn find_certificate(
    tuple_a: &MatrixTuple,
    tuple_b: &MatrixTuple,
    tol: f64,
    seed: u64,
) -> Result<Option<Certificate>, SpechtError> {
    if tuple_a.dim() != tuple_b.dim() {
        return Err(SpechtError::DimensionMismatch(tuple_a.dim(), tuple_b.dim()));
    }
    if tuple_a.len() != tuple_b.len() {
        return Err(SpechtError::MemberCountMismatch(
            tuple_a.len(),
            tuple_b.len(),
        ));
    }
    let opts = SpechtOptions {
        cert_tol: tol,
        seed,
        ..SpechtOptions::default()
    };
    Ok(search_certificate(tuple_a, tuple_b, &opts).certificate)
}

fn search_certificate(
    tuple_a: &MatrixTuple,
    tuple_b: &MatrixTuple,
    opts: &SpechtOptions,
) -> SearchOutcome {
    let p = tuple_a.dim();
    let s = tuple_a.len();
    let eye = CMatrix::identity(p, p);

    // stack vec(S A_α - B_α S) = 0 and the starred conditions
    let mut conditions = CMatrix::zeros(2 * s * p * p, p * p);
    for (alpha, (a, b)) in tuple_a.members().iter().zip(tuple_b.members()).enumerate() {
        let plain = a.transpose().kronecker(&eye) - eye.kronecker(b);
        let starred = a.conjugate().kronecker(&eye) - eye.kronecker(&b.adjoint());
        conditions
            .view_mut((2 * alpha * p * p, 0), (p * p, p * p))
            .copy_from(&plain);
        conditions
            .view_mut(((2 * alpha + 1) * p * p, 0), (p * p, p * p))
            .copy_from(&starred);
    }

    let svd = conditions.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let null_tol = 1e-10 * sigma_max.max(1.0);
    let basis: Vec<DVector<C64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &sigma)| sigma <= null_tol)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();

    let identity_residual = conjugation_residual(tuple_a, tuple_b, &eye);
    if basis.is_empty() {
        return SearchOutcome {
            certificate: None,
            best_residual: identity_residual,
        };
    }

    let vec_eye = DVector::from_iterator(p * p, eye.iter().cloned());
    let mut candidates: Vec<DVector<C64>> = Vec::with_capacity(opts.retries + 1);
    // deterministic first try: the projection of the identity; exact when
    // the tuples are literally equal
    let mut projection = DVector::from_element(p * p, C64::new(0.0, 0.0));
    for v in &basis {
        projection += v * v.dotc(&vec_eye);
    }
    if projection.norm() > 1e-12 {
        candidates.push(projection);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.retries {
        let mut sample = DVector::from_element(p * p, C64::new(0.0, 0.0));
        for v in &basis {
            sample += v * util::random_c64(&mut rng);
        }
        candidates.push(sample);
    }

    let mut best_residual = identity_residual;
    let mut certificate = None;
    for cand in candidates {
        let s_mat = CMatrix::from_column_slice(p, p, cand.as_slice());
        let svd = s_mat.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => continue,
        };
        let polar = u * v_t;
        if util::unitarity_defect(&polar) > 1e-10 {
            continue;
        }
        let residual = conjugation_residual(tuple_a, tuple_b, &polar);
        if residual < best_residual {
            best_residual = residual;
        }
        if residual <= opts.cert_tol {
            certificate = Some(Certificate {
                unitary: polar,
                residual,
            });
            break;
        }
    }
    SearchOutcome {
        certificate,
        best_residual,
    }
}

//! Localization invariants from normalized Gram jets.
//!
//! Given the jet of a Gram kernel at a basepoint, this module normalizes the
//! frame, assembles the block Gram matrix of the jet basis
//! `{∂^K γ_i : |K| ≤ k-1}`, and extracts the invariant matrices
//! `M^{IJ} = I!·J!·G_{JI}` from the inverse block Gram `G`. The transposed
//! block index follows the left-action convention for representing matrices
//! (composition `ΦΨ ↦ BA`, adjoints `Φ* ↦ H A* H^{-1}`).
//!
//! A second, independent route builds the nilpotent shift matrices `N^I`
//! explicitly, forms `B·A` for `N^I ∘ (N^J)*`, and compresses to the
//! first-order block; the two routes must agree and cross-check each other's
//! conventions.

use crate::jets::{hermitian_sqrt, sandwich, GramJet, HoloJet, JetError};
use crate::multiindex::{IndexOrdering, MultiIndex};
use crate::specht::MatrixTuple;
use crate::util;
use crate::{CMatrix, C64};
use nalgebra::{Cholesky, Dyn};
use thiserror::Error;

/// Relative eigenvalue floor below which a block Gram counts as indefinite.
pub const GRAM_PD_FLOOR: f64 = 1e-10;

/// Condition-number ceiling for inverting a block Gram.
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// Normalization defect tolerated when a normalized jet is required.
pub const NORMALIZED_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("jet order {order} too low for localization order {k}")]
    OrderTooLow { order: u32, k: u32 },
    #[error("block Gram matrix is not positive definite (eigenvalues in [{min_eig:.3e}, {max_eig:.3e}])")]
    IndefiniteGram { min_eig: f64, max_eig: f64 },
    #[error("block Gram matrix is too ill-conditioned (condition {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("jet is not normalized (defect {defect:.3e})")]
    NotNormalized { defect: f64 },
    #[error("multi-index of positive total degree required")]
    InvalidIndex,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Normalize a frame jet: returns the jet of the frame satisfying
/// `⟨γ_i(z), γ_j(z0)⟩ = δ_ij` together with the frame change `Φ`.
///
/// `Φ(z) = K(z0,z0)^{1/2} · K(z, z0)^{-1}` applied as
/// `Φ(z) H(z,w) Φ(w)*`; the result has identity `(0,0)` block and vanishing
/// first-row/column borders.
pub fn normalize(jet: &GramJet) -> Result<(GramJet, HoloJet), LocalizationError> {
    let sqrt = hermitian_sqrt(jet.entry_at(0, 0))?;
    let lead_inv = jet.restrict_left().invert()?;
    let constant = HoloJet::constant(jet.vars(), jet.order(), jet.basepoint().to_vec(), sqrt);
    let phi = constant.product(&lead_inv)?;
    let normalized = sandwich(&phi, jet, &phi)?;
    Ok((normalized, phi))
}

/// Gram matrix of the jet basis `{∂^K γ_i : |K| ≤ k-1}`, stored as an
/// `nL × nL` block matrix with block `(σI, σJ) = D[I][J]`.
#[derive(Clone, Debug)]
pub struct BlockGram {
    order_k: u32,
    vars: usize,
    rank: usize,
    ordering: IndexOrdering,
    matrix: CMatrix,
    // Cholesky factor of the (validated) Hermitian positive definite matrix;
    // solves and the one explicit inverse go through it
    factor: Cholesky<C64, Dyn>,
    min_eig: f64,
    max_eig: f64,
}

impl BlockGram {
    pub fn order_k(&self) -> u32 {
        self.order_k
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ordering(&self) -> &IndexOrdering {
        &self.ordering
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    pub fn max_eig(&self) -> f64 {
        self.max_eig
    }

    pub fn condition(&self) -> f64 {
        self.max_eig / self.min_eig
    }

    /// Hermitian positive definite solve `H X = RHS`.
    pub fn solve(&self, rhs: &CMatrix) -> CMatrix {
        self.factor.solve(rhs)
    }

    /// Explicit inverse `G = H^{-1}`; formed once per extraction because the
    /// individual blocks of `G` are the payload.
    pub fn inverse(&self) -> CMatrix {
        self.factor.inverse()
    }
}

/// Assemble and validate the block Gram matrix of a jet for order-`k`
/// localization.
pub fn build_block_gram(jet: &GramJet, k: u32) -> Result<BlockGram, LocalizationError> {
    assert!(k >= 1, "localization order must be positive");
    let degree = k - 1;
    if jet.order() < degree {
        return Err(LocalizationError::OrderTooLow {
            order: jet.order(),
            k,
        });
    }
    let ordering = IndexOrdering::new(jet.vars(), degree);
    let n = jet.rank();
    let len = ordering.len();
    let mut matrix = CMatrix::zeros(n * len, n * len);
    for (pi, i) in ordering.iter().enumerate() {
        for (pj, j) in ordering.iter().enumerate() {
            matrix
                .view_mut((pi * n, pj * n), (n, n))
                .copy_from(jet.entry(i, j));
        }
    }
    // enforce exact Hermitian symmetry before the eigen check; jets carry
    // the pairing only up to roundoff
    let matrix = util::hermitian_part(&matrix);
    let (min_eig, max_eig) = util::hermitian_eig_range(&matrix);
    if min_eig <= GRAM_PD_FLOOR * max_eig.max(1e-300) || max_eig <= 0.0 {
        return Err(LocalizationError::IndefiniteGram { min_eig, max_eig });
    }
    let factor = matrix
        .clone()
        .cholesky()
        .ok_or(LocalizationError::IndefiniteGram { min_eig, max_eig })?;
    Ok(BlockGram {
        order_k: k,
        vars: jet.vars(),
        rank: n,
        ordering,
        matrix,
        factor,
        min_eig,
        max_eig,
    })
}

/// The invariant matrices `M^{IJ}` for `1 ≤ |I|, |J| ≤ k-1`, expressed in
/// the normalized frame basis of the first-order localization.
#[derive(Clone, Debug)]
pub struct InvariantSet {
    basepoint: Vec<C64>,
    order_k: u32,
    vars: usize,
    rank: usize,
    ordering: IndexOrdering,
    entries: Vec<CMatrix>,
}

impl InvariantSet {
    pub fn basepoint(&self) -> &[C64] {
        &self.basepoint
    }

    pub fn order_k(&self) -> u32 {
        self.order_k
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of member matrices, `(L-1)²`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: &MultiIndex, j: &MultiIndex) -> Option<&CMatrix> {
        if i.degree() == 0 || j.degree() == 0 {
            return None;
        }
        let pi = self.ordering.position(i)?;
        let pj = self.ordering.position(j)?;
        let stride = self.ordering.len() - 1;
        Some(&self.entries[(pi - 1) * stride + (pj - 1)])
    }

    /// Members in the shared `(σI, σJ)` order.
    pub fn members(&self) -> impl Iterator<Item = (&MultiIndex, &MultiIndex, &CMatrix)> {
        let stride = self.ordering.len() - 1;
        self.entries.iter().enumerate().map(move |(t, m)| {
            let pi = t / stride + 1;
            let pj = t % stride + 1;
            (self.ordering.index(pi), self.ordering.index(pj), m)
        })
    }

    /// Max defect of the adjoint pairing `M^{JI} = (M^{IJ})*`.
    pub fn adjoint_pairing_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, j, m) in self.members() {
            let partner = self.get(j, i).expect("within range");
            worst = worst.max(util::max_abs_diff(partner, &m.adjoint()));
        }
        worst
    }

    /// Flatten to a matrix tuple in the shared member order, labelled by
    /// the index pairs.
    pub fn to_matrix_tuple(&self) -> MatrixTuple {
        let members: Vec<CMatrix> = self.members().map(|(_, _, m)| m.clone()).collect();
        let labels: Vec<String> = self.members().map(|(i, j, _)| format!("K{i}{j}")).collect();
        MatrixTuple::with_labels(members, labels).expect("well-formed invariant tuple")
    }
}

fn require_normalized(jet: &GramJet) -> Result<(), LocalizationError> {
    let defect = jet.normalization_defect();
    if defect > NORMALIZED_TOL {
        return Err(LocalizationError::NotNormalized { defect });
    }
    Ok(())
}

/// Extract the invariants from the inverse block Gram: `M^{IJ} = I!J!·G_{JI}`
/// (transposed block indices, matching the left-action convention).
pub fn extract_invariants(jet: &GramJet, k: u32) -> Result<InvariantSet, LocalizationError> {
    require_normalized(jet)?;
    let gram = build_block_gram(jet, k)?;
    if gram.condition() > GRAM_COND_LIMIT {
        return Err(LocalizationError::IllConditioned {
            cond: gram.condition(),
        });
    }
    let inverse = gram.inverse();
    let n = gram.rank();
    let len = gram.ordering().len();
    let mut entries = Vec::with_capacity((len - 1) * (len - 1));
    for pi in 1..len {
        let i = gram.ordering().index(pi);
        for pj in 1..len {
            let j = gram.ordering().index(pj);
            let factor = C64::new((i.factorial() * j.factorial()) as f64, 0.0);
            let block = inverse.view((pj * n, pi * n), (n, n)).into_owned();
            entries.push(block * factor);
        }
    }
    Ok(InvariantSet {
        basepoint: jet.basepoint().to_vec(),
        order_k: k,
        vars: jet.vars(),
        rank: n,
        ordering: gram.ordering().clone(),
        entries,
    })
}

/// Representing matrix of `N^I = (T - z)^I` on the jet basis of the order-`k`
/// localization, left-action convention: block
/// `(σK, σ(K-I)) = (K)_I · I_n` for every `K ≥ I`.
pub fn n_matrix(
    index: &MultiIndex,
    k: u32,
    vars: usize,
    rank: usize,
) -> Result<CMatrix, LocalizationError> {
    assert!(k >= 1, "localization order must be positive");
    if index.degree() == 0 {
        return Err(LocalizationError::InvalidIndex);
    }
    if index.len() != vars {
        return Err(LocalizationError::ShapeMismatch(format!(
            "index length {} vs {} variables",
            index.len(),
            vars
        )));
    }
    let ordering = IndexOrdering::new(vars, k - 1);
    let len = ordering.len();
    let mut matrix = CMatrix::zeros(rank * len, rank * len);
    for (pk, kk) in ordering.iter().enumerate() {
        if !kk.geq(index) {
            continue;
        }
        let target = kk.checked_sub(index).expect("dominated");
        let pt = ordering.position(&target).expect("within degree bound");
        let falling = C64::new(kk.falling(index) as f64, 0.0);
        for r in 0..rank {
            matrix[(pk * rank + r, pt * rank + r)] = falling;
        }
    }
    Ok(matrix)
}

/// Representing matrix of the adjoint operator: `H · A* · H^{-1}`.
pub fn adjoint_matrix(a: &CMatrix, gram: &BlockGram) -> Result<CMatrix, LocalizationError> {
    if a.shape() != (gram.dim(), gram.dim()) {
        return Err(LocalizationError::ShapeMismatch(format!(
            "matrix {:?} vs block Gram dimension {}",
            a.shape(),
            gram.dim()
        )));
    }
    if gram.condition() > GRAM_COND_LIMIT {
        return Err(LocalizationError::IllConditioned {
            cond: gram.condition(),
        });
    }
    // W = H^{-1} A, then H A* H^{-1} = H W*
    let w = gram.solve(a);
    Ok(gram.matrix() * w.adjoint())
}

/// Matrix of the compression `P · X |` to the span of the first block of
/// basis vectors: `C = (E A H Eᵀ)(E H Eᵀ)^{-1}` with `E` the first-block
/// selector. For a normalized Gram this is the top-left block of `A`.
pub fn compress_to_first_order(
    a: &CMatrix,
    gram: &BlockGram,
) -> Result<CMatrix, LocalizationError> {
    if a.shape() != (gram.dim(), gram.dim()) {
        return Err(LocalizationError::ShapeMismatch(format!(
            "matrix {:?} vs block Gram dimension {}",
            a.shape(),
            gram.dim()
        )));
    }
    let n = gram.rank();
    let ah = a * gram.matrix();
    let top = ah.view((0, 0), (n, n)).into_owned();
    let corner = gram.matrix().view((0, 0), (n, n)).into_owned();
    let corner_inv = corner
        .try_inverse()
        .ok_or(LocalizationError::IndefiniteGram {
            min_eig: 0.0,
            max_eig: 0.0,
        })?;
    Ok(top * corner_inv)
}

/// Independent route to the invariants: represent `N^I ∘ (N^J)*` as `B·A`
/// with `A = N^I`, `B = H (N^J)* H^{-1}`, and compress to the first-order
/// block. Must agree with [`extract_invariants`] entrywise.
pub fn invariants_by_operator_compression(
    jet: &GramJet,
    k: u32,
) -> Result<InvariantSet, LocalizationError> {
    require_normalized(jet)?;
    let gram = build_block_gram(jet, k)?;
    if gram.condition() > GRAM_COND_LIMIT {
        return Err(LocalizationError::IllConditioned {
            cond: gram.condition(),
        });
    }
    let n = gram.rank();
    let len = gram.ordering().len();
    let mut entries = Vec::with_capacity((len - 1) * (len - 1));
    for pi in 1..len {
        let i = gram.ordering().index(pi).clone();
        let a = n_matrix(&i, k, gram.vars(), n)?;
        for pj in 1..len {
            let j = gram.ordering().index(pj).clone();
            let b = adjoint_matrix(&n_matrix(&j, k, gram.vars(), n)?, &gram)?;
            entries.push(compress_to_first_order(&(&b * &a), &gram)?);
        }
    }
    Ok(InvariantSet {
        basepoint: jet.basepoint().to_vec(),
        order_k: k,
        vars: jet.vars(),
        rank: n,
        ordering: gram.ordering().clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{catalog, KernelModel};
    use crate::util::{diag_real, max_abs_diff};

    fn mi(entries: &[u32]) -> MultiIndex {
        MultiIndex::new(entries.to_vec())
    }

    fn origin(m: usize) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); m]
    }

    fn szego() -> KernelModel {
        KernelModel::product_polydisc(vec![1.0]).unwrap()
    }

    fn bergman() -> KernelModel {
        KernelModel::product_polydisc(vec![2.0]).unwrap()
    }

    #[test]
    fn normalize_bergman_at_origin_is_identity_change() {
        let jet = bergman().jet_at(&origin(1), 2).unwrap();
        let (norm, phi) = normalize(&jet).unwrap();
        for pos in 0..phi.ordering().len() {
            let expect = if pos == 0 {
                CMatrix::identity(1, 1)
            } else {
                CMatrix::zeros(1, 1)
            };
            assert!(max_abs_diff(phi.coeff_at(pos), &expect) < 1e-14);
        }
        for pi in 0..norm.ordering().len() {
            for pj in 0..norm.ordering().len() {
                assert!(max_abs_diff(norm.entry_at(pi, pj), jet.entry_at(pi, pj)) < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_scaled_szego_matches_unit_scale() {
        let base = szego().jet_at(&origin(1), 2).unwrap();
        let scaled = base.scale(2.0);
        let (norm, phi) = normalize(&scaled).unwrap();
        let inv_sqrt2 = C64::new(1.0 / 2.0f64.sqrt(), 0.0);
        assert!((phi.coeff_at(0)[(0, 0)] - inv_sqrt2).norm() < 1e-14);
        for pi in 0..norm.ordering().len() {
            for pj in 0..norm.ordering().len() {
                assert!(max_abs_diff(norm.entry_at(pi, pj), base.entry_at(pi, pj)) < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_szego_off_origin_curvature_value() {
        let z0 = [C64::new(0.5, 0.0)];
        let jet = szego().jet_at(&z0, 1).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        // ∂∂̄ log K at 0.5 = 1/(1-0.25)² = 16/9
        let d11 = norm.entry(&mi(&[1]), &mi(&[1]))[(0, 0)];
        assert!((d11 - C64::new(16.0 / 9.0, 0.0)).norm() < 1e-10);
        assert!(norm.is_normalized(1e-12));
    }

    #[test]
    fn restrict_left_examples() {
        // Szegő at 0: K(z, 0) = 1, so the left restriction is (1, 0)
        let jet = szego().jet_at(&origin(1), 1).unwrap();
        let lead = jet.restrict_left();
        assert!((lead.coeff_at(0)[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(lead.coeff_at(1)[(0, 0)].norm() < 1e-14);

        // a normalized jet restricts to the constant identity jet
        let z0 = [C64::new(0.35, -0.2)];
        let (norm, _) = normalize(&bergman().jet_at(&z0, 2).unwrap()).unwrap();
        let lead = norm.restrict_left();
        for pos in 0..lead.ordering().len() {
            let expect = if pos == 0 {
                CMatrix::identity(1, 1)
            } else {
                CMatrix::zeros(1, 1)
            };
            assert!(max_abs_diff(lead.coeff_at(pos), &expect) < 1e-12);
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        for (name, model) in catalog() {
            let m = model.vars();
            let z0: Vec<C64> = (0..m)
                .map(|l| C64::new(0.2 - 0.03 * l as f64, 0.1))
                .collect();
            let jet = model.jet_at(&z0, 2).unwrap();
            let (once, _) = normalize(&jet).unwrap();
            let (twice, _) = normalize(&once).unwrap();
            for pi in 0..once.ordering().len() {
                for pj in 0..once.ordering().len() {
                    assert!(
                        max_abs_diff(twice.entry_at(pi, pj), once.entry_at(pi, pj)) < 1e-12,
                        "{name}"
                    );
                }
            }
        }
    }

    #[test]
    fn block_gram_examples() {
        let szego_gram = build_block_gram(&szego().jet_at(&origin(1), 1).unwrap(), 2).unwrap();
        assert!(max_abs_diff(szego_gram.matrix(), &CMatrix::identity(2, 2)) < 1e-14);

        let bergman_gram = build_block_gram(&bergman().jet_at(&origin(1), 1).unwrap(), 2).unwrap();
        assert!(max_abs_diff(bergman_gram.matrix(), &diag_real(&[1.0, 2.0])) < 1e-14);

        let bidisc = KernelModel::product_polydisc(vec![1.0, 1.0]).unwrap();
        let gram = build_block_gram(&bidisc.jet_at(&origin(2), 1).unwrap(), 2).unwrap();
        assert!(max_abs_diff(gram.matrix(), &CMatrix::identity(3, 3)) < 1e-14);
    }

    #[test]
    fn block_gram_rejects_low_order_jet() {
        let jet = szego().jet_at(&origin(1), 1).unwrap();
        assert!(matches!(
            build_block_gram(&jet, 3),
            Err(LocalizationError::OrderTooLow { .. })
        ));
    }

    #[test]
    fn invariants_golden_values() {
        let jet = szego().jet_at(&origin(1), 1).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        let inv = extract_invariants(&norm, 2).unwrap();
        let m11 = inv.get(&mi(&[1]), &mi(&[1])).unwrap();
        assert!((m11[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);

        let jet = bergman().jet_at(&origin(1), 1).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        let inv = extract_invariants(&norm, 2).unwrap();
        let m11 = inv.get(&mi(&[1]), &mi(&[1])).unwrap();
        assert!((m11[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-12);

        let sum = KernelModel::direct_sum(szego(), bergman()).unwrap();
        let jet = sum.jet_at(&origin(1), 1).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        let inv = extract_invariants(&norm, 2).unwrap();
        let m11 = inv.get(&mi(&[1]), &mi(&[1])).unwrap();
        assert!(max_abs_diff(m11, &diag_real(&[1.0, 0.5])) < 1e-12);
    }

    #[test]
    fn extract_requires_normalized_jet() {
        let z0 = [C64::new(0.4, 0.0)];
        let jet = szego().jet_at(&z0, 1).unwrap();
        assert!(matches!(
            extract_invariants(&jet, 2),
            Err(LocalizationError::NotNormalized { .. })
        ));
    }

    #[test]
    fn n_matrix_examples() {
        let n = n_matrix(&mi(&[1]), 2, 1, 1).unwrap();
        let expect = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        assert!(max_abs_diff(&n, &expect) < 1e-14);

        // order 3 in one variable: blocks (1,0) = 1 and (2,1) = 2
        let n = n_matrix(&mi(&[1]), 3, 1, 1).unwrap();
        assert!((n[(1, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((n[(2, 1)] - C64::new(2.0, 0.0)).norm() < 1e-14);
        assert!(n[(2, 0)].norm() < 1e-14);

        // no index of total degree ≤ 1 dominates (1,1)
        let n = n_matrix(&mi(&[1, 1]), 2, 2, 1).unwrap();
        assert!(crate::util::max_abs(&n) < 1e-14);

        assert!(matches!(
            n_matrix(&mi(&[0, 0]), 2, 2, 1),
            Err(LocalizationError::InvalidIndex)
        ));
    }

    #[test]
    fn adjoint_matrix_examples() {
        // identity Gram: plain adjoint
        let jet = szego().jet_at(&origin(1), 1).unwrap();
        let gram = build_block_gram(&jet, 2).unwrap();
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 1.0),
                C64::new(2.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, -1.0),
            ],
        );
        let adj = adjoint_matrix(&a, &gram).unwrap();
        assert!(max_abs_diff(&adj, &a.adjoint()) < 1e-12);

        // diag(1, 2) Gram with the shift block
        let jet = bergman().jet_at(&origin(1), 1).unwrap();
        let gram = build_block_gram(&jet, 2).unwrap();
        let shift = n_matrix(&mi(&[1]), 2, 1, 1).unwrap();
        let adj = adjoint_matrix(&shift, &gram).unwrap();
        let expect = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.5, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        assert!(max_abs_diff(&adj, &expect) < 1e-12);

        // Hermitian matrices are fixed under the identity-Gram adjoint
        let jet = szego().jet_at(&origin(1), 1).unwrap();
        let gram = build_block_gram(&jet, 2).unwrap();
        let h = crate::util::hermitian_part(&a);
        let adj = adjoint_matrix(&h, &gram).unwrap();
        assert!(max_abs_diff(&adj, &h) < 1e-12);
    }

    #[test]
    fn compression_examples() {
        let jet = szego().jet_at(&origin(1), 1).unwrap();
        let gram = build_block_gram(&jet, 2).unwrap();
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.3, 0.7),
                C64::new(1.0, 0.0),
                C64::new(2.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let c = compress_to_first_order(&a, &gram).unwrap();
        assert!((c[(0, 0)] - C64::new(0.3, 0.7)).norm() < 1e-13);

        let jet = bergman().jet_at(&origin(1), 1).unwrap();
        let gram = build_block_gram(&jet, 2).unwrap();
        let prod = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.5, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let c = compress_to_first_order(&prod, &gram).unwrap();
        assert!((c[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-13);

        let id = CMatrix::identity(2, 2);
        let c = compress_to_first_order(&id, &gram).unwrap();
        assert!(max_abs_diff(&c, &CMatrix::identity(1, 1)) < 1e-13);
    }

    #[test]
    fn operator_route_hand_check() {
        // Bergman at 0, k = 2: B·A = [[0.5, 0], [0, 0]], compression 0.5
        let jet = bergman().jet_at(&origin(1), 1).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        let inv = invariants_by_operator_compression(&norm, 2).unwrap();
        let m11 = inv.get(&mi(&[1]), &mi(&[1])).unwrap();
        assert!((m11[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-12);

        let jet = szego().jet_at(&origin(1), 1).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        let inv = invariants_by_operator_compression(&norm, 2).unwrap();
        let m11 = inv.get(&mi(&[1]), &mi(&[1])).unwrap();
        assert!((m11[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn both_routes_agree_on_catalog() {
        for (name, model) in catalog() {
            let m = model.vars();
            let z0: Vec<C64> = (0..m)
                .map(|l| C64::new(0.21 + 0.02 * l as f64, -0.12))
                .collect();
            for k in [2u32, 3] {
                let jet = model.jet_at(&z0, k - 1).unwrap();
                let (norm, _) = normalize(&jet).unwrap();
                let a = extract_invariants(&norm, k).unwrap();
                let b = invariants_by_operator_compression(&norm, k).unwrap();
                for ((i1, j1, m1), (i2, j2, m2)) in a.members().zip(b.members()) {
                    assert_eq!((i1, j1), (i2, j2));
                    assert!(max_abs_diff(m1, m2) < 1e-8, "{name} k={k}");
                }
            }
        }
    }

    #[test]
    fn adjoint_pairing_of_invariants() {
        for (name, model) in catalog() {
            let m = model.vars();
            let z0: Vec<C64> = (0..m).map(|_| C64::new(0.15, 0.1)).collect();
            let jet = model.jet_at(&z0, 2).unwrap();
            let (norm, _) = normalize(&jet).unwrap();
            let inv = extract_invariants(&norm, 3).unwrap();
            assert!(inv.adjoint_pairing_defect() < 1e-10, "{name}");
        }
    }

    #[test]
    fn curvature_reciprocal_identity() {
        // for rank-1 single-variable kernels, M^{(1)(1)}(z) · ∂∂̄ log K = 1;
        // oracle: λ/(1-|z|²)² from differentiating log(1-z z̄)^{-λ} by hand
        for (lambda, model) in [(1.0, szego()), (2.0, bergman())] {
            for z in [C64::new(0.0, 0.0), C64::new(0.3, 0.0), C64::new(0.5, 0.2)] {
                let jet = model.jet_at(&[z], 1).unwrap();
                let (norm, _) = normalize(&jet).unwrap();
                let inv = extract_invariants(&norm, 2).unwrap();
                let m11 = inv.get(&mi(&[1]), &mi(&[1])).unwrap()[(0, 0)];
                let curvature = lambda / (1.0 - z.norm_sqr()).powi(2);
                assert!((m11 * curvature - C64::new(1.0, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn curvature_matches_finite_differences() {
        // secondary oracle: ∂∂̄ log K = Laplacian/4 with Richardson refinement
        use crate::kernels::KernelEvaluator;
        let model = bergman();
        let z = C64::new(0.25, -0.15);
        let logk = |p: C64| model.eval(&[p], &[p])[(0, 0)].re.ln();
        let lap = |h: f64| {
            (logk(z + C64::new(h, 0.0)) + logk(z - C64::new(h, 0.0)) + logk(z + C64::new(0.0, h))
                - 4.0 * logk(z)
                + logk(z - C64::new(0.0, h)))
                / (h * h)
        };
        let h = 1e-2;
        let curvature_fd = (4.0 * lap(h / 2.0) - lap(h)) / 3.0 / 4.0;
        let jet = model.jet_at(&[z], 1).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        let inv = extract_invariants(&norm, 2).unwrap();
        let m11 = inv.get(&mi(&[1]), &mi(&[1])).unwrap()[(0, 0)];
        assert!((m11 * curvature_fd - C64::new(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn scale_invariance_of_invariants() {
        let model = bergman();
        let z0 = [C64::new(0.3, 0.1)];
        let base_jet = model.jet_at(&z0, 2).unwrap();
        let (base_norm, _) = normalize(&base_jet).unwrap();
        let base_inv = extract_invariants(&base_norm, 3).unwrap();

        // power-of-two factor: IEEE scaling cancels bit-exactly
        let scaled = KernelModel::scale(model.clone(), 4.0).unwrap();
        let jet = scaled.jet_at(&z0, 2).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        for pi in 0..norm.ordering().len() {
            for pj in 0..norm.ordering().len() {
                assert_eq!(norm.entry_at(pi, pj), base_norm.entry_at(pi, pj));
            }
        }

        // general factor to float tolerance
        let scaled = KernelModel::scale(model, 2.7).unwrap();
        let jet = scaled.jet_at(&z0, 2).unwrap();
        let (norm, _) = normalize(&jet).unwrap();
        let inv = extract_invariants(&norm, 3).unwrap();
        for ((_, _, a), (_, _, b)) in base_inv.members().zip(inv.members()) {
            assert!(max_abs_diff(a, b) < 1e-12);
        }
    }
}

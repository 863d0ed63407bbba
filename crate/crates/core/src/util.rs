//! Small complex-matrix helpers shared across modules and tests.

use crate::{CMatrix, C64};
use nalgebra::DVector;
use rand::Rng;

/// Frobenius norm of `a`.
pub fn fro_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius norm of `a - b`.
pub fn fro_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in fro_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `‖a - a*‖` in the entrywise max norm.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// `(a + a*)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// `‖u*u - I‖_F`, the unitarity defect.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    fro_diff(&(u.adjoint() * u), &CMatrix::identity(n, n))
}

/// Complex Gaussian-ish scalar (independent uniform parts are enough here).
pub fn random_c64<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
}

/// Random matrix with independent complex entries in the unit box.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_c64(rng))
}

/// Haar-ish random unitary via QR of a random complex matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    loop {
        let g = random_matrix(rng, n, n);
        let qr = g.qr();
        let q = qr.q();
        if unitarity_defect(&q) < 1e-10 {
            return q;
        }
    }
}

/// Random invertible matrix with a modest condition number.
pub fn random_invertible<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    loop {
        let g = random_matrix(rng, n, n);
        let svd = g.clone().svd(false, false);
        let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
        for &s in svd.singular_values.iter() {
            smin = smin.min(s);
            smax = smax.max(s);
        }
        if smin > 0.05 * smax && smax > 1e-3 {
            return g;
        }
    }
}

/// Eigenvalue range of a Hermitian matrix (min, max).
pub fn hermitian_eig_range(a: &CMatrix) -> (f64, f64) {
    let eig = a.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        min = min.min(l);
        max = max.max(l);
    }
    (min, max)
}

/// Diagonal complex matrix from real entries.
pub fn diag_real(entries: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(
        entries.len(),
        entries.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            let u = random_unitary(&mut rng, n);
            assert!(unitarity_defect(&u) < 1e-10);
        }
    }

    #[test]
    fn eig_range_of_diagonal() {
        let a = diag_real(&[1.0, 4.0, -2.0]);
        let (min, max) = hermitian_eig_range(&a);
        assert!((min + 2.0).abs() < 1e-12);
        assert!((max - 4.0).abs() < 1e-12);
    }
}

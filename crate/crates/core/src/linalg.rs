//! Complex matrix helpers shared by the canceler, precoder and adaptive
//! modules. Factorizations come from nalgebra; this module adds the
//! conditioning checks and normalizations the vectoring code relies on.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SimError};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Condition-number ceiling above which a channel is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a complex matrix from real row-major entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(h: &CMatrix) -> f64 {
    if h.is_empty() {
        return 1.0;
    }
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Errors with [`SimError::SingularChannel`] when `h` is not square or is
/// numerically rank deficient.
pub fn ensure_nonsingular(h: &CMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(SimError::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let condition = condition_number(h);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(SimError::SingularChannel { condition });
    }
    Ok(())
}

pub fn checked_inverse(h: &CMatrix) -> Result<CMatrix> {
    ensure_nonsingular(h)?;
    h.clone().try_inverse().ok_or(SimError::SingularChannel {
        condition: f64::INFINITY,
    })
}

/// QR factorization with R normalized to a real, positive diagonal.
pub fn qr_positive(h: &CMatrix) -> (CMatrix, CMatrix) {
    let qr = h.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..r.nrows().min(r.ncols()) {
        let d = r[(k, k)];
        let mag = d.norm();
        if mag == 0.0 {
            continue;
        }
        let phase = d / mag;
        // Q·D and D*·R keep the product unchanged.
        for i in 0..q.nrows() {
            q[(i, k)] *= phase;
        }
        for j in 0..r.ncols() {
            r[(k, j)] *= phase.conj();
        }
        r[(k, k)] = c(mag, 0.0);
    }
    (q, r)
}

pub fn validate_permutation(ordering: &[usize], n: usize) -> Result<()> {
    if ordering.len() != n {
        return Err(SimError::InvalidInput(format!(
            "ordering has {} entries, expected {n}",
            ordering.len()
        )));
    }
    let mut seen = vec![false; n];
    for &u in ordering {
        if u >= n || seen[u] {
            return Err(SimError::InvalidInput(format!(
                "ordering {ordering:?} is not a permutation of 0..{n}"
            )));
        }
        seen[u] = true;
    }
    Ok(())
}

pub fn identity_ordering(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Column `m` of the result is column `ordering[m]` of `h`.
pub fn permute_columns(h: &CMatrix, ordering: &[usize]) -> CMatrix {
    CMatrix::from_fn(h.nrows(), ordering.len(), |i, m| h[(i, ordering[m])])
}

/// Row `m` of the result is row `ordering[m]` of `h`.
pub fn permute_rows(h: &CMatrix, ordering: &[usize]) -> CMatrix {
    CMatrix::from_fn(ordering.len(), h.ncols(), |m, j| h[(ordering[m], j)])
}

pub fn diag_matrix(h: &CMatrix) -> CMatrix {
    CMatrix::from_diagonal(&h.diagonal())
}

/// Sum of |h_ij|² over row `i`.
pub fn row_energy(h: &CMatrix, i: usize) -> f64 {
    h.row(i).iter().map(|z| z.norm_sqr()).sum()
}

pub fn col_energy(h: &CMatrix, j: usize) -> f64 {
    h.column(j).iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_sqr(h: &CMatrix) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let herm = (h + h.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// λ_max/λ_min of a Hermitian positive (semi)definite matrix.
pub fn hermitian_condition(h: &CMatrix) -> f64 {
    let ev = hermitian_eigenvalues(h);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// log2 det of a Hermitian positive definite matrix.
pub fn log2_det_hpd(h: &CMatrix) -> Result<f64> {
    let herm = (h + h.adjoint()).scale(0.5);
    let chol = herm.cholesky().ok_or_else(|| {
        SimError::InvalidInput("matrix is not Hermitian positive definite".into())
    })?;
    let l = chol.l();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn qr_reconstructs_with_positive_diagonal() {
        for seed in 0..20 {
            let h = random_matrix(8, seed);
            let (q, r) = qr_positive(&h);
            let err = frobenius_sqr(&(&q * &r - &h)).sqrt() / frobenius_sqr(&h).sqrt();
            assert!(err < 1e-12, "reconstruction {err}");
            let qhq = q.adjoint() * &q;
            assert!(frobenius_sqr(&(qhq - CMatrix::identity(8, 8))).sqrt() < 1e-12);
            for k in 0..8 {
                assert!(r[(k, k)].re > 0.0 && r[(k, k)].im == 0.0);
                for i in k + 1..8 {
                    assert!(r[(i, k)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn singular_detected() {
        let h = from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            ensure_nonsingular(&h),
            Err(SimError::SingularChannel { .. })
        ));
        assert!(checked_inverse(&h).is_err());
        assert!(checked_inverse(&CMatrix::identity(3, 3)).is_ok());
    }

    #[test]
    fn permutation_validation() {
        assert!(validate_permutation(&[2, 0, 1], 3).is_ok());
        assert!(validate_permutation(&[0, 0, 1], 3).is_err());
        assert!(validate_permutation(&[0, 1], 3).is_err());
        assert!(validate_permutation(&[0, 1, 3], 3).is_err());
    }

    #[test]
    fn log_det_matches_product_of_eigenvalues() {
        let a = random_matrix(5, 9);
        let g = &a * a.adjoint() + CMatrix::identity(5, 5);
        let ev = hermitian_eigenvalues(&g);
        let expected: f64 = ev.iter().map(|x| x.log2()).sum();
        assert!((log2_det_hpd(&g).unwrap() - expected).abs() < 1e-10);
    }
}

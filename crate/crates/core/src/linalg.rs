//! Shared numerical policies: jittered Cholesky factorization and symmetric
//! eigenvalue helpers.
//!
//! Solves always go through a stored factorization; explicit inverses are
//! formed only where a matrix (not a solve) is the deliverable.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// A factorization is only accepted when every pivot is comfortably resolved
/// relative to the mean diagonal; below this the factor would amplify
/// round-off into the solve and the escalation continues instead.
const PIVOT_QUALITY_REL: f64 = 1e-10;

pub(crate) struct Factorized {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

fn accept_cholesky(matrix: DMatrix<f64>, pivot_floor: f64) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(matrix)?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !d.is_finite() || d <= 0.0 || d * d < pivot_floor {
            return None;
        }
    }
    Some(chol)
}

/// Cholesky with jitter escalation: attempts the factorization with jitter 0,
/// then `min_rel * trace/n`, multiplying by 10 up to `max_rel * trace/n`.
/// Returns `None` when every level fails.
pub(crate) fn cholesky_with_jitter(
    matrix: &DMatrix<f64>,
    min_rel: f64,
    max_rel: f64,
) -> Option<Factorized> {
    escalate(matrix, min_rel, max_rel, PIVOT_QUALITY_REL)
}

/// Same escalation without the pivot-quality floor. Sampling covariances are
/// legitimately rank-deficient (conditional covariances vanish at design
/// rows); a barely positive pivot there injects noise of order
/// `sqrt(jitter)` instead of corrupting a solve, so the first jitter level
/// whose pivots stay positive is the right one.
pub(crate) fn cholesky_for_sampling(
    matrix: &DMatrix<f64>,
    min_rel: f64,
    max_rel: f64,
) -> Option<Factorized> {
    escalate(matrix, min_rel, max_rel, 0.0)
}

fn escalate(
    matrix: &DMatrix<f64>,
    min_rel: f64,
    max_rel: f64,
    pivot_quality: f64,
) -> Option<Factorized> {
    let n = matrix.nrows();
    let scale = (matrix.trace() / n as f64).max(0.0);
    let pivot_floor = pivot_quality * scale;

    if let Some(chol) = accept_cholesky(matrix.clone(), pivot_floor) {
        return Some(Factorized { chol, jitter: 0.0 });
    }

    let mut rel = min_rel;
    while rel <= max_rel * (1.0 + 1e-12) {
        let jitter = rel * scale;
        let mut jittered = matrix.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = accept_cholesky(jittered, pivot_floor) {
            return Some(Factorized { chol, jitter });
        }
        rel *= 10.0;
    }
    None
}

/// Eigenvalues of a symmetric matrix, unsorted.
pub(crate) fn symmetric_eigenvalues(matrix: &DMatrix<f64>) -> DVector<f64> {
    matrix.clone().symmetric_eigenvalues()
}

pub(crate) fn min_eigenvalue(matrix: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(matrix).min()
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub(crate) fn operator_norm_symmetric(matrix: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(matrix)
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_conditioned_needs_no_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = cholesky_with_jitter(&m, 1e-12, 1e-4).unwrap();
        assert_eq!(f.jitter, 0.0);
    }

    #[test]
    fn singular_matrix_escalates() {
        // rank-1 matrix: duplicate rows
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = cholesky_with_jitter(&m, 1e-12, 1e-4).unwrap();
        assert!(f.jitter > 0.0);
        assert!(f.jitter <= 1e-4);
        // the factor reproduces the jittered matrix
        let l = f.chol.l();
        let rebuilt = &l * l.transpose();
        let mut expected = m.clone();
        expected[(0, 0)] += f.jitter;
        expected[(1, 1)] += f.jitter;
        assert!((rebuilt - expected).norm() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_fails_at_all_levels() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_with_jitter(&m, 1e-12, 1e-6).is_none());
    }

    #[test]
    fn eigen_helpers() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert_eq!(min_eigenvalue(&m), -5.0);
        assert_eq!(operator_norm_symmetric(&m), 5.0);
    }
}

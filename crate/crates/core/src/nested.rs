//! The nested aggregator: the best linear combination of the submodel
//! predictors, with all cross-covariances computed in closed form through
//! `Λ(x)`.
//!
//! Treating `(M_1(x), ..., M_p(x))` as observations of `Y(x)` gives the
//! aggregated mean `k_M^T K_M^{-1} M(x)` and variance
//! `k(x,x) - k_M^T K_M^{-1} k_M`; nothing here is Monte Carlo.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::gp::clamp_variance;
use crate::kernels::PointSet;
use crate::linalg;
use crate::parallel;
use crate::submodels::SubmodelBank;

/// Ridge schedule for `K_M(x)`: 0, then 1e-12 * trace/p up to 1e-6 * trace/p.
/// Submodels sharing points make `K_M` exactly singular; the ridge resolves
/// it at the cost of a relaxed interpolation tolerance.
const RIDGE_MIN_REL: f64 = 1e-12;
const RIDGE_MAX_REL: f64 = 1e-6;

/// Cross-covariances of the submodel vector at one point.
#[derive(Debug, Clone)]
pub struct CrossCovariances {
    /// `Cov(Y(x), M_i(x))`, computed as `Λ(x) k(X, x)`.
    pub k_m: DVector<f64>,
    /// `Cov(M_i(x), M_j(x))`, computed as `Λ(x) k(X,X) Λ(x)^T`.
    pub k_mm: DMatrix<f64>,
    /// The joint weight matrix `Λ(x)`.
    pub lambda: DMatrix<f64>,
}

/// The nested prediction at one point.
#[derive(Debug, Clone)]
pub struct NestedPrediction {
    pub mean: f64,
    pub variance: f64,
    /// `Cov(Y(x), M_i(x))`.
    pub k_m: DVector<f64>,
    /// `Cov(M_i(x), M_j(x))`.
    pub k_mm: DMatrix<f64>,
    /// Weights over the submodel means, `K_M^{-1} k_M`.
    pub submodel_weights: DVector<f64>,
    /// Weights over the full observation vector, `Λ^T K_M^{-1} k_M`;
    /// `mean == effective_weights · y`.
    pub effective_weights: DVector<f64>,
    /// Ridge added to `K_M` before factorization (0 in the regular case).
    pub ridge_used: f64,
}

/// Computes `k_M(x)`, `K_M(x)` and `Λ(x)`.
pub fn cross_covariances(bank: &SubmodelBank, point: &[f64]) -> Result<CrossCovariances> {
    let sub = bank.predict_submodels(point)?;
    let kx = bank.spec().vector(bank.design(), point)?;
    let k_m = &sub.lambda * kx;
    let k_mm = &sub.lambda * bank.design_covariance() * sub.lambda.transpose();
    Ok(CrossCovariances {
        k_m,
        k_mm,
        lambda: sub.lambda,
    })
}

pub(crate) fn factorize_k_mm(k_mm: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    match linalg::cholesky_with_jitter(k_mm, RIDGE_MIN_REL, RIDGE_MAX_REL) {
        Some(f) => Ok((f.chol, f.jitter)),
        None => {
            let (first, second, correlation) = most_correlated_pair(k_mm);
            Err(Error::SingularAggregation {
                first,
                second,
                correlation,
            })
        }
    }
}

/// The off-diagonal pair with the highest |correlation| — the submodels most
/// likely to be redundant when `K_M` stays singular.
fn most_correlated_pair(k_mm: &DMatrix<f64>) -> (usize, usize, f64) {
    let p = k_mm.nrows();
    if p < 2 {
        return (0, 0, 1.0);
    }
    let mut best = (0, 1, 1.0);
    let mut best_corr = -1.0;
    for i in 0..p {
        for j in (i + 1)..p {
            let denom = (k_mm[(i, i)] * k_mm[(j, j)]).sqrt();
            let corr = if denom > 0.0 {
                (k_mm[(i, j)] / denom).abs()
            } else {
                1.0
            };
            if corr > best_corr {
                best_corr = corr;
                best = (i, j, corr);
            }
        }
    }
    best
}

/// The nested prediction at `point`.
pub fn predict(bank: &SubmodelBank, point: &[f64]) -> Result<NestedPrediction> {
    let sub = bank.predict_submodels(point)?;
    let kx = bank.spec().vector(bank.design(), point)?;
    let k_m = &sub.lambda * &kx;
    let k_mm = &sub.lambda * bank.design_covariance() * sub.lambda.transpose();

    let (chol, ridge_used) = factorize_k_mm(&k_mm)?;
    let submodel_weights = chol.solve(&k_m);
    let mean = submodel_weights.dot(&sub.means);
    let variance =
        clamp_variance(bank.spec().eval_unchecked(point, point) - k_m.dot(&submodel_weights));
    let effective_weights = sub.lambda.transpose() * &submodel_weights;
    Ok(NestedPrediction {
        mean,
        variance,
        k_m,
        k_mm,
        submodel_weights,
        effective_weights,
        ridge_used,
    })
}

/// Nested predictions over every row of `points`; data-parallel with the
/// `parallel` feature.
pub fn predict_batch(bank: &SubmodelBank, points: &PointSet) -> Result<Vec<NestedPrediction>> {
    let results = parallel::map_range(points.len(), |i| predict(bank, points.point(i)));
    results.into_iter().collect()
}

/// Sequential fallback of [`predict_batch`].
pub fn predict_batch_seq(bank: &SubmodelBank, points: &PointSet) -> Result<Vec<NestedPrediction>> {
    let results = parallel::map_range_seq(points.len(), |i| predict(bank, points.point(i)));
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::FullModel;
    use crate::kernels::{KernelFamily, KernelSpec};
    use crate::submodels::Partition;
    use approx::assert_abs_diff_eq;

    fn spec_fig1() -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 0.2, 1).unwrap()
    }

    fn figure1_bank() -> SubmodelBank {
        let x = PointSet::one_d(&[0.1, 0.3, 0.5, 0.7, 0.9]);
        let y = DVector::from_iterator(
            5,
            x.iter_points()
                .map(|p| (2.0 * std::f64::consts::PI * p[0]).sin() + p[0]),
        );
        SubmodelBank::fit(
            spec_fig1(),
            x,
            y,
            Partition::new(vec![vec![0, 1, 2], vec![3, 4]]),
        )
        .unwrap()
    }

    #[test]
    fn single_group_cross_covariance_is_scalar_identity() {
        let x = PointSet::one_d(&[0.2, 0.5, 0.8]);
        let y = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let bank =
            SubmodelBank::fit(spec_fig1(), x, y, Partition::new(vec![vec![0, 1, 2]])).unwrap();
        let point = [0.4];
        let cc = cross_covariances(&bank, &point).unwrap();
        let sub = bank.predict_submodels(&point).unwrap();
        let expected = bank.spec().eval(&point, &point).unwrap() - sub.vars[0];
        assert_abs_diff_eq!(cc.k_m[0], expected, epsilon = 1e-10);
        assert_abs_diff_eq!(cc.k_mm[(0, 0)], expected, epsilon = 1e-10);
    }

    #[test]
    fn k_mm_diagonal_matches_variance_reduction() {
        let bank = figure1_bank();
        for x in [0.05, 0.42, 0.85] {
            let cc = cross_covariances(&bank, &[x]).unwrap();
            let sub = bank.predict_submodels(&[x]).unwrap();
            let prior = bank.spec().eval(&[x], &[x]).unwrap();
            for g in 0..bank.group_count() {
                assert_abs_diff_eq!(cc.k_mm[(g, g)], prior - sub.vars[g], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn k_m_at_observed_point_equals_prior_variance() {
        let bank = figure1_bank();
        // x = 0.3 is in group 0: v_0(x) = 0 so Cov(Y, M_0) = k(x,x)
        let cc = cross_covariances(&bank, &[0.3]).unwrap();
        assert_abs_diff_eq!(cc.k_m[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn nested_interpolates_all_design_rows() {
        let bank = figure1_bank();
        for i in 0..bank.len() {
            let p = predict(&bank, bank.design().point(i)).unwrap();
            assert_abs_diff_eq!(p.mean, bank.observations()[i], epsilon = 1e-6);
            assert!(p.variance <= 1e-6);
        }
    }

    #[test]
    fn weight_identity_and_ridge_free_regular_case() {
        let bank = figure1_bank();
        for x in [0.05, 0.33, 0.62, 0.85] {
            let p = predict(&bank, &[x]).unwrap();
            assert_eq!(p.ridge_used, 0.0);
            assert_abs_diff_eq!(
                p.mean,
                p.effective_weights.dot(bank.observations()),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn singleton_groups_reproduce_full_model() {
        let spec = KernelSpec::isotropic(KernelFamily::Matern32, 1.0, 0.3, 1).unwrap();
        let n = 12;
        let x = PointSet::one_d(
            &(0..n)
                .map(|i| (i as f64 + 0.5) / n as f64)
                .collect::<Vec<_>>(),
        );
        let y = DVector::from_fn(n, |i, _| ((i * i) as f64).sin());
        let singletons = Partition::new((0..n).map(|i| vec![i]).collect());
        let bank = SubmodelBank::fit(spec.clone(), x.clone(), y.clone(), singletons).unwrap();
        let full = FullModel::fit(spec, x, y).unwrap();
        for t in [0.02, 0.37, 0.5, 0.93] {
            let nested = predict(&bank, &[t]).unwrap();
            let exact = full.predict(&[t]).unwrap();
            assert_abs_diff_eq!(nested.mean, exact.mean, epsilon = 1e-8);
            assert_abs_diff_eq!(nested.variance, exact.variance, epsilon = 1e-8);
        }
    }

    #[test]
    fn variance_sandwich_on_grid() {
        let bank = figure1_bank();
        let full = FullModel::fit(
            bank.spec().clone(),
            bank.design().clone(),
            bank.observations().clone(),
        )
        .unwrap();
        for i in 0..=100 {
            let x = [i as f64 / 100.0];
            let nested = predict(&bank, &x).unwrap();
            let exact = full.predict(&x).unwrap();
            let gap = nested.variance - exact.variance;
            assert!(gap >= -1e-10, "lower sandwich violated at {}", x[0]);
            let prior = bank.spec().eval(&x, &x).unwrap();
            let upper = (0..bank.group_count())
                .map(|k| prior - 2.0 * nested.k_m[k] + nested.k_mm[(k, k)])
                .fold(f64::INFINITY, f64::min)
                - exact.variance;
            assert!(gap <= upper + 1e-8, "upper sandwich violated at {}", x[0]);
        }
    }

    #[test]
    fn duplicate_groups_resolved_by_ridge() {
        let x = PointSet::one_d(&[0.1, 0.4, 0.8]);
        let y = DVector::from_vec(vec![0.3, -0.2, 1.1]);
        // two identical groups make K_M exactly singular
        let partition = Partition::new(vec![vec![0, 1], vec![0, 1], vec![2]]);
        let bank = SubmodelBank::fit(spec_fig1(), x.clone(), y.clone(), partition).unwrap();
        let p = predict(&bank, &[0.4]).unwrap();
        assert!(p.ridge_used > 0.0);
        // interpolation at the relaxed tolerance for degenerate setups
        assert_abs_diff_eq!(p.mean, y[1], epsilon = 1e-4);
    }

    #[test]
    fn batch_matches_pointwise() {
        let bank = figure1_bank();
        let grid = PointSet::one_d(&(0..21).map(|i| i as f64 / 20.0).collect::<Vec<_>>());
        let batch = predict_batch(&bank, &grid).unwrap();
        let seq = predict_batch_seq(&bank, &grid).unwrap();
        for (i, (a, b)) in batch.iter().zip(&seq).enumerate() {
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.variance, b.variance);
            let direct = predict(&bank, grid.point(i)).unwrap();
            assert_eq!(a.mean, direct.mean);
        }
    }
}

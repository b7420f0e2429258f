//! Closed-form error analysis of aggregated predictors against the full
//! model.
//!
//! With `M(x) = Λ(x) Y(X)` linear in the observations, the aggregation loss
//! is captured by
//! `Δ(x) = K^{-1} - Λ(x)^T (Λ(x) K Λ(x)^T)^{-1} Λ(x)` (`K = k(X,X)`):
//! the mean difference `M_A - M_full` has coefficient vector `-k(x,X) Δ(x)`
//! over `Y(X)` and `v_A - v_full = k(x,X) Δ(x) k(X,x)`. When the submodels
//! interpolate every design row, both differences can also be written as
//! covariance differences in the norm `‖u‖_K² = u^T K^{-1} u`, which this
//! module verifies through two independent computation routes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::gp::FullModel;
use crate::kernels::{KernelSpec, PointSet};
use crate::linalg;
use crate::nested;
use crate::submodels::SubmodelBank;

/// Guard below which `k(X,X)` counts as numerically singular and the
/// `‖·‖_K` norm-bound check is reported as ill-conditioned instead of
/// asserted.
pub const LAMBDA_MIN_GUARD_REL: f64 = 1e-12;

/// Both sides of the covariance-difference identities at one point.
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheck {
    /// `E[(M_A - M_full)^2]` from the weight difference.
    pub lhs_mean: f64,
    /// `‖k(X,x) - k_A(X,x)‖_K²`.
    pub rhs_mean: f64,
    /// `v_A - v_full` from the two predictions.
    pub lhs_var: f64,
    /// `‖k(X,x)‖_K² - ‖k_A(X,x)‖_K²`.
    pub rhs_var: f64,
}

impl IdentityCheck {
    pub fn mean_residual(&self) -> f64 {
        (self.lhs_mean - self.rhs_mean).abs()
    }

    pub fn var_residual(&self) -> f64 {
        (self.lhs_var - self.rhs_var).abs()
    }
}

/// Explicit admissible constants and both sides of the maximal-error bounds
/// at one point, plus the variance sandwich.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    /// `|M_A(x) - M_full(x)|`.
    pub mean_gap: f64,
    /// `λ ‖k(X,x)‖ ‖Y(X)‖` with `λ = ‖Δ(x)‖_op`.
    pub mean_bound: f64,
    /// `v_A(x) - v_full(x)`.
    pub var_gap: f64,
    /// `μ ‖k(X,x)‖²` with `μ = ‖Δ(x)‖_op`.
    pub var_bound: f64,
    /// `min_k E[(Y - M_k)^2] - v_full`, the sandwich upper end.
    pub sandwich_upper: f64,
    /// The operator norm of `Δ(x)` used for both constants.
    pub delta_norm: f64,
}

impl BoundCheck {
    /// All three inequalities at `slack` tolerance.
    pub fn holds(&self, slack: f64) -> bool {
        self.mean_gap <= self.mean_bound + slack
            && self.var_gap.abs() <= self.var_bound + slack
            && self.var_gap >= -slack
            && self.var_gap <= self.sandwich_upper + slack
    }
}

/// Per-point error report; one row of the bounds-report output.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub x: Vec<f64>,
    /// `sqrt(E[(M_A - M_full)^2])`.
    pub mean_gap_rms: f64,
    /// `λ_min^{-1/2} ‖k(X,x) - k_A(X,x)‖`, the norm-equivalence bound on
    /// the RMS mean gap.
    pub mean_gap_bound: f64,
    /// `v_A - v_full`.
    pub var_gap: f64,
    /// Sandwich upper end `min_k E[(Y - M_k)^2] - v_full`.
    pub var_gap_upper: f64,
    pub prop_mean_identity_residual: f64,
    pub prop_var_identity_residual: f64,
    /// Smallest eigenvalue of `k(X, X)`.
    pub lambda_min: f64,
    /// False when `λ_min` is below the guard and the norm bound was skipped.
    pub norm_bound_checked: bool,
}

/// Diagnostics context over one bank: the full model and the factorized
/// design covariance are computed once and shared by every per-point check.
pub struct Diagnostics<'a> {
    bank: &'a SubmodelBank,
    full: FullModel,
    /// Factor of `k(X,X)` (plus escalation jitter when required).
    kxx_chol: Cholesky<f64, Dyn>,
    /// Explicit `K^{-1}`, the one place the crate forms an inverse: `Δ(x)`
    /// is itself a deliverable matrix.
    kxx_inv: DMatrix<f64>,
    lambda_min: f64,
    /// Nested effective weights at each design row. Banks always cover the
    /// design (the interpolation hypothesis of the identities), so these
    /// exist for every fitted bank.
    design_phis: Vec<DVector<f64>>,
}

impl<'a> Diagnostics<'a> {
    pub fn new(bank: &'a SubmodelBank) -> Result<Self> {
        let full = FullModel::fit(
            bank.spec().clone(),
            bank.design().clone(),
            bank.observations().clone(),
        )?;
        let kxx = bank.design_covariance();
        let factorized = linalg::cholesky_with_jitter(kxx, 1e-12, 1e-4).ok_or_else(|| {
            Error::SingularMatrix {
                detail: "design covariance could not be factorized for diagnostics".into(),
            }
        })?;
        let kxx_inv = factorized
            .chol
            .solve(&DMatrix::identity(bank.len(), bank.len()));
        let lambda_min = linalg::min_eigenvalue(kxx);
        if !bank.partition().covers(bank.len()) {
            return Err(Error::NotCovering(
                "the covariance-difference identities require every design row to be \
                 interpolated by at least one submodel"
                    .into(),
            ));
        }
        let design_phis = (0..bank.len())
            .map(|i| Ok(nested::predict(bank, bank.design().point(i))?.effective_weights))
            .collect::<Result<Vec<_>>>()?;
        Ok(Diagnostics {
            bank,
            full,
            kxx_chol: factorized.chol,
            kxx_inv,
            lambda_min,
            design_phis,
        })
    }

    pub fn bank(&self) -> &SubmodelBank {
        self.bank
    }

    pub fn full_model(&self) -> &FullModel {
        &self.full
    }

    /// Smallest eigenvalue of `k(X,X)`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// `Δ(x) = K^{-1} - Λ(x)^T (Λ(x) K Λ(x)^T)^{-1} Λ(x)`, symmetrized.
    pub fn delta_matrix(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let cc = nested::cross_covariances(self.bank, point)?;
        let (chol, _ridge) = nested::factorize_k_mm(&cc.k_mm)?;
        let km_inv_lambda = chol.solve(&cc.lambda);
        let mut delta = &self.kxx_inv - cc.lambda.transpose() * km_inv_lambda;
        for i in 0..delta.nrows() {
            for j in 0..i {
                let v = 0.5 * (delta[(i, j)] + delta[(j, i)]);
                delta[(i, j)] = v;
                delta[(j, i)] = v;
            }
        }
        Ok(delta)
    }

    /// Both covariance-difference identities, each side computed on its own
    /// route. The identities hold because every design row is covered by
    /// some group (enforced at bank construction).
    pub fn identity_check(&self, point: &[f64]) -> Result<IdentityCheck> {
        let design_phis = &self.design_phis;
        let nested_prediction = nested::predict(self.bank, point)?;
        let full_weights = self.full.weights(point)?;
        let kxx = self.bank.design_covariance();

        // route 1: exact second moment of the weight difference
        let diff = &nested_prediction.effective_weights - &full_weights;
        let lhs_mean = (kxx * &diff).dot(&diff);

        // route 2: covariance difference in the K-norm
        let kvec = self.bank.spec().vector(self.bank.design(), point)?;
        let kagg_vec = self.kagg_design_vector(design_phis, &kvec, point)?;
        let u = &kvec - &kagg_vec;
        let rhs_mean = self.kxx_chol.solve(&u).dot(&u);

        let lhs_var = nested_prediction.variance - self.full.predict(point)?.variance;
        let rhs_var =
            self.kxx_chol.solve(&kvec).dot(&kvec) - self.kxx_chol.solve(&kagg_vec).dot(&kagg_vec);

        Ok(IdentityCheck {
            lhs_mean,
            rhs_mean,
            lhs_var,
            rhs_var,
        })
    }

    /// `k_A(X, x)` from the cached design weights.
    fn kagg_design_vector(
        &self,
        design_phis: &[DVector<f64>],
        kvec: &DVector<f64>,
        point: &[f64],
    ) -> Result<DVector<f64>> {
        let kxx = self.bank.design_covariance();
        let phi_x = nested::predict(self.bank, point)?.effective_weights;
        let psi_x = kxx * &phi_x;
        Ok(DVector::from_fn(self.bank.len(), |j, _| {
            let phi_j = &design_phis[j];
            kvec[j] + 2.0 * phi_j.dot(&psi_x) - phi_j.dot(kvec) - phi_x.dot(&kxx.column(j))
        }))
    }

    /// Verifies the maximal-error bounds with the explicit admissible
    /// constants `λ = μ = ‖Δ(x)‖_op`, plus the variance sandwich.
    pub fn bound_check(&self, point: &[f64]) -> Result<BoundCheck> {
        let delta = self.delta_matrix(point)?;
        let delta_norm = linalg::operator_norm_symmetric(&delta);
        let kvec = self.bank.spec().vector(self.bank.design(), point)?;
        let nested_prediction = nested::predict(self.bank, point)?;
        let full_prediction = self.full.predict(point)?;

        let mean_gap = (nested_prediction.mean - full_prediction.mean).abs();
        let mean_bound = delta_norm * kvec.norm() * self.bank.observations().norm();
        let var_gap = nested_prediction.variance - full_prediction.variance;
        let var_bound = delta_norm * kvec.norm_squared();

        let prior = self.bank.spec().eval(point, point)?;
        let sandwich_upper = (0..self.bank.group_count())
            .map(|k| prior - 2.0 * nested_prediction.k_m[k] + nested_prediction.k_mm[(k, k)])
            .fold(f64::INFINITY, f64::min)
            - full_prediction.variance;

        Ok(BoundCheck {
            mean_gap,
            mean_bound,
            var_gap,
            var_bound,
            sandwich_upper,
            delta_norm,
        })
    }

    /// Full per-point report for the bounds-report output.
    pub fn error_report(&self, point: &[f64]) -> Result<ErrorReport> {
        let identities = self.identity_check(point)?;
        let bounds = self.bound_check(point)?;

        let kvec = self.bank.spec().vector(self.bank.design(), point)?;
        let kagg_vec = self.kagg_design_vector(&self.design_phis, &kvec, point)?;
        let u_norm = (&kvec - &kagg_vec).norm();

        let n = self.bank.len() as f64;
        let guard = LAMBDA_MIN_GUARD_REL * self.bank.design_covariance().trace() / n;
        let norm_bound_checked = self.lambda_min >= guard;
        let mean_gap_bound = if norm_bound_checked {
            u_norm / self.lambda_min.sqrt()
        } else {
            f64::INFINITY
        };

        Ok(ErrorReport {
            x: point.to_vec(),
            mean_gap_rms: identities.lhs_mean.max(0.0).sqrt(),
            mean_gap_bound,
            var_gap: identities.lhs_var,
            var_gap_upper: bounds.sandwich_upper,
            prop_mean_identity_residual: identities.mean_residual(),
            prop_var_identity_residual: identities.var_residual(),
            lambda_min: self.lambda_min,
            norm_bound_checked,
        })
    }
}

/// Exact mean-square error of the linear predictor `w^T Y(X)` at `x0`:
/// `k(x0,x0) - 2 w^T k(X,x0) + w^T k(X,X) w`. Closed form, no Monte Carlo;
/// this is the oracle every experiment is scored with.
pub fn exact_mse(
    weights: &DVector<f64>,
    x0: &[f64],
    spec: &KernelSpec,
    x: &PointSet,
) -> Result<f64> {
    let kxx = spec.matrix(x, x)?;
    exact_mse_with(weights, x0, spec, x, &kxx)
}

/// [`exact_mse`] with the design covariance already computed; sweeps over
/// many evaluation points share one `k(X,X)`.
pub(crate) fn exact_mse_with(
    weights: &DVector<f64>,
    x0: &[f64],
    spec: &KernelSpec,
    x: &PointSet,
    kxx: &DMatrix<f64>,
) -> Result<f64> {
    if weights.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} design rows",
            weights.len(),
            x.len()
        )));
    }
    let kvec = spec.vector(x, x0)?;
    let mse = spec.eval(x0, x0)? - 2.0 * weights.dot(&kvec) + (kxx * weights).dot(weights);
    assert!(
        mse >= -1e-10 * spec.prior_variance().max(1.0),
        "exact MSE {mse} below clamping tolerance"
    );
    Ok(mse.max(0.0))
}

//! Variance-based aggregation of submodel means: PoE, gPoE, BCM and rBCM.
//!
//! These rules combine the submodel means using only the per-group
//! conditional variances; correlations between submodels are ignored. Only
//! the aggregated mean is defined here — the Kriging-style variance these
//! methods report is not part of the aggregation rule and is deliberately
//! not exposed.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::submodels::SubmodelBank;

/// Relative floor applied to every submodel variance before logs and
/// divisions: `v_k := max(v_k, 1e-12 * v_prior)`. At observation points the
/// exact per-group variance is zero and both `1/v_k` and `log v_k` would be
/// singular.
pub const VARIANCE_FLOOR_REL: f64 = 1e-12;

/// The four variance-only weight rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    Poe,
    Gpoe,
    Bcm,
    Rbcm,
}

impl VarianceMethod {
    pub const ALL: [VarianceMethod; 4] = [
        VarianceMethod::Poe,
        VarianceMethod::Gpoe,
        VarianceMethod::Bcm,
        VarianceMethod::Rbcm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VarianceMethod::Poe => "poe",
            VarianceMethod::Gpoe => "gpoe",
            VarianceMethod::Bcm => "bcm",
            VarianceMethod::Rbcm => "rbcm",
        }
    }

    /// Whether the weight rule uses the prior-precision correction term in
    /// its denominator (the committee-machine family).
    fn has_prior_term(&self) -> bool {
        matches!(self, VarianceMethod::Bcm | VarianceMethod::Rbcm)
    }

    /// Whether `β_i = (1/2)(log v_prior - log v_i)` instead of `β_i = 1`.
    fn log_beta(&self) -> bool {
        matches!(self, VarianceMethod::Gpoe | VarianceMethod::Rbcm)
    }
}

/// An aggregated mean with its weight decomposition.
#[derive(Debug, Clone)]
pub struct VarianceAggregate {
    pub method: VarianceMethod,
    /// `M_A(x) = Σ_k α_k M_k(x)`.
    pub mean: f64,
    /// The per-submodel weights `α_k`.
    pub alphas: DVector<f64>,
    /// The induced weights over the full observation vector,
    /// `Λ(x)^T α`; `mean == effective_weights · y`.
    pub effective_weights: DVector<f64>,
}

/// Computes the weight vector `α` from the submodel variances.
///
/// `α_k = β_k / v_k` normalized by `Σ β_i / v_i` (PoE, gPoE) or by
/// `Σ β_i / v_i + (1 - Σ β_i) / v_prior` (BCM, rBCM), with `β ≡ 1` for
/// PoE/BCM and `β_i = (1/2)(log v_prior - log v_i)` for gPoE/rBCM.
/// Negative `β` (possible only through round-off, since `v_i ≤ v_prior`
/// analytically) is clamped to zero.
pub fn variance_weights(
    method: VarianceMethod,
    vars: &DVector<f64>,
    v_prior: f64,
) -> Result<DVector<f64>> {
    if !v_prior.is_finite() || v_prior <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "prior variance must be positive, got {v_prior}"
        )));
    }
    if vars.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "submodel variances must be finite and nonnegative".into(),
        ));
    }
    let floor = VARIANCE_FLOOR_REL * v_prior;
    let floored: Vec<f64> = vars.iter().map(|&v| v.max(floor)).collect();

    let betas: Vec<f64> = if method.log_beta() {
        floored
            .iter()
            .map(|&v| (0.5 * (v_prior.ln() - v.ln())).max(0.0))
            .collect()
    } else {
        vec![1.0; floored.len()]
    };

    let numerators: Vec<f64> = betas.iter().zip(&floored).map(|(&b, &v)| b / v).collect();
    let mut denominator: f64 = numerators.iter().sum();
    if method.has_prior_term() {
        let beta_sum: f64 = betas.iter().sum();
        denominator += (1.0 - beta_sum) / v_prior;
    }
    if !denominator.is_finite() || denominator <= 0.0 {
        return Err(Error::DegenerateWeights(format!(
            "{} weight denominator {denominator} is not positive",
            method.name()
        )));
    }
    Ok(DVector::from_iterator(
        numerators.len(),
        numerators.iter().map(|&num| num / denominator),
    ))
}

/// Aggregates the submodel means at `point` with the given rule.
///
/// Requires a disjoint partition: the rules are defined over partitions, and
/// overlapping groups are rejected.
pub fn aggregate_variance_based(
    bank: &SubmodelBank,
    method: VarianceMethod,
    point: &[f64],
) -> Result<VarianceAggregate> {
    if !bank.partition().is_disjoint(bank.len()) {
        return Err(Error::Overlapping(
            "variance-based aggregation requires a disjoint partition".into(),
        ));
    }
    let sub = bank.predict_submodels(point)?;
    let v_prior = bank.spec().eval(point, point)?;
    let alphas = variance_weights(method, &sub.vars, v_prior)?;
    let mean = alphas.dot(&sub.means);
    let effective_weights = sub.lambda.transpose() * &alphas;
    Ok(VarianceAggregate {
        method,
        mean,
        alphas,
        effective_weights,
    })
}

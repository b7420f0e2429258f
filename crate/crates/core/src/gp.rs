//! Exact (full) Kriging: the conditional distribution of a centered Gaussian
//! process given its values at the design points.
//!
//! The covariance matrix is factorized once at fit time with jitter
//! escalation; every prediction goes through the stored factor and the
//! explicit inverse is never formed.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, PointSet};
use crate::linalg;
use crate::parallel;

/// Relative jitter schedule for `k(X, X)`: 0, then 1e-12 * trace/n up to
/// 1e-4 * trace/n in factors of 10.
const FIT_JITTER_MIN_REL: f64 = 1e-12;
const FIT_JITTER_MAX_REL: f64 = 1e-4;

/// Predicted variances above this negative tolerance are clamped to zero;
/// anything more negative signals a broken factorization and asserts.
const VARIANCE_CLAMP_TOL: f64 = 1e-10;

/// Conditional mean and variance at one prediction point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// A fitted exact Kriging model on the full design.
#[derive(Debug, Clone)]
pub struct FullModel {
    spec: KernelSpec,
    x: PointSet,
    y: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    /// `k(X,X)^{-1} y`, cached for mean evaluations.
    alpha: DVector<f64>,
}

impl FullModel {
    /// Fits the model: factorizes `k(X,X) + jitter * I` with the escalation
    /// schedule. Fails with a singular-matrix error naming the closest pair
    /// of rows when no jitter level factorizes.
    pub fn fit(spec: KernelSpec, x: PointSet, y: DVector<f64>) -> Result<Self> {
        spec.validate()?;
        if x.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot fit a model on an empty design".into(),
            ));
        }
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for {} design rows",
                y.len(),
                x.len()
            )));
        }
        let kxx = spec.matrix(&x, &x)?;
        let factorized = linalg::cholesky_with_jitter(&kxx, FIT_JITTER_MIN_REL, FIT_JITTER_MAX_REL)
            .ok_or_else(|| singular_design_error(&x))?;
        let alpha = factorized.chol.solve(&y);
        Ok(FullModel {
            spec,
            x,
            y,
            chol: factorized.chol,
            jitter: factorized.jitter,
            alpha,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn design(&self) -> &PointSet {
        &self.x
    }

    pub fn observations(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }

    /// Solves `(k(X,X) + jitter I) u = rhs` through the stored factor.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    /// The Kriging weight vector `k(X,X)^{-1} k(X, x)`; the conditional mean
    /// is its dot product with the observations.
    pub fn weights(&self, point: &[f64]) -> Result<DVector<f64>> {
        let kx = self.spec.vector(&self.x, point)?;
        Ok(self.chol.solve(&kx))
    }

    /// Conditional mean and variance at `point`.
    pub fn predict(&self, point: &[f64]) -> Result<Prediction> {
        let kx = self.spec.vector(&self.x, point)?;
        let mean = kx.dot(&self.alpha);
        let variance =
            clamp_variance(self.spec.eval_unchecked(point, point) - kx.dot(&self.chol.solve(&kx)));
        Ok(Prediction { mean, variance })
    }

    /// Conditional covariance between two prediction points.
    pub fn predict_cov(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let ka = self.spec.vector(&self.x, a)?;
        let kb = self.spec.vector(&self.x, b)?;
        Ok(self.spec.eval(a, b)? - ka.dot(&self.chol.solve(&kb)))
    }

    /// Predictions over every row of `points`; data-parallel with the
    /// `parallel` feature.
    pub fn predict_batch(&self, points: &PointSet) -> Result<Vec<Prediction>> {
        self.check_batch(points)?;
        Ok(parallel::map_range(points.len(), |i| {
            self.predict(points.point(i))
                .expect("dimension pre-checked")
        }))
    }

    /// Sequential fallback of [`predict_batch`](Self::predict_batch).
    pub fn predict_batch_seq(&self, points: &PointSet) -> Result<Vec<Prediction>> {
        self.check_batch(points)?;
        Ok(parallel::map_range_seq(points.len(), |i| {
            self.predict(points.point(i))
                .expect("dimension pre-checked")
        }))
    }

    fn check_batch(&self, points: &PointSet) -> Result<()> {
        if points.dim() != self.spec.dim {
            return Err(Error::DimensionMismatch(format!(
                "prediction points of dim {} for model of dim {}",
                points.dim(),
                self.spec.dim
            )));
        }
        Ok(())
    }
}

pub(crate) fn clamp_variance(v: f64) -> f64 {
    assert!(
        v >= -VARIANCE_CLAMP_TOL,
        "predicted variance {v} below clamping tolerance: broken factorization"
    );
    v.max(0.0)
}

fn singular_design_error(x: &PointSet) -> Error {
    let detail = match x.closest_pair() {
        Some((i, j, dist)) => format!(
            "factorization failed at maximum jitter; closest design rows are {i} and {j} at distance {dist:.3e}"
        ),
        None => "factorization failed at maximum jitter".to_string(),
    };
    Error::SingularMatrix { detail }
}

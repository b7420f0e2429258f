//! The aggregated process: a modified Gaussian process whose exact
//! conditional law reproduces the nested prediction.
//!
//! The process is the nested mean plus an independent replicate of the
//! residual, so it is centered with prior covariance
//!
//! ```text
//! k_A(x,x') = k(x,x') + 2 k_M(x)^T K_M(x)^{-1} K_M(x,x') K_M(x')^{-1} k_M(x')
//!             - k_M(x)^T K_M(x)^{-1} k_M(x,x') - k_M(x')^T K_M(x')^{-1} k_M(x',x)
//! ```
//!
//! with `K_M(x,x') = Λ(x) k(X,X) Λ(x')^T` and `k_M(x,x') = Λ(x) k(X,x')`.
//! Writing `φ(x) = Λ(x)^T K_M(x)^{-1} k_M(x)` (the nested weights over the
//! observations), each term collapses onto `φ` at the two points, which is
//! how this module evaluates it. Conditioning `Y_A` on its design values
//! gives the posterior covariance
//! `c_A(x,x') = k_A(x,x') - k_A(x,X) k_A(X,X)^{-1} k_A(X,x')`.
//!
//! Everything here forms and factorizes matrices of the full design size —
//! analysis scale, not large-n scale.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::PointSet;
use crate::linalg;
use crate::nested;
use crate::parallel;
use crate::submodels::{seeded_rng, SubmodelBank};

const DESIGN_JITTER_MIN_REL: f64 = 1e-12;
const DESIGN_JITTER_MAX_REL: f64 = 1e-4;

/// Per-point quantities entering every `k_A` evaluation: the nested weight
/// vector over the observations and its image under `k(X,X)`.
#[derive(Debug, Clone)]
struct PointOps {
    /// `φ = Λ(x)^T K_M(x)^{-1} k_M(x)`.
    phi: DVector<f64>,
    /// `ψ = k(X,X) φ`.
    psi: DVector<f64>,
    /// `k(X, x)`.
    kvec: DVector<f64>,
}

/// The aggregated process over a fitted submodel bank, with the design-block
/// covariance `k_A(X,X)` factorized for conditional operations.
#[derive(Debug, Clone)]
pub struct AggregatedProcessModel {
    bank: SubmodelBank,
    design_ops: Vec<PointOps>,
    kagg_design: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl AggregatedProcessModel {
    /// Builds the process model: computes the nested weights at every design
    /// row, assembles `k_A(X,X)` and factorizes it with jitter escalation.
    pub fn new(bank: SubmodelBank) -> Result<Self> {
        let n = bank.len();
        let ops: Vec<Result<PointOps>> =
            parallel::map_range(n, |i| point_ops(&bank, bank.design().point(i)));
        let design_ops = ops.into_iter().collect::<Result<Vec<_>>>()?;

        let mut kagg_design = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kagg_from_ops(
                    bank.design_covariance()[(i, j)],
                    &design_ops[i],
                    &design_ops[j],
                );
                kagg_design[(i, j)] = v;
                kagg_design[(j, i)] = v;
            }
        }

        let factorized = linalg::cholesky_with_jitter(
            &kagg_design,
            DESIGN_JITTER_MIN_REL,
            DESIGN_JITTER_MAX_REL,
        )
        .ok_or_else(|| Error::SingularMatrix {
            detail: "aggregated design covariance k_A(X,X) could not be factorized".into(),
        })?;
        Ok(AggregatedProcessModel {
            bank,
            design_ops,
            kagg_design,
            chol: factorized.chol,
            jitter: factorized.jitter,
        })
    }

    pub fn bank(&self) -> &SubmodelBank {
        &self.bank
    }

    /// The assembled `k_A(X, X)` block.
    pub fn design_covariance_agg(&self) -> &DMatrix<f64> {
        &self.kagg_design
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }

    /// Prior covariance `k_A(x, x')` of the aggregated process.
    pub fn k_agg(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let ops_a = point_ops(&self.bank, a)?;
        let ops_b = point_ops(&self.bank, b)?;
        Ok(kagg_from_ops(self.bank.spec().eval(a, b)?, &ops_a, &ops_b))
    }

    /// Covariance vector `k_A(X, x)` against the design rows.
    pub fn k_agg_design_vector(&self, point: &[f64]) -> Result<DVector<f64>> {
        let ops = point_ops(&self.bank, point)?;
        Ok(self.k_agg_design_vector_from(&ops))
    }

    fn k_agg_design_vector_from(&self, ops: &PointOps) -> DVector<f64> {
        DVector::from_fn(self.bank.len(), |j, _| {
            kagg_from_ops(ops.kvec[j], ops, &self.design_ops[j])
        })
    }

    /// Pairwise `k_A` over a grid; rows computed in parallel under the
    /// `parallel` feature, then symmetrized.
    pub fn k_agg_matrix(&self, grid: &PointSet) -> Result<DMatrix<f64>> {
        let ops = self.grid_ops(grid)?;
        let m = grid.len();
        let rows: Vec<Vec<f64>> = parallel::map_range(m, |i| {
            (0..=i)
                .map(|j| {
                    kagg_from_ops(
                        self.bank
                            .spec()
                            .eval_unchecked(grid.point(i), grid.point(j)),
                        &ops[i],
                        &ops[j],
                    )
                })
                .collect()
        });
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                out[(i, j)] = rows[i][j];
                out[(j, i)] = rows[i][j];
            }
        }
        Ok(out)
    }

    /// Posterior covariance `c_A(x, x')` of the aggregated process given its
    /// design values.
    pub fn c_agg(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let ops_a = point_ops(&self.bank, a)?;
        let ops_b = point_ops(&self.bank, b)?;
        let ka = self.k_agg_design_vector_from(&ops_a);
        let kb = self.k_agg_design_vector_from(&ops_b);
        let prior = kagg_from_ops(self.bank.spec().eval(a, b)?, &ops_a, &ops_b);
        Ok(prior - ka.dot(&self.chol.solve(&kb)))
    }

    /// Pairwise `c_A` over a grid.
    pub fn c_agg_matrix(&self, grid: &PointSet) -> Result<DMatrix<f64>> {
        let prior = self.k_agg_matrix(grid)?;
        let cross = self.cross_design_matrix(grid)?;
        let solved = self.chol.solve(&cross);
        let mut out = prior - cross.transpose() * solved;
        // exact symmetry for downstream factorizations
        for i in 0..out.nrows() {
            for j in 0..i {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    /// `k_A(X, grid)`: one column per grid point.
    fn cross_design_matrix(&self, grid: &PointSet) -> Result<DMatrix<f64>> {
        let ops = self.grid_ops(grid)?;
        let n = self.bank.len();
        let mut out = DMatrix::zeros(n, grid.len());
        for (c, op) in ops.iter().enumerate() {
            out.set_column(c, &self.k_agg_design_vector_from(op));
        }
        Ok(out)
    }

    fn grid_ops(&self, grid: &PointSet) -> Result<Vec<PointOps>> {
        let ops: Vec<Result<PointOps>> =
            parallel::map_range(grid.len(), |i| point_ops(&self.bank, grid.point(i)));
        ops.into_iter().collect()
    }

    /// Conditional mean `m_A(x) = k_A(x,X) k_A(X,X)^{-1} f(X)` over a grid.
    pub fn conditional_means(&self, grid: &PointSet, fx: &DVector<f64>) -> Result<DVector<f64>> {
        if fx.len() != self.bank.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} design values for {} design rows",
                fx.len(),
                self.bank.len()
            )));
        }
        let beta = self.chol.solve(fx);
        let cross = self.cross_design_matrix(grid)?;
        Ok(cross.transpose() * beta)
    }

    /// Unconditional sample paths: `count` draws from `N(0, k_A(grid, grid))`.
    /// Returns a `count x |grid|` matrix; identical inputs give identical
    /// output.
    pub fn sample_unconditional(
        &self,
        grid: &PointSet,
        count: usize,
        seed: u64,
    ) -> Result<DMatrix<f64>> {
        let cov = self.k_agg_matrix(grid)?;
        let mean = DVector::zeros(grid.len());
        draw_gaussian(&mean, &cov, count, seed)
    }

    /// Conditional sample paths given `Y_A(X) = fx`: `count` draws from
    /// `N(m_A(grid), c_A(grid, grid))`.
    pub fn sample_conditional(
        &self,
        grid: &PointSet,
        fx: &DVector<f64>,
        count: usize,
        seed: u64,
    ) -> Result<DMatrix<f64>> {
        let mean = self.conditional_means(grid, fx)?;
        let cov = self.c_agg_matrix(grid)?;
        draw_gaussian(&mean, &cov, count, seed)
    }
}

fn point_ops(bank: &SubmodelBank, point: &[f64]) -> Result<PointOps> {
    let prediction = nested::predict(bank, point)?;
    let phi = prediction.effective_weights;
    let psi = bank.design_covariance() * &phi;
    let kvec = bank.spec().vector(bank.design(), point)?;
    Ok(PointOps { phi, psi, kvec })
}

/// Evaluates `k_A` from the per-point quantities:
/// `k(a,b) + 2 φ_a^T K φ_b - φ_a^T k(X,b) - φ_b^T k(X,a)`.
fn kagg_from_ops(k_ab: f64, a: &PointOps, b: &PointOps) -> f64 {
    k_ab + 2.0 * a.phi.dot(&b.psi) - a.phi.dot(&b.kvec) - b.phi.dot(&a.kvec)
}

/// Draws `count` rows from `N(mean, cov)` with a seeded generator. The
/// covariance is factorized with a lenient jitter escalation: exact rank
/// deficiency (conditional covariances vanish at design rows) only needs
/// enough jitter to keep the pivots positive, and the injected noise stays
/// at the square root of that jitter.
fn draw_gaussian(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let m = mean.len();
    let factor = linalg::cholesky_for_sampling(cov, DESIGN_JITTER_MIN_REL, DESIGN_JITTER_MAX_REL)
        .ok_or_else(|| {
        Error::SamplingFailure("sample covariance could not be factorized at maximum jitter".into())
    })?;
    let l = factor.chol.l();
    let mut rng = seeded_rng(seed);
    let mut out = DMatrix::zeros(count, m);
    let mut normals = DVector::zeros(m);
    for s in 0..count {
        for z in normals.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        let draw = mean + &l * &normals;
        out.row_mut(s).tr_copy_from(&draw);
    }
    Ok(out)
}

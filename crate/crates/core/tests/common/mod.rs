//! Independent oracles for the integration tests.
//!
//! Everything here re-derives quantities from first principles on its own
//! code path: a hand-rolled Gaussian elimination replaces the library's
//! Cholesky solves, and the aggregated-process covariance is evaluated from
//! the literal submodel cross-covariance formula rather than the collapsed
//! effective-weight form used by the implementation.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nested_krig::kernels::{KernelSpec, PointSet};
use nested_krig::submodels::Partition;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[(row, col)].abs() > m[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            m.swap_rows(col, pivot);
            rhs.swap_rows(col, pivot);
        }
        let diag = m[(col, col)];
        assert!(diag != 0.0, "oracle: singular system at column {col}");
        for row in (col + 1)..n {
            let factor = m[(row, col)] / diag;
            for c in col..n {
                m[(row, c)] -= factor * m[(col, c)];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = DVector::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in (row + 1)..n {
            acc -= m[(row, c)] * x[c];
        }
        x[row] = acc / m[(row, row)];
    }
    x
}

/// Conditional mean and variance by direct dense solve on `k(X,X) + jitter I`.
pub fn predict_direct(
    spec: &KernelSpec,
    x: &PointSet,
    y: &DVector<f64>,
    point: &[f64],
    jitter: f64,
) -> (f64, f64) {
    let mut kxx = spec.matrix(x, x).unwrap();
    for i in 0..x.len() {
        kxx[(i, i)] += jitter;
    }
    let kvec = spec.vector(x, point).unwrap();
    let alpha = gauss_solve(&kxx, y);
    let mean = kvec.dot(&alpha);
    let variance = spec.eval(point, point).unwrap() - kvec.dot(&gauss_solve(&kxx, &kvec));
    (mean, variance)
}

/// Conditional covariance between two points by Schur complement of the
/// `(n + 2) x (n + 2)` joint covariance.
pub fn conditional_cov_direct(
    spec: &KernelSpec,
    x: &PointSet,
    a: &[f64],
    b: &[f64],
    jitter: f64,
) -> f64 {
    let n = x.len();
    let mut kxx = spec.matrix(x, x).unwrap();
    for i in 0..n {
        kxx[(i, i)] += jitter;
    }
    let ka = spec.vector(x, a).unwrap();
    let kb = spec.vector(x, b).unwrap();
    spec.eval(a, b).unwrap() - ka.dot(&gauss_solve(&kxx, &kb))
}

/// The joint weight matrix `Λ(x)` assembled from scratch: row `i` is
/// `k(X_i, X_i)^{-1} k(X_i, x)` scattered into the columns of group `i`.
pub fn lambda_direct(
    spec: &KernelSpec,
    x: &PointSet,
    partition: &Partition,
    point: &[f64],
) -> DMatrix<f64> {
    let n = x.len();
    let p = partition.len();
    let mut lambda = DMatrix::zeros(p, n);
    for (g, group) in partition.groups.iter().enumerate() {
        let sub = x.subset(group);
        let k_gg = spec.matrix(&sub, &sub).unwrap();
        let k_gx = spec.vector(&sub, point).unwrap();
        let w = gauss_solve(&k_gg, &k_gx);
        for (slot, &row) in group.iter().enumerate() {
            lambda[(g, row)] += w[slot];
        }
    }
    lambda
}

/// The aggregated-process prior covariance evaluated from the literal
/// formula: with `z(x) = K_M(x)^{-1} k_M(x)`,
/// `k_A(x,x') = k(x,x') + 2 z(x)^T K_M(x,x') z(x')
///              - z(x)^T k_M(x,x') - z(x')^T k_M(x',x)`
/// where `K_M(x,x') = Λ(x) K Λ(x')^T` and `k_M(x,x') = Λ(x) k(X,x')`.
pub fn kagg_direct(
    spec: &KernelSpec,
    x: &PointSet,
    partition: &Partition,
    a: &[f64],
    b: &[f64],
) -> f64 {
    let kxx = spec.matrix(x, x).unwrap();
    let lambda_a = lambda_direct(spec, x, partition, a);
    let lambda_b = lambda_direct(spec, x, partition, b);

    let km_a = &lambda_a * &kxx * lambda_a.transpose();
    let km_b = &lambda_b * &kxx * lambda_b.transpose();
    let km_ab = &lambda_a * &kxx * lambda_b.transpose();

    let k_m_a = &lambda_a * spec.vector(x, a).unwrap();
    let k_m_b = &lambda_b * spec.vector(x, b).unwrap();
    let k_m_ab = &lambda_a * spec.vector(x, b).unwrap();
    let k_m_ba = &lambda_b * spec.vector(x, a).unwrap();

    let z_a = gauss_solve(&km_a, &k_m_a);
    let z_b = gauss_solve(&km_b, &k_m_b);

    spec.eval(a, b).unwrap() + 2.0 * z_a.dot(&(&km_ab * &z_b)) - z_a.dot(&k_m_ab) - z_b.dot(&k_m_ba)
}

/// Exact mean-square error of `w^T Y(X)` at `x0`, recomputed from scratch.
pub fn exact_mse_direct(
    spec: &KernelSpec,
    x: &PointSet,
    weights: &DVector<f64>,
    x0: &[f64],
) -> f64 {
    let kxx = spec.matrix(x, x).unwrap();
    let kvec = spec.vector(x, x0).unwrap();
    spec.eval(x0, x0).unwrap() - 2.0 * weights.dot(&kvec) + (&kxx * weights).dot(weights)
}

/// The five-point 1-d reference setup (the demo-figure1 scenario):
/// `f(x) = sin(2 pi x) + x` sampled at
/// five points under a unit squared-exponential kernel with lengthscale 0.2,
/// split 3 / 2.
pub fn reference_setup() -> (KernelSpec, PointSet, DVector<f64>, Partition) {
    let spec = KernelSpec::isotropic(
        nested_krig::kernels::KernelFamily::SquaredExponential,
        1.0,
        0.2,
        1,
    )
    .unwrap();
    let x = PointSet::one_d(&[0.1, 0.3, 0.5, 0.7, 0.9]);
    let y = DVector::from_iterator(5, x.iter_points().map(|p| reference_function(p[0])));
    let partition = Partition::new(vec![vec![0, 1, 2], vec![3, 4]]);
    (spec, x, y, partition)
}

pub fn reference_function(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x).sin() + x
}

/// Equispaced closed grid over `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, count: usize) -> PointSet {
    PointSet::one_d(
        &(0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect::<Vec<_>>(),
    )
}

/// Deterministic pseudo-random design in `[0,1]^d` (xorshift; independent of
/// the library's generators).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn standard_normal(&mut self) -> f64 {
        // Box-Muller from two uniforms
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn points(&mut self, n: usize, d: usize) -> PointSet {
        self.separated_points(n, d, 5e-3)
    }

    /// Rejection-samples points in the unit cube keeping a minimum pairwise
    /// distance, so that kernel matrices stay well enough conditioned for
    /// factorization-vs-dense-solve equality checks.
    pub fn separated_points(&mut self, n: usize, d: usize, min_dist: f64) -> PointSet {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        while rows.len() < n {
            let candidate: Vec<f64> = (0..d).map(|_| self.uniform()).collect();
            let ok = rows.iter().all(|r| {
                r.iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    >= min_dist
            });
            if ok {
                rows.push(candidate);
            }
        }
        PointSet::from_rows(&rows).unwrap()
    }

    pub fn values(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.standard_normal())
    }
}

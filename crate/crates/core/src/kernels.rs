//! Stationary covariance functions and point-set containers.
//!
//! Every downstream module evaluates covariances exclusively through
//! [`KernelSpec`], so symmetry and stationarity invariants are enforced in a
//! single place.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariance families supported by the crate.
///
/// The Matérn families have a positive spectral density with polynomially
/// bounded inverse, which is what the non-consistency construction requires;
/// the squared-exponential (Gaussian) family does not qualify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern12,
    Matern32,
    Matern52,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "squared_exponential",
            KernelFamily::Matern12 => "matern12",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
        }
    }
}

/// Lengthscale: a scalar broadcasts to every input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lengthscale {
    Isotropic(f64),
    PerDimension(Vec<f64>),
}

impl Lengthscale {
    fn get(&self, axis: usize) -> f64 {
        match self {
            Lengthscale::Isotropic(l) => *l,
            Lengthscale::PerDimension(ls) => ls[axis],
        }
    }

    fn values(&self, dim: usize) -> Vec<f64> {
        match self {
            Lengthscale::Isotropic(l) => vec![*l; dim],
            Lengthscale::PerDimension(ls) => ls.clone(),
        }
    }
}

/// A stationary covariance function `k(x, x')` on `R^d`.
///
/// Serializes to/from the config record
/// `{family, variance, lengthscale (number or array), dim}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub variance: f64,
    pub lengthscale: Lengthscale,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(
        family: KernelFamily,
        variance: f64,
        lengthscale: Lengthscale,
        dim: usize,
    ) -> Result<Self> {
        let spec = KernelSpec {
            family,
            variance,
            lengthscale,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Isotropic convenience constructor.
    pub fn isotropic(
        family: KernelFamily,
        variance: f64,
        lengthscale: f64,
        dim: usize,
    ) -> Result<Self> {
        Self::new(family, variance, Lengthscale::Isotropic(lengthscale), dim)
    }

    /// Checks the type invariants; deserialized specs must be validated
    /// before use.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("kernel dim must be >= 1".into()));
        }
        if !self.variance.is_finite() || self.variance <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kernel variance must be positive and finite, got {}",
                self.variance
            )));
        }
        match &self.lengthscale {
            Lengthscale::Isotropic(l) => {
                if !l.is_finite() || *l <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "lengthscale must be positive and finite, got {l}"
                    )));
                }
            }
            Lengthscale::PerDimension(ls) => {
                if ls.len() != self.dim {
                    return Err(Error::DimensionMismatch(format!(
                        "{} lengthscales for dim {}",
                        ls.len(),
                        self.dim
                    )));
                }
                for l in ls {
                    if !l.is_finite() || *l <= 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "lengthscale must be positive and finite, got {l}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Prior variance `k(x, x)`, identical at every `x` by stationarity.
    pub fn prior_variance(&self) -> f64 {
        self.variance
    }

    /// Lengthscales expanded to one value per dimension.
    pub fn lengthscales(&self) -> Vec<f64> {
        self.lengthscale.values(self.dim)
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "points of dim {} and {} for kernel of dim {}",
                x.len(),
                y.len(),
                self.dim
            )));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluation without the dimension check; callers guarantee lengths.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut sq = 0.0;
        for axis in 0..self.dim {
            let scaled = (x[axis] - y[axis]) / self.lengthscale.get(axis);
            sq += scaled * scaled;
        }
        match self.family {
            KernelFamily::SquaredExponential => self.variance * (-0.5 * sq).exp(),
            KernelFamily::Matern12 => {
                let r = sq.sqrt();
                self.variance * (-r).exp()
            }
            KernelFamily::Matern32 => {
                let t = 3.0_f64.sqrt() * sq.sqrt();
                self.variance * (1.0 + t) * (-t).exp()
            }
            KernelFamily::Matern52 => {
                let t = 5.0_f64.sqrt() * sq.sqrt();
                self.variance * (1.0 + t + t * t / 3.0) * (-t).exp()
            }
        }
    }

    /// Cross-covariance matrix `k(A, B)` with entry `(i, j) = k(a_i, b_j)`.
    pub fn matrix(&self, a: &PointSet, b: &PointSet) -> Result<DMatrix<f64>> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument(
                "kernel matrix requires nonempty point sets".into(),
            ));
        }
        if a.dim() != self.dim || b.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "point sets of dim {} and {} for kernel of dim {}",
                a.dim(),
                b.dim(),
                self.dim
            )));
        }
        Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
            self.eval_unchecked(a.point(i), b.point(j))
        }))
    }

    /// Covariance vector `k(A, x)` as a column.
    pub fn vector(&self, a: &PointSet, x: &[f64]) -> Result<nalgebra::DVector<f64>> {
        if a.dim() != self.dim || x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "point set of dim {} and point of dim {} for kernel of dim {}",
                a.dim(),
                x.len(),
                self.dim
            )));
        }
        Ok(nalgebra::DVector::from_fn(a.len(), |i, _| {
            self.eval_unchecked(a.point(i), x)
        }))
    }

    /// Whether the family satisfies the spectral-density conditions of the
    /// non-consistency construction (no-empty-ball property). Matérn
    /// families qualify; the squared-exponential family does not.
    pub fn neb_qualified(&self) -> bool {
        match self.family {
            KernelFamily::SquaredExponential => false,
            KernelFamily::Matern12 | KernelFamily::Matern32 | KernelFamily::Matern52 => true,
        }
    }
}

/// An `n x d` set of points stored row-major, rows being points in `D`.
///
/// Duplicate rows are allowed; kernel matrices over duplicated rows become
/// singular and are handled by the jitter policy at factorization time.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointSet {
    /// Builds a point set from a flat row-major buffer.
    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument(
                "point dimension must be >= 1".into(),
            ));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "{} values for an {n} x {d} point set",
                data.len()
            )));
        }
        Ok(PointSet { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has dim {}, expected {d}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        PointSet::from_flat(rows.len(), d, data)
    }

    /// One-dimensional convenience constructor.
    pub fn one_d(values: &[f64]) -> Self {
        PointSet {
            data: values.to_vec(),
            n: values.len(),
            d: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// The rows at `indices`, in order (indices may repeat).
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        PointSet {
            data,
            n: indices.len(),
            d: self.d,
        }
    }

    /// Closest pair of rows (Euclidean), used to report near-duplicates when
    /// a factorization fails.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        if self.n < 2 {
            return None;
        }
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let dist: f64 = self
                    .point(i)
                    .iter()
                    .zip(self.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist < best.2 {
                    best = (i, j, dist);
                }
            }
        }
        Some(best)
    }
}

//! Design partitioning and per-group Kriging submodels.
//!
//! Each group is fitted as an independent [`FullModel`] on its subset of the
//! design. Every group prediction is a linear functional of the full
//! observation vector; the joint weight matrix `Λ(x)` (one row per group,
//! one column per design row) makes that linearity explicit and is the basis
//! for all cross-covariance computations downstream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{clamp_variance, FullModel};
use crate::kernels::{KernelSpec, PointSet};
use crate::parallel;

/// Index groups over the rows of a design.
///
/// Serializes as `{"groups": [[indices], ...]}` with 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        Partition { groups }
    }

    /// Number of groups `p`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// All indices valid for a design of `n` rows, no empty groups.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidArgument("partition has no groups".into()));
        }
        for (g, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidArgument(format!("group {g} is empty")));
            }
            for &i in group {
                if i >= n {
                    return Err(Error::InvalidArgument(format!(
                        "group {g} refers to row {i}, design has {n} rows"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every design row appears in at least one group.
    pub fn covers(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for group in &self.groups {
            for &i in group {
                if i < n {
                    seen[i] = true;
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Groups are pairwise disjoint and their sizes sum to `n`
    /// (together with [`covers`](Self::covers), a partition in the strict sense).
    pub fn is_disjoint(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        let mut total = 0usize;
        for group in &self.groups {
            total += group.len();
            for &i in group {
                if i >= n || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        total == n && seen.iter().all(|&s| s)
    }
}

/// How [`make_partition`] splits the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Consecutive index blocks with sizes differing by at most one.
    ContiguousBlocks,
    /// Seeded shuffle of the indices, then consecutive blocks.
    RandomBalanced,
    /// `p` seeded design rows become centers; each row joins its nearest
    /// center (ties to the lowest center index). Empty groups are repaired
    /// by stealing the farthest point from the largest group.
    NearestCenters,
}

/// Splits `n` rows into `p` groups. All strategies are deterministic given
/// the seed.
pub fn make_partition(
    n: usize,
    p: usize,
    strategy: PartitionStrategy,
    seed: u64,
    x: &PointSet,
) -> Result<Partition> {
    if p < 1 || p > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} rows into {p} groups"
        )));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point set has {} rows, expected {n}",
            x.len()
        )));
    }
    let groups = match strategy {
        PartitionStrategy::ContiguousBlocks => blocks(&(0..n).collect::<Vec<_>>(), n, p),
        PartitionStrategy::RandomBalanced => {
            use rand::seq::SliceRandom;
            let mut rng = seeded_rng(seed);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut groups = blocks(&order, n, p);
            for group in &mut groups {
                group.sort_unstable();
            }
            groups
        }
        PartitionStrategy::NearestCenters => nearest_centers(n, p, seed, x),
    };
    Ok(Partition::new(groups))
}

pub(crate) fn seeded_rng(seed: u64) -> rand_chacha::ChaCha12Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha12Rng::seed_from_u64(seed)
}

/// Consecutive blocks of `order` with sizes differing by at most one; the
/// first `n % p` blocks take the extra element.
fn blocks(order: &[usize], n: usize, p: usize) -> Vec<Vec<usize>> {
    let base = n / p;
    let extra = n % p;
    let mut groups = Vec::with_capacity(p);
    let mut start = 0;
    for g in 0..p {
        let size = base + usize::from(g < extra);
        groups.push(order[start..start + size].to_vec());
        start += size;
    }
    groups
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn nearest_centers(n: usize, p: usize, seed: u64, x: &PointSet) -> Vec<Vec<usize>> {
    use rand::seq::index::sample;
    let mut rng = seeded_rng(seed);
    let mut centers: Vec<usize> = sample(&mut rng, n, p).into_vec();
    centers.sort_unstable();

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); p];
    for row in 0..n {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (c, &center) in centers.iter().enumerate() {
            let dist = squared_distance(x.point(row), x.point(center));
            if dist < best_dist {
                best_dist = dist;
                best = c;
            }
        }
        groups[best].push(row);
    }

    // Repair: an empty group steals the point farthest from its center in
    // the currently largest group.
    while let Some(empty) = groups.iter().position(|g| g.is_empty()) {
        let largest = groups
            .iter()
            .enumerate()
            .max_by_key(|(_, g)| g.len())
            .map(|(i, _)| i)
            .expect("partition has groups");
        let center = centers[largest];
        let (pos, _) = groups[largest]
            .iter()
            .enumerate()
            .map(|(pos, &row)| (pos, squared_distance(x.point(row), x.point(center))))
            .fold((0, f64::NEG_INFINITY), |acc, (pos, d)| {
                if d > acc.1 {
                    (pos, d)
                } else {
                    acc
                }
            });
        let stolen = groups[largest].remove(pos);
        groups[empty].push(stolen);
    }
    for group in &mut groups {
        group.sort_unstable();
    }
    groups
}

/// A fitted collection of per-group Kriging predictors over one design.
#[derive(Debug, Clone)]
pub struct SubmodelBank {
    spec: KernelSpec,
    x: PointSet,
    y: DVector<f64>,
    partition: Partition,
    models: Vec<FullModel>,
    /// Prior design covariance `k(X, X)` (no jitter), shared by the
    /// cross-covariance computations.
    kxx: DMatrix<f64>,
}

/// Per-group predictions at one point together with the joint weight matrix.
#[derive(Debug, Clone)]
pub struct SubmodelPrediction {
    /// `M_1(x) .. M_p(x)`; equals `lambda * y` by construction.
    pub means: DVector<f64>,
    /// `v_1(x) .. v_p(x)`, clamped into `[0, k(x,x)]`.
    pub vars: DVector<f64>,
    /// `p x n` matrix with row `i` equal to `k(x, X_i) k(X_i, X_i)^{-1}`
    /// scattered into the columns of group `i`, zeros elsewhere.
    pub lambda: DMatrix<f64>,
}

impl SubmodelBank {
    /// Fits one Kriging model per group. The partition must cover every
    /// design row; groups may overlap (variance-based aggregation
    /// additionally requires disjointness and checks it at call time).
    pub fn fit(
        spec: KernelSpec,
        x: PointSet,
        y: DVector<f64>,
        partition: Partition,
    ) -> Result<Self> {
        spec.validate()?;
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observations for {} design rows",
                y.len(),
                x.len()
            )));
        }
        partition.validate(x.len())?;
        if !partition.covers(x.len()) {
            return Err(Error::NotCovering(
                "every design row must belong to at least one group".into(),
            ));
        }
        let kxx = spec.matrix(&x, &x)?;
        let models: Vec<Result<FullModel>> = parallel::map_range(partition.len(), |g| {
            let idx = &partition.groups[g];
            let sub_x = x.subset(idx);
            let sub_y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]));
            FullModel::fit(spec.clone(), sub_x, sub_y)
        });
        let models = models.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(SubmodelBank {
            spec,
            x,
            y,
            partition,
            models,
            kxx,
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

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Number of groups `p`.
    pub fn group_count(&self) -> usize {
        self.models.len()
    }

    /// Number of design rows `n`.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn group_model(&self, g: usize) -> &FullModel {
        &self.models[g]
    }

    /// Prior design covariance `k(X, X)` without jitter.
    pub fn design_covariance(&self) -> &DMatrix<f64> {
        &self.kxx
    }

    /// Per-group means, variances and the joint weight matrix at `x`.
    pub fn predict_submodels(&self, point: &[f64]) -> Result<SubmodelPrediction> {
        if point.len() != self.spec.dim {
            return Err(Error::DimensionMismatch(format!(
                "point of dim {} for bank of dim {}",
                point.len(),
                self.spec.dim
            )));
        }
        let n = self.x.len();
        let p = self.models.len();
        let prior = self.spec.eval_unchecked(point, point);

        let mut lambda = DMatrix::zeros(p, n);
        let mut vars = DVector::zeros(p);
        for (g, model) in self.models.iter().enumerate() {
            let kx = self.spec.vector(model.design(), point)?;
            let weights = model.solve(&kx);
            vars[g] = clamp_variance(prior - weights.dot(&kx)).min(prior);
            for (slot, &row) in self.partition.groups[g].iter().enumerate() {
                lambda[(g, row)] += weights[slot];
            }
        }
        let means = &lambda * &self.y;
        Ok(SubmodelPrediction {
            means,
            vars,
            lambda,
        })
    }
}

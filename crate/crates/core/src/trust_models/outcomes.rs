use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_dist::FiniteDistribution;
use crate::info_metrics::JointDistribution;

/// Upper limit on enumerated branches in exact mode.
pub const EXACT_PATH_LIMIT: u64 = 10_000_000;

/// Counts enumerated branches and trips [`Error::PathGuard`] past the limit.
#[derive(Debug, Clone, Copy)]
pub struct PathBudget {
    used: u64,
    limit: u64,
}

impl Default for PathBudget {
    fn default() -> Self {
        PathBudget { used: 0, limit: EXACT_PATH_LIMIT }
    }
}

impl PathBudget {
    pub fn with_limit(limit: u64) -> Self {
        PathBudget { used: 0, limit }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn spend(&mut self, paths: u64) -> Result<()> {
        self.used = self.used.saturating_add(paths);
        if self.used > self.limit {
            Err(Error::PathGuard { paths: self.used, limit: self.limit })
        } else {
            Ok(())
        }
    }
}

/// A law over a finite input universe as `(value, probability)` pairs.
pub type DiscreteLaw<I> = Vec<(I, f64)>;

/// Point mass on `x`.
pub fn point_law<I>(x: I) -> DiscreteLaw<I> {
    vec![(x, 1.0)]
}

/// Indices of `dist` with positive mass.
pub fn law_of(dist: &FiniteDistribution) -> DiscreteLaw<usize> {
    dist.pmf()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (i, p))
        .collect()
}

/// An exact finite distribution keyed by arbitrary ordered values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcomes<K: Ord>(BTreeMap<K, f64>);

impl<K: Ord> Default for Outcomes<K> {
    fn default() -> Self {
        Outcomes(BTreeMap::new())
    }
}

impl<K: Ord + Clone> Outcomes<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn point(k: K) -> Self {
        let mut o = Self::new();
        o.add(k, 1.0);
        o
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (K, f64)>) -> Self {
        let mut o = Self::new();
        for (k, p) in pairs {
            o.add(k, p);
        }
        o
    }

    pub fn add(&mut self, k: K, p: f64) {
        if p != 0.0 {
            *self.0.entry(k).or_insert(0.0) += p;
        }
    }

    /// Add every entry of `other` scaled by `w`.
    pub fn absorb(&mut self, other: &Outcomes<K>, w: f64) {
        for (k, p) in &other.0 {
            self.add(k.clone(), w * p);
        }
    }

    pub fn prob(&self, k: &K) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &f64)> {
        self.0.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.0.keys()
    }

    /// Push forward through a deterministic map.
    pub fn map<L: Ord + Clone>(&self, f: impl Fn(&K) -> L) -> Outcomes<L> {
        let mut out = Outcomes::new();
        for (k, p) in &self.0 {
            out.add(f(k), *p);
        }
        out
    }

    /// Push forward through a randomised map given as a law per key.
    pub fn bind<L: Ord + Clone>(&self, f: impl Fn(&K) -> Vec<(L, f64)>) -> Outcomes<L> {
        let mut out = Outcomes::new();
        for (k, p) in &self.0 {
            for (l, q) in f(k) {
                out.add(l, p * q);
            }
        }
        out
    }

    /// Both laws as aligned dense vectors over the union of their supports.
    pub fn align(&self, other: &Outcomes<K>) -> (Vec<f64>, Vec<f64>) {
        let keys: std::collections::BTreeSet<&K> = self.0.keys().chain(other.0.keys()).collect();
        keys.into_iter().map(|k| (self.prob(k), other.prob(k))).unzip()
    }

    pub fn tv(&self, other: &Outcomes<K>) -> f64 {
        let (p, q) = self.align(other);
        crate::info_metrics::tv_slices(&p, &q)
    }

    /// Least `δ` such that `self(C) ≤ e^ε other(C) + δ`.
    pub fn hockey_stick(&self, other: &Outcomes<K>, eps: f64) -> f64 {
        let (p, q) = self.align(other);
        crate::info_metrics::hockey_stick_slices(&p, &q, eps)
    }

    pub fn to_distribution(&self) -> Result<FiniteDistribution> {
        FiniteDistribution::new(self.0.values().copied().collect())
    }

    pub fn check_total(&self) -> Result<()> {
        let t = self.total();
        if (t - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("outcome mass {t}")));
        }
        Ok(())
    }
}

/// Push `src` through a randomised map, expanding branches in parallel and
/// merging them back in key order so the result does not depend on thread
/// count.
pub(crate) fn expand<K, L, F>(src: &Outcomes<K>, f: F) -> Outcomes<L>
where
    K: Ord + Clone + Sync,
    L: Ord + Clone + Send,
    F: Fn(&K) -> Vec<(L, f64)> + Sync,
{
    let entries: Vec<(&K, f64)> = src.iter().map(|(k, p)| (k, *p)).collect();
    let parts: Vec<Vec<(L, f64)>> = entries
        .par_iter()
        .map(|(k, p)| f(k).into_iter().map(|(l, q)| (l, p * q)).collect())
        .collect();
    let mut out = Outcomes::new();
    for (l, q) in parts.into_iter().flatten() {
        out.add(l, q);
    }
    out
}

/// Joint law of `(V, S)` where `V` is uniform over the given conditionals.
pub fn joint_with_index<K: Ord + Clone>(conditionals: &[Outcomes<K>]) -> Result<JointDistribution> {
    let keys: std::collections::BTreeSet<&K> = conditionals.iter().flat_map(|o| o.keys()).collect();
    let w = 1.0 / conditionals.len() as f64;
    let matrix = conditionals
        .iter()
        .map(|o| keys.iter().map(|k| w * o.prob(k)).collect())
        .collect();
    JointDistribution::from_matrix_lenient(matrix)
}

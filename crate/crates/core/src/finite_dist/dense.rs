use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::bits::{subset_mask, BitVector};
use super::Sampler;
use crate::error::{Error, Result};
use crate::rng::open_unit;

/// Explicit pmf over a finite domain `{0, …, m-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    pmf: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

/// Tolerance on the total mass of a pmf.
pub(crate) fn mass_tolerance(m: usize) -> f64 {
    1e-12 + m as f64 * 1e-16
}

impl FiniteDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        if let Some(p) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("mass {p} is not a probability")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > mass_tolerance(pmf.len()) {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(Self::from_pmf_unchecked(pmf))
    }

    /// Normalise non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidDistribution("weights must be non-negative".into()));
        }
        Ok(Self::from_pmf_unchecked(weights.into_iter().map(|w| w / total).collect()))
    }

    pub(crate) fn from_pmf_unchecked(pmf: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        FiniteDistribution { pmf, cdf }
    }

    pub fn uniform(m: usize) -> Self {
        Self::from_pmf_unchecked(vec![1.0 / m as f64; m])
    }

    pub fn uniform_hypercube(d: usize) -> Self {
        Self::uniform(1 << d)
    }

    pub fn point_mass(m: usize, at: usize) -> Self {
        let mut pmf = vec![0.0; m];
        pmf[at] = 1.0;
        Self::from_pmf_unchecked(pmf)
    }

    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.pmf[i]
    }

    /// `Some(d)` when the domain is `{±1}^d`.
    pub fn hypercube_dim(&self) -> Option<usize> {
        let m = self.pmf.len();
        if m >= 2 && m.is_power_of_two() {
            Some(m.trailing_zeros() as usize)
        } else {
            None
        }
    }

    /// Draw one domain index by inverse CDF.
    pub fn sample_index(&self, rng: &mut dyn RngCore) -> usize {
        let u = open_unit(rng) * self.cdf[self.cdf.len() - 1];
        let i = self.cdf.partition_point(|&c| c < u);
        // skip zero-mass cells that share a cdf value
        let mut i = i.min(self.pmf.len() - 1);
        while self.pmf[i] == 0.0 && i + 1 < self.pmf.len() {
            i += 1;
        }
        i
    }

    /// Weighted mixture `Σ w_i p_i` over a common domain.
    pub fn mixture(parts: &[(&FiniteDistribution, f64)]) -> Result<Self> {
        let m = parts
            .first()
            .ok_or_else(|| Error::InvalidDistribution("empty mixture".into()))?
            .0
            .len();
        let mut pmf = vec![0.0; m];
        for (p, w) in parts {
            if p.len() != m {
                return Err(Error::DomainMismatch(m, p.len()));
            }
            for (acc, v) in pmf.iter_mut().zip(p.pmf()) {
                *acc += w * v;
            }
        }
        Self::new(pmf)
    }

    /// Product distribution: index `i * other.len() + j`. On hypercubes this
    /// is the concatenation of coordinates (self first).
    pub fn product(&self, other: &FiniteDistribution) -> Self {
        let mut pmf = Vec::with_capacity(self.len() * other.len());
        for a in &self.pmf {
            for b in &other.pmf {
                pmf.push(a * b);
            }
        }
        Self::from_pmf_unchecked(pmf)
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

impl Sampler for FiniteDistribution {
    fn dim(&self) -> usize {
        self.hypercube_dim()
            .expect("sampling bit vectors requires a hypercube domain")
    }

    fn sample_one(&self, rng: &mut dyn RngCore) -> BitVector {
        BitVector::from_index(self.sample_index(rng), self.dim())
    }
}

/// `χ_t(x) = ∏_{i∈t} x_i` for dense index `x` in dimension `d`.
pub fn parity_character(index: usize, mask: usize) -> f64 {
    if (index & mask).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `E_{x∼dist}[∏_{i∈t} x_i]` for a distribution over `{±1}^d`.
pub fn fourier_coefficient(dist: &FiniteDistribution, subset: &[usize]) -> Result<f64> {
    let d = dist
        .hypercube_dim()
        .ok_or(Error::NotHypercube(dist.len()))?;
    if let Some(&j) = subset.iter().find(|&&j| j == 0 || j > d) {
        return Err(Error::InvalidParity(format!("index {j} outside [1, {d}]")));
    }
    let mask = subset_mask(subset, d);
    Ok(dist
        .pmf()
        .iter()
        .enumerate()
        .map(|(i, p)| p * parity_character(i, mask))
        .sum())
}

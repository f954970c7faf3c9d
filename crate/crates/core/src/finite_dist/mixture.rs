use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::bits::BitVector;
use super::dense::{mass_tolerance, FiniteDistribution};
use super::hard::ParametricHardDistribution;
use super::Sampler;
use crate::error::{Error, Result};
use crate::rng::open_unit;

/// One component of a [`MixtureSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Hard(ParametricHardDistribution),
    /// Uniform over `{±1}^d`.
    Uniform(usize),
    Dense(FiniteDistribution),
}

impl Component {
    pub fn dim(&self) -> usize {
        match self {
            Component::Hard(h) => h.effective_dim(),
            Component::Uniform(d) => *d,
            Component::Dense(f) => f.dim(),
        }
    }

    pub fn densify(&self) -> Result<FiniteDistribution> {
        match self {
            Component::Hard(h) => h.densify(),
            Component::Uniform(d) => {
                if *d > super::DENSE_DIM_LIMIT {
                    return Err(Error::DimensionGuard { dim: *d, limit: super::DENSE_DIM_LIMIT });
                }
                Ok(FiniteDistribution::uniform_hypercube(*d))
            }
            Component::Dense(f) => Ok(f.clone()),
        }
    }

    /// `E[∏_{i∈t} x_i]`.
    pub fn fourier(&self, subset: &[usize]) -> Result<f64> {
        match self {
            Component::Hard(h) => Ok(h.fourier(subset)),
            Component::Uniform(_) => Ok(if subset.is_empty() { 1.0 } else { 0.0 }),
            Component::Dense(f) => super::fourier_coefficient(f, subset),
        }
    }
}

impl Sampler for Component {
    fn dim(&self) -> usize {
        Component::dim(self)
    }

    fn sample_one(&self, rng: &mut dyn RngCore) -> BitVector {
        match self {
            Component::Hard(h) => h.sample_one(rng),
            Component::Uniform(d) => {
                BitVector::from_entries_unchecked((0..*d).map(|_| crate::rng::sign(rng)).collect())
            }
            Component::Dense(f) => f.sample_one(rng),
        }
    }
}

/// A finite mixture `Σ w_i D_i` over a common hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    components: Vec<Component>,
    weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(components: Vec<Component>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} components with {} weights",
                components.len(),
                weights.len()
            )));
        }
        let dim = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > mass_tolerance(weights.len()) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(MixtureSpec { components, weights })
    }

    /// `P_(b) = b·P + (1 − b)·U`.
    pub fn two_point(b: f64, p: ParametricHardDistribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!("mixture weight {b} outside [0, 1]")));
        }
        let d = p.effective_dim();
        Self::new(vec![Component::Hard(p), Component::Uniform(d)], vec![b, 1.0 - b])
    }

    /// Equal weights over every member.
    pub fn uniform_over(members: Vec<ParametricHardDistribution>) -> Result<Self> {
        let w = 1.0 / members.len().max(1) as f64;
        let n = members.len();
        Self::new(members.into_iter().map(Component::Hard).collect(), vec![w; n])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn densify(&self) -> Result<FiniteDistribution> {
        let dense = self
            .components
            .iter()
            .map(Component::densify)
            .collect::<Result<Vec<_>>>()?;
        let parts: Vec<_> = dense.iter().zip(&self.weights).map(|(f, &w)| (f, w)).collect();
        FiniteDistribution::mixture(&parts)
    }

    pub fn fourier(&self, subset: &[usize]) -> Result<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| Ok(w * c.fourier(subset)?))
            .sum()
    }

    fn pick(&self, rng: &mut dyn RngCore) -> usize {
        let u = open_unit(rng);
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

impl Sampler for MixtureSpec {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn sample_one(&self, rng: &mut dyn RngCore) -> BitVector {
        let i = self.pick(rng);
        self.components[i].sample_one(rng)
    }
}

use rand::RngCore;

use crate::error::{Error, Result};
use crate::finite_dist::{BitVector, FiniteDistribution};
use crate::rng::rademacher;
use crate::trust_models::{ExactOnline, OnlineAlgorithm};

/// Runs `inner` on `(x_i, Y_i)` with a fresh `Y_i ~ Rad(α)` appended to
/// every element.
#[derive(Debug, Clone)]
pub struct SelectionAugment<M> {
    inner: M,
    alpha: f64,
}

/// Wrap an algorithm over `{±1}^{d+1}` so it consumes `{±1}^d` streams.
pub fn selection_augment<M>(inner: M, alpha: f64) -> Result<SelectionAugment<M>>
where
    M: OnlineAlgorithm<Input = BitVector>,
{
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::BiasOutOfRange(alpha));
    }
    Ok(SelectionAugment { inner, alpha })
}

impl<M> SelectionAugment<M> {
    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl<M: OnlineAlgorithm<Input = BitVector>> OnlineAlgorithm for SelectionAugment<M> {
    type Input = BitVector;
    type State = M::State;
    type Output = M::Output;

    fn initial_state(&self, rng: &mut dyn RngCore) -> M::State {
        self.inner.initial_state(rng)
    }

    fn update(&self, step: usize, x: &BitVector, s: &M::State, rng: &mut dyn RngCore) -> M::State {
        let y = rademacher(rng, self.alpha);
        self.inner.update(step, &x.extended(y), s, rng)
    }

    fn output(&self, s: &M::State, rng: &mut dyn RngCore) -> M::Output {
        self.inner.output(s, rng)
    }
}

impl<M: ExactOnline<Input = BitVector>> ExactOnline for SelectionAugment<M> {
    fn initial_law(&self) -> Vec<(M::State, f64)> {
        self.inner.initial_law()
    }

    fn update_law(&self, step: usize, x: &BitVector, s: &M::State) -> Vec<(M::State, f64)> {
        let mut out = Vec::new();
        for (y, w) in [(1i8, (1.0 + self.alpha) / 2.0), (-1, (1.0 - self.alpha) / 2.0)] {
            for (t, p) in self.inner.update_law(step, &x.extended(y), s) {
                out.push((t, w * p));
            }
        }
        out
    }

    fn output_law(&self, s: &M::State) -> Vec<(M::Output, f64)> {
        self.inner.output_law(s)
    }
}

/// Law of `(x, Y)` for `x ~ dist` and an independent `Y ~ Rad(α)`.
pub fn augmented_law(dist: &FiniteDistribution, alpha: f64) -> Result<FiniteDistribution> {
    if dist.hypercube_dim().is_none() {
        return Err(Error::NotHypercube(dist.len()));
    }
    let y = FiniteDistribution::new(vec![(1.0 + alpha) / 2.0, (1.0 - alpha) / 2.0])?;
    Ok(dist.product(&y))
}

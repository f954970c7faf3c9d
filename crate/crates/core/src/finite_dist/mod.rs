//! Finite distributions over the Boolean hypercube and the parity-biased
//! hard families built on top of them.
//!
//! Dense pmfs over `{±1}^d` use a fixed lexicographic order: coordinate 1 is
//! the most significant position and `+1` sorts before `-1`, i.e. `+1` maps
//! to bit 0 and `-1` to bit 1. Index `i` therefore encodes `x_j = -1` iff
//! bit `d - j` of `i` is set.

mod bits;
mod dense;
mod hard;
mod io;
mod mixture;

pub use bits::{BitVector, ParityIndex};
pub use dense::{fourier_coefficient, parity_character, FiniteDistribution};
pub use hard::{
    binomial_coefficient, choose_up_to, family_enumerate, q_family_nontrivial, subsets_of_size, subsets_up_to, FamilyTag,
    ParametricHardDistribution, DENSE_DIM_LIMIT,
};
pub use io::{dense_csv, DistributionDescriptor};
pub use mixture::{Component, MixtureSpec};

use rand::RngCore;

/// Anything that can produce i.i.d. points of the hypercube.
pub trait Sampler: Sync {
    /// Dimension of the vectors produced.
    fn dim(&self) -> usize;

    fn sample_one(&self, rng: &mut dyn RngCore) -> BitVector;

    fn sample(&self, rng: &mut dyn RngCore, n: usize) -> Vec<BitVector> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

/// Draw `n` i.i.d. samples with a fresh generator seeded from `seed`.
pub fn sample<S: Sampler + ?Sized>(dist: &S, seed: u64, n: usize) -> Vec<BitVector> {
    let mut rng = crate::rng::rng_from_seed(seed);
    dist.sample(&mut rng, n)
}

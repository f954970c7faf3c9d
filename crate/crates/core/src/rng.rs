//! Seeded randomness.
//!
//! Every random quantity in the toolkit is drawn from a [`TrialRng`] built
//! from a 64-bit seed. Parallel trials never share a stream: the seed for
//! trial `i` of experiment `e` under master seed `m` is
//! `mix_seed(m, e, i)`, a SplitMix64 chain that is fixed forever so that
//! outputs are byte-stable across runs and thread counts.

use rand::{RngCore, SeedableRng};

/// The generator used for all simulations (PCG-XSL-RR-128/64 MCG, portable).
pub type TrialRng = rand_pcg::Pcg64Mcg;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 finalisation step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a stream seed from (master seed, stream id, index).
pub fn mix_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ stream.wrapping_mul(GOLDEN));
    splitmix64(b ^ index.rotate_left(17).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_from_seed(seed: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed)
}

pub fn trial_rng(master: u64, stream: u64, index: u64) -> TrialRng {
    rng_from_seed(mix_seed(master, stream, index))
}

/// Uniform double in the open interval (0, 1) from the top 53 bits of one
/// 64-bit draw.
pub fn open_unit(rng: &mut dyn RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Laplace(0, scale) by inverse CDF from a single 64-bit uniform.
/// A zero scale returns exactly 0 so noiseless test modes stay exact.
pub fn laplace(rng: &mut dyn RngCore, scale: f64) -> f64 {
    let u = open_unit(rng);
    if scale == 0.0 {
        return 0.0;
    }
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

/// Bernoulli draw with success probability `p`.
pub fn bernoulli(rng: &mut dyn RngCore, p: f64) -> bool {
    if p <= 0.0 {
        // still consume one draw so streams stay aligned across parameters
        rng.next_u64();
        return false;
    }
    open_unit(rng) < p
}

/// Rademacher draw with the given mean: +1 with probability (1 + mean) / 2.
pub fn rademacher(rng: &mut dyn RngCore, mean: f64) -> i8 {
    if bernoulli(rng, (1.0 + mean) / 2.0) {
        1
    } else {
        -1
    }
}

/// Uniform ±1.
pub fn sign(rng: &mut dyn RngCore) -> i8 {
    if rng.next_u64() >> 63 == 0 {
        1
    } else {
        -1
    }
}

/// Binomial(n, p) draw.
pub fn binomial(rng: &mut dyn RngCore, n: u64, p: f64) -> u64 {
    use rand_distr::{Binomial, Distribution};
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("binomial parameters checked above")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_is_deterministic_and_spreads() {
        assert_eq!(mix_seed(1, 2, 3), mix_seed(1, 2, 3));
        assert_ne!(mix_seed(1, 2, 3), mix_seed(1, 2, 4));
        assert_ne!(mix_seed(1, 2, 3), mix_seed(1, 3, 3));
        assert_ne!(mix_seed(1, 2, 3), mix_seed(2, 2, 3));
    }

    #[test]
    fn laplace_moments() {
        let mut rng = rng_from_seed(7);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = laplace(&mut rng, 2.0);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {mean}");
        // Var Lap(b) = 2 b^2 = 8
        assert!((var - 8.0).abs() < 0.2, "var {var}");
    }

    #[test]
    fn zero_scale_laplace_is_exact_zero() {
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            assert_eq!(laplace(&mut rng, 0.0), 0.0);
        }
    }

    #[test]
    fn rademacher_mean() {
        let mut rng = rng_from_seed(3);
        let n = 200_000;
        let s: i64 = (0..n).map(|_| rademacher(&mut rng, 0.3) as i64).sum();
        assert!((s as f64 / n as f64 - 0.3).abs() < 0.01);
    }
}

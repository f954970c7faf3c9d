//! Small pan-private mechanisms with enumerable state spaces.
//!
//! Inputs are indices of a finite universe; the counted bit is `x & 1`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::pan::{ExactOnline, OnlineAlgorithm};
use crate::error::{Error, Result};
use crate::rng::{bernoulli, open_unit};

/// Grid for the discrete surrogate of `Lap(1/ε)`: step `1/per_unit`,
/// support `±range_scale/ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantGrid {
    pub per_unit: u32,
    pub range_scale: f64,
}

impl Default for QuantGrid {
    /// Step 1/64 over `±64/ε`.
    fn default() -> Self {
        QuantGrid { per_unit: 64, range_scale: 64.0 }
    }
}

impl QuantGrid {
    /// Step 1/4 over `±16/ε`; small enough for joint state/output audits.
    pub fn coarse() -> Self {
        QuantGrid { per_unit: 4, range_scale: 16.0 }
    }

    pub fn step(&self) -> f64 {
        1.0 / self.per_unit as f64
    }
}

/// Laplace noise restricted to a grid `k/per_unit`, truncated and
/// renormalised. Values are in grid units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLaplace {
    grid: QuantGrid,
    k_max: i64,
    masses: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuantizedLaplace {
    pub fn new(eps: f64, grid: QuantGrid) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon {eps} must be finite and positive")));
        }
        if grid.per_unit == 0 || !(grid.range_scale > 0.0) {
            return Err(Error::InvalidParameter("degenerate quantization grid".into()));
        }
        let h = grid.step();
        let k_max = (grid.range_scale / eps / h).floor() as i64;
        let raw: Vec<f64> = (-k_max..=k_max).map(|k| (-(k.abs() as f64) * h * eps).exp()).collect();
        let total: f64 = raw.iter().sum();
        let masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
        let mut acc = 0.0;
        let cdf = masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Ok(QuantizedLaplace { grid, k_max, masses, cdf })
    }

    pub fn grid(&self) -> QuantGrid {
        self.grid
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    pub fn law(&self) -> Vec<(i64, f64)> {
        (-self.k_max..=self.k_max).zip(self.masses.iter().copied()).collect()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> i64 {
        let u = open_unit(rng);
        let i = self.cdf.partition_point(|&c| c < u).min(self.masses.len() - 1);
        i as i64 - self.k_max
    }

    /// Mass of the outermost `points` grid points on one side.
    pub fn edge_mass(&self, points: usize) -> f64 {
        self.masses.iter().rev().take(points).sum()
    }

    /// Truncation allowance for a unit shift: twice the mass of the last
    /// `per_unit` points.
    pub fn shift_slack(&self) -> f64 {
        2.0 * self.edge_mass(self.grid.per_unit as usize)
    }
}

/// Sum of randomized-response bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RRCounter {
    pub flip: f64,
}

impl OnlineAlgorithm for RRCounter {
    type Input = usize;
    type State = u64;
    type Output = u64;

    fn initial_state(&self, _rng: &mut dyn RngCore) -> u64 {
        0
    }

    fn update(&self, _step: usize, x: &usize, s: &u64, rng: &mut dyn RngCore) -> u64 {
        s + ((*x as u64 & 1) ^ u64::from(bernoulli(rng, self.flip)))
    }

    fn output(&self, s: &u64, _rng: &mut dyn RngCore) -> u64 {
        *s
    }
}

impl ExactOnline for RRCounter {
    fn initial_law(&self) -> Vec<(u64, f64)> {
        vec![(0, 1.0)]
    }

    fn update_law(&self, _step: usize, x: &usize, s: &u64) -> Vec<(u64, f64)> {
        let bit = *x as u64 & 1;
        vec![(s + bit, 1.0 - self.flip), (s + (1 - bit), self.flip)]
    }

    fn output_law(&self, s: &u64) -> Vec<(u64, f64)> {
        vec![(*s, 1.0)]
    }
}

/// XOR of randomized-response bits: a two-state chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RRParityChain {
    pub flip: f64,
}

impl OnlineAlgorithm for RRParityChain {
    type Input = usize;
    type State = u8;
    type Output = u8;

    fn initial_state(&self, _rng: &mut dyn RngCore) -> u8 {
        0
    }

    fn update(&self, _step: usize, x: &usize, s: &u8, rng: &mut dyn RngCore) -> u8 {
        s ^ (*x as u8 & 1) ^ u8::from(bernoulli(rng, self.flip))
    }

    fn output(&self, s: &u8, _rng: &mut dyn RngCore) -> u8 {
        *s
    }
}

impl ExactOnline for RRParityChain {
    fn initial_law(&self) -> Vec<(u8, f64)> {
        vec![(0, 1.0)]
    }

    fn update_law(&self, _step: usize, x: &usize, s: &u8) -> Vec<(u8, f64)> {
        let kept = s ^ (*x as u8 & 1);
        vec![(kept, 1.0 - self.flip), (kept ^ 1, self.flip)]
    }

    fn output_law(&self, s: &u8) -> Vec<(u8, f64)> {
        vec![(*s, 1.0)]
    }
}

/// Ignores its input entirely.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantOutput;

impl OnlineAlgorithm for ConstantOutput {
    type Input = usize;
    type State = ();
    type Output = ();

    fn initial_state(&self, _rng: &mut dyn RngCore) {}

    fn update(&self, _step: usize, _x: &usize, _s: &(), _rng: &mut dyn RngCore) {}

    fn output(&self, _s: &(), _rng: &mut dyn RngCore) {}
}

impl ExactOnline for ConstantOutput {
    fn initial_law(&self) -> Vec<((), f64)> {
        vec![((), 1.0)]
    }

    fn update_law(&self, _step: usize, _x: &usize, _s: &()) -> Vec<((), f64)> {
        vec![((), 1.0)]
    }

    fn output_law(&self, _s: &()) -> Vec<((), f64)> {
        vec![((), 1.0)]
    }
}

/// Randomized-response tally `(ones, seen)` that outputs whether the noisy
/// ones form a strict majority.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyMajority {
    pub flip: f64,
}

impl OnlineAlgorithm for NoisyMajority {
    type Input = usize;
    type State = (u64, u64);
    type Output = bool;

    fn initial_state(&self, _rng: &mut dyn RngCore) -> (u64, u64) {
        (0, 0)
    }

    fn update(&self, _step: usize, x: &usize, s: &(u64, u64), rng: &mut dyn RngCore) -> (u64, u64) {
        (s.0 + ((*x as u64 & 1) ^ u64::from(bernoulli(rng, self.flip))), s.1 + 1)
    }

    fn output(&self, s: &(u64, u64), _rng: &mut dyn RngCore) -> bool {
        2 * s.0 > s.1
    }
}

impl ExactOnline for NoisyMajority {
    fn initial_law(&self) -> Vec<((u64, u64), f64)> {
        vec![((0, 0), 1.0)]
    }

    fn update_law(&self, _step: usize, x: &usize, s: &(u64, u64)) -> Vec<((u64, u64), f64)> {
        let bit = *x as u64 & 1;
        vec![((s.0 + bit, s.1 + 1), 1.0 - self.flip), ((s.0 + 1 - bit, s.1 + 1), self.flip)]
    }

    fn output_law(&self, s: &(u64, u64)) -> Vec<(bool, f64)> {
        vec![(2 * s.0 > s.1, 1.0)]
    }
}

/// Counter whose state starts at `Lap(1/ε)` noise and is re-noised with an
/// independent `Lap(1/ε)` at output, both drawn on a grid. State and output
/// are in grid units (`per_unit` per count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLaplaceCounter {
    eps: f64,
    noise: QuantizedLaplace,
}

impl QuantizedLaplaceCounter {
    pub fn new(eps: f64, grid: QuantGrid) -> Result<Self> {
        Ok(QuantizedLaplaceCounter { eps, noise: QuantizedLaplace::new(eps, grid)? })
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn noise(&self) -> &QuantizedLaplace {
        &self.noise
    }

    fn unit(&self) -> i64 {
        self.noise.grid().per_unit as i64
    }

    /// Convert grid units back to a count estimate.
    pub fn to_count(&self, units: i64) -> f64 {
        units as f64 / self.unit() as f64
    }

    /// `δ` allowance the grid truncation adds to the nominal `(ε, 0)`.
    pub fn quantization_slack(&self) -> f64 {
        self.noise.shift_slack()
    }
}

impl OnlineAlgorithm for QuantizedLaplaceCounter {
    type Input = usize;
    type State = i64;
    type Output = i64;

    fn initial_state(&self, rng: &mut dyn RngCore) -> i64 {
        self.noise.sample(rng)
    }

    fn update(&self, _step: usize, x: &usize, s: &i64, _rng: &mut dyn RngCore) -> i64 {
        s + (*x as i64 & 1) * self.unit()
    }

    fn output(&self, s: &i64, rng: &mut dyn RngCore) -> i64 {
        s + self.noise.sample(rng)
    }
}

impl ExactOnline for QuantizedLaplaceCounter {
    fn initial_law(&self) -> Vec<(i64, f64)> {
        self.noise.law()
    }

    fn update_law(&self, _step: usize, x: &usize, s: &i64) -> Vec<(i64, f64)> {
        vec![(s + (*x as i64 & 1) * self.unit(), 1.0)]
    }

    fn output_law(&self, s: &i64) -> Vec<(i64, f64)> {
        self.noise.law().into_iter().map(|(k, p)| (s + k, p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn quantized_laplace_shape() {
        let q = QuantizedLaplace::new(1.0, QuantGrid::default()).unwrap();
        assert_eq!(q.k_max(), 64 * 64);
        assert_eq!(q.support_len(), 2 * 64 * 64 + 1);
        let total: f64 = q.law().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let ratio = q.law()[q.k_max() as usize].1 / q.law()[q.k_max() as usize + 64].1;
        assert!((ratio - 1f64.exp()).abs() < 1e-9);
        assert!(q.edge_mass(64) < 1e-27);
        let coarse = QuantizedLaplace::new(1.0, QuantGrid::coarse()).unwrap();
        assert_eq!(coarse.support_len(), 129);
    }

    #[test]
    fn quantized_laplace_sampling_matches_law() {
        let q = QuantizedLaplace::new(2.0, QuantGrid::coarse()).unwrap();
        let mut rng = rng_from_seed(8);
        let n = 200_000;
        let mut counts = vec![0u64; q.support_len()];
        for _ in 0..n {
            counts[(q.sample(&mut rng) + q.k_max()) as usize] += 1;
        }
        let probs: Vec<f64> = q.law().iter().map(|(_, p)| *p).collect();
        let (_, _, p) = crate::stats::chi_square_gof(&counts, &probs);
        assert!(p > 1e-3, "p = {p}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(QuantizedLaplace::new(0.0, QuantGrid::default()).is_err());
        assert!(QuantizedLaplaceCounter::new(f64::INFINITY, QuantGrid::default()).is_err());
    }
}

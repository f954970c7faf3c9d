use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_dist::BitVector;
use crate::rng::{laplace, rng_from_seed};
use crate::trust_models::{run_online, OnlineAlgorithm};

use super::rr::composition_factor;

/// Row → vector of ±1 features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// The `d` coordinates themselves.
    Coordinates { d: usize },
    /// `∏_{j∈ℓ} x_j` for every `1 ≤ |ℓ| ≤ k`, by size then lexicographically.
    Parities { d: usize, k: usize },
    /// `x_{d+1}·∏_{j∈ℓ} x_j` for every `0 ≤ |ℓ| ≤ k` over `{±1}^{d+1}`.
    LabelledParities { d: usize, k: usize },
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        match *self {
            FeatureMap::Coordinates { d } | FeatureMap::Parities { d, .. } => d,
            FeatureMap::LabelledParities { d, .. } => d + 1,
        }
    }

    /// Parity subsets behind each feature.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        match *self {
            FeatureMap::Coordinates { d } => (1..=d).map(|j| vec![j]).collect(),
            FeatureMap::Parities { d, k } => crate::finite_dist::subsets_up_to(d, 1, k),
            FeatureMap::LabelledParities { d, k } => crate::finite_dist::subsets_up_to(d, 0, k),
        }
    }

    pub fn len(&self) -> usize {
        self.subsets().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, x: &BitVector) -> Result<Vec<i8>> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.dim() });
        }
        let label = match self {
            FeatureMap::LabelledParities { d, .. } => x.get(d + 1),
            _ => 1,
        };
        Ok(self.subsets().iter().map(|s| label * x.parity(s)).collect())
    }
}

/// Noisy running sums `(C_1, …, C_D)` and the element count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulatorState {
    pub sums: Vec<f64>,
    pub count: u64,
}

/// Pan-private feature-mean estimator: Laplace noise at initialisation,
/// exact increments, and fresh Laplace noise at output, each half of `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanNoisyAccumulator {
    features: FeatureMap,
    subsets: Vec<Vec<usize>>,
    eps: f64,
    delta: f64,
}

impl PanNoisyAccumulator {
    /// `eps = ∞` disables both noises.
    pub fn new(features: FeatureMap, eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0) || !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!("budget (eps = {eps}, delta = {delta}) out of range")));
        }
        let subsets = features.subsets();
        Ok(PanNoisyAccumulator { features, subsets, eps, delta })
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    /// `Δ = 2·√(8D·ln(1/δ))` (or `2D` when `δ = 0`): a row moves each ±1
    /// feature by at most 2, composed over `D` features.
    pub fn sensitivity(&self) -> f64 {
        2.0 * composition_factor(self.subsets.len() as f64, self.delta)
    }

    /// Scale of each Laplace draw, `Δ/(ε/2)`.
    pub fn noise_scale(&self) -> f64 {
        if self.eps.is_infinite() {
            0.0
        } else {
            self.sensitivity() / (self.eps / 2.0)
        }
    }

    /// Add sufficient statistics `Σ_i φ(x_i)` of `count` elements at once.
    pub fn absorb_sums(&self, s: &AccumulatorState, sums: &[i64], count: u64) -> Result<AccumulatorState> {
        if sums.len() != s.sums.len() {
            return Err(Error::DimensionMismatch { expected: s.sums.len(), got: sums.len() });
        }
        Ok(AccumulatorState {
            sums: s.sums.iter().zip(sums).map(|(a, &b)| a + b as f64).collect(),
            count: s.count + count,
        })
    }
}

impl OnlineAlgorithm for PanNoisyAccumulator {
    type Input = BitVector;
    type State = AccumulatorState;
    type Output = Vec<f64>;

    fn initial_state(&self, rng: &mut dyn RngCore) -> AccumulatorState {
        let scale = self.noise_scale();
        AccumulatorState { sums: self.subsets.iter().map(|_| laplace(rng, scale)).collect(), count: 0 }
    }

    fn update(&self, _step: usize, x: &BitVector, s: &AccumulatorState, _rng: &mut dyn RngCore) -> AccumulatorState {
        let label = match self.features {
            FeatureMap::LabelledParities { d, .. } => x.get(d + 1),
            _ => 1,
        };
        AccumulatorState {
            sums: s.sums.iter().zip(&self.subsets).map(|(c, l)| c + f64::from(label * x.parity(l))).collect(),
            count: s.count + 1,
        }
    }

    /// Noisy sums divided by the element count (by 1 on an empty stream).
    fn output(&self, s: &AccumulatorState, rng: &mut dyn RngCore) -> Vec<f64> {
        let scale = self.noise_scale();
        let n = s.count.max(1) as f64;
        s.sums.iter().map(|c| (c + laplace(rng, scale)) / n).collect()
    }
}

/// Run the accumulator over `stream` and return the estimated feature means.
pub fn pan_mean_vector(stream: &[BitVector], features: FeatureMap, eps: f64, delta: f64, seed: u64) -> Result<Vec<f64>> {
    if let Some(x) = stream.iter().find(|x| x.dim() != features.input_dim()) {
        return Err(Error::DimensionMismatch { expected: features.input_dim(), got: x.dim() });
    }
    let acc = PanNoisyAccumulator::new(features, eps, delta)?;
    Ok(run_online(&acc, stream, &mut rng_from_seed(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dist::{sample, ParametricHardDistribution};

    #[test]
    fn feature_layouts() {
        assert_eq!(FeatureMap::Coordinates { d: 3 }.len(), 3);
        assert_eq!(FeatureMap::Parities { d: 4, k: 2 }.len(), 10);
        assert_eq!(FeatureMap::LabelledParities { d: 4, k: 2 }.len(), 11);
        let x = BitVector::new(vec![1, -1, -1]).unwrap();
        assert_eq!(FeatureMap::Parities { d: 3, k: 2 }.apply(&x).unwrap(), vec![1, -1, -1, -1, -1, 1]);
        assert_eq!(FeatureMap::LabelledParities { d: 2, k: 1 }.apply(&x).unwrap(), vec![-1, -1, 1]);
        assert!(FeatureMap::Coordinates { d: 2 }.apply(&x).is_err());
    }

    #[test]
    fn noiseless_means_are_exact() {
        let p = ParametricHardDistribution::p(4, vec![2], -1, 0.3).unwrap();
        let xs = sample(&p, 1, 500);
        let est = pan_mean_vector(&xs, FeatureMap::Coordinates { d: 4 }, f64::INFINITY, 0.0, 5).unwrap();
        for (j, e) in est.iter().enumerate() {
            let m = xs.iter().map(|x| f64::from(x.get(j + 1))).sum::<f64>() / 500.0;
            assert_eq!(*e, m);
        }
    }

    #[test]
    fn empty_stream_is_centred_noise() {
        let runs: Vec<f64> = (0..20_000)
            .map(|s| pan_mean_vector(&[], FeatureMap::Coordinates { d: 1 }, 1.0, 0.0, s).unwrap()[0])
            .collect();
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        // two Laplace(4) draws: standard deviation 8, standard error ≈ 0.057
        assert!(mean.abs() < 0.25, "mean {mean}");
        assert!(runs.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn d1_error_within_laplace_tail() {
        let n = 10_000;
        let xs: Vec<BitVector> = (0..n).map(|i| BitVector::new(vec![if i % 4 == 0 { -1 } else { 1 }]).unwrap()).collect();
        // |L₁ + L₂| > 30 for two Laplace(4) draws has probability ≈ 0.003
        let bound = 30.0 / n as f64;
        // δ = 0 keeps Δ = 2 for a single feature
        let ok = (0..1000)
            .filter(|&s| (pan_mean_vector(&xs, FeatureMap::Coordinates { d: 1 }, 1.0, 0.0, s).unwrap()[0] - 0.5).abs() < bound)
            .count();
        assert!(ok >= 990, "{ok}");
    }

    #[test]
    fn absorb_matches_updates() {
        let acc = PanNoisyAccumulator::new(FeatureMap::Coordinates { d: 3 }, 2.0, 1e-6).unwrap();
        let p = ParametricHardDistribution::p(3, vec![1], 1, 0.2).unwrap();
        let xs = sample(&p, 4, 100);
        let mut rng = rng_from_seed(8);
        let s0 = acc.initial_state(&mut rng);
        let stepped = xs.iter().enumerate().fold(s0.clone(), |s, (i, x)| acc.update(i + 1, x, &s, &mut rng));
        let sums: Vec<i64> = (1..=3).map(|j| xs.iter().map(|x| i64::from(x.get(j))).sum()).collect();
        let absorbed = acc.absorb_sums(&s0, &sums, 100).unwrap();
        assert_eq!(absorbed.count, stepped.count);
        for (a, b) in absorbed.sums.iter().zip(&stepped.sums) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

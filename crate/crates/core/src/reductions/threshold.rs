use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_dist::{family_enumerate, Component, FamilyTag, Sampler};
use crate::rng::{mix_seed, trial_rng};
use crate::stats::newcombe_difference;

use super::learner::{learner_to_distinguisher, Hypothesis, LearnerDistinguisher, PlantedLearner};

/// Fewest samples per world accepted by [`threshold_distinguisher`].
pub const MIN_THRESHOLD_SAMPLES: usize = 10_000;

/// Best rule `Z > τ` and its advantage with a 95% Newcombe interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub tau: f64,
    pub adv: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub target: f64,
    pub meets_target: bool,
}

/// Maximise `Pr[Z > τ | mixture] − Pr[Z > τ | uniform]` over thresholds at
/// sample values; ties go to the smallest `τ`.
pub fn threshold_distinguisher(z_mix: &[f64], z_unif: &[f64], target: f64) -> Result<ThresholdReport> {
    for z in [z_mix, z_unif] {
        if z.len() < MIN_THRESHOLD_SAMPLES {
            return Err(Error::InsufficientSamples { need: MIN_THRESHOLD_SAMPLES, got: z.len() });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Z sample".into()));
        }
    }
    let mut merged: Vec<(f64, bool)> =
        z_mix.iter().map(|&z| (z, true)).chain(z_unif.iter().map(|&z| (z, false))).collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (n_mix, n_unif) = (z_mix.len() as u64, z_unif.len() as u64);
    let (mut below_mix, mut below_unif) = (0u64, 0u64);
    let mut best: Option<(f64, f64, u64, u64)> = None;
    let mut i = 0;
    while i < merged.len() {
        let tau = merged[i].0;
        while i < merged.len() && merged[i].0 == tau {
            if merged[i].1 {
                below_mix += 1;
            } else {
                below_unif += 1;
            }
            i += 1;
        }
        let (a, b) = (n_mix - below_mix, n_unif - below_unif);
        let adv = a as f64 / n_mix as f64 - b as f64 / n_unif as f64;
        if best.is_none_or(|(_, best_adv, _, _)| adv > best_adv) {
            best = Some((tau, adv, a, b));
        }
    }
    let (tau, adv, a, b) = best.expect("non-empty samples");
    let (ci_low, ci_high) = newcombe_difference(a, n_mix, b, n_unif, 1.96);
    Ok(ThresholdReport { tau, adv, ci_low, ci_high, target, meets_target: adv >= target })
}

/// Which world a `Z` sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum World {
    Mixture,
    Uniform,
}

/// One line of the distinguisher log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZRecord {
    pub world: World,
    pub seed: u64,
    #[serde(rename = "Z")]
    pub z: f64,
}

pub fn to_jsonl(records: &[ZRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

/// Parameters of the planted-learner distinguishing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishConfig {
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub eps: f64,
    pub n: usize,
    pub constant: f64,
}

const WORLD_STREAM: u64 = 0x5EED_0001;
const WORLD_ALG: u64 = 0x5EED_0002;

/// Draw `trials` values of `Z` in one world.
///
/// Each trial picks `V` uniformly from the signed-parity family and plants
/// its hypothesis in the learner. The mixture world streams from `Q_V`; the
/// uniform world streams from the uniform distribution on `{±1}^{d+1}`.
pub fn simulate_world(cfg: &DistinguishConfig, world: World, trials: u64, seed: u64) -> Result<Vec<ZRecord>> {
    let family = family_enumerate(cfg.d, cfg.k, cfg.alpha, FamilyTag::Q)?;
    let uniform = Component::Uniform(cfg.d + 1);
    let probe = LearnerDistinguisher::with_test_phase(
        PlantedLearner { hypothesis: Hypothesis::of(&family[0]) },
        cfg.d,
        cfg.n,
        cfg.alpha,
        cfg.eps,
        cfg.constant,
    )?;
    let m = probe.m();
    let world_tag = match world {
        World::Mixture => 0,
        World::Uniform => 1,
    };
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, WORLD_STREAM + world_tag, i);
            let v = &family[(crate::rng::open_unit(&mut rng) * family.len() as f64) as usize % family.len()];
            let stream = match world {
                World::Mixture => v.sample(&mut rng, m),
                World::Uniform => uniform.sample(&mut rng, m),
            };
            let alg = LearnerDistinguisher::new(
                PlantedLearner { hypothesis: Hypothesis::of(v) },
                cfg.d,
                cfg.n,
                m,
                cfg.eps,
            )?;
            let alg_seed = mix_seed(seed, WORLD_ALG + world_tag, i);
            let run = learner_to_distinguisher(&alg, &stream, m, alg_seed)?;
            Ok(ZRecord { world, seed: alg_seed, z: run.z })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_samples() {
        let mix: Vec<f64> = (0..10_000).map(|i| 10.0 + i as f64 * 1e-4).collect();
        let unif: Vec<f64> = (0..10_000).map(|i| i as f64 * 1e-4).collect();
        let r = threshold_distinguisher(&mix, &unif, 0.8).unwrap();
        assert_eq!(r.adv, 1.0);
        assert!(r.tau >= 0.9999 && r.tau < 10.0);
        assert_eq!(r.tau, unif[9_999]);
        assert!(r.meets_target);
    }

    #[test]
    fn identical_samples_have_no_advantage() {
        let z: Vec<f64> = (0..10_000).map(|i| (i % 17) as f64).collect();
        let r = threshold_distinguisher(&z, &z, 0.1).unwrap();
        assert_eq!(r.adv, 0.0);
        // ties resolved to the smallest threshold
        assert_eq!(r.tau, 0.0);
        assert!(r.ci_low <= 0.0 && r.ci_high >= 0.0);
    }

    #[test]
    fn too_few_samples() {
        let z = vec![0.0; 9_999];
        let ok = vec![0.0; 10_000];
        assert_eq!(
            threshold_distinguisher(&z, &ok, 0.5).err(),
            Some(Error::InsufficientSamples { need: 10_000, got: 9_999 })
        );
    }

    #[test]
    fn jsonl_shape() {
        let s = to_jsonl(&[ZRecord { world: World::Uniform, seed: 3, z: 1.5 }]).unwrap();
        assert_eq!(s, "{\"world\":\"uniform\",\"seed\":3,\"Z\":1.5}\n");
    }

    #[test]
    fn worlds_have_expected_means() {
        let cfg = DistinguishConfig { d: 3, k: 2, alpha: 0.25, eps: 0.5, n: 2, constant: 4.0 };
        let m_minus_n = 32.0;
        let mix = simulate_world(&cfg, World::Mixture, 4_000, 7).unwrap();
        let unif = simulate_world(&cfg, World::Uniform, 4_000, 7).unwrap();
        let mean = |r: &[ZRecord]| r.iter().map(|r| r.z).sum::<f64>() / r.len() as f64;
        // Var(Z) ≈ 8 + 2·2·4 = 24, so the standard error is under 0.08.
        assert!((mean(&mix) - m_minus_n * 0.75).abs() < 0.4);
        assert!((mean(&unif) - m_minus_n * 0.5).abs() < 0.4);
    }
}

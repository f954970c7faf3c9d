//! Exact information measures on finite distributions.
//!
//! All logarithms are natural, so divergences and mutual information are in
//! nats.

mod joint;
mod norm;

pub use joint::{
    fact_markov_check, fact_tv_chain_check, mutual_information, FactCheck, Joint3, JointDistribution,
    StochasticMap,
};
pub use norm::{infty_to_2_norm_bruteforce, NormReport, NORM_DOMAIN_LIMIT};

use crate::error::{Error, Result};
use crate::finite_dist::FiniteDistribution;

fn same_domain(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<()> {
    if p.len() == q.len() {
        Ok(())
    } else {
        Err(Error::DomainMismatch(p.len(), q.len()))
    }
}

/// `½‖p − q‖₁`.
pub fn tv_distance(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    same_domain(p, q)?;
    Ok(tv_slices(p.pmf(), q.pmf()))
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `Σ p ln(p/q)`; `+∞` when `p` charges a point `q` does not.
pub fn kl_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    same_domain(p, q)?;
    Ok(kl_slices(p.pmf(), q.pmf()))
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            total += a * (a / b).ln();
        }
    }
    total.max(0.0)
}

/// `tv(p, q)² ≤ KL(p ‖ q) / 2`, with a `1e-12` allowance for rounding.
pub fn pinsker_check(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<bool> {
    let tv = tv_distance(p, q)?;
    let kl = kl_divergence(p, q)?;
    Ok(tv * tv <= kl / 2.0 + 1e-12)
}

/// Least `δ` with `p(C) ≤ e^ε q(C) + δ` for every event `C`.
pub fn hockey_stick(p: &FiniteDistribution, q: &FiniteDistribution, eps: f64) -> Result<f64> {
    same_domain(p, q)?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon {eps} must be ≥ 0")));
    }
    Ok(hockey_stick_slices(p.pmf(), q.pmf(), eps))
}

pub(crate) fn hockey_stick_slices(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let scale = eps.exp();
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if b == 0.0 { a } else { (a - scale * b).max(0.0) })
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dist::ParametricHardDistribution;

    fn bern(p: f64) -> FiniteDistribution {
        FiniteDistribution::new(vec![1.0 - p, p]).unwrap()
    }

    #[test]
    fn tv_examples() {
        let u = FiniteDistribution::uniform_hypercube(3);
        let p = ParametricHardDistribution::p(3, vec![2], 1, 0.1).unwrap().densify().unwrap();
        let m = ParametricHardDistribution::p(3, vec![2], -1, 0.1).unwrap().densify().unwrap();
        assert!((tv_distance(&u, &p).unwrap() - 0.1).abs() < 1e-12);
        assert!((tv_distance(&p, &m).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_distance(&u, &bern(0.3)), Err(Error::DomainMismatch(8, 2)));
    }

    #[test]
    fn kl_examples() {
        let p = bern(0.5);
        let q = bern(0.75);
        let direct = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((kl_divergence(&p, &q).unwrap() - direct).abs() < 1e-15);
        assert!(pinsker_check(&p, &q).unwrap());
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        assert!(kl_divergence(&bern(0.0), &bern(1.0)).unwrap().is_infinite());
    }

    #[test]
    fn hockey_stick_examples() {
        let flip = 0.2;
        let p = bern(1.0 - flip);
        let q = bern(flip);
        let eps = ((1.0 - flip) / flip).ln();
        assert!(hockey_stick(&p, &q, eps).unwrap() < 1e-15);
        assert!((hockey_stick(&p, &q, 0.0).unwrap() - tv_distance(&p, &q).unwrap()).abs() < 1e-15);
        assert!((hockey_stick(&p, &bern(1.0), f64::INFINITY).unwrap() - 0.2).abs() < 1e-15);
        assert!(hockey_stick(&p, &q, -1.0).is_err());
    }
}

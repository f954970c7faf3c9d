use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_dist::FiniteDistribution;

/// Largest domain the vertex enumeration accepts (`2^16` test functions).
pub const NORM_DOMAIN_LIMIT: usize = 16;

/// Result of the brute-force `(∞→2)`-norm computation.
///
/// `witness_bits[x]` is the value `f(x) ∈ {±1}` of a maximising test
/// function. `bound_sq` is filled in by callers that know a closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value_sq: f64,
    pub bound_sq: Option<f64>,
    pub witness_bits: Vec<i8>,
}

impl NormReport {
    pub fn with_bound(mut self, bound_sq: f64) -> Self {
        self.bound_sq = Some(bound_sq);
        self
    }

    pub fn value(&self) -> f64 {
        self.value_sq.sqrt()
    }

    pub fn within_bound(&self, tol: f64) -> bool {
        self.bound_sq.is_none_or(|b| self.value_sq <= b + tol)
    }
}

/// `sup_f E_v[(E_{P_v} f − E_U f)²]` over `f: X → {±1}`, with `U` the equal
/// mixture of the family.
///
/// The objective is convex in `f`, so restricting to vertices loses nothing.
/// Ties go to the lowest function index, where bit `x` of the index set
/// means `f(x) = −1`.
pub fn infty_to_2_norm_bruteforce(family: &[FiniteDistribution]) -> Result<NormReport> {
    let Some(first) = family.first() else {
        return Err(Error::InvalidParameter("empty family".into()));
    };
    let m = first.len();
    if let Some(p) = family.iter().find(|p| p.len() != m) {
        return Err(Error::DomainMismatch(m, p.len()));
    }
    if m > NORM_DOMAIN_LIMIT {
        return Err(Error::DimensionGuard { dim: m, limit: NORM_DOMAIN_LIMIT });
    }
    let weight = 1.0 / family.len() as f64;
    let mut mean = vec![0.0; m];
    for p in family {
        for (u, v) in mean.iter_mut().zip(p.pmf()) {
            *u += weight * v;
        }
    }
    let deviations: Vec<Vec<f64>> = family
        .iter()
        .map(|p| p.pmf().iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();

    let objective = |f: u32| -> f64 {
        deviations
            .iter()
            .map(|dev| {
                let s: f64 = dev
                    .iter()
                    .enumerate()
                    .map(|(x, v)| if f >> x & 1 == 1 { -v } else { *v })
                    .sum();
                s * s
            })
            .sum::<f64>()
            * weight
    };

    let total: u32 = 1 << m;
    let chunk = 1024u32.min(total);
    let better = |a: (f64, u32), b: (f64, u32)| {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let (value_sq, best) = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(total);
            (lo..hi).fold((f64::NEG_INFINITY, u32::MAX), |acc, f| better(acc, (objective(f), f)))
        })
        .reduce(|| (f64::NEG_INFINITY, u32::MAX), better);

    // Prefer a parity character among (numerically) tied maximisers.
    let (value_sq, best) = if m.is_power_of_two() {
        let tied = |v: f64| v >= value_sq - 1e-12 * value_sq.abs().max(1e-300);
        (0..m as u32)
            .flat_map(|mask| [false, true].map(|neg| character_index(m, mask, neg)))
            .map(|f| (objective(f), f))
            .filter(|&(v, _)| tied(v))
            .min_by_key(|&(_, f)| f)
            .unwrap_or((value_sq, best))
    } else {
        (value_sq, best)
    };

    Ok(NormReport {
        value_sq,
        bound_sq: None,
        witness_bits: (0..m).map(|x| if best >> x & 1 == 1 { -1 } else { 1 }).collect(),
    })
}

/// Function index of `±χ_mask` on a domain of size `m`.
fn character_index(m: usize, mask: u32, negate: bool) -> u32 {
    (0..m as u32).filter(|&x| ((x & mask).count_ones() % 2 == 1) != negate).fold(0, |f, x| f | 1 << x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dist::{family_enumerate, FamilyTag};

    fn dense_family(d: usize, k: usize, alpha: f64) -> Vec<FiniteDistribution> {
        family_enumerate(d, k, alpha, FamilyTag::P)
            .unwrap()
            .iter()
            .map(|p| p.densify().unwrap())
            .collect()
    }

    #[test]
    fn small_family_values() {
        let r = infty_to_2_norm_bruteforce(&dense_family(2, 1, 0.25)).unwrap();
        assert!((r.value_sq - 0.125).abs() < 1e-12);
        let r = infty_to_2_norm_bruteforce(&dense_family(3, 2, 0.1)).unwrap();
        assert!((r.value_sq - 0.04 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn witness_is_a_character_despite_ties() {
        for (d, k) in [(3, 2), (4, 2)] {
            let r = infty_to_2_norm_bruteforce(&dense_family(d, k, 0.1)).unwrap();
            let w = &r.witness_bits;
            let mask = (0..d).fold(0usize, |m, j| if w[1 << j] != w[0] { m | 1 << j } else { m });
            assert!((0..w.len()).all(|x| w[x] == w[0] * if (x & mask).count_ones() % 2 == 1 { -1 } else { 1 }));
        }
    }

    #[test]
    fn singleton_is_zero() {
        let r = infty_to_2_norm_bruteforce(&[FiniteDistribution::uniform_hypercube(3)]).unwrap();
        assert_eq!(r.value_sq, 0.0);
        assert_eq!(r.witness_bits, vec![1; 8]);
    }

    #[test]
    fn guards() {
        assert!(infty_to_2_norm_bruteforce(&[]).is_err());
        let big = FiniteDistribution::uniform(17);
        assert_eq!(
            infty_to_2_norm_bruteforce(&[big]),
            Err(Error::DimensionGuard { dim: 17, limit: 16 })
        );
    }

    #[test]
    fn report_json_shape() {
        let r = NormReport { value_sq: 0.5, bound_sq: Some(0.5), witness_bits: vec![1, -1] };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"value_sq":0.5,"bound_sq":0.5,"witness_bits":[1,-1]}"#
        );
    }
}

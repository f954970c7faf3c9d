use serde::{Deserialize, Serialize};

use super::outcomes::{joint_with_index, law_of, DiscreteLaw, Outcomes, PathBudget};
use super::pan::{propagate, ExactOnline};
use crate::error::{Error, Result};
use crate::finite_dist::FiniteDistribution;

/// One hybrid step `Q_{i−1} → Q_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridStep {
    pub i: usize,
    pub tv: f64,
    pub mutual_information: f64,
    /// `sqrt(½ I(S_i; V))`.
    pub bound: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridReport {
    pub steps: Vec<HybridStep>,
    /// `tv(Q_0, Q_n)`: the end-to-end distance between the family mixture
    /// and the uniform stream.
    pub total_tv: f64,
    pub telescoped_sum: f64,
    /// `n · max_i sqrt(½ I(S_i; V))`.
    pub n_times_max_bound: f64,
}

impl HybridReport {
    pub fn min_slack(&self) -> f64 {
        self.steps.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min)
    }

    /// Every per-step inequality within `tol`, and both telescoped totals
    /// dominate the end-to-end distance.
    pub fn holds(&self, tol: f64) -> bool {
        self.min_slack() >= -tol
            && self.telescoped_sum + tol >= self.total_tv
            && self.n_times_max_bound + tol >= self.total_tv
    }
}

/// Exact hybrid-argument certificate for `M` against a family `{P_v}` with
/// `U` their equal mixture. `Q_j` is the output law when the first `j`
/// elements come from `U` and the remaining `n − j` from `P_V`.
pub fn hybrid_tv_certificate<A>(alg: &A, family: &[FiniteDistribution], n: usize, budget: &mut PathBudget) -> Result<HybridReport>
where
    A: ExactOnline<Input = usize>,
{
    let Some(first) = family.first() else {
        return Err(Error::InvalidParameter("empty family".into()));
    };
    if n == 0 {
        return Err(Error::InvalidParameter("stream length must be at least 1".into()));
    }
    if let Some(p) = family.iter().find(|p| p.len() != first.len()) {
        return Err(Error::DomainMismatch(first.len(), p.len()));
    }
    let w = 1.0 / family.len() as f64;
    let parts: Vec<_> = family.iter().map(|p| (p, w)).collect();
    let u_law = law_of(&FiniteDistribution::mixture(&parts)?);
    let member_laws: Vec<DiscreteLaw<usize>> = family.iter().map(law_of).collect();

    // Prefix state laws under U^j, j = 0..=n.
    let mut prefixes = vec![Outcomes::from_pairs(alg.initial_law())];
    for j in 1..=n {
        let next = propagate(alg, &prefixes[j - 1], j, std::slice::from_ref(&u_law), budget)?;
        prefixes.push(next);
    }

    let hybrid_output = |j: usize, budget: &mut PathBudget| -> Result<Outcomes<A::Output>> {
        let mut mix = Outcomes::new();
        for law in &member_laws {
            let tail = vec![law.clone(); n - j];
            let end = propagate(alg, &prefixes[j], j + 1, &tail, budget)?;
            budget.spend(end.len() as u64)?;
            mix.absorb(&end.bind(|s| alg.output_law(s)), w);
        }
        Ok(mix)
    };
    let q: Vec<Outcomes<A::Output>> = (0..=n).map(|j| hybrid_output(j, budget)).collect::<Result<_>>()?;

    let mut steps = Vec::with_capacity(n);
    for i in 1..=n {
        let conditionals: Vec<Outcomes<A::State>> = member_laws
            .iter()
            .map(|law| propagate(alg, &prefixes[i - 1], i, std::slice::from_ref(law), budget))
            .collect::<Result<_>>()?;
        let mi = joint_with_index(&conditionals)?.mutual_information();
        let tv = q[i - 1].tv(&q[i]);
        let bound = (0.5 * mi).sqrt();
        steps.push(HybridStep { i, tv, mutual_information: mi, bound, slack: bound - tv });
    }
    let max_bound = steps.iter().map(|s| s.bound).fold(0.0, f64::max);
    Ok(HybridReport {
        total_tv: q[0].tv(&q[n]),
        telescoped_sum: steps.iter().map(|s| s.tv).sum(),
        n_times_max_bound: n as f64 * max_bound,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dist::{family_enumerate, FamilyTag};
    use crate::trust_models::mechanisms::{ConstantOutput, RRCounter};

    fn p11(alpha: f64) -> Vec<FiniteDistribution> {
        family_enumerate(1, 1, alpha, FamilyTag::P)
            .unwrap()
            .iter()
            .map(|p| p.densify().unwrap())
            .collect()
    }

    #[test]
    fn rr_counter_three_steps() {
        let r = hybrid_tv_certificate(&RRCounter { flip: 0.25 }, &p11(0.25), 3, &mut PathBudget::default()).unwrap();
        assert_eq!(r.steps.len(), 3);
        assert!(r.holds(1e-10), "{r:?}");
        assert!(r.total_tv > 0.0);
    }

    #[test]
    fn single_step_boundary() {
        let r = hybrid_tv_certificate(&RRCounter { flip: 0.1 }, &p11(0.4), 1, &mut PathBudget::default()).unwrap();
        assert!(r.holds(1e-10));
        assert!((r.total_tv - r.steps[0].tv).abs() < 1e-15);
    }

    #[test]
    fn constant_output_is_flat() {
        let r = hybrid_tv_certificate(&ConstantOutput, &p11(0.3), 4, &mut PathBudget::default()).unwrap();
        assert!(r.steps.iter().all(|s| s.tv == 0.0 && s.mutual_information == 0.0));
        assert_eq!(r.total_tv, 0.0);
    }
}

//! Shuffle and pan-private trust models: protocol execution, exact
//! distribution propagation for small instances, privacy audits and the
//! hybrid-argument certificate.
//!
//! Message multisets are count vectors over a finite alphabet, so the
//! shuffler is exact. Exact mode charges every enumerated branch against a
//! [`PathBudget`] capped at [`EXACT_PATH_LIMIT`].

mod audit;
mod hybrid;
mod mechanisms;
mod outcomes;
mod pan;
mod shuffle;

pub use audit::{
    audit_outcomes, audit_pan, audit_pan_at, audit_shuffle, audit_shuffle_output, epsilon_grid, AuditCurve,
    AuditPoint, MechanismManifest,
};
pub use hybrid::{hybrid_tv_certificate, HybridReport, HybridStep};
pub use mechanisms::{
    ConstantOutput, NoisyMajority, QuantGrid, QuantizedLaplace, QuantizedLaplaceCounter, RRCounter, RRParityChain,
};
pub use outcomes::{joint_with_index, law_of, point_law, DiscreteLaw, Outcomes, PathBudget, EXACT_PATH_LIMIT};
pub use pan::{
    exact_output_distribution, exact_state_distribution, exact_view_distribution, fixed_stream, propagate, run_online,
    run_pan, AdversaryView, ExactOnline, OnlineAlgorithm,
};
pub use shuffle::{
    append_messages, convolve, exact_shuffle_distribution, exact_shuffle_view, mixed_message_law, run_shuffle,
    shuffle_messages, Analyzer, BinaryRandomizedResponse, CountAnalyzer, ExactRandomizer, FnAnalyzer,
    IdentityRandomizer, MessageCounts, MultisetAnalyzer, Randomizer, ShuffleProtocol, ShuffleRun,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(ε, δ)` with robustness fraction `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub eps: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl PrivacyBudget {
    pub fn new(eps: f64, delta: f64, gamma: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {eps} must be positive")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!("delta {delta} outside [0, 1)")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("robustness {gamma} outside (0, 1]")));
        }
        Ok(PrivacyBudget { eps, delta, gamma })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(1.0, 1e-6, 1.0 / 3.0).is_ok());
        assert!(PrivacyBudget::new(0.0, 0.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn run_pan_examples() {
        let alg = RRCounter { flip: 0.0 };
        let view = run_pan(&alg, &[1, 0, 1, 1], 4, 1).unwrap();
        assert_eq!(view.state, view.output);
        assert_eq!(view.state, 3);
        let view = run_pan(&alg, &[1, 0, 1, 1], 2, 1).unwrap();
        assert_eq!((view.state, view.output), (1, 3));
        assert_eq!(run_pan(&alg, &[1], 2, 0).unwrap_err(), Error::IntrusionTime { t: 2, len: 1 });
        assert!(run_pan(&alg, &[1], 0, 0).is_err());
    }

    #[test]
    fn counter_on_zeros_keeps_init_noise() {
        let alg = QuantizedLaplaceCounter::new(1.0, QuantGrid::coarse()).unwrap();
        let states = exact_state_distribution(&alg, &fixed_stream(&[0, 0, 0]), &mut PathBudget::default()).unwrap();
        let init = Outcomes::from_pairs(alg.initial_law());
        assert_eq!(states.tv(&init), 0.0);
    }

    #[test]
    fn default_grid_view_trips_guard() {
        let alg = QuantizedLaplaceCounter::new(1.0, QuantGrid::default()).unwrap();
        let err = exact_view_distribution(&alg, &fixed_stream(&[0, 1]), 1, &mut PathBudget::default()).unwrap_err();
        assert!(matches!(err, Error::PathGuard { .. }));
    }
}

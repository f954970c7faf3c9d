//! Reductions between trust models and between learning and distinguishing.
//!
//! * [`ShuffleToPan`] turns a shuffle protocol robust to a third of its
//!   users into a pan-private online algorithm over a third as many
//!   elements, diluting the stream with uniform rows.
//! * [`selection_augment`] appends a `Rad(α)` label so that uniform input
//!   looks like a biased last coordinate.
//! * [`LearnerDistinguisher`] uses a parity learner's hypothesis to count
//!   correct predictions under Laplace noise; [`threshold_distinguisher`]
//!   then separates the two worlds.

mod learner;
mod selection;
mod shuffle_to_pan;
mod threshold;

pub use learner::{
    learner_to_distinguisher, test_phase_length, DistinguisherRun, DistinguisherState, Hypothesis, Learner,
    LearnerDistinguisher, PlantedLearner, TEST_PHASE_CONSTANT,
};
pub use selection::{augmented_law, selection_augment, SelectionAugment};
pub use shuffle_to_pan::{
    coupled_dilution_pair, dilution_estimate, sample_law, shuffle_to_pan, uniform_tv_estimate, DilutionEstimate,
    ShuffleToPan, WrapperState,
};
pub use threshold::{
    simulate_world, threshold_distinguisher, to_jsonl, DistinguishConfig, ThresholdReport, World, ZRecord,
    MIN_THRESHOLD_SAMPLES,
};

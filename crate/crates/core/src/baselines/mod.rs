//! Matching upper-bound algorithms: per-feature noisy sums in the shuffle
//! and pan-private models, and plug-in solvers for the five tasks on top.

mod pan;
mod problems;
mod rr;

pub use pan::{pan_mean_vector, AccumulatorState, FeatureMap, PanNoisyAccumulator};
pub use problems::{
    argmax_lowest, decide, empirical_means, plug_in, private_means, score, solve, solve_on, success_rate, Answer,
    Budget, Model, Problem, ProblemInstance, ResultRow, SolveOutcome, Source, Truth, RESULTS_HEADER,
};
pub use rr::{
    calibrate_rr, closed_form_flip, composition_factor, shuffle_feature_means, shuffle_mean_vector,
    shuffle_means_from_counts, shuffled_rr_delta, split_budget, CalibratedRRSum, CalibrationPath, RRCalibration,
    EXACT_CALIBRATION_LIMIT,
};

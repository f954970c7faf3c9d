//! Experiment orchestration: JSON specs, seeded execution, data files with a
//! digest manifest, and sample-complexity sweeps.
//!
//! Trial `i` of an experiment draws its generator from
//! `mix_seed(master, stream, i)`, a SplitMix64 chain, so results do not
//! depend on the number of worker threads.

mod run;
mod spec;
mod sweep;

pub use run::{execute, run_spec, run_spec_with_threads, sha256_hex, with_threads, Artifact, Manifest, RunSummary};
pub use spec::{
    AuditCase, AuditParams, DistinguishParams, Experiment, ExperimentSpec, NormCell, NormFamily, NormParams,
    ReductionParams,
};
pub use sweep::{fit_points, fit_scaling, sweep, SweepCell, SweepParams, SweepResult};

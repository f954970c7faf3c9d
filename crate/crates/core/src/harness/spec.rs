use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reductions::DistinguishConfig;
use crate::trust_models::MechanismManifest;

use super::sweep::SweepParams;

/// One experiment: its kind-specific parameters plus trial count, master
/// seed and output directory.
///
/// ```json
/// {"kind": "norm", "trials": 1, "seed": 7, "out": "runs/norm",
///  "cells": [{"family": "P", "d": 3, "k": 2, "alpha": 0.1}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub trials: u64,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(flatten)]
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Audit(AuditParams),
    Norm(NormParams),
    ReductionCheck(ReductionParams),
    Distinguish(DistinguishParams),
    Sweep(SweepParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Audit(_) => "audit",
            Experiment::Norm(_) => "norm",
            Experiment::ReductionCheck(_) => "reduction-check",
            Experiment::Distinguish(_) => "distinguish",
            Experiment::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCase {
    pub name: String,
    pub mechanism: MechanismManifest,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditParams {
    pub cases: Vec<AuditCase>,
    #[serde(default)]
    pub eps_lo: f64,
    #[serde(default = "default_eps_hi")]
    pub eps_hi: f64,
    #[serde(default = "default_eps_points")]
    pub eps_points: usize,
}

fn default_eps_hi() -> f64 {
    3.0
}
fn default_eps_points() -> usize {
    31
}

/// Which family a norm cell enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormFamily {
    P,
    Q,
    /// Q members with non-empty `ℓ`.
    QNontrivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormCell {
    pub family: NormFamily,
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub cells: Vec<NormCell>,
}

/// Dilution check of the shuffle-to-pan wrapper around shuffled binary RR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub ns: Vec<usize>,
    pub flip: f64,
    /// Mass of symbol 1 under the data distribution `P`.
    pub p_one: f64,
    /// Also estimate the uniform-input TV gap (doubles the work).
    #[serde(default)]
    pub uniform_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishParams {
    #[serde(flatten)]
    pub config: DistinguishConfig,
    #[serde(default = "default_target_advantage")]
    pub target: f64,
}

fn default_target_advantage() -> f64 {
    0.8
}

impl ExperimentSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Spec("trials must be at least 1".into()));
        }
        match &self.experiment {
            Experiment::Audit(a) if a.eps_points == 0 || !(a.eps_hi >= a.eps_lo) || a.eps_lo < 0.0 => {
                Err(Error::Spec("audit grid needs 0 ≤ eps_lo ≤ eps_hi and at least one point".into()))
            }
            Experiment::ReductionCheck(r) if !(0.0..=1.0).contains(&r.p_one) => {
                Err(Error::Spec(format!("p_one = {} outside [0, 1]", r.p_one)))
            }
            Experiment::Sweep(s) if !(s.target > 0.0 && s.target < 1.0) || !(s.tolerance > 0.0) => {
                Err(Error::Spec("sweep needs target in (0, 1) and a positive tolerance".into()))
            }
            _ => Ok(()),
        }
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::RESULTS_HEADER;
use crate::error::{Error, Result};
use crate::finite_dist::{choose_up_to, family_enumerate, q_family_nontrivial, BitVector, FamilyTag};
use crate::info_metrics::infty_to_2_norm_bruteforce;
use crate::reductions::{
    dilution_estimate, simulate_world, threshold_distinguisher, to_jsonl, uniform_tv_estimate, ShuffleToPan, World,
};
use crate::trust_models::{epsilon_grid, BinaryRandomizedResponse, CountAnalyzer, PathBudget, ShuffleProtocol};

use super::spec::{Experiment, ExperimentSpec, NormFamily};
use super::sweep::sweep;

/// A data file produced by an experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(name: &str, bytes: impl Into<Vec<u8>>) -> Self {
        Artifact { name: name.into(), bytes: bytes.into() }
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Provenance written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub spec_sha256: String,
    pub seed: u64,
    pub trials: u64,
    pub version: String,
    pub threads: usize,
    pub wall_time_secs: f64,
    pub files: BTreeMap<String, String>,
}

/// Compute an experiment's data files without touching the filesystem.
///
/// The bytes depend only on the spec: trial seeds come from the master
/// seed, and parallel results are merged in trial order.
pub fn execute(spec: &ExperimentSpec) -> Result<Vec<Artifact>> {
    spec.validate()?;
    let seed = spec.seed;
    let trials = spec.trials;
    match &spec.experiment {
        Experiment::Audit(p) => {
            if p.cases.is_empty() {
                return Ok(vec![]);
            }
            let grid = epsilon_grid(p.eps_lo, p.eps_hi, p.eps_points);
            let mut csv = String::from("case,epsilon,delta_forward,delta_backward,delta_max,seed\n");
            for case in &p.cases {
                let curve = case
                    .mechanism
                    .audit(&case.x, &case.y, &grid, &mut PathBudget::default())
                    .map_err(|e| e.in_cell(format!("case={}", case.name)))?;
                for pt in &curve.points {
                    writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        case.name, pt.epsilon, pt.delta_forward, pt.delta_backward, pt.delta_max, seed
                    )
                    .expect("write to string");
                }
            }
            Ok(vec![Artifact::new("audit.csv", csv)])
        }
        Experiment::Norm(p) => {
            if p.cells.is_empty() {
                return Ok(vec![]);
            }
            let mut csv = String::from("family,d,k,alpha,value_sq,bound_sq,witness,seed\n");
            for c in &p.cells {
                let cell = format!("family={:?},d={},k={}", c.family, c.d, c.k);
                let members = match c.family {
                    NormFamily::P => family_enumerate(c.d, c.k, c.alpha, FamilyTag::P),
                    NormFamily::Q => family_enumerate(c.d, c.k, c.alpha, FamilyTag::Q),
                    NormFamily::QNontrivial => q_family_nontrivial(c.d, c.k, c.alpha),
                }
                .map_err(|e| e.in_cell(cell.clone()))?;
                let dense = members.iter().map(|m| m.densify()).collect::<Result<Vec<_>>>().map_err(|e| e.in_cell(cell.clone()))?;
                let report = infty_to_2_norm_bruteforce(&dense).map_err(|e| e.in_cell(cell.clone()))?;
                let bound = 4.0 * c.alpha * c.alpha / choose_up_to(c.d, c.k);
                let witness = BitVector::new(report.witness_bits.clone())?.to_sign_string();
                writeln!(csv, "{:?},{},{},{},{},{},{},{}", c.family, c.d, c.k, c.alpha, report.value_sq, bound, witness, seed)
                    .expect("write to string");
            }
            Ok(vec![Artifact::new("norm.csv", csv)])
        }
        Experiment::ReductionCheck(p) => {
            if p.ns.is_empty() {
                return Ok(vec![]);
            }
            let mut csv = String::from("n,flip,p_one,trials,differ,estimate,ci_low,ci_high,uniform_tv,seed\n");
            let u = vec![(0usize, 0.5), (1, 0.5)];
            let law = vec![(0usize, 1.0 - p.p_one), (1, p.p_one)];
            for &n in &p.ns {
                let cell = format!("n={n}");
                let proto = ShuffleProtocol::new(BinaryRandomizedResponse::new(p.flip)?, CountAnalyzer { symbol: 1 }, n, seed)
                    .with_robustness(1.0 / 3.0)?;
                let w = ShuffleToPan::new(proto, u.clone()).map_err(|e| e.in_cell(cell.clone()))?;
                let est = dilution_estimate(&w, &law, trials, seed);
                let utv = if p.uniform_check { uniform_tv_estimate(&w, trials, seed).to_string() } else { String::new() };
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{}",
                    n, p.flip, p.p_one, est.trials, est.differ, est.estimate, est.ci_low, est.ci_high, utv, seed
                )
                .expect("write to string");
            }
            Ok(vec![Artifact::new("dilution.csv", csv)])
        }
        Experiment::Distinguish(p) => {
            let mix = simulate_world(&p.config, World::Mixture, trials, seed)?;
            let unif = simulate_world(&p.config, World::Uniform, trials, seed)?;
            let zm: Vec<f64> = mix.iter().map(|r| r.z).collect();
            let zu: Vec<f64> = unif.iter().map(|r| r.z).collect();
            let mut records = mix;
            records.extend(unif);
            let mut out = vec![Artifact::new("z.jsonl", to_jsonl(&records)?)];
            let report = threshold_distinguisher(&zm, &zu, p.target)?;
            out.push(Artifact::new("threshold.json", serde_json::to_string_pretty(&report)? + "\n"));
            Ok(out)
        }
        Experiment::Sweep(p) => {
            if p.ds.is_empty() {
                return Ok(vec![]);
            }
            let result = sweep(p, trials, seed)?;
            let mut csv = String::from(RESULTS_HEADER);
            csv.push('\n');
            for row in result.rows() {
                csv.push_str(&row.to_csv_line());
                csv.push('\n');
            }
            Ok(vec![
                Artifact::new("results.csv", csv),
                Artifact::new("sweep.json", serde_json::to_string_pretty(&result)? + "\n"),
            ])
        }
    }
}

/// Outcome of [`run_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub artifacts: Vec<Artifact>,
    pub manifest: Manifest,
}

/// Execute on the current rayon pool and write data files plus
/// `manifest.json` into `spec.out`.
pub fn run_spec(spec: &ExperimentSpec) -> Result<RunSummary> {
    let start = Instant::now();
    let artifacts = execute(spec)?;
    fs::create_dir_all(&spec.out)?;
    for a in &artifacts {
        fs::write(spec.out.join(&a.name), &a.bytes)?;
    }
    let manifest = Manifest {
        kind: spec.experiment.kind().into(),
        spec_sha256: sha256_hex(spec.to_json()?.as_bytes()),
        seed: spec.seed,
        trials: spec.trials,
        version: env!("CARGO_PKG_VERSION").into(),
        threads: rayon::current_num_threads(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        files: artifacts.iter().map(|a| (a.name.clone(), a.sha256())).collect(),
    };
    fs::write(spec.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunSummary { artifacts, manifest })
}

/// [`run_spec`] on a dedicated pool of `threads` workers.
pub fn run_spec_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<RunSummary> {
    with_threads(threads, || run_spec(spec))?
}

/// Run `f` inside a rayon pool of the given size.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(f))
}

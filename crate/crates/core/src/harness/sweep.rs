use serde::{Deserialize, Serialize};

use crate::baselines::{success_rate, Budget, Model, Problem, ProblemInstance, ResultRow, Truth};
use crate::error::{Error, Result};
use crate::rng::mix_seed;
use crate::stats::least_squares;

/// Parameters of an `n*(d)` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub problem: Problem,
    pub model: Model,
    pub ds: Vec<usize>,
    #[serde(default = "one")]
    pub k: usize,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    /// Success is declared when the Wilson lower bound reaches this rate.
    #[serde(default = "default_target")]
    pub target: f64,
    /// Bisection stops when `hi/lo ≤ 1 + tolerance`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_n_start")]
    pub n_start: usize,
    /// Divisor for the lower-corridor cell `n*/corridor`.
    #[serde(default = "default_corridor")]
    pub corridor: usize,
}

fn one() -> usize {
    1
}
fn default_target() -> f64 {
    0.99
}
fn default_tolerance() -> f64 {
    0.02
}
fn default_n_start() -> usize {
    16
}
fn default_corridor() -> usize {
    8
}

/// Result for one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub d: usize,
    /// Smallest confirmed sample size meeting the target.
    pub n_star: usize,
    pub pilot: Vec<ResultRow>,
    pub confirm: ResultRow,
    pub corridor: ResultRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub params: SweepParams,
    pub trials: u64,
    pub cells: Vec<SweepCell>,
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
}

impl SweepResult {
    /// Every evaluated cell as results rows, in evaluation order.
    pub fn rows(&self) -> Vec<&ResultRow> {
        self.cells
            .iter()
            .flat_map(|c| c.pilot.iter().chain([&c.confirm, &c.corridor]))
            .collect()
    }
}

const PILOT_STREAM: u64 = 0x9170;
const CONFIRM_STREAM: u64 = 0xC0F1;
const CORRIDOR_STREAM: u64 = 0xC0DD;
const MAX_DOUBLINGS: usize = 40;
const MAX_CONFIRM_BUMPS: usize = 50;

/// Pilot by doubling, bisect geometrically to `tolerance`, then confirm on
/// fresh seeds (raising `n` by the tolerance until confirmation passes).
pub fn sweep(params: &SweepParams, trials: u64, seed: u64) -> Result<SweepResult> {
    let budget = Budget::new(params.eps, params.delta)?;
    let mut cells = Vec::new();
    for &d in &params.ds {
        let cell = sweep_cell(params, d, budget, trials, seed).map_err(|e| e.in_cell(format!("d={d}")))?;
        cells.push(cell);
    }
    let mut result = SweepResult { params: params.clone(), trials, cells, slope: None, stderr: None };
    if result.cells.len() >= 4 {
        let (slope, stderr) = fit_scaling(&result)?;
        result.slope = Some(slope);
        result.stderr = Some(stderr);
    }
    Ok(result)
}

fn sweep_cell(params: &SweepParams, d: usize, budget: Budget, trials: u64, seed: u64) -> Result<SweepCell> {
    let inst = ProblemInstance::new(params.problem, d, params.k, params.alpha, Truth::Random)?;
    let mut pilot = Vec::new();
    let eval = |n: usize, pilot: &mut Vec<ResultRow>| -> Result<bool> {
        let s = mix_seed(seed, PILOT_STREAM ^ ((d as u64) << 16), pilot.len() as u64);
        let row = success_rate(&inst, params.model, n, budget, trials, s)?;
        let ok = row.ci_low >= params.target;
        pilot.push(row);
        Ok(ok)
    };

    let mut hi = params.n_start.max(2);
    let mut lo = 0usize;
    let mut doublings = 0;
    while !eval(hi, &mut pilot)? {
        lo = hi;
        hi *= 2;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::InvalidParameter(format!("no sample size up to {hi} meets the target")));
        }
    }
    let mut lo = lo.max(1);
    while hi as f64 > lo as f64 * (1.0 + params.tolerance) && hi - lo > 1 {
        let mid = ((lo as f64 * hi as f64).sqrt().round() as usize).clamp(lo + 1, hi - 1);
        if eval(mid, &mut pilot)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut n = hi;
    let mut bumps = 0;
    let confirm = loop {
        let s = mix_seed(seed, CONFIRM_STREAM ^ ((d as u64) << 16), bumps as u64);
        let row = success_rate(&inst, params.model, n, budget, trials, s)?;
        if row.ci_low >= params.target {
            break row;
        }
        bumps += 1;
        if bumps > MAX_CONFIRM_BUMPS {
            return Err(Error::InvalidParameter(format!("confirmation failed up to n = {n}")));
        }
        n = ((n as f64 * (1.0 + params.tolerance)).ceil() as usize).max(n + 1);
    };
    let low_n = (n / params.corridor.max(1)).max(1);
    let corridor = success_rate(&inst, params.model, low_n, budget, trials, mix_seed(seed, CORRIDOR_STREAM, d as u64))?;
    Ok(SweepCell { d, n_star: n, pilot, confirm, corridor })
}

/// Least-squares slope of `log n*` on `log d` with its standard error.
pub fn fit_scaling(sweep: &SweepResult) -> Result<(f64, f64)> {
    let points: Vec<(f64, f64)> = sweep.cells.iter().map(|c| (c.d as f64, c.n_star as f64)).collect();
    fit_points(&points)
}

/// The same fit on raw `(d, n*)` pairs.
pub fn fit_points(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 4 {
        return Err(Error::InsufficientPoints { need: 4, got: points.len() });
    }
    if points.iter().any(|&(d, n)| !(d > 0.0 && n > 0.0)) {
        return Err(Error::InvalidParameter("fit needs positive d and n".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, _, stderr) = least_squares(&x, &y);
    Ok((slope, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_slopes() {
        let lin: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0].iter().map(|&d| (d, 3.0 * d)).collect();
        let (s, _) = fit_points(&lin).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
        let sqrt: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0].iter().map(|&d| (d, 7.0 * f64::sqrt(d))).collect();
        let (s, se) = fit_points(&sqrt).unwrap();
        assert!((s - 0.5).abs() < 1e-9);
        assert!(se < 1e-9);
        assert_eq!(fit_points(&sqrt[..3]).err(), Some(Error::InsufficientPoints { need: 4, got: 3 }));
    }

    #[test]
    fn small_sweep_brackets_threshold() {
        let params = SweepParams {
            problem: Problem::Selection,
            model: Model::Pan,
            ds: vec![4],
            k: 1,
            alpha: 0.2,
            eps: 1.0,
            delta: 1e-6,
            target: 0.9,
            tolerance: 0.1,
            n_start: 16,
            corridor: 8,
        };
        let r = sweep(&params, 200, 1).unwrap();
        let c = &r.cells[0];
        assert!(c.confirm.ci_low >= 0.9);
        assert!(c.corridor.n == c.n_star / 8);
        assert!(r.slope.is_none());
        // the failed pilot just below n* sits within the tolerance
        let below = c.pilot.iter().filter(|row| row.ci_low < 0.9).map(|row| row.n).max().unwrap();
        assert!(c.n_star as f64 <= below as f64 * 1.1 + 1.0 || c.n_star > c.pilot.iter().map(|r| r.n).max().unwrap());
    }
}

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{binomial, trial_rng};
use crate::trust_models::{
    audit_shuffle, run_shuffle, BinaryRandomizedResponse, CountAnalyzer, PathBudget, ShuffleProtocol,
};

/// Largest cohort calibrated by exact audit.
pub const EXACT_CALIBRATION_LIMIT: usize = 12;

const BISECTION_STEPS: usize = 60;
const CLOSED_FORM_CONSTANT: f64 = 14.0;

/// How a flip probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationPath {
    /// Bisection against the exact audit at this cohort size.
    Exact,
    /// The exact result at [`EXACT_CALIBRATION_LIMIT`] users, which stays
    /// valid for larger cohorts and beat the closed form.
    ExactCarried,
    ClosedForm,
    /// `ε′ = ∞`: no randomization.
    NoPrivacy,
}

/// Worst-case exact δ of the shuffled binary RR multiset at `eps`, over all
/// neighbouring pairs of `n`-row datasets.
pub fn shuffled_rr_delta(n: usize, p: f64, eps: f64) -> Result<f64> {
    let rr = BinaryRandomizedResponse::new(p)?;
    let mut worst = 0.0f64;
    let mut budget = PathBudget::default();
    // By symmetry only the number of other ones matters.
    for ones in 0..n {
        let mut x = vec![0usize; n];
        x[..ones].fill(1);
        let mut y = x.clone();
        y[n - 1] = 1;
        let curve = audit_shuffle(&rr, &x, &y, &[eps], &mut budget)?;
        worst = worst.max(curve.points[0].delta_max);
    }
    Ok(worst)
}

/// Closed-form flip probability `14·ln(4/δ′)/(ε′²(n−1))`, unclamped.
pub fn closed_form_flip(n: usize, eps: f64, delta: f64) -> f64 {
    CLOSED_FORM_CONSTANT * (4.0 / delta).ln() / (eps * eps * (n as f64 - 1.0))
}

/// Smallest flip probability (to bisection accuracy) whose exact audit
/// meets `(eps, delta)`.
fn exact_flip(n: usize, eps: f64, delta: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if shuffled_rr_delta(n, mid, eps)? <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Flip probability for an `n`-user shuffled RR sum meeting `(eps, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RRCalibration {
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub p: f64,
    pub path: CalibrationPath,
}

/// Calibrate binary randomized response for `n` shuffled users.
///
/// Up to [`EXACT_CALIBRATION_LIMIT`] users the flip probability is bisected
/// against the exact audit. Beyond it the closed form is used, capped by
/// the exact value at the limit: adding users only post-processes the
/// smaller cohort's view, so that value remains certified.
pub fn calibrate_rr(n: usize, eps: f64, delta: f64) -> Result<RRCalibration> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("cohort n = {n} must be at least 2")));
    }
    if !(eps > 0.0) || !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("budget (eps = {eps}, delta = {delta}) out of range")));
    }
    let done = |p: f64, path| {
        if p >= 0.5 - 1e-9 {
            Err(Error::InsufficientCohort { n, eps, delta })
        } else {
            Ok(RRCalibration { n, eps, delta, p, path })
        }
    };
    if eps.is_infinite() {
        return done(0.0, CalibrationPath::NoPrivacy);
    }
    if n <= EXACT_CALIBRATION_LIMIT {
        return done(exact_flip(n, eps, delta)?, CalibrationPath::Exact);
    }
    let carried = exact_flip(EXACT_CALIBRATION_LIMIT, eps, delta)?;
    let closed = if delta > 0.0 { closed_form_flip(n, eps, delta) } else { f64::INFINITY };
    if closed < carried {
        done(closed, CalibrationPath::ClosedForm)
    } else {
        done(carried, CalibrationPath::ExactCarried)
    }
}

/// A shuffled binary-sum protocol: every user sends one RR bit and the
/// analyzer debiases the count of ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedRRSum {
    pub calibration: RRCalibration,
}

impl CalibratedRRSum {
    pub fn new(n: usize, eps: f64, delta: f64) -> Result<Self> {
        Ok(CalibratedRRSum { calibration: calibrate_rr(n, eps, delta)? })
    }

    /// Flip probability fixed by hand, e.g. `p = 0` in test mode.
    pub fn with_flip(n: usize, p: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::InvalidParameter(format!("flip probability {p} outside [0, 1/2)")));
        }
        let calibration = RRCalibration { n, eps: f64::INFINITY, delta: 0.0, p, path: CalibrationPath::NoPrivacy };
        Ok(CalibratedRRSum { calibration })
    }

    pub fn n(&self) -> usize {
        self.calibration.n
    }

    pub fn flip(&self) -> f64 {
        self.calibration.p
    }

    pub fn protocol(&self) -> ShuffleProtocol<BinaryRandomizedResponse, CountAnalyzer> {
        let rr = BinaryRandomizedResponse::new(self.flip()).expect("calibrated flip is valid");
        ShuffleProtocol::new(rr, CountAnalyzer { symbol: 1 }, self.n(), 0)
    }

    /// Unbiased estimate of the number of ones from the noisy count.
    pub fn debias(&self, count: u64) -> f64 {
        let p = self.flip();
        (count as f64 - p * self.n() as f64) / (1.0 - 2.0 * p)
    }

    /// Run the protocol on `bits ∈ {0,1}^n` and debias.
    pub fn run(&self, bits: &[usize], seed: u64) -> Result<f64> {
        let run = run_shuffle(&self.protocol(), bits, 0.0, seed)?;
        Ok(self.debias(run.output))
    }

    /// Same law as [`CalibratedRRSum::run`] given only the number of ones.
    pub fn sample_from_count(&self, ones: u64, rng: &mut dyn RngCore) -> f64 {
        let p = self.flip();
        let n = self.n() as u64;
        let count = binomial(rng, ones, 1.0 - p) + binomial(rng, n - ones, p);
        self.debias(count)
    }
}

/// Per-query budget when `queries` sums share `(eps, delta)`: the
/// square-root rule `ε/√(8D·ln(1/δ))` with `δ′ = δ/(2D)`, or basic
/// composition `ε/D` when `δ = 0`.
pub fn split_budget(eps: f64, delta: f64, queries: usize) -> (f64, f64) {
    let d = queries.max(1) as f64;
    (eps / composition_factor(d, delta), delta / (2.0 * d))
}

/// `√(8D·ln(1/δ))`, or `D` when `δ = 0`.
pub fn composition_factor(d: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        (8.0 * d * (1.0 / delta).ln()).sqrt()
    } else {
        d
    }
}

const FEATURE_STREAM: u64 = 0xFEA7;

/// Shuffle-model estimate of the mean of every ±1 feature column, one
/// calibrated RR sum per column.
pub fn shuffle_feature_means(rows: &[Vec<i8>], width: usize, eps: f64, delta: f64, seed: u64) -> Result<Vec<f64>> {
    let n = rows.len();
    let (eps_q, delta_q) = split_budget(eps, delta, width);
    let sum = CalibratedRRSum::new(n, eps_q, delta_q)?;
    (0..width)
        .map(|j| {
            let bits: Vec<usize> = rows
                .iter()
                .map(|r| {
                    if r.len() != width {
                        return Err(Error::DimensionMismatch { expected: width, got: r.len() });
                    }
                    Ok(usize::from(r[j] == 1))
                })
                .collect::<Result<_>>()?;
            let ones = sum.run(&bits, crate::rng::mix_seed(seed, FEATURE_STREAM, j as u64))?;
            Ok((2.0 * ones - n as f64) / n as f64)
        })
        .collect()
}

/// Fast path: the same estimator from per-column counts of `+1`.
pub fn shuffle_means_from_counts(ones: &[u64], n: usize, eps: f64, delta: f64, seed: u64) -> Result<Vec<f64>> {
    let (eps_q, delta_q) = split_budget(eps, delta, ones.len());
    let sum = CalibratedRRSum::new(n, eps_q, delta_q)?;
    Ok(ones
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let mut rng = trial_rng(seed, FEATURE_STREAM, j as u64);
            (2.0 * sum.sample_from_count(c, &mut rng) - n as f64) / n as f64
        })
        .collect())
}

/// Coordinate means of a `{±1}^d` dataset in the shuffle model.
pub fn shuffle_mean_vector(dataset: &[crate::finite_dist::BitVector], eps: f64, delta: f64, seed: u64) -> Result<Vec<f64>> {
    let d = dataset.first().map(|x| x.dim()).unwrap_or(0);
    let rows: Vec<Vec<i8>> = dataset.iter().map(|x| x.entries().to_vec()).collect();
    shuffle_feature_means(&rows, d, eps, delta, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::binomial_pmf;

    #[test]
    fn infinite_epsilon_means_no_flip() {
        let c = calibrate_rr(5, f64::INFINITY, 1e-6).unwrap();
        assert_eq!((c.p, c.path), (0.0, CalibrationPath::NoPrivacy));
    }

    #[test]
    fn exact_calibration_meets_target() {
        let c = calibrate_rr(8, 1.0, 1e-6).unwrap();
        assert_eq!(c.path, CalibrationPath::Exact);
        assert!(shuffled_rr_delta(8, c.p, 1.0).unwrap() <= 1e-6);
        // slightly less noise must fail, so the search is tight
        assert!(shuffled_rr_delta(8, c.p * 0.98, 1.0).unwrap() > 1e-6);
    }

    #[test]
    fn flip_nonincreasing_in_n() {
        let ps: Vec<f64> = (2..40).map(|n| calibrate_rr(n, 1.0, 1e-3).unwrap().p).collect();
        assert!(ps.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{ps:?}");
    }

    #[test]
    fn closed_form_path_and_infeasibility() {
        let c = calibrate_rr(100_000, 1.0, 1e-6).unwrap();
        assert_eq!(c.path, CalibrationPath::ClosedForm);
        assert!((c.p - closed_form_flip(100_000, 1.0, 1e-6)).abs() < 1e-15);
        assert!(matches!(calibrate_rr(20, 1e-12, 0.0), Err(Error::InsufficientCohort { .. })));
        assert!(matches!(calibrate_rr(3, 1e-12, 0.0), Err(Error::InsufficientCohort { .. })));
        assert!(calibrate_rr(1, 1.0, 1e-6).is_err());
    }

    #[test]
    fn debiasing_exact_in_expectation() {
        for n in 1..=10usize {
            for p in [0.0, 0.1, 0.3, 0.45] {
                let s = CalibratedRRSum::with_flip(n, p).unwrap();
                for ones in 0..=n {
                    // count = Bin(ones, 1−p) + Bin(n−ones, p), enumerated exactly
                    let mut e = 0.0;
                    for a in 0..=ones {
                        for b in 0..=n - ones {
                            let w = binomial_pmf(ones as u64, 1.0 - p, a as u64)
                                * binomial_pmf((n - ones) as u64, p, b as u64);
                            e += w * s.debias((a + b) as u64);
                        }
                    }
                    assert!((e - ones as f64).abs() < 1e-9, "n {n} p {p} ones {ones}: {e}");
                }
            }
        }
    }

    #[test]
    fn noiseless_means_are_empirical() {
        let rows = vec![vec![1, -1], vec![1, 1], vec![-1, 1], vec![1, 1]];
        let m = shuffle_feature_means(&rows, 2, f64::INFINITY, 1e-6, 3).unwrap();
        assert_eq!(m, vec![0.5, 0.5]);
    }

    #[test]
    fn fast_path_matches_protocol_law() {
        let s = CalibratedRRSum::with_flip(20, 0.2).unwrap();
        let bits: Vec<usize> = (0..20).map(|i| usize::from(i < 7)).collect();
        let trials = 40_000u64;
        let mut h1 = [0u64; 21];
        let mut h2 = [0u64; 21];
        for t in 0..trials {
            let a = s.run(&bits, t).unwrap();
            let b = s.sample_from_count(7, &mut trial_rng(99, 0, t));
            let idx = |v: f64| (v * 0.6 + 0.2 * 20.0).round() as usize;
            h1[idx(a)] += 1;
            h2[idx(b)] += 1;
        }
        let tv: f64 = h1.iter().zip(&h2).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>() / (2.0 * trials as f64);
        assert!(tv < 0.02, "tv {tv}");
    }

    #[test]
    fn d1_accuracy() {
        let n = 10_000;
        let rows: Vec<Vec<i8>> = (0..n).map(|i| vec![if i % 10 < 7 { 1 } else { -1 }]).collect();
        let bits: Vec<usize> = rows.iter().map(|r| usize::from(r[0] == 1)).collect();
        let sum = CalibratedRRSum::new(n, 1.0, 0.0).unwrap();
        let mean = |s: u64| (2.0 * sum.run(&bits, crate::rng::mix_seed(s, FEATURE_STREAM, 0)).unwrap() - n as f64) / n as f64;
        assert_eq!(shuffle_feature_means(&rows, 1, 1.0, 0.0, 7).unwrap()[0], mean(7));
        let ok = (0..1000).filter(|&s| (mean(s) - 0.4).abs() < 0.05).count();
        assert!(ok >= 990, "{ok}");
    }
}

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_dist::{
    family_enumerate, BitVector, Component, DistributionDescriptor, FamilyTag, ParametricHardDistribution, ParityIndex,
    Sampler,
};
use crate::reductions::Hypothesis;
use crate::rng::{binomial, mix_seed, open_unit, trial_rng};
use crate::stats::wilson_interval;
use crate::trust_models::OnlineAlgorithm;

use super::pan::{FeatureMap, PanNoisyAccumulator};
use super::rr::{shuffle_feature_means, shuffle_means_from_counts};

/// The five estimation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Selection,
    SparseMean,
    ParityRelease,
    HypothesisTest,
    ParityLearning,
}

impl Problem {
    pub const ALL: [Problem; 5] =
        [Problem::Selection, Problem::SparseMean, Problem::ParityRelease, Problem::HypothesisTest, Problem::ParityLearning];

    pub fn as_str(&self) -> &'static str {
        match self {
            Problem::Selection => "selection",
            Problem::SparseMean => "sparse-mean",
            Problem::ParityRelease => "parity-release",
            Problem::HypothesisTest => "hypothesis-test",
            Problem::ParityLearning => "parity-learning",
        }
    }

    /// Features whose means the solver estimates.
    pub fn feature_map(&self, d: usize, k: usize) -> FeatureMap {
        match self {
            Problem::Selection | Problem::SparseMean | Problem::HypothesisTest => FeatureMap::Coordinates { d },
            Problem::ParityRelease => FeatureMap::Parities { d, k },
            Problem::ParityLearning => FeatureMap::LabelledParities { d, k },
        }
    }

    /// Dimension of one data row.
    pub fn data_dim(&self, d: usize) -> usize {
        match self {
            Problem::ParityLearning => d + 1,
            _ => d,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown problem {s:?}")))
    }
}

/// Trust model a solver runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Shuffle,
    Pan,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Shuffle => "shuffle",
            Model::Pan => "pan",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffle" => Ok(Model::Shuffle),
            "pan" => Ok(Model::Pan),
            _ => Err(Error::InvalidParameter(format!("unknown model {s:?}"))),
        }
    }
}

/// `(ε, δ)`; `ε = ∞` turns all noise off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub eps: f64,
    pub delta: f64,
}

impl Budget {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0) || !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!("budget (eps = {eps}, delta = {delta}) out of range")));
        }
        Ok(Budget { eps, delta })
    }

    pub fn infinite() -> Self {
        Budget { eps: f64::INFINITY, delta: 0.0 }
    }
}

/// Data-generating distribution of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Uniform,
    Member(DistributionDescriptor),
    /// A fresh truth per trial, see [`ProblemInstance::draw_truth`].
    Random,
}

/// A problem with its parameters and the truth used for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub problem: Problem,
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub truth: Truth,
}

/// Resolved truth: `None` is the uniform distribution.
pub type Source = Option<ParametricHardDistribution>;

impl ProblemInstance {
    pub fn new(problem: Problem, d: usize, k: usize, alpha: f64, truth: Truth) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        if k == 0 || k > d {
            return Err(Error::WidthTooLarge { k, d });
        }
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::BiasOutOfRange(alpha));
        }
        let inst = ProblemInstance { problem, d, k, alpha, truth };
        if let Truth::Member(desc) = &inst.truth {
            inst.check_member(&desc.build()?)?;
        }
        Ok(inst)
    }

    fn check_member(&self, m: &ParametricHardDistribution) -> Result<()> {
        let width = m.index().width();
        let ok = m.d() == self.d
            && match self.problem {
                Problem::Selection | Problem::SparseMean | Problem::HypothesisTest => {
                    m.family() == FamilyTag::P && width == 1
                }
                Problem::ParityRelease => m.family() == FamilyTag::P && width <= self.k,
                Problem::ParityLearning => m.family() == FamilyTag::Q && width <= self.k,
            }
            && (self.problem != Problem::HypothesisTest || m.alpha() == self.alpha);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("truth {:?} does not fit {}", DistributionDescriptor::of(m, None), self.problem)))
        }
    }

    /// Candidates a random truth is drawn from (uniformly).
    pub fn candidates(&self) -> Result<Vec<Source>> {
        Ok(match self.problem {
            Problem::Selection | Problem::SparseMean => {
                family_enumerate(self.d, 1, self.alpha, FamilyTag::P)?.into_iter().filter(|m| m.index().sign() == 1).map(Some).collect()
            }
            Problem::HypothesisTest => std::iter::once(None)
                .chain(family_enumerate(self.d, 1, self.alpha, FamilyTag::P)?.into_iter().map(Some))
                .collect(),
            Problem::ParityRelease => {
                family_enumerate(self.d, self.k, self.alpha, FamilyTag::P)?.into_iter().map(Some).collect()
            }
            Problem::ParityLearning => {
                family_enumerate(self.d, self.k, self.alpha, FamilyTag::Q)?.into_iter().map(Some).collect()
            }
        })
    }

    /// The truth for one trial.
    pub fn draw_truth(&self, rng: &mut dyn rand::RngCore) -> Result<Source> {
        match &self.truth {
            Truth::Uniform => Ok(None),
            Truth::Member(desc) => Ok(Some(desc.build()?)),
            Truth::Random => {
                let c = self.candidates()?;
                let i = ((open_unit(rng) * c.len() as f64) as usize).min(c.len() - 1);
                Ok(c[i].clone())
            }
        }
    }

    pub fn feature_map(&self) -> FeatureMap {
        self.problem.feature_map(self.d, self.k)
    }
}

/// What a solver returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    /// Selected coordinate, 1-based.
    Coordinate(usize),
    /// Estimated mean vector or parity values.
    Vector(Vec<f64>),
    /// `None` for the uniform distribution.
    Member(Option<ParityIndex>),
    Hypothesis(Hypothesis),
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_lowest(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x > v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Turn estimated feature means into an answer.
pub fn decide(inst: &ProblemInstance, means: &[f64]) -> Result<Answer> {
    let expected = inst.feature_map().len();
    if means.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: means.len() });
    }
    Ok(match inst.problem {
        Problem::Selection => Answer::Coordinate(argmax_lowest(means).expect("d ≥ 1") + 1),
        Problem::SparseMean | Problem::ParityRelease => Answer::Vector(means.iter().map(|m| m.clamp(-1.0, 1.0)).collect()),
        Problem::HypothesisTest => {
            // Nearest mean among 0 and 2αb·e_j. Moving from 0 to 2αb·e_j
            // changes the squared distance by 4α(α − b·m_j), so the winner
            // is the largest |m_j| above α; ties keep the earlier candidate.
            let mut best: Option<usize> = None;
            for (j, &m) in means.iter().enumerate() {
                if m.abs() > inst.alpha && best.is_none_or(|b| m.abs() > means[b].abs()) {
                    best = Some(j);
                }
            }
            let member = match best {
                Some(j) => Some(ParityIndex::new(vec![j + 1], if means[j] > 0.0 { 1 } else { -1 }, inst.d)?),
                None => None,
            };
            Answer::Member(member)
        }
        Problem::ParityLearning => {
            let mags: Vec<f64> = means.iter().map(|m| m.abs()).collect();
            let i = argmax_lowest(&mags).expect("at least the empty parity");
            let subset = inst.feature_map().subsets()[i].clone();
            Answer::Hypothesis(Hypothesis { subset, sign: if means[i] >= 0.0 { 1 } else { -1 } })
        }
    })
}

/// Whether `answer` solves the instance when data come from `truth`.
pub fn score(inst: &ProblemInstance, truth: &Source, answer: &Answer) -> bool {
    let moment = |s: &[usize]| truth.as_ref().map_or(if s.is_empty() { 1.0 } else { 0.0 }, |t| t.fourier(s));
    match (inst.problem, answer) {
        (Problem::Selection, Answer::Coordinate(j)) => {
            let mu: Vec<f64> = (1..=inst.d).map(|i| moment(&[i])).collect();
            let max = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            *j >= 1 && *j <= inst.d && mu[j - 1] >= max - inst.alpha
        }
        (Problem::SparseMean | Problem::ParityRelease, Answer::Vector(v)) => {
            let subsets = inst.feature_map().subsets();
            v.len() == subsets.len() && subsets.iter().zip(v).all(|(s, x)| (x - moment(s)).abs() <= inst.alpha)
        }
        (Problem::HypothesisTest, Answer::Member(m)) => m.as_ref() == truth.as_ref().map(|t| t.index()),
        (Problem::ParityLearning, Answer::Hypothesis(h)) => {
            let label = inst.d + 1;
            let corr = |s: &[usize]| {
                let mut t = s.to_vec();
                t.push(label);
                moment(&t)
            };
            let err = (1.0 - f64::from(h.sign) * corr(&h.subset)) / 2.0;
            let best = inst.feature_map().subsets().iter().map(|s| (1.0 - corr(s).abs()) / 2.0).fold(1.0, f64::min);
            err < best + inst.alpha
        }
        _ => false,
    }
}

/// Empirical feature means, no privacy.
pub fn empirical_means(inst: &ProblemInstance, data: &[BitVector]) -> Result<Vec<f64>> {
    let fm = inst.feature_map();
    let mut sums = vec![0i64; fm.len()];
    for x in data {
        for (s, f) in sums.iter_mut().zip(fm.apply(x)?) {
            *s += i64::from(f);
        }
    }
    let n = data.len().max(1) as f64;
    Ok(sums.iter().map(|&s| s as f64 / n).collect())
}

/// The non-private plug-in solver.
pub fn plug_in(inst: &ProblemInstance, data: &[BitVector]) -> Result<Answer> {
    decide(inst, &empirical_means(inst, data)?)
}

/// Private feature means of explicit data in `model`.
pub fn private_means(inst: &ProblemInstance, model: Model, data: &[BitVector], budget: Budget, seed: u64) -> Result<Vec<f64>> {
    let fm = inst.feature_map();
    match model {
        Model::Pan => super::pan::pan_mean_vector(data, fm, budget.eps, budget.delta, seed),
        Model::Shuffle => {
            let rows: Vec<Vec<i8>> = data.iter().map(|x| fm.apply(x)).collect::<Result<_>>()?;
            shuffle_feature_means(&rows, fm.len(), budget.eps, budget.delta, seed)
        }
    }
}

/// Solve on explicit data.
pub fn solve_on(inst: &ProblemInstance, model: Model, data: &[BitVector], budget: Budget, seed: u64) -> Result<Answer> {
    decide(inst, &private_means(inst, model, data, budget, seed)?)
}

/// Outcome of one generated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub answer: Answer,
    pub correct: bool,
}

const DATA_STREAM: u64 = 0xDA7A;
const NOISE_STREAM: u64 = 0x0015E;

/// Draw a truth and `n` samples from it, solve in `model`, score.
///
/// Coordinate-feature problems with independent coordinates go through
/// per-coordinate sums instead of materialising rows; the estimator's law
/// is unchanged.
pub fn solve(inst: &ProblemInstance, model: Model, n: usize, budget: Budget, seed: u64) -> Result<SolveOutcome> {
    let mut rng = trial_rng(seed, DATA_STREAM, 0);
    let truth = inst.draw_truth(&mut rng)?;
    let noise_seed = mix_seed(seed, NOISE_STREAM, 0);
    let fast = matches!(inst.feature_map(), FeatureMap::Coordinates { .. })
        && truth.as_ref().is_none_or(|t| t.family() == FamilyTag::P && t.index().width() == 1);
    let means = if fast {
        let sums: Vec<i64> = match &truth {
            Some(t) => t.sample_coordinate_sums(&mut rng, n as u64)?,
            None => (0..inst.d).map(|_| 2 * binomial(&mut rng, n as u64, 0.5) as i64 - n as i64).collect(),
        };
        match model {
            Model::Pan => {
                let acc = PanNoisyAccumulator::new(inst.feature_map(), budget.eps, budget.delta)?;
                let mut nrng = crate::rng::rng_from_seed(noise_seed);
                let s0 = acc.initial_state(&mut nrng);
                let s = acc.absorb_sums(&s0, &sums, n as u64)?;
                acc.output(&s, &mut nrng)
            }
            Model::Shuffle => {
                let ones: Vec<u64> = sums.iter().map(|&s| ((n as i64 + s) / 2) as u64).collect();
                shuffle_means_from_counts(&ones, n, budget.eps, budget.delta, noise_seed)?
            }
        }
    } else {
        let dim = inst.problem.data_dim(inst.d);
        let data = match &truth {
            Some(t) => t.sample(&mut rng, n),
            None => Component::Uniform(dim).sample(&mut rng, n),
        };
        private_means(inst, model, &data, budget, noise_seed)?
    };
    let answer = decide(inst, &means)?;
    let correct = score(inst, &truth, &answer);
    Ok(SolveOutcome { answer, correct })
}

/// Header of the results CSV.
pub const RESULTS_HEADER: &str = "problem,model,d,k,alpha,eps,delta,n,success_rate,ci_low,ci_high,seed";

/// One results row: success frequency over seeded trials with a 95%
/// Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: Problem,
    pub model: Model,
    pub d: usize,
    pub k: usize,
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.problem,
            self.model,
            self.d,
            self.k,
            self.alpha,
            self.eps,
            self.delta,
            self.n,
            self.success_rate,
            self.ci_low,
            self.ci_high,
            self.seed
        )
    }
}

const TRIAL_STREAM: u64 = 0x7121A1;

/// Success frequency of [`solve`] over `trials` independent seeds.
pub fn success_rate(inst: &ProblemInstance, model: Model, n: usize, budget: Budget, trials: u64, seed: u64) -> Result<ResultRow> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let successes = (0..trials)
        .into_par_iter()
        .map(|i| solve(inst, model, n, budget, mix_seed(seed, TRIAL_STREAM, i)).map(|o| u64::from(o.correct)))
        .sum::<Result<u64>>()?;
    let (ci_low, ci_high) = wilson_interval(successes, trials, 1.96);
    Ok(ResultRow {
        problem: inst.problem,
        model,
        d: inst.d,
        k: inst.k,
        alpha: inst.alpha,
        eps: budget.eps,
        delta: budget.delta,
        n,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(problem: Problem, d: usize, k: usize, truth: Truth) -> ProblemInstance {
        ProblemInstance::new(problem, d, k, 0.2, truth).unwrap()
    }

    fn member(family: FamilyTag, d: usize, ell: Vec<usize>, b: i8) -> Truth {
        Truth::Member(DistributionDescriptor { family, d, k: ell.len().max(1), ell, b, alpha: 0.2 })
    }

    #[test]
    fn noiseless_selection_finds_coordinate() {
        let i = inst(Problem::Selection, 16, 1, member(FamilyTag::P, 16, vec![7], 1));
        for model in [Model::Pan, Model::Shuffle] {
            let o = solve(&i, model, 20_000, Budget::infinite(), 3).unwrap();
            assert_eq!(o.answer, Answer::Coordinate(7));
            assert!(o.correct);
        }
    }

    #[test]
    fn hypothesis_test_on_uniform() {
        let i = inst(Problem::HypothesisTest, 4, 1, Truth::Uniform);
        let row = success_rate(&i, Model::Pan, 20_000, Budget::infinite(), 200, 1).unwrap();
        assert_eq!(row.successes, 200);
    }

    #[test]
    fn decisions_break_ties_low() {
        let i = inst(Problem::Selection, 3, 1, Truth::Uniform);
        assert_eq!(decide(&i, &[0.1, 0.3, 0.3]).unwrap(), Answer::Coordinate(2));
        let h = inst(Problem::HypothesisTest, 2, 1, Truth::Uniform);
        // equidistant from U and from the (1, +) member
        assert_eq!(decide(&h, &[0.2, 0.0]).unwrap(), Answer::Member(None));
        assert_eq!(decide(&h, &[0.5, -0.5]).unwrap(), Answer::Member(Some(ParityIndex::new(vec![1], 1, 2).unwrap())));
        let l = inst(Problem::ParityLearning, 2, 1, Truth::Uniform);
        let a = decide(&l, &[0.1, -0.4, 0.4]).unwrap();
        assert_eq!(a, Answer::Hypothesis(Hypothesis { subset: vec![1], sign: -1 }));
    }

    #[test]
    fn scoring_rules() {
        let t = ParametricHardDistribution::q(3, vec![1, 3], -1, 0.2).unwrap();
        let i = inst(Problem::ParityLearning, 3, 2, Truth::Random);
        assert!(score(&i, &Some(t.clone()), &Answer::Hypothesis(Hypothesis { subset: vec![1, 3], sign: -1 })));
        assert!(!score(&i, &Some(t.clone()), &Answer::Hypothesis(Hypothesis { subset: vec![1, 3], sign: 1 })));
        assert!(!score(&i, &Some(t), &Answer::Hypothesis(Hypothesis { subset: vec![1], sign: -1 })));
        let s = inst(Problem::SparseMean, 2, 1, Truth::Uniform);
        assert!(score(&s, &None, &Answer::Vector(vec![0.2, -0.2])));
        assert!(!score(&s, &None, &Answer::Vector(vec![0.21, 0.0])));
    }

    #[test]
    fn infinite_budget_equals_plug_in() {
        let mut rng = crate::rng::rng_from_seed(2);
        for problem in Problem::ALL {
            let i = inst(problem, 4, 2, Truth::Random);
            let truth = i.draw_truth(&mut rng).unwrap();
            let dim = problem.data_dim(4);
            let data = match &truth {
                Some(t) => t.sample(&mut rng, 300),
                None => Component::Uniform(dim).sample(&mut rng, 300),
            };
            let want = plug_in(&i, &data).unwrap();
            for model in [Model::Pan, Model::Shuffle] {
                assert_eq!(solve_on(&i, model, &data, Budget::infinite(), 0).unwrap(), want);
            }
        }
    }

    #[test]
    fn instance_validation() {
        assert!(ProblemInstance::new(Problem::Selection, 3, 4, 0.2, Truth::Uniform).is_err());
        assert!(ProblemInstance::new(Problem::Selection, 3, 1, 0.2, member(FamilyTag::P, 3, vec![1, 2], 1)).is_err());
        assert!(ProblemInstance::new(Problem::ParityLearning, 3, 2, 0.2, member(FamilyTag::P, 3, vec![1], 1)).is_err());
        assert_eq!("parity-release".parse::<Problem>().unwrap(), Problem::ParityRelease);
    }

    #[test]
    fn csv_row_shape() {
        let i = inst(Problem::Selection, 8, 1, Truth::Random);
        let row = success_rate(&i, Model::Pan, 100, Budget::new(1.0, 1e-6).unwrap(), 10, 4).unwrap();
        assert_eq!(row.to_csv_line().split(',').count(), RESULTS_HEADER.split(',').count());
        assert!(row.to_csv_line().starts_with("selection,pan,8,1,0.2,1,0.000001,100,"));
    }
}

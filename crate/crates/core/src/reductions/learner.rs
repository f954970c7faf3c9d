use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_dist::{BitVector, ParametricHardDistribution};
use crate::rng::{laplace, rng_from_seed};
use crate::trust_models::{AdversaryView, OnlineAlgorithm};

/// Constant `c` in the test-phase length `m − n = ceil(c/(αε))`.
pub const TEST_PHASE_CONSTANT: f64 = 4.0;

/// `ceil(c/(αε))`.
pub fn test_phase_length(alpha: f64, eps: f64, constant: f64) -> Result<usize> {
    if !(alpha > 0.0 && eps > 0.0 && constant > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "test phase needs alpha, eps, constant > 0 (got {alpha}, {eps}, {constant})"
        )));
    }
    Ok((constant / (alpha * eps)).ceil() as usize)
}

/// A parity hypothesis `(L̂, B̂)` over coordinates `1..=d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Hypothesis {
    pub subset: Vec<usize>,
    pub sign: i8,
}

impl Hypothesis {
    pub fn of(dist: &ParametricHardDistribution) -> Self {
        Hypothesis { subset: dist.index().subset().to_vec(), sign: dist.index().sign() }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::MalformedLearner(format!("sign {} is not ±1", self.sign)));
        }
        if let Some(j) = self.subset.iter().find(|&&j| j == 0 || j > d) {
            return Err(Error::MalformedLearner(format!("coordinate {j} outside 1..={d}")));
        }
        let mut s = self.subset.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.subset.len() {
            return Err(Error::MalformedLearner("repeated coordinate".into()));
        }
        Ok(())
    }

    /// Whether `∏_{j∈L̂} x_j = x_{d+1}·B̂` on an element of `{±1}^{d+1}`.
    pub fn predicts(&self, x: &BitVector) -> bool {
        x.parity(&self.subset) == x.get(x.dim()) * self.sign
    }
}

/// A pan-private learner for the signed-parity task over `{±1}^{d+1}`.
pub trait Learner: OnlineAlgorithm<Input = BitVector, Output = Hypothesis> {}

impl<T: OnlineAlgorithm<Input = BitVector, Output = Hypothesis>> Learner for T {}

/// Ignores its input and announces a fixed hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedLearner {
    pub hypothesis: Hypothesis,
}

impl OnlineAlgorithm for PlantedLearner {
    type Input = BitVector;
    type State = ();
    type Output = Hypothesis;

    fn initial_state(&self, _rng: &mut dyn RngCore) {}

    fn update(&self, _step: usize, _x: &BitVector, _s: &(), _rng: &mut dyn RngCore) {}

    fn output(&self, _s: &(), _rng: &mut dyn RngCore) -> Hypothesis {
        self.hypothesis.clone()
    }
}

/// State of the distinguisher built from a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistinguisherState<S> {
    Training(S),
    Testing { hypothesis: Hypothesis, count: f64 },
    Failed(String),
}

/// Trains `learner` on the first `n` elements, then counts how often its
/// hypothesis predicts the label on the remaining `m − n`, under Laplace
/// noise of scale `1/ε` at the hand-over and again at output.
#[derive(Debug, Clone)]
pub struct LearnerDistinguisher<L> {
    learner: L,
    d: usize,
    n: usize,
    m: usize,
    eps: f64,
}

impl<L: Learner> LearnerDistinguisher<L> {
    /// `eps = ∞` switches both noises off.
    pub fn new(learner: L, d: usize, n: usize, m: usize, eps: f64) -> Result<Self> {
        if n == 0 || m <= n {
            return Err(Error::InvalidParameter(format!("need 0 < n < m (got n = {n}, m = {m})")));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
        }
        Ok(LearnerDistinguisher { learner, d, n, m, eps })
    }

    /// Test phase of length `ceil(constant/(αε))` after `n` training elements.
    pub fn with_test_phase(learner: L, d: usize, n: usize, alpha: f64, eps: f64, constant: f64) -> Result<Self> {
        let extra = test_phase_length(alpha, eps, constant)?;
        Self::new(learner, d, n, n + extra, eps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn scale(&self) -> f64 {
        1.0 / self.eps
    }
}

impl<L: Learner> OnlineAlgorithm for LearnerDistinguisher<L> {
    type Input = BitVector;
    type State = DistinguisherState<L::State>;
    type Output = Option<f64>;

    fn initial_state(&self, rng: &mut dyn RngCore) -> Self::State {
        DistinguisherState::Training(self.learner.initial_state(rng))
    }

    fn update(&self, step: usize, x: &BitVector, s: &Self::State, rng: &mut dyn RngCore) -> Self::State {
        match s {
            DistinguisherState::Training(inner) => {
                let inner = self.learner.update(step, x, inner, rng);
                if step < self.n {
                    return DistinguisherState::Training(inner);
                }
                let hypothesis = self.learner.output(&inner, rng);
                if let Err(e) = hypothesis.validate(self.d) {
                    return DistinguisherState::Failed(e.to_string());
                }
                DistinguisherState::Testing { hypothesis, count: laplace(rng, self.scale()) }
            }
            DistinguisherState::Testing { hypothesis, count } => {
                let hit = if hypothesis.predicts(x) { 1.0 } else { 0.0 };
                DistinguisherState::Testing { hypothesis: hypothesis.clone(), count: count + hit }
            }
            DistinguisherState::Failed(msg) => DistinguisherState::Failed(msg.clone()),
        }
    }

    /// `None` when the learner produced a malformed hypothesis.
    fn output(&self, s: &Self::State, rng: &mut dyn RngCore) -> Option<f64> {
        match s {
            DistinguisherState::Testing { count, .. } => Some(count + laplace(rng, self.scale())),
            _ => None,
        }
    }
}

/// One run of the distinguisher with an intrusion at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherRun<S> {
    pub z: f64,
    pub view: AdversaryView<DistinguisherState<S>, Option<f64>>,
}

/// Run the distinguisher on a stream of length `m`, returning `Z`.
pub fn learner_to_distinguisher<L: Learner>(
    dist: &LearnerDistinguisher<L>,
    stream: &[BitVector],
    t: usize,
    seed: u64,
) -> Result<DistinguisherRun<L::State>> {
    if stream.len() != dist.m {
        return Err(Error::DimensionMismatch { expected: dist.m, got: stream.len() });
    }
    if let Some(x) = stream.iter().find(|x| x.dim() != dist.d + 1) {
        return Err(Error::DimensionMismatch { expected: dist.d + 1, got: x.dim() });
    }
    let view = crate::trust_models::run_pan(dist, stream, t, seed)?;
    // A failure at hand-over leaves the final state Failed as well; rerun
    // the state chain to report its message.
    match view.output {
        Some(z) => Ok(DistinguisherRun { z, view }),
        None => {
            let mut rng = rng_from_seed(seed);
            let mut s = dist.initial_state(&mut rng);
            for (i, x) in stream.iter().enumerate() {
                s = dist.update(i + 1, x, &s, &mut rng);
            }
            match s {
                DistinguisherState::Failed(msg) => Err(Error::MalformedLearner(msg)),
                _ => Err(Error::MalformedLearner("no hypothesis produced".into())),
            }
        }
    }
}

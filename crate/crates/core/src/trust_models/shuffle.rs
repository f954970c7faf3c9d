use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::outcomes::{expand, DiscreteLaw, Outcomes, PathBudget};
use crate::error::{Error, Result};
use crate::rng::{bernoulli, rng_from_seed, trial_rng, TrialRng};

const USER_STREAM: u64 = 0x5348_5546;

/// A message multiset as a count vector over the alphabet `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageCounts(Vec<u64>);

impl MessageCounts {
    pub fn zeros(alphabet: usize) -> Self {
        MessageCounts(vec![0; alphabet])
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        MessageCounts(counts)
    }

    pub fn from_messages(messages: &[usize], alphabet: usize) -> Result<Self> {
        let mut c = Self::zeros(alphabet);
        c.push_all(messages)?;
        Ok(c)
    }

    fn push_all(&mut self, messages: &[usize]) -> Result<()> {
        for &m in messages {
            let alphabet = self.0.len();
            *self
                .0
                .get_mut(m)
                .ok_or(Error::OutOfAlphabet { message: m, alphabet })? += 1;
        }
        Ok(())
    }

    pub fn alphabet(&self) -> usize {
        self.0.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, symbol: usize) -> u64 {
        self.0[symbol]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn merged(&self, other: &MessageCounts) -> MessageCounts {
        MessageCounts(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// The multiset listed in sorted order.
    pub fn materialize(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(m, &c)| std::iter::repeat_n(m, c as usize))
            .collect()
    }
}

/// Local randomizer `Π_R: X → Y*` over a finite alphabet.
pub trait Randomizer: Sync {
    type Input: Clone + Sync;

    fn alphabet_size(&self) -> usize;

    /// Largest number of messages per user, `None` if unbounded.
    fn max_messages(&self) -> Option<usize>;

    fn randomize(&self, x: &Self::Input, rng: &mut dyn RngCore) -> Vec<usize>;
}

/// A randomizer whose per-user message multiset law is known exactly.
pub trait ExactRandomizer: Randomizer {
    fn message_law(&self, x: &Self::Input) -> Vec<(MessageCounts, f64)>;
}

/// Analyzer `Π_A`, consuming only the multiset so it is permutation invariant.
pub trait Analyzer: Sync {
    type Output;

    fn analyze(&self, counts: &MessageCounts) -> Self::Output;
}

/// Wraps a closure as an [`Analyzer`].
pub struct FnAnalyzer<F>(pub F);

impl<O, F: Fn(&MessageCounts) -> O + Sync> Analyzer for FnAnalyzer<F> {
    type Output = O;

    fn analyze(&self, counts: &MessageCounts) -> O {
        (self.0)(counts)
    }
}

/// Returns the multiset unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct MultisetAnalyzer;

impl Analyzer for MultisetAnalyzer {
    type Output = MessageCounts;

    fn analyze(&self, counts: &MessageCounts) -> MessageCounts {
        counts.clone()
    }
}

/// Number of copies of one symbol.
#[derive(Debug, Clone, Copy)]
pub struct CountAnalyzer {
    pub symbol: usize,
}

impl Analyzer for CountAnalyzer {
    type Output = u64;

    fn analyze(&self, counts: &MessageCounts) -> u64 {
        counts.get(self.symbol)
    }
}

/// Sends its input unchanged as a single message.
#[derive(Debug, Clone, Copy)]
pub struct IdentityRandomizer {
    pub alphabet: usize,
}

impl Randomizer for IdentityRandomizer {
    type Input = usize;

    fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    fn max_messages(&self) -> Option<usize> {
        Some(1)
    }

    fn randomize(&self, x: &usize, _rng: &mut dyn RngCore) -> Vec<usize> {
        vec![*x]
    }
}

impl ExactRandomizer for IdentityRandomizer {
    fn message_law(&self, x: &usize) -> Vec<(MessageCounts, f64)> {
        let mut c = MessageCounts::zeros(self.alphabet);
        c.0[*x] += 1;
        vec![(c, 1.0)]
    }
}

/// Binary randomized response: reports `x ⊕ 1` with probability `flip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryRandomizedResponse {
    flip: f64,
}

impl BinaryRandomizedResponse {
    pub fn new(flip: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&flip) {
            return Err(Error::InvalidParameter(format!("flip probability {flip} outside [0, 1/2]")));
        }
        Ok(BinaryRandomizedResponse { flip })
    }

    pub fn flip(&self) -> f64 {
        self.flip
    }

    /// `ln((1 − p)/p)`, the local privacy level.
    pub fn local_epsilon(&self) -> f64 {
        ((1.0 - self.flip) / self.flip).ln()
    }
}

impl Randomizer for BinaryRandomizedResponse {
    type Input = usize;

    fn alphabet_size(&self) -> usize {
        2
    }

    fn max_messages(&self) -> Option<usize> {
        Some(1)
    }

    fn randomize(&self, x: &usize, rng: &mut dyn RngCore) -> Vec<usize> {
        let flipped = bernoulli(rng, self.flip);
        vec![(*x & 1) ^ usize::from(flipped)]
    }
}

impl ExactRandomizer for BinaryRandomizedResponse {
    fn message_law(&self, x: &usize) -> Vec<(MessageCounts, f64)> {
        let keep = MessageCounts(if *x & 1 == 1 { vec![0, 1] } else { vec![1, 0] });
        let flip = MessageCounts(vec![keep.0[1], keep.0[0]]);
        vec![(keep, 1.0 - self.flip), (flip, self.flip)]
    }
}

/// `(Π_R, Π_A)` with the intended cohort size and public randomness.
#[derive(Debug, Clone)]
pub struct ShuffleProtocol<R, A> {
    pub randomizer: R,
    pub analyzer: A,
    pub n: usize,
    pub public_seed: u64,
    robustness: f64,
}

impl<R: Randomizer, A: Analyzer> ShuffleProtocol<R, A> {
    /// A protocol that expects all `n` users (`γ = 1`).
    pub fn new(randomizer: R, analyzer: A, n: usize, public_seed: u64) -> Self {
        ShuffleProtocol { randomizer, analyzer, n, public_seed, robustness: 1.0 }
    }

    /// Declare robustness to a `γ` fraction of participating users.
    pub fn with_robustness(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("robustness {gamma} outside (0, 1]")));
        }
        self.robustness = gamma;
        Ok(self)
    }

    pub fn robustness(&self) -> f64 {
        self.robustness
    }

    pub fn public_rng(&self) -> TrialRng {
        rng_from_seed(self.public_seed)
    }

    /// Honest cohort size after a drop-out fraction, floored.
    pub fn surviving(&self, dropout: f64) -> usize {
        (self.n as f64 * (1.0 - dropout) + 1e-9).floor() as usize
    }
}

/// Shuffled multiset and analyzer output of one execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleRun<O> {
    pub messages: MessageCounts,
    pub output: O,
}

/// Randomize every row, shuffle (as a count vector), analyze.
///
/// `dataset` holds only the surviving users; its length must equal
/// `floor(n·(1 − dropout))` with `dropout ≤ 1 − γ`.
pub fn run_shuffle<R: Randomizer, A: Analyzer>(
    protocol: &ShuffleProtocol<R, A>,
    dataset: &[R::Input],
    dropout: f64,
    seed: u64,
) -> Result<ShuffleRun<A::Output>> {
    if !(0.0..=1.0 - protocol.robustness + 1e-12).contains(&dropout) {
        return Err(Error::InvalidCohort(format!(
            "drop-out fraction {dropout} outside [0, {}]",
            1.0 - protocol.robustness
        )));
    }
    let expected = protocol.surviving(dropout);
    if dataset.len() != expected {
        return Err(Error::InvalidCohort(format!(
            "{} rows supplied, {expected} expected",
            dataset.len()
        )));
    }
    let messages = shuffle_messages(&protocol.randomizer, dataset, seed)?;
    let output = protocol.analyzer.analyze(&messages);
    Ok(ShuffleRun { messages, output })
}

/// `Π_S ∘ Π_R^n` on a dataset, with user `i` randomized from its own stream.
pub fn shuffle_messages<R: Randomizer>(randomizer: &R, dataset: &[R::Input], seed: u64) -> Result<MessageCounts> {
    let mut counts = MessageCounts::zeros(randomizer.alphabet_size());
    for (i, x) in dataset.iter().enumerate() {
        let mut rng = trial_rng(seed, USER_STREAM, i as u64);
        append_messages(randomizer, x, &mut rng, &mut counts)?;
    }
    Ok(counts)
}

/// Randomize one row and add its messages to `counts`.
pub fn append_messages<R: Randomizer + ?Sized>(
    randomizer: &R,
    x: &R::Input,
    rng: &mut dyn RngCore,
    counts: &mut MessageCounts,
) -> Result<()> {
    let msgs = randomizer.randomize(x, rng);
    if let Some(max) = randomizer.max_messages() {
        if msgs.len() > max {
            return Err(Error::TooManyMessages { got: msgs.len(), max });
        }
    }
    counts.push_all(&msgs)
}

/// Per-user message law when the input is drawn from `law`.
pub fn mixed_message_law<R: ExactRandomizer>(randomizer: &R, law: &DiscreteLaw<R::Input>) -> Outcomes<MessageCounts> {
    let mut out = Outcomes::new();
    for (x, w) in law {
        for (c, p) in randomizer.message_law(x) {
            out.add(c, w * p);
        }
    }
    out
}

/// Exact law of the shuffled multiset when user `i` draws its row from
/// `laws[i]` independently.
pub fn exact_shuffle_distribution<R: ExactRandomizer>(
    randomizer: &R,
    laws: &[DiscreteLaw<R::Input>],
    budget: &mut PathBudget,
) -> Result<Outcomes<MessageCounts>> {
    let mut acc = Outcomes::point(MessageCounts::zeros(randomizer.alphabet_size()));
    for law in laws {
        let step = mixed_message_law(randomizer, law);
        acc = convolve(&acc, &step, budget)?;
    }
    Ok(acc)
}

/// Exact law of `Π_S ∘ Π_R^n` on a fixed dataset.
pub fn exact_shuffle_view<R: ExactRandomizer>(
    randomizer: &R,
    dataset: &[R::Input],
    budget: &mut PathBudget,
) -> Result<Outcomes<MessageCounts>> {
    let laws: Vec<_> = dataset.iter().map(|x| vec![(x.clone(), 1.0)]).collect();
    exact_shuffle_distribution(randomizer, &laws, budget)
}

/// Law of the union of two independent multisets.
pub fn convolve(
    a: &Outcomes<MessageCounts>,
    b: &Outcomes<MessageCounts>,
    budget: &mut PathBudget,
) -> Result<Outcomes<MessageCounts>> {
    budget.spend(a.len() as u64 * b.len() as u64)?;
    let b: Vec<(MessageCounts, f64)> = b.iter().map(|(k, p)| (k.clone(), *p)).collect();
    Ok(expand(a, |c| b.iter().map(|(m, q)| (c.merged(m), *q)).collect()))
}

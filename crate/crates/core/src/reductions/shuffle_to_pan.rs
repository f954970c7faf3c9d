use std::collections::BTreeMap;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{binomial, open_unit, trial_rng};
use crate::stats::{binomial_masses, wilson_interval};
use crate::trust_models::{
    append_messages, convolve, exact_shuffle_distribution, mixed_message_law, run_online, run_pan, Analyzer, AdversaryView,
    DiscreteLaw, ExactOnline, ExactRandomizer, MessageCounts, OnlineAlgorithm, Outcomes, PathBudget, Randomizer,
    ShuffleProtocol,
};

/// Draw one value from a finite law.
pub fn sample_law<I: Clone>(law: &DiscreteLaw<I>, rng: &mut dyn RngCore) -> I {
    let u = open_unit(rng);
    let mut acc = 0.0;
    for (x, p) in law {
        acc += p;
        if u < acc {
            return x.clone();
        }
    }
    law.iter()
        .rev()
        .find(|(_, p)| *p > 0.0)
        .expect("law has positive mass")
        .0
        .clone()
}

/// State of the wrapped algorithm: merged messages so far, the clipped
/// binomial cut-off `N'`, and the number of elements consumed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WrapperState {
    pub counts: MessageCounts,
    pub n_prime: usize,
    pub step: usize,
}

/// The online algorithm `M^Π` built from a robust shuffle protocol `Π`
/// expecting `n` users, over streams of length `n/3`.
///
/// Randomness is consumed in a fixed order: the `n/3` preload rows (uniform
/// draw, then randomizer coins, row by row), then `N'`, then per element an
/// optional uniform draw and the coins, then the `n/3` padding rows.
pub struct ShuffleToPan<R: Randomizer, A> {
    protocol: ShuffleProtocol<R, A>,
    uniform: DiscreteLaw<R::Input>,
}

impl<R: Randomizer, A: Analyzer> ShuffleToPan<R, A> {
    /// Requires `3 | n` and a protocol declared robust to a third of its users.
    pub fn new(protocol: ShuffleProtocol<R, A>, uniform: DiscreteLaw<R::Input>) -> Result<Self> {
        if !protocol.n.is_multiple_of(3) {
            return Err(Error::NotDivisibleByThree(protocol.n));
        }
        if protocol.robustness() > 1.0 / 3.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "protocol is only robust to a {} fraction of users; 1/3 is required",
                protocol.robustness()
            )));
        }
        if uniform.is_empty() || (uniform.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution("uniform law must have unit mass".into()));
        }
        Ok(ShuffleToPan { protocol, uniform })
    }

    pub fn n(&self) -> usize {
        self.protocol.n
    }

    pub fn stream_len(&self) -> usize {
        self.protocol.n / 3
    }

    pub fn protocol(&self) -> &ShuffleProtocol<R, A> {
        &self.protocol
    }

    pub fn uniform(&self) -> &DiscreteLaw<R::Input> {
        &self.uniform
    }

    fn push_row(&self, x: &R::Input, rng: &mut dyn RngCore, counts: &mut MessageCounts) {
        append_messages(&self.protocol.randomizer, x, rng, counts)
            .expect("randomizer violated its declared alphabet or message bound");
    }

    fn push_uniform_rows(&self, k: usize, rng: &mut dyn RngCore, counts: &mut MessageCounts) {
        for _ in 0..k {
            let w = sample_law(&self.uniform, rng);
            self.push_row(&w, rng, counts);
        }
    }

    /// The padded final multiset `Y` before the analyzer runs.
    pub fn final_messages(&self, s: &WrapperState, rng: &mut dyn RngCore) -> MessageCounts {
        let mut counts = s.counts.clone();
        self.push_uniform_rows(self.stream_len(), rng, &mut counts);
        counts
    }
}

impl<R, A> OnlineAlgorithm for ShuffleToPan<R, A>
where
    R: Randomizer,
    A: Analyzer,
    A::Output: Clone + std::fmt::Debug + Send + Sync,
    R::Input: Send,
{
    type Input = R::Input;
    type State = WrapperState;
    type Output = A::Output;

    fn initial_state(&self, rng: &mut dyn RngCore) -> WrapperState {
        let third = self.stream_len();
        let mut counts = MessageCounts::zeros(self.protocol.randomizer.alphabet_size());
        self.push_uniform_rows(third, rng, &mut counts);
        let n_prime = (binomial(rng, self.protocol.n as u64, 2.0 / 9.0) as usize).min(third);
        WrapperState { counts, n_prime, step: 0 }
    }

    fn update(&self, step: usize, x: &R::Input, s: &WrapperState, rng: &mut dyn RngCore) -> WrapperState {
        let mut counts = s.counts.clone();
        if step <= s.n_prime {
            self.push_row(x, rng, &mut counts);
        } else {
            self.push_uniform_rows(1, rng, &mut counts);
        }
        WrapperState { counts, n_prime: s.n_prime, step }
    }

    fn output(&self, s: &WrapperState, rng: &mut dyn RngCore) -> A::Output {
        self.protocol.analyzer.analyze(&self.final_messages(s, rng))
    }
}

impl<R, A> ShuffleToPan<R, A>
where
    R: ExactRandomizer,
    A: Analyzer,
{
    /// `Pr[N' = k]` for `k = 0..=n/3`, with the clipped upper tail on `n/3`.
    pub fn n_prime_law(&self) -> Vec<f64> {
        let third = self.stream_len();
        let masses = binomial_masses(self.protocol.n as u64, 2.0 / 9.0);
        let mut law: Vec<f64> = masses[..third].to_vec();
        law.push(masses[third..].iter().sum());
        law
    }

    fn uniform_rows_law(&self, k: usize) -> Outcomes<MessageCounts> {
        let laws = vec![self.uniform.clone(); k];
        exact_shuffle_distribution(&self.protocol.randomizer, &laws, &mut PathBudget::with_limit(u64::MAX))
            .expect("an unlimited budget never trips")
    }
}

impl<R, A> ExactOnline for ShuffleToPan<R, A>
where
    R: ExactRandomizer,
    R::Input: Send,
    A: Analyzer,
    A::Output: Ord + Clone + std::fmt::Debug + Send + Sync,
{
    fn initial_law(&self) -> Vec<(WrapperState, f64)> {
        let preload = self.uniform_rows_law(self.stream_len());
        let mut out = Vec::new();
        for (n_prime, q) in self.n_prime_law().into_iter().enumerate() {
            for (counts, p) in preload.iter() {
                out.push((WrapperState { counts: counts.clone(), n_prime, step: 0 }, p * q));
            }
        }
        out
    }

    fn update_law(&self, step: usize, x: &R::Input, s: &WrapperState) -> Vec<(WrapperState, f64)> {
        let row = if step <= s.n_prime {
            Outcomes::from_pairs(self.protocol.randomizer.message_law(x))
        } else {
            mixed_message_law(&self.protocol.randomizer, &self.uniform)
        };
        row.iter()
            .map(|(m, p)| (WrapperState { counts: s.counts.merged(m), n_prime: s.n_prime, step }, *p))
            .collect()
    }

    fn output_law(&self, s: &WrapperState) -> Vec<(A::Output, f64)> {
        let pad = self.uniform_rows_law(self.stream_len());
        let merged = convolve(&Outcomes::point(s.counts.clone()), &pad, &mut PathBudget::with_limit(u64::MAX))
            .expect("an unlimited budget never trips");
        merged
            .map(|c| self.protocol.analyzer.analyze(c))
            .iter()
            .map(|(o, p)| (o.clone(), *p))
            .collect()
    }
}

/// Run `M^Π` on a stream of length `n/3` with one intrusion at `t`.
pub fn shuffle_to_pan<R, A>(
    wrapper: &ShuffleToPan<R, A>,
    stream: &[R::Input],
    t: usize,
    seed: u64,
) -> Result<AdversaryView<WrapperState, A::Output>>
where
    R: Randomizer,
    R::Input: Send,
    A: Analyzer,
    A::Output: Clone + std::fmt::Debug + Send + Sync,
{
    if stream.len() != wrapper.stream_len() {
        return Err(Error::DimensionMismatch { expected: wrapper.stream_len(), got: stream.len() });
    }
    run_pan(wrapper, stream, t, seed)
}

const DILUTION_STREAM: u64 = 0xD11;
const DILUTION_ALG: u64 = 0xA16;

/// One coupled draw of `(M^Π(P^{n/3}), Π(P^n_{(2/9)}))` final multisets.
///
/// Both sides start from clones of the same algorithm generator and the
/// same `P` stream. The `Π` side uses the wrapper's binomial draw `B`
/// unclipped: its first `min(B, n/3)` stream slots carry the same `P` rows
/// as `M^Π`, and the `(B − n/3)^+` surplus `P` rows displace padding rows
/// first and preload rows after that. When `B ≤ n/3` the two multisets
/// coincide, so `Pr[differ]` upper-bounds their total variation distance.
pub fn coupled_dilution_pair<R, A>(
    wrapper: &ShuffleToPan<R, A>,
    p: &DiscreteLaw<R::Input>,
    seed: u64,
    trial: u64,
) -> (MessageCounts, MessageCounts)
where
    R: Randomizer,
    R::Input: Send,
    A: Analyzer,
    A::Output: Clone + std::fmt::Debug + Send + Sync,
{
    let third = wrapper.stream_len();
    let n = wrapper.n();
    let mut stream_rng = trial_rng(seed, DILUTION_STREAM, trial);
    let stream: Vec<R::Input> = (0..third).map(|_| sample_law(p, &mut stream_rng)).collect();
    let alg_rng = trial_rng(seed, DILUTION_ALG, trial);

    // M^Π through its own online interface.
    let mut rng = alg_rng.clone();
    let mut state = wrapper.initial_state(&mut rng);
    for (i, x) in stream.iter().enumerate() {
        state = wrapper.update(i + 1, x, &state, &mut rng);
    }
    let m_side = wrapper.final_messages(&state, &mut rng);

    // Π on n rows, replaying the same generator: preload, B, stream slots,
    // padding. Surplus P rows come from the stream generator.
    let mut rng = alg_rng;
    let alphabet = wrapper.protocol().randomizer.alphabet_size();
    let mut preload = MessageCounts::zeros(alphabet);
    wrapper.push_uniform_rows(third, &mut rng, &mut preload);
    let b = binomial(&mut rng, n as u64, 2.0 / 9.0) as usize;
    let surplus = b.saturating_sub(third);
    let into_padding = surplus.min(third);
    let into_preload = surplus - into_padding;

    let mut body = MessageCounts::zeros(alphabet);
    for (i, x) in stream.iter().enumerate() {
        if i < b {
            wrapper.push_row(x, &mut rng, &mut body);
        } else {
            wrapper.push_uniform_rows(1, &mut rng, &mut body);
        }
    }
    wrapper.push_uniform_rows(third - into_padding, &mut rng, &mut body);
    for _ in 0..into_padding {
        let x = sample_law(p, &mut stream_rng);
        wrapper.push_row(&x, &mut stream_rng, &mut body);
    }
    if into_preload > 0 {
        preload = MessageCounts::zeros(alphabet);
        wrapper.push_uniform_rows(third - into_preload, &mut stream_rng, &mut preload);
        for _ in 0..into_preload {
            let x = sample_law(p, &mut stream_rng);
            wrapper.push_row(&x, &mut stream_rng, &mut preload);
        }
    }
    let counts = preload.merged(&body);
    (m_side, counts)
}

/// Coupled upper estimate of `TV(M^Π(P^{n/3}), Π(P^n_{(2/9)}))`: the
/// disagreement frequency of [`coupled_dilution_pair`] with a 95% Wilson
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilutionEstimate {
    pub n: usize,
    pub trials: u64,
    pub differ: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn dilution_estimate<R, A>(wrapper: &ShuffleToPan<R, A>, p: &DiscreteLaw<R::Input>, trials: u64, seed: u64) -> DilutionEstimate
where
    R: Randomizer,
    R::Input: Send,
    A: Analyzer,
    A::Output: Clone + std::fmt::Debug + Send + Sync,
{
    let differ: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (a, b) = coupled_dilution_pair(wrapper, p, seed, i);
            u64::from(a != b)
        })
        .sum();
    let (ci_low, ci_high) = wilson_interval(differ, trials, 1.96);
    DilutionEstimate { n: wrapper.n(), trials, differ, estimate: differ as f64 / trials as f64, ci_low, ci_high }
}

/// Plug-in TV between empirical laws of `M^Π(U^{n/3})` and `Π(U^n)`, each
/// from `trials` independent runs.
pub fn uniform_tv_estimate<R, A>(wrapper: &ShuffleToPan<R, A>, trials: u64, seed: u64) -> f64
where
    R: Randomizer,
    R::Input: Send,
    A: Analyzer,
    A::Output: Ord + Clone + std::fmt::Debug + Send + Sync,
{
    let third = wrapper.stream_len();
    let n = wrapper.n();
    let wrapped: Vec<A::Output> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, UNIFORM_WRAPPED, i);
            let stream: Vec<R::Input> = (0..third).map(|_| sample_law(wrapper.uniform(), &mut rng)).collect();
            run_online(wrapper, &stream, &mut rng)
        })
        .collect();
    let direct: Vec<A::Output> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, UNIFORM_DIRECT, i);
            let mut counts = MessageCounts::zeros(wrapper.protocol().randomizer.alphabet_size());
            wrapper.push_uniform_rows(n, &mut rng, &mut counts);
            wrapper.protocol().analyzer.analyze(&counts)
        })
        .collect();
    let mut hist: BTreeMap<A::Output, (u64, u64)> = BTreeMap::new();
    for o in wrapped {
        hist.entry(o).or_default().0 += 1;
    }
    for o in direct {
        hist.entry(o).or_default().1 += 1;
    }
    let total = trials as f64;
    0.5 * hist.values().map(|&(a, b)| (a as f64 - b as f64).abs() / total).sum::<f64>()
}

const UNIFORM_WRAPPED: u64 = 0x0A1;
const UNIFORM_DIRECT: u64 = 0x0A2;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust_models::{BinaryRandomizedResponse, IdentityRandomizer, MultisetAnalyzer};

    fn echo(n: usize) -> ShuffleToPan<IdentityRandomizer, MultisetAnalyzer> {
        let proto = ShuffleProtocol::new(IdentityRandomizer { alphabet: 2 }, MultisetAnalyzer, n, 0)
            .with_robustness(1.0 / 3.0)
            .unwrap();
        ShuffleToPan::new(proto, vec![(0, 0.5), (1, 0.5)]).unwrap()
    }

    #[test]
    fn rejects_bad_n_and_robustness() {
        let proto = ShuffleProtocol::new(IdentityRandomizer { alphabet: 2 }, MultisetAnalyzer, 7, 0)
            .with_robustness(1.0 / 3.0)
            .unwrap();
        assert_eq!(ShuffleToPan::new(proto, vec![(0, 1.0)]).err(), Some(Error::NotDivisibleByThree(7)));
        let proto = ShuffleProtocol::new(IdentityRandomizer { alphabet: 2 }, MultisetAnalyzer, 6, 0);
        assert!(ShuffleToPan::new(proto, vec![(0, 1.0)]).is_err());
    }

    #[test]
    fn tiny_echo_trace() {
        // n = 3, t = 1: state holds the one preloaded message and one fresh one.
        let w = echo(3);
        for seed in 0..20 {
            let view = shuffle_to_pan(&w, &[1], 1, seed).unwrap();
            assert_eq!(view.state.counts.total(), 2);
            assert_eq!(view.output.total(), 3);
            if view.state.n_prime == 1 {
                assert!(view.state.counts.get(1) >= 1);
            }
        }
        assert!(shuffle_to_pan(&w, &[1, 0], 1, 0).is_err());
    }

    #[test]
    fn clipping_matches_binomial_tail() {
        for n in [3, 6, 30, 60] {
            let w = echo(n);
            let law = w.n_prime_law();
            let tail = crate::stats::binomial_upper_tail(n as u64, 2.0 / 9.0, (n / 3) as u64);
            assert!((law[n / 3] - tail).abs() < 1e-15, "n = {n}");
            assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coupling_agrees_when_unclipped() {
        let proto = ShuffleProtocol::new(BinaryRandomizedResponse::new(0.2).unwrap(), MultisetAnalyzer, 12, 0)
            .with_robustness(1.0 / 3.0)
            .unwrap();
        let w = ShuffleToPan::new(proto, vec![(0, 0.5), (1, 0.5)]).unwrap();
        let p = vec![(1usize, 0.9), (0, 0.1)];
        for trial in 0..200 {
            let (a, b) = coupled_dilution_pair(&w, &p, 5, trial);
            assert_eq!(a.total(), 12);
            assert_eq!(b.total(), 12);
            let mut rng = trial_rng(5, DILUTION_ALG, trial);
            let mut scratch = MessageCounts::zeros(2);
            w.push_uniform_rows(4, &mut rng, &mut scratch);
            if binomial(&mut rng, 12, 2.0 / 9.0) <= 4 {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn exact_uniform_output_matches_protocol() {
        use crate::trust_models::{exact_output_distribution, exact_shuffle_distribution};
        let proto = ShuffleProtocol::new(BinaryRandomizedResponse::new(0.25).unwrap(), MultisetAnalyzer, 6, 0)
            .with_robustness(1.0 / 3.0)
            .unwrap();
        let u = vec![(0usize, 0.5), (1, 0.5)];
        let w = ShuffleToPan::new(proto.clone(), u.clone()).unwrap();
        let mut budget = PathBudget::default();
        let wrapped = exact_output_distribution(&w, &[u.clone(), u.clone()], &mut budget).unwrap();
        let direct = exact_shuffle_distribution(&proto.randomizer, &vec![u; 6], &mut budget).unwrap();
        assert!(wrapped.tv(&direct) < 1e-10);
        assert!((wrapped.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_estimate_bounds_exact_dilution_gap() {
        use crate::trust_models::{exact_output_distribution, exact_shuffle_distribution};
        let proto = ShuffleProtocol::new(BinaryRandomizedResponse::new(0.1).unwrap(), MultisetAnalyzer, 9, 0)
            .with_robustness(1.0 / 3.0)
            .unwrap();
        let u = vec![(0usize, 0.5), (1, 0.5)];
        let p = vec![(0usize, 0.05), (1, 0.95)];
        let w = ShuffleToPan::new(proto.clone(), u.clone()).unwrap();
        let mut budget = PathBudget::default();
        let wrapped = exact_output_distribution(&w, &vec![p.clone(); 3], &mut budget).unwrap();
        // Π(P^n_{(2/9)}): each row from P with probability 2/9, else U.
        let diluted: Vec<(usize, f64)> = (0..2).map(|x| (x, 2.0 / 9.0 * p[x].1 + 7.0 / 9.0 * u[x].1)).collect();
        let direct = exact_shuffle_distribution(&proto.randomizer, &vec![diluted; 9], &mut budget).unwrap();
        let exact = wrapped.tv(&direct);
        let est = dilution_estimate(&w, &p, 100_000, 3);
        assert!(exact > 0.0);
        assert!(exact <= est.ci_high, "exact {exact} vs {est:?}");
    }
}

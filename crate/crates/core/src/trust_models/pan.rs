use std::fmt::Debug;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::outcomes::{expand, DiscreteLaw, Outcomes, PathBudget};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// An online algorithm `(M_1, M_2, …, M_Out)` with an explicit initial state.
///
/// `update` receives the 1-based position of the element.
pub trait OnlineAlgorithm: Sync {
    type Input: Clone + Sync;
    type State: Clone + Debug + Send + Sync;
    type Output: Clone + Debug + Send + Sync;

    fn initial_state(&self, rng: &mut dyn RngCore) -> Self::State;

    fn update(&self, step: usize, x: &Self::Input, state: &Self::State, rng: &mut dyn RngCore) -> Self::State;

    fn output(&self, state: &Self::State, rng: &mut dyn RngCore) -> Self::Output;
}

/// An online algorithm over a declared finite state space whose transition
/// laws can be enumerated.
pub trait ExactOnline: OnlineAlgorithm<State: Ord, Output: Ord> {
    fn initial_law(&self) -> Vec<(Self::State, f64)>;

    fn update_law(&self, step: usize, x: &Self::Input, state: &Self::State) -> Vec<(Self::State, f64)>;

    fn output_law(&self, state: &Self::State) -> Vec<(Self::Output, f64)>;
}

/// What a single intrusion reveals: the state after `t` elements and the
/// final output of the same execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryView<S, O> {
    pub t: usize,
    pub state: S,
    pub output: O,
}

fn check_intrusion(t: usize, len: usize) -> Result<()> {
    if t == 0 || t > len {
        Err(Error::IntrusionTime { t, len })
    } else {
        Ok(())
    }
}

/// Run once on `stream`, recording the state after `t` elements.
pub fn run_pan<A: OnlineAlgorithm>(
    alg: &A,
    stream: &[A::Input],
    t: usize,
    seed: u64,
) -> Result<AdversaryView<A::State, A::Output>> {
    check_intrusion(t, stream.len())?;
    let mut rng = rng_from_seed(seed);
    let mut state = alg.initial_state(&mut rng);
    let mut observed = None;
    for (i, x) in stream.iter().enumerate() {
        state = alg.update(i + 1, x, &state, &mut rng);
        if i + 1 == t {
            observed = Some(state.clone());
        }
    }
    let output = alg.output(&state, &mut rng);
    Ok(AdversaryView { t, state: observed.expect("t within stream"), output })
}

/// Final output of one run.
pub fn run_online<A: OnlineAlgorithm>(alg: &A, stream: &[A::Input], rng: &mut dyn RngCore) -> A::Output {
    let mut state = alg.initial_state(rng);
    for (i, x) in stream.iter().enumerate() {
        state = alg.update(i + 1, x, &state, rng);
    }
    alg.output(&state, rng)
}

/// Advance a state law through elements `first..first + laws.len()`, element
/// `j` drawn independently from its law.
pub fn propagate<A: ExactOnline>(
    alg: &A,
    start: &Outcomes<A::State>,
    first: usize,
    laws: &[DiscreteLaw<A::Input>],
    budget: &mut PathBudget,
) -> Result<Outcomes<A::State>> {
    let mut cur = start.clone();
    for (j, law) in laws.iter().enumerate() {
        let step = first + j;
        cur = expand(&cur, |s| {
            law.iter()
                .flat_map(|(x, w)| alg.update_law(step, x, s).into_iter().map(move |(t, p)| (t, w * p)))
                .collect()
        });
        budget.spend(cur.len() as u64 * law.len() as u64)?;
    }
    Ok(cur)
}

/// Exact law of the internal state after the whole stream.
pub fn exact_state_distribution<A: ExactOnline>(
    alg: &A,
    laws: &[DiscreteLaw<A::Input>],
    budget: &mut PathBudget,
) -> Result<Outcomes<A::State>> {
    let init = Outcomes::from_pairs(alg.initial_law());
    propagate(alg, &init, 1, laws, budget)
}

/// Exact law of the final output.
pub fn exact_output_distribution<A: ExactOnline>(
    alg: &A,
    laws: &[DiscreteLaw<A::Input>],
    budget: &mut PathBudget,
) -> Result<Outcomes<A::Output>> {
    let states = exact_state_distribution(alg, laws, budget)?;
    budget.spend(states.len() as u64)?;
    Ok(expand(&states, |s| alg.output_law(s)))
}

/// Exact law of the adversary view `(S_t, output)`.
pub fn exact_view_distribution<A: ExactOnline>(
    alg: &A,
    laws: &[DiscreteLaw<A::Input>],
    t: usize,
    budget: &mut PathBudget,
) -> Result<Outcomes<(A::State, A::Output)>> {
    check_intrusion(t, laws.len())?;
    let at_t = exact_state_distribution(alg, &laws[..t], budget)?;
    let rest = &laws[t..];
    let Some((probe, _)) = at_t.iter().next() else {
        return Ok(Outcomes::new());
    };
    // Cost the continuation from one state and charge it for every state
    // before expanding, so an oversized view fails without allocating.
    let mut probe_budget = PathBudget::with_limit(u64::MAX);
    let probe_out = continuation(alg, probe, t, rest, &mut probe_budget)?;
    let per_state = probe_budget.used().max(1) + probe_out.len() as u64;
    budget.spend(per_state.saturating_mul(at_t.len() as u64))?;

    let views = expand(&at_t, |s| {
        let mut local = PathBudget::with_limit(u64::MAX);
        continuation(alg, s, t, rest, &mut local)
            .expect("an unlimited budget never trips")
            .iter()
            .map(|(o, p)| ((s.clone(), o.clone()), *p))
            .collect()
    });
    Ok(views)
}

fn continuation<A: ExactOnline>(
    alg: &A,
    state: &A::State,
    t: usize,
    rest: &[DiscreteLaw<A::Input>],
    budget: &mut PathBudget,
) -> Result<Outcomes<A::Output>> {
    let end = propagate(alg, &Outcomes::point(state.clone()), t + 1, rest, budget)?;
    budget.spend(end.len() as u64)?;
    Ok(expand(&end, |s| alg.output_law(s)))
}

/// Point-mass laws for a fixed stream.
pub fn fixed_stream<I: Clone>(stream: &[I]) -> Vec<DiscreteLaw<I>> {
    stream.iter().map(|x| vec![(x.clone(), 1.0)]).collect()
}

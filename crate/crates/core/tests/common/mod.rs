//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;

use panshuf::baselines::{Answer, Problem, ProblemInstance};
use panshuf::finite_dist::{BitVector, FiniteDistribution, ParityIndex};
use panshuf::reductions::Hypothesis;

pub fn dist(pmf: Vec<f64>) -> FiniteDistribution {
    FiniteDistribution::new(pmf).expect("valid pmf")
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b == 0.0 { f64::INFINITY } else { a * (a / b).ln() })
        .sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A random pmf with occasional zero cells.
pub fn random_pmf(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Coordinate `j` of the dense index: the most significant of `d` bits is
/// coordinate 1, and a set bit means `-1`.
pub fn coord(index: usize, d: usize, j: usize) -> i64 {
    if index >> (d - j) & 1 == 1 {
        -1
    } else {
        1
    }
}

/// `2^{-d}(1 + 2αb·x_j)`.
pub fn single_coordinate_pmf(d: usize, j: usize, b: i8, alpha: f64) -> Vec<f64> {
    let m = 1usize << d;
    (0..m).map(|x| (1.0 + 2.0 * alpha * f64::from(b) * coord(x, d, j) as f64) / m as f64).collect()
}

/// `max_f (1/|V|) Σ_v (Σ_x f(x)(p_v(x) − u(x)))²` over `f ∈ {±1}^m`.
pub fn norm_sq_oracle(family: &[FiniteDistribution]) -> f64 {
    let m = family[0].len();
    let k = family.len() as f64;
    let u: Vec<f64> = (0..m).map(|x| family.iter().map(|p| p.prob(x)).sum::<f64>() / k).collect();
    let mut best = 0.0f64;
    for f in 0u32..(1 << m) {
        let sign = |x: usize| if f >> x & 1 == 1 { -1.0 } else { 1.0 };
        let mut total = 0.0;
        for p in family {
            let c: f64 = (0..m).map(|x| sign(x) * (p.prob(x) - u[x])).sum();
            total += c * c;
        }
        best = best.max(total / k);
    }
    best
}

/// Whether `w` equals `±χ_S` for some subset `S` of the index bits.
pub fn is_parity_character(w: &[i8]) -> bool {
    let m = w.len();
    if !m.is_power_of_two() || m == 0 {
        return false;
    }
    let s = w[0];
    let mut mask = 0usize;
    let mut bit = 1;
    while bit < m {
        if w[bit] != s {
            mask |= bit;
        }
        bit <<= 1;
    }
    (0..m).all(|x| w[x] == if (x & mask).count_ones() % 2 == 1 { -s } else { s })
}

pub fn binomial_pmf_oracle(n: usize, p: f64) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; row.len() + 1];
        for (k, v) in row.iter().enumerate() {
            next[k] += v * (1.0 - p);
            next[k + 1] += v * p;
        }
        row = next;
    }
    row
}

pub fn convolve_pmf(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn hockey_stick_oracle(p: &[f64], q: &[f64], eps: f64) -> f64 {
    let fwd: f64 = p.iter().zip(q).map(|(a, b)| (a - eps.exp() * b).max(0.0)).sum();
    let bwd: f64 = q.iter().zip(p).map(|(a, b)| (a - eps.exp() * b).max(0.0)).sum();
    fwd.max(bwd)
}

/// TV between the RR counter's output after `n` rows from the equal
/// mixture of `P_{1,{1},±1,α}` and after `n` uniform rows.
pub fn rr_counter_mixture_tv(n: usize, flip: f64, alpha: f64) -> f64 {
    let q = |b: f64| 0.5 - (1.0 - 2.0 * flip) * alpha * b;
    let (plus, minus) = (binomial_pmf_oracle(n, q(1.0)), binomial_pmf_oracle(n, q(-1.0)));
    let mix: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| 0.5 * (a + b)).collect();
    tv(&mix, &binomial_pmf_oracle(n, 0.5))
}

/// One user with input 0 versus input 1 under binary RR.
pub fn rr_delta_oracle(p: f64, eps: f64) -> f64 {
    hockey_stick_oracle(&[1.0 - p, p], &[p, 1.0 - p], eps)
}

/// Shuffled binary RR: `ones` ones versus `ones + 1` ones among `n` users.
pub fn shuffled_rr_delta_oracle(n: usize, ones: usize, p: f64, eps: f64) -> f64 {
    let law = |k: usize| convolve_pmf(&binomial_pmf_oracle(k, 1.0 - p), &binomial_pmf_oracle(n - k, p));
    hockey_stick_oracle(&law(ones), &law(ones + 1), eps)
}

/// `Bin(m, q) + Lap(1/ε) + Lap(1/ε)`, each Laplace built as a difference
/// of exponentials.
pub fn convolution_sample(rng: &mut impl Rng, m: usize, q: f64, eps: f64, samples: usize) -> Vec<f64> {
    let exp = |rng: &mut dyn FnMut() -> f64| -(1.0 - rng()).ln() / eps;
    (0..samples)
        .map(|_| {
            let hits = (0..m).filter(|_| rng.random::<f64>() < q).count() as f64;
            let mut u = || rng.random::<f64>();
            let l1 = exp(&mut u) - exp(&mut u);
            let l2 = exp(&mut u) - exp(&mut u);
            hits + l1 + l2
        })
        .collect()
}

/// Plug-in answer from integer feature sums. `alpha` is given as an exact
/// fraction so hypothesis-test ties are decided exactly.
pub fn plug_in_oracle(inst: &ProblemInstance, data: &[BitVector], alpha: (i64, i64)) -> Answer {
    let subsets = inst.feature_map().subsets();
    let labelled = inst.problem == Problem::ParityLearning;
    let sums: Vec<i64> = subsets
        .iter()
        .map(|s| {
            data.iter()
                .map(|x| {
                    let e = x.entries();
                    let chi: i64 = s.iter().map(|&j| i64::from(e[j - 1])).product();
                    if labelled {
                        chi * i64::from(e[inst.d])
                    } else {
                        chi
                    }
                })
                .sum()
        })
        .collect();
    let n = data.len() as i64;
    let first_max = |v: &[i64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    match inst.problem {
        Problem::Selection => Answer::Coordinate(first_max(&sums) + 1),
        Problem::SparseMean | Problem::ParityRelease => Answer::Vector(sums.iter().map(|&s| s as f64 / n as f64).collect()),
        Problem::HypothesisTest => {
            let (num, den) = (i128::from(alpha.0), i128::from(alpha.1));
            let scaled: Vec<i128> = sums.iter().map(|&s| i128::from(s) * den).collect();
            let base: i128 = scaled.iter().map(|s| s * s).sum();
            let mut best = (base, None);
            for (j, &s) in scaled.iter().enumerate() {
                for b in [1i8, -1] {
                    let c = 2 * num * i128::from(b) * i128::from(n);
                    let dist = base - s * s + (s - c) * (s - c);
                    if dist < best.0 {
                        best = (dist, Some((j + 1, b)));
                    }
                }
            }
            Answer::Member(best.1.map(|(j, b)| ParityIndex::new(vec![j], b, inst.d).expect("valid index")))
        }
        Problem::ParityLearning => {
            let mags: Vec<i64> = sums.iter().map(|s| s.abs()).collect();
            let i = first_max(&mags);
            Answer::Hypothesis(Hypothesis { subset: subsets[i].clone(), sign: if sums[i] >= 0 { 1 } else { -1 } })
        }
    }
}

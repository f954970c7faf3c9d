use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::bits::{BitVector, ParityIndex};
use super::dense::{parity_character, FiniteDistribution};
use super::Sampler;
use crate::error::{Error, Result};
use crate::rng::{bernoulli, sign};

/// Largest effective dimension [`ParametricHardDistribution::densify`] accepts.
pub const DENSE_DIM_LIMIT: usize = 20;

/// Which parity-biased family a distribution belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    /// Uniform on `{±1}^d` except the parity `∏_{i∈ℓ} x_i` equals `b` with
    /// probability `1/2 + α`.
    P,
    /// Signed-parity family on `{±1}^{d+1}`: the label `x_{d+1}` agrees with
    /// `b ∏_{i∈ℓ} x_i` with probability `1/2 + α`.
    Q,
}

/// A member of the P or Q family, evaluated in closed form and sampled
/// without materialising the `2^d` masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricHardDistribution {
    d: usize,
    family: FamilyTag,
    index: ParityIndex,
    alpha: f64,
}

impl ParametricHardDistribution {
    /// `P_{d,ℓ,b,α}`; requires `α ∈ (0, 1/2)` and non-empty `ℓ`.
    pub fn p(d: usize, subset: Vec<usize>, b: i8, alpha: f64) -> Result<Self> {
        check_alpha(alpha, false)?;
        Self::build(d, FamilyTag::P, ParityIndex::new(subset, b, d)?, alpha)
    }

    /// `Q_{d,ℓ,b,α}` on `{±1}^{d+1}`; `ℓ` may be empty.
    pub fn q(d: usize, subset: Vec<usize>, b: i8, alpha: f64) -> Result<Self> {
        check_alpha(alpha, false)?;
        Self::build(d, FamilyTag::Q, ParityIndex::labelled(subset, b, d)?, alpha)
    }

    /// Test-mode constructor: admits the degenerate endpoints `α ∈ [0, 1/2]`.
    pub fn test_mode(family: FamilyTag, d: usize, subset: Vec<usize>, b: i8, alpha: f64) -> Result<Self> {
        check_alpha(alpha, true)?;
        let index = match family {
            FamilyTag::P => ParityIndex::new(subset, b, d)?,
            FamilyTag::Q => ParityIndex::labelled(subset, b, d)?,
        };
        Self::build(d, family, index, alpha)
    }

    fn build(d: usize, family: FamilyTag, index: ParityIndex, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(ParametricHardDistribution { d, family, index, alpha })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn family(&self) -> FamilyTag {
        self.family
    }

    pub fn index(&self) -> &ParityIndex {
        &self.index
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `d` for P, `d + 1` for Q.
    pub fn effective_dim(&self) -> usize {
        match self.family {
            FamilyTag::P => self.d,
            FamilyTag::Q => self.d + 1,
        }
    }

    /// Coordinates (1-based, in the effective dimension) whose product is biased.
    pub fn character_subset(&self) -> Vec<usize> {
        let mut s = self.index.subset().to_vec();
        if self.family == FamilyTag::Q {
            s.push(self.d + 1);
        }
        s
    }

    fn character_mask(&self) -> usize {
        let dim = self.effective_dim();
        self.character_subset()
            .iter()
            .fold(0usize, |m, &j| m | 1 << (dim - j))
    }

    /// Closed-form mass `(1 ± 2α) 2^{-dim}`.
    pub fn pmf_eval(&self, x: &BitVector) -> Result<f64> {
        let dim = self.effective_dim();
        if x.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.dim() });
        }
        let chi = x.parity(&self.character_subset()) as f64;
        Ok(self.mass_for_character(chi))
    }

    fn mass_for_character(&self, chi: f64) -> f64 {
        let b = self.index.sign() as f64;
        (1.0 + 2.0 * self.alpha * b * chi) * (-(self.effective_dim() as f64)).exp2()
    }

    /// `E[∏_{i∈t} x_i]` in closed form: `2αb` on the biased character, 1 on
    /// the empty set, 0 elsewhere.
    pub fn fourier(&self, subset: &[usize]) -> f64 {
        let mut t = subset.to_vec();
        t.sort_unstable();
        if t.is_empty() {
            1.0
        } else if t == self.character_subset() {
            2.0 * self.alpha * self.index.sign() as f64
        } else {
            0.0
        }
    }

    /// Mean of coordinate `j` (1-based).
    pub fn coordinate_mean(&self, j: usize) -> f64 {
        self.fourier(&[j])
    }

    /// Dense pmf; refuses effective dimensions above [`DENSE_DIM_LIMIT`].
    pub fn densify(&self) -> Result<FiniteDistribution> {
        let dim = self.effective_dim();
        if dim > DENSE_DIM_LIMIT {
            return Err(Error::DimensionGuard { dim, limit: DENSE_DIM_LIMIT });
        }
        let mask = self.character_mask();
        let pmf = (0..1usize << dim)
            .map(|i| self.mass_for_character(parity_character(i, mask)))
            .collect();
        Ok(FiniteDistribution::from_pmf_unchecked(pmf))
    }

    /// Per-coordinate sums `Σ_i x_{i,j}` of `n` i.i.d. draws, sampled
    /// directly. Only valid when coordinates are independent, i.e. for the
    /// P family with `|ℓ| = 1`.
    pub fn sample_coordinate_sums(&self, rng: &mut dyn RngCore, n: u64) -> Result<Vec<i64>> {
        if self.family != FamilyTag::P || self.index.width() != 1 {
            return Err(Error::InvalidParameter(
                "coordinate sums only factorise for single-coordinate P members".into(),
            ));
        }
        Ok((1..=self.d)
            .map(|k| {
                let p_plus = (1.0 + self.coordinate_mean(k)) / 2.0;
                2 * crate::rng::binomial(rng, n, p_plus) as i64 - n as i64
            })
            .collect())
    }
}

fn check_alpha(alpha: f64, test_mode: bool) -> Result<()> {
    let ok = if test_mode {
        (0.0..=0.5).contains(&alpha)
    } else {
        alpha > 0.0 && alpha < 0.5
    };
    if ok {
        Ok(())
    } else {
        Err(Error::BiasOutOfRange(alpha))
    }
}

impl Sampler for ParametricHardDistribution {
    fn dim(&self) -> usize {
        self.effective_dim()
    }

    /// Draw every coordinate uniformly, then overwrite the last coordinate of
    /// the biased character so its parity equals `s`, where `s = b` with
    /// probability `1/2 + α`.
    fn sample_one(&self, rng: &mut dyn RngCore) -> BitVector {
        let dim = self.effective_dim();
        let mut x: Vec<i8> = (0..dim).map(|_| sign(rng)).collect();
        let subset = self.character_subset();
        let b = self.index.sign();
        let target = if bernoulli(rng, 0.5 + self.alpha) { b } else { -b };
        let (&last, rest) = subset.split_last().expect("character subset is never empty");
        let partial = rest.iter().fold(1i8, |acc, &j| acc * x[j - 1]);
        x[last - 1] = target * partial;
        BitVector::from_entries_unchecked(x)
    }
}

/// `C(n, k)` as f64.
pub fn binomial_coefficient(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(d, ≤k) = Σ_{j=1}^{k} C(d, j)` (the empty set is not counted).
pub fn choose_up_to(d: usize, k: usize) -> f64 {
    (1..=k).map(|j| binomial_coefficient(d, j)).sum()
}

/// All subsets of `[d]` of size `size`, in lexicographic order.
pub fn subsets_of_size(d: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for j in start..=d {
            if d - j + 1 < left {
                break;
            }
            cur.push(j);
            rec(j + 1, d, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, d, size, &mut Vec::new(), &mut out);
    out
}

/// Subsets with `lo ≤ |ℓ| ≤ hi`, ordered by size then lexicographically.
pub fn subsets_up_to(d: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    (lo..=hi).flat_map(|s| subsets_of_size(d, s)).collect()
}

/// Enumerate a family: for P, every `1 ≤ |ℓ| ≤ k` with both signs
/// (`2·C(d,≤k)` members); for Q, every `|ℓ| ≤ k` including the empty set
/// (`2·C(d,≤k) + 2` members). The two families therefore count the empty
/// parity differently, each matching its stated size.
///
/// Order: subsets by size then lexicographically, `b = +1` before `b = -1`.
pub fn family_enumerate(d: usize, k: usize, alpha: f64, tag: FamilyTag) -> Result<Vec<ParametricHardDistribution>> {
    let lo = match tag {
        FamilyTag::P => 1,
        FamilyTag::Q => 0,
    };
    enumerate_range(d, k, alpha, tag, lo)
}

/// The `2·C(d,≤k)` Q-family members with non-empty `ℓ`.
pub fn q_family_nontrivial(d: usize, k: usize, alpha: f64) -> Result<Vec<ParametricHardDistribution>> {
    enumerate_range(d, k, alpha, FamilyTag::Q, 1)
}

fn enumerate_range(d: usize, k: usize, alpha: f64, tag: FamilyTag, lo: usize) -> Result<Vec<ParametricHardDistribution>> {
    if k > d {
        return Err(Error::WidthTooLarge { k, d });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("width k must be at least 1".into()));
    }
    check_alpha(alpha, false)?;
    let mut out = Vec::new();
    for subset in subsets_up_to(d, lo, k) {
        for b in [1i8, -1] {
            let index = ParityIndex::labelled(subset.clone(), b, d)?;
            out.push(ParametricHardDistribution::build(d, tag, index, alpha)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_dist::fourier_coefficient;

    #[test]
    fn pmf_examples() {
        let p = ParametricHardDistribution::p(3, vec![1], 1, 0.1).unwrap();
        let x = BitVector::new(vec![1, -1, 1]).unwrap();
        assert!((p.pmf_eval(&x).unwrap() - 0.15).abs() < 1e-15);
        let x = BitVector::new(vec![-1, -1, 1]).unwrap();
        assert!((p.pmf_eval(&x).unwrap() - 0.10).abs() < 1e-15);
        let bad = BitVector::new(vec![1, 1]).unwrap();
        assert_eq!(
            p.pmf_eval(&bad),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn alpha_range() {
        assert_eq!(
            ParametricHardDistribution::p(3, vec![1], 1, 0.5),
            Err(Error::BiasOutOfRange(0.5))
        );
        assert!(ParametricHardDistribution::p(3, vec![1], 1, 0.0).is_err());
        let u = ParametricHardDistribution::test_mode(FamilyTag::P, 3, vec![2], 1, 0.0).unwrap();
        let dense = u.densify().unwrap();
        assert!(dense.pmf().iter().all(|&p| p == 0.125));
    }

    #[test]
    fn densify_examples() {
        let p = ParametricHardDistribution::p(1, vec![1], 1, 0.25).unwrap();
        assert_eq!(p.densify().unwrap().pmf(), &[0.75, 0.25]);
        let big = ParametricHardDistribution::p(21, vec![1], 1, 0.25).unwrap();
        assert_eq!(
            big.densify(),
            Err(Error::DimensionGuard { dim: 21, limit: DENSE_DIM_LIMIT })
        );
        let q = ParametricHardDistribution::q(20, vec![1], 1, 0.25).unwrap();
        assert!(q.densify().is_err());
    }

    #[test]
    fn densify_agrees_with_pmf_eval() {
        for tag in [FamilyTag::P, FamilyTag::Q] {
            for member in family_enumerate(4, 3, 0.15, tag).unwrap() {
                let dense = member.densify().unwrap();
                let dim = member.effective_dim();
                for i in 0..dense.len() {
                    let x = BitVector::from_index(i, dim);
                    assert!((dense.prob(i) - member.pmf_eval(&x).unwrap()).abs() <= 1e-15);
                }
                assert!((dense.total_mass() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn family_sizes() {
        assert_eq!(family_enumerate(4, 2, 0.1, FamilyTag::P).unwrap().len(), 20);
        assert_eq!(family_enumerate(2, 1, 0.1, FamilyTag::P).unwrap().len(), 4);
        assert_eq!(family_enumerate(3, 3, 0.1, FamilyTag::Q).unwrap().len(), 16);
        assert_eq!(q_family_nontrivial(3, 3, 0.1).unwrap().len(), 14);
        assert_eq!(
            family_enumerate(2, 3, 0.1, FamilyTag::P),
            Err(Error::WidthTooLarge { k: 3, d: 2 })
        );
        for d in 1..=6 {
            for k in 1..=d {
                let n = family_enumerate(d, k, 0.2, FamilyTag::P).unwrap().len();
                assert_eq!(n as f64, 2.0 * choose_up_to(d, k));
            }
        }
    }

    #[test]
    fn family_mixture_is_uniform() {
        for tag in [FamilyTag::P, FamilyTag::Q] {
            for (d, k) in [(2, 1), (3, 2), (4, 4)] {
                let fam = family_enumerate(d, k, 0.3, tag).unwrap();
                let dense: Vec<_> = fam.iter().map(|m| m.densify().unwrap()).collect();
                let w = 1.0 / dense.len() as f64;
                let parts: Vec<_> = dense.iter().map(|p| (p, w)).collect();
                let mix = FiniteDistribution::mixture(&parts).unwrap();
                let u = 1.0 / mix.len() as f64;
                assert!(mix.pmf().iter().all(|p| (p - u).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn fourier_structure() {
        let p = ParametricHardDistribution::p(4, vec![2, 4], -1, 0.2).unwrap();
        let dense = p.densify().unwrap();
        for mask in 1..16usize {
            let subset: Vec<usize> = (1..=4).filter(|j| mask >> (4 - j) & 1 == 1).collect();
            let got = fourier_coefficient(&dense, &subset).unwrap();
            let want = if subset == [2, 4] { -0.4 } else { 0.0 };
            assert!((got - want).abs() < 1e-12, "{subset:?}: {got}");
            assert!((p.fourier(&subset) - want).abs() < 1e-15);
        }
    }
}

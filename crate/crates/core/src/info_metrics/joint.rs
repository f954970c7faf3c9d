use serde::{Deserialize, Serialize};

use super::{kl_slices, tv_slices};
use crate::error::{Error, Result};
use crate::finite_dist::FiniteDistribution;

/// Joint law of a pair `(A, B)` as a row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    pmf: Vec<f64>,
}

impl JointDistribution {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if matrix.len() != row_labels.len() || matrix.iter().any(|r| r.len() != col_labels.len()) {
            return Err(Error::InvalidDistribution("joint matrix shape does not match labels".into()));
        }
        let pmf: Vec<f64> = matrix.into_iter().flatten().collect();
        FiniteDistribution::new(pmf.clone())?;
        Ok(JointDistribution { row_labels, col_labels, pmf })
    }

    /// Rows and columns labelled by their indices.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        Self::new(index_labels(rows), index_labels(cols), matrix)
    }

    /// Like [`JointDistribution::from_matrix`] but rescales a total within
    /// `1e-9` of one, absorbing rounding from long exact propagations.
    pub fn from_matrix_lenient(mut matrix: Vec<Vec<f64>>) -> Result<Self> {
        let total: f64 = matrix.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("joint mass {total}")));
        }
        for v in matrix.iter_mut().flatten() {
            *v /= total;
        }
        Self::from_matrix(matrix)
    }

    /// `p(a, b) = p(a) · p(b | a)`.
    pub fn from_conditionals(marginal: &FiniteDistribution, conditionals: &[FiniteDistribution]) -> Result<Self> {
        if conditionals.len() != marginal.len() {
            return Err(Error::DomainMismatch(marginal.len(), conditionals.len()));
        }
        let cols = conditionals[0].len();
        let mut matrix = Vec::with_capacity(marginal.len());
        for (pa, cond) in marginal.pmf().iter().zip(conditionals) {
            if cond.len() != cols {
                return Err(Error::DomainMismatch(cols, cond.len()));
            }
            matrix.push(cond.pmf().iter().map(|pb| pa * pb).collect());
        }
        Self::from_matrix(matrix)
    }

    pub fn rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.pmf[a * self.cols() + b]
    }

    /// The joint as a flat distribution over `rows × cols`.
    pub fn flat(&self) -> FiniteDistribution {
        FiniteDistribution::from_pmf_unchecked(self.pmf.clone())
    }

    pub fn marginal_a(&self) -> FiniteDistribution {
        let c = self.cols();
        FiniteDistribution::from_pmf_unchecked(self.pmf.chunks(c).map(|r| r.iter().sum()).collect())
    }

    pub fn marginal_b(&self) -> FiniteDistribution {
        let c = self.cols();
        let mut out = vec![0.0; c];
        for row in self.pmf.chunks(c) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        FiniteDistribution::from_pmf_unchecked(out)
    }

    /// `B | A = a`; `None` when `p(a) = 0`.
    pub fn conditional_b(&self, a: usize) -> Option<FiniteDistribution> {
        let c = self.cols();
        let row = &self.pmf[a * c..(a + 1) * c];
        let total: f64 = row.iter().sum();
        (total > 0.0).then(|| FiniteDistribution::from_pmf_unchecked(row.iter().map(|p| p / total).collect()))
    }

    pub fn product_of_marginals(&self) -> FiniteDistribution {
        self.marginal_a().product(&self.marginal_b())
    }

    /// `I(A; B) = Σ p(a,b) ln(p(a,b) / (p(a) p(b)))`.
    pub fn mutual_information(&self) -> f64 {
        let pa = self.marginal_a();
        let pb = self.marginal_b();
        let c = self.cols();
        let mut total = 0.0;
        for (i, &p) in self.pmf.iter().enumerate() {
            if p > 0.0 {
                total += p * (p / (pa.prob(i / c) * pb.prob(i % c))).ln();
            }
        }
        total.max(0.0)
    }

    /// `KL(joint ‖ product of marginals)`.
    pub fn mutual_information_via_kl(&self) -> f64 {
        kl_slices(&self.pmf, self.product_of_marginals().pmf())
    }
}

fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Free-standing wrapper so callers can write `mutual_information(&j)`.
pub fn mutual_information(j: &JointDistribution) -> f64 {
    j.mutual_information()
}

/// A row-stochastic matrix `T[x][y] = Pr[y | x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMap {
    rows: Vec<FiniteDistribution>,
}

impl StochasticMap {
    pub fn new(rows: Vec<FiniteDistribution>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidDistribution("stochastic map with no rows".into()));
        };
        let out = first.len();
        if let Some(r) = rows.iter().find(|r| r.len() != out) {
            return Err(Error::DomainMismatch(out, r.len()));
        }
        Ok(StochasticMap { rows })
    }

    pub fn input_size(&self) -> usize {
        self.rows.len()
    }

    pub fn output_size(&self) -> usize {
        self.rows[0].len()
    }

    /// Push `p` through the channel.
    pub fn apply(&self, p: &FiniteDistribution) -> Result<FiniteDistribution> {
        if p.len() != self.input_size() {
            return Err(Error::DomainMismatch(self.input_size(), p.len()));
        }
        let mut out = vec![0.0; self.output_size()];
        for (px, row) in p.pmf().iter().zip(&self.rows) {
            for (o, t) in out.iter_mut().zip(row.pmf()) {
                *o += px * t;
            }
        }
        Ok(FiniteDistribution::from_pmf_unchecked(out))
    }
}

/// Both sides of a checked inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl FactCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        FactCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 }
    }
}

/// `tv((A,B), (A,B')) ≤ E_{a∼A}[tv(B|a, B'|a)]` for two joints sharing the
/// law of `A`.
pub fn fact_tv_chain_check(ab: &JointDistribution, ab2: &JointDistribution) -> Result<FactCheck> {
    if ab.rows() != ab2.rows() || ab.cols() != ab2.cols() {
        return Err(Error::DomainMismatch(ab.pmf.len(), ab2.pmf.len()));
    }
    let pa = ab.marginal_a();
    let gap = tv_slices(pa.pmf(), ab2.marginal_a().pmf());
    if gap > 1e-12 {
        return Err(Error::InvalidDistribution(format!(
            "first marginals differ (tv {gap:e})"
        )));
    }
    let lhs = tv_slices(&ab.pmf, &ab2.pmf);
    let rhs = (0..ab.rows())
        .filter_map(|a| {
            let (b1, b2) = (ab.conditional_b(a)?, ab2.conditional_b(a)?);
            Some(pa.prob(a) * tv_slices(b1.pmf(), b2.pmf()))
        })
        .sum();
    Ok(FactCheck::new(lhs, rhs))
}

/// Joint law of a triple `(A, B, C)`, stored as `pmf[(a·|B| + b)·|C| + c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint3 {
    shape: [usize; 3],
    pmf: Vec<f64>,
}

impl Joint3 {
    pub fn new(shape: [usize; 3], pmf: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != pmf.len() {
            return Err(Error::InvalidDistribution("triple joint shape does not match pmf".into()));
        }
        FiniteDistribution::new(pmf.clone())?;
        Ok(Joint3 { shape, pmf })
    }

    /// `p(a, b, c) = p(c) p(a | c) p(b | c)`, so `A ⊥ B | C` by construction.
    pub fn markov(c: &FiniteDistribution, a_given_c: &[FiniteDistribution], b_given_c: &[FiniteDistribution]) -> Result<Self> {
        let nc = c.len();
        if a_given_c.len() != nc || b_given_c.len() != nc {
            return Err(Error::DomainMismatch(nc, a_given_c.len().min(b_given_c.len())));
        }
        let na = a_given_c[0].len();
        let nb = b_given_c[0].len();
        let mut pmf = vec![0.0; na * nb * nc];
        for ci in 0..nc {
            for a in 0..na {
                for b in 0..nb {
                    pmf[(a * nb + b) * nc + ci] = c.prob(ci) * a_given_c[ci].prob(a) * b_given_c[ci].prob(b);
                }
            }
        }
        Self::new([na, nb, nc], pmf)
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        let [_, nb, nc] = self.shape;
        self.pmf[(a * nb + b) * nc + c]
    }

    /// Joint of `(A, B)` with `C` summed out.
    pub fn ab(&self) -> JointDistribution {
        self.pair(|a, b, _| (a, b), self.shape[0], self.shape[1])
    }

    /// Joint of `(A, C)` with `B` summed out.
    pub fn ac(&self) -> JointDistribution {
        self.pair(|a, _, c| (a, c), self.shape[0], self.shape[2])
    }

    fn pair(&self, pick: impl Fn(usize, usize, usize) -> (usize, usize), rows: usize, cols: usize) -> JointDistribution {
        let [na, nb, nc] = self.shape;
        let mut m = vec![vec![0.0; cols]; rows];
        for a in 0..na {
            for b in 0..nb {
                for c in 0..nc {
                    let (r, k) = pick(a, b, c);
                    m[r][k] += self.get(a, b, c);
                }
            }
        }
        JointDistribution {
            row_labels: index_labels(rows),
            col_labels: index_labels(cols),
            pmf: m.into_iter().flatten().collect(),
        }
    }

    /// `max_{a,b,c} |p(a,b,c) p(c) − p(a,c) p(b,c)|`, zero exactly when
    /// `A ⊥ B | C`.
    pub fn conditional_dependence(&self) -> f64 {
        let [na, nb, nc] = self.shape;
        let mut pc = vec![0.0; nc];
        let mut pac = vec![0.0; na * nc];
        let mut pbc = vec![0.0; nb * nc];
        for a in 0..na {
            for b in 0..nb {
                for c in 0..nc {
                    let p = self.get(a, b, c);
                    pc[c] += p;
                    pac[a * nc + c] += p;
                    pbc[b * nc + c] += p;
                }
            }
        }
        let mut worst: f64 = 0.0;
        for a in 0..na {
            for b in 0..nb {
                for c in 0..nc {
                    let gap = self.get(a, b, c) * pc[c] - pac[a * nc + c] * pbc[b * nc + c];
                    worst = worst.max(gap.abs());
                }
            }
        }
        worst
    }
}

/// For `A ⊥ B | C`: `tv(B|a, B) ≤ tv(C|a, C)` for every `a` in the support
/// of `A`. Returns one check per such `a`.
pub fn fact_markov_check(j: &Joint3) -> Result<Vec<FactCheck>> {
    let dep = j.conditional_dependence();
    if dep > 1e-12 {
        return Err(Error::NotConditionallyIndependent(dep));
    }
    let ab = j.ab();
    let ac = j.ac();
    let pb = ab.marginal_b();
    let pc = ac.marginal_b();
    Ok((0..j.shape[0])
        .filter_map(|a| {
            let b_a = ab.conditional_b(a)?;
            let c_a = ac.conditional_b(a)?;
            Some(FactCheck::new(tv_slices(b_a.pmf(), pb.pmf()), tv_slices(c_a.pmf(), pc.pmf())))
        })
        .collect())
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `{±1}^d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BitVector(Vec<i8>);

impl BitVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("bit vector of dimension 0".into()));
        }
        if let Some(bad) = entries.iter().find(|&&e| e != 1 && e != -1) {
            return Err(Error::InvalidParameter(format!("entry {bad} is not ±1")));
        }
        Ok(BitVector(entries))
    }

    pub(crate) fn from_entries_unchecked(entries: Vec<i8>) -> Self {
        debug_assert!(!entries.is_empty() && entries.iter().all(|&e| e == 1 || e == -1));
        BitVector(entries)
    }

    /// Decode a dense-pmf index (see the module docs for the ordering).
    pub fn from_index(index: usize, d: usize) -> Self {
        let entries = (1..=d)
            .map(|j| if (index >> (d - j)) & 1 == 1 { -1 } else { 1 })
            .collect();
        BitVector(entries)
    }

    pub fn to_index(&self) -> usize {
        let d = self.0.len();
        self.0
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &e)| if e == -1 { acc | 1 << (d - 1 - i) } else { acc })
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    /// Coordinate `j`, 1-based.
    pub fn get(&self, j: usize) -> i8 {
        self.0[j - 1]
    }

    /// `∏_{j ∈ subset} x_j` over 1-based coordinates; 1 for the empty set.
    pub fn parity(&self, subset: &[usize]) -> i8 {
        subset.iter().fold(1i8, |acc, &j| acc * self.0[j - 1])
    }

    /// Append one coordinate.
    pub fn extended(&self, last: i8) -> Self {
        let mut v = self.0.clone();
        v.push(last);
        BitVector(v)
    }

    /// Render as a `+`/`-` string, e.g. `+-+`.
    pub fn to_sign_string(&self) -> String {
        self.0.iter().map(|&e| if e == 1 { '+' } else { '-' }).collect()
    }
}

/// A non-empty parity subset `ℓ ⊆ [d]` together with a sign `b`.
///
/// The labelled variant (used by the signed-parity family) also admits the
/// empty subset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParityIndex {
    subset: Vec<usize>,
    sign: i8,
}

impl ParityIndex {
    pub fn new(subset: Vec<usize>, sign: i8, d: usize) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::InvalidParity("empty subset".into()));
        }
        Self::labelled(subset, sign, d)
    }

    /// Like [`ParityIndex::new`] but the empty subset is allowed.
    pub fn labelled(mut subset: Vec<usize>, sign: i8, d: usize) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidParity(format!("sign {sign} is not ±1")));
        }
        if let Some(&j) = subset.iter().find(|&&j| j == 0 || j > d) {
            return Err(Error::InvalidParity(format!("index {j} outside [1, {d}]")));
        }
        let len = subset.len();
        subset.sort_unstable();
        subset.dedup();
        if subset.len() != len {
            return Err(Error::InvalidParity("duplicate index".into()));
        }
        Ok(ParityIndex { subset, sign })
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn width(&self) -> usize {
        self.subset.len()
    }

    /// Bit mask of the subset in the dense-index convention for dimension `d`.
    pub fn mask(&self, d: usize) -> usize {
        subset_mask(&self.subset, d)
    }
}

pub(crate) fn subset_mask(subset: &[usize], d: usize) -> usize {
    subset.iter().fold(0usize, |m, &j| m | 1 << (d - j))
}

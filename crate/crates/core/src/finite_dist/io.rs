use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bits::BitVector;
use super::dense::FiniteDistribution;
use super::hard::{FamilyTag, ParametricHardDistribution};
use crate::error::{Error, Result};

/// Portable description of a hard-family member.
///
/// `k` records the width of the family the member was drawn from; it
/// defaults to `|ℓ|` when unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawDescriptor")]
pub struct DistributionDescriptor {
    pub family: FamilyTag,
    pub d: usize,
    pub k: usize,
    pub ell: Vec<usize>,
    pub b: i8,
    pub alpha: f64,
}

#[derive(Deserialize)]
struct RawDescriptor {
    family: FamilyTag,
    d: usize,
    k: Option<usize>,
    ell: Vec<usize>,
    b: i8,
    alpha: f64,
}

impl From<RawDescriptor> for DistributionDescriptor {
    fn from(r: RawDescriptor) -> Self {
        DistributionDescriptor { family: r.family, d: r.d, k: r.k.unwrap_or(r.ell.len()), ell: r.ell, b: r.b, alpha: r.alpha }
    }
}

impl DistributionDescriptor {
    pub fn of(dist: &ParametricHardDistribution, k: Option<usize>) -> Self {
        DistributionDescriptor {
            family: dist.family(),
            d: dist.d(),
            k: k.unwrap_or(dist.index().width()),
            ell: dist.index().subset().to_vec(),
            b: dist.index().sign(),
            alpha: dist.alpha(),
        }
    }

    pub fn build(&self) -> Result<ParametricHardDistribution> {
        if self.ell.len() > self.k {
            return Err(Error::InvalidParity(format!(
                "|ell| = {} exceeds k = {}",
                self.ell.len(),
                self.k
            )));
        }
        match self.family {
            FamilyTag::P => ParametricHardDistribution::p(self.d, self.ell.clone(), self.b, self.alpha),
            FamilyTag::Q => ParametricHardDistribution::q(self.d, self.ell.clone(), self.b, self.alpha),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Dump a hypercube pmf as CSV `index,x,prob`, with `x` written as a
/// `+`/`-` string and probabilities in shortest round-trip form.
pub fn dense_csv(dist: &FiniteDistribution) -> Result<String> {
    let d = dist.hypercube_dim().ok_or(Error::NotHypercube(dist.len()))?;
    let mut out = String::from("index,x,prob\n");
    for (i, p) in dist.pmf().iter().enumerate() {
        let x = BitVector::from_index(i, d).to_sign_string();
        writeln!(out, "{i},{x},{p:?}").expect("writing to a String cannot fail");
    }
    Ok(out)
}

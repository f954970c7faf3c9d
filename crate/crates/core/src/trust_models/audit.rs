use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::mechanisms::{ConstantOutput, NoisyMajority, QuantGrid, QuantizedLaplaceCounter, RRCounter, RRParityChain};
use super::outcomes::{Outcomes, PathBudget};
use super::pan::{exact_view_distribution, fixed_stream, ExactOnline};
use super::shuffle::{exact_shuffle_view, Analyzer, BinaryRandomizedResponse, ExactRandomizer};
use crate::error::{Error, Result};

/// Least `δ` at one `ε`, in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub epsilon: f64,
    pub delta_forward: f64,
    pub delta_backward: f64,
    pub delta_max: f64,
}

/// `δ(ε)` over a grid of `ε` values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditCurve {
    pub points: Vec<AuditPoint>,
}

impl AuditCurve {
    /// CSV with header `epsilon,delta_forward,delta_backward,delta_max`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,delta_forward,delta_backward,delta_max\n");
        for p in &self.points {
            writeln!(out, "{:?},{:?},{:?},{:?}", p.epsilon, p.delta_forward, p.delta_backward, p.delta_max)
                .expect("writing to a String cannot fail");
        }
        out
    }

    /// `δ_max` at the grid point closest to `eps`.
    pub fn delta_at(&self, eps: f64) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| (a.epsilon - eps).abs().total_cmp(&(b.epsilon - eps).abs()))
            .map(|p| p.delta_max)
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.points.windows(2).all(|w| w[1].delta_max <= w[0].delta_max + tol)
    }

    /// Pointwise maximum with another curve on the same grid.
    pub fn pointwise_max(&self, other: &AuditCurve) -> AuditCurve {
        if self.points.is_empty() {
            return other.clone();
        }
        AuditCurve {
            points: self
                .points
                .iter()
                .zip(&other.points)
                .map(|(a, b)| AuditPoint {
                    epsilon: a.epsilon,
                    delta_forward: a.delta_forward.max(b.delta_forward),
                    delta_backward: a.delta_backward.max(b.delta_backward),
                    delta_max: a.delta_max.max(b.delta_max),
                })
                .collect(),
        }
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn epsilon_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Hockey-stick curve between two exact view laws.
pub fn audit_outcomes<K: Ord + Clone>(p: &Outcomes<K>, q: &Outcomes<K>, grid: &[f64]) -> AuditCurve {
    let (pv, qv) = p.align(q);
    AuditCurve {
        points: grid
            .iter()
            .map(|&epsilon| {
                let f = crate::info_metrics::hockey_stick_slices(&pv, &qv, epsilon);
                let b = crate::info_metrics::hockey_stick_slices(&qv, &pv, epsilon);
                AuditPoint { epsilon, delta_forward: f, delta_backward: b, delta_max: f.max(b) }
            })
            .collect(),
    }
}

fn check_neighbors<I: PartialEq>(x: &[I], y: &[I]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let diff = x.iter().zip(y).filter(|(a, b)| a != b).count();
    if diff > 1 {
        return Err(Error::InvalidParameter(format!("inputs differ in {diff} rows")));
    }
    Ok(())
}

/// Audit the shuffled multiset `Π_S ∘ Π_R^n` on neighbouring datasets.
pub fn audit_shuffle<R>(randomizer: &R, x: &[R::Input], y: &[R::Input], grid: &[f64], budget: &mut PathBudget) -> Result<AuditCurve>
where
    R: ExactRandomizer,
    R::Input: PartialEq,
{
    check_neighbors(x, y)?;
    let p = exact_shuffle_view(randomizer, x, budget)?;
    let q = exact_shuffle_view(randomizer, y, budget)?;
    Ok(audit_outcomes(&p, &q, grid))
}

/// Audit the analyzer's output rather than the multiset.
pub fn audit_shuffle_output<R, A>(
    randomizer: &R,
    analyzer: &A,
    x: &[R::Input],
    y: &[R::Input],
    grid: &[f64],
    budget: &mut PathBudget,
) -> Result<AuditCurve>
where
    R: ExactRandomizer,
    R::Input: PartialEq,
    A: Analyzer,
    A::Output: Ord + Clone,
{
    check_neighbors(x, y)?;
    let p = exact_shuffle_view(randomizer, x, budget)?.map(|c| analyzer.analyze(c));
    let q = exact_shuffle_view(randomizer, y, budget)?.map(|c| analyzer.analyze(c));
    Ok(audit_outcomes(&p, &q, grid))
}

/// Audit the joint `(S_t, output)` view at one intrusion time.
pub fn audit_pan_at<A>(alg: &A, x: &[A::Input], y: &[A::Input], t: usize, grid: &[f64], budget: &mut PathBudget) -> Result<AuditCurve>
where
    A: ExactOnline,
    A::Input: PartialEq,
{
    check_neighbors(x, y)?;
    let p = exact_view_distribution(alg, &fixed_stream(x), t, budget)?;
    let q = exact_view_distribution(alg, &fixed_stream(y), t, budget)?;
    Ok(audit_outcomes(&p, &q, grid))
}

/// Worst case over every intrusion time `t ∈ [1, len]`.
pub fn audit_pan<A>(alg: &A, x: &[A::Input], y: &[A::Input], grid: &[f64], budget: &mut PathBudget) -> Result<AuditCurve>
where
    A: ExactOnline,
    A::Input: PartialEq,
{
    let mut worst = AuditCurve::default();
    for t in 1..=x.len() {
        worst = worst.pointwise_max(&audit_pan_at(alg, x, y, t, grid, budget)?);
    }
    Ok(worst)
}

/// JSON description of an auditable mechanism: `{type, alphabet, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismManifest {
    #[serde(rename = "type")]
    pub kind: String,
    pub alphabet: usize,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl MechanismManifest {
    fn param(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| Error::Spec(format!("mechanism '{}' needs numeric param '{key}'", self.kind)))
    }

    fn grid(&self) -> QuantGrid {
        let d = QuantGrid::default();
        QuantGrid {
            per_unit: self.params.get("per_unit").and_then(|v| v.as_u64()).map_or(d.per_unit, |v| v as u32),
            range_scale: self.params.get("range_scale").and_then(|v| v.as_f64()).unwrap_or(d.range_scale),
        }
    }

    /// Audit this mechanism on neighbouring inputs `x`, `y`.
    ///
    /// `shuffled_rr` audits the shuffled multiset; every other type is an
    /// online algorithm audited over all intrusion times.
    pub fn audit(&self, x: &[usize], y: &[usize], grid: &[f64], budget: &mut PathBudget) -> Result<AuditCurve> {
        if let Some(&bad) = x.iter().chain(y).find(|&&v| v >= self.alphabet) {
            return Err(Error::OutOfAlphabet { message: bad, alphabet: self.alphabet });
        }
        match self.kind.as_str() {
            "shuffled_rr" => audit_shuffle(&BinaryRandomizedResponse::new(self.param("flip")?)?, x, y, grid, budget),
            "rr_counter" => audit_pan(&RRCounter { flip: self.param("flip")? }, x, y, grid, budget),
            "rr_parity_chain" => audit_pan(&RRParityChain { flip: self.param("flip")? }, x, y, grid, budget),
            "noisy_majority" => audit_pan(&NoisyMajority { flip: self.param("flip")? }, x, y, grid, budget),
            "constant" => audit_pan(&ConstantOutput, x, y, grid, budget),
            "quantized_laplace_counter" => {
                let alg = QuantizedLaplaceCounter::new(self.param("epsilon")?, self.grid())?;
                audit_pan(&alg, x, y, grid, budget)
            }
            other => Err(Error::Spec(format!("unknown mechanism type '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_rr_curve() {
        let flip = 0.2;
        let rr = BinaryRandomizedResponse::new(flip).unwrap();
        let eps = rr.local_epsilon();
        let curve = audit_shuffle(&rr, &[0], &[1], &[0.0, eps], &mut PathBudget::default()).unwrap();
        assert!((curve.points[0].delta_max - 0.6).abs() < 1e-12);
        assert!(curve.points[1].delta_max < 1e-9);
    }

    #[test]
    fn identical_inputs_give_zero() {
        let curve = audit_pan(&RRCounter { flip: 0.1 }, &[1, 0, 1], &[1, 0, 1], &epsilon_grid(0.0, 2.0, 5), &mut PathBudget::default()).unwrap();
        assert!(curve.points.iter().all(|p| p.delta_max == 0.0));
    }

    #[test]
    fn non_neighbors_rejected() {
        let rr = BinaryRandomizedResponse::new(0.2).unwrap();
        assert!(audit_shuffle(&rr, &[0, 0], &[1, 1], &[0.0], &mut PathBudget::default()).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let curve = AuditCurve {
            points: vec![AuditPoint { epsilon: 0.5, delta_forward: 0.1, delta_backward: 0.2, delta_max: 0.2 }],
        };
        assert_eq!(curve.to_csv(), "epsilon,delta_forward,delta_backward,delta_max\n0.5,0.1,0.2,0.2\n");
    }

    #[test]
    fn manifest_dispatch() {
        let m: MechanismManifest =
            serde_json::from_str(r#"{"type":"rr_counter","alphabet":2,"params":{"flip":0.25}}"#).unwrap();
        let curve = m.audit(&[0, 1], &[1, 1], &[3f64.ln()], &mut PathBudget::default()).unwrap();
        assert!(curve.points[0].delta_max < 1e-12);
        let bad: MechanismManifest = serde_json::from_str(r#"{"type":"nope","alphabet":2}"#).unwrap();
        assert!(bad.audit(&[0], &[1], &[0.0], &mut PathBudget::default()).is_err());
    }
}

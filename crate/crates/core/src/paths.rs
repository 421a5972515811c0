//! Explicit branch enumeration of a three-time protocol.
//!
//! Every branch is built step by step with the textbook primitives: evolve to
//! `t`, take the Born distribution of the intermediate measurement, collapse
//! onto each outcome, evolve to `t_b`, take the Born distribution of the final
//! measurement. Branches through an absorbing outcome end there and report
//! that outcome's label at `t_b`. The Monte Carlo sampler draws from this table and the
//! counterfactual worlds are read off it. It never touches the projector
//! algebra of [`crate::abl`], which makes it a usable cross-check of that module.

use serde::{Deserialize, Serialize};

use crate::quantum::{born_distribution, collapse, evolve, ProjectiveMeasurement, PureState, UnitaryOp, EPS_PROB};
use crate::{Error, Result};

/// What happens at the intermediate time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intermediate {
    Nothing,
    Measure(ProjectiveMeasurement),
    Unitary(UnitaryOp),
}

impl Intermediate {
    pub fn measurement(&self) -> Option<&ProjectiveMeasurement> {
        match self {
            Intermediate::Measure(q) => Some(q),
            _ => None,
        }
    }

    /// Dimension check, plus every absorbing outcome must exist at `t_b`.
    pub(crate) fn check(&self, dim: usize, post: &ProjectiveMeasurement) -> Result<()> {
        match self {
            Intermediate::Nothing => Ok(()),
            Intermediate::Measure(q) => {
                q.check_dim(dim)?;
                q.absorption_targets(post).map(|_| ())
            }
            Intermediate::Unitary(u) if u.dim() == dim => Ok(()),
            Intermediate::Unitary(u) => Err(Error::DimensionMismatch {
                expected: dim,
                found: u.dim(),
            }),
        }
    }
}

/// Probabilities of every (intermediate outcome, final outcome) branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    /// Outcome labels at `t`; empty when nothing is measured there.
    pub intermediate_labels: Vec<String>,
    pub final_labels: Vec<String>,
    /// Probability of each intermediate outcome (a single entry of 1 when nothing is measured).
    pub intermediate: Vec<f64>,
    /// `final_given[j][k]`: probability of final outcome `k` after intermediate branch `j`.
    /// Rows of impossible branches are all zero.
    pub final_given: Vec<Vec<f64>>,
}

impl BranchTable {
    pub fn enumerate(
        pre: &PureState,
        pre_to_t: &UnitaryOp,
        stage: &Intermediate,
        t_to_post: &UnitaryOp,
        post: &ProjectiveMeasurement,
    ) -> Result<Self> {
        stage.check(pre.dim(), post)?;
        let at_t = evolve(pre, pre_to_t)?;
        let final_labels: Vec<String> = post.labels().map(str::to_string).collect();
        let finish = |s: &PureState| -> Result<Vec<f64>> {
            let out = evolve(s, t_to_post)?;
            Ok(born_distribution(&out, post)?.probabilities().collect())
        };
        match stage {
            Intermediate::Nothing => Ok(Self {
                intermediate_labels: Vec::new(),
                final_labels,
                intermediate: vec![1.0],
                final_given: vec![finish(&at_t)?],
            }),
            Intermediate::Unitary(w) => Ok(Self {
                intermediate_labels: Vec::new(),
                final_labels,
                intermediate: vec![1.0],
                final_given: vec![finish(&evolve(&at_t, w)?)?],
            }),
            Intermediate::Measure(q) => {
                let born = born_distribution(&at_t, q)?;
                let targets = q.absorption_targets(post)?;
                let mut intermediate = Vec::with_capacity(q.len());
                let mut final_given = Vec::with_capacity(q.len());
                for (entry, target) in born.entries().iter().zip(targets) {
                    if entry.probability <= EPS_PROB {
                        intermediate.push(0.0);
                        final_given.push(vec![0.0; final_labels.len()]);
                        continue;
                    }
                    intermediate.push(entry.probability);
                    match target {
                        Some(t) => {
                            let mut row = vec![0.0; final_labels.len()];
                            row[t] = 1.0;
                            final_given.push(row);
                        }
                        None => final_given.push(finish(&collapse(&at_t, q, &entry.label)?)?),
                    }
                }
                Ok(Self {
                    intermediate_labels: q.labels().map(str::to_string).collect(),
                    final_labels,
                    intermediate,
                    final_given,
                })
            }
        }
    }

    pub fn has_intermediate_outcomes(&self) -> bool {
        !self.intermediate_labels.is_empty()
    }

    pub fn joint(&self, j: usize, k: usize) -> f64 {
        self.intermediate[j] * self.final_given[j][k]
    }

    pub fn final_index(&self, label: &str) -> Result<usize> {
        self.final_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Unconditional probability of each final outcome.
    pub fn final_marginal(&self) -> Vec<f64> {
        (0..self.final_labels.len())
            .map(|k| (0..self.intermediate.len()).map(|j| self.joint(j, k)).sum())
            .collect()
    }

    /// Joint weights of the intermediate outcomes restricted to final outcome `k`, and their sum.
    pub fn filtered(&self, k: usize) -> (Vec<f64>, f64) {
        let w: Vec<f64> = (0..self.intermediate.len()).map(|j| self.joint(j, k)).collect();
        let total = w.iter().sum();
        (w, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::qubit;

    #[test]
    fn aad_branches() {
        let id = UnitaryOp::identity(2);
        let t = BranchTable::enumerate(
            &qubit::z_plus(),
            &id,
            &Intermediate::Measure(qubit::sigma_x()),
            &id,
            &qubit::sigma_x(),
        )
        .unwrap();
        assert!((t.joint(0, 0) - 0.5).abs() < 1e-12);
        assert!(t.joint(0, 1).abs() < 1e-12);
        assert!(t.joint(1, 0).abs() < 1e-12);
        assert!((t.joint(1, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn impossible_branch_rows_are_zero() {
        let id = UnitaryOp::identity(2);
        let t = BranchTable::enumerate(
            &qubit::z_plus(),
            &id,
            &Intermediate::Measure(qubit::sigma_z()),
            &id,
            &qubit::sigma_x(),
        )
        .unwrap();
        assert_eq!(t.intermediate[1], 0.0);
        assert_eq!(t.final_given[1], vec![0.0, 0.0]);
    }

    #[test]
    fn intermediate_json_shape() {
        assert_eq!(serde_json::to_string(&Intermediate::Nothing).unwrap(), r#""nothing""#);
        let m = Intermediate::Measure(qubit::sigma_z());
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.starts_with(r#"{"measure":{"dim":2"#));
        assert_eq!(serde_json::from_str::<Intermediate>(&json).unwrap(), m);
    }
}

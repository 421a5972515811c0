use serde::{Deserialize, Serialize};

use super::linalg::{norm_sqr, Matrix, C64};
use super::state::check_labels;
use super::{Distribution, PureState, EPS_NORM, EPS_PROB};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: String,
    pub projector: Matrix,
    /// The system is removed when this outcome occurs at an intermediate
    /// time (a polarizer absorbing the photon it blocks). A removed system
    /// registers the same label at the final measurement.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub absorbing: bool,
}

/// A complete family of mutually orthogonal projectors, one per outcome.
/// Projectors of rank greater than one (degenerate outcomes) are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPvm", into = "RawPvm")]
pub struct ProjectiveMeasurement {
    dim: usize,
    outcomes: Vec<Outcome>,
}

#[derive(Serialize, Deserialize)]
struct RawPvm {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl TryFrom<RawPvm> for ProjectiveMeasurement {
    type Error = Error;

    fn try_from(raw: RawPvm) -> Result<Self> {
        let absorbing: Vec<String> = raw.outcomes.iter().filter(|o| o.absorbing).map(|o| o.label.clone()).collect();
        let mut pvm = ProjectiveMeasurement::new(raw.outcomes.into_iter().map(|o| (o.label, o.projector)).collect())?;
        for label in absorbing {
            pvm = pvm.with_absorbing(&label)?;
        }
        if pvm.dim != raw.dim {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: pvm.dim,
            });
        }
        Ok(pvm)
    }
}

impl From<ProjectiveMeasurement> for RawPvm {
    fn from(p: ProjectiveMeasurement) -> Self {
        RawPvm {
            dim: p.dim,
            outcomes: p.outcomes,
        }
    }
}

impl ProjectiveMeasurement {
    pub fn new(outcomes: Vec<(String, Matrix)>) -> Result<Self> {
        let invalid = |msg: String| Error::InvalidMeasurement(msg);
        let dim = match outcomes.first() {
            Some((_, p)) => p.dim(),
            None => return Err(invalid("at least one outcome is required".into())),
        };
        if dim == 0 {
            return Err(invalid("dimension must be positive".into()));
        }
        let labels: Vec<String> = outcomes.iter().map(|(l, _)| l.clone()).collect();
        check_labels(&labels).map_err(invalid)?;

        let mut sum = Matrix::zeros(dim);
        for (label, p) in &outcomes {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !p.is_hermitian(EPS_NORM) {
                return Err(invalid(format!("projector `{label}` is not Hermitian")));
            }
            if !(p * p).approx_eq(p, EPS_NORM) {
                return Err(invalid(format!("projector `{label}` is not idempotent")));
            }
            if p.trace().re < 0.5 {
                return Err(invalid(format!("projector `{label}` is zero")));
            }
            sum = &sum + p;
        }
        for (i, (li, pi)) in outcomes.iter().enumerate() {
            for (lj, pj) in &outcomes[i + 1..] {
                if !(pi * pj).approx_eq(&Matrix::zeros(dim), EPS_NORM) {
                    return Err(invalid(format!("projectors `{li}` and `{lj}` overlap")));
                }
            }
        }
        if !sum.approx_eq(&Matrix::identity(dim), EPS_NORM) {
            return Err(invalid("projectors do not sum to the identity".into()));
        }

        Ok(Self {
            dim,
            outcomes: outcomes
                .into_iter()
                .map(|(label, projector)| Outcome {
                    label,
                    projector,
                    absorbing: false,
                })
                .collect(),
        })
    }

    /// Nondegenerate measurement whose eigenvectors are the given orthonormal states.
    pub fn from_states(states: Vec<(String, PureState)>) -> Result<Self> {
        Self::new(
            states
                .into_iter()
                .map(|(label, s)| {
                    let p = Matrix::outer(s.amplitudes(), s.amplitudes());
                    (label, p)
                })
                .collect(),
        )
    }

    /// Measurement in the basis itself, outcomes named after the basis labels.
    pub fn computational(basis_labels: &[&str]) -> Result<Self> {
        let dim = basis_labels.len();
        Self::from_subsets(
            dim,
            basis_labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.to_string(), vec![i]))
                .collect(),
        )
    }

    /// Diagonal projectors, each onto the span of a set of basis indices.
    pub fn from_subsets(dim: usize, subsets: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let mut outcomes = Vec::with_capacity(subsets.len());
        for (label, indices) in subsets {
            let mut p = Matrix::zeros(dim);
            for i in indices {
                if i >= dim {
                    return Err(Error::InvalidMeasurement(format!(
                        "basis index {i} out of range for dimension {dim}"
                    )));
                }
                p.set(i, i, C64::new(1.0, 0.0));
            }
            outcomes.push((label, p));
        }
        Self::new(outcomes)
    }

    /// Two-outcome measurement {|b⟩⟨b|, I − |b⟩⟨b|} that asks "is the system in `state`?".
    pub fn lift_state(state: &PureState, label: &str, complement_label: &str) -> Result<Self> {
        let p = Matrix::outer(state.amplitudes(), state.amplitudes());
        let q = &Matrix::identity(state.dim()) - &p;
        Self::new(vec![(label.to_string(), p), (complement_label.to_string(), q)])
    }

    /// Marks `label` as an absorbing outcome.
    pub fn with_absorbing(mut self, label: &str) -> Result<Self> {
        let j = self.index_of(label)?;
        self.outcomes[j].absorbing = true;
        Ok(self)
    }

    pub fn is_absorbing(&self, index: usize) -> bool {
        self.outcomes[index].absorbing
    }

    /// For each outcome, the index of the final outcome an absorbed system
    /// registers (`None` for non-absorbing outcomes). Fails if an absorbing
    /// label has no counterpart in `post`.
    pub fn absorption_targets(&self, post: &ProjectiveMeasurement) -> Result<Vec<Option<usize>>> {
        self.outcomes
            .iter()
            .map(|o| {
                if o.absorbing {
                    post.index_of(&o.label).map(Some).map_err(|_| {
                        Error::InvalidProtocol(format!("absorbing outcome `{}` has no matching final outcome", o.label))
                    })
                } else {
                    Ok(None)
                }
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|o| o.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|o| o.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn projector(&self, label: &str) -> Result<&Matrix> {
        Ok(&self.outcomes[self.index_of(label)?].projector)
    }

    /// True when every outcome projector has rank one.
    pub fn is_nondegenerate(&self) -> bool {
        self.outcomes.len() == self.dim
    }

    /// All projector pairs commute.
    pub fn commutes_with(&self, other: &ProjectiveMeasurement) -> bool {
        self.dim == other.dim
            && self.outcomes.iter().all(|a| {
                other.outcomes.iter().all(|b| {
                    let ab = &a.projector * &b.projector;
                    let ba = &b.projector * &a.projector;
                    ab.approx_eq(&ba, EPS_NORM)
                })
            })
    }

    /// P_j v, unnormalized.
    pub(crate) fn project(&self, index: usize, v: &[C64]) -> Vec<C64> {
        self.outcomes[index].projector.apply(v)
    }

    /// ⟨v|P_j|v⟩ for an arbitrary (not necessarily normalized) vector.
    pub(crate) fn weight(&self, index: usize, v: &[C64]) -> f64 {
        norm_sqr(&self.project(index, v))
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: dim,
            })
        }
    }
}

/// Born rule: ⟨ψ|P_j|ψ⟩ for every outcome, in measurement order.
pub fn born_distribution(state: &PureState, pvm: &ProjectiveMeasurement) -> Result<Distribution> {
    pvm.check_dim(state.dim())?;
    let v = state.amplitudes();
    Distribution::new(
        pvm.outcomes
            .iter()
            .enumerate()
            .map(|(j, o)| (o.label.clone(), pvm.weight(j, v))),
    )
}

/// Projection postulate: P_j|ψ⟩ renormalized.
pub fn collapse(state: &PureState, pvm: &ProjectiveMeasurement, label: &str) -> Result<PureState> {
    pvm.check_dim(state.dim())?;
    let j = pvm.index_of(label)?;
    let projected = pvm.project(j, state.amplitudes());
    let probability = norm_sqr(&projected);
    if probability <= EPS_PROB {
        return Err(Error::ZeroProbabilityOutcome {
            label: label.to_string(),
            probability,
        });
    }
    let norm = probability.sqrt();
    state.with_amplitudes(projected.into_iter().map(|a| a / norm).collect())
}

/// Ideal polarizer at angle θ in the plane: "pass" projects onto
/// (cos θ, sin θ), "block" onto (−sin θ, cos θ). Blocked photons are
/// absorbed, so "block" is an absorbing outcome.
pub fn axis_pvm(angle: f64) -> ProjectiveMeasurement {
    let (s, c) = angle.sin_cos();
    let pass = [C64::new(c, 0.0), C64::new(s, 0.0)];
    let block = [C64::new(-s, 0.0), C64::new(c, 0.0)];
    ProjectiveMeasurement::new(vec![
        ("pass".to_string(), Matrix::outer(&pass, &pass)),
        ("block".to_string(), Matrix::outer(&block, &block)),
    ])
    .and_then(|p| p.with_absorbing("block"))
    .expect("rotated axis projectors are complete")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::qubit::{self, POLARIZATION_BASIS};

    #[test]
    fn born_on_eigenstate_and_on_conjugate_basis() {
        let d = born_distribution(&qubit::z_plus(), &qubit::sigma_z()).unwrap();
        assert_eq!(d.get("z+"), Some(1.0));
        assert_eq!(d.get("z-"), Some(0.0));

        let d = born_distribution(&qubit::z_plus(), &qubit::sigma_x()).unwrap();
        assert!((d.prob("x+").unwrap() - 0.5).abs() < EPS_NORM);
        assert!((d.prob("x-").unwrap() - 0.5).abs() < EPS_NORM);
    }

    #[test]
    fn born_dimension_mismatch() {
        let three = PureState::from_real(&["a", "b", "c"], &[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            born_distribution(&three, &qubit::sigma_z()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn collapse_examples() {
        let s = collapse(&qubit::z_plus(), &qubit::sigma_x(), "x+").unwrap();
        assert!(s.approx_eq(&qubit::x_plus(), EPS_NORM));

        let s = collapse(&qubit::z_plus(), &qubit::sigma_z(), "z+").unwrap();
        assert!(s.approx_eq(&qubit::z_plus(), EPS_NORM));

        let labels = ["A", "B", "C"];
        let a = PureState::from_real(&labels, &[1.0, 1.0, 1.0]).unwrap();
        let boxes = ProjectiveMeasurement::from_subsets(3, vec![("in_A".into(), vec![0]), ("not_A".into(), vec![1, 2])]).unwrap();
        let s = collapse(&a, &boxes, "in_A").unwrap();
        assert!(s.approx_eq(&PureState::basis(&labels, "A").unwrap(), EPS_NORM));
    }

    #[test]
    fn collapse_onto_impossible_outcome() {
        let err = collapse(&qubit::z_plus(), &qubit::sigma_z(), "z-").unwrap_err();
        assert!(matches!(err, Error::ZeroProbabilityOutcome { .. }));
        assert!(matches!(
            collapse(&qubit::z_plus(), &qubit::sigma_z(), "nope"),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn axis_pvm_orientation() {
        let horizontal = axis_pvm(0.0);
        assert!(horizontal.commutes_with(&ProjectiveMeasurement::computational(&POLARIZATION_BASIS).unwrap()));
        let x = qubit::polarized(0.0);
        assert_eq!(born_distribution(&x, &horizontal).unwrap().get("pass"), Some(1.0));

        let vertical = axis_pvm(std::f64::consts::FRAC_PI_2);
        let overlap = horizontal.projector("pass").unwrap() * vertical.projector("pass").unwrap();
        assert!(overlap.approx_eq(&Matrix::zeros(2), EPS_NORM));

        let d = born_distribution(&x, &axis_pvm(std::f64::consts::FRAC_PI_4)).unwrap();
        assert!((d.prob("pass").unwrap() - 0.5).abs() < EPS_NORM);
        assert!((d.prob("block").unwrap() - 0.5).abs() < EPS_NORM);
    }

    #[test]
    fn rejects_incomplete_or_overlapping_projectors() {
        let p = Matrix::outer(qubit::z_plus().amplitudes(), qubit::z_plus().amplitudes());
        assert!(ProjectiveMeasurement::new(vec![("only".into(), p.clone())]).is_err());
        let q = Matrix::outer(qubit::x_plus().amplitudes(), qubit::x_plus().amplitudes());
        assert!(ProjectiveMeasurement::new(vec![("a".into(), p.clone()), ("b".into(), q)]).is_err());
        let not_idempotent = p.scale(C64::new(2.0, 0.0));
        assert!(ProjectiveMeasurement::new(vec![("a".into(), not_idempotent)]).is_err());
        let i = Matrix::identity(2);
        assert!(ProjectiveMeasurement::new(vec![("a".into(), i.clone()), ("a".into(), Matrix::zeros(2))]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let pvm = axis_pvm(0.3);
        let json = serde_json::to_string(&pvm).unwrap();
        assert!(json.starts_with(r#"{"dim":2,"outcomes":[{"label":"pass","projector":[[["#));
        let back: ProjectiveMeasurement = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pvm);
    }
}

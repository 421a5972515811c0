use serde::{Deserialize, Serialize};

use super::linalg::{norm_sqr, Matrix, C64, ZERO};
use super::state::{check_labels, normalized};
use super::{ProjectiveMeasurement, PureState, EPS_NORM, EPS_PROB};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Pure state of a two-party system, amplitudes in row-major (left, right) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBipartite", into = "RawBipartite")]
pub struct BipartiteState {
    left_labels: Vec<String>,
    right_labels: Vec<String>,
    amplitudes: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct RawBipartite {
    dims: [usize; 2],
    left_labels: Vec<String>,
    right_labels: Vec<String>,
    amplitudes: Vec<C64>,
}

impl TryFrom<RawBipartite> for BipartiteState {
    type Error = Error;

    fn try_from(raw: RawBipartite) -> Result<Self> {
        if raw.dims != [raw.left_labels.len(), raw.right_labels.len()] {
            return Err(Error::InvalidState("dims disagree with label lists".into()));
        }
        BipartiteState::new(raw.left_labels, raw.right_labels, raw.amplitudes)
    }
}

impl From<BipartiteState> for RawBipartite {
    fn from(b: BipartiteState) -> Self {
        RawBipartite {
            dims: [b.left_labels.len(), b.right_labels.len()],
            left_labels: b.left_labels,
            right_labels: b.right_labels,
            amplitudes: b.amplitudes,
        }
    }
}

impl BipartiteState {
    pub fn new(left_labels: Vec<String>, right_labels: Vec<String>, amplitudes: Vec<C64>) -> Result<Self> {
        if left_labels.is_empty() || right_labels.is_empty() {
            return Err(Error::InvalidState("subsystem dimensions must be positive".into()));
        }
        check_labels(&left_labels).map_err(Error::InvalidState)?;
        check_labels(&right_labels).map_err(Error::InvalidState)?;
        let dim = left_labels.len() * right_labels.len();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let amplitudes = normalized(amplitudes).map_err(Error::InvalidState)?;
        Ok(Self {
            left_labels,
            right_labels,
            amplitudes,
        })
    }

    /// Scales real amplitudes to unit norm.
    pub fn from_real(left: &[&str], right: &[&str], amplitudes: &[f64]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(
            left.iter().map(|s| s.to_string()).collect(),
            right.iter().map(|s| s.to_string()).collect(),
            amplitudes.iter().map(|&a| C64::new(a / norm, 0.0)).collect(),
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.left_labels.len(), self.right_labels.len())
    }

    pub fn left_labels(&self) -> &[String] {
        &self.left_labels
    }

    pub fn right_labels(&self) -> &[String] {
        &self.right_labels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, left: usize, right: usize) -> C64 {
        self.amplitudes[left * self.right_labels.len() + right]
    }

    /// The same vector as a single system with product labels `lr`.
    pub fn to_pure(&self) -> Result<PureState> {
        let labels = self
            .left_labels
            .iter()
            .flat_map(|l| self.right_labels.iter().map(move |r| format!("{l}{r}")))
            .collect();
        PureState::new(labels, self.amplitudes.clone())
    }

    pub fn approx_eq(&self, other: &BipartiteState, tol: f64) -> bool {
        self.dims() == other.dims()
            && self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    fn side_dim(&self, side: Side) -> usize {
        match side {
            Side::Left => self.left_labels.len(),
            Side::Right => self.right_labels.len(),
        }
    }
}

impl ProjectiveMeasurement {
    /// The measurement acting on one factor of a product space, identity on the other.
    pub fn on_subsystem(&self, side: Side, other_dim: usize) -> Result<ProjectiveMeasurement> {
        let id = Matrix::identity(other_dim);
        let mut lifted = ProjectiveMeasurement::new(
            self.outcomes()
                .iter()
                .map(|o| {
                    let full = match side {
                        Side::Left => o.projector.kron(&id),
                        Side::Right => id.kron(&o.projector),
                    };
                    (o.label.clone(), full)
                })
                .collect(),
        )?;
        for o in self.outcomes().iter().filter(|o| o.absorbing) {
            lifted = lifted.with_absorbing(&o.label)?;
        }
        Ok(lifted)
    }
}

pub fn tensor(left: &PureState, right: &PureState) -> BipartiteState {
    let amplitudes = left
        .amplitudes()
        .iter()
        .flat_map(|l| right.amplitudes().iter().map(move |r| l * r))
        .collect();
    BipartiteState::new(left.labels().to_vec(), right.labels().to_vec(), amplitudes)
        .expect("product of unit vectors is a unit vector")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsystemOutcome {
    pub label: String,
    pub probability: f64,
    /// Post-measurement joint state; absent when the outcome cannot occur.
    pub state: Option<BipartiteState>,
}

/// Measures one party and reports every outcome with its conditional joint state.
pub fn measure_subsystem(bi: &BipartiteState, pvm: &ProjectiveMeasurement, side: Side) -> Result<Vec<SubsystemOutcome>> {
    let dim = bi.side_dim(side);
    pvm.check_dim(dim)?;
    let (dl, dr) = bi.dims();
    let other = if side == Side::Left { dr } else { dl };
    let full = pvm.on_subsystem(side, other)?;
    let mut out = Vec::with_capacity(full.len());
    for (j, o) in full.outcomes().iter().enumerate() {
        let projected = full.project(j, &bi.amplitudes);
        let probability = norm_sqr(&projected);
        let state = if probability > EPS_PROB {
            let n = probability.sqrt();
            Some(BipartiteState::new(
                bi.left_labels.clone(),
                bi.right_labels.clone(),
                projected.into_iter().map(|a| a / n).collect(),
            )?)
        } else {
            None
        };
        out.push(SubsystemOutcome {
            label: o.label.clone(),
            probability: probability.clamp(0.0, 1.0),
            state,
        });
    }
    Ok(out)
}

/// A valid one-party density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct DensityMatrix {
    matrix: Matrix,
}

#[derive(Serialize, Deserialize)]
struct RawDensity {
    dim: usize,
    matrix: Matrix,
}

impl TryFrom<RawDensity> for DensityMatrix {
    type Error = Error;

    fn try_from(raw: RawDensity) -> Result<Self> {
        if raw.dim != raw.matrix.dim() {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: raw.matrix.dim(),
            });
        }
        DensityMatrix::new(raw.matrix)
    }
}

impl From<DensityMatrix> for RawDensity {
    fn from(d: DensityMatrix) -> Self {
        RawDensity {
            dim: d.matrix.dim(),
            matrix: d.matrix,
        }
    }
}

impl DensityMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.dim() == 0 {
            return Err(Error::InvalidOperator("dimension must be positive".into()));
        }
        if !matrix.is_hermitian(EPS_NORM) {
            return Err(Error::InvalidOperator("density matrix is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > EPS_NORM || tr.im.abs() > EPS_NORM {
            return Err(Error::InvalidOperator(format!("trace is {tr}, not 1")));
        }
        if matrix.hermitian_eigenvalues().iter().any(|&e| e < -EPS_NORM) {
            return Err(Error::InvalidOperator("density matrix has a negative eigenvalue".into()));
        }
        Ok(Self { matrix })
    }

    /// The maximally mixed state I/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: Matrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.hermitian_eigenvalues()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Tr ρ²
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }
}

/// Partial trace over the side *not* named by `side`.
pub fn reduced_density(bi: &BipartiteState, side: Side) -> DensityMatrix {
    let (dl, dr) = bi.dims();
    let mut rho = Matrix::zeros(bi.side_dim(side));
    match side {
        Side::Left => {
            for i in 0..dl {
                for j in 0..dl {
                    let v: C64 = (0..dr)
                        .map(|k| bi.amplitude(i, k) * bi.amplitude(j, k).conj())
                        .fold(ZERO, |a, b| a + b);
                    rho.set(i, j, v);
                }
            }
        }
        Side::Right => {
            for i in 0..dr {
                for j in 0..dr {
                    let v: C64 = (0..dl)
                        .map(|k| bi.amplitude(k, i) * bi.amplitude(k, j).conj())
                        .fold(ZERO, |a, b| a + b);
                    rho.set(i, j, v);
                }
            }
        }
    }
    DensityMatrix::new(rho).expect("reduced state of a unit vector is a density matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::qubit;

    #[test]
    fn tensor_of_basis_states() {
        let t = tensor(&qubit::z_plus(), &qubit::z_minus());
        let expected = [0.0, 1.0, 0.0, 0.0];
        for (a, e) in t.amplitudes().iter().zip(expected) {
            assert!((a - C64::new(e, 0.0)).norm() < EPS_NORM);
        }
        let labels: Vec<String> = t.to_pure().unwrap().labels().to_vec();
        assert_eq!(labels, ["z+z+", "z+z-", "z-z+", "z-z-"]);
    }

    #[test]
    fn tensor_of_x_plus_is_uniform() {
        let t = tensor(&qubit::x_plus(), &qubit::x_plus());
        for a in t.amplitudes() {
            assert!((a - C64::new(0.5, 0.0)).norm() < EPS_NORM);
        }
    }

    #[test]
    fn singlet_measured_along_z() {
        let out = measure_subsystem(&qubit::singlet(), &qubit::sigma_z(), Side::Left).unwrap();
        assert_eq!(out[0].label, "z+");
        assert!((out[0].probability - 0.5).abs() < EPS_NORM);
        let up_down = tensor(&qubit::z_plus(), &qubit::z_minus());
        assert!(out[0].state.as_ref().unwrap().approx_eq(&up_down, EPS_NORM));
        let down_up = tensor(&qubit::z_minus(), &qubit::z_plus());
        // −|z−z+⟩/√2 renormalizes to −|z−z+⟩: same ray.
        let cond = out[1].state.as_ref().unwrap().to_pure().unwrap();
        assert!(cond.same_ray(&down_up.to_pure().unwrap(), EPS_NORM));
    }

    #[test]
    fn singlet_measured_along_x() {
        let out = measure_subsystem(&qubit::singlet(), &qubit::sigma_x(), Side::Left).unwrap();
        let plus_minus = tensor(&qubit::x_plus(), &qubit::x_minus()).to_pure().unwrap();
        let minus_plus = tensor(&qubit::x_minus(), &qubit::x_plus()).to_pure().unwrap();
        assert!((out[0].probability - 0.5).abs() < EPS_NORM);
        assert!((out[1].probability - 0.5).abs() < EPS_NORM);
        assert!(out[0]
            .state
            .as_ref()
            .unwrap()
            .to_pure()
            .unwrap()
            .same_ray(&plus_minus, EPS_NORM));
        assert!(out[1]
            .state
            .as_ref()
            .unwrap()
            .to_pure()
            .unwrap()
            .same_ray(&minus_plus, EPS_NORM));
    }

    #[test]
    fn product_state_has_no_conditional_for_impossible_outcome() {
        let t = tensor(&qubit::z_plus(), &qubit::z_plus());
        let out = measure_subsystem(&t, &qubit::sigma_z(), Side::Left).unwrap();
        assert_eq!(out[0].probability, 1.0);
        assert_eq!(out[1].probability, 0.0);
        assert!(out[1].state.is_none());
    }

    #[test]
    fn measure_subsystem_dimension_mismatch() {
        let pvm = ProjectiveMeasurement::computational(&["a", "b", "c"]).unwrap();
        assert!(matches!(
            measure_subsystem(&qubit::singlet(), &pvm, Side::Right),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn singlet_reduces_to_half_identity() {
        for side in [Side::Left, Side::Right] {
            let rho = reduced_density(&qubit::singlet(), side);
            assert!(rho.matrix().approx_eq(DensityMatrix::maximally_mixed(2).matrix(), EPS_NORM));
        }
    }

    #[test]
    fn product_reduces_to_pure_projector() {
        let rho = reduced_density(&tensor(&qubit::z_plus(), &qubit::z_minus()), Side::Left);
        let expected = Matrix::outer(qubit::z_plus().amplitudes(), qubit::z_plus().amplitudes());
        assert!(rho.matrix().approx_eq(&expected, EPS_NORM));
        assert!((rho.purity() - 1.0).abs() < EPS_NORM);
    }

    #[test]
    fn density_matrix_validation() {
        let neg = Matrix::from_real_rows(&[&[1.5, 0.0], &[0.0, -0.5]]).unwrap();
        assert!(DensityMatrix::new(neg).is_err());
        let trace2 = Matrix::identity(2);
        assert!(DensityMatrix::new(trace2).is_err());
    }

    #[test]
    fn bipartite_json_round_trip() {
        let s = qubit::singlet();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains(r#""dims":[2,2]"#));
        assert_eq!(serde_json::from_str::<BipartiteState>(&json).unwrap(), s);
    }
}

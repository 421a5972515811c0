use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::linalg::{inner, norm_sqr, C64};
use super::{EPS_NORM, RENORMALIZE_LIMIT};
use crate::{Error, Result};

/// A unit vector over a labeled orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState", into = "RawState")]
pub struct PureState {
    labels: Vec<String>,
    amplitudes: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct RawState {
    dim: usize,
    basis_labels: Vec<String>,
    amplitudes: Vec<C64>,
}

impl TryFrom<RawState> for PureState {
    type Error = Error;

    fn try_from(raw: RawState) -> Result<Self> {
        if raw.dim != raw.basis_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: raw.basis_labels.len(),
            });
        }
        PureState::new(raw.basis_labels, raw.amplitudes)
    }
}

impl From<PureState> for RawState {
    fn from(s: PureState) -> Self {
        RawState {
            dim: s.dim(),
            basis_labels: s.labels,
            amplitudes: s.amplitudes,
        }
    }
}

pub(crate) fn check_labels(labels: &[String]) -> Result<(), String> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(format!("duplicate label `{l}`"));
        }
    }
    Ok(())
}

/// Brings `amplitudes` to unit norm, or explains why it cannot.
pub(crate) fn normalized(mut amplitudes: Vec<C64>) -> Result<Vec<C64>, String> {
    if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err("amplitudes must be finite".into());
    }
    let norm = norm_sqr(&amplitudes).sqrt();
    let deviation = (norm - 1.0).abs();
    if deviation > RENORMALIZE_LIMIT {
        return Err(format!("norm {norm} is not 1"));
    }
    if deviation > EPS_NORM {
        for a in &mut amplitudes {
            *a /= norm;
        }
    }
    Ok(amplitudes)
}

impl PureState {
    pub fn new(labels: Vec<String>, amplitudes: Vec<C64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidState("dimension must be positive".into()));
        }
        if labels.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: amplitudes.len(),
            });
        }
        check_labels(&labels).map_err(Error::InvalidState)?;
        let amplitudes = normalized(amplitudes).map_err(Error::InvalidState)?;
        Ok(Self { labels, amplitudes })
    }

    /// Like [`PureState::new`] but scales any nonzero vector to unit norm.
    pub fn normalize(labels: Vec<String>, amplitudes: Vec<C64>) -> Result<Self> {
        let norm = norm_sqr(&amplitudes).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(labels, amplitudes.into_iter().map(|a| a / norm).collect())
    }

    pub fn from_real(labels: &[&str], amplitudes: &[f64]) -> Result<Self> {
        Self::normalize(
            labels.iter().map(|s| s.to_string()).collect(),
            amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    /// The basis vector carrying `label`.
    pub fn basis(labels: &[&str], label: &str) -> Result<Self> {
        let idx = labels
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        let mut amps = vec![0.0; labels.len()];
        amps[idx] = 1.0;
        Self::from_real(labels, &amps)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: &str) -> Option<C64> {
        self.labels.iter().position(|l| l == label).map(|i| self.amplitudes[i])
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.check_dim(other.dim())?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// The same ray with every amplitude multiplied by `phase` (taken modulo its own modulus).
    pub fn with_global_phase(&self, phase: C64) -> Self {
        let unit = phase / phase.norm();
        Self {
            labels: self.labels.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * unit).collect(),
        }
    }

    /// Replaces the amplitudes, keeping the basis labels.
    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<C64>) -> Result<Self> {
        Self::new(self.labels.clone(), amplitudes)
    }

    /// `|⟨self|other⟩| ≈ 1`, i.e. the two vectors are the same up to a global phase.
    pub fn same_ray(&self, other: &PureState, tol: f64) -> bool {
        self.inner(other).map(|ip| (ip.norm() - 1.0).abs() <= tol).unwrap_or(false)
    }

    pub fn approx_eq(&self, other: &PureState, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            })
        }
    }
}

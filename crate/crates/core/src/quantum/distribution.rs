use serde::{Deserialize, Serialize};

use super::state::check_labels;
use super::EPS_NORM;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub label: String,
    pub probability: f64,
}

/// A probability distribution over labeled outcomes, in measurement order.
///
/// The only distribution that does not sum to one is the empty one, which
/// stands for "no outcomes exist" (e.g. the intermediate outcomes of a
/// protocol with nothing happening at the intermediate time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Entry>", into = "Vec<Entry>")]
pub struct Distribution {
    entries: Vec<Entry>,
}

impl TryFrom<Vec<Entry>> for Distribution {
    type Error = Error;

    fn try_from(entries: Vec<Entry>) -> Result<Self> {
        Self::new(entries.into_iter().map(|e| (e.label, e.probability)))
    }
}

impl From<Distribution> for Vec<Entry> {
    fn from(d: Distribution) -> Self {
        d.entries
    }
}

impl Distribution {
    /// Validates and stores `(label, probability)` pairs. Values within
    /// [`EPS_NORM`] of the unit interval are clamped into it.
    pub fn new<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut entries = Vec::new();
        for (label, p) in pairs {
            let label = label.into();
            if !p.is_finite() || !(-EPS_NORM..=1.0 + EPS_NORM).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} for `{label}` is outside [0, 1]"
                )));
            }
            entries.push(Entry {
                label,
                probability: p.clamp(0.0, 1.0),
            });
        }
        let labels: Vec<String> = entries.iter().map(|e| e.label.clone()).collect();
        check_labels(&labels).map_err(Error::InvalidDistribution)?;
        if !entries.is_empty() {
            let total: f64 = entries.iter().map(|e| e.probability).sum();
            if (total - 1.0).abs() > EPS_NORM {
                return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
            }
        }
        Ok(Self { entries })
    }

    /// Normalizes nonnegative weights. Fails if they are all zero.
    pub fn from_weights<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let pairs: Vec<(String, f64)> = pairs.into_iter().map(|(l, w)| (l.into(), w)).collect();
        let total: f64 = pairs.iter().map(|(_, w)| w.max(0.0)).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(pairs.into_iter().map(|(l, w)| (l, w.max(0.0) / total)))
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.probability)
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.probability)
    }

    pub fn prob(&self, label: &str) -> Result<f64> {
        self.get(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn total(&self) -> f64 {
        self.probabilities().sum()
    }

    fn same_labels(&self, other: &Distribution) -> Result<()> {
        let mine: Vec<&str> = self.labels().collect();
        let theirs: Vec<&str> = other.labels().collect();
        if mine == theirs {
            Ok(())
        } else {
            Err(Error::LabelMismatch(format!("{mine:?} vs {theirs:?}")))
        }
    }

    /// Total variation distance, half the L1 distance. Both sides must list the same labels in the same order.
    pub fn tvd(&self, other: &Distribution) -> Result<f64> {
        self.same_labels(other)?;
        let l1: f64 = self
            .probabilities()
            .zip(other.probabilities())
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok((0.5 * l1).min(1.0))
    }

    /// Largest per-label absolute difference.
    pub fn max_abs_diff(&self, other: &Distribution) -> Result<f64> {
        self.same_labels(other)?;
        Ok(self
            .probabilities()
            .zip(other.probabilities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tvd_of_certain_vs_fair() {
        let a = Distribution::new([("x+", 1.0), ("x-", 0.0)]).unwrap();
        let b = Distribution::new([("x+", 0.5), ("x-", 0.5)]).unwrap();
        assert_eq!(a.tvd(&b).unwrap(), 0.5);
    }

    #[test]
    fn tvd_requires_same_labels() {
        let a = Distribution::new([("x+", 1.0), ("x-", 0.0)]).unwrap();
        let b = Distribution::new([("z+", 1.0), ("z-", 0.0)]).unwrap();
        assert!(matches!(a.tvd(&b), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn rejects_bad_sums_and_duplicates() {
        assert!(Distribution::new([("a", 0.5), ("b", 0.4)]).is_err());
        assert!(Distribution::new([("a", 0.5), ("a", 0.5)]).is_err());
        assert!(Distribution::new([("a", 1.5), ("b", -0.5)]).is_err());
    }

    #[test]
    fn clamps_rounding_noise() {
        let d = Distribution::new([("a", 1.0 + 1e-13), ("b", -1e-13)]).unwrap();
        assert_eq!(d.get("a"), Some(1.0));
        assert_eq!(d.get("b"), Some(0.0));
    }

    #[test]
    fn serde_keeps_order() {
        let d = Distribution::new([("z", 0.25), ("a", 0.75)]).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"[{"label":"z","probability":0.25},{"label":"a","probability":0.75}]"#);
        assert_eq!(serde_json::from_str::<Distribution>(&json).unwrap(), d);
    }
}

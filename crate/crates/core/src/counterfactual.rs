//! Two readings of "had `Q` been measured at `t`, its outcomes would follow the ABL rule".
//!
//! * [`Flavor::SingleAntecedent`]: the counterfactual world keeps the
//!   preparation and puts `Q` at `t` (replacing whatever was actually measured
//!   there) and nothing else. The post-selection is *not* imposed, so the
//!   world's `Q` statistics are the plain Born distribution at `t`.
//! * [`Flavor::CompoundAntecedent`]: the world additionally has the same
//!   post-selection outcome `b`, i.e. its `Q` statistics are conditioned on `b`.
//!
//! A [`Verdict`] compares the ABL claim against the world's statistics and
//! attaches a cotenability test: does inserting `Q` change the distribution of
//! `t_b` outcomes that the claim treats as a fixed background?

use serde::{Deserialize, Serialize};

use crate::abl::{abl_distribution, post_outcome_distribution};
use crate::ensemble::Protocol;
use crate::paths::Intermediate;
use crate::quantum::{Distribution, ProjectiveMeasurement, EPS_NORM, EPS_PROB};
use crate::{Error, Result};

/// Cotenability threshold on the total variation distance of `t_b` outcomes.
pub const EPS_COTEN: f64 = EPS_NORM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    #[serde(rename = "single")]
    SingleAntecedent,
    #[serde(rename = "compound")]
    CompoundAntecedent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    False,
    TriviallyTrue,
    NontriviallyTrue,
    TrueByCoincidence,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::False => "FALSE",
            Classification::TriviallyTrue => "TRIVIALLY_TRUE",
            Classification::NontriviallyTrue => "NONTRIVIALLY_TRUE",
            Classification::TrueByCoincidence => "TRUE_BY_COINCIDENCE",
        }
    }

    /// Single antecedent: false unless the claim happens to hold.
    /// Compound antecedent: always holds; nontrivial only if the background is cotenable.
    pub fn decide(flavor: Flavor, max_deviation: f64, cotenable: bool) -> Self {
        match flavor {
            Flavor::SingleAntecedent if max_deviation <= EPS_NORM => Classification::TrueByCoincidence,
            Flavor::SingleAntecedent => Classification::False,
            Flavor::CompoundAntecedent if cotenable => Classification::NontriviallyTrue,
            Flavor::CompoundAntecedent => Classification::TriviallyTrue,
        }
    }
}

/// An actual world (`base_protocol`, whose selection label is the observed `b`)
/// plus the measurement `query` that was not performed at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStatement", into = "RawStatement")]
pub struct CounterfactualStatement {
    base_protocol: Protocol,
    query: ProjectiveMeasurement,
    flavor: Flavor,
}

#[derive(Serialize, Deserialize)]
struct RawStatement {
    base_protocol: Protocol,
    query: ProjectiveMeasurement,
    flavor: Flavor,
}

impl TryFrom<RawStatement> for CounterfactualStatement {
    type Error = Error;

    fn try_from(raw: RawStatement) -> Result<Self> {
        CounterfactualStatement::new(raw.base_protocol, raw.query, raw.flavor)
    }
}

impl From<CounterfactualStatement> for RawStatement {
    fn from(s: CounterfactualStatement) -> Self {
        RawStatement {
            base_protocol: s.base_protocol,
            query: s.query,
            flavor: s.flavor,
        }
    }
}

impl CounterfactualStatement {
    pub fn new(base_protocol: Protocol, query: ProjectiveMeasurement, flavor: Flavor) -> Result<Self> {
        query.check_dim(base_protocol.dim())?;
        if base_protocol.selection().is_none() {
            return Err(Error::InvalidStatement(
                "the actual world needs an observed post-selection outcome".into(),
            ));
        }
        if matches!(base_protocol.intermediate(), Intermediate::Unitary(_)) {
            return Err(Error::InvalidStatement(
                "the actual intermediate stage must be nothing or a measurement".into(),
            ));
        }
        Ok(Self {
            base_protocol,
            query,
            flavor,
        })
    }

    pub fn base_protocol(&self) -> &Protocol {
        &self.base_protocol
    }

    pub fn query(&self) -> &ProjectiveMeasurement {
        &self.query
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn with_flavor(&self, flavor: Flavor) -> Self {
        Self { flavor, ..self.clone() }
    }

    fn selection(&self) -> &str {
        self.base_protocol.selection().expect("checked at construction")
    }

    /// The counterfactual world: the actual protocol with `query` at `t`.
    pub fn world(&self) -> Protocol {
        self.base_protocol
            .with_intermediate(Intermediate::Measure(self.query.clone()))
            .expect("dimensions checked at construction")
    }
}

/// Distribution of `query` outcomes in the counterfactual world the statement describes.
pub fn counterfactual_distribution(stmt: &CounterfactualStatement) -> Result<Distribution> {
    let table = stmt.world().branch_table()?;
    let labels = stmt.query.labels();
    match stmt.flavor {
        Flavor::SingleAntecedent => Distribution::new(labels.zip(table.intermediate.iter().copied())),
        Flavor::CompoundAntecedent => {
            let k = table.final_index(stmt.selection())?;
            let (weights, total) = table.filtered(k);
            if total <= EPS_PROB {
                return Err(Error::ImpossiblePostSelection {
                    label: stmt.selection().to_string(),
                    weight: total,
                });
            }
            Distribution::new(labels.zip(weights.into_iter().map(|w| w / total)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotenabilityReport {
    /// `t_b` outcomes with the actual intermediate stage.
    pub undisturbed: Distribution,
    /// `t_b` outcomes with `query` performed at `t` instead.
    pub disturbed: Distribution,
    pub tvd: f64,
    /// disturbed(b) − undisturbed(b); absent when the protocol selects no outcome.
    pub delta_selected: Option<f64>,
    pub cotenable: bool,
}

/// Compares the `t_b` statistics with and without `query` inserted at `t`.
pub fn cotenability_report(base_protocol: &Protocol, query: &ProjectiveMeasurement) -> Result<CotenabilityReport> {
    query.check_dim(base_protocol.dim())?;
    let undisturbed = match base_protocol.intermediate() {
        Intermediate::Unitary(_) => {
            let table = base_protocol.branch_table()?;
            Distribution::new(table.final_labels.iter().cloned().zip(table.final_marginal()))?
        }
        stage => post_outcome_distribution(&base_protocol.selection_base()?, stage.measurement())?,
    };
    let actual_timeline = base_protocol.with_intermediate(Intermediate::Nothing)?;
    let disturbed = post_outcome_distribution(&actual_timeline.selection_base()?, Some(query))?;
    let tvd = undisturbed.tvd(&disturbed)?;
    let delta_selected = match base_protocol.selection() {
        Some(b) => Some(disturbed.prob(b)? - undisturbed.prob(b)?),
        None => None,
    };
    Ok(CotenabilityReport {
        undisturbed,
        disturbed,
        tvd,
        delta_selected,
        cotenable: tvd <= EPS_COTEN,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub flavor: Flavor,
    /// What the ABL rule asserts for `query` given the actual pre- and post-selection.
    pub claimed: Distribution,
    /// What the statement's counterfactual world actually yields.
    pub counterfactual_world: Distribution,
    /// Total variation distance between the two.
    pub max_deviation: f64,
    pub cotenable: bool,
    pub classification: Classification,
    pub cotenability: CotenabilityReport,
}

pub fn evaluate(stmt: &CounterfactualStatement) -> Result<Verdict> {
    let ctx = stmt.base_protocol.selection_context()?;
    let claimed = abl_distribution(&ctx, &stmt.query)?;
    let counterfactual_world = counterfactual_distribution(stmt)?;
    let max_deviation = claimed.tvd(&counterfactual_world)?;
    let cotenability = cotenability_report(&stmt.base_protocol, &stmt.query)?;
    let cotenable = cotenability.cotenable;
    Ok(Verdict {
        flavor: stmt.flavor,
        classification: Classification::decide(stmt.flavor, max_deviation, cotenable),
        claimed,
        counterfactual_world,
        max_deviation,
        cotenable,
        cotenability,
    })
}

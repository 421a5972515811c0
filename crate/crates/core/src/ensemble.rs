//! Seeded Monte Carlo realization of pre/post-selection protocols.
//!
//! Each trial prepares the state, evolves it to `t`, realizes the intermediate
//! stage, evolves it to `t_b` and samples the final measurement. Trial `i`
//! draws its randomness from a ChaCha8 stream keyed by `(seed, i)`, so the
//! counts depend only on `(protocol, trials, seed)` and not on how trials are
//! scheduled across threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abl::{SelectionBase, SelectionContext};
use crate::paths::{BranchTable, Intermediate};
use crate::quantum::{Distribution, ProjectiveMeasurement, PureState, UnitaryOp, EPS_NORM, EPS_PROB};
use crate::{Error, Result};

/// Default statistical gate width, in standard deviations.
pub const DEFAULT_Z: f64 = 5.0;

/// Default trial count for acceptance-grade runs.
pub const DEFAULT_TRIALS: u64 = 100_000;

/// The `t_a` / `t` / `t_b` timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProtocol", into = "RawProtocol")]
pub struct Protocol {
    preparation: PureState,
    pre_to_t: UnitaryOp,
    intermediate: Intermediate,
    t_to_post: UnitaryOp,
    post_pvm: ProjectiveMeasurement,
    selection: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawProtocol {
    preparation: PureState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pre_to_t: Option<UnitaryOp>,
    #[serde(default = "nothing")]
    intermediate: Intermediate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_to_post: Option<UnitaryOp>,
    post_pvm: ProjectiveMeasurement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    selection: Option<String>,
}

fn nothing() -> Intermediate {
    Intermediate::Nothing
}

impl TryFrom<RawProtocol> for Protocol {
    type Error = Error;

    fn try_from(raw: RawProtocol) -> Result<Self> {
        let dim = raw.preparation.dim();
        let mut p = Protocol::new(raw.preparation, raw.intermediate, raw.post_pvm)?.with_evolution(
            raw.pre_to_t.unwrap_or_else(|| UnitaryOp::identity(dim)),
            raw.t_to_post.unwrap_or_else(|| UnitaryOp::identity(dim)),
        )?;
        if let Some(label) = raw.selection {
            p = p.with_selection(&label)?;
        }
        Ok(p)
    }
}

impl From<Protocol> for RawProtocol {
    fn from(p: Protocol) -> Self {
        let keep = |u: UnitaryOp| (!u.is_identity()).then_some(u);
        RawProtocol {
            preparation: p.preparation,
            pre_to_t: keep(p.pre_to_t),
            intermediate: p.intermediate,
            t_to_post: keep(p.t_to_post),
            post_pvm: p.post_pvm,
            selection: p.selection,
        }
    }
}

impl Protocol {
    pub fn new(preparation: PureState, intermediate: Intermediate, post_pvm: ProjectiveMeasurement) -> Result<Self> {
        let dim = preparation.dim();
        post_pvm.check_dim(dim)?;
        intermediate.check(dim, &post_pvm)?;
        Ok(Self {
            preparation,
            pre_to_t: UnitaryOp::identity(dim),
            intermediate,
            t_to_post: UnitaryOp::identity(dim),
            post_pvm,
            selection: None,
        })
    }

    pub fn with_evolution(mut self, pre_to_t: UnitaryOp, t_to_post: UnitaryOp) -> Result<Self> {
        self.preparation.check_dim(pre_to_t.dim())?;
        self.preparation.check_dim(t_to_post.dim())?;
        self.pre_to_t = pre_to_t;
        self.t_to_post = t_to_post;
        Ok(self)
    }

    pub fn with_selection(mut self, label: &str) -> Result<Self> {
        self.post_pvm.index_of(label)?;
        self.selection = Some(label.to_string());
        Ok(self)
    }

    /// The same timeline with a different intermediate stage.
    pub fn with_intermediate(&self, intermediate: Intermediate) -> Result<Self> {
        intermediate.check(self.dim(), &self.post_pvm)?;
        Ok(Self {
            intermediate,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.preparation.dim()
    }

    pub fn preparation(&self) -> &PureState {
        &self.preparation
    }

    pub fn intermediate(&self) -> &Intermediate {
        &self.intermediate
    }

    pub fn post_pvm(&self) -> &ProjectiveMeasurement {
        &self.post_pvm
    }

    pub fn selection(&self) -> Option<&str> {
        self.selection.as_deref()
    }

    pub fn pre_to_t(&self) -> &UnitaryOp {
        &self.pre_to_t
    }

    pub fn t_to_post(&self) -> &UnitaryOp {
        &self.t_to_post
    }

    /// The analytic selection data shared by this protocol: preparation,
    /// final measurement and evolutions. An intermediate unitary is not
    /// representable there and is rejected.
    pub fn selection_base(&self) -> Result<SelectionBase> {
        if matches!(self.intermediate, Intermediate::Unitary(_)) {
            return Err(Error::InvalidProtocol(
                "an intermediate unitary has no ABL counterpart".into(),
            ));
        }
        SelectionBase::new(self.preparation.clone(), self.post_pvm.clone())?
            .with_evolution(self.pre_to_t.clone(), self.t_to_post.clone())
    }

    /// [`Protocol::selection_base`] with the selected outcome attached.
    pub fn selection_context(&self) -> Result<SelectionContext> {
        let label = self
            .selection
            .as_deref()
            .ok_or_else(|| Error::InvalidProtocol("protocol has no post-selection label".into()))?;
        self.selection_base()?.select(label)
    }

    pub fn branch_table(&self) -> Result<BranchTable> {
        BranchTable::enumerate(
            &self.preparation,
            &self.pre_to_t,
            &self.intermediate,
            &self.t_to_post,
            &self.post_pvm,
        )
    }
}

/// How trials are scheduled. Both give identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub intermediate_outcome: Option<String>,
    pub final_outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub intermediate_outcome: Option<String>,
    pub final_outcome: String,
    pub count: u64,
}

/// Joint counts of a Monte Carlo run, listed for every (intermediate, final)
/// pair in measurement order, zero counts included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub protocol: Protocol,
    pub trials: u64,
    pub seed: u64,
    pub counts: Vec<CountEntry>,
}

/// Inverse-CDF draw over `probs`. Weights at or below [`EPS_PROB`] are never picked.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let cleaned: Vec<f64> = probs.iter().map(|&p| if p <= EPS_PROB { 0.0 } else { p.min(1.0) }).collect();
    let total: f64 = cleaned.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in cleaned.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

struct Sampler {
    table: BranchTable,
    base_rng: ChaCha8Rng,
}

impl Sampler {
    fn new(protocol: &Protocol, seed: u64) -> Result<Self> {
        Ok(Self {
            table: protocol.branch_table()?,
            base_rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// (intermediate branch, final outcome) of trial `index`.
    fn trial(&self, index: u64) -> (usize, usize) {
        let mut rng = self.base_rng.clone();
        rng.set_stream(index);
        let j = sample_index(&self.table.intermediate, &mut rng);
        let k = sample_index(&self.table.final_given[j], &mut rng);
        (j, k)
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::NoTrials)
    } else {
        Ok(())
    }
}

pub fn run_ensemble(protocol: &Protocol, trials: u64, seed: u64) -> Result<EnsembleStats> {
    run_ensemble_with(protocol, trials, seed, Execution::default())
}

pub fn run_ensemble_with(protocol: &Protocol, trials: u64, seed: u64, execution: Execution) -> Result<EnsembleStats> {
    check_trials(trials)?;
    let sampler = Sampler::new(protocol, seed)?;
    let rows = sampler.table.intermediate.len();
    let cols = sampler.table.final_labels.len();
    let tally = |mut acc: Vec<u64>, i: u64| {
        let (j, k) = sampler.trial(i);
        acc[j * cols + k] += 1;
        acc
    };
    let grid = match execution {
        Execution::Serial => (0..trials).fold(vec![0u64; rows * cols], tally),
        Execution::Parallel => (0..trials).into_par_iter().fold(|| vec![0u64; rows * cols], tally).reduce(
            || vec![0u64; rows * cols],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        ),
    };

    let table = &sampler.table;
    let mut counts = Vec::with_capacity(rows * cols);
    for j in 0..rows {
        for k in 0..cols {
            counts.push(CountEntry {
                intermediate_outcome: table.intermediate_labels.get(j).cloned(),
                final_outcome: table.final_labels[k].clone(),
                count: grid[j * cols + k],
            });
        }
    }
    Ok(EnsembleStats {
        protocol: protocol.clone(),
        trials,
        seed,
        counts,
    })
}

/// Per-trial outcomes, in trial order.
pub fn trial_records(protocol: &Protocol, trials: u64, seed: u64, execution: Execution) -> Result<Vec<TrialRecord>> {
    check_trials(trials)?;
    let sampler = Sampler::new(protocol, seed)?;
    let record = |i: u64| {
        let (j, k) = sampler.trial(i);
        TrialRecord {
            trial_index: i,
            intermediate_outcome: sampler.table.intermediate_labels.get(j).cloned(),
            final_outcome: sampler.table.final_labels[k].clone(),
        }
    };
    Ok(match execution {
        Execution::Serial => (0..trials).map(record).collect(),
        Execution::Parallel => (0..trials).into_par_iter().map(record).collect(),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl EnsembleStats {
    pub fn final_labels(&self) -> impl Iterator<Item = &str> {
        self.protocol.post_pvm.labels()
    }

    /// Trials whose final outcome is `label`.
    pub fn final_count(&self, label: &str) -> u64 {
        self.counts.iter().filter(|c| c.final_outcome == label).map(|c| c.count).sum()
    }

    /// Trials whose intermediate outcome is `label`, regardless of the final outcome.
    pub fn intermediate_count(&self, label: &str) -> u64 {
        self.counts
            .iter()
            .filter(|c| c.intermediate_outcome.as_deref() == Some(label))
            .map(|c| c.count)
            .sum()
    }

    pub fn count(&self, intermediate: Option<&str>, final_outcome: &str) -> u64 {
        self.counts
            .iter()
            .filter(|c| c.intermediate_outcome.as_deref() == intermediate && c.final_outcome == final_outcome)
            .map(|c| c.count)
            .sum()
    }

    /// Empirical distribution of final outcomes over all trials.
    pub fn final_frequencies(&self) -> Distribution {
        let n = self.trials as f64;
        Distribution::new(self.final_labels().map(|l| (l.to_string(), self.final_count(l) as f64 / n)))
            .expect("counts sum to the trial count")
    }

    /// Empirical distribution of intermediate outcomes over all trials (unfiltered).
    /// Empty when nothing is measured at `t`.
    pub fn intermediate_frequencies(&self) -> Distribution {
        match self.protocol.intermediate.measurement() {
            Some(q) => {
                let n = self.trials as f64;
                Distribution::new(q.labels().map(|l| (l.to_string(), self.intermediate_count(l) as f64 / n)))
                    .expect("counts sum to the trial count")
            }
            None => Distribution::empty(),
        }
    }

    /// CSV with columns `intermediate_outcome,final_outcome,count`; an empty
    /// first field means nothing was measured at `t`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("intermediate_outcome,final_outcome,count\n");
        for c in &self.counts {
            let _ = writeln!(
                out,
                "{},{},{}",
                csv_field(c.intermediate_outcome.as_deref().unwrap_or("")),
                csv_field(&c.final_outcome),
                c.count
            );
        }
        out
    }
}

/// Intermediate-outcome frequencies among trials that ended in `condition`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFrequencies {
    pub condition: String,
    pub matched: u64,
    pub distribution: Distribution,
}

pub fn conditional_frequencies(stats: &EnsembleStats, condition: &str) -> Result<ConditionalFrequencies> {
    stats.protocol.post_pvm.index_of(condition)?;
    let matched = stats.final_count(condition);
    if matched == 0 {
        return Err(Error::EmptySelection {
            condition: condition.to_string(),
            trials: stats.trials,
        });
    }
    let distribution = match stats.protocol.intermediate.measurement() {
        Some(q) => Distribution::new(
            q.labels()
                .map(|l| (l.to_string(), stats.count(Some(l), condition) as f64 / matched as f64)),
        )?,
        None => Distribution::empty(),
    };
    Ok(ConditionalFrequencies {
        condition: condition.to_string(),
        matched,
        distribution,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementEntry {
    pub label: String,
    pub empirical: f64,
    pub analytic: f64,
    /// Allowed |empirical − analytic|.
    pub gate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub sample_size: u64,
    pub z: f64,
    pub entries: Vec<AgreementEntry>,
    pub pass: bool,
}

/// Half-width of the z-sigma binomial gate for probability `p` at sample size `n`.
pub fn binomial_gate(p: f64, n: u64, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt() + EPS_NORM
}

/// Per-outcome test |freq − p| ≤ z·√(p(1−p)/n) + EPS_NORM.
pub fn agreement_check(empirical: &Distribution, sample_size: u64, analytic: &Distribution, z: f64) -> Result<AgreementReport> {
    let mine: Vec<&str> = empirical.labels().collect();
    let theirs: Vec<&str> = analytic.labels().collect();
    if mine != theirs {
        return Err(Error::LabelMismatch(format!("{mine:?} vs {theirs:?}")));
    }
    if sample_size == 0 {
        return Err(Error::NoTrials);
    }
    let entries: Vec<AgreementEntry> = empirical
        .entries()
        .iter()
        .zip(analytic.probabilities())
        .map(|(e, p)| {
            let gate = binomial_gate(p, sample_size, z);
            AgreementEntry {
                label: e.label.clone(),
                empirical: e.probability,
                analytic: p,
                gate,
                pass: (e.probability - p).abs() <= gate,
            }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    Ok(AgreementReport {
        sample_size,
        z,
        entries,
        pass,
    })
}

//! Analytic probabilities for pre- and post-selected systems.
//!
//! A [`SelectionBase`] fixes the preparation `|a⟩` at `t_a`, the observable
//! measured at `t_b`, and the free evolutions `U` (from `t_a` to `t`) and `V`
//! (from `t` to `t_b`). Choosing the post-selected outcome `b` turns it into a
//! [`SelectionContext`].
//!
//! For an intermediate measurement `Q` with projectors `P_j`, the weight of
//! the path "`Q` gives `j`, then `b`" is `‖P_b V P_j U |a⟩‖²`: the Born
//! probability of `j`, times the Born probability of `b` from the collapsed
//! and evolved state. The ABL probability normalizes these weights over `j`.
//! For rank-one `P_j = |q_j⟩⟨q_j|`, `P_b = |b⟩⟨b|` and `U = V = I` the weight
//! is `|⟨b|q_j⟩|² |⟨q_j|a⟩|²`. Degenerate outcomes use the same path weight;
//! that generalization is this crate's own, obtained by composing the Born
//! rule with the projection postulate.

use serde::{Deserialize, Serialize};

use crate::quantum::linalg::{norm_sqr, C64};
use crate::quantum::{Distribution, ProjectiveMeasurement, PureState, UnitaryOp, EPS_PROB};
use crate::{Error, Result};

/// Everything about a pre/post-selection except which post outcome is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBase", into = "RawBase")]
pub struct SelectionBase {
    pre: PureState,
    post_pvm: ProjectiveMeasurement,
    pre_to_t: UnitaryOp,
    t_to_post: UnitaryOp,
}

#[derive(Serialize, Deserialize)]
struct RawBase {
    pre: PureState,
    post_pvm: ProjectiveMeasurement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pre_to_t: Option<UnitaryOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_to_post: Option<UnitaryOp>,
}

impl TryFrom<RawBase> for SelectionBase {
    type Error = Error;

    fn try_from(raw: RawBase) -> Result<Self> {
        let dim = raw.pre.dim();
        SelectionBase::new(raw.pre, raw.post_pvm)?.with_evolution(
            raw.pre_to_t.unwrap_or_else(|| UnitaryOp::identity(dim)),
            raw.t_to_post.unwrap_or_else(|| UnitaryOp::identity(dim)),
        )
    }
}

impl From<SelectionBase> for RawBase {
    fn from(b: SelectionBase) -> Self {
        let keep = |u: UnitaryOp| (!u.is_identity()).then_some(u);
        RawBase {
            pre: b.pre,
            post_pvm: b.post_pvm,
            pre_to_t: keep(b.pre_to_t),
            t_to_post: keep(b.t_to_post),
        }
    }
}

impl SelectionBase {
    /// Zero-Hamiltonian selection: both evolutions are the identity.
    pub fn new(pre: PureState, post_pvm: ProjectiveMeasurement) -> Result<Self> {
        post_pvm.check_dim(pre.dim())?;
        let dim = pre.dim();
        Ok(Self {
            pre,
            post_pvm,
            pre_to_t: UnitaryOp::identity(dim),
            t_to_post: UnitaryOp::identity(dim),
        })
    }

    pub fn with_evolution(mut self, pre_to_t: UnitaryOp, t_to_post: UnitaryOp) -> Result<Self> {
        self.pre.check_dim(pre_to_t.dim())?;
        self.pre.check_dim(t_to_post.dim())?;
        self.pre_to_t = pre_to_t;
        self.t_to_post = t_to_post;
        Ok(self)
    }

    pub fn select(self, post_label: &str) -> Result<SelectionContext> {
        let post_index = self.post_pvm.index_of(post_label)?;
        Ok(SelectionContext { base: self, post_index })
    }

    pub fn dim(&self) -> usize {
        self.pre.dim()
    }

    pub fn pre(&self) -> &PureState {
        &self.pre
    }

    pub fn post_pvm(&self) -> &ProjectiveMeasurement {
        &self.post_pvm
    }

    pub fn pre_to_t(&self) -> &UnitaryOp {
        &self.pre_to_t
    }

    pub fn t_to_post(&self) -> &UnitaryOp {
        &self.t_to_post
    }

    /// U|a⟩, the state just before time t.
    pub fn state_at_t(&self) -> PureState {
        crate::quantum::evolve(&self.pre, &self.pre_to_t).expect("dimensions checked at construction")
    }

    fn at_t(&self) -> Vec<C64> {
        self.pre_to_t.matrix().apply(self.pre.amplitudes())
    }

    /// Weight of every final outcome along the path with no measurement at t: ‖P_k V U|a⟩‖².
    fn free_weights(&self) -> Vec<f64> {
        let v = self.t_to_post.matrix().apply(&self.at_t());
        (0..self.post_pvm.len()).map(|k| self.post_pvm.weight(k, &v)).collect()
    }

    /// `w[j][k] = ‖P_k V P_j U|a⟩‖²`. A system absorbed by outcome `j`
    /// contributes ‖P_j U|a⟩‖² to its own label and nothing elsewhere.
    fn path_weights(&self, q: &ProjectiveMeasurement) -> Result<Vec<Vec<f64>>> {
        q.check_dim(self.dim())?;
        let targets = q.absorption_targets(&self.post_pvm)?;
        let at_t = self.at_t();
        Ok(targets
            .iter()
            .enumerate()
            .map(|(j, target)| {
                let projected = q.project(j, &at_t);
                match target {
                    Some(t) => {
                        let mut row = vec![0.0; self.post_pvm.len()];
                        row[*t] = norm_sqr(&projected);
                        row
                    }
                    None => {
                        let v = self.t_to_post.matrix().apply(&projected);
                        (0..self.post_pvm.len()).map(|k| self.post_pvm.weight(k, &v)).collect()
                    }
                }
            })
            .collect())
    }
}

/// A pre-selection, a post-selection observable and the outcome `b` kept at `t_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawContext", into = "RawContext")]
pub struct SelectionContext {
    base: SelectionBase,
    post_index: usize,
}

#[derive(Serialize, Deserialize)]
struct RawContext {
    #[serde(flatten)]
    base: RawBase,
    post_label: String,
}

impl TryFrom<RawContext> for SelectionContext {
    type Error = Error;

    fn try_from(raw: RawContext) -> Result<Self> {
        SelectionBase::try_from(raw.base)?.select(&raw.post_label)
    }
}

impl From<SelectionContext> for RawContext {
    fn from(c: SelectionContext) -> Self {
        let post_label = c.post_label().to_string();
        RawContext {
            base: c.base.into(),
            post_label,
        }
    }
}

impl SelectionContext {
    pub fn new(pre: PureState, post_pvm: ProjectiveMeasurement, post_label: &str) -> Result<Self> {
        SelectionBase::new(pre, post_pvm)?.select(post_label)
    }

    /// Post-selection on a bare state `|b⟩`, measured as {`b`, `not_b`}.
    pub fn from_post_state(pre: PureState, post: &PureState) -> Result<Self> {
        pre.check_dim(post.dim())?;
        let pvm = ProjectiveMeasurement::lift_state(post, "b", "not_b")?;
        Self::new(pre, pvm, "b")
    }

    pub fn with_evolution(self, pre_to_t: UnitaryOp, t_to_post: UnitaryOp) -> Result<Self> {
        Ok(Self {
            base: self.base.with_evolution(pre_to_t, t_to_post)?,
            post_index: self.post_index,
        })
    }

    pub fn base(&self) -> &SelectionBase {
        &self.base
    }

    pub fn into_base(self) -> SelectionBase {
        self.base
    }

    pub fn post_label(&self) -> &str {
        &self.base.post_pvm.outcomes()[self.post_index].label
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The same selection read backwards: pre and post swapped. Only defined
    /// for a rank-one post projector and identity evolutions.
    pub fn time_reversed(&self) -> Result<SelectionContext> {
        let proj = &self.base.post_pvm.outcomes()[self.post_index].projector;
        if proj.projector_rank() != 1 || !self.base.pre_to_t.is_identity() || !self.base.t_to_post.is_identity() {
            return Err(Error::InvalidProtocol(
                "time reversal needs a rank-one post-selection and zero Hamiltonian".into(),
            ));
        }
        // The range of a rank-one projector: its largest column.
        let dim = self.dim();
        let col = (0..dim)
            .max_by(|&a, &b| proj.get(a, a).re.total_cmp(&proj.get(b, b).re))
            .expect("positive dimension");
        let b: Vec<C64> = (0..dim).map(|i| proj.get(i, col)).collect();
        let b = PureState::normalize(self.base.pre.labels().to_vec(), b)?;
        Self::from_post_state(b, &self.base.pre)
    }
}

/// Unnormalized path weights `‖P_b V P_j U|a⟩‖²`, one per outcome of `q`.
pub fn abl_weights(ctx: &SelectionContext, q: &ProjectiveMeasurement) -> Result<Vec<f64>> {
    Ok(ctx.base.path_weights(q)?.into_iter().map(|row| row[ctx.post_index]).collect())
}

/// Probability of each outcome of `q` measured at `t`, given the pre-selection and the post-selected outcome.
///
/// Fails with [`Error::ImpossiblePostSelection`] when `b` cannot occur once `q` is measured.
pub fn abl_distribution(ctx: &SelectionContext, q: &ProjectiveMeasurement) -> Result<Distribution> {
    let weights = abl_weights(ctx, q)?;
    let total: f64 = weights.iter().sum();
    if total <= EPS_PROB {
        return Err(Error::ImpossiblePostSelection {
            label: ctx.post_label().to_string(),
            weight: total,
        });
    }
    Distribution::new(q.labels().zip(weights).map(|(l, w)| (l, w / total)))
}

/// Unconditional probability of the post-selected outcome, with an optional
/// intermediate event (measurement of `Q` yielding `label`).
pub fn sequence_probability(ctx: &SelectionContext, intermediate: Option<(&ProjectiveMeasurement, &str)>) -> Result<f64> {
    let p = match intermediate {
        Some((q, label)) => {
            let j = q.index_of(label)?;
            ctx.base.path_weights(q)?[j][ctx.post_index]
        }
        None => ctx.base.free_weights()[ctx.post_index],
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Distribution of the `t_b` outcomes. With an intermediate measurement it is
/// the incoherent mixture over that measurement's outcomes.
pub fn post_outcome_distribution(base: &SelectionBase, intermediate: Option<&ProjectiveMeasurement>) -> Result<Distribution> {
    let weights: Vec<f64> = match intermediate {
        None => base.free_weights(),
        Some(q) => {
            let rows = base.path_weights(q)?;
            (0..base.post_pvm.len())
                .map(|k| rows.iter().map(|row| row[k]).sum())
                .collect()
        }
    };
    Distribution::new(base.post_pvm.labels().zip(weights))
}

/// Born distribution of `q` at time t, i.e. on U|a⟩, with no post-selection.
pub fn prior_distribution(base: &SelectionBase, q: &ProjectiveMeasurement) -> Result<Distribution> {
    q.check_dim(base.dim())?;
    crate::quantum::born_distribution(&base.state_at_t(), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::qubit;
    use crate::quantum::EPS_NORM;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn aad_ctx() -> SelectionContext {
        SelectionContext::new(qubit::z_plus(), qubit::sigma_x(), "x+").unwrap()
    }

    fn close(d: &Distribution, label: &str, p: f64) -> bool {
        (d.prob(label).unwrap() - p).abs() <= EPS_NORM
    }

    #[test]
    fn aad_both_observables_certain() {
        let d = abl_distribution(&aad_ctx(), &qubit::sigma_z()).unwrap();
        assert!(close(&d, "z+", 1.0) && close(&d, "z-", 0.0));
        let d = abl_distribution(&aad_ctx(), &qubit::sigma_x()).unwrap();
        assert!(close(&d, "x+", 1.0) && close(&d, "x-", 0.0));
    }

    #[test]
    fn three_box_each_box_certain() {
        let labels = ["A", "B", "C"];
        let a = PureState::from_real(&labels, &[1.0, 1.0, 1.0]).unwrap();
        let b = PureState::from_real(&labels, &[1.0, 1.0, -1.0]).unwrap();
        let ctx = SelectionContext::from_post_state(a, &b).unwrap();
        for (i, name) in ["A", "B"].iter().enumerate() {
            let rest: Vec<usize> = (0..3).filter(|&k| k != i).collect();
            let q = ProjectiveMeasurement::from_subsets(3, vec![(format!("in_{name}"), vec![i]), (format!("not_{name}"), rest)])
                .unwrap();
            let d = abl_distribution(&ctx, &q).unwrap();
            assert!(close(&d, &format!("in_{name}"), 1.0));
        }
    }

    #[test]
    fn orthogonal_pre_and_post_is_impossible() {
        let ctx = SelectionContext::new(qubit::z_plus(), qubit::sigma_z(), "z-").unwrap();
        let err = abl_distribution(&ctx, &qubit::sigma_z()).unwrap_err();
        assert!(matches!(err, Error::ImpossiblePostSelection { .. }));
    }

    #[test]
    fn dimension_and_label_errors() {
        let q3 = ProjectiveMeasurement::computational(&["a", "b", "c"]).unwrap();
        assert!(matches!(
            abl_distribution(&aad_ctx(), &q3),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            SelectionContext::new(qubit::z_plus(), qubit::sigma_x(), "x?"),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn polarizer_sequences() {
        let ctx = SelectionContext::new(qubit::polarized(0.0), qubit::polarizer(FRAC_PI_2), "pass").unwrap();
        assert!(sequence_probability(&ctx, None).unwrap().abs() <= EPS_NORM);
        let mid = qubit::polarizer(FRAC_PI_4);
        let p = sequence_probability(&ctx, Some((&mid, "pass"))).unwrap();
        assert!((p - 0.25).abs() <= EPS_NORM);

        let trivial = SelectionContext::new(qubit::z_plus(), qubit::sigma_z(), "z+").unwrap();
        assert!((sequence_probability(&trivial, None).unwrap() - 1.0).abs() <= EPS_NORM);
    }

    #[test]
    fn post_outcome_distributions() {
        let base = SelectionBase::new(qubit::z_plus(), qubit::sigma_x()).unwrap();
        let with = post_outcome_distribution(&base, Some(&qubit::sigma_x())).unwrap();
        let without = post_outcome_distribution(&base, None).unwrap();
        assert!(close(&with, "x+", 0.5) && close(&with, "x-", 0.5));
        assert!(with.max_abs_diff(&without).unwrap() <= EPS_NORM);

        let base = SelectionBase::new(qubit::polarized(0.0), qubit::polarizer(FRAC_PI_2)).unwrap();
        let with = post_outcome_distribution(&base, Some(&qubit::polarizer(FRAC_PI_4))).unwrap();
        let without = post_outcome_distribution(&base, None).unwrap();
        assert!(close(&with, "pass", 0.25) && close(&with, "block", 0.75));
        assert!(close(&without, "pass", 0.0) && close(&without, "block", 1.0));

        let base = SelectionBase::new(qubit::z_plus(), qubit::sigma_z()).unwrap();
        let d = post_outcome_distribution(&base, None).unwrap();
        assert!(close(&d, "z+", 1.0));
    }

    #[test]
    fn absorbing_outcome_needs_a_final_counterpart() {
        let base = SelectionBase::new(qubit::polarized(0.0), qubit::sigma_z()).unwrap();
        let err = post_outcome_distribution(&base, Some(&qubit::polarizer(FRAC_PI_4))).unwrap_err();
        assert!(matches!(err, Error::InvalidProtocol(_)));
    }

    #[test]
    fn raffle_flip_between_t_and_tb() {
        let base = SelectionBase::new(qubit::coin_ready(), qubit::heads_pvm())
            .unwrap()
            .with_evolution(UnitaryOp::identity(3), qubit::coin_flip())
            .unwrap();
        let d = post_outcome_distribution(&base, None).unwrap();
        assert!(close(&d, "heads", 0.5));
    }

    #[test]
    fn time_reversal_swaps_pre_and_post() {
        let ctx = aad_ctx();
        let rev = ctx.time_reversed().unwrap();
        assert!(rev.base().pre().same_ray(&qubit::x_plus(), EPS_NORM));
        for q in [qubit::sigma_x(), qubit::sigma_z()] {
            let fwd = abl_distribution(&ctx, &q).unwrap();
            let bwd = abl_distribution(&rev, &q).unwrap();
            assert!(fwd.max_abs_diff(&bwd).unwrap() <= EPS_NORM);
        }
    }

    #[test]
    fn context_json_round_trip() {
        let ctx = aad_ctx();
        let json = serde_json::to_value(&ctx).unwrap();
        assert_eq!(json["post_label"], "x+");
        assert!(json.get("pre_to_t").is_none());
        let back: SelectionContext = serde_json::from_value(json).unwrap();
        assert_eq!(back, ctx);
    }
}

//! Self-check suite: randomized identities that must hold to numerical
//! precision, plus every catalogue scenario's statistical gates.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abl::{abl_distribution, prior_distribution, sequence_probability, SelectionBase, SelectionContext};
use crate::counterfactual::{evaluate, Classification, CounterfactualStatement, Flavor, EPS_COTEN};
use crate::ensemble::{Execution, Protocol};
use crate::paths::{BranchTable, Intermediate};
use crate::quantum::random::{basis_labels, random_basis_pvm, random_pvm, random_state, random_unitary};
use crate::quantum::{reduced_density, BipartiteState, ProjectiveMeasurement, Side, EPS_NORM};
use crate::scenarios::{catalogue, run_scenario_with};
use crate::{Error, Result};

/// Random instances per algebraic identity.
pub const IDENTITY_INSTANCES: usize = 500;

/// Random instances for the compound-antecedent check.
pub const COMPOUND_INSTANCES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trials: u64,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.failed == 0
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{}  {:<width$}  {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(out, "{} passed, {} failed", self.passed, self.failed);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,pass,detail\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "\"{}\",{},\"{}\"",
                c.name.replace('"', "\"\""),
                c.pass,
                c.detail.replace('"', "\"\"")
            );
        }
        out
    }
}

/// A random selection context in dimension 2–4 with random evolutions, a
/// random nondegenerate post measurement and a post label that can occur.
fn random_context(rng: &mut ChaCha8Rng, evolve: bool) -> Result<(SelectionContext, ProjectiveMeasurement)> {
    let dim = rng.random_range(2..=4);
    loop {
        let pre = random_state(dim, rng);
        let post = random_basis_pvm(dim, rng);
        let mut base = SelectionBase::new(pre, post.clone())?;
        if evolve {
            base = base.with_evolution(random_unitary(dim, rng), random_unitary(dim, rng))?;
        }
        let q = random_pvm(dim, rng);
        let label = post
            .labels()
            .nth(rng.random_range(0..post.len()))
            .expect("in range")
            .to_string();
        let ctx = base.select(&label)?;
        match abl_distribution(&ctx, &q) {
            Ok(_) => return Ok((ctx, q)),
            Err(Error::ImpossiblePostSelection { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

struct Worst {
    name: &'static str,
    instances: usize,
    worst: f64,
}

impl Worst {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            instances: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, deviation: f64) {
        self.instances += 1;
        self.worst = self.worst.max(deviation);
    }

    fn check(self) -> Check {
        Check {
            name: self.name.to_string(),
            pass: self.worst <= EPS_NORM,
            detail: format!("{} instances, worst deviation {:.3e}", self.instances, self.worst),
        }
    }
}

fn identity_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut sum = Worst::new("ABL probabilities sum to one");
    let mut oracle = Worst::new("ABL equals path enumeration");
    let mut marginal = Worst::new("summing over t_b recovers Born at t");
    for _ in 0..IDENTITY_INSTANCES {
        let (ctx, q) = random_context(rng, true)?;
        let abl = abl_distribution(&ctx, &q)?;
        sum.record((abl.total() - 1.0).abs());

        let base = ctx.base();
        let table = BranchTable::enumerate(
            base.pre(),
            base.pre_to_t(),
            &Intermediate::Measure(q.clone()),
            base.t_to_post(),
            base.post_pvm(),
        )?;
        let k = table.final_index(ctx.post_label())?;
        let (weights, total) = table.filtered(k);
        let dev = abl
            .probabilities()
            .zip(&weights)
            .map(|(p, w)| (p - w / total).abs())
            .fold(0.0, f64::max);
        oracle.record(dev);

        let prior = prior_distribution(base, &q)?;
        let mut dev = 0.0f64;
        for label in q.labels() {
            let mut s = 0.0;
            for b in base.post_pvm().labels() {
                let c = base.clone().select(b)?;
                s += sequence_probability(&c, Some((&q, label)))?;
            }
            dev = dev.max((s - prior.prob(label)?).abs());
        }
        marginal.record(dev);
    }

    let mut reversal = Worst::new("ABL is symmetric under pre/post exchange");
    for _ in 0..IDENTITY_INSTANCES {
        let (ctx, q) = random_context(rng, false)?;
        let forward = abl_distribution(&ctx, &q)?;
        let backward = abl_distribution(&ctx.time_reversed()?, &q)?;
        reversal.record(forward.max_abs_diff(&backward)?);
    }

    let mut signaling = Worst::new("Bob's marginal ignores Alice's measurement");
    let mut reduced = Worst::new("reduced states have unit trace and no negative eigenvalue");
    for _ in 0..IDENTITY_INSTANCES {
        let (da, db) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let joint = random_state(da * db, rng);
        let bi = BipartiteState::new(basis_labels(da), basis_labels(db), joint.amplitudes().to_vec())?;
        for side in [Side::Left, Side::Right] {
            let rho = reduced_density(&bi, side);
            let neg = rho.eigenvalues().into_iter().fold(0.0f64, |m, e| m.max(-e));
            reduced.record((rho.trace() - 1.0).abs().max(neg));
        }
        let pure = bi.to_pure()?;
        let alice = random_pvm(da, rng).on_subsystem(Side::Left, db)?;
        let bob = random_pvm(db, rng).on_subsystem(Side::Right, da)?;
        let id = crate::quantum::UnitaryOp::identity(da * db);
        let idle = BranchTable::enumerate(&pure, &id, &Intermediate::Nothing, &id, &bob)?.final_marginal();
        let active = BranchTable::enumerate(&pure, &id, &Intermediate::Measure(alice), &id, &bob)?.final_marginal();
        signaling.record(idle.iter().zip(&active).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }

    Ok(vec![
        sum.check(),
        oracle.check(),
        marginal.check(),
        reversal.check(),
        signaling.check(),
        reduced.check(),
    ])
}

fn compound_check(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    let mut false_count = 0;
    let mut mislabeled = 0;
    let mut nontrivial = 0;
    for _ in 0..COMPOUND_INSTANCES {
        let dim = rng.random_range(2..=3);
        let post = random_basis_pvm(dim, rng);
        let label = post.labels().next().expect("nonempty").to_string();
        // A third of the queries are the post measurement itself, which never disturbs t_b.
        let query = if rng.random_bool(1.0 / 3.0) {
            post.clone()
        } else {
            random_pvm(dim, rng)
        };
        let protocol = Protocol::new(random_state(dim, rng), Intermediate::Nothing, post)?.with_selection(&label)?;
        let stmt = CounterfactualStatement::new(protocol, query, Flavor::CompoundAntecedent)?;
        let v = match evaluate(&stmt) {
            Ok(v) => v,
            Err(Error::ImpossiblePostSelection { .. }) => continue,
            Err(e) => return Err(e),
        };
        worst = worst.max(v.max_deviation);
        if v.classification == Classification::False {
            false_count += 1;
        }
        if v.classification == Classification::NontriviallyTrue {
            nontrivial += 1;
        }
        if (v.classification == Classification::NontriviallyTrue) != (v.cotenability.tvd <= EPS_COTEN) {
            mislabeled += 1;
        }
    }
    Ok(Check {
        name: "compound counterfactuals always agree with ABL".into(),
        pass: worst <= EPS_NORM && false_count == 0 && mislabeled == 0,
        detail: format!(
            "{COMPOUND_INSTANCES} instances, worst deviation {worst:.3e}, {nontrivial} nontrivially true, {false_count} FALSE, {mislabeled} nontrivial/cotenable mismatches"
        ),
    })
}

/// Runs every identity on random instances drawn from `seed`, then every
/// catalogue scenario with `trials` trials.
pub fn run_verification(trials: u64, seed: u64) -> Result<VerifyReport> {
    run_verification_with(trials, seed, Execution::default())
}

pub fn run_verification_with(trials: u64, seed: u64, execution: Execution) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = identity_checks(&mut rng)?;
    checks.push(compound_check(&mut rng)?);
    for info in catalogue().iter().filter(|i| i.name != "custom") {
        let report = run_scenario_with(info.name, &serde_json::Value::Null, trials, seed, execution)?;
        let gates: usize = report.monte_carlo.iter().map(|r| r.checks.len()).sum::<usize>() + report.comparisons.len();
        checks.push(Check {
            name: format!("scenario {}", info.name),
            pass: report.pass,
            detail: format!("{gates} statistical gates at {trials} trials"),
        });
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    Ok(VerifyReport {
        trials,
        seed,
        failed: checks.len() - passed,
        passed,
        checks,
    })
}

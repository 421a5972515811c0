use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsqc::abl::{abl_distribution, post_outcome_distribution, prior_distribution, SelectionBase, SelectionContext};
use tsqc::counterfactual::{cotenability_report, evaluate, Classification, CounterfactualStatement, Flavor};
use tsqc::ensemble::{run_ensemble_with, Execution, Protocol};
use tsqc::paths::Intermediate;
use tsqc::quantum::random::{basis_labels, random_basis_pvm, random_pvm, random_state, random_unitary};
use tsqc::quantum::{
    born_distribution, collapse, evolve, measure_subsystem, qubit, reduced_density, BipartiteState, ProjectiveMeasurement,
    PureState, Side, EPS_NORM,
};
use tsqc::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A post label whose selection is possible with `q` measured, if any.
fn possible_context(base: &SelectionBase, q: &ProjectiveMeasurement) -> Option<SelectionContext> {
    base.post_pvm().labels().find_map(|label| {
        let ctx = base.clone().select(label).ok()?;
        abl_distribution(&ctx, q).ok().map(|_| ctx)
    })
}

/// A measurement coarse-grained from the computational basis of `dim`.
fn diagonal_pvm(dim: usize, split: usize) -> ProjectiveMeasurement {
    let split = split.clamp(1, dim - 1);
    ProjectiveMeasurement::from_subsets(
        dim,
        vec![("low".into(), (0..split).collect()), ("high".into(), (split..dim).collect())],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn born_sums_to_one(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let d = born_distribution(&random_state(dim, &mut r), &random_pvm(dim, &mut r)).unwrap();
        prop_assert!((d.total() - 1.0).abs() <= EPS_NORM);
    }

    #[test]
    fn global_phase_changes_nothing(seed in any::<u64>(), dim in 2usize..=4, phase in 0.0f64..std::f64::consts::TAU) {
        let mut r = rng(seed);
        let s = random_state(dim, &mut r);
        let t = s.with_global_phase(C64::from_polar(1.0, phase));
        let q = random_pvm(dim, &mut r);
        let post = random_basis_pvm(dim, &mut r);
        prop_assert!(born_distribution(&s, &q).unwrap().max_abs_diff(&born_distribution(&t, &q).unwrap()).unwrap() <= EPS_NORM);
        let label = q.labels().next().unwrap().to_string();
        prop_assert!(collapse(&s, &q, &label).unwrap().same_ray(&collapse(&t, &q, &label).unwrap(), EPS_NORM));
        let bs = SelectionBase::new(s, post.clone()).unwrap();
        let bt = SelectionBase::new(t, post).unwrap();
        prop_assert!(post_outcome_distribution(&bs, Some(&q)).unwrap()
            .max_abs_diff(&post_outcome_distribution(&bt, Some(&q)).unwrap()).unwrap() <= EPS_NORM);
        if let Some(cs) = possible_context(&bs, &q) {
            let ct = bt.select(cs.post_label()).unwrap();
            prop_assert!(abl_distribution(&cs, &q).unwrap().max_abs_diff(&abl_distribution(&ct, &q).unwrap()).unwrap() <= EPS_NORM);
        }
    }

    #[test]
    fn collapse_is_idempotent(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let s = random_state(dim, &mut r);
        let q = random_pvm(dim, &mut r);
        for label in q.labels() {
            match collapse(&s, &q, label) {
                Ok(once) => {
                    let twice = collapse(&once, &q, label).unwrap();
                    prop_assert!(once.approx_eq(&twice, EPS_NORM));
                }
                Err(Error::ZeroProbabilityOutcome { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }

    #[test]
    fn nondegenerate_collapse_lands_on_the_eigenstate(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let s = random_state(dim, &mut r);
        let q = random_basis_pvm(dim, &mut r);
        for outcome in q.outcomes() {
            let after = collapse(&s, &q, &outcome.label).unwrap();
            // |ψ⟩ in the range of a rank-one projector: P|ψ⟩ = |ψ⟩
            let image = outcome.projector.apply(after.amplitudes());
            let back = PureState::new(after.labels().to_vec(), image).unwrap();
            prop_assert!(back.approx_eq(&after, 1e-9));
        }
    }

    #[test]
    fn evolve_preserves_norm(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let s = random_state(dim, &mut r);
        let out = evolve(&s, &random_unitary(dim, &mut r)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= EPS_NORM);
    }

    #[test]
    fn reduced_density_is_a_state(seed in any::<u64>(), da in 2usize..=3, db in 2usize..=3) {
        let mut r = rng(seed);
        let joint = random_state(da * db, &mut r);
        let bi = BipartiteState::new(basis_labels(da), basis_labels(db), joint.amplitudes().to_vec()).unwrap();
        for side in [Side::Left, Side::Right] {
            let rho = reduced_density(&bi, side);
            prop_assert!((rho.trace() - 1.0).abs() <= EPS_NORM);
            for e in rho.eigenvalues() {
                prop_assert!((-EPS_NORM..=1.0 + EPS_NORM).contains(&e));
            }
        }
    }

    #[test]
    fn abl_sums_to_one_and_marginalizes_to_born(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let base = SelectionBase::new(random_state(dim, &mut r), random_pvm(dim, &mut r)).unwrap()
            .with_evolution(random_unitary(dim, &mut r), random_unitary(dim, &mut r)).unwrap();
        let q = random_pvm(dim, &mut r);
        let post = post_outcome_distribution(&base, Some(&q)).unwrap();
        let prior = prior_distribution(&base, &q).unwrap();
        let mut mixed = vec![0.0; q.len()];
        for (label, pb) in base.post_pvm().labels().zip(post.probabilities()) {
            let ctx = base.clone().select(label).unwrap();
            match abl_distribution(&ctx, &q) {
                Ok(abl) => {
                    prop_assert!((abl.total() - 1.0).abs() <= EPS_NORM);
                    for (m, p) in mixed.iter_mut().zip(abl.probabilities()) {
                        *m += pb * p;
                    }
                }
                Err(Error::ImpossiblePostSelection { .. }) => prop_assert!(pb <= 1e-12),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
        for (m, p) in mixed.iter().zip(prior.probabilities()) {
            prop_assert!((m - p).abs() <= EPS_NORM);
        }
    }

    #[test]
    fn abl_is_time_symmetric(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let a = random_state(dim, &mut r);
        let b = random_state(dim, &mut r);
        let q = random_pvm(dim, &mut r);
        let forward = SelectionContext::from_post_state(a.clone(), &b).unwrap();
        let backward = SelectionContext::from_post_state(b, &a).unwrap();
        match (abl_distribution(&forward, &q), abl_distribution(&backward, &q)) {
            (Ok(f), Ok(g)) => prop_assert!(f.max_abs_diff(&g).unwrap() <= EPS_NORM),
            (Err(_), Err(_)) => {}
            _ => return Err(TestCaseError::fail("only one direction is possible")),
        }
    }

    #[test]
    fn eigenstate_outcomes_are_certain(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let a = random_state(dim, &mut r);
        // q has |a⟩ as the range of its first outcome
        let q = ProjectiveMeasurement::lift_state(&a, "a", "not_a").unwrap();
        let base = SelectionBase::new(a.clone(), random_basis_pvm(dim, &mut r)).unwrap();
        if let Some(ctx) = possible_context(&base, &q) {
            prop_assert!((abl_distribution(&ctx, &q).unwrap().prob("a").unwrap() - 1.0).abs() <= EPS_NORM);
        }
        // and symmetrically for the post state
        let b = random_state(dim, &mut r);
        let ctx = SelectionContext::from_post_state(random_state(dim, &mut r), &b).unwrap();
        let q = ProjectiveMeasurement::lift_state(&b, "b", "not_b").unwrap();
        if let Ok(d) = abl_distribution(&ctx, &q) {
            prop_assert!((d.prob("b").unwrap() - 1.0).abs() <= EPS_NORM);
        }
    }

    #[test]
    fn compound_counterfactuals_reproduce_abl(seed in any::<u64>(), dim in 2usize..=3) {
        let mut r = rng(seed);
        let post = random_basis_pvm(dim, &mut r);
        let protocol = Protocol::new(random_state(dim, &mut r), Intermediate::Nothing, post.clone()).unwrap()
            .with_selection(post.labels().next().unwrap()).unwrap();
        let stmt = CounterfactualStatement::new(protocol, random_pvm(dim, &mut r), Flavor::CompoundAntecedent).unwrap();
        if let Ok(v) = evaluate(&stmt) {
            prop_assert!(v.max_deviation <= EPS_NORM);
            prop_assert_ne!(v.classification, Classification::False);
        }
    }

    #[test]
    fn false_exactly_for_deviating_single_antecedents(seed in any::<u64>(), dim in 2usize..=3, compound in any::<bool>()) {
        let mut r = rng(seed);
        let post = random_pvm(dim, &mut r);
        let protocol = Protocol::new(random_state(dim, &mut r), Intermediate::Nothing, post.clone()).unwrap()
            .with_selection(post.labels().next().unwrap()).unwrap();
        let flavor = if compound { Flavor::CompoundAntecedent } else { Flavor::SingleAntecedent };
        let stmt = CounterfactualStatement::new(protocol, random_pvm(dim, &mut r), flavor).unwrap();
        if let Ok(v) = evaluate(&stmt) {
            prop_assert_eq!(
                v.classification == Classification::False,
                flavor == Flavor::SingleAntecedent && v.max_deviation > EPS_NORM
            );
        }
    }

    #[test]
    fn commuting_queries_do_not_disturb(seed in any::<u64>(), dim in 2usize..=4, split in 1usize..4) {
        let mut r = rng(seed);
        // post and query both diagonal in the computational basis
        let post = ProjectiveMeasurement::from_subsets(
            dim,
            vec![("even".into(), (0..dim).step_by(2).collect()), ("odd".into(), (1..dim).step_by(2).collect())],
        ).unwrap();
        let protocol = Protocol::new(random_state(dim, &mut r), Intermediate::Nothing, post).unwrap()
            .with_selection("even").unwrap();
        let report = cotenability_report(&protocol, &diagonal_pvm(dim, split)).unwrap();
        prop_assert!(report.tvd <= EPS_NORM);
        prop_assert!(report.cotenable);
    }

    #[test]
    fn single_antecedent_agrees_when_everything_commutes(k in 0usize..4, dim in 2usize..=4, split in 1usize..4, post_split in 1usize..4) {
        // a basis-state preparation commutes with every diagonal projector
        let k = k % dim;
        let labels = basis_labels(dim);
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let pre = PureState::basis(&refs, refs[k]).unwrap();
        let post_split = post_split.clamp(1, dim - 1);
        let selected = if k < post_split { "low" } else { "high" };
        let protocol = Protocol::new(pre, Intermediate::Nothing, diagonal_pvm(dim, post_split)).unwrap()
            .with_selection(selected).unwrap();
        let stmt = CounterfactualStatement::new(protocol, diagonal_pvm(dim, split), Flavor::SingleAntecedent).unwrap();
        let v = evaluate(&stmt).unwrap();
        prop_assert!(v.max_deviation <= EPS_NORM);
        prop_assert_eq!(v.classification, Classification::TrueByCoincidence);
    }

    #[test]
    fn no_signaling_for_random_pairs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let joint = random_state(4, &mut r);
        let bi = BipartiteState::new(basis_labels(2), basis_labels(2), joint.amplitudes().to_vec()).unwrap();
        let bob = random_basis_pvm(2, &mut r);
        let idle = born_distribution(&bi.to_pure().unwrap(), &bob.on_subsystem(Side::Right, 2).unwrap()).unwrap();
        let alice = random_basis_pvm(2, &mut r);
        let mut marginal = [0.0; 2];
        for branch in measure_subsystem(&bi, &alice, Side::Left).unwrap() {
            if let Some(state) = branch.state {
                let d = measure_subsystem(&state, &bob, Side::Right).unwrap();
                for (m, o) in marginal.iter_mut().zip(d) {
                    *m += branch.probability * o.probability;
                }
            }
        }
        for (m, p) in marginal.iter().zip(idle.probabilities()) {
            prop_assert!((m - p).abs() <= EPS_NORM);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ensembles_reproduce_across_schedules(seed in any::<u64>(), dim in 2usize..=3, trials in 1u64..3_000) {
        let mut r = rng(seed);
        let protocol = Protocol::new(random_state(dim, &mut r), Intermediate::Measure(random_pvm(dim, &mut r)), random_pvm(dim, &mut r)).unwrap();
        let a = run_ensemble_with(&protocol, trials, seed, Execution::Parallel).unwrap();
        let b = run_ensemble_with(&protocol, trials, seed, Execution::Serial).unwrap();
        let c = run_ensemble_with(&protocol, trials, seed, Execution::Parallel).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
        prop_assert_eq!(a.counts.iter().map(|c| c.count).sum::<u64>(), trials);
    }

    #[test]
    fn json_round_trips_are_lossless(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let protocol = Protocol::new(random_state(dim, &mut r), Intermediate::Measure(random_pvm(dim, &mut r)), random_pvm(dim, &mut r)).unwrap()
            .with_evolution(random_unitary(dim, &mut r), random_unitary(dim, &mut r)).unwrap();
        let text = serde_json::to_string(&protocol).unwrap();
        let back: Protocol = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}

#[test]
fn singlet_marginal_ignores_alice() {
    let singlet = qubit::singlet();
    let pure = singlet.to_pure().unwrap();
    for bob in [qubit::sigma_z(), qubit::sigma_x()] {
        let bob_full = bob.on_subsystem(Side::Right, 2).unwrap();
        let idle = born_distribution(&pure, &bob_full).unwrap();
        for alice in [qubit::sigma_z(), qubit::sigma_x()] {
            let mut marginal = [0.0; 2];
            for branch in measure_subsystem(&singlet, &alice, Side::Left).unwrap() {
                let state = branch.state.unwrap();
                for (m, o) in marginal.iter_mut().zip(measure_subsystem(&state, &bob, Side::Right).unwrap()) {
                    *m += branch.probability * o.probability;
                }
            }
            for (m, p) in marginal.iter().zip(idle.probabilities()) {
                assert!((m - p).abs() <= EPS_NORM);
            }
        }
    }
}

//! Invariant suites: preservation under transitions (every one-step
//! successor of a valid state satisfies the invariant), the
//! reconstruction equivalence (the invariant holds exactly when an ACT-R
//! state reconstructs and round-trips), and targeted mutations that must
//! trip exactly one sub-invariant each.

use std::collections::BTreeSet;

use actr_confluence_core::chr::{self, ChrRule, ChrState, Constraint};
use actr_confluence_core::gen;
use actr_confluence_core::invariants::{check_a, reconstruct_actr, satisfiable_a, SubInvariant};
use actr_confluence_core::term::{Delay, Term};
use actr_confluence_core::translate::{chr_successors, translate_rule, translate_state};

fn program_of(model: &actr_confluence_core::ActrModel) -> Vec<ChrRule> {
    model
        .rules
        .iter()
        .map(|r| translate_rule(r, &model.buffers))
        .collect()
}

/// Every one-step CHR successor of a translated valid state satisfies the
/// invariant: 500 generated (model, state) instances, zero failures.
#[test]
fn invariant_is_preserved_by_transitions() {
    let mut fired = 0usize;
    let mut checked = 0usize;
    for seed in 0..500u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let sig = model.sig();
        let program = program_of(&model);
        let state = gen::random_state(&model, seed.wrapping_mul(31).wrapping_add(7));
        let chr_state = translate_state(&state);
        let verdict = check_a(&chr_state, &sig);
        assert!(verdict.holds(), "seed {seed}: translated state violates the invariant: {:?}", verdict.violations);
        for (rule, succ) in chr_successors(&chr_state, &program) {
            fired += 1;
            let verdict = check_a(&succ, &sig);
            assert!(
                verdict.holds(),
                "seed {seed}: rule {rule} produced an invariant-violating successor: {:?}\n{}",
                verdict.violations,
                succ.dump()
            );
        }
        checked += 1;
    }
    assert_eq!(checked, 500);
    // the suite must not be vacuous
    assert!(fired >= 200, "only {fired} transitions fired across the suite");
}

/// The reference interpreter preserves state validity as well.
#[test]
fn reference_interpreter_preserves_state_validity() {
    for seed in 0..200u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let state = gen::random_state(&model, seed ^ 0x5a5a);
        for (rule, succ) in actr_confluence_core::actr_step(&state, &model) {
            model
                .validate_state(&succ)
                .unwrap_or_else(|e| panic!("seed {seed}: rule {rule}: invalid successor: {e}"));
        }
    }
}

/// Valid translated states reconstruct and round-trip; the invariant is
/// exactly the reconstruction criterion.
#[test]
fn reconstruction_round_trips_on_generated_states() {
    for seed in 0..200u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let sig = model.sig();
        let state = gen::random_state(&model, seed ^ 0xfeed);
        let chr_state = translate_state(&state);
        assert!(check_a(&chr_state, &sig).holds(), "seed {seed}");
        let back = reconstruct_actr(&chr_state, &sig).unwrap();
        assert!(
            chr::states_equivalent(&translate_state(&back), &chr_state),
            "seed {seed}: reconstruction does not round-trip"
        );
    }
}

/// The invariant is a property of equivalence classes: renaming-variants
/// of one state agree on every sub-check.
#[test]
fn invariant_is_equivalence_invariant() {
    for seed in 0..100u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let sig = model.sig();
        let state = translate_state(&gen::random_state(&model, seed ^ 0xc0de));
        // a variant that re-expresses a constant through a solved equality
        let mut variant = state.clone();
        if let Some(c) = variant.goal.first_mut() {
            if let Some(slot) = c.args.iter_mut().find(|t| matches!(t, Term::Const(_))) {
                let k = slot.clone();
                *slot = Term::var("H0");
                variant.builtins.push(Constraint::eq(Term::var("H0"), k));
            }
        }
        assert!(chr::states_equivalent(&state, &variant), "seed {seed}");
        assert_eq!(
            check_a(&state, &sig).holds(),
            check_a(&variant, &sig).holds(),
            "seed {seed}"
        );
    }
}

/// Each targeted mutation fires exactly the expected sub-invariant.
#[test]
fn targeted_mutations_fire_the_expected_subinvariant() {
    let model = gen::counting_model().set_normal_form().unwrap();
    let sig = model.sig();
    let base = translate_state(&model.initial);
    assert!(check_a(&base, &sig).holds());

    let expect_only = |state: &ChrState, expected: SubInvariant| {
        let verdict = check_a(state, &sig);
        assert!(!verdict.holds(), "mutation for {expected} was not detected");
        let kinds: BTreeSet<SubInvariant> = verdict.violations.iter().map(|(w, _)| *w).collect();
        assert_eq!(
            kinds,
            BTreeSet::from([expected]),
            "expected exactly {expected}, got {:?}",
            verdict.violations
        );
        assert!(reconstruct_actr(state, &sig).is_err());
    };

    // duplicate delta -> A1
    let mut m = base.clone();
    let d = m.goal[0].clone();
    m.goal.push(d);
    expect_only(&m, SubInvariant::A1);

    // missing gamma -> A2
    let mut m = base.clone();
    m.goal
        .retain(|c| !(c.functor == chr::GAMMA && c.args[0] == Term::cst("retrieval")));
    expect_only(&m, SubInvariant::A2);

    // duplicate chunk identifier -> A3
    let mut m = base.clone();
    if let Term::Set(items) = &mut m.goal[0].args[0] {
        items.insert(Term::app(
            "chunk",
            [
                Term::cst("a"),
                Term::cst("order"),
                Term::set([
                    Term::pair(Term::cst("first"), Term::cst("2")),
                    Term::pair(Term::cst("second"), Term::cst("2")),
                ]),
            ],
        ));
    }
    expect_only(&m, SubInvariant::A3);

    // duplicate slot pair -> A4 (the second value is still a store id)
    let mut m = base.clone();
    if let Term::Set(items) = &mut m.goal[0].args[0] {
        let chunk_a = Term::app(
            "chunk",
            [
                Term::cst("a"),
                Term::cst("order"),
                Term::set([
                    Term::pair(Term::cst("first"), Term::cst("1")),
                    Term::pair(Term::cst("second"), Term::cst("2")),
                ]),
            ],
        );
        assert!(items.remove(&chunk_a));
        items.insert(Term::app(
            "chunk",
            [
                Term::cst("a"),
                Term::cst("order"),
                Term::set([
                    Term::pair(Term::cst("first"), Term::cst("1")),
                    Term::pair(Term::cst("first"), Term::cst("2")),
                    Term::pair(Term::cst("second"), Term::cst("2")),
                ]),
            ],
        ));
    }
    expect_only(&m, SubInvariant::A4);

    // foreign constraint -> A5
    let mut m = base.clone();
    m.goal.push(Constraint::new("foo", [Term::cst("x")]));
    expect_only(&m, SubInvariant::A5);
}

/// Pruned overlaps stay unsatisfiable when the universe is padded further
/// (the pruning is not an artifact of a too-small universe).
#[test]
fn pruning_is_stable_under_universe_padding() {
    for seed in 0..40u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let sig = model.sig();
        let program = program_of(&model);
        let overlaps = actr_confluence_core::compute_overlaps(&program);
        let small = actr_confluence_core::invariants::universe(&model.constants(), 2);
        let large = actr_confluence_core::invariants::universe(&model.constants(), 3);
        for o in &overlaps {
            if !satisfiable_a(&o.state, &sig, &small) {
                assert!(
                    !satisfiable_a(&o.state, &sig, &large),
                    "seed {seed}: pruning of {} ~ {} {} flips with more padding",
                    o.rule_a,
                    o.rule_b,
                    o.descriptor
                );
            }
        }
    }
}

/// The full self-overlap of the counting rule is invariant-satisfiable:
/// a grounding over the model's constants exists.
#[test]
fn counting_full_overlap_is_satisfiable() {
    let model = gen::counting_model_det().set_normal_form().unwrap();
    let sig = model.sig();
    let program = program_of(&model);
    let overlaps = actr_confluence_core::compute_overlaps(&program);
    let uni = actr_confluence_core::invariants::universe(&model.constants(), 2);
    let full = overlaps.iter().find(|o| o.full_head).unwrap();
    assert!(satisfiable_a(&full.state, &sig, &uni));
    // and the partial ones are not
    for o in overlaps.iter().filter(|o| !o.full_head) {
        assert!(!satisfiable_a(&o.state, &sig, &uni), "{}", o.descriptor);
    }
}

/// States with nonzero delays translate, satisfy the invariant, and block
/// the rules that test the delayed buffer.
#[test]
fn delayed_buffers_satisfy_invariant_but_block_matching() {
    let mut model = gen::counting_model().set_normal_form().unwrap();
    model
        .initial
        .gamma
        .insert("retrieval".to_owned(), ("a".to_owned(), Delay::new(1, 2)));
    let sig = model.sig();
    let st = translate_state(&model.initial);
    assert!(check_a(&st, &sig).holds());
    let program = program_of(&model);
    assert!(chr_successors(&st, &program).is_empty());
    assert!(actr_confluence_core::actr_step(&model.initial, &model).is_empty());
}

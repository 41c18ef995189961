//! Property suite for state equivalence and normalization: equivalence is
//! reflexive, symmetric and transitive, and normalization is idempotent.
//! Equivalent variants are produced by renaming local variables,
//! reordering stores, and re-introducing solved equalities.

use std::collections::BTreeSet;

use actr_confluence_core::chr::{normalize, states_equivalent, ChrState, Constraint};
use actr_confluence_core::term::{Delay, Term};
use proptest::prelude::*;

fn leaf_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => prop_oneof![Just("a"), Just("b"), Just("c1"), Just("goal"), Just("one")]
            .prop_map(|s| Term::cst(s)),
        2 => prop_oneof![Just("X"), Just("Y"), Just("Z"), Just("W")].prop_map(|s| Term::var(s)),
        1 => (0u64..3).prop_map(|n| Term::Num(Delay::from_integer(n))),
    ]
}

fn term() -> impl Strategy<Value = Term> {
    leaf_term().prop_recursive(2, 12, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::pair(a, b)),
            prop::collection::btree_set(inner.clone(), 0..3).prop_map(Term::Set),
            prop::collection::vec(inner, 1..3).prop_map(|args| Term::App("f".into(), args)),
        ]
    })
}

fn constraint() -> impl Strategy<Value = Constraint> {
    (
        prop_oneof![
            4 => Just("delta"),
            4 => Just("gamma"),
            2 => Just("p"),
            1 => Just("in"),
        ],
        prop::collection::vec(term(), 1..3),
    )
        .prop_map(|(f, args)| Constraint::new(f, args))
}

fn equality() -> impl Strategy<Value = Constraint> {
    (term(), term()).prop_map(|(a, b)| Constraint::eq(a, b))
}

prop_compose! {
    fn state()(
        goal in prop::collection::vec(constraint(), 0..4),
        eqs in prop::collection::vec(equality(), 0..2),
        facts in prop::collection::vec(constraint(), 0..2),
        global_pick in prop::collection::btree_set(
            prop_oneof![Just("X"), Just("Y"), Just("Z"), Just("W")], 0..3),
    ) -> ChrState {
        let mut builtins = eqs;
        builtins.extend(facts);
        let globals: BTreeSet<String> = global_pick.into_iter().map(String::from).collect();
        ChrState::new(goal, builtins, globals)
    }
}

/// A semantically equal variant: local variables renamed apart, constraint
/// order shuffled, and one ground argument re-expressed through a solved
/// equality on a fresh local variable.
fn variant(state: &ChrState, rename_seed: usize, desolve: bool) -> ChrState {
    let locals = state.local_vars();
    let mut out = state.clone();
    // bijective renaming of locals
    let names = ["R0", "R1", "R2", "R3", "R4", "R5"];
    let mut renaming = actr_confluence_core::Substitution::new();
    for (i, v) in locals.iter().enumerate() {
        let fresh = names[(i + rename_seed) % names.len()];
        renaming.bind(v, &Term::var(fresh)).unwrap();
    }
    out = out.apply(&renaming);
    let rot = rename_seed % out.goal.len().max(1);
    out.goal.rotate_left(rot);
    if desolve {
        // pull a ground constant out of the first goal constraint into a
        // solved equality on a fresh local
        if let Some(c) = out.goal.first_mut() {
            if let Some(Term::Const(k)) = c.args.iter().find(|t| matches!(t, Term::Const(_))) {
                let k = k.clone();
                for a in &mut c.args {
                    if *a == Term::Const(k.clone()) {
                        *a = Term::var("Q9");
                        break;
                    }
                }
                out.builtins.push(Constraint::eq(Term::var("Q9"), Term::Const(k)));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn equivalence_is_reflexive(s in state()) {
        prop_assert!(states_equivalent(&s, &s));
    }

    #[test]
    fn equivalence_is_symmetric_and_holds_on_variants(
        s in state(), seed in 0usize..6, desolve in any::<bool>()
    ) {
        let v = variant(&s, seed, desolve);
        prop_assert!(states_equivalent(&s, &v), "state {} !~ variant {}", s.dump(), v.dump());
        prop_assert!(states_equivalent(&v, &s));
    }

    #[test]
    fn equivalence_is_transitive(
        s in state(), seed1 in 0usize..6, seed2 in 0usize..6, d1 in any::<bool>(), d2 in any::<bool>()
    ) {
        let a = variant(&s, seed1, d1);
        let b = variant(&s, seed2, d2);
        prop_assert!(states_equivalent(&s, &a));
        prop_assert!(states_equivalent(&s, &b));
        // s ~ a and s ~ b, so a ~ b must hold
        prop_assert!(states_equivalent(&a, &b));
    }

    #[test]
    fn normalize_is_idempotent(s in state()) {
        let once = normalize(&s);
        let twice = normalize(&once);
        prop_assert_eq!(once.clone(), twice, "normal form drifted: {}", once.dump());
    }

    #[test]
    fn distinct_ground_content_is_never_equivalent(s in state()) {
        // appending a fresh ground fact changes the equivalence class
        let mut t = s.clone();
        t.builtins.push(Constraint::new("q_marker", [Term::cst("zz")]));
        let n = normalize(&s);
        let nt = normalize(&t);
        if !n.is_failed() && !nt.is_failed() {
            prop_assert!(!states_equivalent(&s, &t));
        }
    }
}

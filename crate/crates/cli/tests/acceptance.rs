//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured evidence. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines as they print).

use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use actr_confluence::JsonReport;
use actr_confluence_core::actr::actr_step;
use actr_confluence_core::chr::{self, ChrRule, ChrState, Constraint};
use actr_confluence_core::confluence::{check_confluence, CheckOptions, Verdict};
use actr_confluence_core::gen;
use actr_confluence_core::invariants::{check_a, reconstruct_actr, SubInvariant};
use actr_confluence_core::term::{Delay, Term};
use actr_confluence_core::translate::{chr_successors, translate_rule, translate_state};

fn model_path(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

fn run_check_json(file: &str) -> (JsonReport, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_actr-confluence"))
        .args(["check", file, "--format", "json"])
        .output()
        .expect("binary runs");
    let report = serde_json::from_slice(&out.stdout).expect("valid JSON report");
    (report, out.status.code().unwrap_or(-1))
}

fn program_of(model: &actr_confluence_core::ActrModel) -> Vec<ChrRule> {
    model
        .rules
        .iter()
        .map(|r| translate_rule(r, &model.buffers))
        .collect()
}

/// Criterion 1: the stable-order counting model is reported confluent,
/// with the two-delta self-overlap pruned by A1 and the duplicate-gamma
/// overlaps pruned by A2, in under 10 seconds.
#[test]
fn criterion_1_counting_deterministic_is_confluent() {
    let started = Instant::now();
    let (report, code) = run_check_json(&model_path("counting_det.actr"));
    let elapsed = started.elapsed();
    assert_eq!(code, 0);
    assert_eq!(report.verdict, "confluent");
    let pruned_by = |inv: &str, detail_pat: &str| {
        report.overlaps.iter().any(|o| {
            o.pruned.as_ref().is_some_and(|p| {
                p.violations
                    .iter()
                    .any(|v| v.invariant == inv && v.detail.contains(detail_pat))
            })
        })
    };
    assert!(pruned_by("A1", "delta"), "two-delta overlap must be pruned by A1");
    assert!(pruned_by("A2", "gamma"), "duplicate-gamma overlaps must be pruned by A2");
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}");
    println!(
        "[PASS] criterion 1: counting (stable order) confluent, A1/A2 prunings listed, {:.2?}",
        elapsed
    );
}

/// Criterion 2: the unstable-order counting model is not confluent, with
/// a witness pair of terminal states differing in the goal's current
/// slot, in under 30 seconds.
#[test]
fn criterion_2_counting_unstable_is_not_confluent() {
    let started = Instant::now();
    let (report, code) = run_check_json(&model_path("counting_ambig.actr"));
    let elapsed = started.elapsed();
    assert_eq!(code, 1);
    assert_eq!(report.verdict, "not_confluent");
    let witness = report
        .overlaps
        .iter()
        .find_map(|o| o.join.as_ref().and_then(|j| j.witness.as_ref()))
        .expect("witness derivations present");
    let left = &witness.left.terminal;
    let right = &witness.right.terminal;
    assert_ne!(left, right);
    // the current slot of the goal's g-typed chunk
    let goal_current = |dump: &str| {
        dump.split(", g, {(current, ")
            .nth(1)
            .expect("terminal holds a g chunk")
            .chars()
            .next()
            .unwrap()
    };
    let lc = goal_current(left);
    let rc = goal_current(right);
    assert_ne!(lc, rc, "terminal goal currents must differ: {left} vs {right}");
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!(
        "[PASS] criterion 2: counting (unstable order) not confluent, terminal currents {lc} vs {rc}, {:.2?}",
        elapsed
    );
}

/// Criterion 3: the translation of the counting rule reproduces the
/// expected head and guard up to variable renaming, checked by state
/// equivalence on the head-as-state.
#[test]
fn criterion_3_translation_golden() {
    let source = std::fs::read_to_string(model_path("counting_det.actr")).unwrap();
    let model = actr_confluence::parse_model(&source)
        .unwrap()
        .set_normal_form()
        .unwrap();
    let rule = translate_rule(&model.rules[0], &model.buffers);

    // head {delta(D), gamma(goal, Cg, 0), gamma(retrieval, Cr, 0)} and
    // guard {chunk(Cg, g, {(current, X)}) in D,
    //        chunk(Cr, order, {(first, X), (second, Y)}) in D}
    let expected = ChrState::new(
        vec![
            Constraint::delta(Term::var("D")),
            Constraint::gamma(Term::cst("goal"), Term::var("Cg"), Term::Num(Delay::zero())),
            Constraint::gamma(Term::cst("retrieval"), Term::var("Cr"), Term::Num(Delay::zero())),
            Constraint::in_store(
                Term::app(
                    "chunk",
                    [
                        Term::var("Cg"),
                        Term::cst("g"),
                        Term::set([Term::pair(Term::cst("current"), Term::var("X"))]),
                    ],
                ),
                Term::var("D"),
            ),
            Constraint::in_store(
                Term::app(
                    "chunk",
                    [
                        Term::var("Cr"),
                        Term::cst("order"),
                        Term::set([
                            Term::pair(Term::cst("first"), Term::var("X")),
                            Term::pair(Term::cst("second"), Term::var("Y")),
                        ]),
                    ],
                ),
                Term::var("D"),
            ),
        ],
        Vec::new(),
        BTreeSet::new(),
    );
    let mut goal = rule.head.clone();
    goal.extend(rule.guard.iter().filter(|c| c.functor == chr::IN).cloned());
    let eqs: Vec<Constraint> = rule.guard.iter().filter(|c| c.is_eq()).cloned().collect();
    let actual = ChrState::new(goal, eqs, BTreeSet::new());
    assert!(
        chr::states_equivalent(&actual, &expected),
        "translated head/guard: {}\nexpected: {}",
        chr::normalize(&actual).dump(),
        chr::normalize(&expected).dump()
    );
    println!("[PASS] criterion 3: counting rule translation matches the expected head and guard");
}

/// Criterion 4: 500 generated (model, state) instances; every one-step
/// CHR successor satisfies the invariant. Zero failures.
#[test]
fn criterion_4_invariant_preservation() {
    let mut fired = 0usize;
    for seed in 0..500u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let sig = model.sig();
        let program = program_of(&model);
        let state = gen::random_state(&model, seed.wrapping_mul(31).wrapping_add(7));
        let chr_state = translate_state(&state);
        assert!(check_a(&chr_state, &sig).holds(), "seed {seed}");
        for (rule, succ) in chr_successors(&chr_state, &program) {
            fired += 1;
            let verdict = check_a(&succ, &sig);
            assert!(
                verdict.holds(),
                "seed {seed}, rule {rule}: {:?}",
                verdict.violations
            );
        }
    }
    assert!(fired >= 200, "suite too vacuous ({fired} transitions)");
    println!("[PASS] criterion 4: invariant preserved across {fired} transitions of 500 instances");
}

/// Criterion 5: 200 generated small models; on every state reachable
/// within depth 5, the reference-interpreter successor set and the CHR
/// successor set agree up to translation and state equivalence.
#[test]
fn criterion_5_soundness_completeness_oracle() {
    let mut states_checked = 0usize;
    for seed in 0..200u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let program = program_of(&model);
        let mut frontier = VecDeque::from([(model.initial.clone(), 0usize)]);
        let mut visited: BTreeSet<String> = BTreeSet::from([translate_state(&model.initial).dump()]);
        while let Some((state, depth)) = frontier.pop_front() {
            let actr_succ = actr_step(&state, &model);
            let chr_succ = chr_successors(&translate_state(&state), &program);
            assert_eq!(
                actr_succ.len(),
                chr_succ.len(),
                "seed {seed}: successor counts diverge"
            );
            let mut used = vec![false; chr_succ.len()];
            for (rule, succ) in &actr_succ {
                let translated = translate_state(succ);
                let found = chr_succ.iter().enumerate().any(|(j, (r, s))| {
                    if used[j] || r != rule {
                        return false;
                    }
                    if chr::states_equivalent(&translated, s) {
                        used[j] = true;
                        true
                    } else {
                        false
                    }
                });
                assert!(found, "seed {seed}: no CHR successor matches {rule}");
            }
            states_checked += 1;
            if depth < 5 {
                for (_, succ) in actr_succ {
                    if visited.insert(translate_state(&succ).dump()) {
                        frontier.push_back((succ, depth + 1));
                    }
                }
            }
        }
    }
    println!("[PASS] criterion 5: interpreter and translation agree on {states_checked} reachable states of 200 models");
}

/// Criterion 6: generated valid states satisfy the invariant and
/// round-trip through reconstruction; each of the five targeted
/// mutations trips exactly the expected sub-invariant.
#[test]
fn criterion_6_reconstruction_equivalence() {
    for seed in 0..100u64 {
        let model = gen::random_model(seed).set_normal_form().unwrap();
        let sig = model.sig();
        let state = gen::random_state(&model, seed ^ 0xbeef);
        let chr_state = translate_state(&state);
        assert!(check_a(&chr_state, &sig).holds(), "seed {seed}");
        let back = reconstruct_actr(&chr_state, &sig).unwrap();
        assert!(
            chr::states_equivalent(&translate_state(&back), &chr_state),
            "seed {seed}"
        );
    }

    let model = gen::counting_model().set_normal_form().unwrap();
    let sig = model.sig();
    let base = translate_state(&model.initial);
    let expect_only = |state: &ChrState, expected: SubInvariant| {
        let verdict = check_a(state, &sig);
        let kinds: BTreeSet<SubInvariant> = verdict.violations.iter().map(|(w, _)| *w).collect();
        assert_eq!(kinds, BTreeSet::from([expected]));
        assert!(reconstruct_actr(state, &sig).is_err());
    };

    let mut m = base.clone();
    let d = m.goal[0].clone();
    m.goal.push(d);
    expect_only(&m, SubInvariant::A1);

    let mut m = base.clone();
    m.goal
        .retain(|c| !(c.functor == chr::GAMMA && c.args[0] == Term::cst("retrieval")));
    expect_only(&m, SubInvariant::A2);

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

    let mut m = base.clone();
    if let Term::Set(items) = &mut m.goal[0].args[0] {
        let original = Term::app(
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
        assert!(items.remove(&original));
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

    let mut m = base.clone();
    m.goal.push(Constraint::new("foo", [Term::cst("x")]));
    expect_only(&m, SubInvariant::A5);

    println!("[PASS] criterion 6: reconstruction round-trips; all five mutations fire exactly the expected sub-invariant");
}

/// Criterion 7: for 50 generated, empirically terminating models, the
/// critical-pair verdict agrees with an exhaustive brute-force
/// divergence/joinability search over the shared state family. Unknown
/// verdicts are excluded and reported.
#[test]
fn criterion_7_brute_force_cross_check() {
    const GROUNDING_CAP: usize = 64;
    const JOIN_BUDGET: usize = 20_000;
    let opts = CheckOptions {
        max_steps: JOIN_BUDGET,
        universe_padding: 2,
        grounding_cap: GROUNDING_CAP,
    };
    let mut kept = 0usize;
    let mut excluded = 0usize;
    let mut split = (0usize, 0usize);
    let mut seed = 0u64;
    while kept < 50 {
        assert!(seed < 600, "not enough terminating models (kept {kept})");
        let model = gen::random_model(seed).set_normal_form().unwrap();
        seed += 1;
        let family = gen::grounding_family(&model, GROUNDING_CAP);
        if !gen::terminates_within(&model, &family, 30) {
            continue;
        }
        let report = check_confluence(&model, &opts);
        if report.verdict == Verdict::Unknown {
            excluded += 1;
            continue;
        }
        let Some(brute) = gen::brute_force_confluent(&model, &family, JOIN_BUDGET) else {
            excluded += 1;
            continue;
        };
        assert_eq!(
            report.verdict == Verdict::Confluent,
            brute,
            "seed {}: verdicts disagree",
            seed - 1
        );
        kept += 1;
        if brute {
            split.0 += 1;
        } else {
            split.1 += 1;
        }
    }
    println!(
        "[PASS] criterion 7: 50 models agree with brute force ({} confluent, {} not, {excluded} unknown excluded)",
        split.0, split.1
    );
}

/// Criterion 8: equivalence-relation laws and normalize idempotence,
/// 1000 deterministic cases each, zero failures.
#[test]
fn criterion_8_equivalence_laws() {
    for seed in 0..1000u64 {
        let s = gen::random_chr_state(seed);
        // reflexivity
        assert!(chr::states_equivalent(&s, &s), "reflexivity at seed {seed}");
        // symmetry on equivalent variants
        let v = gen::equivalent_variant(&s, seed);
        assert!(chr::states_equivalent(&s, &v), "variant at seed {seed}");
        assert!(chr::states_equivalent(&v, &s), "symmetry at seed {seed}");
        // transitivity through two variants
        let w = gen::equivalent_variant(&s, seed ^ 0xffff);
        assert!(chr::states_equivalent(&v, &w), "transitivity at seed {seed}");
        // idempotence of normalization
        let once = chr::normalize(&s);
        assert_eq!(once, chr::normalize(&once), "idempotence at seed {seed}");
    }
    println!("[PASS] criterion 8: equivalence laws and normalize idempotence hold on 1000 cases");
}

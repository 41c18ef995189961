//! Deterministic model and state generators for the verification suites,
//! plus the counting fixtures used throughout the tests.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::actr::{
    Action, ActionKind, ActrModel, ActrRule, ActrState, ActrValue, BufferTest, Chunk, ChunkType,
    Fact,
};
use crate::term::{Delay, Symbol};
use crate::translate::NIL_TYPE;

/// Splitmix64: tiny deterministic generator, good enough for fixture
/// sampling and independent of any external crate.
#[derive(Clone, Debug)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.wrapping_add(0x9e3779b97f4a7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n.max(1)
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }
}

fn chunk(id: &str, ctype: &str, svp: &[(&str, &str)]) -> Chunk {
    Chunk {
        id: id.to_owned(),
        ctype: ctype.to_owned(),
        values: svp
            .iter()
            .map(|(s, v)| ((*s).to_owned(), (*v).to_owned()))
            .collect(),
    }
}

/// The counting model with loaded buffers: goal holds a g-chunk with
/// current = 1, retrieval holds the order fact (1, 2), declarative memory
/// is the stable order 1 < 2 < 3.
pub fn counting_model() -> ActrModel {
    let mut m = counting_model_det();
    m.initial
        .store
        .insert(chunk("b0", "g", &[("current", "1")]))
        .unwrap();
    m.initial
        .gamma
        .insert("goal".to_owned(), ("b0".to_owned(), Delay::zero()));
    m.initial
        .gamma
        .insert("retrieval".to_owned(), ("a".to_owned(), Delay::zero()));
    m
}

/// The counting model exactly as written in the model file: two declared
/// types, the five chunks of the stable order network, empty buffers.
pub fn counting_model_det() -> ActrModel {
    let mut m = ActrModel::new(["goal".to_owned(), "retrieval".to_owned()]);
    m.types.insert(
        "g".to_owned(),
        ChunkType {
            name: "g".to_owned(),
            slots: BTreeSet::from(["current".to_owned()]),
        },
    );
    m.types.insert(
        "order".to_owned(),
        ChunkType {
            name: "order".to_owned(),
            slots: BTreeSet::from(["first".to_owned(), "second".to_owned()]),
        },
    );
    for n in ["1", "2", "3"] {
        m.initial.store.insert(chunk(n, NIL_TYPE, &[])).unwrap();
    }
    m.initial
        .store
        .insert(chunk("a", "order", &[("first", "1"), ("second", "2")]))
        .unwrap();
    m.initial
        .store
        .insert(chunk("b", "order", &[("first", "2"), ("second", "3")]))
        .unwrap();
    // unloaded buffers share a nil chunk
    m.initial
        .store
        .insert(chunk(crate::translate::NIL_ID, NIL_TYPE, &[]))
        .unwrap();
    for b in ["goal", "retrieval"] {
        m.initial.gamma.insert(
            b.to_owned(),
            (crate::translate::NIL_ID.to_owned(), Delay::zero()),
        );
    }
    m.rules.push(counting_rule());
    m
}

/// The counting model over an unstable order: the two order facts (1, 2)
/// and (1, 3) share their first slot, so requests for first = 1 are
/// ambiguous.
pub fn counting_model_ambiguous() -> ActrModel {
    let mut m = counting_model_det();
    // replace (2, 3) by (1, 3): both order chunks now start at 1
    let mut store = crate::actr::ChunkStore::new();
    for c in m.initial.store.chunks() {
        if c.id == "b" {
            continue;
        }
        store.insert(c.clone()).unwrap();
    }
    store
        .insert(chunk("c", "order", &[("first", "1"), ("second", "3")]))
        .unwrap();
    m.initial.store = store;
    m
}

pub fn counting_rule() -> ActrRule {
    ActrRule {
        name: "count".to_owned(),
        lhs: alloc::vec![
            BufferTest {
                buffer: "goal".to_owned(),
                ctype: "g".to_owned(),
                svp: alloc::vec![("current".to_owned(), ActrValue::Var("X".to_owned()))],
            },
            BufferTest {
                buffer: "retrieval".to_owned(),
                ctype: "order".to_owned(),
                svp: alloc::vec![
                    ("first".to_owned(), ActrValue::Var("X".to_owned())),
                    ("second".to_owned(), ActrValue::Var("Y".to_owned())),
                ],
            },
        ],
        rhs: alloc::vec![
            Action {
                kind: ActionKind::Modify,
                buffer: "goal".to_owned(),
                ctype: "g".to_owned(),
                svp: alloc::vec![("current".to_owned(), ActrValue::Var("Y".to_owned()))],
            },
            Action {
                kind: ActionKind::Request,
                buffer: "retrieval".to_owned(),
                ctype: "order".to_owned(),
                svp: alloc::vec![("first".to_owned(), ActrValue::Var("Y".to_owned()))],
            },
        ],
    }
}

/// A small random model: up to three non-nil types, up to six chunks, up
/// to three rules, all cross-references valid by construction.
pub fn random_model(seed: u64) -> ActrModel {
    let mut rng = Rng::new(seed);
    let buffers: Vec<Symbol> = if rng.chance(1, 2) {
        alloc::vec!["b1".to_owned(), "b2".to_owned()]
    } else {
        alloc::vec!["b1".to_owned()]
    };
    let mut m = ActrModel::new(buffers.clone());

    let n_types = 1 + rng.below(3);
    let slot_names = ["s1", "s2"];
    let mut type_names: Vec<Symbol> = Vec::new();
    for i in 0..n_types {
        let name = format!("t{}", i + 1);
        let n_slots = rng.below(3) as usize; // 0..=2
        m.types.insert(
            name.clone(),
            ChunkType {
                name: name.clone(),
                slots: slot_names[..n_slots].iter().map(|s| (*s).to_owned()).collect(),
            },
        );
        type_names.push(name);
    }

    let n_chunks = 3 + rng.below(4); // 3..=6
    let ids: Vec<Symbol> = (0..n_chunks).map(|i| format!("c{}", i + 1)).collect();
    for id in &ids {
        let ctype = rng.pick(&type_names).clone();
        let slots = m.types[&ctype].slots.clone();
        let values: BTreeMap<Symbol, Symbol> = slots
            .iter()
            .map(|s| (s.clone(), rng.pick(&ids).clone()))
            .collect();
        m.initial
            .store
            .insert(Chunk {
                id: id.clone(),
                ctype,
                values,
            })
            .unwrap();
    }
    for b in &buffers {
        let id = rng.pick(&ids).clone();
        let delay = if rng.chance(1, 10) {
            Delay::from_integer(1)
        } else {
            Delay::zero()
        };
        m.initial.gamma.insert(b.clone(), (id, delay));
    }
    if rng.chance(1, 4) {
        m.fact_arities.insert("p".to_owned(), 1);
        m.initial.upsilon.push(Fact {
            functor: "p".to_owned(),
            args: alloc::vec![rng.pick(&ids).clone()],
        });
    }

    let var_pool = ["X", "Y", "Z"];
    let n_rules = 1 + rng.below(3);
    for r in 0..n_rules {
        let mut lhs = Vec::new();
        let mut tested: BTreeMap<Symbol, Symbol> = BTreeMap::new();
        for b in &buffers {
            if !lhs.is_empty() && rng.chance(1, 3) {
                continue; // leave this buffer untested
            }
            let ctype = rng.pick(&type_names).clone();
            let slots: Vec<Symbol> = m.types[&ctype].slots.iter().cloned().collect();
            let mut svp = Vec::new();
            for s in &slots {
                if rng.chance(2, 3) {
                    let v = if rng.chance(2, 3) {
                        ActrValue::Var((*rng.pick(&var_pool)).to_owned())
                    } else {
                        ActrValue::Const(rng.pick(&ids).clone())
                    };
                    svp.push((s.clone(), v));
                }
            }
            tested.insert(b.clone(), ctype.clone());
            lhs.push(BufferTest {
                buffer: b.clone(),
                ctype,
                svp,
            });
        }
        if lhs.is_empty() {
            let ctype = rng.pick(&type_names).clone();
            tested.insert(buffers[0].clone(), ctype.clone());
            lhs.push(BufferTest {
                buffer: buffers[0].clone(),
                ctype,
                svp: Vec::new(),
            });
        }
        let lhs_vars: BTreeSet<Symbol> = lhs
            .iter()
            .flat_map(|t| t.svp.iter())
            .filter_map(|(_, v)| match v {
                ActrValue::Var(x) => Some(x.clone()),
                ActrValue::Const(_) => None,
            })
            .collect();
        let lhs_vars: Vec<Symbol> = lhs_vars.into_iter().collect();

        let mut rhs = Vec::new();
        for b in &buffers {
            if rng.chance(1, 2) {
                continue; // no action on this buffer
            }
            let kind = match rng.below(3) {
                0 if tested.contains_key(b) => ActionKind::Modify,
                1 => ActionKind::Request,
                _ => ActionKind::Clear,
            };
            match kind {
                ActionKind::Modify => {
                    let ctype = tested[b].clone();
                    let slots: Vec<Symbol> = m.types[&ctype].slots.iter().cloned().collect();
                    if slots.is_empty() {
                        continue;
                    }
                    let slot = rng.pick(&slots).clone();
                    let v = if !lhs_vars.is_empty() && rng.chance(1, 2) {
                        ActrValue::Var(rng.pick(&lhs_vars).clone())
                    } else {
                        ActrValue::Const(rng.pick(&ids).clone())
                    };
                    rhs.push(Action {
                        kind,
                        buffer: b.clone(),
                        ctype,
                        svp: alloc::vec![(slot, v)],
                    });
                }
                ActionKind::Request => {
                    let ctype = rng.pick(&type_names).clone();
                    let slots: Vec<Symbol> = m.types[&ctype].slots.iter().cloned().collect();
                    let mut svp = Vec::new();
                    if !slots.is_empty() && rng.chance(3, 4) {
                        let slot = rng.pick(&slots).clone();
                        let v = if !lhs_vars.is_empty() && rng.chance(1, 2) {
                            ActrValue::Var(rng.pick(&lhs_vars).clone())
                        } else {
                            ActrValue::Const(rng.pick(&ids).clone())
                        };
                        svp.push((slot, v));
                    }
                    rhs.push(Action {
                        kind,
                        buffer: b.clone(),
                        ctype,
                        svp,
                    });
                }
                ActionKind::Clear => {
                    rhs.push(Action {
                        kind,
                        buffer: b.clone(),
                        ctype: NIL_TYPE.to_owned(),
                        svp: Vec::new(),
                    });
                }
            }
        }
        m.rules.push(ActrRule {
            name: format!("r{}", r + 1),
            lhs,
            rhs,
        });
    }
    debug_assert!(m.validate().is_ok(), "generated model must validate");
    m
}

/// A random valid state over the model's types: a closed chunk store with
/// fresh identifiers and a total cognitive state.
pub fn random_state(model: &ActrModel, seed: u64) -> ActrState {
    let mut rng = Rng::new(seed ^ 0xabcd_1234);
    let type_names: Vec<Symbol> = model.types.keys().cloned().collect();
    let n_chunks = 2 + rng.below(5); // 2..=6
    let ids: Vec<Symbol> = (0..n_chunks).map(|i| format!("d{}", i + 1)).collect();
    let mut state = ActrState {
        store: crate::actr::ChunkStore::new(),
        gamma: BTreeMap::new(),
        upsilon: Vec::new(),
    };
    for id in &ids {
        let ctype = rng.pick(&type_names).clone();
        let values: BTreeMap<Symbol, Symbol> = model.types[&ctype]
            .slots
            .iter()
            .map(|s| (s.clone(), rng.pick(&ids).clone()))
            .collect();
        state
            .store
            .insert(Chunk {
                id: id.clone(),
                ctype,
                values,
            })
            .unwrap();
    }
    for b in &model.buffers {
        let id = rng.pick(&ids).clone();
        let delay = if rng.chance(1, 8) {
            Delay::from_integer(1)
        } else {
            Delay::zero()
        };
        state.gamma.insert(b.clone(), (id, delay));
    }
    for (functor, arity) in &model.fact_arities {
        if rng.chance(1, 2) {
            state.upsilon.push(Fact {
                functor: functor.clone(),
                args: (0..*arity).map(|_| rng.pick(&ids).clone()).collect(),
            });
        }
    }
    state.upsilon.sort();
    debug_assert!(model.validate_state(&state).is_ok());
    state
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

use crate::actr::actr_step;
use crate::chr::ChrState;
use crate::translate::translate_state;
use alloc::collections::VecDeque;
use alloc::string::String;

fn state_key(state: &ActrState) -> String {
    translate_state(state).dump()
}

/// The shared grounding family of a model: the initial state plus every
/// instantiated unpruned overlap, reconstructed into ACT-R states.
pub fn grounding_family(model: &ActrModel, grounding_cap: usize) -> Vec<ActrState> {
    let sig = model.sig();
    let program: Vec<_> = model
        .rules
        .iter()
        .map(|r| crate::translate::translate_rule(r, &model.buffers))
        .collect();
    let uni = crate::invariants::universe(&model.constants(), 2);
    let mut out: Vec<ActrState> = alloc::vec![model.initial.clone()];
    let mut seen: BTreeSet<String> = out.iter().map(state_key).collect();
    for overlap in crate::confluence::compute_overlaps(&program) {
        if overlap.duplicate_of.is_some() {
            continue;
        }
        let analysis = crate::invariants::analyze_overlap(&overlap.state, &sig);
        if analysis.refuted() || crate::invariants::witness_state(&analysis, &sig, &uni).is_none() {
            continue;
        }
        let (instances, _) =
            crate::confluence::enumerate_groundings(&analysis, model, &uni, grounding_cap);
        for instance in instances {
            if let Ok(state) = crate::invariants::reconstruct_actr(&instance, &sig) {
                if seen.insert(state_key(&state)) {
                    out.push(state);
                }
            }
        }
    }
    out.truncate(200);
    out
}

/// Empirically verifies bounded termination: every run from every family
/// state quiesces within the depth bound (and a state-count safety cap).
pub fn terminates_within(model: &ActrModel, family: &[ActrState], depth: usize) -> bool {
    for start in family {
        let mut frontier = VecDeque::from([(start.clone(), 0usize)]);
        let mut visited: BTreeSet<String> = BTreeSet::from([state_key(start)]);
        while let Some((state, d)) = frontier.pop_front() {
            if d >= depth {
                return false;
            }
            for (_, succ) in actr_step(&state, model) {
                if visited.insert(state_key(&succ)) {
                    frontier.push_back((succ, d + 1));
                }
            }
            if visited.len() > 2000 {
                return false;
            }
        }
    }
    true
}

/// Exhaustive joinability through the reference interpreter, bounded by
/// an expansion budget. `None` when the budget runs out.
pub fn actr_joinable(
    a: &ActrState,
    b: &ActrState,
    model: &ActrModel,
    budget: usize,
) -> Option<bool> {
    let key_a = state_key(a);
    let key_b = state_key(b);
    if key_a == key_b {
        return Some(true);
    }
    let mut sides = [
        (VecDeque::from([a.clone()]), BTreeSet::from([key_a])),
        (VecDeque::from([b.clone()]), BTreeSet::from([key_b])),
    ];
    let mut budget = budget;
    loop {
        if sides.iter().all(|(q, _)| q.is_empty()) {
            break;
        }
        for i in 0..2 {
            let Some(state) = sides[i].0.pop_front() else {
                continue;
            };
            if budget == 0 {
                return None;
            }
            budget -= 1;
            for (_, succ) in actr_step(&state, model) {
                let key = state_key(&succ);
                if sides[i].1.contains(&key) {
                    continue;
                }
                if sides[1 - i].1.contains(&key) {
                    return Some(true);
                }
                sides[i].1.insert(key);
                sides[i].0.push_back(succ);
            }
        }
    }
    Some(false)
}

/// Direct divergence search over the family: every pair of distinct
/// one-step successors of every family state must join. `None` when a
/// joinability budget runs out.
pub fn brute_force_confluent(
    model: &ActrModel,
    family: &[ActrState],
    budget: usize,
) -> Option<bool> {
    for state in family {
        let mut distinct: BTreeMap<String, ActrState> = BTreeMap::new();
        for (_, succ) in actr_step(state, model) {
            distinct.insert(state_key(&succ), succ);
        }
        let succs: Vec<&ActrState> = distinct.values().collect();
        for i in 0..succs.len() {
            for j in (i + 1)..succs.len() {
                if !actr_joinable(succs[i], succs[j], model, budget)? {
                    return Some(false);
                }
            }
        }
    }
    Some(true)
}

// ---------------------------------------------------------------------------
// Random CHR states (for the equivalence-law suites)
// ---------------------------------------------------------------------------

use crate::chr::Constraint;
use crate::term::Term;

fn random_term(rng: &mut Rng, depth: usize) -> Term {
    let consts = ["a", "b", "c1", "goal", "one"];
    let vars = ["X", "Y", "Z", "W"];
    match rng.below(if depth == 0 { 6 } else { 9 }) {
        0..=2 => Term::cst(rng.pick(&consts)),
        3 | 4 => Term::var(rng.pick(&vars)),
        5 => Term::Num(Delay::from_integer(rng.below(3))),
        6 => Term::pair(random_term(rng, depth - 1), random_term(rng, depth - 1)),
        7 => Term::Set(
            (0..rng.below(3))
                .map(|_| random_term(rng, depth - 1))
                .collect(),
        ),
        _ => Term::app(
            "f",
            (0..1 + rng.below(2))
                .map(|_| random_term(rng, depth - 1))
                .collect::<Vec<_>>(),
        ),
    }
}

/// A random small CHR state with a mix of goal constraints, equalities,
/// facts and globals.
pub fn random_chr_state(seed: u64) -> ChrState {
    let mut rng = Rng::new(seed ^ 0x517e_57a7e);
    let functors = ["delta", "gamma", "p", "in"];
    let goal: Vec<Constraint> = (0..rng.below(4))
        .map(|_| {
            Constraint::new(
                rng.pick(&functors),
                (0..1 + rng.below(2))
                    .map(|_| random_term(&mut rng, 2))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let mut builtins: Vec<Constraint> = (0..rng.below(2))
        .map(|_| Constraint::eq(random_term(&mut rng, 1), random_term(&mut rng, 1)))
        .collect();
    for _ in 0..rng.below(2) {
        builtins.push(Constraint::new(
            "q",
            alloc::vec![random_term(&mut rng, 1)],
        ));
    }
    let globals: BTreeSet<Symbol> = ["X", "Y", "Z", "W"]
        .iter()
        .filter(|_| rng.chance(1, 3))
        .map(|s| (*s).to_owned())
        .collect();
    ChrState::new(goal, builtins, globals)
}

/// A semantically equal variant of a state: locals renamed bijectively,
/// the goal rotated, and optionally one ground constant re-expressed
/// through a solved equality.
pub fn equivalent_variant(state: &ChrState, seed: u64) -> ChrState {
    let mut rng = Rng::new(seed ^ 0xda7a);
    let locals = state.local_vars();
    let mut out = state.clone();
    let names = ["R0", "R1", "R2", "R3", "R4", "R5"];
    let offset = rng.below(names.len() as u64) as usize;
    let mut renaming = crate::term::Substitution::new();
    for (i, v) in locals.iter().enumerate() {
        renaming
            .bind(v, &Term::var(names[(i + offset) % names.len()]))
            .ok();
    }
    out = out.apply(&renaming);
    let rot = rng.below(out.goal.len().max(1) as u64) as usize;
    out.goal.rotate_left(rot);
    if rng.chance(1, 2) {
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

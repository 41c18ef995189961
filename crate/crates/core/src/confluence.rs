//! Critical-pair confluence analysis for translated programs.
//!
//! All rule pairs (including a rule with a variant of itself) are
//! overlapped on every non-empty unifiable head subset. Overlap states
//! that cannot satisfy the ACT-R invariant under any grounding are
//! pruned; the survivors are instantiated over a finite grounding family
//! built from the model's own chunk store, and every instantiated
//! critical pair is tested for joinability by breadth-first search over
//! the transition relation. The verdict assumes termination of the model
//! and reports the bounds it used.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::actr::{ActionKind, ActrModel, ModelSig};
use crate::chr::{self, ChrRule, ChrState, Constraint};
use crate::invariants::{self, analyze_overlap, ForcedChunk, OverlapAnalysis, SubInvariant};
use crate::term::{unify, Delay, Substitution, Symbol, Term, VarPolicy};
use crate::translate::{self, store_to_term, ChunkTerm, Store, NIL_TYPE};

/// An overlap of two rule variants on a shared head subset.
#[derive(Clone, Debug)]
pub struct Overlap {
    pub rule_a: Symbol,
    pub rule_b: Symbol,
    /// Indices of the paired head constraints in each rule's head.
    pub paired_a: Vec<usize>,
    pub paired_b: Vec<usize>,
    /// The overlap state `<R + R' + O ; (O = O') /\ G /\ G' ; V>`, normalized.
    pub state: ChrState,
    /// The solved pairing equations.
    pub unifier: Substitution,
    /// Human-readable description of the paired subset.
    pub descriptor: String,
    /// Whether both full heads were paired with the identity matching.
    pub full_head: bool,
    /// Index of an earlier equivalent overlap, when deduplicated.
    pub duplicate_of: Option<usize>,
    rule_a_variant: ChrRule,
    rule_b_variant: ChrRule,
    raw_builtins: Vec<Constraint>,
    /// Equalities entailed by identifier uniqueness: membership guards on
    /// one identifier force equal chunk terms, so their value variables
    /// coincide on every store satisfying the invariant.
    forced_equations: Vec<Constraint>,
    globals: BTreeSet<Symbol>,
}

/// The two states obtained by firing each overlapped rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalPair {
    pub left: ChrState,
    pub right: ChrState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinStatus {
    Joinable,
    NotJoinable,
    Unknown,
}

/// One maximal derivation: rule names fired and the terminal state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub rules: Vec<Symbol>,
    pub terminal: ChrState,
}

/// Two maximal derivations reaching distinct normal forms. When the
/// witness comes from an instantiated overlap, `start` is the common
/// diverging state and the derivations begin with the two overlapped
/// rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinWitness {
    pub start: Option<ChrState>,
    pub left: Derivation,
    pub right: Derivation,
}

#[derive(Clone, Debug)]
pub struct JoinVerdict {
    pub status: JoinStatus,
    pub meeting_state: Option<ChrState>,
    pub witness: Option<JoinWitness>,
    pub steps_used: usize,
}

/// Why an overlap was excluded from the joinability test.
#[derive(Clone, Debug)]
pub enum PruneReason {
    /// Structural invariant violations that hold under every grounding.
    Violations(Vec<(SubInvariant, String)>),
    /// No grounding over the finite universe satisfies the invariant.
    NoGrounding(String),
}

#[derive(Clone, Debug)]
pub struct OverlapReport {
    pub overlap: Overlap,
    pub pruned: Option<PruneReason>,
    /// The symbolic critical pair of a full self-overlap is equivalent by
    /// construction; instantiations are still tested for request branching.
    pub trivial_symmetric: bool,
    pub groundings_tested: usize,
    pub groundings_capped: bool,
    pub join: Option<JoinVerdict>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Confluent,
    NotConfluent,
    Unknown,
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Verdict::Confluent => write!(f, "confluent"),
            Verdict::NotConfluent => write!(f, "not confluent"),
            Verdict::Unknown => write!(f, "unknown"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConfluenceReport {
    pub verdict: Verdict,
    pub overlaps: Vec<OverlapReport>,
    pub termination_note: String,
    pub universe: Vec<Symbol>,
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub max_steps: usize,
    pub universe_padding: usize,
    /// Cap on instantiated groundings per overlap; exceeding it is
    /// annotated in the report.
    pub grounding_cap: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            max_steps: 1000,
            universe_padding: 2,
            grounding_cap: 512,
        }
    }
}

// ---------------------------------------------------------------------------
// Overlap enumeration
// ---------------------------------------------------------------------------

/// All overlaps of every rule pair (ordered pairs with `a <= b`,
/// including self-pairs as two variants), deduplicated up to state
/// equivalence modulo variable renaming.
pub fn compute_overlaps(program: &[ChrRule]) -> Vec<Overlap> {
    let mut out: Vec<Overlap> = Vec::new();
    for i in 0..program.len() {
        for j in i..program.len() {
            out.extend(overlaps_of_pair(&program[i], &program[j]));
        }
    }
    // dedup up to equivalence with all variables treated as local; only
    // overlaps of the same rule pair may collapse, since the critical
    // pairs depend on the rule bodies, not just the overlap state
    let keys: Vec<ChrState> = out.iter().map(|o| anonymize(&o.state)).collect();
    for idx in 0..out.len() {
        for prev in 0..idx {
            if out[prev].duplicate_of.is_none()
                && out[prev].rule_a == out[idx].rule_a
                && out[prev].rule_b == out[idx].rule_b
                && chr::states_equivalent(&keys[idx], &keys[prev])
            {
                out[idx].duplicate_of = Some(prev);
                break;
            }
        }
    }
    out
}

fn anonymize(state: &ChrState) -> ChrState {
    let mut s = state.clone();
    s.globals = BTreeSet::new();
    chr::normalize(&s)
}

/// Overlaps of one (ordered) rule pair. The two rules are renamed apart
/// as variants `#o1` and `#o2`.
pub fn overlaps_of_pair(a: &ChrRule, b: &ChrRule) -> Vec<Overlap> {
    let va = a.rename_apart("#o1");
    let vb = b.rename_apart("#o2");
    let mut globals = va.head_and_guard_vars();
    globals.extend(vb.head_and_guard_vars());

    let na = va.head.len();
    let nb = vb.head.len();
    let mut out = Vec::new();
    // non-empty subsets of a's head, in bitmask order
    for mask in 1u32..(1 << na) {
        let sel_a: Vec<usize> = (0..na).filter(|i| mask & (1 << i) != 0).collect();
        // injective assignments into b's head
        let mut assignment: Vec<usize> = Vec::with_capacity(sel_a.len());
        enumerate_pairings(&va, &vb, &sel_a, 0, &mut assignment, &mut |pairing| {
            if let Some(ov) = build_overlap(&va, &vb, &sel_a, pairing, &globals) {
                out.push(ov);
            }
        });
        let _ = nb;
    }
    out
}

fn enumerate_pairings(
    va: &ChrRule,
    vb: &ChrRule,
    sel_a: &[usize],
    depth: usize,
    assignment: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if depth == sel_a.len() {
        emit(assignment);
        return;
    }
    let ca = &va.head[sel_a[depth]];
    for (j, cb) in vb.head.iter().enumerate() {
        if assignment.contains(&j) {
            continue;
        }
        if ca.functor != cb.functor || ca.args.len() != cb.args.len() {
            continue;
        }
        assignment.push(j);
        enumerate_pairings(va, vb, sel_a, depth + 1, assignment, emit);
        assignment.pop();
    }
}

fn build_overlap(
    va: &ChrRule,
    vb: &ChrRule,
    sel_a: &[usize],
    sel_b: &[usize],
    globals: &BTreeSet<Symbol>,
) -> Option<Overlap> {
    // pairing equations (O = O')
    let mut eqs = Vec::new();
    let mut unifier = Substitution::new();
    for (ia, ib) in sel_a.iter().zip(sel_b) {
        let ca = &va.head[*ia];
        let cb = &vb.head[*ib];
        for (x, y) in ca.args.iter().zip(&cb.args) {
            eqs.push(Constraint::eq(x.clone(), y.clone()));
            if unify(&mut unifier, x, y, VarPolicy::TwoWay { prefer: &|_| true }).is_err() {
                return None;
            }
        }
    }
    let mut goal: Vec<Constraint> = Vec::new();
    for (i, c) in va.head.iter().enumerate() {
        if !sel_a.contains(&i) {
            goal.push(c.clone());
        }
    }
    for (j, c) in vb.head.iter().enumerate() {
        if !sel_b.contains(&j) {
            goal.push(c.clone());
        }
    }
    for i in sel_a {
        goal.push(va.head[*i].clone());
    }
    let mut raw_builtins = eqs;
    raw_builtins.extend(va.guard.iter().cloned());
    raw_builtins.extend(vb.guard.iter().cloned());

    let state = chr::normalize(&ChrState::new(goal.clone(), raw_builtins.clone(), globals.clone()));
    if state.is_failed() {
        return None;
    }
    // the guard conjunction must be satisfiable in the constraint theory:
    // membership constraints that force incompatible chunks on one
    // identifier cannot be satisfied by any store
    let forced_equations = forced_equalities(&state)?;

    let full_head = sel_a.len() == va.head.len() && sel_b.len() == vb.head.len();
    let descriptor = sel_a
        .iter()
        .map(|i| {
            let c = &va.head[*i];
            if c.functor == chr::GAMMA {
                format!("gamma({})", c.args[0])
            } else {
                c.functor.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(", ");

    Some(Overlap {
        rule_a: va.name.clone(),
        rule_b: vb.name.clone(),
        paired_a: sel_a.to_owned(),
        paired_b: sel_b.to_owned(),
        state,
        unifier,
        descriptor: format!("O = {{{descriptor}}}"),
        full_head,
        duplicate_of: None,
        rule_a_variant: va.clone(),
        rule_b_variant: vb.clone(),
        raw_builtins,
        forced_equations,
        globals: globals.clone(),
    })
}

/// Bindings forced on the overlap's variables by identifier uniqueness,
/// as equality constraints; `None` when the forced chunks clash, i.e.
/// the guard conjunction is unsatisfiable.
fn forced_equalities(state: &ChrState) -> Option<Vec<Constraint>> {
    // per-identifier consistency does not depend on the model signature
    let sig = ModelSig {
        types: BTreeMap::new(),
        buffers: BTreeSet::new(),
        fact_arities: BTreeMap::new(),
    };
    let analysis = analyze_overlap(state, &sig);
    if analysis
        .refutations
        .iter()
        .any(|(w, _)| *w == SubInvariant::A3)
    {
        return None;
    }
    Some(
        analysis
            .subst
            .iter()
            .map(|(v, t)| Constraint::eq(Term::Var(v.clone()), t.clone()))
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Critical pairs
// ---------------------------------------------------------------------------

/// The symbolic critical pair of an overlap, built exactly from the two
/// rule variants and normalized. Built-ins whose arguments are not ground
/// remain symbolic.
pub fn critical_pair_of(overlap: &Overlap) -> CriticalPair {
    let va = &overlap.rule_a_variant;
    let vb = &overlap.rule_b_variant;
    let mut left_goal: Vec<Constraint> = Vec::new();
    for (j, c) in vb.head.iter().enumerate() {
        if !overlap.paired_b.contains(&j) {
            left_goal.push(c.clone());
        }
    }
    left_goal.extend(va.body_chr.iter().cloned());
    let mut left_builtins = overlap.raw_builtins.clone();
    left_builtins.extend(overlap.forced_equations.iter().cloned());
    left_builtins.extend(va.body_builtin.iter().cloned());

    let mut right_goal: Vec<Constraint> = Vec::new();
    for (i, c) in va.head.iter().enumerate() {
        if !overlap.paired_a.contains(&i) {
            right_goal.push(c.clone());
        }
    }
    right_goal.extend(vb.body_chr.iter().cloned());
    let mut right_builtins = overlap.raw_builtins.clone();
    right_builtins.extend(overlap.forced_equations.iter().cloned());
    right_builtins.extend(vb.body_builtin.iter().cloned());

    CriticalPair {
        left: chr::normalize(&ChrState::new(left_goal, left_builtins, overlap.globals.clone())),
        right: chr::normalize(&ChrState::new(right_goal, right_builtins, overlap.globals.clone())),
    }
}

/// Critical pairs of a ground instantiation of the overlap: each side is
/// resolved by firing its rule on the instantiated state, branching on
/// ambiguous requests, and the pairs are all left/right combinations.
pub fn instantiated_pairs(overlap: &Overlap, instance: &ChrState) -> Vec<CriticalPair> {
    let left = fire(instance, &overlap.rule_a_variant);
    let right = fire(instance, &overlap.rule_b_variant);
    let mut out = Vec::new();
    for l in &left {
        for r in &right {
            out.push(CriticalPair {
                left: l.clone(),
                right: r.clone(),
            });
        }
    }
    out
}

fn fire(state: &ChrState, rule: &ChrRule) -> Vec<ChrState> {
    let variant = rule.rename_apart("#f");
    let mut out = Vec::new();
    for (_, post) in chr::match_rule(state, &variant) {
        out.extend(translate::resolve_transition(&post));
    }
    out.sort();
    out.dedup();
    out
}

// ---------------------------------------------------------------------------
// Joinability
// ---------------------------------------------------------------------------

struct SearchSide {
    nodes: Vec<(ChrState, Option<(usize, Symbol)>)>, // state, parent edge
    index: BTreeMap<String, usize>,
    frontier: Vec<usize>,
}

impl SearchSide {
    fn new(start: ChrState) -> SearchSide {
        let key = chr::normalize(&start).dump();
        SearchSide {
            nodes: alloc::vec![(start, None)],
            index: BTreeMap::from([(key, 0)]),
            frontier: alloc::vec![0],
        }
    }

    fn derivation_to(&self, mut idx: usize) -> Derivation {
        let mut rules = Vec::new();
        while let Some((parent, rule)) = &self.nodes[idx].1 {
            rules.push(rule.clone());
            idx = *parent;
        }
        rules.reverse();
        Derivation {
            rules,
            terminal: self.nodes[idx].0.clone(),
        }
    }

    fn full_derivation(&self, idx: usize) -> Derivation {
        let mut d = self.derivation_to(idx);
        d.terminal = self.nodes[idx].0.clone();
        d
    }
}

/// Breadth-first joinability up to a combined expansion budget: explores
/// the transition relation from both states, comparing the explored sets
/// by state equivalence. `not_joinable` requires both sides fully
/// normalized within the bound; exhausting the budget with live frontiers
/// yields `unknown`.
pub fn joinable(pair: &CriticalPair, program: &[ChrRule], max_steps: usize) -> JoinVerdict {
    if chr::states_equivalent(&pair.left, &pair.right) {
        return JoinVerdict {
            status: JoinStatus::Joinable,
            meeting_state: Some(chr::normalize(&pair.left)),
            witness: None,
            steps_used: 0,
        };
    }
    let mut left = SearchSide::new(chr::normalize(&pair.left));
    let mut right = SearchSide::new(chr::normalize(&pair.right));
    // initial meet already checked above
    let mut steps = 0usize;

    loop {
        let left_live = !left.frontier.is_empty();
        let right_live = !right.frontier.is_empty();
        if !left_live && !right_live {
            break;
        }
        if steps >= max_steps {
            return JoinVerdict {
                status: JoinStatus::Unknown,
                meeting_state: None,
                witness: None,
                steps_used: steps,
            };
        }
        for side in 0..2 {
            let (this, other) = if side == 0 {
                (&mut left, &mut right)
            } else {
                (&mut right, &mut left)
            };
            let frontier = core::mem::take(&mut this.frontier);
            let mut next = Vec::new();
            for idx in frontier {
                if steps >= max_steps {
                    // push back unexpanded nodes so liveness is visible
                    this.frontier.push(idx);
                    continue;
                }
                steps += 1;
                let successors = translate::chr_successors(&this.nodes[idx].0.clone(), program);
                for (rule, succ) in successors {
                    let key = succ.dump();
                    if this.index.contains_key(&key) {
                        continue;
                    }
                    let new_idx = this.nodes.len();
                    this.nodes.push((succ, Some((idx, rule))));
                    this.index.insert(key.clone(), new_idx);
                    next.push(new_idx);
                    if other.index.contains_key(&key) {
                        let meeting = this.nodes[new_idx].0.clone();
                        return JoinVerdict {
                            status: JoinStatus::Joinable,
                            meeting_state: Some(meeting),
                            witness: None,
                            steps_used: steps,
                        };
                    }
                }
            }
            this.frontier.extend(next);
        }
    }

    // both sides exhausted without meeting: not joinable; exhibit the
    // lexicographically least terminal of each side
    let terminal_of = |side: &SearchSide| -> usize {
        let mut best: Option<(String, usize)> = None;
        for (i, (state, _)) in side.nodes.iter().enumerate() {
            let is_terminal = translate::chr_successors(state, program).is_empty();
            if is_terminal {
                let key = state.dump();
                if best.as_ref().map(|(k, _)| key < *k).unwrap_or(true) {
                    best = Some((key, i));
                }
            }
        }
        best.map(|(_, i)| i).unwrap_or(0)
    };
    let li = terminal_of(&left);
    let ri = terminal_of(&right);
    JoinVerdict {
        status: JoinStatus::NotJoinable,
        meeting_state: None,
        witness: Some(JoinWitness {
            start: None,
            left: left.full_derivation(li),
            right: right.full_derivation(ri),
        }),
        steps_used: steps,
    }
}

// ---------------------------------------------------------------------------
// Grounding family
// ---------------------------------------------------------------------------

/// Slots that appear in some request pattern, per chunk type. Fresh
/// chunks added during instantiation keep these slots anonymous so the
/// instantiation itself cannot manufacture request answers; ambiguity
/// must come from the model's own store.
pub fn request_key_slots(model: &ActrModel) -> BTreeMap<Symbol, BTreeSet<Symbol>> {
    let mut out: BTreeMap<Symbol, BTreeSet<Symbol>> = BTreeMap::new();
    for rule in &model.rules {
        for action in &rule.rhs {
            if action.kind == ActionKind::Request {
                let entry = out.entry(action.ctype.clone()).or_default();
                for (slot, _) in &action.svp {
                    entry.insert(slot.clone());
                }
            }
        }
    }
    out
}

/// Enumerates ground instantiations of an unrefuted overlap over the
/// model's store: every forced chunk is either matched against a
/// compatible chunk of the initial store or added fresh, with free values
/// in request-keyed slots kept anonymous and the rest ranging over the
/// model's value menu. Returns the instances and whether the cap was hit.
pub fn enumerate_groundings(
    analysis: &OverlapAnalysis,
    model: &ActrModel,
    universe: &[Symbol],
    cap: usize,
) -> (Vec<ChrState>, bool) {
    let sig = model.sig();
    let initial: Store = model
        .initial
        .store
        .chunks()
        .map(|c| {
            (
                c.id.clone(),
                ChunkTerm {
                    id: c.id.clone(),
                    ctype: c.ctype.clone(),
                    svp: c.values.clone(),
                },
            )
        })
        .collect();
    let key_slots = request_key_slots(model);

    // the value menu: store identifiers plus rule constants
    let mut menu: BTreeSet<Symbol> = initial.keys().cloned().collect();
    for rule in &model.rules {
        for t in &rule.lhs {
            for (_, v) in &t.svp {
                if let crate::actr::ActrValue::Const(c) = v {
                    menu.insert(c.clone());
                }
            }
        }
        for a in &rule.rhs {
            for (_, v) in &a.svp {
                if let crate::actr::ActrValue::Const(c) = v {
                    menu.insert(c.clone());
                }
            }
        }
    }
    // anonymous constants: universe constants that never occur in the
    // store or rules, so they cannot collide with real values
    let loaded: BTreeSet<Symbol> = menu
        .iter()
        .cloned()
        .chain(initial.values().flat_map(|c| c.svp.values().cloned()))
        .collect();
    let mut anon_pool: Vec<Symbol> = universe
        .iter()
        .filter(|c| !loaded.contains(*c) && !initial.contains_key(*c))
        .cloned()
        .collect();
    // padding constants first: they read as the anonymous values they are
    let model_constants = model.constants();
    anon_pool.sort_by_key(|c| (model_constants.contains(c), c.clone()));
    let menu: Vec<Symbol> = menu.into_iter().collect();

    let store_chunks: Vec<ChunkTerm> = initial.values().cloned().collect();
    let mut instances: Vec<ChrState> = Vec::new();
    let mut capped = false;
    let mut seen: BTreeSet<String> = BTreeSet::new();

    // depth-first over forced-chunk candidates; `anon_from` marks how far
    // into the anonymous pool this branch has allocated
    let mut stack: Vec<(usize, Substitution, Vec<ChunkTerm>, usize)> =
        alloc::vec![(0, analysis.subst.clone(), Vec::new(), 0)];
    while let Some((idx, subst, added, anon_from)) = stack.pop() {
        if instances.len() >= cap {
            capped = true;
            break;
        }
        if idx == analysis.forced.len() {
            if let Some(state) = build_instance(
                analysis,
                model,
                &sig,
                &initial,
                &added,
                &subst,
                &anon_pool[anon_from.min(anon_pool.len())..],
            ) {
                let key = state.dump();
                if seen.insert(key) {
                    instances.push(state);
                }
            }
            continue;
        }
        let fc = &analysis.forced[idx];
        // match against each compatible store chunk
        for sc in &store_chunks {
            let mut s = subst.clone();
            if unify_forced_with(&mut s, fc, sc) {
                stack.push((idx + 1, s, added.clone(), anon_from));
            }
        }
        // or add the chunk fresh, enumerating unkeyed free values
        let (variants, consumed) = fresh_additions(
            fc,
            &subst,
            &key_slots,
            &menu,
            &anon_pool[anon_from.min(anon_pool.len())..],
        );
        for (s, fresh) in variants {
            let mut added = added.clone();
            added.push(fresh);
            stack.push((idx + 1, s, added, anon_from + consumed));
        }
    }
    instances.sort_by_key(ChrState::dump);
    (instances, capped)
}

fn unify_forced_with(subst: &mut Substitution, fc: &ForcedChunk, chunk: &ChunkTerm) -> bool {
    if fc.ctype != chunk.ctype {
        return false;
    }
    if unify(
        subst,
        &fc.id,
        &Term::Const(chunk.id.clone()),
        VarPolicy::TwoWay { prefer: &|_| true },
    )
    .is_err()
    {
        return false;
    }
    for (slot, v) in &fc.svp {
        let Some(actual) = chunk.svp.get(slot) else {
            return false;
        };
        if unify(
            subst,
            v,
            &Term::Const(actual.clone()),
            VarPolicy::TwoWay { prefer: &|_| true },
        )
        .is_err()
        {
            return false;
        }
    }
    true
}

/// Fresh-added variants of a forced chunk: the identifier and all
/// request-keyed free slots take anonymous constants, every other free
/// slot ranges over the value menu plus one anonymous constant. Returns
/// the variants and how many pool constants this chunk consumed.
fn fresh_additions(
    fc: &ForcedChunk,
    subst: &Substitution,
    key_slots: &BTreeMap<Symbol, BTreeSet<Symbol>>,
    menu: &[Symbol],
    anon_pool: &[Symbol],
) -> (Vec<(Substitution, ChunkTerm)>, usize) {
    let keyed = key_slots.get(&fc.ctype);
    let mut anon = anon_pool.iter();
    let mut consumed = 0usize;
    let mut base = subst.clone();

    // identifier
    let id = match base.apply(&fc.id) {
        Term::Const(c) => c,
        Term::Var(v) => {
            let Some(c) = anon.next() else {
                return (Vec::new(), consumed);
            };
            consumed += 1;
            base.bind(&v, &Term::Const(c.clone())).ok();
            c.clone()
        }
        _ => return (Vec::new(), consumed),
    };

    // bind keyed free slots to anonymous constants first
    let mut menu_vars: Vec<Symbol> = Vec::new();
    for (slot, v) in &fc.svp {
        if let Term::Var(name) = base.apply(v) {
            let is_keyed = keyed.map(|ks| ks.contains(slot)).unwrap_or(false);
            if is_keyed {
                let Some(c) = anon.next() else {
                    return (Vec::new(), consumed);
                };
                consumed += 1;
                base.bind(&name, &Term::Const(c.clone())).ok();
            } else if !menu_vars.contains(&name) {
                menu_vars.push(name);
            }
        }
    }

    // enumerate menu assignments for the remaining free values
    let mut menu_options: Vec<Symbol> = menu.to_owned();
    if let Some(c) = anon.next() {
        consumed += 1;
        menu_options.push(c.clone());
    }
    let mut assignments: Vec<Substitution> = alloc::vec![base];
    for var in &menu_vars {
        let mut next = Vec::new();
        for s in &assignments {
            for value in &menu_options {
                let mut s2 = s.clone();
                if s2.bind(var, &Term::Const(value.clone())).is_ok() {
                    next.push(s2);
                }
            }
        }
        assignments = next;
    }

    let mut out = Vec::new();
    for s in assignments {
        let mut svp = BTreeMap::new();
        let mut ok = true;
        for (slot, v) in &fc.svp {
            match s.apply(v) {
                Term::Const(c) => {
                    svp.insert(slot.clone(), c);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push((
                s,
                ChunkTerm {
                    id: id.clone(),
                    ctype: fc.ctype.clone(),
                    svp,
                },
            ));
        }
    }
    (out, consumed)
}

#[allow(clippy::too_many_arguments)]
fn build_instance(
    analysis: &OverlapAnalysis,
    model: &ActrModel,
    sig: &ModelSig,
    initial: &Store,
    added: &[ChunkTerm],
    subst: &Substitution,
    anon_pool: &[Symbol],
) -> Option<ChrState> {
    let mut store = initial.clone();
    for chunk in added {
        match store.get(&chunk.id) {
            None => {
                store.insert(chunk.id.clone(), chunk.clone());
            }
            Some(existing) if existing == chunk => {}
            Some(_) => return None, // identifier already taken differently
        }
    }
    // buffers: instantiate contents; untested buffers are parked on fresh
    // nil chunks (their contents cannot influence either rule)
    let mut anon = anon_pool
        .iter()
        .filter(|c| !store.contains_key(*c))
        .cloned()
        .collect::<Vec<_>>()
        .into_iter();
    let mut gamma: BTreeMap<Symbol, (Symbol, Delay)> = BTreeMap::new();
    for b in &model.buffers {
        let (id_term, delay_term) = analysis
            .buffer_contents
            .get(b)
            .cloned()
            .unwrap_or((Term::Var(format!("_missing_{b}")), Term::Num(Delay::zero())));
        let id = match subst.apply(&id_term) {
            Term::Const(c) => c,
            Term::Var(_) => {
                let c = anon.next()?;
                store.insert(
                    c.clone(),
                    ChunkTerm {
                        id: c.clone(),
                        ctype: NIL_TYPE.to_owned(),
                        svp: BTreeMap::new(),
                    },
                );
                c
            }
            _ => return None,
        };
        let delay = match subst.apply(&delay_term) {
            Term::Num(d) => d,
            Term::Var(_) => Delay::zero(),
            _ => return None,
        };
        gamma.insert(b.clone(), (id, delay));
    }
    // close dangling values with nil chunks
    let mut dangling: BTreeSet<Symbol> = BTreeSet::new();
    for chunk in store.values() {
        for v in chunk.svp.values() {
            if !store.contains_key(v) {
                dangling.insert(v.clone());
            }
        }
    }
    for (id, _) in gamma.values() {
        if !store.contains_key(id) {
            dangling.insert(id.clone());
        }
    }
    for id in dangling {
        store.insert(
            id.clone(),
            ChunkTerm {
                id,
                ctype: NIL_TYPE.to_owned(),
                svp: BTreeMap::new(),
            },
        );
    }

    let mut goal = alloc::vec![Constraint::delta(store_to_term(&store))];
    for (b, (id, delay)) in &gamma {
        goal.push(Constraint::gamma(
            Term::Const(b.clone()),
            Term::Const(id.clone()),
            Term::Num(*delay),
        ));
    }
    let state = chr::normalize(&ChrState::new(goal, analysis.facts.clone(), BTreeSet::new()));
    if invariants::check_a(&state, sig).holds() {
        Some(state)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// The analyzer
// ---------------------------------------------------------------------------

/// Runs the whole confluence analysis on a validated model in set normal
/// form: translate, overlap, prune by invariant satisfiability,
/// instantiate, test joinability, aggregate.
pub fn check_confluence(model: &ActrModel, opts: &CheckOptions) -> ConfluenceReport {
    let sig = model.sig();
    let program: Vec<ChrRule> = model
        .rules
        .iter()
        .map(|r| translate::translate_rule(r, &model.buffers))
        .collect();
    let universe = invariants::universe(&model.constants(), opts.universe_padding);
    let overlaps = compute_overlaps(&program);

    let mut reports: Vec<OverlapReport> = Vec::new();
    for overlap in overlaps {
        let trivial_symmetric =
            overlap.full_head && overlap.rule_a == overlap.rule_b && overlap.paired_a == overlap.paired_b;
        if let Some(dup) = overlap.duplicate_of {
            // mirror of an earlier overlap: inherit its verdict
            let inherited = reports[dup].clone();
            reports.push(OverlapReport {
                overlap,
                pruned: inherited.pruned,
                trivial_symmetric,
                groundings_tested: 0,
                groundings_capped: false,
                join: inherited.join,
            });
            continue;
        }
        let analysis = analyze_overlap(&overlap.state, &sig);
        if analysis.refuted() {
            reports.push(OverlapReport {
                overlap,
                pruned: Some(PruneReason::Violations(analysis.refutations.clone())),
                trivial_symmetric,
                groundings_tested: 0,
                groundings_capped: false,
                join: None,
            });
            continue;
        }
        if invariants::witness_state(&analysis, &sig, &universe).is_none() {
            reports.push(OverlapReport {
                overlap,
                pruned: Some(PruneReason::NoGrounding(format!(
                    "no grounding over the universe of {} constants satisfies the invariant",
                    universe.len()
                ))),
                trivial_symmetric,
                groundings_tested: 0,
                groundings_capped: false,
                join: None,
            });
            continue;
        }
        let (instances, capped) =
            enumerate_groundings(&analysis, model, &universe, opts.grounding_cap);
        // satisfiable but not instantiable within the family: nothing was
        // tested, so the honest verdict is unknown, not joinable
        let mut aggregated = JoinVerdict {
            status: if instances.is_empty() {
                JoinStatus::Unknown
            } else {
                JoinStatus::Joinable
            },
            meeting_state: None,
            witness: None,
            steps_used: 0,
        };
        'instances: for instance in &instances {
            for pair in instantiated_pairs(&overlap, instance) {
                let verdict = joinable(&pair, &program, opts.max_steps);
                aggregated.steps_used = aggregated.steps_used.max(verdict.steps_used);
                match verdict.status {
                    JoinStatus::Joinable => {
                        if aggregated.meeting_state.is_none() {
                            aggregated.meeting_state = verdict.meeting_state;
                        }
                    }
                    JoinStatus::NotJoinable => {
                        aggregated.status = JoinStatus::NotJoinable;
                        aggregated.witness = verdict.witness.map(|w| JoinWitness {
                            start: Some(instance.clone()),
                            left: Derivation {
                                rules: core::iter::once(overlap.rule_a.clone())
                                    .chain(w.left.rules)
                                    .collect(),
                                terminal: w.left.terminal,
                            },
                            right: Derivation {
                                rules: core::iter::once(overlap.rule_b.clone())
                                    .chain(w.right.rules)
                                    .collect(),
                                terminal: w.right.terminal,
                            },
                        });
                        aggregated.meeting_state = None;
                        break 'instances;
                    }
                    JoinStatus::Unknown => {
                        if aggregated.status == JoinStatus::Joinable {
                            aggregated.status = JoinStatus::Unknown;
                            aggregated.meeting_state = None;
                        }
                    }
                }
            }
        }
        reports.push(OverlapReport {
            overlap,
            pruned: None,
            trivial_symmetric,
            groundings_tested: instances.len(),
            groundings_capped: capped,
            join: Some(aggregated),
        });
    }

    let mut verdict = Verdict::Confluent;
    for r in &reports {
        if let Some(j) = &r.join {
            match j.status {
                JoinStatus::NotJoinable => {
                    verdict = Verdict::NotConfluent;
                    break;
                }
                JoinStatus::Unknown => verdict = Verdict::Unknown,
                JoinStatus::Joinable => {}
            }
        }
    }

    let termination_note = format!(
        "termination is assumed, not checked: the verdict applies to terminating models only; \
         joinability searched breadth-first within {} expansions; overlaps instantiated over the \
         model store with a universe of {} constants ({} padding), at most {} groundings per overlap",
        opts.max_steps,
        universe.len(),
        opts.universe_padding,
        opts.grounding_cap
    );

    ConfluenceReport {
        verdict,
        overlaps: reports,
        termination_note,
        universe,
    }
}

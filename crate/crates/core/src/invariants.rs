//! The decidable state invariant characterizing translations of valid
//! ACT-R states, split into five sub-invariants:
//!
//! - A1: exactly one ground `delta(d)` whose elements are well-formed
//!   chunk terms, total over their type's slots, with values among the
//!   chunk identifiers of `d`;
//! - A2: exactly one `gamma(b, c, e)` per declared buffer, with `c` a
//!   chunk identifier of the store and `e` a non-negative number;
//! - A3: chunk identifiers are unique within the store;
//! - A4: slot-value pairs are functional;
//! - A5: the goal holds only `delta/1` and `gamma/3`, the built-in store
//!   only equality and the declared architecture facts, and the state is
//!   ground after normalization.
//!
//! States satisfying the conjunction reconstruct to an ACT-R state and
//! back. Overlap states, which are not ground, are handled by a
//! satisfiability check: structural violations that no grounding can
//! repair refute immediately, otherwise a witness grounding over a
//! finite constant universe is constructed.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::actr::{ActrState, Chunk, ChunkStore, Fact, ModelSig};
use crate::chr::{self, ChrState, Constraint};
use crate::term::{unify, Delay, Substitution, Symbol, Term, VarPolicy};
use crate::translate::{self, ChunkTerm, NIL_TYPE};

/// Identifier of one sub-invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SubInvariant {
    A1,
    A2,
    A3,
    A4,
    A5,
}

impl fmt::Display for SubInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubInvariant::A1 => write!(f, "A1"),
            SubInvariant::A2 => write!(f, "A2"),
            SubInvariant::A3 => write!(f, "A3"),
            SubInvariant::A4 => write!(f, "A4"),
            SubInvariant::A5 => write!(f, "A5"),
        }
    }
}

/// Outcome of an invariant check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantVerdict {
    pub violations: Vec<(SubInvariant, String)>,
}

impl InvariantVerdict {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    fn ok() -> Self {
        InvariantVerdict { violations: Vec::new() }
    }

    fn merge(mut self, other: InvariantVerdict) -> Self {
        self.violations.extend(other.violations);
        self
    }
}

fn violation(which: SubInvariant, msg: String) -> InvariantVerdict {
    InvariantVerdict {
        violations: alloc::vec![(which, msg)],
    }
}

fn deltas(state: &ChrState) -> Vec<&Constraint> {
    state.goal.iter().filter(|c| c.functor == chr::DELTA).collect()
}

fn gammas(state: &ChrState) -> Vec<&Constraint> {
    state.goal.iter().filter(|c| c.functor == chr::GAMMA).collect()
}

fn store_ids(state: &ChrState) -> BTreeSet<Symbol> {
    let mut ids = BTreeSet::new();
    for d in deltas(state) {
        if let Some(Term::Set(items)) = d.args.first() {
            for item in items {
                if let Term::App(f, args) = item {
                    if f == "chunk" && !args.is_empty() {
                        if let Term::Const(id) = &args[0] {
                            ids.insert(id.clone());
                        }
                    }
                }
            }
        }
    }
    ids
}

/// A1: unique, ground, well-formed chunk store.
pub fn check_a1(state: &ChrState, sig: &ModelSig) -> InvariantVerdict {
    let state = chr::normalize(state);
    let ds = deltas(&state);
    if ds.len() != 1 {
        return violation(
            SubInvariant::A1,
            format!("expected exactly one delta constraint, found {}", ds.len()),
        );
    }
    let d = ds[0];
    if d.args.len() != 1 {
        return violation(SubInvariant::A1, "malformed delta constraint".to_owned());
    }
    let Term::Set(items) = &d.args[0] else {
        return violation(
            SubInvariant::A1,
            format!("delta argument {} is not a ground set", d.args[0]),
        );
    };
    let ids = store_ids(&state);
    let mut verdict = InvariantVerdict::ok();
    for item in items {
        // lenient shape check: duplicate slot pairs are A4's concern
        let Some((id, ctype, pairs)) = chunk_shape(item) else {
            verdict = verdict.merge(violation(
                SubInvariant::A1,
                format!("store element {item} is not a well-formed ground chunk term"),
            ));
            continue;
        };
        let Some(slots) = sig.types.get(&ctype) else {
            verdict = verdict.merge(violation(
                SubInvariant::A1,
                format!("chunk {id} has undeclared type {ctype}"),
            ));
            continue;
        };
        let chunk_slots: BTreeSet<Symbol> = pairs.iter().map(|(s, _)| s.clone()).collect();
        if chunk_slots != *slots {
            verdict = verdict.merge(violation(
                SubInvariant::A1,
                format!("chunk {id} does not fill exactly the slots of type {ctype}"),
            ));
        }
        for (slot, value) in &pairs {
            if !ids.contains(value) {
                verdict = verdict.merge(violation(
                    SubInvariant::A1,
                    format!(
                        "value {value} in slot {slot} of chunk {id} is not a chunk identifier of the store"
                    ),
                ));
            }
        }
    }
    verdict
}

type ChunkShape = (Symbol, Symbol, Vec<(Symbol, Symbol)>);

/// Ground `chunk(id, type, {(slot, value), ...})` shape, tolerating
/// duplicate slots.
fn chunk_shape(t: &Term) -> Option<ChunkShape> {
    let Term::App(f, args) = t else { return None };
    if f != "chunk" || args.len() != 3 {
        return None;
    }
    let (Term::Const(id), Term::Const(ctype), Term::Set(pairs)) = (&args[0], &args[1], &args[2])
    else {
        return None;
    };
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let Term::Tuple(kv) = p else { return None };
        if kv.len() != 2 {
            return None;
        }
        let (Term::Const(s), Term::Const(v)) = (&kv[0], &kv[1]) else {
            return None;
        };
        out.push((s.clone(), v.clone()));
    }
    Some((id.clone(), ctype.clone(), out))
}

/// A2: exactly one gamma per declared buffer, pointing into the store.
pub fn check_a2(state: &ChrState, sig: &ModelSig) -> InvariantVerdict {
    let state = chr::normalize(state);
    let ids = store_ids(&state);
    let mut verdict = InvariantVerdict::ok();
    let mut per_buffer: BTreeMap<Symbol, usize> = BTreeMap::new();
    for g in gammas(&state) {
        if g.args.len() != 3 {
            verdict = verdict.merge(violation(SubInvariant::A2, "malformed gamma constraint".to_owned()));
            continue;
        }
        let Term::Const(buffer) = &g.args[0] else {
            verdict = verdict.merge(violation(
                SubInvariant::A2,
                format!("gamma buffer argument {} is not a constant", g.args[0]),
            ));
            continue;
        };
        if !sig.buffers.contains(buffer) {
            verdict = verdict.merge(violation(
                SubInvariant::A2,
                format!("gamma constraint for undeclared buffer {buffer}"),
            ));
            continue;
        }
        *per_buffer.entry(buffer.clone()).or_insert(0) += 1;
        match &g.args[1] {
            Term::Const(id) if ids.contains(id) => {}
            other => {
                verdict = verdict.merge(violation(
                    SubInvariant::A2,
                    format!("buffer {buffer} holds {other}, which is not a chunk identifier of the store"),
                ));
            }
        }
        match &g.args[2] {
            Term::Num(_) => {}
            other => {
                verdict = verdict.merge(violation(
                    SubInvariant::A2,
                    format!("buffer {buffer} has non-numeric delay {other}"),
                ));
            }
        }
    }
    for b in &sig.buffers {
        match per_buffer.get(b).copied().unwrap_or(0) {
            1 => {}
            0 => {
                verdict = verdict.merge(violation(
                    SubInvariant::A2,
                    format!("buffer {b} has no gamma constraint"),
                ));
            }
            n => {
                verdict = verdict.merge(violation(
                    SubInvariant::A2,
                    format!("buffer {b} has {n} gamma constraints"),
                ));
            }
        }
    }
    verdict
}

/// A3: no two chunk terms share an identifier.
pub fn check_a3(state: &ChrState) -> InvariantVerdict {
    let state = chr::normalize(state);
    let mut verdict = InvariantVerdict::ok();
    for d in deltas(&state) {
        let Some(Term::Set(items)) = d.args.first() else {
            continue;
        };
        let mut seen: BTreeMap<Symbol, &Term> = BTreeMap::new();
        for item in items {
            let Term::App(f, args) = item else { continue };
            if f != "chunk" || args.is_empty() {
                continue;
            }
            let Term::Const(id) = &args[0] else { continue };
            if let Some(prev) = seen.get(id) {
                if *prev != item {
                    verdict = verdict.merge(violation(
                        SubInvariant::A3,
                        format!("chunk identifier {id} names two different chunk terms"),
                    ));
                }
            } else {
                seen.insert(id.clone(), item);
            }
        }
    }
    verdict
}

/// A4: slot-value pairs are functional within each chunk term.
pub fn check_a4(state: &ChrState) -> InvariantVerdict {
    let state = chr::normalize(state);
    let mut verdict = InvariantVerdict::ok();
    for d in deltas(&state) {
        let Some(Term::Set(items)) = d.args.first() else {
            continue;
        };
        for item in items {
            let Term::App(f, args) = item else { continue };
            if f != "chunk" || args.len() != 3 {
                continue;
            }
            let Term::Set(pairs) = &args[2] else { continue };
            let mut seen: BTreeMap<Symbol, &Term> = BTreeMap::new();
            for p in pairs {
                let Term::Tuple(kv) = p else { continue };
                if kv.len() != 2 {
                    continue;
                }
                let Term::Const(slot) = &kv[0] else { continue };
                if let Some(prev) = seen.get(slot) {
                    if **prev != kv[1] {
                        verdict = verdict.merge(violation(
                            SubInvariant::A4,
                            format!("chunk term {item} assigns two values to slot {slot}"),
                        ));
                    }
                } else {
                    seen.insert(slot.clone(), &kv[1]);
                }
            }
        }
    }
    verdict
}

/// A5: only delta/gamma in the goal, only equality and declared facts in
/// the built-ins, and the state is ground after normalization.
pub fn check_a5(state: &ChrState, sig: &ModelSig) -> InvariantVerdict {
    let state = chr::normalize(state);
    let mut verdict = InvariantVerdict::ok();
    for c in &state.goal {
        let ok = (c.functor == chr::DELTA && c.args.len() == 1)
            || (c.functor == chr::GAMMA && c.args.len() == 3);
        if !ok {
            verdict = verdict.merge(violation(
                SubInvariant::A5,
                format!("goal constraint {c} is neither delta/1 nor gamma/3"),
            ));
        }
    }
    for c in &state.builtins {
        if c.is_eq() {
            continue;
        }
        if sig.fact_arities.get(&c.functor) != Some(&c.args.len()) {
            verdict = verdict.merge(violation(
                SubInvariant::A5,
                format!("built-in constraint {c} is not an allowed architecture fact"),
            ));
            continue;
        }
        if !c.is_ground() {
            verdict = verdict.merge(violation(
                SubInvariant::A5,
                format!("architecture fact {c} is not ground"),
            ));
        }
    }
    if !state.is_ground() {
        let vars = state.vars();
        verdict = verdict.merge(violation(
            SubInvariant::A5,
            format!(
                "state is not ground after normalization (free: {})",
                vars.into_iter().collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    verdict
}

/// The full invariant: conjunction of A1 through A5.
pub fn check_a(state: &ChrState, sig: &ModelSig) -> InvariantVerdict {
    check_a1(state, sig)
        .merge(check_a2(state, sig))
        .merge(check_a3(state))
        .merge(check_a4(state))
        .merge(check_a5(state, sig))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconstructError {
    pub verdict: InvariantVerdict,
}

impl fmt::Display for ReconstructError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state does not satisfy the ACT-R invariant:")?;
        for (which, msg) in &self.verdict.violations {
            write!(f, " [{which}] {msg};")?;
        }
        Ok(())
    }
}

impl core::error::Error for ReconstructError {}

/// Rebuilds the ACT-R state a translated CHR state came from: the store
/// from the delta constraint, the cognitive state from the gammas, the
/// additional information from the remaining built-ins.
pub fn reconstruct_actr(state: &ChrState, sig: &ModelSig) -> Result<ActrState, ReconstructError> {
    let verdict = check_a(state, sig);
    if !verdict.holds() {
        return Err(ReconstructError { verdict });
    }
    let normalized = chr::normalize(state);
    let mut store = ChunkStore::new();
    for d in deltas(&normalized) {
        if let Some(Term::Set(items)) = d.args.first() {
            for item in items {
                let chunk = ChunkTerm::from_term(item).expect("checked by A1");
                store.replace(Chunk {
                    id: chunk.id,
                    ctype: chunk.ctype,
                    values: chunk.svp,
                });
            }
        }
    }
    let mut gamma = BTreeMap::new();
    for g in gammas(&normalized) {
        let (Term::Const(buffer), Term::Const(id), Term::Num(delay)) =
            (&g.args[0], &g.args[1], &g.args[2])
        else {
            unreachable!("checked by A2");
        };
        gamma.insert(buffer.clone(), (id.clone(), *delay));
    }
    let mut upsilon = Vec::new();
    for c in &normalized.builtins {
        if c.is_eq() {
            continue;
        }
        upsilon.push(Fact {
            functor: c.functor.clone(),
            args: c
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(s) => s.clone(),
                    other => format!("{other}"),
                })
                .collect(),
        });
    }
    upsilon.sort();
    Ok(ActrState {
        store,
        gamma,
        upsilon,
    })
}

// ---------------------------------------------------------------------------
// Invariant satisfiability on non-ground overlap states
// ---------------------------------------------------------------------------

/// A chunk the overlap's membership constraints force into the store.
/// Identifier and values may still be variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForcedChunk {
    pub id: Term,
    pub ctype: Symbol,
    pub svp: BTreeMap<Symbol, Term>,
}

impl ForcedChunk {
    pub fn to_term(&self) -> Term {
        Term::app(
            "chunk",
            [
                self.id.clone(),
                Term::Const(self.ctype.clone()),
                Term::Set(
                    self.svp
                        .iter()
                        .map(|(s, v)| Term::pair(Term::Const(s.clone()), v.clone()))
                        .collect(),
                ),
            ],
        )
    }
}

/// Result of analyzing a non-ground overlap state against the invariant.
#[derive(Clone, Debug)]
pub struct OverlapAnalysis {
    /// Violations that hold under every grounding.
    pub refutations: Vec<(SubInvariant, String)>,
    /// Chunks forced into the store, already unified per identifier.
    pub forced: Vec<ForcedChunk>,
    /// Buffer contents: identifier term and delay term per buffer.
    pub buffer_contents: BTreeMap<Symbol, (Term, Term)>,
    /// Bindings accumulated while unifying same-identifier chunks.
    pub subst: Substitution,
    /// Ground facts present in the built-in store.
    pub facts: Vec<Constraint>,
}

impl OverlapAnalysis {
    pub fn refuted(&self) -> bool {
        !self.refutations.is_empty()
    }
}

/// Structural analysis of an overlap state: refutes invariant violations
/// that no grounding can repair (extra deltas, duplicate gammas, foreign
/// constraints) and computes the chunks forced by the membership guards,
/// unifying forced chunks that share an identifier term.
pub fn analyze_overlap(state: &ChrState, sig: &ModelSig) -> OverlapAnalysis {
    let normalized = chr::normalize(state);
    let mut refutations: Vec<(SubInvariant, String)> = Vec::new();
    let mut subst = Substitution::new();
    let mut facts = Vec::new();

    if normalized.is_failed() {
        return OverlapAnalysis {
            refutations: alloc::vec![(
                SubInvariant::A5,
                "built-in store is unsatisfiable".to_owned()
            )],
            forced: Vec::new(),
            buffer_contents: BTreeMap::new(),
            subst,
            facts,
        };
    }

    // structural goal shape: one delta, one gamma per declared buffer
    let ds = deltas(&normalized);
    if ds.len() != 1 {
        refutations.push((
            SubInvariant::A1,
            format!("{} delta constraints in the goal", ds.len()),
        ));
    }
    let mut per_buffer: BTreeMap<Symbol, usize> = BTreeMap::new();
    for g in gammas(&normalized) {
        match g.args.first() {
            Some(Term::Const(b)) if sig.buffers.contains(b) => {
                *per_buffer.entry(b.clone()).or_insert(0) += 1;
            }
            Some(other) => refutations.push((
                SubInvariant::A2,
                format!("gamma constraint for {other} which is not a declared buffer"),
            )),
            None => refutations.push((SubInvariant::A2, "malformed gamma".to_owned())),
        }
    }
    for (b, n) in &per_buffer {
        if *n > 1 {
            refutations.push((
                SubInvariant::A2,
                format!("buffer {b} has {n} gamma constraints"),
            ));
        }
    }
    for b in &sig.buffers {
        if !per_buffer.contains_key(b) {
            refutations.push((SubInvariant::A2, format!("buffer {b} has no gamma constraint")));
        }
    }
    for c in &normalized.goal {
        let ok = c.functor == chr::DELTA || c.functor == chr::GAMMA;
        if !ok {
            refutations.push((
                SubInvariant::A5,
                format!("goal constraint {c} is neither delta nor gamma"),
            ));
        }
    }

    // forced chunks from the membership guards; membership may target any
    // delta argument (states with several deltas are already refuted)
    let delta_args: Vec<Term> = ds.iter().filter_map(|d| d.args.first().cloned()).collect();
    let mut forced: Vec<ForcedChunk> = Vec::new();
    for c in &normalized.builtins {
        match c.functor.as_str() {
            chr::IN if c.args.len() == 2 => {
                if !delta_args.is_empty() && !delta_args.contains(&c.args[1]) {
                    refutations.push((
                        SubInvariant::A5,
                        format!("membership constraint targets {} instead of the store", c.args[1]),
                    ));
                    continue;
                }
                match parse_forced_chunk(&c.args[0]) {
                    Some(fc) => forced.push(fc),
                    None => refutations.push((
                        SubInvariant::A1,
                        format!("membership element {} is not a chunk pattern", c.args[0]),
                    )),
                }
            }
            chr::EQ => {} // already folded by normalize (global bindings)
            f if sig.fact_arities.get(f) == Some(&c.args.len()) => facts.push(c.clone()),
            chr::TOP => {}
            _ => refutations.push((
                SubInvariant::A5,
                format!("built-in constraint {c} is outside the allowed store"),
            )),
        }
    }

    // unify forced chunks sharing an identifier term (unique identifiers
    // force equal chunk terms under every grounding)
    let forced = match unify_forced(forced, &mut subst) {
        Ok(forced) => forced,
        Err(msg) => {
            refutations.push((SubInvariant::A3, msg));
            Vec::new()
        }
    };

    let mut buffer_contents = BTreeMap::new();
    for g in gammas(&normalized) {
        if let (Some(Term::Const(b)), Some(id), Some(delay)) =
            (g.args.first(), g.args.get(1), g.args.get(2))
        {
            buffer_contents.insert(b.clone(), (subst.apply(id), subst.apply(delay)));
        }
    }

    OverlapAnalysis {
        refutations,
        forced,
        buffer_contents,
        subst,
        facts,
    }
}

fn parse_forced_chunk(t: &Term) -> Option<ForcedChunk> {
    let Term::App(f, args) = t else { return None };
    if f != "chunk" || args.len() != 3 {
        return None;
    }
    let Term::Const(ctype) = &args[1] else { return None };
    let Term::Set(pairs) = &args[2] else { return None };
    let mut svp = BTreeMap::new();
    for p in pairs {
        let Term::Tuple(kv) = p else { return None };
        if kv.len() != 2 {
            return None;
        }
        let Term::Const(slot) = &kv[0] else { return None };
        svp.insert(slot.clone(), kv[1].clone());
    }
    Some(ForcedChunk {
        id: args[0].clone(),
        ctype: ctype.clone(),
        svp,
    })
}

fn unify_forced(mut forced: Vec<ForcedChunk>, subst: &mut Substitution) -> Result<Vec<ForcedChunk>, String> {
    loop {
        for fc in &mut forced {
            fc.id = subst.apply(&fc.id);
            for v in fc.svp.values_mut() {
                *v = subst.apply(v);
            }
        }
        let mut merged: Vec<ForcedChunk> = Vec::new();
        let mut changed = false;
        'outer: for fc in forced.drain(..) {
            for existing in &mut merged {
                if existing.id == fc.id {
                    if existing.ctype != fc.ctype {
                        return Err(format!(
                            "identifier {} would need both type {} and type {}",
                            fc.id, existing.ctype, fc.ctype
                        ));
                    }
                    for (slot, v) in &fc.svp {
                        match existing.svp.get(slot) {
                            None => {
                                existing.svp.insert(slot.clone(), v.clone());
                                changed = true;
                            }
                            Some(prev) => {
                                let prev = prev.clone();
                                if unify(subst, &prev, v, VarPolicy::TwoWay { prefer: &|_| true })
                                    .is_err()
                                {
                                    return Err(format!(
                                        "identifier {} would need slot {} to be both {} and {}",
                                        fc.id, slot, prev, v
                                    ));
                                }
                                if !subst.is_empty() {
                                    changed = true;
                                }
                            }
                        }
                    }
                    continue 'outer;
                }
            }
            merged.push(fc);
        }
        if !changed {
            return Ok(merged);
        }
        forced = merged;
    }
}

/// The grounding universe: all constants of the model plus a configurable
/// number of fresh padding constants.
pub fn universe(model_constants: &BTreeSet<Symbol>, padding: usize) -> Vec<Symbol> {
    let mut out: Vec<Symbol> = model_constants.iter().cloned().collect();
    let mut n = 1usize;
    let mut added = 0usize;
    while added < padding {
        let candidate = format!("fresh{n}");
        n += 1;
        if !model_constants.contains(&candidate) {
            out.push(candidate);
            added += 1;
        }
    }
    out
}

/// Decides whether some grounding of the overlap's variables over the
/// universe satisfies the invariant: structural refutations short-circuit
/// to false, otherwise a witness store is built by assigning distinct
/// unused constants to the free variables and closing dangling values
/// with nil chunks.
pub fn satisfiable_a(state: &ChrState, sig: &ModelSig, universe: &[Symbol]) -> bool {
    let analysis = analyze_overlap(state, sig);
    if analysis.refuted() {
        return false;
    }
    witness_state(&analysis, sig, universe).is_some()
}

/// Builds a concrete witness state from an unrefuted overlap analysis.
pub fn witness_state(
    analysis: &OverlapAnalysis,
    sig: &ModelSig,
    universe: &[Symbol],
) -> Option<ChrState> {
    // assign every remaining variable a distinct unused universe constant
    let mut used: BTreeSet<Symbol> = BTreeSet::new();
    for fc in &analysis.forced {
        if let Term::Const(c) = &fc.id {
            used.insert(c.clone());
        }
        for v in fc.svp.values() {
            if let Term::Const(c) = v {
                used.insert(c.clone());
            }
        }
    }
    let mut free: BTreeSet<Symbol> = BTreeSet::new();
    for fc in &analysis.forced {
        fc.id.collect_vars(&mut free);
        for v in fc.svp.values() {
            v.collect_vars(&mut free);
        }
    }
    for (id, _) in analysis.buffer_contents.values() {
        id.collect_vars(&mut free);
    }
    let mut assignment = Substitution::new();
    let mut pool = universe.iter().filter(|c| !used.contains(*c));
    for v in &free {
        let c = pool.next()?; // universe exhausted: no witness in bounds
        assignment.bind(v, &Term::Const(c.clone())).ok()?;
    }

    // ground the forced chunks and close the store
    let mut store: BTreeMap<Symbol, ChunkTerm> = BTreeMap::new();
    for fc in &analysis.forced {
        let Term::Const(id) = assignment.apply(&fc.id) else {
            return None;
        };
        let mut svp = BTreeMap::new();
        for (slot, v) in &fc.svp {
            let Term::Const(value) = assignment.apply(v) else {
                return None;
            };
            svp.insert(slot.clone(), value);
        }
        // totality over the type's slots: missing slots get fresh fillers
        if let Some(slots) = sig.types.get(&fc.ctype) {
            for slot in slots {
                if !svp.contains_key(slot) {
                    let c = pool.next()?;
                    svp.insert(slot.clone(), c.clone());
                }
            }
        }
        let chunk = ChunkTerm {
            id: id.clone(),
            ctype: fc.ctype.clone(),
            svp,
        };
        match store.get(&id) {
            None => {
                store.insert(id, chunk);
            }
            Some(existing) if *existing == chunk => {}
            Some(_) => return None,
        }
    }
    let mut gamma: BTreeMap<Symbol, (Symbol, Delay)> = BTreeMap::new();
    for (b, (id, delay)) in &analysis.buffer_contents {
        let Term::Const(id) = assignment.apply(id) else {
            return None;
        };
        let delay = match delay {
            Term::Num(d) => *d,
            Term::Var(_) => Delay::zero(),
            _ => return None,
        };
        gamma.insert(b.clone(), (id, delay));
    }
    // close: every referenced value and buffer target is a store chunk
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

    let mut goal = alloc::vec![Constraint::delta(translate::store_to_term(&store))];
    for (b, (id, delay)) in &gamma {
        goal.push(Constraint::gamma(
            Term::Const(b.clone()),
            Term::Const(id.clone()),
            Term::Num(*delay),
        ));
    }
    let witness = chr::normalize(&ChrState::new(goal, analysis.facts.clone(), BTreeSet::new()));
    if check_a(&witness, sig).holds() {
        Some(witness)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actr::ActrModel;
    use crate::translate::translate_state;

    fn counting() -> ActrModel {
        crate::gen::counting_model()
    }

    #[test]
    fn translated_state_satisfies_every_subinvariant() {
        let m = counting();
        let sig = m.sig();
        let st = translate_state(&m.initial);
        let verdict = check_a(&st, &sig);
        assert!(verdict.holds(), "violations: {:?}", verdict.violations);
    }

    #[test]
    fn two_deltas_violate_a1() {
        let m = counting();
        let sig = m.sig();
        let mut st = translate_state(&m.initial);
        let d = st.goal[0].clone();
        st.goal.push(d);
        let verdict = check_a1(&st, &sig);
        assert!(!verdict.holds());
        assert!(verdict.violations.iter().all(|(w, _)| *w == SubInvariant::A1));
    }

    #[test]
    fn duplicate_gamma_violates_a2() {
        let m = counting();
        let sig = m.sig();
        let mut st = translate_state(&m.initial);
        st.goal.push(Constraint::gamma(
            Term::cst("goal"),
            Term::cst("b0"),
            Term::Num(Delay::zero()),
        ));
        let verdict = check_a2(&st, &sig);
        assert!(verdict
            .violations
            .iter()
            .any(|(w, m)| *w == SubInvariant::A2 && m.contains("2 gamma")));
    }

    #[test]
    fn missing_gamma_violates_a2() {
        let m = counting();
        let sig = m.sig();
        let mut st = translate_state(&m.initial);
        st.goal.retain(|c| {
            !(c.functor == chr::GAMMA && c.args[0] == Term::cst("retrieval"))
        });
        let verdict = check_a2(&st, &sig);
        assert!(verdict
            .violations
            .iter()
            .any(|(w, m)| *w == SubInvariant::A2 && m.contains("no gamma")));
    }

    #[test]
    fn duplicate_identifier_violates_a3() {
        let m = counting();
        let sig = m.sig();
        let mut st = translate_state(&m.initial);
        // inject a second chunk term with identifier "a" but different svp
        if let Term::Set(items) = &mut st.goal[0].args[0] {
            items.insert(Term::app(
                "chunk",
                [
                    Term::cst("a"),
                    Term::cst("order"),
                    Term::set([
                        Term::pair(Term::cst("first"), Term::cst("3")),
                        Term::pair(Term::cst("second"), Term::cst("3")),
                    ]),
                ],
            ));
        }
        let verdict = check_a3(&st);
        assert!(!verdict.holds());
        assert_eq!(verdict.violations[0].0, SubInvariant::A3);
        let _ = sig;
    }

    #[test]
    fn duplicate_slot_pair_violates_a4() {
        let st = ChrState::new(
            alloc::vec![Constraint::delta(Term::set([Term::app(
                "chunk",
                [
                    Term::cst("x"),
                    Term::cst("order"),
                    Term::set([
                        Term::pair(Term::cst("first"), Term::cst("x")),
                        Term::pair(Term::cst("first"), Term::cst("y")),
                    ]),
                ],
            )]))],
            alloc::vec![],
            BTreeSet::new(),
        );
        let verdict = check_a4(&st);
        assert!(!verdict.holds());
        assert_eq!(verdict.violations[0].0, SubInvariant::A4);
    }

    #[test]
    fn foreign_constraint_violates_a5() {
        let m = counting();
        let sig = m.sig();
        let mut st = translate_state(&m.initial);
        st.goal.push(Constraint::new("foo", [Term::cst("x")]));
        let verdict = check_a5(&st, &sig);
        assert!(verdict.violations.iter().any(|(w, _)| *w == SubInvariant::A5));
        // non-ground gamma argument also violates groundness
        let mut st2 = translate_state(&m.initial);
        st2.goal.push(Constraint::gamma(
            Term::cst("extra"),
            Term::var("C"),
            Term::Num(Delay::zero()),
        ));
        assert!(!check_a5(&st2, &sig).holds());
    }

    #[test]
    fn reconstruct_round_trips_the_counting_state() {
        let m = counting();
        let sig = m.sig();
        let st = translate_state(&m.initial);
        let back = reconstruct_actr(&st, &sig).unwrap();
        assert_eq!(back.store, m.initial.store);
        assert_eq!(back.gamma, m.initial.gamma);
        assert!(chr::states_equivalent(&translate_state(&back), &st));
    }

    #[test]
    fn reconstruct_fails_on_invariant_violation() {
        let m = counting();
        let sig = m.sig();
        let mut st = translate_state(&m.initial);
        st.goal.retain(|c| {
            !(c.functor == chr::GAMMA && c.args[0] == Term::cst("goal"))
        });
        let err = reconstruct_actr(&st, &sig).unwrap_err();
        assert!(err.verdict.violations.iter().any(|(w, _)| *w == SubInvariant::A2));
    }

    #[test]
    fn reconstruct_keeps_opaque_facts() {
        let mut m = counting();
        m.fact_arities.insert("p".to_owned(), 1);
        m.initial.upsilon.push(Fact {
            functor: "p".to_owned(),
            args: alloc::vec!["a".to_owned()],
        });
        let sig = m.sig();
        let st = translate_state(&m.initial);
        let back = reconstruct_actr(&st, &sig).unwrap();
        assert_eq!(back.upsilon, m.initial.upsilon);
    }

    #[test]
    fn satisfiable_a_refutes_two_deltas() {
        let m = counting();
        let sig = m.sig();
        let st = ChrState::new(
            alloc::vec![
                Constraint::delta(Term::var("D")),
                Constraint::delta(Term::var("Dq")),
                Constraint::gamma(Term::cst("goal"), Term::var("C1"), Term::Num(Delay::zero())),
                Constraint::gamma(Term::cst("retrieval"), Term::var("C2"), Term::Num(Delay::zero())),
            ],
            alloc::vec![],
            BTreeSet::new(),
        );
        let uni = universe(&m.constants(), 2);
        assert!(!satisfiable_a(&st, &sig, &uni));
    }

    #[test]
    fn satisfiable_a_refutes_duplicate_gammas() {
        let m = counting();
        let sig = m.sig();
        let st = ChrState::new(
            alloc::vec![
                Constraint::delta(Term::var("D")),
                Constraint::gamma(Term::cst("goal"), Term::var("C"), Term::Num(Delay::zero())),
                Constraint::gamma(Term::cst("goal"), Term::var("Cq"), Term::Num(Delay::zero())),
                Constraint::gamma(Term::cst("retrieval"), Term::var("C2"), Term::Num(Delay::zero())),
            ],
            alloc::vec![],
            BTreeSet::new(),
        );
        let uni = universe(&m.constants(), 2);
        assert!(!satisfiable_a(&st, &sig, &uni));
    }

    #[test]
    fn forced_chunks_with_shared_id_unify() {
        // two membership constraints on the same identifier force X = X'
        let m = counting();
        let sig = m.sig();
        let st = ChrState::new(
            alloc::vec![
                Constraint::delta(Term::var("D")),
                Constraint::gamma(Term::cst("goal"), Term::var("C"), Term::Num(Delay::zero())),
                Constraint::gamma(Term::cst("retrieval"), Term::var("C2"), Term::Num(Delay::zero())),
            ],
            alloc::vec![
                Constraint::in_store(
                    Term::app(
                        "chunk",
                        [
                            Term::var("C"),
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
                            Term::var("C"),
                            Term::cst("g"),
                            Term::set([Term::pair(Term::cst("current"), Term::var("Xq"))]),
                        ],
                    ),
                    Term::var("D"),
                ),
            ],
            BTreeSet::from(["D".to_owned(), "C".to_owned(), "C2".to_owned()]),
        );
        let analysis = analyze_overlap(&st, &sig);
        assert!(!analysis.refuted());
        assert_eq!(analysis.forced.len(), 1);
        let uni = universe(&m.constants(), 4);
        assert!(satisfiable_a(&st, &sig, &uni));
    }
}

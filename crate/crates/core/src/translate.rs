//! Translation of ACT-R states and rules into CHR, together with the
//! executable semantics of the `action`, `merge` and `map` built-ins that
//! the translation delegates to the architecture.
//!
//! A state becomes one `delta(d)` constraint holding the whole chunk
//! store as a set of `chunk(id, type, svp)` terms, plus one
//! `gamma(buffer, id, delay)` constraint per buffer; additional
//! information goes to the built-in store unchanged. A rule in set
//! normal form becomes a simplification rule that consumes the delta and
//! all gammas, tests chunk membership in the guard, and rebuilds the
//! store through action/merge/map built-ins in the body.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::actr::{ActionKind, ActrRule, ActrState, ActrValue, Fact};
use crate::chr::{self, ChrRule, ChrState, Constraint, TheoryError};
use crate::term::{unify, Delay, Substitution, Symbol, Term, VarPolicy};

/// Reserved chunk type for empty buffers; has no slots.
pub const NIL_TYPE: &str = "nil";
/// Reserved identifier of the shared nil chunk.
pub const NIL_ID: &str = "nil0";

pub const MODIFY: &str = "modify";
pub const REQUEST: &str = "request";
pub const CLEAR: &str = "clear";

/// Ground relational rendering of one chunk: `chunk(id, type, svp)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChunkTerm {
    pub id: Symbol,
    pub ctype: Symbol,
    pub svp: BTreeMap<Symbol, Symbol>,
}

impl ChunkTerm {
    pub fn nil() -> ChunkTerm {
        ChunkTerm {
            id: NIL_ID.to_owned(),
            ctype: NIL_TYPE.to_owned(),
            svp: BTreeMap::new(),
        }
    }

    pub fn to_term(&self) -> Term {
        Term::app(
            "chunk",
            [
                Term::Const(self.id.clone()),
                Term::Const(self.ctype.clone()),
                Term::Set(
                    self.svp
                        .iter()
                        .map(|(s, v)| Term::pair(Term::Const(s.clone()), Term::Const(v.clone())))
                        .collect(),
                ),
            ],
        )
    }

    pub fn from_term(t: &Term) -> Option<ChunkTerm> {
        let Term::App(f, args) = t else { return None };
        if f != "chunk" || args.len() != 3 {
            return None;
        }
        let (Term::Const(id), Term::Const(ctype), Term::Set(pairs)) = (&args[0], &args[1], &args[2])
        else {
            return None;
        };
        let mut svp = BTreeMap::new();
        for p in pairs {
            let Term::Tuple(kv) = p else { return None };
            if kv.len() != 2 {
                return None;
            }
            let (Term::Const(s), Term::Const(v)) = (&kv[0], &kv[1]) else {
                return None;
            };
            if svp.insert(s.clone(), v.clone()).is_some() {
                return None; // functional dependency violated
            }
        }
        Some(ChunkTerm {
            id: id.clone(),
            ctype: ctype.clone(),
            svp,
        })
    }
}

/// A chunk store keyed by identifier. Identifier uniqueness holds by
/// construction; invalid stores only ever exist as raw terms.
pub type Store = BTreeMap<Symbol, ChunkTerm>;

pub fn store_to_term(store: &Store) -> Term {
    Term::Set(store.values().map(ChunkTerm::to_term).collect())
}

pub fn store_from_term(t: &Term) -> Option<Store> {
    let Term::Set(items) = t else { return None };
    let mut out = Store::new();
    for item in items {
        let c = ChunkTerm::from_term(item)?;
        if out.insert(c.id.clone(), c).is_some() {
            return None; // duplicate identifier
        }
    }
    Some(out)
}

/// A rule action with every argument ground, ready to execute.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActionSpec {
    pub kind: ActionKind,
    pub buffer: Symbol,
    pub ctype: Symbol,
    pub svp: BTreeMap<Symbol, Symbol>,
}

impl ActionSpec {
    pub fn to_term(&self) -> Term {
        let functor = match self.kind {
            ActionKind::Modify => MODIFY,
            ActionKind::Request => REQUEST,
            ActionKind::Clear => CLEAR,
        };
        Term::app(
            functor,
            [
                Term::Const(self.buffer.clone()),
                Term::Const(self.ctype.clone()),
                Term::Set(
                    self.svp
                        .iter()
                        .map(|(s, v)| Term::pair(Term::Const(s.clone()), Term::Const(v.clone())))
                        .collect(),
                ),
            ],
        )
    }

    pub fn from_term(t: &Term) -> Option<ActionSpec> {
        let Term::App(f, args) = t else { return None };
        let kind = match f.as_str() {
            MODIFY => ActionKind::Modify,
            REQUEST => ActionKind::Request,
            CLEAR => ActionKind::Clear,
            _ => return None,
        };
        if args.len() != 3 {
            return None;
        }
        let (Term::Const(buffer), Term::Const(ctype), Term::Set(pairs)) =
            (&args[0], &args[1], &args[2])
        else {
            return None;
        };
        let mut svp = BTreeMap::new();
        for p in pairs {
            let Term::Tuple(kv) = p else { return None };
            let (Term::Const(s), Term::Const(v)) = (&kv[0], &kv[1]) else {
                return None;
            };
            svp.insert(s.clone(), v.clone());
        }
        Some(ActionSpec {
            kind,
            buffer: buffer.clone(),
            ctype: ctype.clone(),
            svp,
        })
    }
}

/// One possible result of executing a single action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionOutcome {
    /// The action's own result store (singleton for requests and clears,
    /// the updated chunk for modifications).
    pub store: Vec<ChunkTerm>,
    /// Identifier of the chunk the buffer should hold, before merging.
    pub result_id: Symbol,
    pub delay: Delay,
}

/// Executes one action against a store and cognitive state. The result
/// set has more than one element exactly for ambiguous requests; a
/// request with no matching chunk yields the distinguished nil outcome.
pub fn exec_action(action: &ActionSpec, store: &Store, cog: &BTreeMap<Symbol, Symbol>) -> Vec<ActionOutcome> {
    match action.kind {
        ActionKind::Modify => {
            let Some(current) = cog.get(&action.buffer) else {
                return Vec::new();
            };
            let Some(chunk) = store.get(current) else {
                return Vec::new();
            };
            let mut updated = chunk.clone();
            for (s, v) in &action.svp {
                updated.svp.insert(s.clone(), v.clone());
            }
            alloc::vec![ActionOutcome {
                result_id: updated.id.clone(),
                store: alloc::vec![updated],
                delay: Delay::zero(),
            }]
        }
        ActionKind::Request => {
            let mut outcomes: Vec<ActionOutcome> = store
                .values()
                .filter(|c| {
                    c.ctype == action.ctype
                        && action
                            .svp
                            .iter()
                            .all(|(s, v)| c.svp.get(s) == Some(v))
                })
                .map(|c| ActionOutcome {
                    result_id: c.id.clone(),
                    store: alloc::vec![c.clone()],
                    delay: Delay::zero(),
                })
                .collect();
            if outcomes.is_empty() {
                // request failure is modeled as the nil chunk
                outcomes.push(ActionOutcome {
                    result_id: NIL_ID.to_owned(),
                    store: alloc::vec![ChunkTerm::nil()],
                    delay: Delay::zero(),
                });
            }
            outcomes
        }
        ActionKind::Clear => alloc::vec![ActionOutcome {
            result_id: NIL_ID.to_owned(),
            store: alloc::vec![ChunkTerm::nil()],
            delay: Delay::zero(),
        }],
    }
}

/// Merges chunk stores left to right. Identical chunk terms are shared;
/// a later chunk whose identifier is taken by a different term is renamed
/// to `id_n` for the smallest free `n`. Chunks of the first store always
/// keep their identifiers. Returns the merged store and one rename map
/// per input store.
pub fn merge_stores(stores: &[Vec<ChunkTerm>]) -> (Store, Vec<BTreeMap<Symbol, Symbol>>) {
    let mut merged = Store::new();
    let mut maps = Vec::with_capacity(stores.len());
    for chunks in stores {
        let mut idmap = BTreeMap::new();
        for chunk in chunks {
            match merged.get(&chunk.id) {
                None => {
                    merged.insert(chunk.id.clone(), chunk.clone());
                }
                Some(existing) if existing == chunk => {}
                Some(_) => {
                    let fresh = fresh_id(&chunk.id, &merged);
                    let mut renamed = chunk.clone();
                    renamed.id = fresh.clone();
                    idmap.insert(chunk.id.clone(), fresh.clone());
                    merged.insert(fresh, renamed);
                }
            }
        }
        maps.push(idmap);
    }
    (merged, maps)
}

fn fresh_id(base: &str, taken: &Store) -> Symbol {
    let mut n = 1u64;
    loop {
        let candidate = format!("{base}_{n}");
        if !taken.contains_key(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

/// Applies a rename map: `idmap(c)` when defined, the identity otherwise.
pub fn map_id(idmap: &BTreeMap<Symbol, Symbol>, c: &str) -> Symbol {
    idmap.get(c).cloned().unwrap_or_else(|| c.to_owned())
}

/// The complete result of firing a set of actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    /// The merged store after all actions.
    pub store: Store,
    /// New `(chunk, delay)` per acted buffer.
    pub buffer_updates: BTreeMap<Symbol, (Symbol, Delay)>,
}

/// Executes all actions of one rule firing: modifications update their
/// chunk in place (the identifier is kept), request and clear results are
/// merged into the store afterwards in lexicographic buffer order.
/// Ambiguous requests branch into one outcome per combination.
pub fn apply_actions(
    store: &Store,
    cog: &BTreeMap<Symbol, Symbol>,
    actions: &[ActionSpec],
) -> Vec<StepOutcome> {
    let mut sorted: Vec<&ActionSpec> = actions.iter().collect();
    sorted.sort_by(|a, b| a.buffer.cmp(&b.buffer));

    let mut combos: Vec<Vec<(usize, ActionOutcome)>> = alloc::vec![Vec::new()];
    for (i, action) in sorted.iter().enumerate() {
        let options = exec_action(action, store, cog);
        if options.is_empty() {
            return Vec::new(); // action not executable in this state
        }
        let mut next = Vec::with_capacity(combos.len() * options.len());
        for combo in &combos {
            for option in &options {
                let mut extended = combo.clone();
                extended.push((i, option.clone()));
                next.push(extended);
            }
        }
        combos = next;
    }

    let mut results = Vec::with_capacity(combos.len());
    for combo in combos {
        let mut merged = store.clone();
        let mut updates = BTreeMap::new();
        // modifications replace in place
        for (i, outcome) in &combo {
            if sorted[*i].kind == ActionKind::Modify {
                for chunk in &outcome.store {
                    merged.insert(chunk.id.clone(), chunk.clone());
                }
                updates.insert(sorted[*i].buffer.clone(), (outcome.result_id.clone(), outcome.delay));
            }
        }
        // request and clear results are merged afterwards
        for (i, outcome) in &combo {
            if sorted[*i].kind == ActionKind::Modify {
                continue;
            }
            let mut final_id = outcome.result_id.clone();
            for chunk in &outcome.store {
                match merged.get(&chunk.id) {
                    None => {
                        merged.insert(chunk.id.clone(), chunk.clone());
                    }
                    Some(existing) if existing == chunk => {}
                    Some(_) => {
                        let fresh = fresh_id(&chunk.id, &merged);
                        let mut renamed = chunk.clone();
                        renamed.id = fresh.clone();
                        if chunk.id == final_id {
                            final_id = fresh.clone();
                        }
                        merged.insert(fresh, renamed);
                    }
                }
            }
            updates.insert(sorted[*i].buffer.clone(), (final_id, outcome.delay));
        }
        // values written by modifications may name chunks absent from this
        // store; they are auto-created as slotless nil chunks, keeping the
        // store closed (implementations create chunks for bare symbols)
        let dangling: Vec<Symbol> = merged
            .values()
            .flat_map(|c| c.svp.values())
            .filter(|v| !merged.contains_key(*v))
            .cloned()
            .collect();
        for v in dangling {
            merged.insert(
                v.clone(),
                ChunkTerm {
                    id: v,
                    ctype: NIL_TYPE.to_owned(),
                    svp: BTreeMap::new(),
                },
            );
        }
        results.push(StepOutcome {
            store: merged,
            buffer_updates: updates,
        });
    }
    results
}

// ---------------------------------------------------------------------------
// State and rule translation
// ---------------------------------------------------------------------------

/// Translates an ACT-R state: one ground delta constraint with the whole
/// store, one gamma per buffer, additional information as built-ins.
pub fn translate_state(state: &ActrState) -> ChrState {
    let mut goal = Vec::with_capacity(1 + state.gamma.len());
    let store: Store = state
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
    goal.push(Constraint::delta(store_to_term(&store)));
    for (buffer, (id, delay)) in &state.gamma {
        goal.push(Constraint::gamma(
            Term::Const(buffer.clone()),
            Term::Const(id.clone()),
            Term::Num(*delay),
        ));
    }
    let builtins = state.upsilon.iter().map(fact_constraint).collect();
    chr::normalize(&ChrState::new(goal, builtins, BTreeSet::new()))
}

pub fn fact_constraint(f: &Fact) -> Constraint {
    Constraint::new(
        &f.functor,
        f.args.iter().map(|a| Term::Const(a.clone())),
    )
}

/// Deterministically picks head/body variable names that cannot capture
/// the rule's own variables.
struct NameGen {
    used: BTreeSet<Symbol>,
}

impl NameGen {
    fn new(rule: &ActrRule) -> NameGen {
        NameGen { used: rule.vars() }
    }

    fn fresh(&mut self, base: &str) -> Symbol {
        let mut candidate = base.to_owned();
        let mut n = 0u64;
        while self.used.contains(&candidate) {
            candidate = format!("{base}{n}");
            n += 1;
        }
        self.used.insert(candidate.clone());
        candidate
    }
}

fn value_term(v: &ActrValue) -> Term {
    match v {
        ActrValue::Const(c) => Term::Const(c.clone()),
        ActrValue::Var(x) => Term::Var(x.clone()),
    }
}

fn svp_term(svp: &[(Symbol, ActrValue)]) -> Term {
    Term::Set(
        svp.iter()
            .map(|(s, v)| Term::pair(Term::Const(s.clone()), value_term(v)))
            .collect(),
    )
}

/// Translates a rule in set normal form over the model's buffers.
///
/// Head: `delta(D)` plus one `gamma(b, C_b, E_b)` per buffer. Guard: one
/// membership test per buffer test plus a zero-delay test. Body: the new
/// delta and gammas, with action/merge/map built-ins computing the merged
/// store and the post-merge chunk identifiers of the acted buffers.
pub fn translate_rule(rule: &ActrRule, buffers: &BTreeSet<Symbol>) -> ChrRule {
    let mut names = NameGen::new(rule);
    let d = names.fresh("D");
    let d_prime = names.fresh("Dp");
    let d_star = names.fresh("Dstar");

    let mut chunk_var: BTreeMap<Symbol, Symbol> = BTreeMap::new();
    let mut delay_var: BTreeMap<Symbol, Symbol> = BTreeMap::new();
    for b in buffers {
        chunk_var.insert(b.clone(), names.fresh(&format!("C_{b}")));
        delay_var.insert(b.clone(), names.fresh(&format!("E_{b}")));
    }

    let mut head = Vec::with_capacity(1 + buffers.len());
    head.push(Constraint::delta(Term::var(&d)));
    for b in buffers {
        head.push(Constraint::gamma(
            Term::Const(b.clone()),
            Term::var(&chunk_var[b]),
            Term::var(&delay_var[b]),
        ));
    }

    let mut guard = Vec::new();
    let mut tests = rule.lhs.clone();
    tests.sort_by(|a, b| a.buffer.cmp(&b.buffer));
    for test in &tests {
        guard.push(Constraint::in_store(
            Term::app(
                "chunk",
                [
                    Term::var(&chunk_var[&test.buffer]),
                    Term::Const(test.ctype.clone()),
                    svp_term(&test.svp),
                ],
            ),
            Term::var(&d),
        ));
        guard.push(Constraint::eq(
            Term::var(&delay_var[&test.buffer]),
            Term::Num(Delay::zero()),
        ));
    }

    let mut actions = rule.rhs.clone();
    actions.sort_by(|a, b| a.buffer.cmp(&b.buffer));
    let acted: BTreeSet<Symbol> = actions.iter().map(|a| a.buffer.clone()).collect();

    let cogstate = Term::Set(
        buffers
            .iter()
            .map(|b| Term::pair(Term::Const(b.clone()), Term::var(&chunk_var[b])))
            .collect(),
    );

    let mut result_var: BTreeMap<Symbol, Symbol> = BTreeMap::new();
    let mut mapped_var: BTreeMap<Symbol, Symbol> = BTreeMap::new();
    let mut body_builtin = Vec::new();
    let mut action_stores = Vec::new();
    for action in &actions {
        let b = &action.buffer;
        let ds = names.fresh(&format!("Ds_{b}"));
        let cs = names.fresh(&format!("Cs_{b}"));
        let es = names.fresh(&format!("Es_{b}"));
        let alpha = Term::app(
            match action.kind {
                ActionKind::Modify => MODIFY,
                ActionKind::Request => REQUEST,
                ActionKind::Clear => CLEAR,
            },
            [
                Term::Const(b.clone()),
                Term::Const(action.ctype.clone()),
                svp_term(&action.svp),
            ],
        );
        body_builtin.push(Constraint::new(
            chr::ACTION,
            [
                alpha,
                Term::var(&d),
                cogstate.clone(),
                Term::var(&ds),
                Term::var(&cs),
                Term::var(&es),
            ],
        ));
        action_stores.push(Term::var(&ds));
        result_var.insert(b.clone(), cs);
        mapped_var.insert(b.clone(), names.fresh(&format!("Cm_{b}")));
    }
    body_builtin.push(Constraint::new(
        chr::MERGE,
        [Term::Tuple(action_stores), Term::var(&d_prime)],
    ));
    body_builtin.push(Constraint::new(
        chr::MERGE,
        [
            Term::Tuple(alloc::vec![Term::var(&d), Term::var(&d_prime)]),
            Term::var(&d_star),
        ],
    ));
    for action in &actions {
        let b = &action.buffer;
        body_builtin.push(Constraint::new(
            chr::MAP,
            [
                Term::var(&d),
                Term::var(&d_prime),
                Term::var(&result_var[b]),
                Term::var(&mapped_var[b]),
            ],
        ));
    }

    let mut body_chr = Vec::with_capacity(1 + buffers.len());
    body_chr.push(Constraint::delta(Term::var(&d_star)));
    for b in buffers {
        if acted.contains(b) {
            body_chr.push(Constraint::gamma(
                Term::Const(b.clone()),
                Term::var(&mapped_var[b]),
                Term::Num(Delay::zero()), // resdelay(b) = 0
            ));
        } else {
            body_chr.push(Constraint::gamma(
                Term::Const(b.clone()),
                Term::var(&chunk_var[b]),
                Term::var(&delay_var[b]),
            ));
        }
    }

    ChrRule {
        name: rule.name.clone(),
        head,
        guard,
        body_chr,
        body_builtin,
    }
}

// ---------------------------------------------------------------------------
// Transition resolution
// ---------------------------------------------------------------------------

/// Resolves the symbolic built-ins of a post-transition state into ground
/// successor states, one per consistent solution of the action built-ins.
/// States whose action arguments are not ground resolve to nothing.
pub fn resolve_transition(post: &ChrState) -> Vec<ChrState> {
    let mut actions: Vec<(Constraint, ActionSpec, Store, BTreeMap<Symbol, Symbol>)> = Vec::new();
    let mut residual: Vec<Constraint> = Vec::new();
    for c in &post.builtins {
        match c.functor.as_str() {
            chr::ACTION => {
                if c.args.len() != 6 {
                    return Vec::new();
                }
                let Some(spec) = ActionSpec::from_term(&c.args[0]) else {
                    return Vec::new();
                };
                let Some(store) = store_from_term(&c.args[1]) else {
                    return Vec::new();
                };
                let Some(cog) = cog_from_term(&c.args[2]) else {
                    return Vec::new();
                };
                actions.push((c.clone(), spec, store, cog));
            }
            chr::MERGE | chr::MAP => {} // recomputed below
            chr::IN => {
                // ground guard residue must hold; anything else is stuck
                let Term::Set(items) = &c.args[1] else {
                    return Vec::new();
                };
                if !c.is_ground() || !items.contains(&c.args[0]) {
                    return Vec::new();
                }
            }
            chr::TOP => {}
            chr::BOT => return Vec::new(),
            _ => residual.push(c.clone()),
        }
    }

    let (store, cog) = match actions.first() {
        Some((_, _, store, cog)) => (store.clone(), cog.clone()),
        None => {
            // no actions: execute the merge chain (the merge of nothing,
            // then the merge with the original store) to bind the new delta
            let mut subst = Substitution::new();
            let merges: Vec<Constraint> = post
                .builtins
                .iter()
                .filter(|c| c.functor == chr::MERGE && c.args.len() == 2)
                .cloned()
                .collect();
            let mut progress = true;
            while progress {
                progress = false;
                for m in &merges {
                    let m = m.apply(&subst);
                    let Term::Tuple(parts) = &m.args[0] else { continue };
                    if m.args[1].is_ground() {
                        continue;
                    }
                    let mut stores = Vec::new();
                    let mut ok = true;
                    for p in parts {
                        match store_from_term(p) {
                            Some(st) => stores.push(st.values().cloned().collect::<Vec<_>>()),
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let (merged, _) = merge_stores(&stores);
                    if let Term::Var(v) = &m.args[1] {
                        if subst.bind(v, &store_to_term(&merged)).is_ok() {
                            progress = true;
                        }
                    }
                }
            }
            let resolved = post.apply(&subst);
            let residual: Vec<Constraint> = residual.iter().map(|c| c.apply(&subst)).collect();
            return resolve_goal(&resolved, &residual, None);
        }
    };
    let specs: Vec<ActionSpec> = actions.iter().map(|(_, s, _, _)| s.clone()).collect();
    let mut out = Vec::new();
    for outcome in apply_actions(&store, &cog, &specs) {
        out.extend(resolve_goal(post, &residual, Some(&outcome)));
    }
    out
}

/// Rewrites the post-state goal using a step outcome: the delta variable
/// becomes the merged store, acted gammas get their final identifiers.
fn resolve_goal(post: &ChrState, residual: &[Constraint], outcome: Option<&StepOutcome>) -> Vec<ChrState> {
    let mut subst = Substitution::new();
    let mut goal = Vec::with_capacity(post.goal.len());
    for c in &post.goal {
        match c.functor.as_str() {
            chr::DELTA if c.args.len() == 1 => {
                let new_store = match outcome {
                    Some(o) => store_to_term(&o.store),
                    None => {
                        // rule without actions: delta is merge([D, merge([])]) = D
                        // the delta variable is resolved against the head store,
                        // which must be recoverable from the action-free body; the
                        // only caller in that situation passes a ground delta.
                        c.args[0].clone()
                    }
                };
                if let Term::Var(v) = &c.args[0] {
                    if subst.bind(v, &new_store).is_err() {
                        return Vec::new();
                    }
                } else if outcome.is_some() && c.args[0] != new_store {
                    return Vec::new();
                }
                goal.push(Constraint::delta(new_store));
            }
            chr::GAMMA if c.args.len() == 3 => {
                let Term::Const(buffer) = &c.args[0] else {
                    return Vec::new();
                };
                match outcome.and_then(|o| o.buffer_updates.get(buffer)) {
                    Some((id, delay)) => {
                        if let Term::Var(v) = &c.args[1] {
                            if subst.bind(v, &Term::Const(id.clone())).is_err() {
                                return Vec::new();
                            }
                        }
                        goal.push(Constraint::gamma(
                            c.args[0].clone(),
                            Term::Const(id.clone()),
                            Term::Num(*delay),
                        ));
                    }
                    None => goal.push(c.clone()),
                }
            }
            _ => goal.push(c.clone()),
        }
    }
    let goal: Vec<Constraint> = goal.iter().map(|c| c.apply(&subst)).collect();
    if goal.iter().any(|c| !c.is_ground()) {
        return Vec::new();
    }
    let state = chr::normalize(&ChrState::new(goal, residual.to_owned(), BTreeSet::new()));
    alloc::vec![state]
}

fn cog_from_term(t: &Term) -> Option<BTreeMap<Symbol, Symbol>> {
    let Term::Set(items) = t else { return None };
    let mut out = BTreeMap::new();
    for item in items {
        let Term::Tuple(kv) = item else { return None };
        if kv.len() != 2 {
            return None;
        }
        let (Term::Const(b), Term::Const(c)) = (&kv[0], &kv[1]) else {
            return None;
        };
        out.insert(b.clone(), c.clone());
    }
    Some(out)
}

/// One-step successors of a CHR state under a translated program:
/// matching, guard entailment, and resolution of the body built-ins.
pub fn chr_successors(state: &ChrState, program: &[ChrRule]) -> Vec<(Symbol, ChrState)> {
    let mut out: Vec<(Symbol, ChrState)> = Vec::new();
    for (i, rule) in program.iter().enumerate() {
        let variant = rule.rename_apart(&format!("#r{i}"));
        for (_, post) in chr::match_rule(state, &variant) {
            for succ in resolve_transition(&post) {
                out.push((rule.name.clone(), succ));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out.dedup();
    out
}

// ---------------------------------------------------------------------------
// Executable built-ins for the entailment engine
// ---------------------------------------------------------------------------

pub(crate) fn solve_action(c: &Constraint, subst: &Substitution) -> Result<Vec<Substitution>, TheoryError> {
    if c.args.len() != 6 {
        return Err(TheoryError::OutsideTheory(chr::ACTION.to_owned()));
    }
    let spec = ActionSpec::from_term(&c.args[0]).ok_or(TheoryError::NonGround(chr::ACTION.to_owned()))?;
    let store = store_from_term(&c.args[1]).ok_or(TheoryError::NonGround(chr::ACTION.to_owned()))?;
    let cog = cog_from_term(&c.args[2]).ok_or(TheoryError::NonGround(chr::ACTION.to_owned()))?;
    let mut out = Vec::new();
    for outcome in exec_action(&spec, &store, &cog) {
        let mut s = subst.clone();
        let store_term = Term::Set(outcome.store.iter().map(ChunkTerm::to_term).collect());
        let ok = unify(&mut s, &c.args[3], &store_term, VarPolicy::TwoWay { prefer: &|_| true }).is_ok()
            && unify(
                &mut s,
                &c.args[4],
                &Term::Const(outcome.result_id.clone()),
                VarPolicy::TwoWay { prefer: &|_| true },
            )
            .is_ok()
            && unify(
                &mut s,
                &c.args[5],
                &Term::Num(outcome.delay),
                VarPolicy::TwoWay { prefer: &|_| true },
            )
            .is_ok();
        if ok {
            out.push(s);
        }
    }
    Ok(out)
}

pub(crate) fn solve_merge(c: &Constraint, subst: &Substitution) -> Result<Vec<Substitution>, TheoryError> {
    if c.args.len() != 2 {
        return Err(TheoryError::OutsideTheory(chr::MERGE.to_owned()));
    }
    let Term::Tuple(parts) = &c.args[0] else {
        return Err(TheoryError::NonGround(chr::MERGE.to_owned()));
    };
    let mut stores = Vec::with_capacity(parts.len());
    for p in parts {
        let store = store_from_term(p).ok_or(TheoryError::NonGround(chr::MERGE.to_owned()))?;
        stores.push(store.values().cloned().collect::<Vec<_>>());
    }
    let (merged, _) = merge_stores(&stores);
    let mut s = subst.clone();
    if unify(
        &mut s,
        &c.args[1],
        &store_to_term(&merged),
        VarPolicy::TwoWay { prefer: &|_| true },
    )
    .is_ok()
    {
        Ok(alloc::vec![s])
    } else {
        Ok(Vec::new())
    }
}

/// `map(D, D', C, C')`: replays the deterministic merge of `[D, D']` and
/// maps `C` through the rename map of the second store.
pub(crate) fn solve_map(c: &Constraint, subst: &Substitution) -> Result<Vec<Substitution>, TheoryError> {
    if c.args.len() != 4 {
        return Err(TheoryError::OutsideTheory(chr::MAP.to_owned()));
    }
    let d = store_from_term(&c.args[0]).ok_or(TheoryError::NonGround(chr::MAP.to_owned()))?;
    let dp = store_from_term(&c.args[1]).ok_or(TheoryError::NonGround(chr::MAP.to_owned()))?;
    let Term::Const(id) = &c.args[2] else {
        return Err(TheoryError::NonGround(chr::MAP.to_owned()));
    };
    let (_, maps) = merge_stores(&[
        d.values().cloned().collect::<Vec<_>>(),
        dp.values().cloned().collect::<Vec<_>>(),
    ]);
    let mapped = map_id(&maps[1], id);
    let mut s = subst.clone();
    if unify(
        &mut s,
        &c.args[3],
        &Term::Const(mapped),
        VarPolicy::TwoWay { prefer: &|_| true },
    )
    .is_ok()
    {
        Ok(alloc::vec![s])
    } else {
        Ok(Vec::new())
    }
}

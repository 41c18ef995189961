//! ACT-R model representation: chunk types, chunk stores, production
//! rules, cognitive states, set normal form, and a reference interpreter
//! whose action semantics is shared with the CHR translation.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::term::{Delay, Symbol};
use crate::translate::{apply_actions, ActionSpec, Store, NIL_ID, NIL_TYPE};

/// A chunk type and its slot names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkType {
    pub name: Symbol,
    pub slots: BTreeSet<Symbol>,
}

/// A chunk: typed record whose slot values are chunk identifiers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Chunk {
    pub id: Symbol,
    pub ctype: Symbol,
    pub values: BTreeMap<Symbol, Symbol>,
}

/// A chunk store with pairwise distinct identifiers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChunkStore {
    chunks: BTreeMap<Symbol, Chunk>,
}

impl ChunkStore {
    pub fn new() -> Self {
        ChunkStore::default()
    }

    pub fn insert(&mut self, chunk: Chunk) -> Result<(), ValidationError> {
        if self.chunks.contains_key(&chunk.id) {
            return Err(ValidationError::DuplicateChunkId(chunk.id));
        }
        self.chunks.insert(chunk.id.clone(), chunk);
        Ok(())
    }

    pub fn replace(&mut self, chunk: Chunk) {
        self.chunks.insert(chunk.id.clone(), chunk);
    }

    pub fn get(&self, id: &str) -> Option<&Chunk> {
        self.chunks.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.chunks.contains_key(id)
    }

    pub fn chunks(&self) -> impl Iterator<Item = &Chunk> {
        self.chunks.values()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &Symbol> {
        self.chunks.keys()
    }
}

/// A slot value in a test or action: constant or variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ActrValue {
    Const(Symbol),
    Var(Symbol),
}

impl fmt::Display for ActrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActrValue::Const(c) => write!(f, "{c}"),
            ActrValue::Var(v) => write!(f, "{v}"),
        }
    }
}

/// One buffer test `(buffer, type, {slot: value, ...})`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BufferTest {
    pub buffer: Symbol,
    pub ctype: Symbol,
    pub svp: Vec<(Symbol, ActrValue)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ActionKind {
    Modify,
    Request,
    Clear,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionKind::Modify => write!(f, "modify"),
            ActionKind::Request => write!(f, "request"),
            ActionKind::Clear => write!(f, "clear"),
        }
    }
}

/// One rule action on a buffer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Action {
    pub kind: ActionKind,
    pub buffer: Symbol,
    pub ctype: Symbol,
    pub svp: Vec<(Symbol, ActrValue)>,
}

/// A production rule `lhs => rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActrRule {
    pub name: Symbol,
    pub lhs: Vec<BufferTest>,
    pub rhs: Vec<Action>,
}

impl ActrRule {
    pub fn vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for t in &self.lhs {
            for (_, v) in &t.svp {
                if let ActrValue::Var(x) = v {
                    out.insert(x.clone());
                }
            }
        }
        for a in &self.rhs {
            for (_, v) in &a.svp {
                if let ActrValue::Var(x) = v {
                    out.insert(x.clone());
                }
            }
        }
        out
    }

    fn lhs_vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for t in &self.lhs {
            for (_, v) in &t.svp {
                if let ActrValue::Var(x) = v {
                    out.insert(x.clone());
                }
            }
        }
        out
    }
}

/// Ground atomic fact carried as additional information.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fact {
    pub functor: Symbol,
    pub args: Vec<Symbol>,
}

/// An ACT-R state: chunk store, cognitive state (total over the model's
/// buffers) and additional information.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActrState {
    pub store: ChunkStore,
    pub gamma: BTreeMap<Symbol, (Symbol, Delay)>,
    pub upsilon: Vec<Fact>,
}

/// Signature data shared by the invariant checks: slot typing, declared
/// buffers, and the arities of the allowed architecture facts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSig {
    pub types: BTreeMap<Symbol, BTreeSet<Symbol>>,
    pub buffers: BTreeSet<Symbol>,
    pub fact_arities: BTreeMap<Symbol, usize>,
}

/// A complete ACT-R model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActrModel {
    pub types: BTreeMap<Symbol, ChunkType>,
    pub buffers: BTreeSet<Symbol>,
    pub fact_arities: BTreeMap<Symbol, usize>,
    pub rules: Vec<ActrRule>,
    pub initial: ActrState,
}

impl ActrModel {
    /// An empty model over the given buffers. The reserved slotless `nil`
    /// type is always declared; unassigned buffers hold a shared nil chunk.
    pub fn new<I: IntoIterator<Item = Symbol>>(buffers: I) -> ActrModel {
        let mut types = BTreeMap::new();
        types.insert(
            NIL_TYPE.to_owned(),
            ChunkType {
                name: NIL_TYPE.to_owned(),
                slots: BTreeSet::new(),
            },
        );
        ActrModel {
            types,
            buffers: buffers.into_iter().collect(),
            fact_arities: BTreeMap::new(),
            rules: Vec::new(),
            initial: ActrState {
                store: ChunkStore::new(),
                gamma: BTreeMap::new(),
                upsilon: Vec::new(),
            },
        }
    }

    pub fn sig(&self) -> ModelSig {
        ModelSig {
            types: self
                .types
                .iter()
                .map(|(n, t)| (n.clone(), t.slots.clone()))
                .collect(),
            buffers: self.buffers.clone(),
            fact_arities: self.fact_arities.clone(),
        }
    }

    /// All constants mentioned anywhere in the model; the base of the
    /// grounding universe.
    pub fn constants(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        out.extend(self.buffers.iter().cloned());
        for (name, t) in &self.types {
            out.insert(name.clone());
            out.extend(t.slots.iter().cloned());
        }
        for c in self.initial.store.chunks() {
            out.insert(c.id.clone());
            out.insert(c.ctype.clone());
            for (s, v) in &c.values {
                out.insert(s.clone());
                out.insert(v.clone());
            }
        }
        for r in &self.rules {
            for t in &r.lhs {
                out.insert(t.buffer.clone());
                out.insert(t.ctype.clone());
                for (s, v) in &t.svp {
                    out.insert(s.clone());
                    if let ActrValue::Const(c) = v {
                        out.insert(c.clone());
                    }
                }
            }
            for a in &r.rhs {
                out.insert(a.buffer.clone());
                out.insert(a.ctype.clone());
                for (s, v) in &a.svp {
                    out.insert(s.clone());
                    if let ActrValue::Const(c) = v {
                        out.insert(c.clone());
                    }
                }
            }
        }
        for f in &self.initial.upsilon {
            out.insert(f.functor.clone());
            out.extend(f.args.iter().cloned());
        }
        out.insert(NIL_TYPE.to_owned());
        out.insert(NIL_ID.to_owned());
        out
    }

    /// Validates every cross-reference and structural invariant.
    pub fn validate(&self) -> Result<(), ValidationError> {
        match self.types.get(NIL_TYPE) {
            Some(t) if t.slots.is_empty() => {}
            _ => return Err(ValidationError::ReservedName(NIL_TYPE.to_owned())),
        }
        for (name, t) in &self.types {
            if *name != t.name {
                return Err(ValidationError::Internal("type map key mismatch".to_owned()));
            }
        }
        for rule in &self.rules {
            self.validate_rule(rule)?;
        }
        let mut names = BTreeSet::new();
        for rule in &self.rules {
            if !names.insert(rule.name.clone()) {
                return Err(ValidationError::DuplicateRuleName(rule.name.clone()));
            }
        }
        self.validate_state(&self.initial)
    }

    pub fn validate_rule(&self, rule: &ActrRule) -> Result<(), ValidationError> {
        let mut tested: BTreeMap<Symbol, Symbol> = BTreeMap::new();
        for test in &rule.lhs {
            if !self.buffers.contains(&test.buffer) {
                return Err(ValidationError::UndeclaredBuffer(test.buffer.clone()));
            }
            let ty = self
                .types
                .get(&test.ctype)
                .ok_or_else(|| ValidationError::UndeclaredType(test.ctype.clone()))?;
            for (slot, _) in &test.svp {
                if !ty.slots.contains(slot) {
                    return Err(ValidationError::UndeclaredSlot {
                        slot: slot.clone(),
                        ctype: test.ctype.clone(),
                    });
                }
            }
            if tested.insert(test.buffer.clone(), test.ctype.clone()).is_some() {
                return Err(ValidationError::DuplicateTest(test.buffer.clone()));
            }
        }
        let lhs_vars = rule.lhs_vars();
        let mut acted: BTreeSet<Symbol> = BTreeSet::new();
        for action in &rule.rhs {
            if !self.buffers.contains(&action.buffer) {
                return Err(ValidationError::UndeclaredBuffer(action.buffer.clone()));
            }
            if !acted.insert(action.buffer.clone()) {
                return Err(ValidationError::DuplicateAction(action.buffer.clone()));
            }
            let ty = self
                .types
                .get(&action.ctype)
                .ok_or_else(|| ValidationError::UndeclaredType(action.ctype.clone()))?;
            let mut seen_slots = BTreeSet::new();
            for (slot, v) in &action.svp {
                if !ty.slots.contains(slot) {
                    return Err(ValidationError::UndeclaredSlot {
                        slot: slot.clone(),
                        ctype: action.ctype.clone(),
                    });
                }
                if !seen_slots.insert(slot.clone()) {
                    return Err(ValidationError::DuplicateActionSlot {
                        rule: rule.name.clone(),
                        slot: slot.clone(),
                    });
                }
                if let ActrValue::Var(x) = v {
                    if !lhs_vars.contains(x) {
                        return Err(ValidationError::UnboundRhsVar {
                            rule: rule.name.clone(),
                            var: x.clone(),
                        });
                    }
                }
            }
            if action.kind == ActionKind::Modify {
                // a modification reads the matched chunk, so the buffer must
                // be tested with the same type; this also keeps slot values
                // inside the chunk network
                match tested.get(&action.buffer) {
                    Some(t) if *t == action.ctype => {}
                    _ => {
                        return Err(ValidationError::ModifyWithoutTest {
                            rule: rule.name.clone(),
                            buffer: action.buffer.clone(),
                        })
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks the ActrState invariants against this model.
    pub fn validate_state(&self, state: &ActrState) -> Result<(), ValidationError> {
        for chunk in state.store.chunks() {
            let ty = self
                .types
                .get(&chunk.ctype)
                .ok_or_else(|| ValidationError::UndeclaredType(chunk.ctype.clone()))?;
            let slots: BTreeSet<Symbol> = chunk.values.keys().cloned().collect();
            if slots != ty.slots {
                return Err(ValidationError::SlotDomainMismatch {
                    chunk: chunk.id.clone(),
                    ctype: chunk.ctype.clone(),
                });
            }
            for v in chunk.values.values() {
                if !state.store.contains(v) {
                    return Err(ValidationError::UnknownChunkRef {
                        chunk: chunk.id.clone(),
                        value: v.clone(),
                    });
                }
            }
        }
        for b in &self.buffers {
            let Some((id, _)) = state.gamma.get(b) else {
                return Err(ValidationError::MissingBufferContent(b.clone()));
            };
            if !state.store.contains(id) {
                return Err(ValidationError::UnknownChunkRef {
                    chunk: b.clone(),
                    value: id.clone(),
                });
            }
        }
        for b in state.gamma.keys() {
            if !self.buffers.contains(b) {
                return Err(ValidationError::UndeclaredBuffer(b.clone()));
            }
        }
        for f in &state.upsilon {
            if self.fact_arities.get(&f.functor) != Some(&f.args.len()) {
                return Err(ValidationError::UndeclaredFact(f.functor.clone()));
            }
        }
        Ok(())
    }

    /// Returns the model with every rule in set normal form.
    pub fn set_normal_form(&self) -> Result<ActrModel, ValidationError> {
        let mut out = self.clone();
        out.rules = self
            .rules
            .iter()
            .map(|r| to_set_normal_form(r, &self.types))
            .collect::<Result<_, _>>()?;
        Ok(out)
    }
}

/// Brings a rule into set normal form: every test mentions each slot of
/// its type exactly once; slots absent from the source are padded with
/// fresh variables. A slot tested twice with distinct values is rejected.
pub fn to_set_normal_form(
    rule: &ActrRule,
    types: &BTreeMap<Symbol, ChunkType>,
) -> Result<ActrRule, ValidationError> {
    let mut used = rule.vars();
    let mut fresh_counter = 1u64;
    let mut fresh = |used: &mut BTreeSet<Symbol>| -> Symbol {
        loop {
            let candidate = format!("V{fresh_counter}");
            fresh_counter += 1;
            if used.insert(candidate.clone()) {
                return candidate;
            }
        }
    };
    let mut lhs = Vec::with_capacity(rule.lhs.len());
    for test in &rule.lhs {
        let ty = types
            .get(&test.ctype)
            .ok_or_else(|| ValidationError::UndeclaredType(test.ctype.clone()))?;
        let mut by_slot: BTreeMap<Symbol, ActrValue> = BTreeMap::new();
        for (slot, v) in &test.svp {
            if !ty.slots.contains(slot) {
                return Err(ValidationError::UndeclaredSlot {
                    slot: slot.clone(),
                    ctype: test.ctype.clone(),
                });
            }
            match by_slot.get(slot) {
                None => {
                    by_slot.insert(slot.clone(), v.clone());
                }
                Some(prev) if prev == v => {}
                Some(_) => {
                    return Err(ValidationError::InconsistentDuplicateSlotTest {
                        rule: rule.name.clone(),
                        slot: slot.clone(),
                    })
                }
            }
        }
        for slot in &ty.slots {
            if !by_slot.contains_key(slot) {
                by_slot.insert(slot.clone(), ActrValue::Var(fresh(&mut used)));
            }
        }
        lhs.push(BufferTest {
            buffer: test.buffer.clone(),
            ctype: test.ctype.clone(),
            svp: by_slot.into_iter().collect(),
        });
    }
    Ok(ActrRule {
        name: rule.name.clone(),
        lhs,
        rhs: rule.rhs.clone(),
    })
}

/// Matches every rule against the state and returns all one-step
/// successors, branching on ambiguous requests. Buffer tests require a
/// zero delay; stuck states yield the empty set.
pub fn actr_step(state: &ActrState, model: &ActrModel) -> Vec<(Symbol, ActrState)> {
    let mut out: Vec<(Symbol, ActrState)> = Vec::new();
    let store: Store = state
        .store
        .chunks()
        .map(|c| {
            (
                c.id.clone(),
                crate::translate::ChunkTerm {
                    id: c.id.clone(),
                    ctype: c.ctype.clone(),
                    svp: c.values.clone(),
                },
            )
        })
        .collect();
    let cog: BTreeMap<Symbol, Symbol> = state
        .gamma
        .iter()
        .map(|(b, (id, _))| (b.clone(), id.clone()))
        .collect();

    for rule in &model.rules {
        let Some(binding) = match_tests(rule, state) else {
            continue;
        };
        let specs: Vec<ActionSpec> = rule
            .rhs
            .iter()
            .map(|a| ActionSpec {
                kind: match a.kind {
                    ActionKind::Modify => ActionKind::Modify,
                    ActionKind::Request => ActionKind::Request,
                    ActionKind::Clear => ActionKind::Clear,
                },
                buffer: a.buffer.clone(),
                ctype: a.ctype.clone(),
                svp: a
                    .svp
                    .iter()
                    .map(|(s, v)| {
                        let value = match v {
                            ActrValue::Const(c) => c.clone(),
                            ActrValue::Var(x) => binding[x].clone(),
                        };
                        (s.clone(), value)
                    })
                    .collect(),
            })
            .collect();
        for outcome in apply_actions(&store, &cog, &specs) {
            let mut succ_store = ChunkStore::new();
            for chunk in outcome.store.values() {
                succ_store.replace(Chunk {
                    id: chunk.id.clone(),
                    ctype: chunk.ctype.clone(),
                    values: chunk.svp.clone(),
                });
            }
            let mut gamma = state.gamma.clone();
            for (b, update) in &outcome.buffer_updates {
                gamma.insert(b.clone(), update.clone());
            }
            out.push((
                rule.name.clone(),
                ActrState {
                    store: succ_store,
                    gamma,
                    upsilon: state.upsilon.clone(),
                },
            ));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| cmp_state(&a.1, &b.1)));
    out.dedup();
    out
}

fn cmp_state(a: &ActrState, b: &ActrState) -> core::cmp::Ordering {
    let ka: Vec<&Chunk> = a.store.chunks().collect();
    let kb: Vec<&Chunk> = b.store.chunks().collect();
    ka.cmp(&kb)
        .then_with(|| a.gamma.cmp(&b.gamma))
        .then_with(|| a.upsilon.cmp(&b.upsilon))
}

/// Matches all buffer tests of a rule directly against the state,
/// requiring delay zero and binding the rule's variables.
fn match_tests(rule: &ActrRule, state: &ActrState) -> Option<BTreeMap<Symbol, Symbol>> {
    let mut binding: BTreeMap<Symbol, Symbol> = BTreeMap::new();
    for test in &rule.lhs {
        let (id, delay) = state.gamma.get(&test.buffer)?;
        if !delay.is_zero() {
            return None;
        }
        let chunk = state.store.get(id)?;
        if chunk.ctype != test.ctype {
            return None;
        }
        for (slot, v) in &test.svp {
            let actual = chunk.values.get(slot)?;
            match v {
                ActrValue::Const(c) => {
                    if c != actual {
                        return None;
                    }
                }
                ActrValue::Var(x) => match binding.get(x) {
                    None => {
                        binding.insert(x.clone(), actual.clone());
                    }
                    Some(bound) if bound == actual => {}
                    Some(_) => return None,
                },
            }
        }
    }
    Some(binding)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationError {
    UndeclaredType(Symbol),
    UndeclaredBuffer(Symbol),
    UndeclaredSlot { slot: Symbol, ctype: Symbol },
    UndeclaredFact(Symbol),
    DuplicateAction(Symbol),
    DuplicateActionSlot { rule: Symbol, slot: Symbol },
    DuplicateTest(Symbol),
    DuplicateChunkId(Symbol),
    DuplicateRuleName(Symbol),
    InconsistentDuplicateSlotTest { rule: Symbol, slot: Symbol },
    UnboundRhsVar { rule: Symbol, var: Symbol },
    UnknownChunkRef { chunk: Symbol, value: Symbol },
    SlotDomainMismatch { chunk: Symbol, ctype: Symbol },
    MissingBufferContent(Symbol),
    ModifyWithoutTest { rule: Symbol, buffer: Symbol },
    ReservedName(Symbol),
    Internal(String),
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::UndeclaredType(t) => write!(f, "undeclared type {t}"),
            ValidationError::UndeclaredBuffer(b) => write!(f, "undeclared buffer {b}"),
            ValidationError::UndeclaredSlot { slot, ctype } => {
                write!(f, "slot {slot} is not declared for type {ctype}")
            }
            ValidationError::UndeclaredFact(p) => write!(f, "undeclared fact symbol {p}"),
            ValidationError::DuplicateAction(b) => {
                write!(f, "duplicate action on buffer {b}: only one action per buffer is allowed")
            }
            ValidationError::DuplicateActionSlot { rule, slot } => {
                write!(f, "rule {rule}: slot {slot} appears twice in one action")
            }
            ValidationError::DuplicateTest(b) => write!(f, "duplicate test on buffer {b}"),
            ValidationError::DuplicateChunkId(c) => write!(f, "duplicate chunk identifier {c}"),
            ValidationError::DuplicateRuleName(r) => write!(f, "duplicate rule name {r}"),
            ValidationError::InconsistentDuplicateSlotTest { rule, slot } => {
                write!(f, "rule {rule}: inconsistent duplicate slot test on {slot}")
            }
            ValidationError::UnboundRhsVar { rule, var } => {
                write!(f, "rule {rule}: right-hand side variable {var} does not occur on the left-hand side")
            }
            ValidationError::UnknownChunkRef { chunk, value } => {
                write!(f, "{chunk} references unknown chunk {value}")
            }
            ValidationError::SlotDomainMismatch { chunk, ctype } => {
                write!(f, "chunk {chunk} does not fill exactly the slots of type {ctype}")
            }
            ValidationError::MissingBufferContent(b) => {
                write!(f, "buffer {b} has no content in the state")
            }
            ValidationError::ModifyWithoutTest { rule, buffer } => {
                write!(f, "rule {rule}: modify on buffer {buffer} requires a test of the same type on that buffer")
            }
            ValidationError::ReservedName(n) => write!(f, "{n} is reserved"),
            ValidationError::Internal(s) => write!(f, "internal error: {s}"),
        }
    }
}

impl core::error::Error for ValidationError {}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::gen::counting_model;

    #[test]
    fn counting_model_validates() {
        let m = counting_model();
        m.validate().unwrap();
        m.set_normal_form().unwrap();
    }

    #[test]
    fn snf_pads_missing_slots_with_fresh_variables() {
        let m = counting_model();
        let rule = ActrRule {
            name: "r".to_owned(),
            lhs: alloc::vec![BufferTest {
                buffer: "retrieval".to_owned(),
                ctype: "order".to_owned(),
                svp: alloc::vec![("first".to_owned(), ActrValue::Var("X".to_owned()))],
            }],
            rhs: alloc::vec![],
        };
        let n = to_set_normal_form(&rule, &m.types).unwrap();
        assert_eq!(n.lhs[0].svp.len(), 2);
        assert_eq!(n.lhs[0].svp[0], ("first".to_owned(), ActrValue::Var("X".to_owned())));
        assert_eq!(n.lhs[0].svp[1].0, "second");
        assert!(matches!(n.lhs[0].svp[1].1, ActrValue::Var(ref v) if v == "V1"));
        // idempotent
        assert_eq!(to_set_normal_form(&n, &m.types).unwrap(), n);
    }

    #[test]
    fn snf_leaves_total_tests_unchanged() {
        let m = counting_model();
        let rule = ActrRule {
            name: "r".to_owned(),
            lhs: alloc::vec![BufferTest {
                buffer: "goal".to_owned(),
                ctype: "g".to_owned(),
                svp: alloc::vec![("current".to_owned(), ActrValue::Var("X".to_owned()))],
            }],
            rhs: alloc::vec![],
        };
        assert_eq!(to_set_normal_form(&rule, &m.types).unwrap(), rule);
    }

    #[test]
    fn snf_rejects_inconsistent_duplicate_slot_tests() {
        let m = counting_model();
        let rule = ActrRule {
            name: "r".to_owned(),
            lhs: alloc::vec![BufferTest {
                buffer: "retrieval".to_owned(),
                ctype: "order".to_owned(),
                svp: alloc::vec![
                    ("first".to_owned(), ActrValue::Var("X".to_owned())),
                    ("first".to_owned(), ActrValue::Var("Y".to_owned())),
                ],
            }],
            rhs: alloc::vec![],
        };
        assert!(matches!(
            to_set_normal_form(&rule, &m.types),
            Err(ValidationError::InconsistentDuplicateSlotTest { .. })
        ));
    }

    #[test]
    fn counting_step_advances_current_and_retrieval() {
        let m = counting_model().set_normal_form().unwrap();
        let succ = actr_step(&m.initial, &m);
        assert_eq!(succ.len(), 1);
        let (rule, next) = &succ[0];
        assert_eq!(rule, "count");
        // goal chunk modified in place: current = 2
        assert_eq!(next.store.get("b0").unwrap().values["current"], "2");
        // retrieval now holds the order chunk (2, 3)
        let (ret, delay) = &next.gamma["retrieval"];
        assert!(delay.is_zero());
        let held = next.store.get(ret).unwrap();
        assert_eq!(held.values["first"], "2");
        assert_eq!(held.values["second"], "3");
        m.validate_state(next).unwrap();
    }

    #[test]
    fn stuck_state_has_no_successors() {
        let mut m = counting_model().set_normal_form().unwrap();
        // point the goal buffer at a number chunk: no test matches
        m.initial.gamma.insert("goal".to_owned(), ("1".to_owned(), Delay::zero()));
        assert!(actr_step(&m.initial, &m).is_empty());
    }

    #[test]
    fn ambiguous_request_branches_into_two_successors() {
        let mut m = counting_model().set_normal_form().unwrap();
        // second order fact sharing first = 1, reached by requesting first: 1
        m.initial
            .store
            .insert(Chunk {
                id: "c".to_owned(),
                ctype: "order".to_owned(),
                values: BTreeMap::from([
                    ("first".to_owned(), "1".to_owned()),
                    ("second".to_owned(), "3".to_owned()),
                ]),
            })
            .unwrap();
        // goal at 2, retrieval holds the order chunk (2, 1): firing
        // requests first = 1, answered by both a and c
        m.initial.store.replace(Chunk {
            id: "b0".to_owned(),
            ctype: "g".to_owned(),
            values: BTreeMap::from([("current".to_owned(), "2".to_owned())]),
        });
        m.initial
            .store
            .insert(Chunk {
                id: "r0".to_owned(),
                ctype: "order".to_owned(),
                values: BTreeMap::from([
                    ("first".to_owned(), "2".to_owned()),
                    ("second".to_owned(), "1".to_owned()),
                ]),
            })
            .unwrap();
        m.initial.gamma.insert("retrieval".to_owned(), ("r0".to_owned(), Delay::zero()));
        let succ = actr_step(&m.initial, &m);
        assert_eq!(succ.len(), 2);
        let targets: BTreeSet<&str> = succ
            .iter()
            .map(|(_, s)| s.gamma["retrieval"].0.as_str())
            .collect();
        assert_eq!(targets, BTreeSet::from(["a", "c"]));
        for (_, s) in &succ {
            m.validate_state(s).unwrap();
        }
    }

    #[test]
    fn rejects_duplicate_actions_per_buffer() {
        let mut m = counting_model();
        let mut rule = m.rules[0].clone();
        rule.name = "bad".to_owned();
        rule.rhs.push(Action {
            kind: ActionKind::Clear,
            buffer: "goal".to_owned(),
            ctype: NIL_TYPE.to_owned(),
            svp: alloc::vec![],
        });
        m.rules.push(rule);
        assert!(matches!(
            m.validate(),
            Err(ValidationError::DuplicateAction(_))
        ));
    }

    #[test]
    fn rejects_unbound_rhs_variable() {
        let mut m = counting_model();
        let mut rule = m.rules[0].clone();
        rule.name = "bad".to_owned();
        rule.rhs[1].svp[0].1 = ActrValue::Var("Z".to_owned());
        m.rules.push(rule);
        assert!(matches!(
            m.validate(),
            Err(ValidationError::UnboundRhsVar { .. })
        ));
    }
}

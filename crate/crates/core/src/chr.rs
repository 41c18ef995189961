//! Minimal CHR machinery for simplification rules over equivalence
//! classes of states.
//!
//! States are handled through canonical normal forms: solving the
//! equality constraints, renaming local variables canonically and
//! sorting both stores. Equivalence is decided on normal forms with a
//! backtracking search over local-variable bijections as a completeness
//! net, which is exact for the restricted built-in theory used here
//! (syntactic equality, set membership, the store-manipulation built-ins
//! and uninterpreted ground facts).

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::term::{rename_vars, unify, Substitution, Symbol, Term, VarPolicy};

pub const EQ: &str = "=";
pub const IN: &str = "in";
pub const ACTION: &str = "action";
pub const MERGE: &str = "merge";
pub const MAP: &str = "map";
pub const TOP: &str = "top";
pub const BOT: &str = "bot";
pub const DELTA: &str = "delta";
pub const GAMMA: &str = "gamma";

/// A CHR or built-in constraint: a functor applied to terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Constraint {
    pub functor: Symbol,
    pub args: Vec<Term>,
}

impl Constraint {
    pub fn new<I: IntoIterator<Item = Term>>(functor: &str, args: I) -> Self {
        Constraint {
            functor: functor.to_owned(),
            args: args.into_iter().collect(),
        }
    }

    pub fn eq(a: Term, b: Term) -> Self {
        Constraint::new(EQ, [a, b])
    }

    pub fn in_store(element: Term, store: Term) -> Self {
        Constraint::new(IN, [element, store])
    }

    pub fn delta(store: Term) -> Self {
        Constraint::new(DELTA, [store])
    }

    pub fn gamma(buffer: Term, chunk: Term, delay: Term) -> Self {
        Constraint::new(GAMMA, [buffer, chunk, delay])
    }

    pub fn top() -> Self {
        Constraint::new(TOP, [])
    }

    pub fn bot() -> Self {
        Constraint::new(BOT, [])
    }

    pub fn is_eq(&self) -> bool {
        self.functor == EQ && self.args.len() == 2
    }

    pub fn as_term(&self) -> Term {
        Term::App(self.functor.clone(), self.args.clone())
    }

    pub fn apply(&self, subst: &Substitution) -> Constraint {
        Constraint {
            functor: self.functor.clone(),
            args: self.args.iter().map(|t| subst.apply(t)).collect(),
        }
    }

    pub fn rename(&self, suffix: &str) -> Constraint {
        Constraint {
            functor: self.functor.clone(),
            args: self.args.iter().map(|t| rename_vars(t, suffix)).collect(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Symbol>) {
        for a in &self.args {
            a.collect_vars(out);
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.functor.as_str() {
            EQ if self.args.len() == 2 => write!(f, "{} = {}", self.args[0], self.args[1]),
            IN if self.args.len() == 2 => write!(f, "{} in {}", self.args[0], self.args[1]),
            TOP => write!(f, "true"),
            BOT => write!(f, "false"),
            _ => {
                write!(f, "{}(", self.functor)?;
                for (i, a) in self.args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A CHR state: goal multiset, built-in conjunction, global variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChrState {
    pub goal: Vec<Constraint>,
    pub builtins: Vec<Constraint>,
    pub globals: BTreeSet<Symbol>,
}

impl ChrState {
    pub fn new(goal: Vec<Constraint>, builtins: Vec<Constraint>, globals: BTreeSet<Symbol>) -> Self {
        ChrState {
            goal,
            builtins,
            globals,
        }
    }

    /// The canonical failed state.
    pub fn failed() -> Self {
        ChrState {
            goal: Vec::new(),
            builtins: alloc::vec![Constraint::bot()],
            globals: BTreeSet::new(),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.builtins.iter().any(|c| c.functor == BOT)
    }

    pub fn vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for c in self.goal.iter().chain(&self.builtins) {
            c.collect_vars(&mut out);
        }
        out
    }

    pub fn local_vars(&self) -> BTreeSet<Symbol> {
        self.vars().difference(&self.globals).cloned().collect()
    }

    pub fn is_ground(&self) -> bool {
        self.goal.iter().all(Constraint::is_ground) && self.builtins.iter().all(Constraint::is_ground)
    }

    pub fn apply(&self, subst: &Substitution) -> ChrState {
        ChrState {
            goal: self.goal.iter().map(|c| c.apply(subst)).collect(),
            builtins: self.builtins.iter().map(|c| c.apply(subst)).collect(),
            globals: self.globals.clone(),
        }
    }

    /// Canonical one-line dump: `<goal ; builtins ; globals>`.
    pub fn dump(&self) -> String {
        let goal = self
            .goal
            .iter()
            .map(|c| format!("{c}"))
            .collect::<Vec<_>>()
            .join(", ");
        let builtins = if self.builtins.is_empty() {
            "true".to_owned()
        } else {
            self.builtins
                .iter()
                .map(|c| format!("{c}"))
                .collect::<Vec<_>>()
                .join(" /\\ ")
        };
        let globals = self
            .globals
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .join(", ");
        format!("<{goal} ; {builtins} ; {globals}>")
    }
}

impl fmt::Display for ChrState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.dump())
    }
}

/// A CHR simplification rule `name @ head <=> guard | body_chr, body_builtin`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChrRule {
    pub name: Symbol,
    pub head: Vec<Constraint>,
    pub guard: Vec<Constraint>,
    pub body_chr: Vec<Constraint>,
    pub body_builtin: Vec<Constraint>,
}

impl ChrRule {
    /// A variant with all variables renamed by `suffix`.
    pub fn rename_apart(&self, suffix: &str) -> ChrRule {
        ChrRule {
            name: self.name.clone(),
            head: self.head.iter().map(|c| c.rename(suffix)).collect(),
            guard: self.guard.iter().map(|c| c.rename(suffix)).collect(),
            body_chr: self.body_chr.iter().map(|c| c.rename(suffix)).collect(),
            body_builtin: self.body_builtin.iter().map(|c| c.rename(suffix)).collect(),
        }
    }

    pub fn head_and_guard_vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for c in self.head.iter().chain(&self.guard) {
            c.collect_vars(&mut out);
        }
        out
    }
}

impl fmt::Display for ChrRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |cs: &[Constraint], sep: &str| {
            cs.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(sep)
        };
        write!(f, "{} @ {} <=>", self.name, join(&self.head, ", "))?;
        if !self.guard.is_empty() {
            write!(f, " {} |", join(&self.guard, " /\\ "))?;
        }
        write!(f, " {}", join(&self.body_chr, ", "))?;
        if !self.body_builtin.is_empty() {
            write!(f, ", {}", join(&self.body_builtin, " /\\ "))?;
        }
        write!(f, ".")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TheoryError {
    /// The query contains a constraint symbol outside the restricted theory.
    OutsideTheory(Symbol),
    /// A built-in needed ground arguments but got variables.
    NonGround(Symbol),
}

impl fmt::Display for TheoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheoryError::OutsideTheory(s) => write!(f, "constraint {s} is outside the restricted theory"),
            TheoryError::NonGround(s) => write!(f, "built-in {s} requires ground arguments"),
        }
    }
}

impl core::error::Error for TheoryError {}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Brings a state into canonical normal form: solvable equalities are
/// applied as substitutions and removed (equalities that pin a global
/// variable are re-emitted, since dropping them would change the
/// equivalence class), local variables are renamed canonically, both
/// stores are sorted, and an unsatisfiable equality collapses the state
/// to the canonical failed state.
pub fn normalize(state: &ChrState) -> ChrState {
    if state.is_failed() {
        return ChrState::failed();
    }
    let globals = state.globals.clone();
    let mut subst = Substitution::new();
    let prefer = |v: &str| !globals.contains(v);
    let mut rest: Vec<Constraint> = Vec::new();
    for c in &state.builtins {
        if c.is_eq() {
            if unify(&mut subst, &c.args[0], &c.args[1], VarPolicy::TwoWay { prefer: &prefer }).is_err() {
                return ChrState::failed();
            }
        } else if c.functor == TOP {
            // neutral element of the conjunction
        } else {
            rest.push(c.clone());
        }
    }

    let mut goal: Vec<Constraint> = state.goal.iter().map(|c| c.apply(&subst)).collect();
    let mut builtins: Vec<Constraint> = rest.iter().map(|c| c.apply(&subst)).collect();
    // Equalities binding globals stay observable.
    for (v, t) in subst.iter() {
        if globals.contains(v) {
            builtins.push(Constraint::eq(Term::Var(v.clone()), t.clone()));
        }
    }

    let mut st = ChrState {
        goal,
        builtins,
        globals,
    };
    canonicalize(&mut st);
    // keep only globals that are still observable
    let occurring = st.vars();
    st.globals.retain(|g| occurring.contains(g));
    goal = st.goal;
    goal.sort();
    builtins = st.builtins;
    builtins.sort();
    builtins.dedup();
    ChrState {
        goal,
        builtins,
        globals: st.globals,
    }
}

/// Renames local variables to `_0, _1, ...` in first-occurrence order over
/// the name-blind sorted constraint list, iterating to a fixpoint so the
/// result does not depend on the incoming names.
fn canonicalize(state: &mut ChrState) {
    for _ in 0..8 {
        let locals = state.local_vars();
        if locals.is_empty() {
            state.goal.sort();
            state.builtins.sort();
            return;
        }
        state.goal.sort_by_key(|c| blanked_key(c, &state.globals));
        state.builtins.sort_by_key(|c| blanked_key(c, &state.globals));
        let mut order: Vec<Symbol> = Vec::new();
        let mut seen: BTreeSet<Symbol> = BTreeSet::new();
        for c in state.goal.iter().chain(&state.builtins) {
            let mut vs = BTreeSet::new();
            c.collect_vars(&mut vs);
            for v in first_occurrence_order(c) {
                if locals.contains(&v) && seen.insert(v.clone()) {
                    order.push(v);
                }
            }
            let _ = vs;
        }
        let mut renaming = Substitution::new();
        let mut changed = false;
        for (i, v) in order.iter().enumerate() {
            let fresh = format!("_{i}");
            if *v != fresh {
                changed = true;
            }
            // two-phase rename through a reserved alias to avoid capture
            renaming.bind(v, &Term::Var(format!("_tmp{i}"))).ok();
        }
        if !changed {
            state.goal.sort();
            state.builtins.sort();
            return;
        }
        let mut finish = Substitution::new();
        for i in 0..order.len() {
            finish.bind(&format!("_tmp{i}"), &Term::Var(format!("_{i}"))).ok();
        }
        let apply_both = |c: &Constraint| finish.apply(&renaming.apply(&c.as_term()));
        state.goal = state
            .goal
            .iter()
            .map(|c| term_to_constraint(apply_both(c)))
            .collect();
        state.builtins = state
            .builtins
            .iter()
            .map(|c| term_to_constraint(apply_both(c)))
            .collect();
    }
    state.goal.sort();
    state.builtins.sort();
}

fn term_to_constraint(t: Term) -> Constraint {
    match t {
        Term::App(functor, args) => Constraint { functor, args },
        other => Constraint::new(TOP, [other]), // unreachable for well-formed constraints
    }
}

/// Variables of a constraint in left-to-right first-occurrence order.
fn first_occurrence_order(c: &Constraint) -> Vec<Symbol> {
    fn walk(t: &Term, out: &mut Vec<Symbol>) {
        match t {
            Term::Const(_) | Term::Num(_) => {}
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Tuple(ts) | Term::App(_, ts) => ts.iter().for_each(|t| walk(t, out)),
            Term::Set(ts) => ts.iter().for_each(|t| walk(t, out)),
        }
    }
    let mut out = Vec::new();
    for a in &c.args {
        walk(a, &mut out);
    }
    out
}

/// Printable key that ignores local variable names: locals are replaced by
/// per-constraint de Bruijn indices, globals keep their names.
fn blanked_key(c: &Constraint, globals: &BTreeSet<Symbol>) -> String {
    fn walk(t: &Term, globals: &BTreeSet<Symbol>, seen: &mut Vec<Symbol>, out: &mut String) {
        match t {
            Term::Const(s) => {
                out.push('c');
                out.push_str(s);
            }
            Term::Num(d) => {
                out.push('n');
                out.push_str(&format!("{d}"));
            }
            Term::Var(v) => {
                if globals.contains(v) {
                    out.push('g');
                    out.push_str(v);
                } else {
                    let idx = match seen.iter().position(|s| s == v) {
                        Some(i) => i,
                        None => {
                            seen.push(v.clone());
                            seen.len() - 1
                        }
                    };
                    out.push_str(&format!("v{idx}"));
                }
            }
            Term::Tuple(ts) => {
                out.push('(');
                for t in ts {
                    walk(t, globals, seen, out);
                    out.push(',');
                }
                out.push(')');
            }
            Term::Set(ts) => {
                out.push('{');
                let mut keys: Vec<String> = ts
                    .iter()
                    .map(|t| {
                        let mut s = String::new();
                        let mut inner = seen.clone();
                        walk(t, globals, &mut inner, &mut s);
                        s
                    })
                    .collect();
                keys.sort();
                for k in keys {
                    out.push_str(&k);
                    out.push(',');
                }
                // second pass to extend `seen` deterministically
                let mut items: Vec<&Term> = ts.iter().collect();
                items.sort();
                for t in items {
                    let mut sink = String::new();
                    walk(t, globals, seen, &mut sink);
                }
                out.push('}');
            }
            Term::App(f, ts) => {
                out.push_str(f);
                out.push('(');
                for t in ts {
                    walk(t, globals, seen, out);
                    out.push(',');
                }
                out.push(')');
            }
        }
    }
    let mut out = String::new();
    out.push_str(&c.functor);
    out.push('/');
    let mut seen = Vec::new();
    for a in &c.args {
        walk(a, globals, &mut seen, &mut out);
    }
    out
}

// ---------------------------------------------------------------------------
// State equivalence
// ---------------------------------------------------------------------------

/// Decides state equivalence: equal normal forms up to a consistent
/// renaming of local variables and multiset reordering. Global variables
/// are rigid and must agree by name.
pub fn states_equivalent(a: &ChrState, b: &ChrState) -> bool {
    let na = normalize(a);
    let nb = normalize(b);
    if na.is_failed() || nb.is_failed() {
        return na.is_failed() && nb.is_failed();
    }
    if na.globals != nb.globals {
        return false;
    }
    if na.goal.len() != nb.goal.len() || na.builtins.len() != nb.builtins.len() {
        return false;
    }
    if na == nb {
        return true;
    }
    // completeness net: exact backtracking search over local bijections,
    // with full backtracking through nested set pairings
    let goal_a: Vec<Term> = na.goal.iter().map(Constraint::as_term).collect();
    let goal_b: Vec<Term> = nb.goal.iter().map(Constraint::as_term).collect();
    let bi_a: Vec<Term> = na.builtins.iter().map(Constraint::as_term).collect();
    let bi_b: Vec<Term> = nb.builtins.iter().map(Constraint::as_term).collect();
    let bij = Bij::default();
    multiset_bij(&goal_a, &goal_b, &na.globals, &bij, &mut |bij| {
        multiset_bij(&bi_a, &bi_b, &na.globals, bij, &mut |_| true)
    })
}

/// A variable bijection carried through the search, kept in both
/// directions for injectivity.
#[derive(Clone, Debug, Default)]
struct Bij {
    fwd: BTreeMap<Symbol, Symbol>,
    rev: BTreeMap<Symbol, Symbol>,
}

impl Bij {
    fn extend(&self, x: &str, y: &str) -> Option<Bij> {
        match (self.fwd.get(x), self.rev.get(y)) {
            (Some(mapped), Some(back)) => (mapped == y && back == x).then(|| self.clone()),
            (None, None) => {
                let mut next = self.clone();
                next.fwd.insert(x.to_owned(), y.to_owned());
                next.rev.insert(y.to_owned(), x.to_owned());
                Some(next)
            }
            _ => None,
        }
    }
}

/// Matches two equal-length term multisets under every pairing, calling
/// the continuation with each extension of the bijection until one
/// succeeds.
fn multiset_bij(
    left: &[Term],
    right: &[Term],
    globals: &BTreeSet<Symbol>,
    bij: &Bij,
    k: &mut dyn FnMut(&Bij) -> bool,
) -> bool {
    if left.len() != right.len() {
        return false;
    }
    fn go(
        left: &[Term],
        right: &[Term],
        used: &mut Vec<bool>,
        idx: usize,
        globals: &BTreeSet<Symbol>,
        bij: &Bij,
        k: &mut dyn FnMut(&Bij) -> bool,
    ) -> bool {
        if idx == left.len() {
            return k(bij);
        }
        for j in 0..right.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            let pairs = alloc::vec![(left[idx].clone(), right[j].clone())];
            let done = pairs_bij(&pairs, globals, bij, &mut |bij| {
                go(left, right, used, idx + 1, globals, bij, k)
            });
            used[j] = false;
            if done {
                return true;
            }
        }
        false
    }
    let mut used = alloc::vec![false; right.len()];
    go(left, right, &mut used, 0, globals, bij, k)
}

/// Matches a sequence of term pairs, threading the bijection through the
/// continuation so every choice point backtracks.
fn pairs_bij(
    pairs: &[(Term, Term)],
    globals: &BTreeSet<Symbol>,
    bij: &Bij,
    k: &mut dyn FnMut(&Bij) -> bool,
) -> bool {
    let Some(((a, b), rest)) = pairs.split_first() else {
        return k(bij);
    };
    match (a, b) {
        (Term::Const(x), Term::Const(y)) => x == y && pairs_bij(rest, globals, bij, k),
        (Term::Num(x), Term::Num(y)) => x == y && pairs_bij(rest, globals, bij, k),
        (Term::Var(x), Term::Var(y)) => {
            let gx = globals.contains(x);
            let gy = globals.contains(y);
            if gx || gy {
                return gx && gy && x == y && pairs_bij(rest, globals, bij, k);
            }
            match bij.extend(x, y) {
                Some(next) => pairs_bij(rest, globals, &next, k),
                None => false,
            }
        }
        (Term::Tuple(xs), Term::Tuple(ys)) => {
            if xs.len() != ys.len() {
                return false;
            }
            let mut next: Vec<(Term, Term)> =
                xs.iter().cloned().zip(ys.iter().cloned()).collect();
            next.extend_from_slice(rest);
            pairs_bij(&next, globals, bij, k)
        }
        (Term::App(fa, xs), Term::App(fb, ys)) => {
            if fa != fb || xs.len() != ys.len() {
                return false;
            }
            let mut next: Vec<(Term, Term)> =
                xs.iter().cloned().zip(ys.iter().cloned()).collect();
            next.extend_from_slice(rest);
            pairs_bij(&next, globals, bij, k)
        }
        (Term::Set(xs), Term::Set(ys)) => {
            if xs.len() != ys.len() {
                return false;
            }
            // ground sets compare structurally
            if xs.iter().all(Term::is_ground) && ys.iter().all(Term::is_ground) {
                return xs == ys && pairs_bij(rest, globals, bij, k);
            }
            let xs: Vec<Term> = xs.iter().cloned().collect();
            let ys: Vec<Term> = ys.iter().cloned().collect();
            let rest = rest.to_owned();
            multiset_bij(&xs, &ys, globals, bij, &mut |bij| {
                pairs_bij(&rest, globals, bij, k)
            })
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Entailment / constraint solving for the restricted theory
// ---------------------------------------------------------------------------

/// Solves `query` under the built-in store `env`: returns one substitution
/// per solution, with output arguments of the executable built-ins bound.
/// `fact_arities`, when given, is the declared signature of the opaque
/// architecture facts; queries outside the restricted theory are rejected.
pub fn solve(
    env: &[Constraint],
    query: &[Constraint],
    seed: &Substitution,
    fact_arities: Option<&BTreeMap<Symbol, usize>>,
) -> Result<Vec<Substitution>, TheoryError> {
    // fold env equalities into the seed so guards see pinned globals
    let mut base = seed.clone();
    let mut facts: Vec<&Constraint> = Vec::new();
    for c in env {
        if c.is_eq() {
            if unify(&mut base, &c.args[0], &c.args[1], VarPolicy::TwoWay { prefer: &|_| true }).is_err() {
                return Ok(Vec::new()); // inconsistent store entails nothing satisfiable
            }
        } else if c.functor == BOT {
            return Ok(Vec::new());
        } else if c.functor != TOP {
            facts.push(c);
        }
    }
    let mut out = Vec::new();
    solve_rec(&facts, query, base, fact_arities, &mut out)?;
    out.dedup();
    Ok(out)
}

fn solve_rec(
    facts: &[&Constraint],
    query: &[Constraint],
    subst: Substitution,
    fact_arities: Option<&BTreeMap<Symbol, usize>>,
    out: &mut Vec<Substitution>,
) -> Result<(), TheoryError> {
    let Some((first, rest)) = query.split_first() else {
        out.push(subst);
        return Ok(());
    };
    let c = first.apply(&subst);
    match c.functor.as_str() {
        TOP => solve_rec(facts, rest, subst, fact_arities, out),
        BOT => Ok(()),
        EQ => {
            let mut s = subst.clone();
            if unify(&mut s, &c.args[0], &c.args[1], VarPolicy::TwoWay { prefer: &|_| true }).is_ok() {
                solve_rec(facts, rest, s, fact_arities, out)?;
            }
            Ok(())
        }
        IN => {
            let store = &c.args[1];
            let Term::Set(items) = store else {
                return if store.is_ground() {
                    Err(TheoryError::NonGround(IN.to_owned()))
                } else {
                    Ok(()) // membership in an unbound store is not entailed
                };
            };
            for item in items {
                let mut s = subst.clone();
                if unify(&mut s, &c.args[0], item, VarPolicy::TwoWay { prefer: &|_| true }).is_ok() {
                    solve_rec(facts, rest, s, fact_arities, out)?;
                }
            }
            Ok(())
        }
        ACTION => {
            for s in crate::translate::solve_action(&c, &subst)? {
                solve_rec(facts, rest, s, fact_arities, out)?;
            }
            Ok(())
        }
        MERGE => {
            for s in crate::translate::solve_merge(&c, &subst)? {
                solve_rec(facts, rest, s, fact_arities, out)?;
            }
            Ok(())
        }
        MAP => {
            for s in crate::translate::solve_map(&c, &subst)? {
                solve_rec(facts, rest, s, fact_arities, out)?;
            }
            Ok(())
        }
        other => {
            if let Some(sigs) = fact_arities {
                if sigs.get(other) != Some(&c.args.len()) {
                    return Err(TheoryError::OutsideTheory(other.to_owned()));
                }
            }
            for f in facts {
                if f.functor != c.functor || f.args.len() != c.args.len() {
                    continue;
                }
                let mut s = subst.clone();
                if unify(&mut s, &c.as_term(), &f.as_term(), VarPolicy::TwoWay { prefer: &|_| true }).is_ok() {
                    solve_rec(facts, rest, s, fact_arities, out)?;
                }
            }
            Ok(())
        }
    }
}

/// Decides whether the built-in store entails the query (existentially in
/// the query's fresh variables), executing the store built-ins on ground
/// arguments.
pub fn entails(
    env: &[Constraint],
    query: &[Constraint],
    fact_arities: Option<&BTreeMap<Symbol, usize>>,
) -> Result<bool, TheoryError> {
    Ok(!solve(env, query, &Substitution::new(), fact_arities)?.is_empty())
}

// ---------------------------------------------------------------------------
// Rule matching (transition scheme)
// ---------------------------------------------------------------------------

/// All ways the rule fires on the state: one entry per injective matching
/// of head constraints into the goal whose guard is entailed by the state
/// built-ins. The returned state is the post-transition state
/// `<body_chr + rest ; guard /\ body_builtin /\ builtins ; globals>`,
/// normalized, with the rule's built-ins still symbolic.
///
/// The rule must be renamed apart from the state's variables.
pub fn match_rule(state: &ChrState, rule: &ChrRule) -> Vec<(Substitution, ChrState)> {
    let mut results: Vec<(Substitution, ChrState)> = Vec::new();
    let goal_terms: Vec<Term> = state.goal.iter().map(Constraint::as_term).collect();
    let mut used = alloc::vec![false; goal_terms.len()];
    let mut stack_subst = Substitution::new();
    match_heads(
        state,
        rule,
        &goal_terms,
        0,
        &mut used,
        &mut stack_subst,
        &mut results,
    );
    results.dedup_by(|a, b| a.1 == b.1 && a.0 == b.0);
    results
}

#[allow(clippy::too_many_arguments)]
fn match_heads(
    state: &ChrState,
    rule: &ChrRule,
    goal_terms: &[Term],
    head_idx: usize,
    used: &mut Vec<bool>,
    subst: &mut Substitution,
    results: &mut Vec<(Substitution, ChrState)>,
) {
    if head_idx == rule.head.len() {
        // heads matched; check the guard against the state built-ins
        let guard: Vec<Constraint> = rule.guard.iter().map(|c| c.apply(subst)).collect();
        let Ok(solutions) = solve(&state.builtins, &guard, subst, None) else {
            return;
        };
        for sol in solutions {
            let mut goal: Vec<Constraint> = rule.body_chr.iter().map(|c| c.apply(&sol)).collect();
            for (i, c) in state.goal.iter().enumerate() {
                if !used[i] {
                    goal.push(c.apply(&sol));
                }
            }
            let mut builtins: Vec<Constraint> = rule.guard.iter().map(|c| c.apply(&sol)).collect();
            builtins.extend(rule.body_builtin.iter().map(|c| c.apply(&sol)));
            builtins.extend(state.builtins.iter().map(|c| c.apply(&sol)));
            let post = normalize(&ChrState {
                goal,
                builtins,
                globals: state.globals.clone(),
            });
            results.push((sol, post));
        }
        return;
    }
    let head = &rule.head[head_idx];
    for (i, gt) in goal_terms.iter().enumerate() {
        if used[i] {
            continue;
        }
        let save = subst.clone();
        if unify(subst, &head.as_term(), gt, VarPolicy::MatchOnly).is_ok() {
            used[i] = true;
            match_heads(state, rule, goal_terms, head_idx + 1, used, subst, results);
            used[i] = false;
        }
        *subst = save;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Delay;

    fn ground_state(goal: Vec<Constraint>, builtins: Vec<Constraint>) -> ChrState {
        ChrState::new(goal, builtins, BTreeSet::new())
    }

    #[test]
    fn normalize_applies_equalities() {
        // <{gamma(goal, C, 0)} ; C = c1 ; {}>  ->  <{gamma(goal, c1, 0)} ; true ; {}>
        let st = ground_state(
            alloc::vec![Constraint::gamma(
                Term::cst("goal"),
                Term::var("C"),
                Term::Num(Delay::zero())
            )],
            alloc::vec![Constraint::eq(Term::var("C"), Term::cst("c1"))],
        );
        let n = normalize(&st);
        assert_eq!(
            n.goal,
            alloc::vec![Constraint::gamma(
                Term::cst("goal"),
                Term::cst("c1"),
                Term::Num(Delay::zero())
            )]
        );
        assert!(n.builtins.is_empty());
    }

    #[test]
    fn normalize_collapses_clash_to_failed_state() {
        let st = ground_state(
            alloc::vec![Constraint::delta(Term::var("D"))],
            alloc::vec![Constraint::eq(Term::cst("c1"), Term::cst("c2"))],
        );
        assert_eq!(normalize(&st), ChrState::failed());
        assert!(normalize(&st).is_failed());
    }

    #[test]
    fn normalize_renames_locals_canonically() {
        let a = ground_state(
            alloc::vec![Constraint::delta(Term::var("D"))],
            alloc::vec![],
        );
        let b = ground_state(
            alloc::vec![Constraint::delta(Term::var("E"))],
            alloc::vec![],
        );
        assert_eq!(normalize(&a), normalize(&b));
    }

    #[test]
    fn normalize_is_idempotent_on_samples() {
        let st = ChrState::new(
            alloc::vec![
                Constraint::gamma(Term::cst("goal"), Term::var("Zq"), Term::var("E")),
                Constraint::delta(Term::var("Dd")),
            ],
            alloc::vec![
                Constraint::eq(Term::var("E"), Term::Num(Delay::zero())),
                Constraint::in_store(
                    Term::app("chunk", [Term::var("Zq"), Term::cst("g"), Term::var("P")]),
                    Term::var("Dd"),
                ),
            ],
            BTreeSet::from(["Dd".to_owned()]),
        );
        let once = normalize(&st);
        let twice = normalize(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn equivalence_respects_local_renaming_only() {
        let mk = |v: &str, global: bool| {
            let globals = if global {
                BTreeSet::from([v.to_owned()])
            } else {
                BTreeSet::new()
            };
            ChrState::new(
                alloc::vec![Constraint::delta(Term::var(v))],
                alloc::vec![],
                globals,
            )
        };
        assert!(states_equivalent(&mk("D", false), &mk("E", false)));
        // rigid globals: different names are observable
        assert!(!states_equivalent(&mk("D", true), &mk("E", true)));
        // reflexivity
        assert!(states_equivalent(&mk("D", true), &mk("D", true)));
    }

    #[test]
    fn equivalence_distinguishes_delays() {
        let mk = |d: Delay| {
            ground_state(
                alloc::vec![Constraint::gamma(
                    Term::cst("goal"),
                    Term::cst("c1"),
                    Term::Num(d)
                )],
                alloc::vec![],
            )
        };
        assert!(!states_equivalent(&mk(Delay::zero()), &mk(Delay::from_integer(1))));
        assert!(states_equivalent(&mk(Delay::zero()), &mk(Delay::zero())));
    }

    #[test]
    fn entails_examples() {
        // x = 1 entails x = 1
        let env = alloc::vec![Constraint::eq(Term::var("X"), Term::Num(Delay::from_integer(1)))];
        let q = alloc::vec![Constraint::eq(Term::var("X"), Term::Num(Delay::from_integer(1)))];
        assert!(entails(&env, &q, None).unwrap());

        // top does not entail c1 = c2
        let q = alloc::vec![Constraint::eq(Term::cst("c1"), Term::cst("c2"))];
        assert!(!entails(&[], &q, None).unwrap());
    }

    #[test]
    fn solve_binds_membership_outputs() {
        // D = {chunk(c1, g, {(current, one)})} entails chunk(C, g, {(current, X)}) in D
        let store = Term::set([Term::app(
            "chunk",
            [
                Term::cst("c1"),
                Term::cst("g"),
                Term::set([Term::pair(Term::cst("current"), Term::cst("one"))]),
            ],
        )]);
        let query = alloc::vec![Constraint::in_store(
            Term::app(
                "chunk",
                [
                    Term::var("C"),
                    Term::cst("g"),
                    Term::set([Term::pair(Term::cst("current"), Term::var("X"))]),
                ],
            ),
            store,
        )];
        let sols = solve(&[], &query, &Substitution::new(), None).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].apply(&Term::var("C")), Term::cst("c1"));
        assert_eq!(sols[0].apply(&Term::var("X")), Term::cst("one"));
    }

    #[test]
    fn entails_rejects_symbols_outside_theory() {
        let sigs: BTreeMap<Symbol, usize> = BTreeMap::from([("p".to_owned(), 1)]);
        let q = alloc::vec![Constraint::new("q", [Term::cst("a")])];
        assert!(matches!(
            entails(&[], &q, Some(&sigs)),
            Err(TheoryError::OutsideTheory(_))
        ));
        // declared fact: membership check
        let env = alloc::vec![Constraint::new("p", [Term::cst("a")])];
        let q = alloc::vec![Constraint::new("p", [Term::cst("a")])];
        assert!(entails(&env, &q, Some(&sigs)).unwrap());
    }

    #[test]
    fn match_rule_on_empty_goal_is_empty() {
        let rule = ChrRule {
            name: "r".to_owned(),
            head: alloc::vec![Constraint::delta(Term::var("D"))],
            guard: alloc::vec![],
            body_chr: alloc::vec![],
            body_builtin: alloc::vec![],
        };
        let st = ground_state(alloc::vec![], alloc::vec![]);
        assert!(match_rule(&st, &rule).is_empty());
    }
}

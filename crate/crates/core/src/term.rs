//! First-order terms over constants and variables.
//!
//! Terms are the common currency of the whole analyzer: chunk stores,
//! slot-value pairs, buffer contents and built-in constraints are all
//! rendered as terms. The ordering on terms is total and deterministic
//! (constants before compound terms, then lexicographic by functor,
//! arity and arguments); sets are kept sorted under it, which gives
//! canonical printed forms everywhere.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_rational::Ratio;

/// Interned-by-value symbol. Plain strings keep the desk-scale engine simple.
pub type Symbol = String;

/// Exact non-negative delay attached to buffer contents.
///
/// Only equality with zero is ever semantically relevant, but delays are
/// kept as exact rationals so that states print and compare exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Delay(Ratio<u64>);

impl Delay {
    pub fn zero() -> Self {
        Delay(Ratio::from_integer(0))
    }

    pub fn new(numer: u64, denom: u64) -> Self {
        Delay(Ratio::new(numer, denom))
    }

    pub fn from_integer(n: u64) -> Self {
        Delay(Ratio::from_integer(n))
    }

    pub fn is_zero(&self) -> bool {
        *self.0.numer() == 0
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

/// A first-order term. Variables start with an uppercase letter in the
/// concrete syntax; in memory the distinction is structural.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// Constant symbol (chunk identifiers, buffer/type/slot names, ...).
    Const(Symbol),
    /// Numeric constant (delays).
    Num(Delay),
    /// Variable.
    Var(Symbol),
    /// Fixed-length tuple, e.g. a slot-value pair `(first, 1)`.
    Tuple(Vec<Term>),
    /// Finite set of terms, kept sorted; used for slot-value sets and
    /// chunk stores.
    Set(BTreeSet<Term>),
    /// Compound term `f(t1, ..., tn)`.
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn cst(s: &str) -> Term {
        Term::Const(s.to_owned())
    }

    pub fn var(s: &str) -> Term {
        Term::Var(s.to_owned())
    }

    pub fn pair(a: Term, b: Term) -> Term {
        Term::Tuple(alloc::vec![a, b])
    }

    pub fn set<I: IntoIterator<Item = Term>>(items: I) -> Term {
        Term::Set(items.into_iter().collect())
    }

    pub fn app<I: IntoIterator<Item = Term>>(functor: &str, args: I) -> Term {
        Term::App(functor.to_owned(), args.into_iter().collect())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Const(_) | Term::Num(_) => true,
            Term::Var(_) => false,
            Term::Tuple(ts) | Term::App(_, ts) => ts.iter().all(Term::is_ground),
            Term::Set(ts) => ts.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Term::Const(_) | Term::Num(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Tuple(ts) | Term::App(_, ts) => {
                for t in ts {
                    t.collect_vars(out);
                }
            }
            Term::Set(ts) => {
                for t in ts {
                    t.collect_vars(out);
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn contains_var(&self, name: &str) -> bool {
        match self {
            Term::Const(_) | Term::Num(_) => false,
            Term::Var(v) => v == name,
            Term::Tuple(ts) | Term::App(_, ts) => ts.iter().any(|t| t.contains_var(name)),
            Term::Set(ts) => ts.iter().any(|t| t.contains_var(name)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(s) => write!(f, "{s}"),
            Term::Num(d) => write!(f, "{d}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Tuple(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Term::Set(ts) => {
                write!(f, "{{")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "}}")
            }
            Term::App(functor, args) => {
                write!(f, "{functor}(")?;
                for (i, t) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Idempotent, acyclic variable binding.
///
/// Bindings are kept fully resolved: inserting `x -> t` first applies the
/// current substitution to `t` and then rewrites existing right-hand
/// sides, so applying a substitution once always reaches a fixpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Symbol, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, v: &str) -> Option<&Term> {
        self.map.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Term)> {
        self.map.iter()
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Const(_) | Term::Num(_) => t.clone(),
            Term::Var(v) => self.map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Tuple(ts) => Term::Tuple(ts.iter().map(|t| self.apply(t)).collect()),
            Term::App(functor, ts) => {
                Term::App(functor.clone(), ts.iter().map(|t| self.apply(t)).collect())
            }
            Term::Set(ts) => Term::Set(ts.iter().map(|t| self.apply(t)).collect()),
        }
    }

    /// Binds `v` to `t`. Fails on occurs-check violations.
    pub fn bind(&mut self, v: &str, t: &Term) -> Result<(), UnifyError> {
        let resolved = self.apply(t);
        if let Term::Var(w) = &resolved {
            if w == v {
                return Ok(());
            }
        }
        if resolved.contains_var(v) {
            return Err(UnifyError::OccursCheck(v.to_owned()));
        }
        let single = Substitution {
            map: core::iter::once((v.to_owned(), resolved.clone())).collect(),
        };
        for rhs in self.map.values_mut() {
            *rhs = single.apply(rhs);
        }
        self.map.insert(v.to_owned(), resolved);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnifyError {
    Clash,
    OccursCheck(Symbol),
}

impl fmt::Display for UnifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnifyError::Clash => write!(f, "terms do not unify"),
            UnifyError::OccursCheck(v) => write!(f, "occurs check failed on {v}"),
        }
    }
}

impl core::error::Error for UnifyError {}

/// Which variables a unification step may eliminate.
#[derive(Clone, Copy)]
pub enum VarPolicy<'a> {
    /// Any variable may be bound; `prefer` marks variables to eliminate
    /// first when two variables meet (rule-local before state-global).
    TwoWay { prefer: &'a dyn Fn(&str) -> bool },
    /// Only pattern-side variables bind; target-side structure is rigid.
    MatchOnly,
}

/// Unifies `a` (pattern side) with `b` (target side) under `subst`.
pub fn unify(subst: &mut Substitution, a: &Term, b: &Term, policy: VarPolicy) -> Result<(), UnifyError> {
    let ra = subst.apply(a);
    let rb = subst.apply(b);
    match (&ra, &rb) {
        (Term::Var(x), Term::Var(y)) if x == y => Ok(()),
        (Term::Var(x), Term::Var(y)) => match policy {
            VarPolicy::TwoWay { prefer } => {
                if prefer(x) || !prefer(y) {
                    subst.bind(x, &rb)
                } else {
                    subst.bind(y, &ra)
                }
            }
            VarPolicy::MatchOnly => subst.bind(x, &rb),
        },
        (Term::Var(x), t) => subst.bind(x, t),
        (t, Term::Var(y)) => match policy {
            VarPolicy::TwoWay { .. } => subst.bind(y, t),
            VarPolicy::MatchOnly => Err(UnifyError::Clash),
        },
        (Term::Const(a), Term::Const(b)) => {
            if a == b {
                Ok(())
            } else {
                Err(UnifyError::Clash)
            }
        }
        (Term::Num(a), Term::Num(b)) => {
            if a == b {
                Ok(())
            } else {
                Err(UnifyError::Clash)
            }
        }
        (Term::Tuple(xs), Term::Tuple(ys)) => {
            if xs.len() != ys.len() {
                return Err(UnifyError::Clash);
            }
            for (x, y) in xs.iter().zip(ys) {
                unify(subst, x, y, policy)?;
            }
            Ok(())
        }
        (Term::App(fa, xs), Term::App(fb, ys)) => {
            if fa != fb || xs.len() != ys.len() {
                return Err(UnifyError::Clash);
            }
            for (x, y) in xs.iter().zip(ys) {
                unify(subst, x, y, policy)?;
            }
            Ok(())
        }
        (Term::Set(xs), Term::Set(ys)) => unify_sets(subst, xs, ys, policy),
        _ => Err(UnifyError::Clash),
    }
}

/// Set unification. Ground sets compare structurally; non-ground sets are
/// supported only in the keyed-pair shape `{(slot, value), ...}` produced
/// by slot tests, where elements are matched by their ground first
/// component.
fn unify_sets(
    subst: &mut Substitution,
    xs: &BTreeSet<Term>,
    ys: &BTreeSet<Term>,
    policy: VarPolicy,
) -> Result<(), UnifyError> {
    let xs: BTreeSet<Term> = xs.iter().map(|t| subst.apply(t)).collect();
    let ys: BTreeSet<Term> = ys.iter().map(|t| subst.apply(t)).collect();
    if xs.iter().all(Term::is_ground) && ys.iter().all(Term::is_ground) {
        return if xs == ys { Ok(()) } else { Err(UnifyError::Clash) };
    }
    let (kx, ky) = match (keyed_pairs(&xs), keyed_pairs(&ys)) {
        (Some(kx), Some(ky)) => (kx, ky),
        _ => return Err(UnifyError::Clash),
    };
    if kx.len() != ky.len() || kx.keys().ne(ky.keys()) {
        return Err(UnifyError::Clash);
    }
    for (k, vx) in &kx {
        unify(subst, vx, &ky[k], policy)?;
    }
    Ok(())
}

/// Views a set as `{(const_key, value)}` if every element has that shape
/// and keys are distinct.
fn keyed_pairs(items: &BTreeSet<Term>) -> Option<BTreeMap<Symbol, Term>> {
    let mut out = BTreeMap::new();
    for item in items {
        match item {
            Term::Tuple(kv) if kv.len() == 2 => {
                if let Term::Const(k) = &kv[0] {
                    if out.insert(k.clone(), kv[1].clone()).is_some() {
                        return None;
                    }
                } else {
                    return None;
                }
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Renames every variable in `t` by appending `suffix`.
pub fn rename_vars(t: &Term, suffix: &str) -> Term {
    match t {
        Term::Const(_) | Term::Num(_) => t.clone(),
        Term::Var(v) => {
            let mut name = v.clone();
            name.push_str(suffix);
            Term::Var(name)
        }
        Term::Tuple(ts) => Term::Tuple(ts.iter().map(|t| rename_vars(t, suffix)).collect()),
        Term::App(f, ts) => Term::App(f.clone(), ts.iter().map(|t| rename_vars(t, suffix)).collect()),
        Term::Set(ts) => Term::Set(ts.iter().map(|t| rename_vars(t, suffix)).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_way() -> VarPolicy<'static> {
        VarPolicy::TwoWay { prefer: &|_| false }
    }

    #[test]
    fn unify_binds_variables() {
        let mut s = Substitution::new();
        unify(&mut s, &Term::var("X"), &Term::cst("c1"), two_way()).unwrap();
        assert_eq!(s.apply(&Term::var("X")), Term::cst("c1"));
    }

    #[test]
    fn unify_detects_constant_clash() {
        let mut s = Substitution::new();
        let r = unify(&mut s, &Term::cst("c1"), &Term::cst("c2"), two_way());
        assert_eq!(r, Err(UnifyError::Clash));
    }

    #[test]
    fn unify_compound_propagates() {
        let mut s = Substitution::new();
        let a = Term::app("chunk", [Term::var("C"), Term::cst("g"), Term::var("P")]);
        let b = Term::app(
            "chunk",
            [
                Term::cst("c1"),
                Term::cst("g"),
                Term::set([Term::pair(Term::cst("current"), Term::cst("one"))]),
            ],
        );
        unify(&mut s, &a, &b, two_way()).unwrap();
        assert_eq!(s.apply(&a), b);
    }

    #[test]
    fn keyed_set_unification_matches_by_slot() {
        let mut s = Substitution::new();
        let pattern = Term::set([
            Term::pair(Term::cst("first"), Term::var("X")),
            Term::pair(Term::cst("second"), Term::var("Y")),
        ]);
        let ground = Term::set([
            Term::pair(Term::cst("first"), Term::cst("1")),
            Term::pair(Term::cst("second"), Term::cst("2")),
        ]);
        unify(&mut s, &pattern, &ground, two_way()).unwrap();
        assert_eq!(s.apply(&Term::var("X")), Term::cst("1"));
        assert_eq!(s.apply(&Term::var("Y")), Term::cst("2"));
    }

    #[test]
    fn match_only_never_binds_target_side() {
        let mut s = Substitution::new();
        let r = unify(&mut s, &Term::cst("c"), &Term::var("S"), VarPolicy::MatchOnly);
        assert_eq!(r, Err(UnifyError::Clash));
        // pattern variable may still bind to a target variable
        let mut s = Substitution::new();
        unify(&mut s, &Term::var("P"), &Term::var("S"), VarPolicy::MatchOnly).unwrap();
        assert_eq!(s.apply(&Term::var("P")), Term::var("S"));
    }

    #[test]
    fn substitution_stays_idempotent() {
        let mut s = Substitution::new();
        s.bind("X", &Term::var("Y")).unwrap();
        s.bind("Y", &Term::cst("c")).unwrap();
        assert_eq!(s.apply(&Term::var("X")), Term::cst("c"));
        assert_eq!(s.apply(&s.apply(&Term::var("X"))), Term::cst("c"));
    }

    #[test]
    fn occurs_check_rejects_cycles() {
        let mut s = Substitution::new();
        let r = s.bind("X", &Term::app("f", [Term::var("X")]));
        assert!(matches!(r, Err(UnifyError::OccursCheck(_))));
    }

    #[test]
    fn display_is_canonical() {
        let t = Term::app(
            "delta",
            [Term::set([
                Term::pair(Term::cst("second"), Term::cst("2")),
                Term::pair(Term::cst("first"), Term::cst("1")),
            ])],
        );
        assert_eq!(alloc::format!("{t}"), "delta({(first, 1), (second, 2)})");
        assert_eq!(alloc::format!("{}", Delay::new(1, 2)), "1/2");
        assert_eq!(alloc::format!("{}", Delay::zero()), "0");
    }
}

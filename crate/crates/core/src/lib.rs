//! Confluence analysis for terminating ACT-R cognitive models.
//!
//! The pipeline: an ACT-R model (typed chunks in buffers, production
//! rules in set normal form) is translated into CHR simplification
//! rules; rule pairs are overlapped into critical pairs; overlap states
//! that cannot come from any valid ACT-R state are pruned by a decidable
//! invariant; the remaining critical pairs are instantiated and tested
//! for joinability by bounded breadth-first search. A model whose
//! non-pruned critical pairs all join is confluent (assuming it
//! terminates), and a failed pair pinpoints the rule pair and the two
//! diverging derivations.
//!
//! The crate is `no_std` (with `alloc`); parsing, file formats and the
//! command line live in the companion `actr-confluence` crate.

#![no_std]

extern crate alloc;

pub mod actr;
pub mod chr;
pub mod confluence;
pub mod gen;
pub mod invariants;
pub mod term;
pub mod translate;

pub use actr::{
    actr_step, to_set_normal_form, ActionKind, ActrModel, ActrRule, ActrState, ActrValue,
    BufferTest, Chunk, ChunkStore, ChunkType, Fact, ModelSig, ValidationError,
};
pub use chr::{entails, match_rule, normalize, states_equivalent, ChrRule, ChrState, Constraint};
pub use confluence::{
    check_confluence, compute_overlaps, critical_pair_of, joinable, CheckOptions, ConfluenceReport,
    CriticalPair, JoinStatus, JoinVerdict, Overlap, OverlapReport, PruneReason, Verdict,
};
pub use invariants::{
    check_a, check_a1, check_a2, check_a3, check_a4, check_a5, reconstruct_actr, satisfiable_a,
    InvariantVerdict, SubInvariant,
};
pub use term::{Delay, Substitution, Symbol, Term};
pub use translate::{
    apply_actions, chr_successors, exec_action, map_id, merge_stores, translate_rule,
    translate_state, ActionSpec, ChunkTerm, StepOutcome, NIL_ID, NIL_TYPE,
};

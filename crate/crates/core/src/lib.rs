//! Transformation-based learning with incremental rule scoring.
//!
//! A corpus of labelled sequences is loaded with [`Corpus::load`], given
//! initial classes, and trained with one of three learners:
//! [`train_regular`] (recomputes every candidate each iteration),
//! [`train_fast`] (keeps counts in a [`RuleStore`] and updates them only
//! around changed samples) and [`train_ica`] (each sample changes at most
//! once). The regular and fast learners produce identical rule lists.

pub mod bench;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fast;
pub mod learner;
pub mod predicates;
pub mod rules;
pub mod rulestore;
pub mod symbols;
pub mod synth;

pub use corpus::{assign_initial, Corpus, CorpusBuilder, InitMode, InitModel, Row, Schema};
pub use error::{Result, TblError};
pub use eval::{accuracy, apply_rule_list, chunk_f1, sign_test, ApplyMode, EvalReport, SignLevel};
pub use fast::{oracle_recount, train_fast, train_fast_with_store, update_for_sample, UpdateContext};
pub use learner::{apply_rule_simultaneous, train, train_ica, train_regular, Algo, TrainConfig};
pub use predicates::{dynamic_radius, parse_templates, ClassView, Predicate, Template};
pub use rules::{IterationRecord, LearnedRule, RuleList, TrainReport};
pub use rulestore::{CountKind, Counts, Materialized, Rule, RuleId, RuleStore};
pub use symbols::{Sym, SymbolTable};
pub use synth::{gen_synth, SynthSpec};

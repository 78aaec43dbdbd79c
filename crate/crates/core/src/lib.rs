//! Unsupervised construction grammar induction over unannotated corpora.
//!
//! A construction is an ordered sequence of slots, each constrained at one
//! of three representation lines: lexical word-forms, syntactic tags, or
//! semantic domains clustered from word embeddings. Grammar quality is the
//! minimum description length of the grammar plus the corpus encoded with
//! it, and a three-pass tabu search (lexical, syntactic, full) finds the
//! grammar minimizing that metric.
//!
//! Modules follow the pipeline: [`corpus`] ingests and segments data,
//! [`grammar`] defines constructions and matching, [`assoc`] extracts and
//! scores candidates, [`encoder`] prices grammars and corpora in nats,
//! [`search`] runs the tabu searches, and [`pipeline`] ties passes, folds,
//! and restarts together.

pub mod assoc;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod grammar;
pub mod pipeline;
pub mod search;

pub use corpus::{AnnotatedCorpus, Rep, SegmentScheme, SemanticMap, Unit, UnitTriple, Vocab};
pub use encoder::{Coverage, DecodedSymbol, EncodingReport};
pub use error::{Error, Result};
pub use grammar::{Cfg, Construction, Grammar, Level, SlotConstraint};
pub use pipeline::{EvalReport, FoldOutcome, PassResult, RunConfig, StabilityReport};
pub use search::{SearchConfig, TraceRecord};

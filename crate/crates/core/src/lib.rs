//! Incremental grounding of disjunctive logic programs with tailored
//! simplification.
//!
//! A [`Session`] keeps one ground program alive across a sequence of input
//! fact sets ("shots"). Each shot adds only the instances that became
//! relevant, simplifies them against the facts of the shot, and undoes
//! earlier simplifications that the new facts no longer justify. The
//! [`oracle`] module holds naive reference implementations used to check the
//! engine.

pub mod ast;
pub mod engine;
pub mod error;
pub mod ground;
pub mod oracle;
pub mod session;
pub mod text;

pub use ast::{check_safety, Atom, FactSet, Literal, Program, Rule, Symbol, Term};
pub use engine::{EngineConfig, Mode, Session, ShotStats, SimplifyAgainst};
pub use error::{Error, Result, SourceSpan};
pub use ground::{
    is_simplified_subset, simplified_intersection, verify_tailored_embedding, DeletedStore,
    Deletion, DeletionKind, GroundProgram, RuleSet, SimplifiedRule,
};
pub use session::{emit_stats, filter_relevant, run_shots, ShotReport, StatsFormat};
pub use text::{parse_fact_set, parse_program, render_ground_program, BodyMode, RenderOptions};

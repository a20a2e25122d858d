//! Solver-backed rule induction over noisy, extracted ground facts.

pub mod logic;
pub mod entailment;
pub mod learner;
pub mod eval;
pub mod ingestion;
pub mod pipeline;

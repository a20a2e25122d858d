//! Terms, atoms, clauses, programs and bias declarations, with their
//! text formats.

mod bias;
mod canonical;
mod parse;
mod types;

pub use bias::{
    BiasSpec, PredDecl, DEFAULT_MAX_BODY, DEFAULT_MAX_CLAUSES, DEFAULT_MAX_VARS, RUNWAY_BIAS, RUNWAY_RULES,
};
pub use canonical::canonical;
pub use parse::{
    parse_bias, parse_clause, parse_examples, parse_examples_with_bias, parse_facts, parse_program, ParseError,
    ParseErrorKind,
};
pub use types::{is_constant_name, is_predicate_name, is_variable_name, Atom, Clause, ExampleSet, Program, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogicError {
    #[error("invalid name `{0}`")]
    BadName(String),
    #[error("non-ground fact {0}")]
    NonGroundFact(String),
    #[error("non-ground example {0}")]
    NonGroundExample(String),
    #[error("head variables {} unbound in body", .0.join(","))]
    RangeRestriction(Vec<String>),
    #[error("disconnected clause {0}")]
    Disconnected(String),
    #[error("contradictory labels for {0}")]
    ContradictoryLabel(String),
}

/// Canonical text of a clause: variables renamed `V0, V1, ...` by first
/// occurrence, body in canonical order.
pub fn print_clause(c: &Clause) -> String {
    canonical(c).to_string()
}

/// One canonical clause per line; the empty program prints as "".
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for c in p {
        out.push_str(&print_clause(c));
        out.push('\n');
    }
    out
}

/// `pos(...)` lines followed by `neg(...)` lines, in insertion order.
pub fn print_examples(e: &ExampleSet) -> String {
    let mut out = String::new();
    for p in e.positives() {
        out.push_str(&format!("pos({p}).\n"));
    }
    for n in e.negatives() {
        out.push_str(&format!("neg({n}).\n"));
    }
    out
}

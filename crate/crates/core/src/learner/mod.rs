//! The solver contract and the reference learner behind it.
//!
//! A [`Solver`] receives background facts, labelled examples and a bias, and
//! either returns a hypothesis that entails every positive and no negative,
//! or reports that none was found (or that it ran out of time). Every
//! implementation is expected to check its own answer before returning it;
//! [`verify`] is the shared check.

mod external;
mod search;

use std::time::Duration;

use crate::entailment::coverage;
use crate::logic::{Atom, BiasSpec, ExampleSet, Program};

pub use external::ExternalSolver;
pub use search::{enumerate_clauses, ReferenceLearner};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone)]
pub struct SolverRequest {
    pub background: Program,
    pub examples: ExampleSet,
    pub bias: BiasSpec,
    pub timeout: Duration,
    pub seed: u64,
}

impl SolverRequest {
    pub fn new(background: Program, examples: ExampleSet, bias: BiasSpec) -> Self {
        SolverRequest {
            background,
            examples,
            bias,
            timeout: DEFAULT_TIMEOUT,
            seed: 0,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self) -> Result<(), SolveError> {
        let b = &self.bias;
        if b.max_vars == 0 || b.max_body == 0 || b.max_clauses == 0 {
            return Err(SolveError::InvalidBias("bounds must be positive".into()));
        }
        if let Some(e) = self.examples.positives().iter().find(|e| self.examples.is_negative(e)) {
            return Err(SolveError::ContradictoryExamples(e.to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Hypothesis(Program),
    NoHypothesis,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub clauses_enumerated: usize,
    pub candidates_negative_safe: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResult {
    pub outcome: Outcome,
    pub stats: SolverStats,
}

impl SolverResult {
    pub fn hypothesis(&self) -> Option<&Program> {
        match &self.outcome {
            Outcome::Hypothesis(h) => Some(h),
            _ => None,
        }
    }

    pub fn outcome_label(&self) -> &'static str {
        match self.outcome {
            Outcome::Hypothesis(_) => "hypothesis",
            Outcome::NoHypothesis => "no_hypothesis",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("contradictory examples: {0} is labelled both ways")]
    ContradictoryExamples(String),
    #[error("invalid bias: {0}")]
    InvalidBias(String),
    #[error("solver returned a hypothesis that fails verification: {0:?}")]
    SelfCheckFailed(Verdict),
    #[error("external solver: {0}")]
    External(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait Solver: Sync {
    fn name(&self) -> &str;
    fn solve(&self, req: &SolverRequest) -> Result<SolverResult, SolveError>;
}

/// Result of checking a hypothesis against labelled examples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Incomplete { missed: Vec<Atom> },
    Unsound { covered_neg: Vec<Atom> },
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Verdict::Consistent)
    }
}

/// Checks completeness and consistency of `h` on `exs`. Covered negatives
/// take precedence over missed positives when both occur.
pub fn verify(b: &Program, h: &Program, exs: &ExampleSet) -> Verdict {
    let cov = coverage(b, h, exs);
    if !cov.covered_neg.is_empty() {
        return Verdict::Unsound {
            covered_neg: cov.covered_neg,
        };
    }
    if cov.covered_pos.len() < exs.positives().len() {
        let missed = exs
            .positives()
            .iter()
            .filter(|p| !cov.covered_pos.contains(p))
            .cloned()
            .collect();
        return Verdict::Incomplete { missed };
    }
    Verdict::Consistent
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_examples, parse_facts, parse_program};

    #[test]
    fn empty_hypothesis_misses_every_positive() {
        let exs = parse_examples("pos(collision(a1,a2)).\npos(collision(b1,b2)).").unwrap();
        match verify(&Program::new(), &Program::new(), &exs) {
            Verdict::Incomplete { missed } => assert_eq!(missed, exs.positives()),
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn simultaneous_landings_expose_an_unsound_rule() {
        let b = parse_facts("landing_runway(a1,r1).\nlanding_runway(a2,r2).").unwrap();
        let h = parse_program("collision(V0,V1):- landing_runway(V0,V2),landing_runway(V1,V3).").unwrap();
        let exs = parse_examples("neg(collision(a1,a2)).").unwrap();
        match verify(&b, &h, &exs) {
            Verdict::Unsound { covered_neg } => {
                assert_eq!(covered_neg, vec![Atom::ground("collision", &["a1", "a2"]).unwrap()])
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn planted_rule_is_consistent() {
        let b = parse_facts("landing_runway(a2,r1).\ncross_runway(a1,r1).\nlanding_runway(b2,r2).\ncross_runway(b1,r3).")
            .unwrap();
        let h = parse_program("collision(V0,V1):- landing_runway(V1,V2),cross_runway(V0,V2).").unwrap();
        let exs = parse_examples("pos(collision(a1,a2)).\nneg(collision(b1,b2)).\nneg(collision(a2,a1)).").unwrap();
        assert_eq!(verify(&b, &h, &exs), Verdict::Consistent);
    }
}

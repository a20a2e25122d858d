//! Level 3: iterative global aggregation.
//!
//! Trial 1 visits the reliable subsets chronologically; later trials use
//! seeded shuffles (trial `t` draws from ChaCha8 stream `t`). Each candidate
//! is merged into the accepted state and the solver is rerun from scratch on
//! the union. A candidate that fails is shrunk by [`retain_partial`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{rule_texts, PipelineConfig, PipelineError, SubsetInstance};
use crate::eval::Label;
use crate::learner::{verify, Solver};
use crate::logic::{Atom, BiasSpec, ExampleSet, Program};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RemovedExample {
    pub label: Label,
    pub atom: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum DecisionKind {
    Accepted,
    Retained { removed: Vec<RemovedExample> },
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub subset: String,
    #[serde(flatten)]
    pub kind: DecisionKind,
}

/// Accepted subsets and their merged instance, with the hypothesis learned
/// on that merge.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AggregationState {
    pub accepted: Vec<String>,
    pub background: Program,
    pub examples: ExampleSet,
    pub hypothesis: Program,
    pub trial_log: Vec<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: u32,
    pub order: Vec<String>,
    pub k: usize,
    pub fail_frac: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOutcome {
    pub best: AggregationState,
    /// 1-based; 0 when no trial ran.
    pub best_trial: u32,
    pub success: bool,
    pub trials: Vec<(TrialSummary, Vec<Decision>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Retention {
    Retained {
        reduced: SubsetInstance,
        removed: Vec<RemovedExample>,
        background: Program,
        examples: ExampleSet,
        hypothesis: Program,
    },
    Discarded,
}

/// Merged instance if `j` can join `state`: the solver must return a
/// non-empty hypothesis that is correct on the union.
fn try_merge(
    state: &AggregationState,
    j: &SubsetInstance,
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
) -> Result<Option<(Program, ExampleSet, Program)>, PipelineError> {
    let Ok(examples) = state.examples.union(&j.examples) else {
        return Ok(None);
    };
    let background = state.background.union(&j.background);
    let res = solver.solve(&config.request(background.clone(), examples.clone(), bias))?;
    match res.hypothesis() {
        Some(h) if !h.is_empty() && verify(&background, h, &examples).is_consistent() => {
            Ok(Some((background, examples, h.clone())))
        }
        _ => Ok(None),
    }
}

/// Removes the candidate's examples one at a time (negatives first, then
/// positives, most recently parsed first) until the reduced candidate can
/// join `state`. At least one of its own positives must remain.
pub fn retain_partial(
    state: &AggregationState,
    candidate: &SubsetInstance,
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
) -> Result<Retention, PipelineError> {
    let bias = config.apply_bounds(bias);
    let order: Vec<(Label, &Atom)> = candidate
        .examples
        .negatives()
        .iter()
        .rev()
        .map(|a| (Label::Neg, a))
        .chain(candidate.examples.positives().iter().rev().map(|a| (Label::Pos, a)))
        .collect();
    let mut reduced = candidate.clone();
    let mut removed = Vec::new();
    for (label, atom) in order {
        match label {
            Label::Neg => reduced.examples.remove_negative(atom),
            Label::Pos => reduced.examples.remove_positive(atom),
        };
        removed.push(RemovedExample {
            label,
            atom: atom.to_string(),
        });
        if reduced.examples.positives().is_empty() {
            break;
        }
        if let Some((background, examples, hypothesis)) = try_merge(state, &reduced, &bias, config, solver)? {
            return Ok(Retention::Retained {
                reduced,
                removed,
                background,
                examples,
                hypothesis,
            });
        }
    }
    Ok(Retention::Discarded)
}

fn run_trial(
    order: &[&SubsetInstance],
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
    observer: &mut dyn FnMut(&AggregationState),
) -> Result<AggregationState, PipelineError> {
    let mut state = AggregationState::default();
    for j in order {
        let kind = match try_merge(&state, j, bias, config, solver)? {
            Some((b, e, h)) => {
                state.background = b;
                state.examples = e;
                state.hypothesis = h;
                DecisionKind::Accepted
            }
            None => match retain_partial(&state, j, bias, config, solver)? {
                Retention::Retained {
                    removed,
                    background,
                    examples,
                    hypothesis,
                    ..
                } => {
                    state.background = background;
                    state.examples = examples;
                    state.hypothesis = hypothesis;
                    DecisionKind::Retained { removed }
                }
                Retention::Discarded => DecisionKind::Discarded,
            },
        };
        let accepted = kind != DecisionKind::Discarded;
        if accepted {
            state.accepted.push(j.id.clone());
        }
        state.trial_log.push(Decision {
            subset: j.id.clone(),
            kind,
        });
        if accepted {
            observer(&state);
        }
    }
    Ok(state)
}

pub fn aggregate(
    reliable: &[SubsetInstance],
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
) -> Result<AggregationOutcome, PipelineError> {
    aggregate_observed(reliable, bias, config, solver, &mut |_| {})
}

/// [`aggregate`], calling `observer` with the state after every accepted or
/// retained candidate of every trial.
pub fn aggregate_observed(
    reliable: &[SubsetInstance],
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
    observer: &mut dyn FnMut(&AggregationState),
) -> Result<AggregationOutcome, PipelineError> {
    config.validate()?;
    let mut outcome = AggregationOutcome {
        best: AggregationState::default(),
        best_trial: 0,
        success: false,
        trials: Vec::new(),
    };
    if reliable.is_empty() {
        return Ok(outcome);
    }
    let bias = config.apply_bounds(bias);
    let mut chronological: Vec<&SubsetInstance> = reliable.iter().collect();
    chronological.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));

    let mut best_k: Option<usize> = None;
    for t in 1..=config.max_retries {
        let mut order = chronological.clone();
        if t > 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            order.shuffle(&mut rng);
        }
        let state = run_trial(&order, &bias, config, solver, observer)?;
        let k = state.accepted.len();
        let fail_frac = 1.0 - k as f64 / reliable.len() as f64;
        let success = !state.hypothesis.is_empty();
        let summary = TrialSummary {
            trial: t,
            order: order.iter().map(|s| s.id.clone()).collect(),
            k,
            fail_frac,
            success,
        };
        outcome.trials.push((summary, state.trial_log.clone()));

        let better = (success && !outcome.success) || (success == outcome.success && best_k.is_none_or(|bk| k > bk));
        if better {
            outcome.best = state;
            outcome.best_trial = t;
            outcome.success = success;
            best_k = Some(k);
        }
        if fail_frac <= config.rho {
            break;
        }
    }
    Ok(outcome)
}

impl AggregationOutcome {
    pub fn hypothesis_texts(&self) -> Vec<String> {
        rule_texts(&self.best.hypothesis)
    }
}

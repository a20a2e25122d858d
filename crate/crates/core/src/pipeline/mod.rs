//! Four-level feedback pipeline.
//!
//! Level 1 validates extracted bundles, Level 2 solves each subset on its
//! own and keeps the consistent ones, Level 3 merges the reliable subsets one
//! at a time (with shuffled retries and partial retention), and Level 4
//! drops rules whose support is far below the best rule's.

mod aggregate;
mod report;
mod validate;

use std::time::Duration;

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::Serialize;

use crate::entailment::rule_support;
use crate::ingestion::{pair_meta, pair_subsets, CorpusEntry, Extractor, IngestError, RawBundle, SourceRecord, SubsetMeta};
use crate::learner::{SolveError, Solver, SolverRequest, DEFAULT_TIMEOUT};
use crate::logic::{print_clause, Atom, BiasSpec, ExampleSet, Program};

pub use aggregate::{aggregate, aggregate_observed, retain_partial, AggregationOutcome, AggregationState, Decision, DecisionKind, RemovedExample, Retention, TrialSummary};
pub use report::{CheckReport, PipelineReport, Stage, REPORT_SCHEMA};
pub use validate::{check_bundle, validate_bundle, BundleRole, Validation};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Failure threshold: a trial that discards at most this fraction of
    /// reliable subsets ends the retry loop.
    pub rho: f64,
    /// Support threshold, relative to the best-supported rule.
    pub tau: f64,
    /// Number of aggregation trials (the first is chronological).
    pub max_retries: u32,
    pub validation_attempts: u32,
    pub seed: u64,
    pub max_vars: Option<usize>,
    pub max_body: Option<usize>,
    pub max_clauses: Option<usize>,
    #[serde(serialize_with = "millis")]
    pub timeout: Duration,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(d.as_millis() as u64)
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rho: 0.30,
            tau: 0.20,
            max_retries: 5,
            validation_attempts: 3,
            seed: 0,
            max_vars: None,
            max_body: None,
            max_clauses: None,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.into()));
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0,1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0,1]");
        }
        if self.max_retries == 0 {
            return bad("max_retries must be positive");
        }
        if self.validation_attempts == 0 {
            return bad("validation_attempts must be positive");
        }
        if [self.max_vars, self.max_body, self.max_clauses].contains(&Some(0)) {
            return bad("solver bounds must be positive");
        }
        Ok(())
    }

    /// `bias` with any configured bound overrides applied.
    pub fn apply_bounds(&self, bias: &BiasSpec) -> BiasSpec {
        let mut b = bias.clone();
        b.max_vars = self.max_vars.unwrap_or(b.max_vars);
        b.max_body = self.max_body.unwrap_or(b.max_body);
        b.max_clauses = self.max_clauses.unwrap_or(b.max_clauses);
        b
    }

    pub(crate) fn request(&self, background: Program, examples: ExampleSet, bias: &BiasSpec) -> SolverRequest {
        SolverRequest::new(background, examples, bias.clone())
            .with_timeout(self.timeout)
            .with_seed(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub violation_source: String,
    pub nominal_source: String,
}

/// A validated, self-contained learning instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetInstance {
    pub id: String,
    pub timestamp: NaiveDateTime,
    pub background: Program,
    pub examples: ExampleSet,
    pub provenance: Provenance,
}

impl SubsetInstance {
    pub fn new(meta: &SubsetMeta, background: Program, examples: ExampleSet) -> Self {
        SubsetInstance {
            id: meta.id.clone(),
            timestamp: meta.timestamp,
            background,
            examples,
            provenance: Provenance {
                violation_source: meta.violation_source.clone(),
                nominal_source: meta.nominal_source.clone(),
            },
        }
    }
}

/// Something Level 1 can validate: one or more independently extracted
/// parts that are merged into a single subset once all of them are valid.
pub trait BundleSource: Sync {
    fn meta(&self) -> SubsetMeta;
    fn parts(&self) -> Vec<BundleRole>;
    /// Candidate text for part `part` on attempt `attempt` (from 1).
    fn fetch(&self, part: usize, attempt: u32) -> Result<RawBundle, IngestError>;
}

/// A bundle already on disk; every attempt sees the same text.
impl BundleSource for CorpusEntry {
    fn meta(&self) -> SubsetMeta {
        self.meta.clone()
    }

    fn parts(&self) -> Vec<BundleRole> {
        vec![BundleRole::Subset]
    }

    fn fetch(&self, _part: usize, _attempt: u32) -> Result<RawBundle, IngestError> {
        Ok(self.bundle.clone())
    }
}

/// A (violation, nominal) pair extracted record by record.
pub struct PairSource<'a> {
    pub violation: SourceRecord,
    pub nominal: SourceRecord,
    pub extractor: &'a dyn Extractor,
}

impl BundleSource for PairSource<'_> {
    fn meta(&self) -> SubsetMeta {
        pair_meta(&self.violation, &self.nominal)
    }

    fn parts(&self) -> Vec<BundleRole> {
        vec![BundleRole::Violation, BundleRole::Nominal]
    }

    fn fetch(&self, part: usize, attempt: u32) -> Result<RawBundle, IngestError> {
        let record = if part == 0 { &self.violation } else { &self.nominal };
        self.extractor.extract(record, attempt)
    }
}

pub fn pair_sources<'a>(
    extractor: &'a dyn Extractor,
    violations: &[SourceRecord],
    nominals: &[SourceRecord],
    seed: u64,
) -> Result<Vec<PairSource<'a>>, IngestError> {
    Ok(pair_subsets(violations, nominals, seed)?
        .into_iter()
        .map(|(violation, nominal)| PairSource {
            violation,
            nominal,
            extractor,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Level1Record {
    pub id: String,
    pub accepted: bool,
    /// Fetches used, per part.
    pub attempts: Vec<u32>,
    pub reasons: Vec<String>,
}

fn role_name(r: BundleRole) -> &'static str {
    match r {
        BundleRole::Subset => "subset",
        BundleRole::Violation => "violation",
        BundleRole::Nominal => "nominal",
    }
}

/// Level 1 for one source.
pub fn validate_source<S: BundleSource + ?Sized>(
    src: &S,
    bias: &BiasSpec,
    attempts: u32,
) -> Result<(Level1Record, Option<SubsetInstance>), IngestError> {
    let meta = src.meta();
    let roles = src.parts();
    let mut record = Level1Record {
        id: meta.id.clone(),
        accepted: false,
        attempts: Vec::new(),
        reasons: Vec::new(),
    };
    let mut background = Program::new();
    let mut examples = ExampleSet::new();
    for (i, role) in roles.iter().enumerate() {
        let v = validate_bundle(|a| src.fetch(i, a), bias, attempts, *role)?;
        record.attempts.push(v.attempts());
        match v {
            Validation::Valid {
                background: b,
                examples: e,
                ..
            } => {
                background.extend(&b);
                match examples.union(&e) {
                    Ok(u) => examples = u,
                    Err(err) => record.reasons.push(format!("{}: {err}", role_name(*role))),
                }
            }
            Validation::Rejected { reasons, .. } => {
                let prefix = if roles.len() > 1 { format!("{}: ", role_name(*role)) } else { String::new() };
                record.reasons.extend(reasons.into_iter().map(|r| format!("{prefix}{r}")));
            }
        }
    }
    if record.reasons.is_empty() {
        // Parts are valid one by one; the merged subset must still type-check.
        let merged = RawBundle {
            background: crate::logic::print_program(&background),
            examples: crate::logic::print_examples(&examples),
        };
        if let Err(rs) = check_bundle(&merged, bias, BundleRole::Subset) {
            record.reasons.extend(rs);
        }
    }
    if !record.reasons.is_empty() {
        return Ok((record, None));
    }
    record.accepted = true;
    Ok((record, Some(SubsetInstance::new(&meta, background, examples))))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsetCheck {
    pub id: String,
    pub outcome: &'static str,
    pub hypothesis: Vec<String>,
    pub clauses_enumerated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level2 {
    pub checks: Vec<SubsetCheck>,
    /// Indices into the input, in input order.
    pub reliable: Vec<usize>,
}

/// Level 2: solve every subset on its own; a subset is reliable iff the
/// solver returns a (self-verified) hypothesis.
pub fn check_subsets(
    subsets: &[SubsetInstance],
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
) -> Result<Level2, PipelineError> {
    let bias = config.apply_bounds(bias);
    let results: Vec<_> = subsets
        .par_iter()
        .map(|s| solver.solve(&config.request(s.background.clone(), s.examples.clone(), &bias)))
        .collect::<Result<_, _>>()?;
    let mut checks = Vec::with_capacity(subsets.len());
    let mut reliable = Vec::new();
    for (i, (s, r)) in subsets.iter().zip(results).enumerate() {
        if r.hypothesis().is_some() {
            reliable.push(i);
        }
        checks.push(SubsetCheck {
            id: s.id.clone(),
            outcome: r.outcome_label(),
            hypothesis: r.hypothesis().map(rule_texts).unwrap_or_default(),
            clauses_enumerated: r.stats.clauses_enumerated,
        });
    }
    Ok(Level2 { checks, reliable })
}

pub(crate) fn rule_texts(h: &Program) -> Vec<String> {
    h.iter().map(print_clause).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSupport {
    pub rule: String,
    pub support: usize,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pruning {
    pub threshold: f64,
    pub supports: Vec<RuleSupport>,
    #[serde(skip)]
    pub kept: Program,
}

/// Level 4: keep rule `r` iff `supp(r) ≥ tau · max supp`, each support
/// measured with `r` alone against `b` and `pos`.
pub fn prune_by_support(h: &Program, b: &Program, pos: &[Atom], tau: f64) -> Pruning {
    let rules: Vec<_> = h.rules().collect();
    let supports: Vec<usize> = rules.par_iter().map(|r| rule_support(r, b, pos)).collect();
    let max = supports.iter().copied().max().unwrap_or(0);
    let threshold = tau * max as f64;
    let mut kept = Program::new();
    for f in h.facts() {
        kept.insert(crate::logic::Clause::fact(f.clone()).expect("ground"));
    }
    let supports = rules
        .iter()
        .zip(supports)
        .map(|(r, s)| {
            let keep = s as f64 >= threshold;
            if keep {
                kept.insert((*r).clone());
            }
            RuleSupport {
                rule: print_clause(r),
                support: s,
                kept: keep,
            }
        })
        .collect();
    Pruning {
        threshold,
        supports,
        kept,
    }
}

fn level1<S: BundleSource>(
    sources: &[S],
    bias: &BiasSpec,
    config: &PipelineConfig,
) -> Result<(Vec<Level1Record>, Vec<SubsetInstance>), PipelineError> {
    let results: Vec<_> = sources
        .par_iter()
        .map(|s| validate_source(s, bias, config.validation_attempts))
        .collect::<Result<_, _>>()?;
    let (records, instances): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((records, instances.into_iter().flatten().collect()))
}

/// Levels 1 and 2 over `sources`, without aggregation.
pub fn run_check<S: BundleSource>(
    sources: &[S],
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
) -> Result<CheckReport, PipelineError> {
    config.validate()?;
    let (level1, instances) = level1(sources, bias, config)?;
    let level2 = check_subsets(&instances, bias, config, solver)?;
    Ok(CheckReport {
        config: config.clone(),
        level1,
        reliable: level2.reliable.iter().map(|&i| instances[i].id.clone()).collect(),
        level2: level2.checks,
    })
}

/// Runs all four levels over `sources`.
pub fn run_pipeline<S: BundleSource>(
    sources: &[S],
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let (level1, instances) = level1(sources, bias, config)?;
    run_from_instances(level1, &instances, bias, config, solver)
}

/// Levels 2-4 over subsets that already passed Level 1.
pub fn run_from_instances(
    level1: Vec<Level1Record>,
    instances: &[SubsetInstance],
    bias: &BiasSpec,
    config: &PipelineConfig,
    solver: &dyn Solver,
) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let level2 = check_subsets(instances, bias, config, solver)?;
    let reliable: Vec<SubsetInstance> = level2.reliable.iter().map(|&i| instances[i].clone()).collect();
    let level3 = aggregate(&reliable, bias, config, solver)?;
    let best = &level3.best;
    let level4 = prune_by_support(&best.hypothesis, &best.background, best.examples.positives(), config.tau);

    let emptied_at = if instances.is_empty() {
        Some(Stage::Validation)
    } else if reliable.is_empty() {
        Some(Stage::SubsetCheck)
    } else if best.hypothesis.is_empty() {
        Some(Stage::Aggregation)
    } else if level4.kept.is_empty() {
        Some(Stage::Pruning)
    } else {
        None
    };
    Ok(PipelineReport {
        config: config.clone(),
        level1,
        reliable: reliable.iter().map(|s| s.id.clone()).collect(),
        level2: level2.checks,
        final_hypothesis: level4.kept.clone(),
        level3,
        level4,
        emptied_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_clause, parse_facts, parse_program};

    #[test]
    fn pruning_arithmetic() {
        // Three rules over disjoint unary features, supported by 10, 3 and 1 positives.
        let mut bk = String::new();
        let mut pos = Vec::new();
        for (feat, n) in [("f1", 10), ("f2", 3), ("f3", 1)] {
            for i in 0..n {
                bk.push_str(&format!("{feat}({feat}_{i}).\n"));
                pos.push(Atom::ground("t", &[&format!("{feat}_{i}")]).unwrap());
            }
        }
        let b = parse_facts(&bk).unwrap();
        let h = parse_program("t(X):- f1(X).\nt(X):- f2(X).\nt(X):- f3(X).").unwrap();
        let p = prune_by_support(&h, &b, &pos, 0.20);
        assert_eq!(p.threshold, 2.0);
        let kept: Vec<_> = p.supports.iter().filter(|s| s.kept).map(|s| s.support).collect();
        assert_eq!(kept.len(), 2);
        assert!(kept.contains(&10) && kept.contains(&3));
        assert!(!p.kept.contains(&parse_clause("t(X):- f3(X).").unwrap()));
    }

    #[test]
    fn single_rule_always_kept() {
        let b = parse_facts("f1(a).").unwrap();
        let h = parse_program("t(X):- f1(X).").unwrap();
        let p = prune_by_support(&h, &b, &[Atom::ground("t", &["a"]).unwrap()], 1.0);
        assert_eq!(p.kept.len(), 1);
        assert!(prune_by_support(&Program::new(), &b, &[], 0.2).kept.is_empty());
    }

    #[test]
    fn config_bounds_checked() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = PipelineConfig { rho: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { tau: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { max_body: Some(0), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}

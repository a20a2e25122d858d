//! Held-out evaluation by entailment.
//!
//! An example is predicted positive iff `background ∪ h` entails it. Counts
//! are pooled over every example of every scenario (micro-averaged).

use rayon::prelude::*;
use serde::Serialize;

use crate::entailment::consequences;
use crate::ingestion::{read_corpus, write_corpus, Corpus, CorpusEntry, IngestError, RawBundle, SubsetMeta};
use crate::logic::{parse_examples, parse_facts, print_examples, print_program, Atom, ExampleSet, ParseError, Program};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub id: String,
    pub background: Program,
    pub examples: ExampleSet,
    pub tags: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("scenario {id}: {source}")]
    Parse {
        id: String,
        #[source]
        source: ParseError,
    },
}

/// Loads scenarios stored in the corpus layout. Per-scenario bias files are
/// ignored.
pub fn load_scenarios(dir: &std::path::Path) -> Result<Vec<Scenario>, EvalError> {
    let corpus = read_corpus(dir)?;
    corpus
        .entries
        .into_iter()
        .map(|e| {
            let id = e.meta.id.clone();
            let wrap = |source| EvalError::Parse { id: id.clone(), source };
            Ok(Scenario {
                background: parse_facts(&e.bundle.background).map_err(wrap)?,
                examples: parse_examples(&e.bundle.examples).map_err(wrap)?,
                tags: e.meta.tags,
                id,
            })
        })
        .collect()
}

/// Writes scenarios in the corpus layout, all stamped `timestamp`.
pub fn write_scenarios(dir: &std::path::Path, scenarios: &[Scenario], timestamp: chrono::NaiveDateTime) -> Result<(), IngestError> {
    let entries = scenarios
        .iter()
        .map(|s| {
            let mut meta = SubsetMeta::new(&s.id, timestamp);
            meta.tags = s.tags.clone();
            CorpusEntry {
                meta,
                bundle: RawBundle {
                    background: print_program(&s.background),
                    examples: print_examples(&s.examples),
                },
            }
        })
        .collect();
    write_corpus(dir, &Corpus { bias: None, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExampleVerdict {
    pub scenario: String,
    pub atom: String,
    pub label: Label,
    pub predicted: bool,
}

impl ExampleVerdict {
    pub fn is_correct(&self) -> bool {
        self.predicted == (self.label == Label::Pos)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    fn add(&mut self, label: Label, predicted: bool) {
        match (label, predicted) {
            (Label::Pos, true) => self.tp += 1,
            (Label::Pos, false) => self.fn_ += 1,
            (Label::Neg, true) => self.fp += 1,
            (Label::Neg, false) => self.tn += 1,
        }
    }

    fn merge(mut self, o: Confusion) -> Confusion {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
        self
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Standard metrics; an empty denominator yields 1.0 and sets the
    /// matching degenerate flag.
    pub fn metrics(&self) -> Metrics {
        let ratio = |num: usize, den: usize| if den == 0 { (1.0, true) } else { (num as f64 / den as f64, false) };
        let (accuracy, _) = ratio(self.tp + self.tn, self.total());
        let (precision, precision_degenerate) = ratio(self.tp, self.tp + self.fp);
        let (recall, recall_degenerate) = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy,
            precision,
            recall,
            f1,
            precision_degenerate,
            recall_degenerate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioResult {
    pub id: String,
    pub confusion: Confusion,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Sorted by scenario id, then positives before negatives in file order.
    pub verdicts: Vec<ExampleVerdict>,
    pub scenarios: Vec<ScenarioResult>,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let c = self.confusion;
        let m = self.metrics;
        let correct = self.scenarios.iter().filter(|s| s.correct).count();
        let mut out = String::new();
        out.push_str(&format!("scenarios  {correct}/{} correct\n", self.scenarios.len()));
        out.push_str(&format!("tp {}  fp {}  fn {}  tn {}\n", c.tp, c.fp, c.fn_, c.tn));
        out.push_str(&format!("accuracy   {:.3}\n", m.accuracy));
        out.push_str(&format!("precision  {:.3}{}\n", m.precision, if m.precision_degenerate { " (no predicted positives)" } else { "" }));
        out.push_str(&format!("recall     {:.3}{}\n", m.recall, if m.recall_degenerate { " (no positives)" } else { "" }));
        out.push_str(&format!("f1         {:.3}\n", m.f1));
        out
    }
}

fn judge(h: &Program, s: &Scenario) -> (Vec<ExampleVerdict>, Confusion) {
    let model = consequences(&s.background, h);
    let mut verdicts = Vec::with_capacity(s.examples.len());
    let mut conf = Confusion::default();
    for (atom, label) in labelled_atoms(s) {
        let predicted = model.contains(atom);
        conf.add(label, predicted);
        verdicts.push(ExampleVerdict {
            scenario: s.id.clone(),
            atom: atom.to_string(),
            label,
            predicted,
        });
    }
    (verdicts, conf)
}

pub fn evaluate(h: &Program, scenarios: &[Scenario]) -> EvalReport {
    let mut per: Vec<(String, Vec<ExampleVerdict>, Confusion)> = scenarios
        .par_iter()
        .map(|s| {
            let (v, c) = judge(h, s);
            (s.id.clone(), v, c)
        })
        .collect();
    per.sort_by(|a, b| a.0.cmp(&b.0));
    let confusion = per.iter().fold(Confusion::default(), |acc, p| acc.merge(p.2));
    EvalReport {
        scenarios: per
            .iter()
            .map(|(id, _, c)| ScenarioResult {
                id: id.clone(),
                confusion: *c,
                correct: c.fp == 0 && c.fn_ == 0,
            })
            .collect(),
        verdicts: per.into_iter().flat_map(|p| p.1).collect(),
        metrics: confusion.metrics(),
        confusion,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    pub scenario: String,
    pub atom: String,
    pub label: Label,
    pub left: bool,
    pub right: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub tp: i64,
    pub fp: i64,
    #[serde(rename = "fn")]
    pub fn_: i64,
    pub tn: i64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisDiff {
    pub disagreements: Vec<Disagreement>,
    /// `right - left`.
    pub delta: MetricDelta,
}

impl HypothesisDiff {
    pub fn is_empty(&self) -> bool {
        self.disagreements.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diff serializes")
    }
}

pub fn diff_hypotheses(left: &Program, right: &Program, scenarios: &[Scenario]) -> HypothesisDiff {
    let a = evaluate(left, scenarios);
    let b = evaluate(right, scenarios);
    let disagreements = a
        .verdicts
        .iter()
        .zip(&b.verdicts)
        .filter(|(x, y)| x.predicted != y.predicted)
        .map(|(x, y)| Disagreement {
            scenario: x.scenario.clone(),
            atom: x.atom.clone(),
            label: x.label,
            left: x.predicted,
            right: y.predicted,
        })
        .collect();
    let d = |r: usize, l: usize| r as i64 - l as i64;
    let (ca, cb, ma, mb) = (a.confusion, b.confusion, a.metrics, b.metrics);
    HypothesisDiff {
        disagreements,
        delta: MetricDelta {
            tp: d(cb.tp, ca.tp),
            fp: d(cb.fp, ca.fp),
            fn_: d(cb.fn_, ca.fn_),
            tn: d(cb.tn, ca.tn),
            accuracy: mb.accuracy - ma.accuracy,
            precision: mb.precision - ma.precision,
            recall: mb.recall - ma.recall,
            f1: mb.f1 - ma.f1,
        },
    }
}

/// Every labelled atom of `s` paired with its label, for callers that build
/// their own oracles.
pub fn labelled_atoms(s: &Scenario) -> impl Iterator<Item = (&Atom, Label)> {
    s.examples
        .positives()
        .iter()
        .map(|a| (a, Label::Pos))
        .chain(s.examples.negatives().iter().map(|a| (a, Label::Neg)))
}

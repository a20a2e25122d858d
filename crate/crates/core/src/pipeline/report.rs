use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use super::{rule_texts, AggregationOutcome, DecisionKind, Level1Record, PipelineConfig, Pruning, SubsetCheck};
use crate::logic::{print_program, Program};

pub const REPORT_SCHEMA: &str = "rulesift.report/1";

/// Where the pipeline ran out of material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    SubsetCheck,
    Aggregation,
    Pruning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub level1: Vec<Level1Record>,
    pub level2: Vec<SubsetCheck>,
    pub reliable: Vec<String>,
    pub level3: AggregationOutcome,
    pub level4: Pruning,
    pub final_hypothesis: Program,
    pub emptied_at: Option<Stage>,
}

impl PipelineReport {
    pub fn pre_prune(&self) -> &Program {
        &self.level3.best.hypothesis
    }

    /// Final rules in `.rules` format.
    pub fn final_rules(&self) -> String {
        print_program(&self.final_hypothesis)
    }

    /// One JSON object per line, each tagged with the schema and a record
    /// kind. Contains no clock readings, so equal runs give equal bytes.
    pub fn to_jsonl(&self) -> String {
        let mut lines = early_levels(&self.config, &self.level1, &self.level2, &self.reliable);
        for (summary, decisions) in &self.level3.trials {
            lines.push(json!({"record": "trial", "entry": summary}));
            for d in decisions {
                lines.push(json!({"record": "decision", "trial": summary.trial, "entry": d}));
            }
        }
        let best = &self.level3.best;
        lines.push(json!({
            "record": "level3",
            "best_trial": self.level3.best_trial,
            "success": self.level3.success,
            "k": best.accepted.len(),
            "accepted": best.accepted,
            "background_facts": best.background.len(),
            "positives": best.examples.positives().len(),
            "negatives": best.examples.negatives().len(),
            "hypothesis": self.level3.hypothesis_texts(),
        }));
        for s in &self.level4.supports {
            lines.push(json!({"record": "support", "entry": s}));
        }
        lines.push(json!({
            "record": "final",
            "threshold": self.level4.threshold,
            "pre_prune_rules": best.hypothesis.len(),
            "rules": rule_texts(&self.final_hypothesis),
            "emptied_at": self.emptied_at,
        }));
        render_lines(lines)
    }

    pub fn to_text(&self) -> String {
        let mut o = early_text(&self.level1, &self.level2, &self.reliable);
        let _ = writeln!(o, "level 3: {} trial(s), best trial {}", self.level3.trials.len(), self.level3.best_trial);
        for (t, decisions) in &self.level3.trials {
            let _ = writeln!(o, "  trial {}: k={} fail_frac={:.3} success={}", t.trial, t.k, t.fail_frac, t.success);
            for d in decisions {
                match &d.kind {
                    DecisionKind::Accepted => {}
                    DecisionKind::Retained { removed } => {
                        let _ = writeln!(o, "    retained {} after removing {} example(s)", d.subset, removed.len());
                    }
                    DecisionKind::Discarded => {
                        let _ = writeln!(o, "    discarded {}", d.subset);
                    }
                }
            }
        }
        let _ = writeln!(o, "level 4: threshold {:.3}", self.level4.threshold);
        for s in &self.level4.supports {
            let _ = writeln!(o, "  {} supp={} {}", s.rule, s.support, if s.kept { "kept" } else { "pruned" });
        }
        if let Some(stage) = self.emptied_at {
            let _ = writeln!(o, "empty hypothesis: nothing left after {}", serde_json::to_value(stage).expect("stage").as_str().unwrap_or("?"));
        }
        let _ = writeln!(o, "final hypothesis ({} rules):", self.final_hypothesis.len());
        for r in rule_texts(&self.final_hypothesis) {
            let _ = writeln!(o, "  {r}");
        }
        o
    }
}

fn early_levels(config: &PipelineConfig, level1: &[Level1Record], level2: &[SubsetCheck], reliable: &[String]) -> Vec<Value> {
    let mut lines = Vec::new();
    let accepted = level1.iter().filter(|r| r.accepted).count();
    lines.push(json!({"record": "header", "bundles": level1.len(), "config": config}));
    for r in level1 {
        lines.push(json!({"record": "level1", "entry": r}));
    }
    lines.push(json!({"record": "level1_summary", "accepted": accepted, "rejected": level1.len() - accepted}));
    for c in level2 {
        lines.push(json!({"record": "level2", "entry": c}));
    }
    lines.push(json!({"record": "level2_summary", "reliable": reliable}));
    lines
}

fn render_lines(lines: Vec<Value>) -> String {
    let mut out = String::new();
    for mut v in lines {
        if let Value::Object(m) = &mut v {
            m.insert("schema".into(), json!(REPORT_SCHEMA));
        }
        out.push_str(&serde_json::to_string(&v).expect("report serializes"));
        out.push('\n');
    }
    out
}

fn early_text(level1: &[Level1Record], level2: &[SubsetCheck], reliable: &[String]) -> String {
    let mut o = String::new();
    let accepted = level1.iter().filter(|r| r.accepted).count();
    let _ = writeln!(o, "level 1: {accepted}/{} bundles valid", level1.len());
    for r in level1.iter().filter(|r| !r.accepted) {
        let _ = writeln!(o, "  rejected {} after {:?} attempts", r.id, r.attempts);
        for reason in &r.reasons {
            let _ = writeln!(o, "    {reason}");
        }
    }
    let _ = writeln!(o, "level 2: {}/{} subsets reliable", reliable.len(), level2.len());
    for c in level2.iter().filter(|c| c.outcome != "hypothesis") {
        let _ = writeln!(o, "  discarded {} ({})", c.id, c.outcome);
    }
    o
}

/// Levels 1 and 2 only.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub config: PipelineConfig,
    pub level1: Vec<Level1Record>,
    pub level2: Vec<SubsetCheck>,
    pub reliable: Vec<String>,
}

impl CheckReport {
    pub fn to_jsonl(&self) -> String {
        render_lines(early_levels(&self.config, &self.level1, &self.level2, &self.reliable))
    }

    pub fn to_text(&self) -> String {
        early_text(&self.level1, &self.level2, &self.reliable)
    }
}

//! Planted-rule corpus generator.
//!
//! Each subset pairs one violation scene, an instance of a randomly chosen
//! planted rule plus an unrelated bystander, with one nominal scene holding a
//! near miss for every minimal generalization of every planted rule (one
//! body literal dropped, or one variable occurrence split). Near misses are
//! labelled negative. A chosen fraction of subsets is corrupted.

use std::collections::{BTreeSet, HashMap};

use chrono::{Duration, NaiveDateTime};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::{Corpus, CorpusEntry, RawBundle, SubsetMeta, TIMESTAMP_FORMAT};
use crate::entailment::consequences;
use crate::eval::Scenario;
use crate::logic::{canonical, print_clause, Atom, BiasSpec, Clause, ExampleSet, Program, Term};

pub const UNKNOWN_PREDICATE: &str = "taxi_speed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// A body fact of the violation instance is missing.
    DropFact,
    /// A full instance of a planted rule appears in the nominal scene,
    /// labelled negative.
    FlippedLabel,
    /// The background mentions a predicate outside the vocabulary.
    UnknownPredicate,
}

const CORRUPTIONS: [Corruption; 3] = [Corruption::DropFact, Corruption::FlippedLabel, Corruption::UnknownPredicate];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub subsets: usize,
    /// Fraction of subsets to corrupt, rounded to the nearest count.
    pub corruption: f64,
    pub seed: u64,
    pub start: NaiveDateTime,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            subsets: 30,
            corruption: 0.0,
            seed: 0,
            start: NaiveDateTime::parse_from_str("2024-01-01T00:00:00", TIMESTAMP_FORMAT).expect("valid"),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("no rules to plant")]
    NoRules,
    #[error("corpus must have at least one subset")]
    NoSubsets,
    #[error("corruption fraction {0} outside [0,1]")]
    BadCorruption(f64),
    #[error("rule `{0}` uses a predicate outside the bias")]
    OutsideBias(String),
}

#[derive(Debug, Clone)]
pub struct SynthSubset {
    pub meta: SubsetMeta,
    pub bundle: RawBundle,
    pub planted_rule: usize,
    pub corruption: Option<Corruption>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub rules: Vec<Clause>,
    pub bias: BiasSpec,
    pub config: SynthConfig,
    pub subsets: Vec<SynthSubset>,
}

impl SynthCorpus {
    pub fn corrupted(&self) -> impl Iterator<Item = &SynthSubset> {
        self.subsets.iter().filter(|s| s.corruption.is_some())
    }

    pub fn to_corpus(&self) -> Corpus {
        Corpus {
            bias: Some(self.bias.to_text()),
            entries: self
                .subsets
                .iter()
                .map(|s| CorpusEntry {
                    meta: s.meta.clone(),
                    bundle: s.bundle.clone(),
                })
                .collect(),
        }
    }

    /// Ground-truth bookkeeping as pretty-printed JSON.
    pub fn manifest(&self) -> String {
        let entries: Vec<_> = self
            .subsets
            .iter()
            .map(|s| json!({"id": s.meta.id, "planted_rule": s.planted_rule, "corruption": s.corruption}))
            .collect();
        let doc = json!({
            "schema": "rulesift.manifest/1",
            "seed": self.config.seed,
            "subsets": self.subsets.len(),
            "corruption": self.config.corruption,
            "rules": self.rules.iter().map(print_clause).collect::<Vec<_>>(),
            "entries": entries,
        });
        serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n"
    }
}

/// A clause-shaped pattern that need not be range-restricted or connected.
#[derive(Debug, Clone)]
struct Pattern {
    head: Atom,
    body: Vec<Atom>,
}

impl Pattern {
    fn of(c: &Clause) -> Self {
        Pattern {
            head: c.head().clone(),
            body: c.body().to_vec(),
        }
    }

    fn key(&self) -> String {
        canonical(&Clause::from_parts_unchecked(self.head.clone(), self.body.clone())).to_string()
    }

    fn occurrences(&self, v: &str) -> usize {
        std::iter::once(&self.head)
            .chain(&self.body)
            .flat_map(|a| a.args.iter())
            .filter(|t| matches!(t, Term::Var(x) if x == v))
            .count()
    }
}

fn near_misses(rule: &Clause) -> Vec<Pattern> {
    let base = Pattern::of(rule);
    let mut seen = BTreeSet::new();
    seen.insert(base.key());
    let mut out = Vec::new();
    let mut push = |p: Pattern, out: &mut Vec<Pattern>| {
        if seen.insert(p.key()) {
            out.push(p);
        }
    };
    for i in 0..base.body.len() {
        let mut p = base.clone();
        p.body.remove(i);
        push(p, &mut out);
    }
    for i in 0..base.body.len() {
        for j in 0..base.body[i].args.len() {
            let Term::Var(v) = &base.body[i].args[j] else { continue };
            if base.occurrences(v) < 2 {
                continue;
            }
            let mut p = base.clone();
            p.body[i].args[j] = Term::Var("Split".into());
            push(p, &mut out);
        }
    }
    out
}

/// Grounds a pattern with constants `<scope>_<t><k>`, where `t` is the first
/// letter of the variable's declared type and `k` its first-occurrence index.
fn instantiate(p: &Pattern, scope: &str, bias: &BiasSpec) -> (Vec<Atom>, Atom) {
    let mut names: HashMap<String, String> = HashMap::new();
    for atom in std::iter::once(&p.head).chain(&p.body) {
        for (pos, t) in atom.args.iter().enumerate() {
            if let Term::Var(v) = t {
                if !names.contains_key(v) {
                    let tag = bias
                        .decl(&atom.predicate)
                        .and_then(|d| d.arg_type(pos))
                        .and_then(|t| t.chars().next())
                        .unwrap_or('c');
                    let k = names.len();
                    names.insert(v.clone(), format!("{scope}_{tag}{k}"));
                }
            }
        }
    }
    let ground = |a: &Atom| {
        Atom::new(
            a.predicate.clone(),
            a.args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Term::Const(names[v].clone()),
                    c => c.clone(),
                })
                .collect(),
        )
    };
    let mut facts: Vec<Atom> = Vec::new();
    for b in &p.body {
        let g = ground(b);
        if !facts.contains(&g) {
            facts.push(g);
        }
    }
    (facts, ground(&p.head))
}

struct Planter<'a> {
    rules: Vec<Clause>,
    planted: Program,
    bias: &'a BiasSpec,
    misses: Vec<Pattern>,
}

impl<'a> Planter<'a> {
    fn new(rules: &Program, bias: &'a BiasSpec) -> Result<Self, SynthError> {
        let rules: Vec<Clause> = rules.rules().cloned().collect();
        if rules.is_empty() {
            return Err(SynthError::NoRules);
        }
        for r in &rules {
            let head_ok = bias.head_decl(&r.head().predicate).is_some_and(|d| d.arity == r.head().arity());
            let body_ok = r.body().iter().all(|b| bias.body_decl(&b.predicate).is_some_and(|d| d.arity == b.arity()));
            if !head_ok || !body_ok {
                return Err(SynthError::OutsideBias(print_clause(r)));
            }
        }
        let misses = rules.iter().flat_map(near_misses).collect();
        Ok(Planter {
            planted: rules.iter().cloned().collect(),
            rules,
            bias,
            misses,
        })
    }

    /// Ground near miss for pattern `i`, or `None` when some planted rule
    /// would still fire on it.
    fn near_miss(&self, i: usize, scope: &str) -> Option<(Vec<Atom>, Vec<Atom>)> {
        let (facts, head) = instantiate(&self.misses[i], scope, self.bias);
        let bk = Program::from_facts(facts.iter().cloned()).expect("ground");
        if consequences(&bk, &self.planted).len() != bk.len() {
            return None;
        }
        let mut negs = vec![head.clone()];
        if head.arity() == 2 && head.args[0] != head.args[1] {
            negs.push(Atom::new(head.predicate.clone(), vec![head.args[1].clone(), head.args[0].clone()]));
        }
        Some((facts, negs))
    }

    fn bystander(&self, rng: &mut ChaCha8Rng, scope: &str) -> Atom {
        let decl = &self.bias.body_decls[rng.random_range(0..self.bias.body_decls.len())];
        let args = (0..decl.arity)
            .map(|k| {
                let tag = decl.arg_type(k).and_then(|t| t.chars().next()).unwrap_or('c');
                Term::Const(format!("{scope}_{tag}{k}"))
            })
            .collect();
        Atom::new(decl.name.clone(), args)
    }

    fn violation(&self, rng: &mut ChaCha8Rng, scope: &str) -> (usize, Vec<Atom>, Atom) {
        let k = rng.random_range(0..self.rules.len());
        let (facts, head) = instantiate(&Pattern::of(&self.rules[k]), &format!("{scope}_v"), self.bias);
        (k, facts, head)
    }
}

fn render(background: &[Atom], pos: &[Atom], neg: &[Atom]) -> RawBundle {
    let mut bk = String::new();
    for f in background {
        bk.push_str(&format!("{f}.\n"));
    }
    let mut exs = String::new();
    for p in pos {
        exs.push_str(&format!("pos({p}).\n"));
    }
    for n in neg {
        exs.push_str(&format!("neg({n}).\n"));
    }
    RawBundle {
        background: bk,
        examples: exs,
    }
}

fn first_constant_of_type(facts: &[Atom], bias: &BiasSpec, ty: &str) -> Option<String> {
    facts.iter().find_map(|f| {
        let decl = bias.decl(&f.predicate)?;
        (0..f.arity()).find(|&i| decl.arg_type(i) == Some(ty)).map(|i| f.args[i].name().to_string())
    })
}

pub fn generate_corpus(rules: &Program, bias: &BiasSpec, cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    if cfg.subsets == 0 {
        return Err(SynthError::NoSubsets);
    }
    if !(0.0..=1.0).contains(&cfg.corruption) {
        return Err(SynthError::BadCorruption(cfg.corruption));
    }
    let planter = Planter::new(rules, bias)?;

    let mut pick = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_bad = ((cfg.corruption * cfg.subsets as f64).round() as usize).min(cfg.subsets);
    let mut kinds: Vec<Option<Corruption>> = vec![None; cfg.subsets];
    for i in sample(&mut pick, cfg.subsets, n_bad) {
        kinds[i] = Some(CORRUPTIONS[pick.random_range(0..CORRUPTIONS.len())]);
    }

    let mut subsets = Vec::with_capacity(cfg.subsets);
    for (i, kind) in kinds.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);
        let id = format!("s{i:03}");

        let (k, mut facts, pos) = planter.violation(&mut rng, &id);
        let mut background = Vec::new();
        if kind == Some(Corruption::DropFact) && !facts.is_empty() {
            facts.remove(rng.random_range(0..facts.len()));
        }
        background.extend(facts);
        background.push(planter.bystander(&mut rng, &format!("{id}_b")));

        let mut negatives = Vec::new();
        for g in 0..planter.misses.len() {
            if let Some((f, n)) = planter.near_miss(g, &format!("{id}_n{g}")) {
                background.extend(f);
                negatives.extend(n);
            }
        }
        match kind {
            Some(Corruption::FlippedLabel) => {
                let (_, f, head) = planter.violation(&mut rng, &format!("{id}_f"));
                background.extend(f);
                let at = rng.random_range(0..=negatives.len());
                negatives.insert(at, head);
            }
            Some(Corruption::UnknownPredicate) => {
                let who = first_constant_of_type(&background, bias, "agent")
                    .unwrap_or_else(|| format!("{id}_u0"));
                let at = rng.random_range(0..=background.len());
                background.insert(at, Atom::new(UNKNOWN_PREDICATE, vec![Term::Const(who), Term::Const("fast".into())]));
            }
            _ => {}
        }

        let mut meta = SubsetMeta::new(&id, cfg.start + Duration::hours(i as i64));
        meta.violation_source = format!("{id}_violation");
        meta.nominal_source = format!("{id}_nominal");
        meta.tags = vec![format!("rule-{k}")];
        subsets.push(SynthSubset {
            meta,
            bundle: render(&background, &[pos], &negatives),
            planted_rule: k,
            corruption: kind,
        });
    }
    Ok(SynthCorpus {
        rules: planter.rules,
        bias: bias.clone(),
        config: cfg.clone(),
        subsets,
    })
}

/// Held-out scenarios drawn from the same rules: scenario `j` holds one
/// instance of rule `j mod |rules|` (positive) and one random near miss
/// (negative).
pub fn generate_scenarios(rules: &Program, bias: &BiasSpec, count: usize, seed: u64) -> Result<Vec<Scenario>, SynthError> {
    let planter = Planter::new(rules, bias)?;
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce0_a210);
        rng.set_stream(j as u64);
        let id = format!("t{j:03}");
        let k = j % planter.rules.len();
        let (mut facts, pos) = instantiate(&Pattern::of(&planter.rules[k]), &format!("{id}_v"), bias);
        facts.push(planter.bystander(&mut rng, &format!("{id}_b")));
        let mut negatives = Vec::new();
        for _ in 0..planter.misses.len().max(1) * 4 {
            if planter.misses.is_empty() {
                break;
            }
            let g = rng.random_range(0..planter.misses.len());
            if let Some((f, n)) = planter.near_miss(g, &format!("{id}_n")) {
                facts.extend(f);
                negatives.push(n[0].clone());
                break;
            }
        }
        out.push(Scenario {
            id,
            background: Program::from_facts(facts).expect("ground"),
            examples: ExampleSet::from_parts(vec![pos], negatives).expect("disjoint scopes"),
            tags: vec![format!("rule-{k}"), "planted".into()],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_bias, parse_examples, parse_facts, parse_program, RUNWAY_BIAS, RUNWAY_RULES};

    fn setup() -> (Program, BiasSpec) {
        (parse_program(RUNWAY_RULES).unwrap(), parse_bias(RUNWAY_BIAS).unwrap())
    }

    #[test]
    fn crossing_rule_near_misses() {
        let r = crate::logic::parse_clause("collision(V0,V1):- landing_runway(V1,V2),cross_runway(V0,V2).").unwrap();
        let keys: BTreeSet<String> = near_misses(&r).iter().map(Pattern::key).collect();
        // two drops and four splits; splitting either V2 occurrence gives the same shape
        assert_eq!(keys.len(), 5);
    }

    #[test]
    fn clean_subsets_are_consistent_with_the_planted_rules() {
        let (rules, bias) = setup();
        let corpus = generate_corpus(&rules, &bias, &SynthConfig { subsets: 6, ..Default::default() }).unwrap();
        for s in &corpus.subsets {
            let bk = parse_facts(&s.bundle.background).unwrap();
            let exs = parse_examples(&s.bundle.examples).unwrap();
            assert_eq!(exs.positives().len(), 1);
            assert!(exs.negatives().len() > 10);
            assert!(crate::learner::verify(&bk, &rules, &exs).is_consistent(), "{}", s.meta.id);
        }
    }

    #[test]
    fn corruption_count_and_determinism() {
        let (rules, bias) = setup();
        let cfg = SynthConfig {
            subsets: 30,
            corruption: 0.1,
            seed: 9,
            ..Default::default()
        };
        let a = generate_corpus(&rules, &bias, &cfg).unwrap();
        let b = generate_corpus(&rules, &bias, &cfg).unwrap();
        assert_eq!(a.corrupted().count(), 3);
        assert_eq!(a.manifest(), b.manifest());
        assert_eq!(a.to_corpus(), b.to_corpus());
    }

    #[test]
    fn flipped_label_contradicts_the_rules() {
        let (rules, bias) = setup();
        let cfg = SynthConfig {
            subsets: 12,
            corruption: 1.0,
            seed: 3,
            ..Default::default()
        };
        let corpus = generate_corpus(&rules, &bias, &cfg).unwrap();
        for s in &corpus.subsets {
            match s.corruption.unwrap() {
                Corruption::FlippedLabel => {
                    let bk = parse_facts(&s.bundle.background).unwrap();
                    let exs = parse_examples(&s.bundle.examples).unwrap();
                    assert!(!crate::learner::verify(&bk, &rules, &exs).is_consistent());
                }
                Corruption::UnknownPredicate => assert!(s.bundle.background.contains(UNKNOWN_PREDICATE)),
                Corruption::DropFact => {}
            }
        }
    }

    #[test]
    fn scenarios_cover_every_rule() {
        let (rules, bias) = setup();
        let sc = generate_scenarios(&rules, &bias, 9, 1).unwrap();
        assert_eq!(sc.len(), 9);
        let r = crate::eval::evaluate(&rules, &sc);
        assert_eq!(r.metrics.accuracy, 1.0);
        assert_eq!(r.confusion.tn, 9);
    }

    #[test]
    fn bad_inputs() {
        let (rules, bias) = setup();
        let zero = SynthConfig { subsets: 0, ..Default::default() };
        assert_eq!(generate_corpus(&rules, &bias, &zero).unwrap_err(), SynthError::NoSubsets);
        let neg = SynthConfig { corruption: 1.5, ..Default::default() };
        assert!(matches!(generate_corpus(&rules, &bias, &neg), Err(SynthError::BadCorruption(_))));
        assert_eq!(generate_corpus(&Program::new(), &bias, &Default::default()).unwrap_err(), SynthError::NoRules);
    }
}

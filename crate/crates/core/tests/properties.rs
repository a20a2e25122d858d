mod common;

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{entails_flat, fact_index, join_model, naive_model, random_instance};
use rulesift::entailment::{consequences, rule_support};
use rulesift::eval::{diff_hypotheses, Scenario};
use rulesift::learner::{enumerate_clauses, verify, Outcome, ReferenceLearner, Solver, SolverRequest};
use rulesift::logic::{
    canonical, parse_bias, parse_clause, parse_examples, parse_facts, parse_program, print_clause, print_program, Atom,
    BiasSpec, Clause, ExampleSet, Program, Term,
};
use rulesift::pipeline::prune_by_support;

const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

fn arb_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        8 => prop::sample::select(&VARS[..]).prop_map(|v| Term::Var(v.into())),
        1 => prop::sample::select(&["k1", "k2", "rwy_09l"][..]).prop_map(|c| Term::Const(c.into())),
    ]
}

fn arb_atom(preds: &'static [(&'static str, usize)]) -> impl Strategy<Value = Atom> {
    prop::sample::select(preds).prop_flat_map(|(p, n)| prop::collection::vec(arb_term(), n).prop_map(move |args| Atom::new(p, args)))
}

const HEADS: &[(&str, usize)] = &[("t", 2), ("u", 1)];
const BODIES: &[(&str, usize)] = &[("a", 2), ("b", 1), ("c", 2)];

fn arb_clause() -> impl Strategy<Value = Clause> {
    (arb_atom(HEADS), prop::collection::vec(arb_atom(BODIES), 1..=3)).prop_filter_map("ill-formed", |(h, mut body)| {
        let mut seen = BTreeSet::new();
        body.retain(|a| seen.insert(a.clone()));
        Clause::new(h, body).ok()
    })
}

fn rename(a: &Atom, map: &HashMap<String, String>) -> Atom {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => Term::Var(map[v].clone()),
            c => c.clone(),
        })
        .collect();
    Atom::new(a.predicate.clone(), args)
}

/// Variant check by trying every bijection between the variable sets.
fn variants(a: &Clause, b: &Clause) -> bool {
    let (va, vb) = (a.variables(), b.variables());
    if va.len() != vb.len() || a.body().len() != b.body().len() {
        return false;
    }
    let mut target: Vec<&Atom> = b.body().iter().collect();
    target.sort();
    let mut perm: Vec<usize> = (0..vb.len()).collect();
    loop {
        let map: HashMap<String, String> = va.iter().zip(&perm).map(|(x, &i)| (x.to_string(), vb[i].to_string())).collect();
        if rename(a.head(), &map) == *b.head() {
            let mut body: Vec<Atom> = a.body().iter().map(|x| rename(x, &map)).collect();
            body.sort();
            if body.iter().eq(target.iter().copied()) {
                return true;
            }
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else { return false };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Random renaming and body shuffle of `c`.
fn scramble(c: &Clause, seed: u64) -> Clause {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fresh: Vec<String> = (0..c.variables().len()).map(|i| format!("Q{i}")).collect();
    fresh.shuffle(&mut rng);
    let map: HashMap<String, String> = c.variables().into_iter().map(str::to_string).zip(fresh).collect();
    let mut body: Vec<Atom> = c.body().iter().map(|a| rename(a, &map)).collect();
    body.shuffle(&mut rng);
    Clause::new(rename(c.head(), &map), body).unwrap()
}

proptest! {
    #[test]
    fn clause_text_round_trips(c in arb_clause()) {
        prop_assert_eq!(parse_clause(&c.to_string()).unwrap(), c.clone());
        let printed = print_clause(&c);
        prop_assert_eq!(parse_clause(&printed).unwrap(), canonical(&c));
    }

    #[test]
    fn program_text_round_trips(cs in prop::collection::vec(arb_clause(), 0..6)) {
        let p: Program = cs.into_iter().collect();
        prop_assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }

    #[test]
    fn canonical_is_idempotent(c in arb_clause()) {
        let once = canonical(&c);
        prop_assert_eq!(canonical(&once), once);
    }

    #[test]
    fn canonical_ignores_names_and_order(c in arb_clause(), seed in any::<u64>()) {
        let s = scramble(&c, seed);
        prop_assert_eq!(canonical(&s), canonical(&c));
    }

    #[test]
    fn canonical_agrees_with_brute_force_variants(a in arb_clause(), b in arb_clause()) {
        prop_assert_eq!(canonical(&a) == canonical(&b), variants(&a, &b), "{} vs {}", a, b);
    }

    #[test]
    fn parser_never_panics(text in "[a-zA-Z_(),.:\\- %\n0-9]{0,60}") {
        let _ = parse_program(&text);
        let _ = parse_facts(&text);
        let _ = parse_examples(&text);
        let _ = parse_bias(&text);
    }

    #[test]
    fn consequences_match_naive_grounding(seed in any::<u64>()) {
        let (b, h) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let got: BTreeSet<Atom> = consequences(&b, &h).atoms().into_iter().collect();
        prop_assert_eq!(got, naive_model(&b, &h));
    }

    #[test]
    fn consequences_are_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, h) = random_instance(&mut rng);
        let (b2, h2) = random_instance(&mut rng);
        let base: BTreeSet<Atom> = consequences(&b, &h).atoms().into_iter().collect();
        let more_facts: BTreeSet<Atom> = consequences(&b.union(&b2), &h).atoms().into_iter().collect();
        let more_rules: BTreeSet<Atom> = consequences(&b, &h.union(&h2)).atoms().into_iter().collect();
        prop_assert!(base.is_subset(&more_facts));
        prop_assert!(base.is_subset(&more_rules));
    }

    #[test]
    fn goal_directed_oracle_matches_join_model(seed in any::<u64>()) {
        let (b, h) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let flat: Program = h
            .rules()
            .map(|r| {
                let head = Atom::new(format!("q{}", r.head().predicate), r.head().args.clone());
                Clause::new(head, r.body().to_vec()).unwrap()
            })
            .collect();
        let model = join_model(&b, &flat);
        let consts: Vec<Term> = b.facts().flat_map(|a| a.args.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let index = fact_index(&b);
        for r in flat.rules() {
            let arity = r.head().args.len();
            for code in 0..consts.len().pow(arity as u32) {
                let args = (0..arity).map(|i| consts[code / consts.len().pow(i as u32) % consts.len()].clone()).collect();
                let goal = Atom::new(r.head().predicate.clone(), args);
                prop_assert_eq!(entails_flat(&index, &flat, &goal), Some(model.contains(&goal)));
            }
        }
    }

    #[test]
    fn support_is_monotone_in_background(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, h) = random_instance(&mut rng);
        let (b2, _) = random_instance(&mut rng);
        let pos: Vec<Atom> = naive_model(&b.union(&b2), &h).into_iter().collect();
        for r in h.rules() {
            prop_assert!(rule_support(r, &b, &pos) <= rule_support(r, &b.union(&b2), &pos));
        }
    }
}

const TOY_BIAS: &str = "head_pred(t,2).\nbody_pred(a,2).\nbody_pred(b,1).\nbody_pred(c,2).\n";

/// Random learning task over `t/2` with background over `a/2, b/1, c/2`.
fn learning_task(seed: u64) -> (Program, ExampleSet, BiasSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = |rng: &mut ChaCha8Rng| format!("k{}", rng.random_range(0..5));
    let mut b = Program::new();
    for _ in 0..rng.random_range(2..12) {
        let atom = match rng.random_range(0..3) {
            0 => Atom::ground("a", &[&k(&mut rng), &k(&mut rng)]),
            1 => Atom::ground("b", &[&k(&mut rng)]),
            _ => Atom::ground("c", &[&k(&mut rng), &k(&mut rng)]),
        };
        b.insert(Clause::fact(atom.unwrap()).unwrap());
    }
    let mut exs = ExampleSet::new();
    for _ in 0..rng.random_range(1..6) {
        let e = Atom::ground("t", &[&k(&mut rng), &k(&mut rng)]).unwrap();
        if exs.is_positive(&e) || exs.is_negative(&e) {
            continue;
        }
        if rng.random_bool(0.5) {
            exs.add_positive(e).unwrap();
        } else {
            exs.add_negative(e).unwrap();
        }
    }
    let bias = parse_bias(TOY_BIAS).unwrap().with_bounds(3, 2, 2);
    (b, exs, bias)
}

/// The learner without pruning: every enumerated clause scored by the join
/// oracle, then the same greedy cover.
fn unpruned_reference(b: &Program, exs: &ExampleSet, bias: &BiasSpec) -> Option<Program> {
    let facts = join_model(b, &Program::new());
    if exs.negatives().iter().any(|n| facts.contains(n)) {
        return None;
    }
    let open: Vec<&Atom> = exs.positives().iter().filter(|p| !facts.contains(p)).collect();
    if open.is_empty() {
        return Some(Program::new());
    }
    let mut cands: Vec<(Clause, String, BTreeSet<usize>)> = Vec::new();
    for c in enumerate_clauses(bias) {
        let model = join_model(b, &std::iter::once(c.clone()).collect());
        if exs.negatives().iter().any(|n| model.contains(n)) {
            continue;
        }
        let covered: BTreeSet<usize> = (0..open.len()).filter(|&i| model.contains(open[i])).collect();
        if !covered.is_empty() {
            cands.push((c.clone(), print_clause(&c), covered));
        }
    }
    let mut uncovered: BTreeSet<usize> = (0..open.len()).collect();
    let mut h = Program::new();
    while !uncovered.is_empty() && h.len() < bias.max_clauses {
        let best = cands
            .iter()
            .map(|(c, t, cov)| (cov.intersection(&uncovered).count(), std::cmp::Reverse(c.body().len()), std::cmp::Reverse(t), c, cov))
            .filter(|x| x.0 > 0)
            .max_by(|x, y| (x.0, x.1, &x.2).cmp(&(y.0, y.1, &y.2)))?;
        for i in best.4 {
            uncovered.remove(i);
        }
        h.insert(best.3.clone());
    }
    uncovered.is_empty().then_some(h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn solver_is_sound(seed in any::<u64>()) {
        let (b, exs, bias) = learning_task(seed);
        let req = SolverRequest::new(b.clone(), exs.clone(), bias.clone());
        let res = ReferenceLearner::new().solve(&req).unwrap();
        if let Outcome::Hypothesis(h) = &res.outcome {
            let model = join_model(&b, h);
            prop_assert!(exs.positives().iter().all(|p| model.contains(p)));
            prop_assert!(exs.negatives().iter().all(|n| !model.contains(n)));
            prop_assert!(h.len() <= bias.max_clauses);
            for c in h.iter() {
                prop_assert!(c.body().len() <= bias.max_body);
                prop_assert!(c.variables().len() <= bias.max_vars);
            }
        }
    }

    #[test]
    fn pruned_search_equals_unpruned_reference(seed in any::<u64>()) {
        let (b, exs, bias) = learning_task(seed);
        let res = ReferenceLearner::new().solve(&SolverRequest::new(b.clone(), exs.clone(), bias.clone())).unwrap();
        let expected = unpruned_reference(&b, &exs, &bias);
        prop_assert_eq!(res.hypothesis().cloned(), expected);
    }

    #[test]
    fn solver_is_deterministic(seed in any::<u64>()) {
        let (b, exs, bias) = learning_task(seed);
        let req = SolverRequest::new(b, exs, bias);
        let s = ReferenceLearner::new();
        prop_assert_eq!(s.solve(&req).unwrap().outcome, s.solve(&req).unwrap().outcome);
    }

    #[test]
    fn verify_agrees_with_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, h) = random_instance(&mut rng);
        let model: Vec<Atom> = naive_model(&b, &h).into_iter().collect();
        let mut exs = ExampleSet::new();
        for a in model.iter().filter(|_| rng.random_bool(0.5)) {
            exs.add_positive(a.clone()).unwrap();
        }
        let consistent = verify(&b, &h, &exs).is_consistent();
        prop_assert!(consistent);
        let (b2, _) = random_instance(&mut rng);
        let extra = b2.facts().find(|f| !model.contains(f)).cloned();
        if let Some(extra) = extra {
            exs.add_positive(extra).unwrap();
            prop_assert!(!verify(&b, &h, &exs).is_consistent());
        }
    }

    #[test]
    fn raising_tau_never_keeps_more(seed in any::<u64>(), t1 in 0.01f64..=1.0, t2 in 0.01f64..=1.0) {
        let (b, h) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let rules: Program = h.rules().cloned().collect();
        let pos: Vec<Atom> = naive_model(&b, &rules).into_iter().collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let loose = prune_by_support(&rules, &b, &pos, lo).kept;
        let strict = prune_by_support(&rules, &b, &pos, hi).kept;
        prop_assert!(strict.is_subset(&loose));
        if !rules.is_empty() {
            prop_assert!(!strict.is_empty());
        }
    }

    #[test]
    fn dropping_rules_never_adds_false_positives(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, h) = random_instance(&mut rng);
        let model = naive_model(&b, &h);
        let mut exs = ExampleSet::new();
        for a in &model {
            if rng.random_bool(0.5) {
                exs.add_positive(a.clone()).unwrap();
            } else {
                exs.add_negative(a.clone()).unwrap();
            }
        }
        let sc = vec![Scenario { id: "s".into(), background: b.clone(), examples: exs, tags: vec![] }];
        prop_assert!(diff_hypotheses(&h, &h, &sc).is_empty());
        let mut smaller = h.clone();
        if let Some(r) = h.rules().next() {
            smaller.remove(r);
        }
        let d = diff_hypotheses(&h, &smaller, &sc).delta;
        prop_assert!(d.fp <= 0 && d.tp <= 0);
        prop_assert_eq!(d.tp + d.fn_, 0);
        prop_assert_eq!(d.fp + d.tn, 0);
    }
}

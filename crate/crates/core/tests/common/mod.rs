//! Test-side oracles. None of these touch the library's entailment engine.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::Rng;
use rulesift::logic::{Atom, Clause, Program, Term};

pub fn subst(a: &Atom, s: &HashMap<String, String>) -> Atom {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => Term::Const(s[v].clone()),
            c => c.clone(),
        })
        .collect();
    Atom::new(a.predicate.clone(), args)
}

fn constants(p: &Program) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for c in p.iter() {
        for a in std::iter::once(c.head()).chain(c.body()) {
            for t in &a.args {
                if let Term::Const(k) = t {
                    out.insert(k.clone());
                }
            }
        }
    }
    out
}

/// Least model by grounding every rule over every constant, to fixpoint.
pub fn naive_model(b: &Program, h: &Program) -> BTreeSet<Atom> {
    let mut model: BTreeSet<Atom> = b.facts().chain(h.facts()).cloned().collect();
    let consts: Vec<String> = constants(b).union(&constants(h)).cloned().collect();
    loop {
        let mut fresh = Vec::new();
        for r in h.rules() {
            let vars: Vec<String> = r.variables().into_iter().map(str::to_string).collect();
            if consts.is_empty() {
                continue;
            }
            let total = consts.len().pow(vars.len() as u32);
            for mut code in 0..total {
                let mut s = HashMap::new();
                for v in &vars {
                    s.insert(v.clone(), consts[code % consts.len()].clone());
                    code /= consts.len();
                }
                if r.body().iter().all(|a| model.contains(&subst(a, &s))) {
                    let head = subst(r.head(), &s);
                    if !model.contains(&head) {
                        fresh.push(head);
                    }
                }
            }
        }
        if fresh.is_empty() {
            return model;
        }
        model.extend(fresh);
    }
}

fn unify(pattern: &Atom, fact: &Atom, s: &mut HashMap<String, String>, bound: &mut Vec<String>) -> bool {
    for (p, f) in pattern.args.iter().zip(&fact.args) {
        let Term::Const(fc) = f else { return false };
        match p {
            Term::Const(pc) if pc != fc => return false,
            Term::Const(_) => {}
            Term::Var(v) => match s.get(v) {
                Some(x) if x != fc => return false,
                Some(_) => {}
                None => {
                    s.insert(v.clone(), fc.clone());
                    bound.push(v.clone());
                }
            },
        }
    }
    true
}

fn solutions(body: &[Atom], facts: &HashMap<(String, usize), Vec<Atom>>, s: &mut HashMap<String, String>, out: &mut Vec<HashMap<String, String>>) {
    let Some((first, rest)) = body.split_first() else {
        out.push(s.clone());
        return;
    };
    let Some(cands) = facts.get(&(first.predicate.clone(), first.args.len())) else { return };
    for f in cands {
        let mut bound = Vec::new();
        if unify(first, f, s, &mut bound) {
            solutions(rest, facts, s, out);
        }
        for v in bound {
            s.remove(&v);
        }
    }
}

/// Least model by left-to-right backtracking joins, to fixpoint.
pub fn join_model(b: &Program, h: &Program) -> HashSet<Atom> {
    let mut model: HashSet<Atom> = b.facts().chain(h.facts()).cloned().collect();
    loop {
        let mut index: HashMap<(String, usize), Vec<Atom>> = HashMap::new();
        for a in &model {
            index.entry((a.predicate.clone(), a.args.len())).or_default().push(a.clone());
        }
        let before = model.len();
        for r in h.rules() {
            let mut sols = Vec::new();
            solutions(r.body(), &index, &mut HashMap::new(), &mut sols);
            model.extend(sols.iter().map(|s| subst(r.head(), s)));
        }
        if model.len() == before {
            return model;
        }
    }
}

/// Random background and rule set over `p0..p3` and `c0..c4`, recursion
/// allowed.
pub fn random_instance(rng: &mut impl Rng) -> (Program, Program) {
    let nc = rng.random_range(1..=5);
    let np = rng.random_range(1..=4);
    let arity: Vec<usize> = (0..np).map(|_| rng.random_range(1..=2)).collect();
    let mut b = Program::new();
    for _ in 0..rng.random_range(0..=12) {
        let p = rng.random_range(0..np);
        let args = (0..arity[p]).map(|_| Term::Const(format!("c{}", rng.random_range(0..nc)))).collect();
        b.insert(Clause::fact(Atom::new(format!("p{p}"), args)).unwrap());
    }
    let mut h = Program::new();
    let want = rng.random_range(0..=3);
    for _ in 0..60 {
        if h.len() >= want {
            break;
        }
        let body: Vec<Atom> = (0..rng.random_range(1..=3))
            .map(|_| {
                let p = rng.random_range(0..np);
                Atom::new(format!("p{p}"), (0..arity[p]).map(|_| term(rng, nc)).collect())
            })
            .collect();
        let p = rng.random_range(0..np);
        let head = Atom::new(format!("p{p}"), (0..arity[p]).map(|_| term(rng, nc)).collect());
        if let Ok(c) = Clause::new(head, body) {
            h.insert(c);
        }
    }
    (b, h)
}

fn term(rng: &mut impl Rng, nc: usize) -> Term {
    if rng.random_bool(0.1) {
        Term::Const(format!("c{}", rng.random_range(0..nc)))
    } else {
        Term::Var(format!("V{}", rng.random_range(0..4)))
    }
}

pub const TOY_BIAS: &str = "head_pred(t,1).\nbody_pred(f1,1).\nbody_pred(f2,1).\nbody_pred(f3,1).\n";

pub fn instance(id: &str, hour: u32, bk: &str, exs: &str) -> rulesift::pipeline::SubsetInstance {
    let ts = chrono::NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(hour, 0, 0).unwrap();
    let meta = rulesift::ingestion::SubsetMeta::new(id, ts);
    rulesift::pipeline::SubsetInstance::new(
        &meta,
        rulesift::logic::parse_facts(bk).unwrap(),
        rulesift::logic::parse_examples(exs).unwrap(),
    )
}

/// Three subsets over one-feature rules `t(X):- fi(X)`. `x` comes first
/// and fits f2 or f3 only; `y` fits f1 or f2; `z` fits f1 or f3. Orders
/// that put `x` last keep all three once `x` drops its negative.
pub fn order_sensitive() -> (Vec<rulesift::pipeline::SubsetInstance>, rulesift::logic::BiasSpec) {
    let subsets = vec![
        instance("x", 1, "f1(x). f2(x). f3(x). f1(xn).", "pos(t(x)). neg(t(xn))."),
        instance("y", 2, "f1(y). f2(y).", "pos(t(y))."),
        instance("z", 3, "f1(z). f3(z).", "pos(t(z))."),
    ];
    let bias = rulesift::logic::parse_bias(TOY_BIAS).unwrap().with_bounds(1, 1, 1);
    (subsets, bias)
}

/// Facts of `b` indexed by predicate and arity.
pub fn fact_index(b: &Program) -> HashMap<(String, usize), Vec<Atom>> {
    let mut index: HashMap<(String, usize), Vec<Atom>> = HashMap::new();
    for a in b.facts() {
        index.entry((a.predicate.clone(), a.args.len())).or_default().push(a.clone());
    }
    index
}

/// Goal-directed check of a ground `goal` against non-recursive rules whose
/// bodies use background predicates only. `None` when `h` is outside that
/// fragment.
pub fn entails_flat(index: &HashMap<(String, usize), Vec<Atom>>, h: &Program, goal: &Atom) -> Option<bool> {
    let heads: HashSet<&str> = h.iter().map(|c| c.head().predicate.as_str()).collect();
    if h.rules().any(|r| r.body().iter().any(|a| heads.contains(a.predicate.as_str()))) {
        return None;
    }
    if index.get(&(goal.predicate.clone(), goal.args.len())).is_some_and(|fs| fs.contains(goal))
        || h.facts().any(|f| f == goal)
    {
        return Some(true);
    }
    for r in h.rules() {
        if r.head().predicate != goal.predicate || r.head().args.len() != goal.args.len() {
            continue;
        }
        let mut s = HashMap::new();
        if !unify(r.head(), goal, &mut s, &mut Vec::new()) {
            continue;
        }
        let mut sols = Vec::new();
        solutions(r.body(), index, &mut s, &mut sols);
        if !sols.is_empty() {
            return Some(true);
        }
    }
    Some(false)
}

/// Whether `h` with `b` covers every positive and no negative, using
/// [`entails_flat`] when it applies and [`join_model`] otherwise.
pub fn training_correct(b: &Program, h: &Program, exs: &rulesift::logic::ExampleSet) -> bool {
    let index = fact_index(b);
    let probe = exs.positives().first().or(exs.negatives().first());
    if probe.is_some_and(|g| entails_flat(&index, h, g).is_none()) {
        let model = join_model(b, h);
        return exs.positives().iter().all(|p| model.contains(p)) && exs.negatives().iter().all(|n| !model.contains(n));
    }
    exs.positives().iter().all(|p| entails_flat(&index, h, p) == Some(true))
        && exs.negatives().iter().all(|n| entails_flat(&index, h, n) == Some(false))
}

//! Bias-bounded clause search and greedy cover.
//!
//! Clauses are grown one body literal at a time from a bare head; every new
//! literal must share a variable with the clause so far, which reaches every
//! connected clause. [`enumerate_clauses`] walks the whole space. The
//! [`ReferenceLearner`] walks the same refinement graph but drops a clause
//! (and everything below it) once it covers no positive, and stops refining
//! a clause once it is range-restricted and negative-safe: refinements only
//! shrink coverage, so they can never outrank it in the greedy cover.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use super::{verify, Outcome, SolveError, Solver, SolverRequest, SolverResult, SolverStats, Verdict};
use crate::entailment::{first_arg, unify_row, FactStore, Literal, Slot};
use crate::logic::{canonical, Atom, BiasSpec, Clause, PredDecl, Program, Term};

struct Refiner<'a> {
    bias: &'a BiasSpec,
    body_decls: Vec<&'a PredDecl>,
}

impl<'a> Refiner<'a> {
    fn new(bias: &'a BiasSpec) -> Self {
        // Head predicates never appear in bodies: no recursion, no chaining.
        let body_decls = bias
            .body_decls
            .iter()
            .filter(|d| bias.head_decl(&d.name).is_none())
            .collect();
        Refiner { bias, body_decls }
    }

    fn roots(&self) -> Vec<Clause> {
        self.bias
            .head_decls
            .iter()
            .filter(|d| d.arity > 0 && d.arity <= self.bias.max_vars)
            .map(|d| {
                let args = (0..d.arity).map(|i| Term::Var(format!("V{i}"))).collect();
                Clause::from_parts_unchecked(Atom::new(d.name.clone(), args), Vec::new())
            })
            .collect()
    }

    fn var_types(&self, c: &Clause) -> Vec<(String, Option<String>)> {
        let mut out: Vec<(String, Option<String>)> = Vec::new();
        for atom in std::iter::once(c.head()).chain(c.body()) {
            let decl = if std::ptr::eq(atom, c.head()) {
                self.bias.head_decl(&atom.predicate)
            } else {
                self.bias.body_decl(&atom.predicate)
            };
            for (i, t) in atom.args.iter().enumerate() {
                if let Term::Var(v) = t {
                    let ty = decl.and_then(|d| d.arg_type(i)).map(str::to_string);
                    match out.iter_mut().find(|(n, _)| n == v) {
                        Some((_, slot)) => {
                            if slot.is_none() {
                                *slot = ty;
                            }
                        }
                        None => out.push((v.clone(), ty)),
                    }
                }
            }
        }
        out
    }

    /// Canonical one-literal extensions of `c`, keyed by canonical text.
    fn refine(&self, c: &Clause, out: &mut BTreeMap<String, Clause>) {
        if c.body().len() >= self.bias.max_body {
            return;
        }
        let vars = self.var_types(c);
        for decl in &self.body_decls {
            let mut args: Vec<Term> = Vec::with_capacity(decl.arity);
            self.assign(c, &vars, decl, &mut args, 0, out);
        }
    }

    fn assign(
        &self,
        c: &Clause,
        vars: &[(String, Option<String>)],
        decl: &PredDecl,
        args: &mut Vec<Term>,
        fresh: usize,
        out: &mut BTreeMap<String, Clause>,
    ) {
        let pos = args.len();
        if pos == decl.arity {
            let shares = args
                .iter()
                .any(|t| matches!(t, Term::Var(v) if !v.starts_with('F')));
            if !shares {
                return;
            }
            let lit = Atom::new(decl.name.clone(), args.clone());
            if c.body().contains(&lit) {
                return;
            }
            let mut body = c.body().to_vec();
            body.push(lit);
            let child = canonical(&Clause::from_parts_unchecked(c.head().clone(), body));
            out.entry(child.to_string()).or_insert(child);
            return;
        }
        let want = decl.arg_type(pos);
        let compatible = |have: &Option<String>| match (want, have) {
            (Some(w), Some(h)) => w == h,
            _ => true,
        };
        for (name, ty) in vars {
            if compatible(ty) {
                args.push(Term::Var(name.clone()));
                self.assign(c, vars, decl, args, fresh, out);
                args.pop();
            }
        }
        // fresh variables introduced earlier in this literal
        for k in 0..fresh {
            let earlier_ty = (0..pos)
                .find(|&i| args[i] == Term::Var(format!("F{k}")))
                .and_then(|i| decl.arg_type(i))
                .map(str::to_string);
            if compatible(&earlier_ty) {
                args.push(Term::Var(format!("F{k}")));
                self.assign(c, vars, decl, args, fresh, out);
                args.pop();
            }
        }
        if vars.len() + fresh < self.bias.max_vars {
            args.push(Term::Var(format!("F{fresh}")));
            self.assign(c, vars, decl, args, fresh + 1, out);
            args.pop();
        }
    }
}

fn is_range_restricted(c: &Clause) -> bool {
    c.head().vars().all(|v| c.body().iter().any(|b| b.vars().any(|w| w == v)))
}

/// Every canonical, range-restricted, connected, type-consistent clause the
/// bias admits, ordered by body length and then canonical text.
pub fn enumerate_clauses(bias: &BiasSpec) -> Vec<Clause> {
    let refiner = Refiner::new(bias);
    let mut level = refiner.roots();
    let mut out = Vec::new();
    for _ in 0..bias.max_body {
        let mut children = BTreeMap::new();
        for c in &level {
            refiner.refine(c, &mut children);
        }
        out.extend(children.values().filter(|c| is_range_restricted(c)).cloned());
        level = children.into_values().collect();
        if level.is_empty() {
            break;
        }
    }
    out
}

/// A clause compiled against a fact store for example-by-example testing.
struct Query {
    head_pred: (String, usize),
    head: Vec<Slot>,
    body: Vec<Literal>,
    num_vars: usize,
}

impl Query {
    /// `None` when some body predicate has no facts at all.
    fn compile(store: &FactStore, c: &Clause) -> Option<Query> {
        let mut vars: HashMap<&str, usize> = HashMap::new();
        let head = c
            .head()
            .args
            .iter()
            .map(|t| slot(store, t, &mut vars))
            .collect::<Option<Vec<_>>>()?;
        let mut body = Vec::new();
        for b in c.body() {
            let pred = store.lookup_pred(&b.predicate, b.arity())?;
            let args = b
                .args
                .iter()
                .map(|t| slot(store, t, &mut vars))
                .collect::<Option<Vec<_>>>()?;
            body.push(Literal { pred, args });
        }
        Some(Query {
            head_pred: (c.head().predicate.clone(), c.head().arity()),
            head,
            body,
            num_vars: vars.len(),
        })
    }

    fn covers(&self, store: &FactStore, row: &[u32]) -> bool {
        let mut binding = vec![None; self.num_vars];
        for (s, &v) in self.head.iter().zip(row) {
            match *s {
                Slot::Const(c) if c != v => return false,
                Slot::Const(_) => {}
                Slot::Var(i) => match binding[i] {
                    Some(b) if b != v => return false,
                    _ => binding[i] = Some(v),
                },
            }
        }
        let mut done = vec![false; self.body.len()];
        exists(store, &self.body, &mut binding, &mut done, self.body.len())
    }
}

fn slot<'c>(store: &FactStore, t: &'c Term, vars: &mut HashMap<&'c str, usize>) -> Option<Slot> {
    Some(match t {
        Term::Const(k) => Slot::Const(store.consts.get(k)?),
        Term::Var(v) => {
            let next = vars.len();
            Slot::Var(*vars.entry(v.as_str()).or_insert(next))
        }
    })
}

/// Whether the unprocessed literals of `body` have a joint match extending
/// `binding`. Picks the most-bound literal first.
fn exists(
    store: &FactStore,
    body: &[Literal],
    binding: &mut [Option<u32>],
    done: &mut [bool],
    left: usize,
) -> bool {
    if left == 0 {
        return true;
    }
    let mut best = usize::MAX;
    let mut best_score = (false, 0usize);
    for (i, lit) in body.iter().enumerate() {
        if done[i] {
            continue;
        }
        let bound = lit
            .args
            .iter()
            .filter(|s| match s {
                Slot::Const(_) => true,
                Slot::Var(v) => binding[*v].is_some(),
            })
            .count();
        let score = (first_arg(lit, binding).is_some(), bound);
        if best == usize::MAX || score > best_score {
            best = i;
            best_score = score;
        }
    }
    let lit = &body[best];
    done[best] = true;
    let mut trail = Vec::new();
    let mut found = false;
    for row in store.relation(lit.pred).candidates(first_arg(lit, binding)) {
        if unify_row(lit, row, binding, &mut trail) && exists(store, body, binding, done, left - 1) {
            found = true;
        }
        for &v in &trail {
            binding[v] = None;
        }
        trail.clear();
        if found {
            break;
        }
    }
    done[best] = false;
    found
}

struct EncodedExamples {
    pos: Vec<((String, usize), Vec<u32>)>,
    neg: Vec<((String, usize), Vec<u32>)>,
}

fn encode_examples(store: &FactStore, pos: &[&Atom], neg: &[&Atom]) -> EncodedExamples {
    let mut unknown: HashMap<String, u32> = HashMap::new();
    let mut enc = |a: &Atom| {
        let row = a
            .args
            .iter()
            .map(|t| match store.consts.get(t.name()) {
                Some(id) => id,
                None => {
                    let next = u32::MAX - unknown.len() as u32;
                    *unknown.entry(t.name().to_string()).or_insert(next)
                }
            })
            .collect();
        ((a.predicate.clone(), a.arity()), row)
    };
    EncodedExamples {
        pos: pos.iter().map(|a| enc(a)).collect(),
        neg: neg.iter().map(|a| enc(a)).collect(),
    }
}

struct Candidate {
    clause: Clause,
    text: String,
    covered: Vec<usize>,
}

enum Evaluated {
    Pruned,
    Candidate(Vec<usize>),
    Open(Vec<usize>),
}

/// Generate-and-test learner: refinement search for negative-safe clauses
/// followed by greedy set cover over the positives.
#[derive(Debug, Clone, Default)]
pub struct ReferenceLearner;

impl ReferenceLearner {
    pub fn new() -> Self {
        ReferenceLearner
    }
}

impl Solver for ReferenceLearner {
    fn name(&self) -> &str {
        "reference"
    }

    fn solve(&self, req: &SolverRequest) -> Result<SolverResult, SolveError> {
        let start = Instant::now();
        req.check()?;
        let deadline = start + req.timeout;
        let mut stats = SolverStats::default();
        let store = FactStore::from_program(&req.background);

        let finish = |outcome: Outcome, mut stats: SolverStats| {
            stats.elapsed = start.elapsed();
            Ok(SolverResult { outcome, stats })
        };

        // A negative already in the background defeats every hypothesis.
        if req.examples.negatives().iter().any(|n| store.contains(n)) {
            return finish(Outcome::NoHypothesis, stats);
        }
        let open: Vec<&Atom> = req.examples.positives().iter().filter(|p| !store.contains(p)).collect();
        if open.is_empty() {
            return finish(Outcome::Hypothesis(Program::new()), stats);
        }
        let negs: Vec<&Atom> = req.examples.negatives().iter().collect();
        let ex = encode_examples(&store, &open, &negs);

        let refiner = Refiner::new(&req.bias);
        let mut level: Vec<(Clause, Vec<usize>)> = refiner
            .roots()
            .into_iter()
            .map(|root| {
                let key = (root.head().predicate.clone(), root.head().arity());
                let cov = (0..ex.pos.len()).filter(|&i| ex.pos[i].0 == key).collect();
                (root, cov)
            })
            .filter(|(_, cov): &(Clause, Vec<usize>)| !cov.is_empty())
            .collect();
        let mut candidates: Vec<Candidate> = Vec::new();
        let timed_out = AtomicBool::new(false);

        for _ in 0..req.bias.max_body {
            if level.is_empty() {
                break;
            }
            let mut children: BTreeMap<String, (Clause, usize)> = BTreeMap::new();
            for (pi, (parent, _)) in level.iter().enumerate() {
                let mut kids = BTreeMap::new();
                refiner.refine(parent, &mut kids);
                for (text, kid) in kids {
                    children.entry(text).or_insert((kid, pi));
                }
            }
            stats.clauses_enumerated += children.len();
            let children: Vec<(String, Clause, usize)> =
                children.into_iter().map(|(t, (c, p))| (t, c, p)).collect();

            let evaluated: Vec<Evaluated> = children
                .par_iter()
                .map(|(_, clause, parent)| {
                    if timed_out.load(Ordering::Relaxed) {
                        return Evaluated::Pruned;
                    }
                    if Instant::now() > deadline {
                        timed_out.store(true, Ordering::Relaxed);
                        return Evaluated::Pruned;
                    }
                    let Some(q) = Query::compile(&store, clause) else {
                        return Evaluated::Pruned;
                    };
                    let covered: Vec<usize> = level[*parent]
                        .1
                        .iter()
                        .copied()
                        .filter(|&i| q.covers(&store, &ex.pos[i].1))
                        .collect();
                    if covered.is_empty() {
                        return Evaluated::Pruned;
                    }
                    if is_range_restricted(clause) {
                        let unsafe_ = ex
                            .neg
                            .iter()
                            .any(|(key, row)| *key == q.head_pred && q.covers(&store, row));
                        if !unsafe_ {
                            return Evaluated::Candidate(covered);
                        }
                    }
                    Evaluated::Open(covered)
                })
                .collect();
            if timed_out.load(Ordering::Relaxed) {
                return finish(Outcome::Timeout, stats);
            }

            let mut next = Vec::new();
            for ((text, clause, _), ev) in children.into_iter().zip(evaluated) {
                match ev {
                    Evaluated::Pruned => {}
                    Evaluated::Candidate(covered) => candidates.push(Candidate { clause, text, covered }),
                    Evaluated::Open(covered) => next.push((clause, covered)),
                }
            }
            level = next;
        }
        stats.candidates_negative_safe = candidates.len();

        let picked = greedy_cover(&candidates, ex.pos.len(), req.bias.max_clauses);
        let Some(picked) = picked else {
            return finish(Outcome::NoHypothesis, stats);
        };
        let hypothesis: Program = picked.into_iter().map(|i| candidates[i].clause.clone()).collect();
        match verify(&req.background, &hypothesis, &req.examples) {
            Verdict::Consistent => finish(Outcome::Hypothesis(hypothesis), stats),
            v => Err(SolveError::SelfCheckFailed(v)),
        }
    }
}

/// Repeatedly picks the candidate covering the most uncovered positives,
/// breaking ties by shorter body and then canonical text. `None` if the
/// positives cannot all be covered within `max_clauses` picks.
fn greedy_cover(candidates: &[Candidate], num_pos: usize, max_clauses: usize) -> Option<Vec<usize>> {
    let mut uncovered = vec![true; num_pos];
    let mut left = num_pos;
    let mut picked = Vec::new();
    while left > 0 && picked.len() < max_clauses {
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in candidates.iter().enumerate() {
            let gain = c.covered.iter().filter(|&&p| uncovered[p]).count();
            if gain == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bg)) => {
                    let b = &candidates[bi];
                    (gain, std::cmp::Reverse(c.clause.body().len()), std::cmp::Reverse(&c.text))
                        > (bg, std::cmp::Reverse(b.clause.body().len()), std::cmp::Reverse(&b.text))
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let (bi, _) = best?;
        for &p in &candidates[bi].covered {
            if uncovered[p] {
                uncovered[p] = false;
                left -= 1;
            }
        }
        picked.push(bi);
    }
    (left == 0).then_some(picked)
}

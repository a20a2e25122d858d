//! Canonical form of clauses modulo variable renaming and body order.
//!
//! Head variables are numbered by first occurrence in the head. The body is
//! then laid out in the order whose renamed literal sequence is
//! lexicographically smallest, where each literal is keyed by
//! `(predicate, renamed args)` and fresh variables are numbered as they are
//! first met. Only literals tied on their key are branched on, so the search
//! stays small for realistic bodies.

use std::collections::HashMap;

use super::types::{Atom, Clause, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key<'a> {
    Var(usize),
    Const(&'a str),
}

type Literal<'a> = (&'a str, Vec<Key<'a>>);

struct Search<'a> {
    body: Vec<&'a Atom>,
    best: Option<Vec<Literal<'a>>>,
}

fn key_of<'a>(atom: &'a Atom, renaming: &mut HashMap<&'a str, usize>) -> Vec<Key<'a>> {
    atom.args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Key::Const(c.as_str()),
            Term::Var(v) => {
                let next = renaming.len();
                Key::Var(*renaming.entry(v.as_str()).or_insert(next))
            }
        })
        .collect()
}

impl<'a> Search<'a> {
    fn run(
        &mut self,
        remaining: &mut Vec<usize>,
        renaming: &HashMap<&'a str, usize>,
        seq: &mut Vec<Literal<'a>>,
    ) {
        if let Some(best) = &self.best {
            if seq.as_slice() > &best[..seq.len()] {
                return;
            }
        }
        if remaining.is_empty() {
            let better = self.best.as_ref().is_none_or(|b| *seq < *b);
            if better {
                self.best = Some(seq.clone());
            }
            return;
        }
        let pred = remaining
            .iter()
            .map(|&i| self.body[i].predicate.as_str())
            .min()
            .expect("non-empty");
        let mut options: Vec<(usize, Vec<Key<'a>>, HashMap<&'a str, usize>)> = Vec::new();
        for &i in remaining.iter() {
            if self.body[i].predicate != pred {
                continue;
            }
            let mut r = renaming.clone();
            let key = key_of(self.body[i], &mut r);
            options.push((i, key, r));
        }
        let min_key = options.iter().map(|o| o.1.clone()).min().expect("non-empty");
        for (i, key, r) in options {
            if key != min_key {
                continue;
            }
            let pos = remaining.iter().position(|&x| x == i).expect("present");
            remaining.remove(pos);
            seq.push((pred, key));
            self.run(remaining, &r, seq);
            seq.pop();
            remaining.insert(pos, i);
        }
    }
}

/// Canonical representative of a clause. Facts are returned unchanged.
pub fn canonical(c: &Clause) -> Clause {
    if c.is_fact() {
        return c.clone();
    }
    let mut head_renaming: HashMap<&str, usize> = HashMap::new();
    let head_key = key_of(c.head(), &mut head_renaming);

    let mut body: Vec<&Atom> = Vec::new();
    for b in c.body() {
        if !body.contains(&b) {
            body.push(b);
        }
    }
    let mut search = Search { body, best: None };
    let mut remaining: Vec<usize> = (0..search.body.len()).collect();
    search.run(&mut remaining, &head_renaming, &mut Vec::new());
    let best = search.best.expect("at least one ordering");

    let rebuild = |pred: &str, keys: &[Key<'_>]| {
        Atom::new(
            pred,
            keys.iter()
                .map(|k| match k {
                    Key::Var(i) => Term::Var(format!("V{i}")),
                    Key::Const(s) => Term::Const((*s).to_string()),
                })
                .collect(),
        )
    };
    let head = rebuild(&c.head().predicate, &head_key);
    let body = best.iter().map(|(p, k)| rebuild(p, k)).collect();
    Clause::from_parts_unchecked(head, body)
}

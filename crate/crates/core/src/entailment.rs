//! Bottom-up entailment for function-free definite programs.
//!
//! [`consequences`] computes the least Herbrand model of facts plus rules by
//! semi-naive iteration: each round only fires rule instances that use at
//! least one atom derived in the previous round. Relations are indexed on
//! their first argument.

use std::collections::{HashMap, HashSet};

use crate::logic::{Atom, Clause, ExampleSet, Program, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EntailError {
    #[error("query atom {0} is not ground")]
    NonGround(String),
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub(crate) fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(s.to_string(), id);
        self.names.push(s.to_string());
        id
    }

    pub(crate) fn get(&self, s: &str) -> Option<u32> {
        self.ids.get(s).copied()
    }

    pub(crate) fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }
}

type Row = Box<[u32]>;

#[derive(Debug, Default, Clone)]
pub(crate) struct Relation {
    rows: Vec<Row>,
    set: HashSet<Row>,
    by_first: HashMap<u32, Vec<usize>>,
}

impl Relation {
    fn insert(&mut self, row: Row) -> bool {
        if self.set.contains(&row) {
            return false;
        }
        let idx = self.rows.len();
        if let Some(&first) = row.first() {
            self.by_first.entry(first).or_default().push(idx);
        }
        self.set.insert(row.clone());
        self.rows.push(row);
        true
    }

    pub(crate) fn contains(&self, row: &[u32]) -> bool {
        self.set.contains(row)
    }

    /// Rows that could match a pattern whose first argument is `first`.
    pub(crate) fn candidates(&self, first: Option<u32>) -> Candidates<'_> {
        match first {
            Some(c) => Candidates::Indexed(self, self.by_first.get(&c).map(Vec::as_slice).unwrap_or(&[]).iter()),
            None => Candidates::All(self.rows.iter()),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }
}

pub(crate) enum Candidates<'a> {
    Indexed(&'a Relation, std::slice::Iter<'a, usize>),
    All(std::slice::Iter<'a, Row>),
}

impl<'a> Iterator for Candidates<'a> {
    type Item = &'a [u32];

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Candidates::Indexed(rel, it) => it.next().map(|&i| &*rel.rows[i]),
            Candidates::All(it) => it.next().map(|r| &**r),
        }
    }
}

/// Ground model: per-predicate indexed sets of ground atoms.
#[derive(Debug, Default, Clone)]
pub struct FactStore {
    pub(crate) consts: Interner,
    pub(crate) preds: Interner,
    pub(crate) relations: Vec<Relation>,
}

fn pred_key(name: &str, arity: usize) -> String {
    format!("{name}/{arity}")
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_program(b: &Program) -> Self {
        let mut store = FactStore::new();
        for f in b.facts() {
            store.insert(f);
        }
        store
    }

    pub(crate) fn pred_id(&mut self, name: &str, arity: usize) -> u32 {
        let id = self.preds.intern(&pred_key(name, arity));
        if id as usize >= self.relations.len() {
            self.relations.resize_with(id as usize + 1, Relation::default);
        }
        id
    }

    pub(crate) fn lookup_pred(&self, name: &str, arity: usize) -> Option<u32> {
        self.preds.get(&pred_key(name, arity))
    }

    pub(crate) fn relation(&self, pred: u32) -> &Relation {
        &self.relations[pred as usize]
    }

    /// Inserts a ground atom; returns false if it was already present.
    ///
    /// # Panics
    /// If the atom is not ground.
    pub fn insert(&mut self, atom: &Atom) -> bool {
        assert!(atom.is_ground(), "FactStore holds ground atoms only");
        let pred = self.pred_id(&atom.predicate, atom.arity());
        let row: Row = atom.args.iter().map(|t| self.consts.intern(t.name())).collect();
        self.relations[pred as usize].insert(row)
    }

    pub(crate) fn insert_row(&mut self, pred: u32, row: Row) -> bool {
        self.relations[pred as usize].insert(row)
    }

    /// Interned form of a ground atom, if every symbol is known.
    pub(crate) fn encode(&self, atom: &Atom) -> Option<(u32, Row)> {
        let pred = self.lookup_pred(&atom.predicate, atom.arity())?;
        let row = atom
            .args
            .iter()
            .map(|t| self.consts.get(t.name()))
            .collect::<Option<Row>>()?;
        Some((pred, row))
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        if !atom.is_ground() {
            return false;
        }
        match self.encode(atom) {
            Some((pred, row)) => self.relations[pred as usize].contains(&row),
            None => false,
        }
    }

    pub fn len(&self) -> usize {
        self.relations.iter().map(Relation::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All atoms, sorted.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::with_capacity(self.len());
        for (pid, rel) in self.relations.iter().enumerate() {
            let key = self.preds.name(pid as u32);
            let name = &key[..key.rfind('/').expect("pred key")];
            for row in &rel.rows {
                out.push(Atom::new(
                    name,
                    row.iter().map(|&c| Term::Const(self.consts.name(c).to_string())).collect(),
                ));
            }
        }
        out.sort();
        out
    }

    /// Constants mentioned by any stored atom, sorted.
    pub fn constants(&self) -> Vec<String> {
        let mut used = HashSet::new();
        for rel in &self.relations {
            for row in &rel.rows {
                used.extend(row.iter().copied());
            }
        }
        let mut out: Vec<String> = used.into_iter().map(|c| self.consts.name(c).to_string()).collect();
        out.sort();
        out
    }
}

/// An argument of a compiled literal: a variable slot or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Var(usize),
    Const(u32),
}

#[derive(Debug, Clone)]
pub(crate) struct Literal {
    pub(crate) pred: u32,
    pub(crate) args: Vec<Slot>,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledRule {
    pub(crate) head: Literal,
    pub(crate) body: Vec<Literal>,
    pub(crate) num_vars: usize,
}

pub(crate) fn compile_literal(store: &mut FactStore, atom: &Atom, vars: &mut HashMap<String, usize>) -> Literal {
    let pred = store.pred_id(&atom.predicate, atom.arity());
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Slot::Const(store.consts.intern(c)),
            Term::Var(v) => {
                let next = vars.len();
                Slot::Var(*vars.entry(v.clone()).or_insert(next))
            }
        })
        .collect();
    Literal { pred, args }
}

pub(crate) fn compile_rule(store: &mut FactStore, clause: &Clause) -> CompiledRule {
    let mut vars = HashMap::new();
    let head = compile_literal(store, clause.head(), &mut vars);
    let body = clause
        .body()
        .iter()
        .map(|a| compile_literal(store, a, &mut vars))
        .collect();
    CompiledRule {
        head,
        body,
        num_vars: vars.len(),
    }
}

/// Binds `row` against `lit`, recording newly bound slots in `trail`.
#[inline]
pub(crate) fn unify_row(lit: &Literal, row: &[u32], binding: &mut [Option<u32>], trail: &mut Vec<usize>) -> bool {
    for (slot, &value) in lit.args.iter().zip(row) {
        match *slot {
            Slot::Const(c) => {
                if c != value {
                    return false;
                }
            }
            Slot::Var(v) => match binding[v] {
                Some(b) if b != value => return false,
                Some(_) => {}
                None => {
                    binding[v] = Some(value);
                    trail.push(v);
                }
            },
        }
    }
    true
}

#[inline]
pub(crate) fn first_arg(lit: &Literal, binding: &[Option<u32>]) -> Option<u32> {
    match lit.args.first()? {
        Slot::Const(c) => Some(*c),
        Slot::Var(v) => binding[*v],
    }
}

/// Depth-first join of `body[order[depth..]]` against `store`, calling
/// `emit` on every complete binding. `emit` returns false to stop early.
pub(crate) fn join(
    store: &FactStore,
    body: &[Literal],
    order: &[usize],
    depth: usize,
    binding: &mut [Option<u32>],
    emit: &mut dyn FnMut(&[Option<u32>]) -> bool,
) -> bool {
    if depth == order.len() {
        return emit(binding);
    }
    let lit = &body[order[depth]];
    let rel = store.relation(lit.pred);
    let mut trail = Vec::new();
    for row in rel.candidates(first_arg(lit, binding)) {
        if unify_row(lit, row, binding, &mut trail) && !join(store, body, order, depth + 1, binding, emit) {
            for &v in &trail {
                binding[v] = None;
            }
            return false;
        }
        for &v in &trail {
            binding[v] = None;
        }
        trail.clear();
    }
    true
}

fn instantiate(lit: &Literal, binding: &[Option<u32>]) -> Option<Row> {
    lit.args
        .iter()
        .map(|s| match *s {
            Slot::Const(c) => Some(c),
            Slot::Var(v) => binding[v],
        })
        .collect()
}

/// Least Herbrand model of the facts in `b` together with the clauses of `h`.
pub fn consequences(b: &Program, h: &Program) -> FactStore {
    let mut store = FactStore::from_program(b);
    for f in h.facts() {
        store.insert(f);
    }
    let rules: Vec<CompiledRule> = h.rules().map(|c| compile_rule(&mut store, c)).collect();
    if rules.is_empty() {
        return store;
    }

    // Round 0: every stored atom is new.
    let mut delta: Vec<Vec<Row>> = store.relations.iter().map(|r| r.rows.clone()).collect();
    loop {
        let mut fresh: Vec<(u32, Row)> = Vec::new();
        let mut seen: HashSet<(u32, Row)> = HashSet::new();
        for rule in &rules {
            for (i, lit) in rule.body.iter().enumerate() {
                let Some(drows) = delta.get(lit.pred as usize) else { continue };
                if drows.is_empty() {
                    continue;
                }
                let order: Vec<usize> = (0..rule.body.len()).filter(|&j| j != i).collect();
                let mut binding = vec![None; rule.num_vars];
                let mut trail = Vec::new();
                for row in drows {
                    if unify_row(lit, row, &mut binding, &mut trail) {
                        join(&store, &rule.body, &order, 0, &mut binding, &mut |bnd| {
                            if let Some(row) = instantiate(&rule.head, bnd) {
                                let pred = rule.head.pred;
                                if !store.relation(pred).contains(&row) && seen.insert((pred, row.clone())) {
                                    fresh.push((pred, row));
                                }
                            }
                            true
                        });
                    }
                    for &v in &trail {
                        binding[v] = None;
                    }
                    trail.clear();
                }
            }
        }
        if fresh.is_empty() {
            return store;
        }
        delta = vec![Vec::new(); store.relations.len()];
        for (pred, row) in fresh {
            if store.insert_row(pred, row.clone()) {
                delta[pred as usize].push(row);
            }
        }
    }
}

/// Whether `b ∪ h` entails the ground atom `e`.
pub fn entails(b: &Program, h: &Program, e: &Atom) -> Result<bool, EntailError> {
    if !e.is_ground() {
        return Err(EntailError::NonGround(e.to_string()));
    }
    Ok(consequences(b, h).contains(e))
}

/// Examples entailed by `b ∪ h`, in example-set order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Coverage {
    pub covered_pos: Vec<Atom>,
    pub covered_neg: Vec<Atom>,
}

pub fn coverage(b: &Program, h: &Program, exs: &ExampleSet) -> Coverage {
    let model = consequences(b, h);
    Coverage {
        covered_pos: exs.positives().iter().filter(|e| model.contains(e)).cloned().collect(),
        covered_neg: exs.negatives().iter().filter(|e| model.contains(e)).cloned().collect(),
    }
}

/// Number of `pos` atoms entailed by `b` plus the single rule `r`.
pub fn rule_support(r: &Clause, b: &Program, pos: &[Atom]) -> usize {
    let h: Program = std::iter::once(r.clone()).collect();
    let model = consequences(b, &h);
    pos.iter().filter(|e| model.contains(e)).count()
}

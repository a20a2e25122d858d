use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use super::canonical::canonical;
use super::LogicError;

/// A function-free term: either a constant or a variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Result<Self, LogicError> {
        let name = name.into();
        if is_constant_name(&name) {
            Ok(Term::Const(name))
        } else {
            Err(LogicError::BadName(name))
        }
    }

    pub fn variable(name: impl Into<String>) -> Result<Self, LogicError> {
        let name = name.into();
        if is_variable_name(&name) {
            Ok(Term::Var(name))
        } else {
            Err(LogicError::BadName(name))
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Const(n) | Term::Var(n) => n,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn is_identifier_tail(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// `[a-z][a-zA-Z0-9_]*` or a non-empty digit string.
pub fn is_constant_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(is_identifier_tail),
        Some(c) if c.is_ascii_digit() => chars.all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

/// `[A-Z][a-zA-Z0-9_]*`.
pub fn is_variable_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => chars.all(is_identifier_tail),
        _ => false,
    }
}

pub fn is_predicate_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(is_identifier_tail),
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Builds a ground atom from constant names.
    pub fn ground(predicate: &str, args: &[&str]) -> Result<Self, LogicError> {
        if !is_predicate_name(predicate) {
            return Err(LogicError::BadName(predicate.to_string()));
        }
        let args = args
            .iter()
            .map(|a| Term::constant(*a))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Atom::new(predicate, args))
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Const(c) => Some(c.as_str()),
            Term::Var(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// A definite clause. Facts have an empty body and a ground head; rules are
/// range-restricted and connected.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    head: Atom,
    body: Vec<Atom>,
}

impl Clause {
    pub fn fact(head: Atom) -> Result<Self, LogicError> {
        if !head.is_ground() {
            return Err(LogicError::NonGroundFact(head.to_string()));
        }
        Ok(Clause {
            head,
            body: Vec::new(),
        })
    }

    /// Builds a clause, checking the fact/rule invariants.
    pub fn new(head: Atom, body: Vec<Atom>) -> Result<Self, LogicError> {
        if body.is_empty() {
            return Self::fact(head);
        }
        let clause = Clause { head, body };
        let unbound = clause.unbound_head_vars();
        if !unbound.is_empty() {
            return Err(LogicError::RangeRestriction(unbound));
        }
        if !clause.is_connected() {
            return Err(LogicError::Disconnected(clause.to_string()));
        }
        Ok(clause)
    }

    pub(crate) fn from_parts_unchecked(head: Atom, body: Vec<Atom>) -> Self {
        Clause { head, body }
    }

    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Distinct variables in order of first occurrence (head, then body).
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for atom in std::iter::once(&self.head).chain(&self.body) {
            for v in atom.vars() {
                if seen.insert(v) {
                    out.push(v);
                }
            }
        }
        out
    }

    fn unbound_head_vars(&self) -> Vec<String> {
        let body_vars: HashSet<&str> = self.body.iter().flat_map(Atom::vars).collect();
        let mut out: Vec<String> = Vec::new();
        for v in self.head.vars() {
            if !body_vars.contains(v) && !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
        out
    }

    /// Head and body literals form one component of the shared-variable graph.
    pub fn is_connected(&self) -> bool {
        let atoms: Vec<&Atom> = std::iter::once(&self.head).chain(&self.body).collect();
        let mut by_var: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, a) in atoms.iter().enumerate() {
            for v in a.vars() {
                by_var.entry(v).or_default().push(i);
            }
        }
        let mut seen = vec![false; atoms.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for v in atoms[i].vars() {
                for &j in &by_var[v] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_recursive(&self) -> bool {
        self.body.iter().any(|b| b.predicate == self.head.predicate)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(":- ")?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{b}")?;
            }
        }
        f.write_str(".")
    }
}

/// A set of clauses, stored in canonical form so that clauses equal up to
/// variable renaming and body order appear once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Program {
    clauses: BTreeSet<Clause>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the clause was not already present.
    pub fn insert(&mut self, clause: Clause) -> bool {
        let c = if clause.is_fact() {
            clause
        } else {
            canonical(&clause)
        };
        self.clauses.insert(c)
    }

    pub fn remove(&mut self, clause: &Clause) -> bool {
        if clause.is_fact() {
            self.clauses.remove(clause)
        } else {
            self.clauses.remove(&canonical(clause))
        }
    }

    pub fn contains(&self, clause: &Clause) -> bool {
        if clause.is_fact() {
            self.clauses.contains(clause)
        } else {
            self.clauses.contains(&canonical(clause))
        }
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Atom> {
        self.clauses.iter().filter(|c| c.is_fact()).map(Clause::head)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.is_fact())
    }

    pub fn is_ground(&self) -> bool {
        self.clauses.iter().all(Clause::is_fact)
    }

    pub fn extend(&mut self, other: &Program) {
        for c in other.iter() {
            self.clauses.insert(c.clone());
        }
    }

    pub fn union(&self, other: &Program) -> Program {
        let mut out = self.clone();
        out.extend(other);
        out
    }

    pub fn is_subset(&self, other: &Program) -> bool {
        self.clauses.is_subset(&other.clauses)
    }

    pub fn from_facts<I: IntoIterator<Item = Atom>>(facts: I) -> Result<Self, LogicError> {
        let mut p = Program::new();
        for f in facts {
            p.insert(Clause::fact(f)?);
        }
        Ok(p)
    }
}

impl FromIterator<Clause> for Program {
    fn from_iter<I: IntoIterator<Item = Clause>>(iter: I) -> Self {
        let mut p = Program::new();
        for c in iter {
            p.insert(c);
        }
        p
    }
}

impl<'a> IntoIterator for &'a Program {
    type Item = &'a Clause;
    type IntoIter = std::collections::btree_set::Iter<'a, Clause>;

    fn into_iter(self) -> Self::IntoIter {
        self.clauses.iter()
    }
}

/// Labelled ground examples. Insertion order is preserved; it is the
/// "parse order" used when examples are removed one at a time.
#[derive(Clone, Debug, Default)]
pub struct ExampleSet {
    positives: Vec<Atom>,
    negatives: Vec<Atom>,
    pos_index: HashSet<Atom>,
    neg_index: HashSet<Atom>,
}

impl PartialEq for ExampleSet {
    fn eq(&self, other: &Self) -> bool {
        self.positives == other.positives && self.negatives == other.negatives
    }
}

impl Eq for ExampleSet {}

impl ExampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(positives: Vec<Atom>, negatives: Vec<Atom>) -> Result<Self, LogicError> {
        let mut set = ExampleSet::new();
        for p in positives {
            set.add_positive(p)?;
        }
        for n in negatives {
            set.add_negative(n)?;
        }
        Ok(set)
    }

    pub fn add_positive(&mut self, atom: Atom) -> Result<bool, LogicError> {
        Self::check_ground(&atom)?;
        if self.neg_index.contains(&atom) {
            return Err(LogicError::ContradictoryLabel(atom.to_string()));
        }
        if !self.pos_index.insert(atom.clone()) {
            return Ok(false);
        }
        self.positives.push(atom);
        Ok(true)
    }

    pub fn add_negative(&mut self, atom: Atom) -> Result<bool, LogicError> {
        Self::check_ground(&atom)?;
        if self.pos_index.contains(&atom) {
            return Err(LogicError::ContradictoryLabel(atom.to_string()));
        }
        if !self.neg_index.insert(atom.clone()) {
            return Ok(false);
        }
        self.negatives.push(atom);
        Ok(true)
    }

    fn check_ground(atom: &Atom) -> Result<(), LogicError> {
        if atom.is_ground() {
            Ok(())
        } else {
            Err(LogicError::NonGroundExample(atom.to_string()))
        }
    }

    pub fn positives(&self) -> &[Atom] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Atom] {
        &self.negatives
    }

    pub fn is_positive(&self, atom: &Atom) -> bool {
        self.pos_index.contains(atom)
    }

    pub fn is_negative(&self, atom: &Atom) -> bool {
        self.neg_index.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }

    /// Union of two example sets; fails if the labels contradict.
    pub fn union(&self, other: &ExampleSet) -> Result<ExampleSet, LogicError> {
        let mut out = self.clone();
        for p in &other.positives {
            out.add_positive(p.clone())?;
        }
        for n in &other.negatives {
            out.add_negative(n.clone())?;
        }
        Ok(out)
    }

    pub fn remove_positive(&mut self, atom: &Atom) -> bool {
        if !self.pos_index.remove(atom) {
            return false;
        }
        self.positives.retain(|a| a != atom);
        true
    }

    pub fn remove_negative(&mut self, atom: &Atom) -> bool {
        if !self.neg_index.remove(atom) {
            return false;
        }
        self.negatives.retain(|a| a != atom);
        true
    }
}

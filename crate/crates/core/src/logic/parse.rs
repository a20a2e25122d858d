//! Reader for the line-oriented clause files (`.bk`, `.exs`, `.bias`, `.rules`).
//!
//! Every file is a sequence of statements terminated by `.`; `%` starts a
//! comment that runs to the end of the line. Statements are first read into
//! a small generic syntax tree and then interpreted per file kind.

use std::fmt;

use super::bias::{BiasSpec, PredDecl};
use super::types::{is_constant_name, is_predicate_name, is_variable_name, Atom, Clause, ExampleSet, Program, Term};
use super::LogicError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unterminated statement (missing '.')")]
    Unterminated,
    #[error("{0}")]
    Logic(#[from] LogicError),
    #[error("expected `pos(atom).` or `neg(atom).`, found {0}")]
    UnwrappedExample(String),
    #[error("`{0}` is not a declared head predicate")]
    NotHeadPredicate(String),
    #[error("predicate `{0}` is reserved for example files")]
    Reserved(String),
    #[error("duplicate declaration: {0}")]
    Duplicate(String),
    #[error("arity mismatch for {pred}: declared {declared}, got {got}")]
    ArityMismatch { pred: String, declared: usize, got: usize },
    #[error("type declared for undeclared predicate {0}")]
    UndeclaredPredicate(String),
    #[error("unknown directive {0}")]
    UnknownDirective(String),
    #[error("invalid bound: {0}")]
    InvalidBound(String),
}

fn err(line: usize, kind: impl Into<ParseErrorKind>) -> ParseError {
    ParseError {
        line,
        kind: kind.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Var(String),
    Num(String),
    Open,
    Close,
    Comma,
    Dot,
    Neck,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(s) | Tok::Var(s) | Tok::Num(s) => write!(f, "`{s}`"),
            Tok::Open => f.write_str("`(`"),
            Tok::Close => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Neck => f.write_str("`:-`"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut chars = line.char_indices().peekable();
        while let Some(&(start, c)) = chars.peek() {
            match c {
                '%' => break,
                c if c.is_whitespace() => {
                    chars.next();
                }
                '(' | ')' | ',' | '.' => {
                    chars.next();
                    out.push((
                        match c {
                            '(' => Tok::Open,
                            ')' => Tok::Close,
                            ',' => Tok::Comma,
                            _ => Tok::Dot,
                        },
                        lineno,
                    ));
                }
                ':' => {
                    chars.next();
                    match chars.next() {
                        Some((_, '-')) => out.push((Tok::Neck, lineno)),
                        _ => return Err(err(lineno, ParseErrorKind::Syntax("expected `:-`".into()))),
                    }
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let mut end = start;
                    while let Some(&(i, c)) = chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            end = i + c.len_utf8();
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    let word = &line[start..end];
                    let tok = if is_variable_name(word) {
                        Tok::Var(word.to_string())
                    } else if is_predicate_name(word) {
                        Tok::Name(word.to_string())
                    } else if word.chars().all(|c| c.is_ascii_digit()) {
                        Tok::Num(word.to_string())
                    } else {
                        return Err(err(
                            lineno,
                            ParseErrorKind::Syntax(format!("invalid identifier `{word}`")),
                        ));
                    };
                    out.push((tok, lineno));
                }
                other => {
                    return Err(err(
                        lineno,
                        ParseErrorKind::Syntax(format!("unexpected character `{other}`")),
                    ))
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Expr {
    Name(String),
    Var(String),
    Num(String),
    Compound(String, Vec<Expr>),
    Tuple(Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, items: &[Expr]| -> fmt::Result {
            for (i, e) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{e}")?;
            }
            Ok(())
        };
        match self {
            Expr::Name(s) | Expr::Var(s) | Expr::Num(s) => f.write_str(s),
            Expr::Compound(n, args) => {
                write!(f, "{n}(")?;
                list(f, args)?;
                f.write_str(")")
            }
            Expr::Tuple(items) => {
                f.write_str("(")?;
                list(f, items)?;
                f.write_str(")")
            }
        }
    }
}

struct Statement {
    head: Expr,
    body: Vec<Expr>,
    line: usize,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map(|(_, l)| *l).unwrap_or(self.last_line)
    }

    fn next(&mut self) -> Result<Tok, ParseError> {
        match self.toks.get(self.pos) {
            Some((t, _)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(err(self.last_line, ParseErrorKind::Unterminated)),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut items = vec![self.expr()?];
        loop {
            let line = self.line();
            match self.next()? {
                Tok::Comma => items.push(self.expr()?),
                Tok::Close => return Ok(items),
                t => {
                    return Err(err(line, ParseErrorKind::Syntax(format!("expected `,` or `)`, found {t}"))))
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let line = self.line();
        match self.next()? {
            Tok::Name(n) => {
                if self.peek() == Some(&Tok::Open) {
                    self.pos += 1;
                    Ok(Expr::Compound(n, self.args()?))
                } else {
                    Ok(Expr::Name(n))
                }
            }
            Tok::Var(v) => Ok(Expr::Var(v)),
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::Open => Ok(Expr::Tuple(self.args()?)),
            t => Err(err(line, ParseErrorKind::Syntax(format!("unexpected {t}")))),
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let line = self.line();
        let head = self.expr()?;
        let mut body = Vec::new();
        let l = self.line();
        match self.next()? {
            Tok::Dot => return Ok(Statement { head, body, line }),
            Tok::Neck => {}
            t => return Err(err(l, ParseErrorKind::Syntax(format!("expected `.` or `:-`, found {t}")))),
        }
        loop {
            body.push(self.expr()?);
            let l = self.line();
            match self.next()? {
                Tok::Comma => continue,
                Tok::Dot => return Ok(Statement { head, body, line }),
                t => return Err(err(l, ParseErrorKind::Syntax(format!("expected `,` or `.`, found {t}")))),
            }
        }
    }
}

fn statements(text: &str) -> Result<Vec<Statement>, ParseError> {
    let toks = lex(text)?;
    let last_line = toks.last().map(|(_, l)| *l).unwrap_or(1);
    let mut p = Parser {
        toks,
        pos: 0,
        last_line,
    };
    let mut out = Vec::new();
    while p.peek().is_some() {
        out.push(p.statement()?);
    }
    Ok(out)
}

fn to_atom(e: &Expr, line: usize) -> Result<Atom, ParseError> {
    let term = |a: &Expr| -> Result<Term, ParseError> {
        match a {
            Expr::Var(v) => Ok(Term::Var(v.clone())),
            Expr::Name(n) | Expr::Num(n) if is_constant_name(n) => Ok(Term::Const(n.clone())),
            other => Err(err(
                line,
                ParseErrorKind::Syntax(format!("function-free terms only, found `{other}`")),
            )),
        }
    };
    let atom = match e {
        Expr::Name(n) => Atom::new(n.clone(), Vec::new()),
        Expr::Compound(n, args) => Atom::new(n.clone(), args.iter().map(term).collect::<Result<_, _>>()?),
        other => return Err(err(line, ParseErrorKind::Syntax(format!("expected an atom, found `{other}`")))),
    };
    if atom.predicate == "pos" || atom.predicate == "neg" {
        return Err(err(line, ParseErrorKind::Reserved(atom.predicate)));
    }
    Ok(atom)
}

fn to_clause(s: &Statement) -> Result<Clause, ParseError> {
    let head = to_atom(&s.head, s.line)?;
    let body = s
        .body
        .iter()
        .map(|b| to_atom(b, s.line))
        .collect::<Result<Vec<_>, _>>()?;
    Clause::new(head, body).map_err(|e| err(s.line, e))
}

/// Parses a file of ground facts.
pub fn parse_facts(text: &str) -> Result<Program, ParseError> {
    let mut program = Program::new();
    for s in statements(text)? {
        if !s.body.is_empty() {
            return Err(err(s.line, ParseErrorKind::Syntax("facts cannot have a body".into())));
        }
        let atom = to_atom(&s.head, s.line)?;
        program.insert(Clause::fact(atom).map_err(|e| err(s.line, e))?);
    }
    Ok(program)
}

/// Parses a single clause, `head.` or `head :- b1, ..., bn.`
pub fn parse_clause(text: &str) -> Result<Clause, ParseError> {
    let mut stmts = statements(text)?;
    match stmts.len() {
        1 => to_clause(&stmts.remove(0)),
        0 => Err(err(1, ParseErrorKind::Syntax("empty input".into()))),
        _ => Err(err(stmts[1].line, ParseErrorKind::Syntax("expected a single clause".into()))),
    }
}

/// Parses a rule file into a program (facts and rules allowed).
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut program = Program::new();
    for s in statements(text)? {
        program.insert(to_clause(&s)?);
    }
    Ok(program)
}

/// Parses `pos(atom).` / `neg(atom).` lines without checking predicates.
pub fn parse_examples(text: &str) -> Result<ExampleSet, ParseError> {
    parse_examples_inner(text, None)
}

/// Like [`parse_examples`], but every example must use a declared head predicate.
pub fn parse_examples_with_bias(text: &str, bias: &BiasSpec) -> Result<ExampleSet, ParseError> {
    parse_examples_inner(text, Some(bias))
}

fn parse_examples_inner(text: &str, bias: Option<&BiasSpec>) -> Result<ExampleSet, ParseError> {
    let mut set = ExampleSet::new();
    for s in statements(text)? {
        let (label, inner) = match (&s.head, s.body.is_empty()) {
            (Expr::Compound(w, args), true) if (w == "pos" || w == "neg") && args.len() == 1 => {
                (w.as_str(), &args[0])
            }
            _ => return Err(err(s.line, ParseErrorKind::UnwrappedExample(s.head.to_string()))),
        };
        let atom = to_atom(inner, s.line)?;
        if !atom.is_ground() {
            return Err(err(s.line, LogicError::NonGroundExample(atom.to_string())));
        }
        if let Some(bias) = bias {
            match bias.head_decl(&atom.predicate) {
                None => return Err(err(s.line, ParseErrorKind::NotHeadPredicate(atom.predicate))),
                Some(d) if d.arity != atom.arity() => {
                    return Err(err(
                        s.line,
                        ParseErrorKind::ArityMismatch {
                            pred: atom.predicate.clone(),
                            declared: d.arity,
                            got: atom.arity(),
                        },
                    ))
                }
                Some(_) => {}
            }
        }
        let res = if label == "pos" {
            set.add_positive(atom)
        } else {
            set.add_negative(atom)
        };
        res.map_err(|e| err(s.line, e))?;
    }
    Ok(set)
}

fn as_name(e: &Expr, line: usize) -> Result<String, ParseError> {
    match e {
        Expr::Name(n) => Ok(n.clone()),
        other => Err(err(line, ParseErrorKind::Syntax(format!("expected a name, found `{other}`")))),
    }
}

fn as_count(e: &Expr, line: usize, what: &str) -> Result<usize, ParseError> {
    match e {
        Expr::Num(n) => n
            .parse()
            .map_err(|_| err(line, ParseErrorKind::InvalidBound(format!("{what}({n})")))),
        other => Err(err(line, ParseErrorKind::Syntax(format!("expected a number, found `{other}`")))),
    }
}

/// Parses a bias file of `head_pred/2`, `body_pred/2`, `type/2` and bound directives.
pub fn parse_bias(text: &str) -> Result<BiasSpec, ParseError> {
    let mut heads: Vec<PredDecl> = Vec::new();
    let mut bodies: Vec<PredDecl> = Vec::new();
    let mut types: Vec<(String, Vec<String>, usize)> = Vec::new();
    let mut bounds: [Option<usize>; 3] = [None; 3];

    for s in statements(text)? {
        let line = s.line;
        if !s.body.is_empty() {
            return Err(err(line, ParseErrorKind::Syntax("directives cannot have a body".into())));
        }
        let (name, args) = match &s.head {
            Expr::Compound(n, a) => (n.as_str(), a.as_slice()),
            other => return Err(err(line, ParseErrorKind::UnknownDirective(other.to_string()))),
        };
        match (name, args) {
            ("head_pred" | "body_pred", [p, k]) => {
                let pred = as_name(p, line)?;
                if pred == "pos" || pred == "neg" {
                    return Err(err(line, ParseErrorKind::Reserved(pred)));
                }
                let arity = as_count(k, line, name)?;
                let list = if name == "head_pred" { &mut heads } else { &mut bodies };
                if list.iter().any(|d| d.name == pred) {
                    return Err(err(line, ParseErrorKind::Duplicate(format!("{name}({pred},{arity})"))));
                }
                list.push(PredDecl::new(pred, arity));
            }
            ("type", [p, Expr::Tuple(ts)]) => {
                let pred = as_name(p, line)?;
                let ts = ts.iter().map(|t| as_name(t, line)).collect::<Result<Vec<_>, _>>()?;
                if types.iter().any(|(q, _, _)| *q == pred) {
                    return Err(err(line, ParseErrorKind::Duplicate(format!("type({pred},...)"))));
                }
                types.push((pred, ts, line));
            }
            ("type", [p, t]) => {
                // unary predicates may write `type(p,agent)`
                let pred = as_name(p, line)?;
                let t = as_name(t, line)?;
                if types.iter().any(|(q, _, _)| *q == pred) {
                    return Err(err(line, ParseErrorKind::Duplicate(format!("type({pred},...)"))));
                }
                types.push((pred, vec![t], line));
            }
            ("max_vars" | "max_body" | "max_clauses", [n]) => {
                let v = as_count(n, line, name)?;
                if v == 0 {
                    return Err(err(line, ParseErrorKind::InvalidBound(format!("{name}(0)"))));
                }
                let slot = match name {
                    "max_vars" => 0,
                    "max_body" => 1,
                    _ => 2,
                };
                if bounds[slot].is_some() {
                    return Err(err(line, ParseErrorKind::Duplicate(name.to_string())));
                }
                bounds[slot] = Some(v);
            }
            _ => return Err(err(line, ParseErrorKind::UnknownDirective(s.head.to_string()))),
        }
    }

    for (pred, ts, line) in types {
        let mut found = false;
        for d in heads.iter_mut().chain(bodies.iter_mut()).filter(|d| d.name == pred) {
            found = true;
            if d.arity != ts.len() {
                return Err(err(
                    line,
                    ParseErrorKind::ArityMismatch {
                        pred: pred.clone(),
                        declared: d.arity,
                        got: ts.len(),
                    },
                ));
            }
            d.types = Some(ts.clone());
        }
        if !found {
            return Err(err(line, ParseErrorKind::UndeclaredPredicate(pred)));
        }
    }

    let mut bias = BiasSpec::new(heads, bodies);
    if let Some(v) = bounds[0] {
        bias.max_vars = v;
    }
    if let Some(v) = bounds[1] {
        bias.max_body = v;
    }
    if let Some(v) = bounds[2] {
        bias.max_clauses = v;
    }
    Ok(bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fact() {
        let p = parse_facts("landing_runway(a1,r31l).").unwrap();
        let facts: Vec<_> = p.facts().cloned().collect();
        assert_eq!(facts, vec![Atom::ground("landing_runway", &["a1", "r31l"]).unwrap()]);
    }

    #[test]
    fn empty_and_comment_only_inputs() {
        assert!(parse_facts("").unwrap().is_empty());
        assert!(parse_facts("% nothing here\n\n   \n").unwrap().is_empty());
    }

    #[test]
    fn whitespace_inside_parens() {
        let p = parse_facts("cross_runway( a1 ,  r4 ) . % trailing\n").unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn numeric_constants() {
        let p = parse_facts("runway_heading(r1, 310).").unwrap();
        assert_eq!(p.facts().next().unwrap().args[1], Term::Const("310".into()));
    }

    #[test]
    fn non_ground_fact_rejected() {
        let e = parse_facts("collision(a1,A2).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Logic(LogicError::NonGroundFact(_))), "{e}");
    }

    #[test]
    fn unterminated_and_syntax_errors_carry_lines() {
        let e = parse_facts("on_taxiway(a1).\non_taxiway(a2)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unterminated);
        assert_eq!(e.line, 2);
        let e = parse_facts("on_taxiway(a1).\n\non_taxiway(a2)).").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        let e = parse_facts("on_taxiway(a-1).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn nested_terms_rejected() {
        assert!(parse_facts("p(f(a)).").is_err());
    }

    #[test]
    fn examples_partition() {
        let ex = parse_examples("pos(collision(a1,a2)).\nneg(collision(a3,a4)).").unwrap();
        assert_eq!(ex.positives(), &[Atom::ground("collision", &["a1", "a2"]).unwrap()]);
        assert_eq!(ex.negatives(), &[Atom::ground("collision", &["a3", "a4"]).unwrap()]);
    }

    #[test]
    fn contradictory_examples_rejected() {
        let e = parse_examples("pos(collision(a1,a2)).\nneg(collision(a1,a2)).").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(matches!(e.kind, ParseErrorKind::Logic(LogicError::ContradictoryLabel(_))));
    }

    #[test]
    fn unwrapped_example_rejected() {
        let e = parse_examples("collision(a1,a2).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnwrappedExample(_)));
    }

    #[test]
    fn example_must_use_head_predicate() {
        let bias = parse_bias("head_pred(collision,2).\nbody_pred(landing_runway,2).").unwrap();
        let e = parse_examples_with_bias("pos(landing_runway(a1,r1)).", &bias).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::NotHeadPredicate(_)));
        assert!(parse_examples_with_bias("pos(collision(a1,a2)).", &bias).is_ok());
    }

    #[test]
    fn bias_with_bounds() {
        let b = parse_bias(
            "head_pred(collision,2).\nbody_pred(cross_runway,2).\nmax_vars(6).\nmax_body(4).\nmax_clauses(20).",
        )
        .unwrap();
        assert_eq!(b.head_decls.len(), 1);
        assert_eq!(b.body_decls.len(), 1);
        assert_eq!((b.max_vars, b.max_body, b.max_clauses), (6, 4, 20));
    }

    #[test]
    fn bias_defaults() {
        let b = parse_bias("head_pred(collision,2).").unwrap();
        assert_eq!((b.max_vars, b.max_body, b.max_clauses), (6, 4, 20));
    }

    #[test]
    fn bias_duplicates_and_arity_mismatch() {
        let e = parse_bias("head_pred(collision,2).\nhead_pred(collision,2).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Duplicate(_)));
        let e = parse_bias("head_pred(collision,2).\ntype(collision,(agent,agent,agent)).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ArityMismatch { .. }));
        let e = parse_bias("type(collision,(agent,agent)).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UndeclaredPredicate(_)));
        let e = parse_bias("max_body(0).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidBound(_)));
    }

    #[test]
    fn figure_rule_parses() {
        let c = parse_clause("collision(V0,V1):- landing_runway(V1,V2),cross_runway(V0,V2).").unwrap();
        assert_eq!(c.body().len(), 2);
    }

    #[test]
    fn range_restriction_enforced() {
        let e = parse_clause("collision(V0,V1):- on_taxiway(V2).").unwrap_err();
        match e.kind {
            ParseErrorKind::Logic(LogicError::RangeRestriction(vars)) => assert_eq!(vars, vec!["V0", "V1"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn disconnected_body_rejected() {
        let e = parse_clause("collision(V0,V1):- on_taxiway(V0),on_taxiway(V1),same_runway(V2,V3).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Logic(LogicError::Disconnected(_))));
    }

    #[test]
    fn variable_fact_rejected() {
        let e = parse_clause("collision(V0,V1).").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Logic(LogicError::NonGroundFact(_))));
    }

    #[test]
    fn example_wrappers_are_not_literals() {
        assert!(parse_clause("p(X):- pos(X).").is_err());
        assert!(parse_facts("neg(a).").is_err());
    }
}

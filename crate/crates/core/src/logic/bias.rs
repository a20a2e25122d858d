use std::collections::BTreeSet;

pub const DEFAULT_MAX_VARS: usize = 6;
pub const DEFAULT_MAX_BODY: usize = 4;
pub const DEFAULT_MAX_CLAUSES: usize = 20;

/// A declared predicate with optional argument types.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PredDecl {
    pub name: String,
    pub arity: usize,
    pub types: Option<Vec<String>>,
}

impl PredDecl {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        PredDecl {
            name: name.into(),
            arity,
            types: None,
        }
    }

    pub fn typed(name: impl Into<String>, types: &[&str]) -> Self {
        PredDecl {
            name: name.into(),
            arity: types.len(),
            types: Some(types.iter().map(|t| t.to_string()).collect()),
        }
    }

    pub fn arg_type(&self, i: usize) -> Option<&str> {
        self.types.as_ref().and_then(|t| t.get(i)).map(String::as_str)
    }
}

/// Hypothesis-space declaration: which predicates may appear where, and
/// the size bounds on clauses and programs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiasSpec {
    pub head_decls: Vec<PredDecl>,
    pub body_decls: Vec<PredDecl>,
    pub max_vars: usize,
    pub max_body: usize,
    pub max_clauses: usize,
}

impl BiasSpec {
    pub fn new(head_decls: Vec<PredDecl>, body_decls: Vec<PredDecl>) -> Self {
        BiasSpec {
            head_decls,
            body_decls,
            max_vars: DEFAULT_MAX_VARS,
            max_body: DEFAULT_MAX_BODY,
            max_clauses: DEFAULT_MAX_CLAUSES,
        }
    }

    pub fn with_bounds(mut self, max_vars: usize, max_body: usize, max_clauses: usize) -> Self {
        self.max_vars = max_vars;
        self.max_body = max_body;
        self.max_clauses = max_clauses;
        self
    }

    pub fn head_decl(&self, pred: &str) -> Option<&PredDecl> {
        self.head_decls.iter().find(|d| d.name == pred)
    }

    pub fn body_decl(&self, pred: &str) -> Option<&PredDecl> {
        self.body_decls.iter().find(|d| d.name == pred)
    }

    /// Any declaration for the predicate, head first.
    pub fn decl(&self, pred: &str) -> Option<&PredDecl> {
        self.head_decl(pred).or_else(|| self.body_decl(pred))
    }

    /// The finite set of argument types mentioned by any declaration.
    pub fn types(&self) -> BTreeSet<&str> {
        self.head_decls
            .iter()
            .chain(&self.body_decls)
            .filter_map(|d| d.types.as_ref())
            .flatten()
            .map(String::as_str)
            .collect()
    }

    /// Directive text that parses back to an equal bias.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (kind, decls) in [("head_pred", &self.head_decls), ("body_pred", &self.body_decls)] {
            for d in decls {
                out.push_str(&format!("{kind}({},{}).\n", d.name, d.arity));
            }
        }
        let mut typed = BTreeSet::new();
        for d in self.head_decls.iter().chain(&self.body_decls) {
            if let Some(ts) = &d.types {
                if typed.insert(d.name.as_str()) {
                    out.push_str(&format!("type({},({})).\n", d.name, ts.join(",")));
                }
            }
        }
        out.push_str(&format!("max_vars({}).\n", self.max_vars));
        out.push_str(&format!("max_body({}).\n", self.max_body));
        out.push_str(&format!("max_clauses({}).\n", self.max_clauses));
        out
    }
}

/// Runway-incursion vocabulary: `collision/2` over agents plus ten relational
/// body predicates over agents and runways.
pub const RUNWAY_BIAS: &str = "\
% target
head_pred(collision,2).
type(collision,(agent,agent)).
% agent-runway relations
body_pred(landing_runway,2).
body_pred(takeoff_runway,2).
body_pred(cross_runway,2).
body_pred(on_taxiway,1).
body_pred(holding_short_runway,2).
body_pred(on_extended_area_runway,2).
body_pred(holding_on_runway,2).
% runway-runway relations
body_pred(parallel_runways,2).
body_pred(intersecting_runways,2).
body_pred(same_runway,2).
type(landing_runway,(agent,runway)).
type(takeoff_runway,(agent,runway)).
type(cross_runway,(agent,runway)).
type(on_taxiway,(agent)).
type(holding_short_runway,(agent,runway)).
type(on_extended_area_runway,(agent,runway)).
type(holding_on_runway,(agent,runway)).
type(parallel_runways,(runway,runway)).
type(intersecting_runways,(runway,runway)).
type(same_runway,(runway,runway)).
";

/// The three runway rules used as a planting source and as a hand-written
/// reference hypothesis.
pub const RUNWAY_RULES: &str = "\
collision(V0,V1):- landing_runway(V1,V2),same_runway(V3,V2),holding_on_runway(V0,V3).
collision(V0,V1):- landing_runway(V1,V2),cross_runway(V0,V2).
collision(V0,V1):- on_extended_area_runway(V1,V2),landing_runway(V0,V3),same_runway(V2,V3).
";

//! Level 1: bundle validation with bounded regeneration.

use std::collections::{BTreeSet, HashMap};

use crate::ingestion::{IngestError, RawBundle};
use crate::logic::{parse_examples, parse_facts, Atom, BiasSpec, ExampleSet, PredDecl, Program};

/// What a bundle is expected to contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleRole {
    /// A complete subset: facts plus at least one positive.
    Subset,
    /// Extraction of a violation report: positives only.
    Violation,
    /// Extraction of a nominal observation: negatives only.
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid {
        background: Program,
        examples: ExampleSet,
        attempts: u32,
    },
    Rejected {
        reasons: Vec<String>,
        attempts: u32,
    },
}

impl Validation {
    pub fn attempts(&self) -> u32 {
        match self {
            Validation::Valid { attempts, .. } | Validation::Rejected { attempts, .. } => *attempts,
        }
    }
}

fn vocabulary(atom: &Atom, decl: Option<&PredDecl>, other: Option<&PredDecl>) -> Option<String> {
    let sig = format!("{}/{}", atom.predicate, atom.arity());
    match decl {
        Some(d) if d.arity == atom.arity() => None,
        Some(d) => Some(format!("arity mismatch: {sig}, declared {}/{}", d.name, d.arity)),
        None if other.is_some() => Some(format!("misplaced predicate {sig}")),
        None => Some(format!("unknown predicate {sig}")),
    }
}

fn record_types(atom: &Atom, bias: &BiasSpec, seen: &mut HashMap<String, String>, out: &mut BTreeSet<String>) {
    let Some(decl) = bias.decl(&atom.predicate) else { return };
    if decl.arity != atom.arity() {
        return;
    }
    for (i, t) in atom.args.iter().enumerate() {
        let Some(ty) = decl.arg_type(i) else { continue };
        match seen.get(t.name()) {
            Some(prev) if prev != ty => {
                out.insert(format!("type conflict: {}", t.name()));
            }
            Some(_) => {}
            None => {
                seen.insert(t.name().to_string(), ty.to_string());
            }
        }
    }
}

/// Runs checks (a)-(e) on one candidate bundle.
pub fn check_bundle(raw: &RawBundle, bias: &BiasSpec, role: BundleRole) -> Result<(Program, ExampleSet), Vec<String>> {
    let mut reasons = Vec::new();
    let background = parse_facts(&raw.background).map_err(|e| reasons.push(format!("background: {e}")));
    let examples = parse_examples(&raw.examples).map_err(|e| reasons.push(format!("examples: {e}")));
    let (Ok(background), Ok(examples)) = (background, examples) else {
        return Err(reasons);
    };

    let mut vocab = BTreeSet::new();
    for f in background.facts() {
        if let Some(r) = vocabulary(f, bias.body_decl(&f.predicate), bias.head_decl(&f.predicate)) {
            vocab.insert(r);
        }
    }
    for e in examples.positives().iter().chain(examples.negatives()) {
        if let Some(r) = vocabulary(e, bias.head_decl(&e.predicate), bias.body_decl(&e.predicate)) {
            vocab.insert(r);
        }
    }
    reasons.extend(vocab);

    let mut types = BTreeSet::new();
    let mut seen = HashMap::new();
    for a in background.facts().chain(examples.positives()).chain(examples.negatives()) {
        record_types(a, bias, &mut seen, &mut types);
    }
    reasons.extend(types);

    match role {
        BundleRole::Subset | BundleRole::Violation if examples.positives().is_empty() => {
            reasons.push("no positive examples".into())
        }
        _ => {}
    }
    if role == BundleRole::Violation && !examples.negatives().is_empty() {
        reasons.push("violation bundle contains negative examples".into());
    }
    if role == BundleRole::Nominal && !examples.positives().is_empty() {
        reasons.push("nominal bundle contains positive examples".into());
    }

    if reasons.is_empty() {
        Ok((background, examples))
    } else {
        Err(reasons)
    }
}

/// Validates the bundle returned by `fetch(attempt)`, asking for a fresh one
/// after each failure, up to `attempts` fetches in total. Rejection reasons
/// from every attempt are kept, prefixed with the attempt number.
pub fn validate_bundle<F>(mut fetch: F, bias: &BiasSpec, attempts: u32, role: BundleRole) -> Result<Validation, IngestError>
where
    F: FnMut(u32) -> Result<RawBundle, IngestError>,
{
    let mut reasons = Vec::new();
    for attempt in 1..=attempts.max(1) {
        let raw = fetch(attempt)?;
        match check_bundle(&raw, bias, role) {
            Ok((background, examples)) => {
                return Ok(Validation::Valid {
                    background,
                    examples,
                    attempts: attempt,
                })
            }
            Err(rs) => reasons.extend(rs.into_iter().map(|r| format!("attempt {attempt}: {r}"))),
        }
    }
    Ok(Validation::Rejected {
        reasons,
        attempts: attempts.max(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_bias, RUNWAY_BIAS};

    fn bias() -> BiasSpec {
        parse_bias(RUNWAY_BIAS).unwrap()
    }

    fn raw(bk: &str, exs: &str) -> RawBundle {
        RawBundle {
            background: bk.into(),
            examples: exs.into(),
        }
    }

    const GOOD_BK: &str = "landing_runway(a2,r1).\ncross_runway(a1,r1).\n";
    const GOOD_EXS: &str = "pos(collision(a1,a2)).\nneg(collision(a2,a1)).\n";

    #[test]
    fn well_formed_bundle_is_valid() {
        assert!(check_bundle(&raw(GOOD_BK, GOOD_EXS), &bias(), BundleRole::Subset).is_ok());
    }

    #[test]
    fn unknown_predicate_is_named() {
        let e = check_bundle(&raw("taxi_speed(a1,fast).\n", GOOD_EXS), &bias(), BundleRole::Subset).unwrap_err();
        assert_eq!(e, ["unknown predicate taxi_speed/2"]);
    }

    #[test]
    fn type_conflict_is_named() {
        let bk = "landing_runway(a2,r31l).\ncross_runway(r31l,r1).\n";
        let e = check_bundle(&raw(bk, GOOD_EXS), &bias(), BundleRole::Subset).unwrap_err();
        assert_eq!(e, ["type conflict: r31l"]);
    }

    #[test]
    fn overlap_and_missing_positive() {
        let e = check_bundle(&raw(GOOD_BK, "pos(collision(a1,a2)).\nneg(collision(a1,a2)).\n"), &bias(), BundleRole::Subset);
        assert!(e.is_err());
        let e = check_bundle(&raw(GOOD_BK, "neg(collision(a1,a2)).\n"), &bias(), BundleRole::Subset).unwrap_err();
        assert_eq!(e, ["no positive examples"]);
        assert!(check_bundle(&raw(GOOD_BK, "neg(collision(a1,a2)).\n"), &bias(), BundleRole::Nominal).is_ok());
        assert!(check_bundle(&raw(GOOD_BK, GOOD_EXS), &bias(), BundleRole::Violation).is_err());
    }

    #[test]
    fn syntax_and_arity() {
        assert!(check_bundle(&raw("landing_runway(a2,r1\n", GOOD_EXS), &bias(), BundleRole::Subset).is_err());
        let e = check_bundle(&raw("landing_runway(a2).\n", GOOD_EXS), &bias(), BundleRole::Subset).unwrap_err();
        assert!(e[0].starts_with("arity mismatch"), "{e:?}");
    }

    #[test]
    fn third_attempt_accepted() {
        let mut calls = 0;
        let v = validate_bundle(
            |a| {
                calls += 1;
                Ok(if a < 3 { raw("taxi_speed(a1,fast).\n", GOOD_EXS) } else { raw(GOOD_BK, GOOD_EXS) })
            },
            &bias(),
            3,
            BundleRole::Subset,
        )
        .unwrap();
        assert_eq!(v.attempts(), 3);
        assert!(matches!(v, Validation::Valid { .. }));
        assert_eq!(calls, 3);
    }

    #[test]
    fn persistent_fault_rejected_after_three() {
        let v = validate_bundle(|_| Ok(raw("taxi_speed(a1,fast).\n", GOOD_EXS)), &bias(), 3, BundleRole::Subset).unwrap();
        match v {
            Validation::Rejected { reasons, attempts } => {
                assert_eq!(attempts, 3);
                assert_eq!(reasons.len(), 3);
                assert!(reasons.iter().all(|r| r.ends_with("unknown predicate taxi_speed/2")));
            }
            other => panic!("{other:?}"),
        }
    }
}

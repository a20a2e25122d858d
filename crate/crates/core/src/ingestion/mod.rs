//! Where candidate bundles come from.
//!
//! Extraction is a pluggable boundary: an [`Extractor`] turns a
//! [`SourceRecord`] into raw bundle text, possibly differently on each
//! attempt. Nothing produced here is trusted; every bundle goes through
//! Level-1 validation in the pipeline.

mod corpus;
mod fixture;
pub mod synth;

use std::fmt;
use std::path::PathBuf;

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use corpus::{read_corpus, write_corpus, Corpus, CorpusEntry};
pub use fixture::FixtureExtractor;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing fixture {0}")]
    MissingFixture(PathBuf),
    #[error("bad meta: {0}")]
    BadMeta(String),
    #[error("cannot pair subsets: {0}")]
    Pairing(String),
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Candidate background and example text, as produced by an extractor.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawBundle {
    pub background: String,
    pub examples: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Violation,
    Nominal,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Violation => "violation",
            RecordKind::Nominal => "nominal",
        })
    }
}

impl std::str::FromStr for RecordKind {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "violation" => Ok(RecordKind::Violation),
            "nominal" => Ok(RecordKind::Nominal),
            other => Err(IngestError::BadMeta(format!("unknown record kind `{other}`"))),
        }
    }
}

/// One raw observation: an incident report (violation) or a routine
/// operation (nominal).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRecord {
    pub id: String,
    pub kind: RecordKind,
    pub timestamp: NaiveDateTime,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorHandle {
    pub name: String,
    pub supports_regeneration: bool,
}

pub trait Extractor: Sync {
    fn handle(&self) -> ExtractorHandle;

    /// Candidate bundle for `record`; `attempt` starts at 1.
    fn extract(&self, record: &SourceRecord, attempt: u32) -> Result<RawBundle, IngestError>;
}

/// Identity and provenance of one subset; serialized as the `meta` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetMeta {
    pub id: String,
    pub timestamp: NaiveDateTime,
    pub violation_source: String,
    pub nominal_source: String,
    pub tags: Vec<String>,
}

impl SubsetMeta {
    pub fn new(id: impl Into<String>, timestamp: NaiveDateTime) -> Self {
        let id = id.into();
        SubsetMeta {
            violation_source: id.clone(),
            nominal_source: id.clone(),
            id,
            timestamp,
            tags: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "id: {}\ntimestamp: {}\nviolation_source: {}\nnominal_source: {}\n",
            self.id,
            self.timestamp.format(TIMESTAMP_FORMAT),
            self.violation_source,
            self.nominal_source
        );
        if !self.tags.is_empty() {
            out.push_str(&format!("tags: {}\n", self.tags.join(", ")));
        }
        out
    }

    /// Parses `key: value` lines. `default_id` is used when no `id` key is
    /// present (the corpus directory name).
    pub fn parse(text: &str, default_id: &str) -> Result<Self, IngestError> {
        let mut id = default_id.to_string();
        let mut timestamp = None;
        let mut violation = None;
        let mut nominal = None;
        let mut tags = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| IngestError::BadMeta(format!("expected `key: value`, got `{line}`")))?;
            let value = value.trim();
            match key.trim() {
                "id" => id = value.to_string(),
                "timestamp" => {
                    timestamp = Some(
                        NaiveDateTime::parse_from_str(value, TIMESTAMP_FORMAT)
                            .map_err(|e| IngestError::BadMeta(format!("timestamp `{value}`: {e}")))?,
                    )
                }
                "violation_source" => violation = Some(value.to_string()),
                "nominal_source" => nominal = Some(value.to_string()),
                "tags" => {
                    tags = value
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                other => return Err(IngestError::BadMeta(format!("unknown key `{other}`"))),
            }
        }
        let timestamp = timestamp.ok_or_else(|| IngestError::BadMeta(format!("{id}: missing timestamp")))?;
        Ok(SubsetMeta {
            violation_source: violation.unwrap_or_else(|| id.clone()),
            nominal_source: nominal.unwrap_or_else(|| id.clone()),
            id,
            timestamp,
            tags,
        })
    }
}

/// Pairs every violation with a nominal record. Nominals are taken in a
/// seeded permutation and reused round-robin when there are fewer of them.
pub fn pair_subsets(
    violations: &[SourceRecord],
    nominals: &[SourceRecord],
    seed: u64,
) -> Result<Vec<(SourceRecord, SourceRecord)>, IngestError> {
    if violations.is_empty() {
        return Err(IngestError::Pairing("no violation records".into()));
    }
    if nominals.is_empty() {
        return Err(IngestError::Pairing("no nominal records".into()));
    }
    let mut order: Vec<usize> = (0..nominals.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(violations
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), nominals[order[i % order.len()]].clone()))
        .collect())
}

/// Meta for the subset built from a (violation, nominal) pair; the subset is
/// dated by its violation report.
pub fn pair_meta(violation: &SourceRecord, nominal: &SourceRecord) -> SubsetMeta {
    SubsetMeta {
        id: format!("{}+{}", violation.id, nominal.id),
        timestamp: violation.timestamp,
        violation_source: violation.id.clone(),
        nominal_source: nominal.id.clone(),
        tags: Vec::new(),
    }
}

/// Reads a records listing: one `<id> <violation|nominal> <timestamp>` per line.
pub fn parse_records(text: &str) -> Result<Vec<SourceRecord>, IngestError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [id, kind, ts] = parts[..] else {
            return Err(IngestError::BadMeta(format!("bad record line `{line}`")));
        };
        let timestamp = NaiveDateTime::parse_from_str(ts, TIMESTAMP_FORMAT)
            .map_err(|e| IngestError::BadMeta(format!("timestamp `{ts}`: {e}")))?;
        out.push(SourceRecord {
            id: id.to_string(),
            kind: kind.parse()?,
            timestamp,
            payload: String::new(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, kind: RecordKind) -> SourceRecord {
        SourceRecord {
            id: id.into(),
            kind,
            timestamp: NaiveDateTime::parse_from_str("2024-01-01T00:00:00", TIMESTAMP_FORMAT).unwrap(),
            payload: String::new(),
        }
    }

    #[test]
    fn round_robin_reuses_the_first_nominal() {
        let v: Vec<_> = (0..3).map(|i| rec(&format!("v{i}"), RecordKind::Violation)).collect();
        let n: Vec<_> = (0..2).map(|i| rec(&format!("n{i}"), RecordKind::Nominal)).collect();
        let pairs = pair_subsets(&v, &n, 7).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].1, pairs[2].1);
        assert_ne!(pairs[0].1, pairs[1].1);
        assert_eq!(pairs, pair_subsets(&v, &n, 7).unwrap());
    }

    #[test]
    fn full_scale_pairing() {
        let v: Vec<_> = (0..300).map(|i| rec(&format!("v{i}"), RecordKind::Violation)).collect();
        let n: Vec<_> = (0..300).map(|i| rec(&format!("n{i}"), RecordKind::Nominal)).collect();
        let pairs = pair_subsets(&v, &n, 1).unwrap();
        assert_eq!(pairs.len(), 300);
        let mut used: Vec<_> = pairs.iter().map(|p| p.1.id.clone()).collect();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 300);
    }

    #[test]
    fn empty_inputs_rejected() {
        let n = vec![rec("n0", RecordKind::Nominal)];
        assert!(matches!(pair_subsets(&[], &n, 0), Err(IngestError::Pairing(_))));
        let v = vec![rec("v0", RecordKind::Violation)];
        assert!(matches!(pair_subsets(&v, &[], 0), Err(IngestError::Pairing(_))));
    }

    #[test]
    fn meta_round_trip() {
        let mut m = SubsetMeta::new("s001", NaiveDateTime::parse_from_str("2024-02-03T04:05:06", TIMESTAMP_FORMAT).unwrap());
        m.tags = vec!["parallel-runway".into(), "canonical".into()];
        m.nominal_source = "n7".into();
        assert_eq!(SubsetMeta::parse(&m.to_text(), "other").unwrap(), m);
        assert!(SubsetMeta::parse("id: x\n", "x").is_err());
        assert!(SubsetMeta::parse("timestamp: yesterday\n", "x").is_err());
    }

    #[test]
    fn records_listing() {
        let r = parse_records("# id kind time\nv1 violation 2024-01-01T00:00:00\nn1 nominal 2024-01-02T00:00:00\n").unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].kind, RecordKind::Nominal);
        assert!(parse_records("v1 incident 2024-01-01T00:00:00").is_err());
    }
}

use std::path::{Path, PathBuf};

use super::{Extractor, ExtractorHandle, IngestError, RawBundle, SourceRecord};

/// Reads pre-extracted bundles from `<root>/<record-id>/attempt-<n>/`
/// (`bk.bk` and `exs.exs`), falling back to `attempt-1` when the requested
/// attempt has no directory of its own.
#[derive(Debug, Clone)]
pub struct FixtureExtractor {
    root: PathBuf,
}

impl FixtureExtractor {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureExtractor { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn attempt_dir(&self, record: &SourceRecord, attempt: u32) -> Result<PathBuf, IngestError> {
        let dir = self.root.join(&record.id).join(format!("attempt-{attempt}"));
        if dir.is_dir() {
            return Ok(dir);
        }
        let first = self.root.join(&record.id).join("attempt-1");
        if first.is_dir() {
            Ok(first)
        } else {
            Err(IngestError::MissingFixture(first))
        }
    }
}

fn read(path: PathBuf) -> Result<String, IngestError> {
    match std::fs::read_to_string(&path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(IngestError::MissingFixture(path)),
        Err(e) => Err(IngestError::io(path, e)),
    }
}

impl Extractor for FixtureExtractor {
    fn handle(&self) -> ExtractorHandle {
        ExtractorHandle {
            name: format!("fixture:{}", self.root.display()),
            supports_regeneration: true,
        }
    }

    fn extract(&self, record: &SourceRecord, attempt: u32) -> Result<RawBundle, IngestError> {
        let dir = self.attempt_dir(record, attempt.max(1))?;
        Ok(RawBundle {
            background: read(dir.join("bk.bk"))?,
            examples: read(dir.join("exs.exs"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{RecordKind, TIMESTAMP_FORMAT};
    use chrono::NaiveDateTime;

    fn record(id: &str) -> SourceRecord {
        SourceRecord {
            id: id.into(),
            kind: RecordKind::Violation,
            timestamp: NaiveDateTime::parse_from_str("2024-01-01T00:00:00", TIMESTAMP_FORMAT).unwrap(),
            payload: String::new(),
        }
    }

    fn write(root: &Path, id: &str, attempt: u32, bk: &str, exs: &str) {
        let d = root.join(id).join(format!("attempt-{attempt}"));
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("bk.bk"), bk).unwrap();
        std::fs::write(d.join("exs.exs"), exs).unwrap();
    }

    #[test]
    fn falls_back_to_first_attempt() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "v1", 1, "landing_runway(a2,r1).\ncross_runway(a1,r1).\n", "pos(collision(a1,a2)).\n");
        let x = FixtureExtractor::new(tmp.path());
        let first = x.extract(&record("v1"), 1).unwrap();
        assert_eq!(x.extract(&record("v1"), 2).unwrap(), first);
        assert!(first.examples.contains("pos(collision(a1,a2))"));
    }

    #[test]
    fn attempt_specific_variants() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "v1", 1, "bad\n", "");
        write(tmp.path(), "v1", 2, "on_taxiway(a1).\n", "");
        let x = FixtureExtractor::new(tmp.path());
        assert_eq!(x.extract(&record("v1"), 2).unwrap().background, "on_taxiway(a1).\n");
        assert_eq!(x.extract(&record("v1"), 3).unwrap().background, "bad\n");
    }

    #[test]
    fn missing_fixture_is_an_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        let x = FixtureExtractor::new(tmp.path());
        assert!(matches!(x.extract(&record("nope"), 1), Err(IngestError::MissingFixture(_))));
    }
}

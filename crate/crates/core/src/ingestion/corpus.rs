//! On-disk corpus layout: `<dir>/<subset-id>/{bk.bk, exs.exs, meta}` plus an
//! optional shared `<dir>/bias.bias`.

use std::path::Path;

use super::{IngestError, RawBundle, SubsetMeta};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub meta: SubsetMeta,
    pub bundle: RawBundle,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub bias: Option<String>,
    pub entries: Vec<CorpusEntry>,
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))
}

/// Reads every subdirectory of `dir` as a bundle, in directory-name order.
pub fn read_corpus(dir: &Path) -> Result<Corpus, IngestError> {
    let listing = std::fs::read_dir(dir).map_err(|e| IngestError::io(dir, e))?;
    let mut subdirs = Vec::new();
    for entry in listing {
        let entry = entry.map_err(|e| IngestError::io(dir, e))?;
        if entry.file_type().map_err(|e| IngestError::io(entry.path(), e))?.is_dir() {
            subdirs.push(entry.path());
        }
    }
    subdirs.sort();

    let bias_path = dir.join("bias.bias");
    let bias = if bias_path.is_file() { Some(read(&bias_path)?) } else { None };

    let mut entries = Vec::with_capacity(subdirs.len());
    for sub in subdirs {
        let name = sub.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let meta = SubsetMeta::parse(&read(&sub.join("meta"))?, &name)?;
        entries.push(CorpusEntry {
            meta,
            bundle: RawBundle {
                background: read(&sub.join("bk.bk"))?,
                examples: read(&sub.join("exs.exs"))?,
            },
        });
    }
    Ok(Corpus { bias, entries })
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<(), IngestError> {
    let write = |path: &Path, text: &str| std::fs::write(path, text).map_err(|e| IngestError::io(path, e));
    std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    if let Some(bias) = &corpus.bias {
        write(&dir.join("bias.bias"), bias)?;
    }
    for e in &corpus.entries {
        let sub = dir.join(&e.meta.id);
        std::fs::create_dir_all(&sub).map_err(|err| IngestError::io(&sub, err))?;
        write(&sub.join("bk.bk"), &e.bundle.background)?;
        write(&sub.join("exs.exs"), &e.bundle.examples)?;
        write(&sub.join("meta"), &e.meta.to_text())?;
    }
    Ok(())
}

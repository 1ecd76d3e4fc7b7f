//! Append-only JSON-lines resolution cache. One object per line:
//! `{key, kind, cid, smiles, resolved, ts}`. Loading folds later lines over
//! earlier ones.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ResolveError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LookupKind {
    Name,
    Ndc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub kind: LookupKind,
    pub cid: Option<u64>,
    pub smiles: Option<String>,
    pub resolved: bool,
    /// Unix seconds at write time.
    pub ts: u64,
}

impl CacheEntry {
    pub fn positive(kind: LookupKind, key: &str, cid: u64, smiles: &str, ts: u64) -> CacheEntry {
        CacheEntry { key: key.into(), kind, cid: Some(cid), smiles: Some(smiles.into()), resolved: true, ts }
    }

    pub fn negative(kind: LookupKind, key: &str, ts: u64) -> CacheEntry {
        CacheEntry { key: key.into(), kind, cid: None, smiles: None, resolved: false, ts }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("cache entry serializes")
    }
}

#[derive(Debug, Default)]
pub struct ResolutionCache {
    path: Option<PathBuf>,
    entries: BTreeMap<(LookupKind, String), CacheEntry>,
}

impl ResolutionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; later appends go to the same file.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, ResolveError> {
        let path = path.into();
        let mut cache = ResolutionCache { path: Some(path.clone()), entries: BTreeMap::new() };
        if path.exists() {
            let f = File::open(&path).map_err(|e| ResolveError::io(&path, e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| ResolveError::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry =
                    serde_json::from_str(&line).map_err(|_| ResolveError::CorruptLine { path: path.clone(), line: i + 1 })?;
                cache.insert_mem(entry);
            }
        }
        Ok(cache)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn insert_mem(&mut self, e: CacheEntry) {
        self.entries.insert((e.kind, e.key.clone()), e);
    }

    /// Appends one line (flushed before returning) and updates the map.
    pub fn append(&mut self, entry: CacheEntry) -> Result<(), ResolveError> {
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| ResolveError::io(path, e))?;
            let mut line = entry.to_line();
            line.push('\n');
            f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|e| ResolveError::io(path, e))?;
        }
        self.insert_mem(entry);
        Ok(())
    }

    pub fn get(&self, kind: LookupKind, key: &str) -> Option<&CacheEntry> {
        self.entries.get(&(kind, key.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &CacheEntry> {
        self.entries.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_empty_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        std::fs::write(&p, "").unwrap();
        assert!(ResolutionCache::open(&p).unwrap().is_empty());
        assert!(ResolutionCache::open(dir.path().join("missing.jsonl")).unwrap().is_empty());
    }

    #[test]
    fn later_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let mut c = ResolutionCache::open(&p).unwrap();
        c.append(CacheEntry::negative(LookupKind::Name, "aspirin", 1)).unwrap();
        c.append(CacheEntry::positive(LookupKind::Name, "aspirin", 2244, "CC(=O)OC1=CC=CC=C1C(=O)O", 2)).unwrap();
        let r = ResolutionCache::open(&p).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.get(LookupKind::Name, "aspirin").unwrap().resolved);
        assert!(r.get(LookupKind::Ndc, "aspirin").is_none());
    }

    #[test]
    fn truncated_line_reports_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let good = CacheEntry::negative(LookupKind::Ndc, "00000000001", 0).to_line();
        std::fs::write(&p, format!("{good}\n{}", &good[..good.len() / 2])).unwrap();
        match ResolutionCache::open(&p) {
            Err(ResolveError::CorruptLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}

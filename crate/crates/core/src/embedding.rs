//! Drug representation providers: computed ECFP bit vectors or rows of a
//! pretrained embedding table loaded from TSV.
//!
//! Table format: UTF-8 TSV, header `smiles<TAB>v0<TAB>...<TAB>v{k-1}`, one row
//! per drug, decimal floats. Duplicate keys are rejected.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{self, DEFAULT_NBITS, DEFAULT_RADIUS};
use crate::smiles::{self, SmilesError};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("SMILES not present in embedding table: {0}")]
    UnknownSmiles(String),
    #[error("cannot parse SMILES {smiles:?}: {source}")]
    Parse { smiles: String, source: SmilesError },
    #[error("embedding table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("duplicate embedding table key on line {line}: {key}")]
    DuplicateKey { line: usize, key: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    Ecfp,
    TransformerTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source: EmbeddingSource,
}

impl EmbeddingVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderKind {
    Ecfp { radius: u32, nbits: usize },
    Table { path: PathBuf },
}

impl Default for ProviderKind {
    fn default() -> Self {
        ProviderKind::Ecfp { radius: DEFAULT_RADIUS, nbits: DEFAULT_NBITS }
    }
}

/// Maps SMILES to fixed-width vectors. Immutable after construction; the
/// memo cache is invisible to callers.
#[derive(Debug)]
pub struct EmbeddingProvider {
    kind: ProviderKind,
    table: Option<EmbeddingTable>,
    memo: Mutex<HashMap<String, Arc<Vec<f64>>>>,
}

impl EmbeddingProvider {
    pub fn ecfp(radius: u32, nbits: usize) -> Self {
        assert!(nbits > 0);
        EmbeddingProvider {
            kind: ProviderKind::Ecfp { radius, nbits },
            table: None,
            memo: Mutex::default(),
        }
    }

    pub fn from_table(table: EmbeddingTable, path: impl Into<PathBuf>) -> Self {
        EmbeddingProvider {
            kind: ProviderKind::Table { path: path.into() },
            table: Some(table),
            memo: Mutex::default(),
        }
    }

    pub fn load_table(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let table = EmbeddingTable::read(std::fs::File::open(path)?)?;
        Ok(Self::from_table(table, path))
    }

    pub fn from_kind(kind: &ProviderKind) -> Result<Self, EmbedError> {
        match kind {
            ProviderKind::Ecfp { radius, nbits } => Ok(Self::ecfp(*radius, *nbits)),
            ProviderKind::Table { path } => Self::load_table(path),
        }
    }

    pub fn kind(&self) -> &ProviderKind {
        &self.kind
    }

    /// Output width k.
    pub fn width(&self) -> usize {
        match (&self.kind, &self.table) {
            (ProviderKind::Ecfp { nbits, .. }, _) => *nbits,
            (_, Some(t)) => t.width,
            _ => 0,
        }
    }

    pub fn source(&self) -> EmbeddingSource {
        match self.kind {
            ProviderKind::Ecfp { .. } => EmbeddingSource::Ecfp,
            ProviderKind::Table { .. } => EmbeddingSource::TransformerTable,
        }
    }

    pub fn embed(&self, smiles: &str) -> Result<EmbeddingVector, EmbedError> {
        let values = self.embed_shared(smiles)?;
        Ok(EmbeddingVector { values: values.as_ref().clone(), source: self.source() })
    }

    /// Table lookup by SMILES first, then by the compound id rendered as text.
    pub fn embed_resolved(&self, smiles: &str, cid: Option<u64>) -> Result<EmbeddingVector, EmbedError> {
        match (self.embed(smiles), cid, &self.table) {
            (Err(EmbedError::UnknownSmiles(_)), Some(cid), Some(table)) => table
                .get(&cid.to_string())
                .map(|v| EmbeddingVector { values: v.to_vec(), source: self.source() })
                .ok_or_else(|| EmbedError::UnknownSmiles(smiles.to_string())),
            (result, _, _) => result,
        }
    }

    pub(crate) fn embed_shared(&self, smiles: &str) -> Result<Arc<Vec<f64>>, EmbedError> {
        if let Some(v) = self.memo.lock().unwrap().get(smiles) {
            return Ok(v.clone());
        }
        let values = match (&self.kind, &self.table) {
            (ProviderKind::Ecfp { radius, nbits }, _) => {
                let mol = smiles::parse(smiles).map_err(|source| EmbedError::Parse {
                    smiles: smiles.to_string(),
                    source,
                })?;
                fingerprint::ecfp(&mol, *radius, *nbits).to_f64()
            }
            (ProviderKind::Table { .. }, Some(table)) => table
                .get(smiles)
                .ok_or_else(|| EmbedError::UnknownSmiles(smiles.to_string()))?
                .to_vec(),
            (ProviderKind::Table { .. }, None) => unreachable!("table provider without a table"),
        };
        let values = Arc::new(values);
        self.memo.lock().unwrap().insert(smiles.to_string(), values.clone());
        Ok(values)
    }
}

/// Pretrained embedding rows keyed by SMILES (or compound id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    width: usize,
    index: HashMap<String, usize>,
    keys: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(width: usize) -> Self {
        EmbeddingTable { width, ..Default::default() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index.get(key).map(|&i| self.rows[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.keys.iter().map(String::as_str).zip(self.rows.iter().map(Vec::as_slice))
    }

    /// Appends a row; errors on a duplicate key or wrong width.
    pub fn insert(&mut self, key: String, values: Vec<f64>) -> Result<(), EmbedError> {
        let line = self.rows.len() + 2;
        if values.len() != self.width {
            return Err(EmbedError::Table {
                line,
                reason: format!("expected {} values, found {}", self.width, values.len()),
            });
        }
        if self.index.contains_key(&key) {
            return Err(EmbedError::DuplicateKey { line, key });
        }
        self.index.insert(key.clone(), self.rows.len());
        self.keys.push(key);
        self.rows.push(values);
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, EmbedError> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines.next().transpose()?.ok_or(EmbedError::Table {
            line: 1,
            reason: "missing header".into(),
        })?;
        let cols: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
        if cols.first() != Some(&"smiles") || cols.len() < 2 {
            return Err(EmbedError::Table { line: 1, reason: "header must be smiles<TAB>v0..".into() });
        }
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("v{i}") {
                return Err(EmbedError::Table { line: 1, reason: format!("column {} should be v{i}", i + 1) });
            }
        }
        let mut table = EmbeddingTable::new(cols.len() - 1);
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let key = fields.next().unwrap_or_default().to_string();
            let values = fields
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(EmbedError::Table { line: line_no, reason: format!("bad value {f:?}") }),
                })
                .collect::<Result<Vec<f64>, _>>()?;
            if values.len() != table.width {
                return Err(EmbedError::Table {
                    line: line_no,
                    reason: format!("expected {} values, found {}", table.width, values.len()),
                });
            }
            if table.index.contains_key(&key) {
                return Err(EmbedError::DuplicateKey { line: line_no, key });
            }
            table.insert(key, values)?;
        }
        Ok(table)
    }

    /// Writes the table; values use Rust's shortest round-trip formatting.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "smiles")?;
        for i in 0..self.width {
            write!(w, "\tv{i}")?;
        }
        writeln!(w)?;
        for (key, row) in self.iter() {
            write!(w, "{key}")?;
            for v in row {
                write!(w, "\t{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

use std::collections::HashMap;

use super::{CohortError, PatientRecord, ResolvedDrugRef};
use crate::embedding::EmbeddingProvider;
use crate::nn::{DrugRows, SparseVec};

const MAGIC: &[u8; 4] = b"RXDM";

/// Dense n×k drug matrix: row i is the embedding of drug i for
/// i < `actual_count`, zero padding after.
#[derive(Debug, Clone, PartialEq)]
pub struct DrugMatrix {
    pub n: usize,
    pub k: usize,
    pub actual_count: usize,
    pub values: Vec<f64>,
}

impl DrugMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    /// `RXDM`, then n, k, actual_count as u32 LE, then n·k f64 LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.values.len() * 8);
        out.extend_from_slice(MAGIC);
        for v in [self.n, self.k, self.actual_count] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DrugMatrix, CohortError> {
        let err = |m: &str| CohortError::DrugMatrixBytes(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(err("missing header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (n, k, actual_count) = (word(0), word(1), word(2));
        if actual_count > n {
            return Err(err("actual_count exceeds n"));
        }
        let body = &bytes[16..];
        if body.len() != n * k * 8 {
            return Err(err("length does not match n×k"));
        }
        let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if values[actual_count * k..].iter().any(|&v| v != 0.0) {
            return Err(err("nonzero padding"));
        }
        Ok(DrugMatrix { n, k, actual_count, values })
    }
}

fn embed_row(provider: &EmbeddingProvider, id: &str, order: usize, d: &ResolvedDrugRef) -> Result<Vec<f64>, CohortError> {
    provider
        .embed_resolved(&d.smiles, d.cid)
        .map(|v| v.values)
        .map_err(|source| CohortError::Embed { id: id.to_string(), order, source })
}

/// First `min(len, n)` drugs in order, zero-padded to `n` rows.
pub fn build_drug_matrix(
    drugs: &[ResolvedDrugRef],
    provider: &EmbeddingProvider,
    n: usize,
) -> Result<DrugMatrix, CohortError> {
    if drugs.is_empty() {
        return Err(CohortError::Config("drug list is empty".into()));
    }
    let k = provider.width();
    let actual_count = drugs.len().min(n);
    let mut values = vec![0.0; n * k];
    for (i, d) in drugs.iter().take(n).enumerate() {
        let row = embed_row(provider, "", i, d)?;
        values[i * k..(i + 1) * k].copy_from_slice(&row);
    }
    Ok(DrugMatrix { n, k, actual_count, values })
}

/// Sparse drug matrices for many patients: each distinct drug is embedded
/// once and patients hold row indices into the shared table.
#[derive(Debug, Clone, PartialEq)]
pub struct DrugFeatures {
    pub n: usize,
    pub k: usize,
    pub table: Vec<SparseVec>,
    pub idx: Vec<Vec<u32>>,
}

impl DrugFeatures {
    pub fn build(records: &[PatientRecord], provider: &EmbeddingProvider, n: usize) -> Result<DrugFeatures, CohortError> {
        let mut slot: HashMap<(String, Option<u64>), u32> = HashMap::new();
        let mut table = Vec::new();
        let mut idx = Vec::with_capacity(records.len());
        for r in records {
            let mut rows = Vec::with_capacity(r.drugs.len().min(n));
            for (order, d) in r.drugs.iter().take(n).enumerate() {
                let key = (d.smiles.clone(), d.cid);
                let i = match slot.get(&key) {
                    Some(&i) => i,
                    None => {
                        let v = embed_row(provider, &r.id, order, d)?;
                        table.push(SparseVec::from_dense(&v));
                        let i = (table.len() - 1) as u32;
                        slot.insert(key, i);
                        i
                    }
                };
                rows.push(i);
            }
            idx.push(rows);
        }
        Ok(DrugFeatures { n, k: provider.width(), table, idx })
    }

    pub fn rows(&self, patient: usize) -> DrugRows<'_> {
        DrugRows { table: &self.table, idx: &self.idx[patient], len: self.n }
    }

    /// Dense form of one patient's matrix.
    pub fn dense(&self, patient: usize) -> DrugMatrix {
        let mut values = vec![0.0; self.n * self.k];
        for (i, &t) in self.idx[patient].iter().enumerate() {
            for (c, v) in self.table[t as usize].iter() {
                values[i * self.k + c] = v;
            }
        }
        DrugMatrix { n: self.n, k: self.k, actual_count: self.idx[patient].len(), values }
    }
}

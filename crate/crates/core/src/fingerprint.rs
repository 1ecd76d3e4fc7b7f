//! Extended-connectivity (Morgan) fingerprints folded into bit vectors.
//!
//! Identifiers come from [`IdHasher`], a fixed seed-free hash: each field is
//! written as 8 little-endian bytes after a 4-byte little-endian field count,
//! the byte stream is hashed with FNV-1a 64 (offset `0xcbf29ce484222325`,
//! prime `0x100000001b3`) and finalized with the SplitMix64 mixer. Output is
//! identical on every platform.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::mix64;
use crate::smiles::Molecule;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_NBITS: usize = 1024;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Hash over a length-prefixed sequence of integer fields.
#[derive(Debug, Default, Clone)]
pub struct IdHasher {
    fields: Vec<i64>,
}

impl IdHasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: i64) -> &mut Self {
        self.fields.push(v);
        self
    }

    pub fn push_u64(&mut self, v: u64) -> &mut Self {
        self.fields.push(v as i64);
        self
    }

    pub fn finish(&self) -> u64 {
        let mut h = FNV_OFFSET;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(FNV_PRIME);
            }
        };
        feed(&(self.fields.len() as u32).to_le_bytes());
        for f in &self.fields {
            feed(&f.to_le_bytes());
        }
        mix64(h)
    }
}

/// Fixed-length binary fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitFingerprint {
    words: Vec<u64>,
    nbits: usize,
    radius: u32,
}

impl BitFingerprint {
    pub fn zeros(nbits: usize, radius: u32) -> Self {
        assert!(nbits > 0, "fingerprint length must be positive");
        BitFingerprint { words: vec![0; nbits.div_ceil(64)], nbits, radius }
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.nbits);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.nbits && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of set bits in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&i| self.get(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.nbits).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }
}

/// Per-atom initial identifiers: hash of (atomic number, heavy degree, total
/// H, formal charge, ring flag, aromatic flag).
pub fn atom_invariants(mol: &Molecule) -> Vec<u64> {
    (0..mol.atom_count())
        .map(|i| {
            let a = &mol.atoms()[i];
            invariant_hash(
                a.element,
                mol.heavy_degree(i) as u32,
                mol.total_h(i),
                a.formal_charge,
                a.in_ring,
                a.aromatic,
            )
        })
        .collect()
}

pub fn invariant_hash(element: u8, degree: u32, total_h: u32, charge: i8, in_ring: bool, aromatic: bool) -> u64 {
    IdHasher::new()
        .push(element as i64)
        .push(degree as i64)
        .push(total_h as i64)
        .push(charge as i64)
        .push(in_ring as i64)
        .push(aromatic as i64)
        .finish()
}

/// Distinct environment identifiers up to `radius`, sorted ascending.
///
/// Round `r` updates each atom to `hash(r, old, sorted[(bond code, neighbor
/// old)])`. Every (atom, round) contributes its identifier together with the
/// set of atoms it covers; environments covering the same atom set collapse
/// to the numerically smallest identifier.
pub fn ecfp_identifiers(mol: &Molecule, radius: u32) -> Vec<u64> {
    let n = mol.atom_count();
    let words = n.div_ceil(64).max(1);
    let mut ids = atom_invariants(mol);
    let mut cover: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            let mut s = vec![0u64; words];
            s[i / 64] |= 1 << (i % 64);
            s
        })
        .collect();

    let mut envs: HashMap<Vec<u64>, u64> = HashMap::new();
    let mut record = |set: &Vec<u64>, id: u64| {
        envs.entry(set.clone())
            .and_modify(|cur| *cur = (*cur).min(id))
            .or_insert(id);
    };
    for i in 0..n {
        record(&cover[i], ids[i]);
    }

    for r in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_cover = Vec::with_capacity(n);
        for i in 0..n {
            let mut nbrs: Vec<(u8, u64)> = mol.neighbors(i).map(|(j, o)| (o.code(), ids[j])).collect();
            nbrs.sort_unstable();
            let mut h = IdHasher::new();
            h.push(r as i64).push_u64(ids[i]).push(nbrs.len() as i64);
            for (code, id) in &nbrs {
                h.push(*code as i64).push_u64(*id);
            }
            next_ids.push(h.finish());

            let mut set = cover[i].clone();
            for (j, _) in mol.neighbors(i) {
                for (w, c) in set.iter_mut().zip(&cover[j]) {
                    *w |= c;
                }
            }
            next_cover.push(set);
        }
        ids = next_ids;
        cover = next_cover;
        for i in 0..n {
            record(&cover[i], ids[i]);
        }
    }

    let mut out: Vec<u64> = envs.into_values().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Folds identifiers into `nbits` bits: bit `id mod nbits` is set.
pub fn fold(identifiers: &[u64], nbits: usize, radius: u32) -> BitFingerprint {
    let mut fp = BitFingerprint::zeros(nbits, radius);
    for &id in identifiers {
        fp.set((id % nbits as u64) as usize);
    }
    fp
}

pub fn ecfp(mol: &Molecule, radius: u32, nbits: usize) -> BitFingerprint {
    fold(&ecfp_identifiers(mol, radius), nbits, radius)
}

/// |a ∧ b| / |a ∨ b|, 0.0 when both are empty.
pub fn tanimoto(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64, FingerprintError> {
    if a.nbits != b.nbits {
        return Err(FingerprintError::LengthMismatch(a.nbits, b.nbits));
    }
    let (mut and, mut or) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        and += (x & y).count_ones();
        or += (x | y).count_ones();
    }
    Ok(if or == 0 { 0.0 } else { and as f64 / or as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    fn fp(s: &str, r: u32) -> BitFingerprint {
        ecfp(&parse(s).unwrap(), r, DEFAULT_NBITS)
    }

    #[test]
    fn methane_invariant_matches_tuple() {
        let m = parse("C").unwrap();
        assert_eq!(atom_invariants(&m), vec![invariant_hash(6, 0, 4, 0, false, false)]);
    }

    #[test]
    fn ethanol_invariants_distinct() {
        let ids = atom_invariants(&parse("CCO").unwrap());
        assert_eq!(ids[0], invariant_hash(6, 1, 3, 0, false, false));
        assert_eq!(ids[1], invariant_hash(6, 2, 2, 0, false, false));
        assert_eq!(ids[2], invariant_hash(8, 1, 1, 0, false, false));
        assert!(ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2]);
    }

    #[test]
    fn propane_ends_match() {
        let ids = atom_invariants(&parse("CCC").unwrap());
        assert_eq!(ids[0], ids[2]);
        assert_ne!(ids[0], ids[1]);
    }

    #[test]
    fn methane_collapses_to_one_bit() {
        assert_eq!(ecfp_identifiers(&parse("C").unwrap(), 2).len(), 1);
        assert_eq!(fp("C", 2).popcount(), 1);
    }

    #[test]
    fn ethanol_radius_one_has_six_environments() {
        assert_eq!(ecfp_identifiers(&parse("CCO").unwrap(), 1).len(), 6);
        assert!(fp("CCO", 1).popcount() <= 6);
    }

    #[test]
    fn atom_order_invariance_small() {
        assert_eq!(fp("CCO", 2), fp("OCC", 2));
        assert_eq!(fp("CC(=O)Nc1ccc(O)cc1", 2), fp("Oc1ccc(NC(C)=O)cc1", 2));
    }

    #[test]
    fn fold_examples() {
        assert_eq!(fold(&[], 1024, 0).popcount(), 0);
        let f = fold(&[5, 1029], 1024, 0);
        assert_eq!(f.ones().collect::<Vec<_>>(), vec![5]);
        assert_eq!(fold(&[0, 1, 2], 1024, 0).popcount(), 3);
    }

    #[test]
    fn tanimoto_examples() {
        let x = fp("CCO", 2);
        assert_eq!(tanimoto(&x, &x).unwrap(), 1.0);
        let a = fold(&[1, 2], 64, 0);
        let b = fold(&[3], 64, 0);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.0);
        let e = BitFingerprint::zeros(64, 0);
        assert_eq!(tanimoto(&e, &e).unwrap(), 0.0);
        assert_eq!(
            tanimoto(&e, &BitFingerprint::zeros(32, 0)),
            Err(FingerprintError::LengthMismatch(64, 32))
        );
    }

    #[test]
    fn hash_is_pinned() {
        // Freezes the hash definition; a change here silently changes every fingerprint.
        let h = IdHasher::new().push(6).push(0).push(4).push(0).push(0).push(0).finish();
        assert_eq!(h, invariant_hash(6, 0, 4, 0, false, false));
        // value from an independent Python FNV-1a + finalizer implementation
        assert_eq!(h, 0x208c_68d3_ff19_4211);
        assert_eq!(IdHasher::new().finish(), mix64(fnv_reference(&0u32.to_le_bytes())));
    }

    fn fnv_reference(bytes: &[u8]) -> u64 {
        let mut h = FNV_OFFSET;
        for &b in bytes {
            h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
        }
        h
    }

    #[test]
    fn larger_radius_never_loses_environments() {
        for s in ["CC(=O)Nc1ccc(O)cc1", "c1ccccc1CCN", "C1CC1CCC1CC1", "[Na+].[Cl-]"] {
            let m = parse(s).unwrap();
            let mut last = 0;
            for r in 0..5 {
                let n = ecfp_identifiers(&m, r).len();
                assert!(n >= last, "{s} r={r}");
                last = n;
            }
        }
    }
}

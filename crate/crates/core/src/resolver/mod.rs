//! Prescription records to PubChem compounds.
//!
//! Each query tries its generic name, then its drug name, then its NDC code
//! (via the FDA directory's ingredient name). Every lookup goes through an
//! append-only [`ResolutionCache`]; a warmed cache needs no clients at all.

mod cache;
mod clients;
#[cfg(feature = "live")]
mod live;
mod normalize;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheEntry, LookupKind, ResolutionCache};
pub use clients::{
    fda_ndc_lookup, pubchem_cid_by_name, pubchem_smiles_by_cid, ClientError, CompoundClient, FdaFixtures, FixtureClient,
    FixtureSet, NdcClient, PubchemFixtures, Recorder,
};
#[cfg(feature = "live")]
pub use live::{package_ndc_candidates, FdaClient, PubchemClient, RateLimiter};
pub use normalize::{normalize_name, normalize_ndc, FORMULATION_TOKENS};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("invalid NDC code {0:?}")]
    InvalidNdc(String),
    #[error("{}: corrupt cache line {line}", path.display())]
    CorruptLine { path: PathBuf, line: usize },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("fixture file: {0}")]
    Fixture(String),
    #[error("network error: {0}")]
    Network(String),
}

impl ResolveError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ResolveError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DrugQuery {
    pub drug_name: String,
    pub generic_name: String,
    /// Raw code as it appears in the source, e.g. `"63323026201.0"`.
    pub ndc: String,
}

impl DrugQuery {
    pub fn new(drug_name: &str, generic_name: &str, ndc: &str) -> Self {
        DrugQuery { drug_name: drug_name.into(), generic_name: generic_name.into(), ndc: ndc.into() }
    }

    pub fn is_blank(&self) -> bool {
        self.drug_name.trim().is_empty() && self.generic_name.trim().is_empty() && self.ndc.trim().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionPath {
    GenericName,
    DrugName,
    Ndc,
}

impl ResolutionPath {
    pub fn name(self) -> &'static str {
        match self {
            ResolutionPath::GenericName => "generic_name",
            ResolutionPath::DrugName => "drug_name",
            ResolutionPath::Ndc => "ndc",
        }
    }
}

impl std::fmt::Display for ResolutionPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedDrug {
    pub query: DrugQuery,
    pub cid: u64,
    pub smiles: String,
    pub path: ResolutionPath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Resolved(ResolvedDrug),
    Unresolved { query: DrugQuery, reason: String },
}

impl Resolution {
    pub fn resolved(&self) -> Option<&ResolvedDrug> {
        match self {
            Resolution::Resolved(r) => Some(r),
            Resolution::Unresolved { .. } => None,
        }
    }
}

/// Result of one cached lookup stage.
enum Stage {
    Hit(u64, String),
    Miss(String),
}

pub struct Resolver<'a> {
    cache: ResolutionCache,
    compounds: Option<&'a dyn CompoundClient>,
    ndc: Option<&'a dyn NdcClient>,
    clock: fn() -> u64,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl<'a> Resolver<'a> {
    /// Cache only; a cache miss leaves the stage unresolved without
    /// recording a negative entry.
    pub fn offline(cache: ResolutionCache) -> Self {
        Resolver { cache, compounds: None, ndc: None, clock: unix_now }
    }

    pub fn with_clients(
        cache: ResolutionCache,
        compounds: Option<&'a dyn CompoundClient>,
        ndc: Option<&'a dyn NdcClient>,
    ) -> Self {
        Resolver { cache, compounds, ndc, clock: unix_now }
    }

    pub fn with_clock(mut self, clock: fn() -> u64) -> Self {
        self.clock = clock;
        self
    }

    pub fn cache(&self) -> &ResolutionCache {
        &self.cache
    }

    pub fn into_cache(self) -> ResolutionCache {
        self.cache
    }

    /// First stage that yields a compound wins. Network failures abort the
    /// query and are never cached.
    pub fn resolve(&mut self, q: &DrugQuery) -> Result<Resolution, ResolveError> {
        let mut reasons = Vec::new();
        for (path, raw) in [(ResolutionPath::GenericName, &q.generic_name), (ResolutionPath::DrugName, &q.drug_name)] {
            let key = normalize_name(raw);
            if key.is_empty() {
                continue;
            }
            match self.lookup_name(&key)? {
                Stage::Hit(cid, smiles) => {
                    return Ok(Resolution::Resolved(ResolvedDrug { query: q.clone(), cid, smiles, path }))
                }
                Stage::Miss(why) => reasons.push(format!("{path} {key:?}: {why}")),
            }
        }
        if !q.ndc.trim().is_empty() {
            match normalize_ndc(&q.ndc) {
                Err(e) => reasons.push(format!("ndc: {e}")),
                Ok(ndc) => match self.lookup_ndc(&ndc)? {
                    Stage::Hit(cid, smiles) => {
                        return Ok(Resolution::Resolved(ResolvedDrug {
                            query: q.clone(),
                            cid,
                            smiles,
                            path: ResolutionPath::Ndc,
                        }))
                    }
                    Stage::Miss(why) => reasons.push(format!("ndc {ndc}: {why}")),
                },
            }
        }
        let reason = if reasons.is_empty() { "empty query".to_string() } else { reasons.join("; ") };
        Ok(Resolution::Unresolved { query: q.clone(), reason })
    }

    /// Resolves each distinct query once, returning results in input order.
    pub fn resolve_all(&mut self, queries: &[DrugQuery]) -> Result<Vec<Resolution>, ResolveError> {
        let mut memo: HashMap<&DrugQuery, Resolution> = HashMap::new();
        let mut out = Vec::with_capacity(queries.len());
        for q in queries {
            if !memo.contains_key(q) {
                let r = self.resolve(q)?;
                memo.insert(q, r);
            }
            out.push(memo[q].clone());
        }
        Ok(out)
    }

    fn cached(&self, kind: LookupKind, key: &str) -> Option<Stage> {
        self.cache.get(kind, key).map(|e| match (e.resolved, e.cid, &e.smiles) {
            (true, Some(cid), Some(s)) => Stage::Hit(cid, s.clone()),
            _ => Stage::Miss("cached negative".into()),
        })
    }

    fn record(&mut self, kind: LookupKind, key: &str, r: Result<(u64, String), ClientError>) -> Result<Stage, ResolveError> {
        let ts = (self.clock)();
        match r {
            Ok((cid, smiles)) => {
                self.cache.append(CacheEntry::positive(kind, key, cid, &smiles, ts))?;
                Ok(Stage::Hit(cid, smiles))
            }
            Err(ClientError::Network(m)) => Err(ResolveError::Network(m)),
            Err(e) => {
                self.cache.append(CacheEntry::negative(kind, key, ts))?;
                Ok(Stage::Miss(e.to_string()))
            }
        }
    }

    fn compound_by_name(client: &dyn CompoundClient, name: &str) -> Result<(u64, String), ClientError> {
        let cid = pubchem_cid_by_name(client, name)?[0];
        Ok((cid, pubchem_smiles_by_cid(client, cid)?))
    }

    fn lookup_name(&mut self, key: &str) -> Result<Stage, ResolveError> {
        if let Some(s) = self.cached(LookupKind::Name, key) {
            return Ok(s);
        }
        let Some(client) = self.compounds else {
            return Ok(Stage::Miss("not in cache".into()));
        };
        let r = Self::compound_by_name(client, key);
        self.record(LookupKind::Name, key, r)
    }

    fn lookup_ndc(&mut self, ndc: &str) -> Result<Stage, ResolveError> {
        if let Some(s) = self.cached(LookupKind::Ndc, ndc) {
            return Ok(s);
        }
        let (Some(fda), Some(compounds)) = (self.ndc, self.compounds) else {
            return Ok(Stage::Miss("not in cache".into()));
        };
        let r = fda_ndc_lookup(fda, ndc).and_then(|ingredient| {
            let name = normalize_name(&ingredient);
            if name.is_empty() {
                return Err(ClientError::NotFound);
            }
            Self::compound_by_name(compounds, &name)
        });
        self.record(LookupKind::Ndc, ndc, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixtures() -> FixtureSet {
        let mut f = FixtureSet::default();
        f.pubchem.cids_by_name.insert("heparin sodium".into(), vec![46507594]);
        f.pubchem.cids_by_name.insert("acetaminophen".into(), vec![1983]);
        f.pubchem.smiles_by_cid.insert(1983, "CC(=O)NC1=CC=C(C=C1)O".into());
        f.pubchem.smiles_by_cid.insert(46507594, "C(C1C(C(C(C(O1)O)O)O)O)O".into());
        f.fda.ingredient_by_ndc.insert("00182844789".into(), Some("ACETAMINOPHEN".into()));
        f
    }

    fn clock() -> u64 {
        7
    }

    #[test]
    fn generic_name_first() {
        let c = FixtureClient::new(fixtures());
        let mut r = Resolver::with_clients(ResolutionCache::in_memory(), Some(&c), Some(&c)).with_clock(clock);
        let out = r.resolve(&DrugQuery::new("Heparin", "Heparin Sodium", "63323026201.0")).unwrap();
        let d = out.resolved().unwrap();
        assert_eq!(d.path, ResolutionPath::GenericName);
        assert_eq!(d.cid, 46507594);
    }

    #[test]
    fn ndc_fallback() {
        let c = FixtureClient::new(fixtures());
        let mut r = Resolver::with_clients(ResolutionCache::in_memory(), Some(&c), Some(&c)).with_clock(clock);
        let out = r.resolve(&DrugQuery::new("", "", "182844789.0")).unwrap();
        assert_eq!(out.resolved().unwrap().path, ResolutionPath::Ndc);
        assert_eq!(out.resolved().unwrap().cid, 1983);
        assert!(r.cache().get(LookupKind::Ndc, "00182844789").unwrap().resolved);
    }

    #[test]
    fn unknown_writes_negatives() {
        let c = FixtureClient::new(fixtures());
        let mut r = Resolver::with_clients(ResolutionCache::in_memory(), Some(&c), Some(&c)).with_clock(clock);
        let out = r.resolve(&DrugQuery::new("Zzz", "Yyy", "12345")).unwrap();
        assert!(matches!(out, Resolution::Unresolved { .. }));
        assert!(!r.cache().get(LookupKind::Name, "yyy").unwrap().resolved);
        assert!(!r.cache().get(LookupKind::Name, "zzz").unwrap().resolved);
        assert!(!r.cache().get(LookupKind::Ndc, "00000012345").unwrap().resolved);
        let calls = c.calls();
        r.resolve(&DrugQuery::new("Zzz", "Yyy", "12345")).unwrap();
        assert_eq!(c.calls(), calls);
    }

    #[test]
    fn offline_miss_is_not_cached() {
        let mut r = Resolver::offline(ResolutionCache::in_memory());
        let out = r.resolve(&DrugQuery::new("Heparin", "", "")).unwrap();
        assert!(matches!(out, Resolution::Unresolved { .. }));
        assert!(r.cache().is_empty());
    }

    struct Down;
    impl CompoundClient for Down {
        fn cids_by_name(&self, _: &str) -> Result<Vec<u64>, ClientError> {
            Err(ClientError::Network("timeout".into()))
        }
        fn smiles_by_cid(&self, _: u64) -> Result<String, ClientError> {
            Err(ClientError::Network("timeout".into()))
        }
    }

    #[test]
    fn network_errors_propagate_uncached() {
        let mut r = Resolver::with_clients(ResolutionCache::in_memory(), Some(&Down), None);
        assert!(matches!(r.resolve(&DrugQuery::new("x", "", "")), Err(ResolveError::Network(_))));
        assert!(r.cache().is_empty());
    }

    #[test]
    fn invalid_ndc_is_a_reason() {
        let mut r = Resolver::offline(ResolutionCache::in_memory());
        match r.resolve(&DrugQuery::new("", "", "594091985307.0")).unwrap() {
            Resolution::Unresolved { reason, .. } => assert!(reason.contains("invalid NDC")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolve_all_dedupes() {
        let c = FixtureClient::new(fixtures());
        let mut r = Resolver::with_clients(ResolutionCache::in_memory(), Some(&c), Some(&c));
        let q = DrugQuery::new("Acetaminophen", "Acetaminophen", "");
        let out = r.resolve_all(&[q.clone(), q.clone(), q]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(c.calls(), 2);
    }
}

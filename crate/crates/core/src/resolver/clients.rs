//! Lookup services behind traits, a fixture-backed implementation with a
//! call counter, and a recorder for capturing fixtures from live clients.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ResolveError;
use crate::smiles;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("not found")]
    NotFound,
    #[error("network error: {0}")]
    Network(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("SMILES rejected by parser: {0}")]
    ParseRejected(String),
}

/// PubChem-like compound service.
pub trait CompoundClient: Send + Sync {
    /// Ordered CID list for a compound name.
    fn cids_by_name(&self, name: &str) -> Result<Vec<u64>, ClientError>;
    /// Canonical SMILES property of a compound.
    fn smiles_by_cid(&self, cid: u64) -> Result<String, ClientError>;
}

/// openFDA-like NDC directory.
pub trait NdcClient: Send + Sync {
    /// Generic / active-ingredient name for an 11-digit NDC.
    fn ingredient_by_ndc(&self, ndc: &str) -> Result<String, ClientError>;
}

pub fn pubchem_cid_by_name(client: &dyn CompoundClient, name: &str) -> Result<Vec<u64>, ClientError> {
    if name.trim().is_empty() {
        return Err(ClientError::Precondition("empty compound name".into()));
    }
    match client.cids_by_name(name)? {
        v if v.is_empty() => Err(ClientError::NotFound),
        v => Ok(v),
    }
}

/// Fetches the SMILES and checks that it parses.
pub fn pubchem_smiles_by_cid(client: &dyn CompoundClient, cid: u64) -> Result<String, ClientError> {
    if cid == 0 {
        return Err(ClientError::Precondition("cid must be positive".into()));
    }
    let s = client.smiles_by_cid(cid)?;
    smiles::parse(&s).map_err(|e| ClientError::ParseRejected(format!("{s}: {e}")))?;
    Ok(s)
}

pub fn fda_ndc_lookup(client: &dyn NdcClient, ndc: &str) -> Result<String, ClientError> {
    if ndc.len() != 11 || !ndc.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ClientError::Precondition(format!("not an 11-digit NDC: {ndc}")));
    }
    client.ingredient_by_ndc(ndc)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PubchemFixtures {
    #[serde(default)]
    pub cids_by_name: BTreeMap<String, Vec<u64>>,
    #[serde(default)]
    pub smiles_by_cid: BTreeMap<u64, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FdaFixtures {
    /// `None` models a directory record without an ingredient field.
    #[serde(default)]
    pub ingredient_by_ndc: BTreeMap<String, Option<String>>,
}

/// Recorded service responses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default)]
    pub pubchem: PubchemFixtures,
    #[serde(default)]
    pub fda: FdaFixtures,
}

impl FixtureSet {
    pub fn load(path: &Path) -> Result<FixtureSet, ResolveError> {
        let text = std::fs::read_to_string(path).map_err(|e| ResolveError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ResolveError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), ResolveError> {
        let json = serde_json::to_string_pretty(self).expect("fixtures serialize");
        std::fs::write(path, json + "\n").map_err(|e| ResolveError::io(path, e))
    }
}

/// Serves a [`FixtureSet`]; anything absent is `NotFound`. Counts every
/// call so tests can assert that a warmed cache made none.
#[derive(Debug, Default)]
pub struct FixtureClient {
    set: FixtureSet,
    calls: AtomicUsize,
}

impl FixtureClient {
    pub fn new(set: FixtureSet) -> Self {
        FixtureClient { set, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn tick(&self) {
        self.calls.fetch_add(1, Ordering::SeqCst);
    }
}

impl CompoundClient for FixtureClient {
    fn cids_by_name(&self, name: &str) -> Result<Vec<u64>, ClientError> {
        self.tick();
        self.set.pubchem.cids_by_name.get(name).cloned().ok_or(ClientError::NotFound)
    }

    fn smiles_by_cid(&self, cid: u64) -> Result<String, ClientError> {
        self.tick();
        self.set.pubchem.smiles_by_cid.get(&cid).cloned().ok_or(ClientError::NotFound)
    }
}

impl NdcClient for FixtureClient {
    fn ingredient_by_ndc(&self, ndc: &str) -> Result<String, ClientError> {
        self.tick();
        self.set.fda.ingredient_by_ndc.get(ndc).cloned().flatten().ok_or(ClientError::NotFound)
    }
}

/// Passes calls through to `inner` and records successful answers (and
/// ingredient-less NDC records) into a fixture set.
pub struct Recorder<'a> {
    pub compounds: Option<&'a dyn CompoundClient>,
    pub ndc: Option<&'a dyn NdcClient>,
    recorded: Mutex<FixtureSet>,
}

impl<'a> Recorder<'a> {
    pub fn new(compounds: Option<&'a dyn CompoundClient>, ndc: Option<&'a dyn NdcClient>) -> Self {
        Recorder { compounds, ndc, recorded: Mutex::default() }
    }

    pub fn into_fixtures(self) -> FixtureSet {
        self.recorded.into_inner().unwrap()
    }
}

impl CompoundClient for Recorder<'_> {
    fn cids_by_name(&self, name: &str) -> Result<Vec<u64>, ClientError> {
        let c = self.compounds.ok_or(ClientError::NotFound)?;
        let v = c.cids_by_name(name)?;
        self.recorded.lock().unwrap().pubchem.cids_by_name.insert(name.to_string(), v.clone());
        Ok(v)
    }

    fn smiles_by_cid(&self, cid: u64) -> Result<String, ClientError> {
        let c = self.compounds.ok_or(ClientError::NotFound)?;
        let s = c.smiles_by_cid(cid)?;
        self.recorded.lock().unwrap().pubchem.smiles_by_cid.insert(cid, s.clone());
        Ok(s)
    }
}

impl NdcClient for Recorder<'_> {
    fn ingredient_by_ndc(&self, ndc: &str) -> Result<String, ClientError> {
        let c = self.ndc.ok_or(ClientError::NotFound)?;
        let r = c.ingredient_by_ndc(ndc);
        let mut rec = self.recorded.lock().unwrap();
        match &r {
            Ok(name) => {
                rec.fda.ingredient_by_ndc.insert(ndc.to_string(), Some(name.clone()));
            }
            Err(ClientError::NotFound) => {
                rec.fda.ingredient_by_ndc.insert(ndc.to_string(), None);
            }
            Err(_) => {}
        }
        r
    }
}

//! HTTPS clients for PubChem PUG REST and the openFDA NDC directory.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;

use super::clients::{ClientError, CompoundClient, NdcClient};

const PUBCHEM: &str = "https://pubchem.ncbi.nlm.nih.gov/rest/pug";
const OPENFDA: &str = "https://api.fda.gov/drug/ndc.json";
const RETRIES: u32 = 3;

/// Spaces requests at least `1/rate` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        assert!(rate > 0.0);
        RateLimiter { interval: Duration::from_secs_f64(1.0 / rate), next: Mutex::new(Instant::now()) }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

struct Http {
    agent: ureq::Agent,
    limiter: RateLimiter,
    backoff: Duration,
}

impl Http {
    fn new(rate: f64) -> Http {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Http { agent, limiter: RateLimiter::per_second(rate), backoff: Duration::from_millis(500) }
    }

    /// GET returning parsed JSON; 404 maps to `NotFound`, 429/5xx and
    /// transport errors are retried with exponential backoff.
    fn get_json(&self, url: &str) -> Result<Value, ClientError> {
        let mut last = String::new();
        for attempt in 0..=RETRIES {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            self.limiter.acquire();
            match self.agent.get(url).call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    match status {
                        200 => {
                            let body = resp.body_mut().read_to_string().map_err(|e| ClientError::Network(e.to_string()))?;
                            return serde_json::from_str(&body).map_err(|e| ClientError::Network(format!("bad JSON: {e}")));
                        }
                        404 => return Err(ClientError::NotFound),
                        429 | 500..=599 => last = format!("HTTP {status}"),
                        _ => return Err(ClientError::Network(format!("HTTP {status} for {url}"))),
                    }
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(ClientError::Network(format!("{last} after {RETRIES} retries")))
    }
}

fn encode_path(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-_.~".contains(&b) {
            out.push(b as char);
        } else {
            out += &format!("%{b:02X}");
        }
    }
    out
}

pub struct PubchemClient {
    http: Http,
}

impl PubchemClient {
    pub fn new(rate: f64) -> Self {
        PubchemClient { http: Http::new(rate) }
    }
}

impl CompoundClient for PubchemClient {
    fn cids_by_name(&self, name: &str) -> Result<Vec<u64>, ClientError> {
        let v = self.http.get_json(&format!("{PUBCHEM}/compound/name/{}/cids/JSON", encode_path(name)))?;
        let cids: Vec<u64> = v["IdentifierList"]["CID"]
            .as_array()
            .map(|a| a.iter().filter_map(Value::as_u64).filter(|&c| c > 0).collect())
            .unwrap_or_default();
        if cids.is_empty() {
            Err(ClientError::NotFound)
        } else {
            Ok(cids)
        }
    }

    fn smiles_by_cid(&self, cid: u64) -> Result<String, ClientError> {
        let v = self.http.get_json(&format!("{PUBCHEM}/compound/cid/{cid}/property/CanonicalSMILES/JSON"))?;
        let props = &v["PropertyTable"]["Properties"][0];
        // newer responses name the non-isomeric form ConnectivitySMILES
        ["CanonicalSMILES", "ConnectivitySMILES"]
            .iter()
            .find_map(|k| props[*k].as_str())
            .map(str::to_string)
            .ok_or(ClientError::NotFound)
    }
}

pub struct FdaClient {
    http: Http,
}

impl FdaClient {
    pub fn new(rate: f64) -> Self {
        FdaClient { http: Http::new(rate) }
    }
}

/// Hyphenated 10-digit package codes that pad to this 11-digit NDC
/// (4-4-2, 5-3-2 and 5-4-1 layouts).
pub fn package_ndc_candidates(ndc11: &str) -> Vec<String> {
    let (l, p, k) = (&ndc11[..5], &ndc11[5..9], &ndc11[9..]);
    let mut out = Vec::new();
    if let Some(l4) = l.strip_prefix('0') {
        out.push(format!("{l4}-{p}-{k}"));
    }
    if let Some(p3) = p.strip_prefix('0') {
        out.push(format!("{l}-{p3}-{k}"));
    }
    if let Some(k1) = k.strip_prefix('0') {
        out.push(format!("{l}-{p}-{k1}"));
    }
    out
}

impl NdcClient for FdaClient {
    fn ingredient_by_ndc(&self, ndc: &str) -> Result<String, ClientError> {
        for cand in package_ndc_candidates(ndc) {
            let url = format!("{OPENFDA}?search=packaging.package_ndc:%22{cand}%22&limit=1");
            let v = match self.http.get_json(&url) {
                Err(ClientError::NotFound) => continue,
                other => other?,
            };
            let rec = &v["results"][0];
            let name = rec["generic_name"]
                .as_str()
                .or_else(|| rec["active_ingredients"][0]["name"].as_str())
                .filter(|s| !s.trim().is_empty());
            return name.map(str::to_string).ok_or(ClientError::NotFound);
        }
        Err(ClientError::NotFound)
    }
}

//! Synthetic cohorts with a planted signal in both modalities.
//!
//! Every patient gets a linear trend in feature 0 (slope `s ~ N(0,1)`) and
//! 1..=`max_drugs` distinct drugs from the vocabulary. One ECFP bit, the one
//! whose vocabulary frequency is closest to 10%, marks "risky" drugs; `d` is
//! 1 when any resolved drug of the patient carries it. For every task
//!
//! ```text
//! logit = b_t + S * (sqrt(share) * z(d) + sqrt(1 - share) * s)
//! ```
//!
//! with `z` the cohort z-score and `b_t` bisected so that the mean label
//! probability equals the configured base rate.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::io::{write_labels, write_prescriptions, write_timeseries, Prescription, ResolvedRow};
use super::{Cohort, CohortError, Labels, TimeSeries, HOURS};
use crate::embedding::EmbeddingTable;
use crate::fingerprint::{self, BitFingerprint, DEFAULT_NBITS, DEFAULT_RADIUS};
use crate::resolver::{CacheEntry, DrugQuery, LookupKind, Resolution, ResolutionCache, Resolver};
use crate::seed::{self, tag};
use crate::smiles;

/// Committed 100-molecule corpus, `SMILES<TAB>name` per line.
pub const CORPUS: &str = include_str!("../../data/corpus100.smi");

/// First CID handed to synthetic vocabulary entries.
pub const SYNTH_CID_BASE: u64 = 900_000;

const TIMESERIES_FILE: &str = "timeseries.csv";
const PRESCRIPTIONS_FILE: &str = "prescriptions.csv";
const LABELS_FILE: &str = "labels.csv";
const CACHE_FILE: &str = "resolver_cache.jsonl";

pub fn corpus_smiles() -> Vec<String> {
    CORPUS.lines().filter_map(|l| l.split('\t').next()).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub features: usize,
    pub vocab: Vec<String>,
    /// S in the label logit; 0 makes labels independent of all inputs.
    pub signal_strength: f64,
    /// Fraction of logit variance carried by the drug term.
    pub drug_share: f64,
    /// Target positive rate per task, in `Task::ALL` order.
    pub base_rates: [f64; 4],
    pub max_drugs: usize,
    /// Patients whose prescriptions are all unresolvable.
    pub no_drug_rate: f64,
    /// Extra unresolvable prescription rows per resolvable one.
    pub unresolvable_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 5000,
            features: 10,
            vocab: corpus_smiles(),
            signal_strength: 2.0,
            drug_share: 0.5,
            base_rates: [0.12, 0.08, 0.45, 0.18],
            max_drugs: 12,
            no_drug_rate: 0.02,
            unresolvable_rate: 0.03,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<Vec<BitFingerprint>, CohortError> {
        let bad = |m: String| Err(CohortError::Config(m));
        if self.n_patients < 10 {
            return bad(format!("n_patients must be at least 10, got {}", self.n_patients));
        }
        if self.features == 0 {
            return bad("features must be positive".into());
        }
        if self.vocab.is_empty() {
            return bad("vocabulary is empty".into());
        }
        if !(self.signal_strength.is_finite() && self.signal_strength >= 0.0) {
            return bad(format!("signal_strength must be finite and >= 0, got {}", self.signal_strength));
        }
        if !(0.0..=1.0).contains(&self.drug_share) {
            return bad(format!("drug_share must lie in [0, 1], got {}", self.drug_share));
        }
        if self.base_rates.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return bad(format!("base rates must lie in (0, 1), got {:?}", self.base_rates));
        }
        if self.max_drugs == 0 {
            return bad("max_drugs must be positive".into());
        }
        for (name, r) in [("no_drug_rate", self.no_drug_rate), ("unresolvable_rate", self.unresolvable_rate)] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1), got {r}"));
            }
        }
        self.vocab
            .iter()
            .map(|s| {
                smiles::parse(s)
                    .map(|m| fingerprint::ecfp(&m, DEFAULT_RADIUS, DEFAULT_NBITS))
                    .map_err(|e| CohortError::Config(format!("vocabulary SMILES {s:?}: {e}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub config: SynthConfig,
    pub feature_names: Vec<String>,
    pub series: BTreeMap<String, TimeSeries>,
    pub labels: BTreeMap<String, Labels>,
    pub prescriptions: Vec<Prescription>,
    /// Warmed resolver cache covering the whole vocabulary.
    pub cache: Vec<CacheEntry>,
    pub risk_bit: usize,
    /// Per-patient drug indicator `d` and slope `s`.
    pub latent: BTreeMap<String, (bool, f64)>,
    pub intercepts: [f64; 4],
}

pub fn vocab_name(i: usize) -> String {
    format!("Synthdrug {i:03}")
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Bit set in the vocabulary fraction closest to 0.1, lowest index on ties.
fn pick_risk_bit(fps: &[BitFingerprint]) -> usize {
    let mut counts = vec![0usize; DEFAULT_NBITS];
    for fp in fps {
        for b in fp.ones() {
            counts[b] += 1;
        }
    }
    let n = fps.len() as f64;
    let mut best = (f64::INFINITY, 0);
    for (b, &c) in counts.iter().enumerate() {
        let gap = (c as f64 / n - 0.1).abs();
        if c > 0 && gap < best.0 {
            best = (gap, b);
        }
    }
    best.1
}

/// Intercept whose mean sigmoid over `logits` equals `rate`.
fn calibrate(logits: &[f64], rate: f64) -> f64 {
    let mean = |b: f64| logits.iter().map(|&l| sigmoid(b + l)).sum::<f64>() / logits.len() as f64;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn synth_generate(config: &SynthConfig) -> Result<SynthCohort, CohortError> {
    let fps = config.validate()?;
    let risk_bit = pick_risk_bit(&fps);
    let risky: Vec<bool> = fps.iter().map(|fp| fp.get(risk_bit)).collect();
    let width = (config.n_patients - 1).to_string().len().max(5);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let feature_names: Vec<String> = (0..config.features).map(|f| format!("f_{f}")).collect();

    let mut series = BTreeMap::new();
    let mut prescriptions = Vec::new();
    let mut latent = BTreeMap::new();
    let mut ids = Vec::with_capacity(config.n_patients);
    let mut unlisted = 0usize;
    for p in 0..config.n_patients {
        let id = format!("p{p:0width$}");
        let mut rng = seed::rng(seed::derive_path(config.seed, &[tag::SYNTH, p as u64]));

        // feature 0 carries the trend; the others are AR(1) noise around
        // feature-specific offsets and scales
        let slope: f64 = unit.sample(&mut rng);
        let mut values = vec![0.0; HOURS * config.features];
        for f in 0..config.features {
            let (offset, scale) = (0.5 * f as f64, 1.0 + 0.25 * f as f64);
            let mut ar = 0.0;
            for h in 0..HOURS {
                let noise: f64 = unit.sample(&mut rng);
                let v = if f == 0 {
                    slope * (h as f64 - 11.5) / 11.5 + 0.5 * noise
                } else {
                    ar = 0.8 * ar + 0.6 * noise;
                    ar
                };
                values[h * config.features + f] = offset + scale * v;
            }
        }
        series.insert(id.clone(), TimeSeries { features: config.features, values });

        let mut order = 0usize;
        let mut push = |rows: &mut Vec<Prescription>, generic: String, drug: String| {
            rows.push(Prescription { patient_id: id.clone(), order_index: order, drug_name: drug, generic_name: generic, ndc: String::new() });
            order += 1;
        };
        let mut any_risky = false;
        if rng.gen::<f64>() < config.no_drug_rate {
            for _ in 0..rng.gen_range(1..=2) {
                unlisted += 1;
                push(&mut prescriptions, format!("Unlisted Compound {unlisted}"), String::new());
            }
        } else {
            let m = rng.gen_range(1..=config.max_drugs.min(config.vocab.len()));
            let mut picks: Vec<usize> = (0..config.vocab.len()).collect();
            picks.shuffle(&mut rng);
            for &v in &picks[..m] {
                any_risky |= risky[v];
                push(&mut prescriptions, vocab_name(v), format!("SD-{v:03}"));
                if rng.gen::<f64>() < config.unresolvable_rate {
                    unlisted += 1;
                    push(&mut prescriptions, format!("Unlisted Compound {unlisted}"), String::new());
                }
            }
        }
        latent.insert(id.clone(), (any_risky, slope));
        ids.push(id);
    }

    let d: Vec<f64> = ids.iter().map(|id| latent[id].0 as u8 as f64).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (a_d, a_s) = (config.drug_share.sqrt(), (1.0 - config.drug_share).sqrt());
    let logits: Vec<f64> = ids
        .iter()
        .zip(&d)
        .map(|(id, &x)| {
            let dz = if std > 0.0 { (x - mean) / std } else { 0.0 };
            config.signal_strength * (a_d * dz + a_s * latent[id].1)
        })
        .collect();
    let mut intercepts = [0.0; 4];
    for (t, b) in intercepts.iter_mut().enumerate() {
        *b = calibrate(&logits, config.base_rates[t]);
    }
    let mut rng = seed::rng(seed::derive_path(config.seed, &[tag::SYNTH, u64::MAX]));
    let mut labels = BTreeMap::new();
    for (id, &l) in ids.iter().zip(&logits) {
        let mut lab = [false; 4];
        for (t, y) in lab.iter_mut().enumerate() {
            *y = rng.gen::<f64>() < sigmoid(intercepts[t] + l);
        }
        labels.insert(id.clone(), Labels(lab));
    }

    let cache = config
        .vocab
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let key = crate::resolver::normalize_name(&vocab_name(i));
            CacheEntry::positive(LookupKind::Name, &key, SYNTH_CID_BASE + i as u64, s, 0)
        })
        .collect();

    Ok(SynthCohort {
        config: config.clone(),
        feature_names,
        series,
        labels,
        prescriptions,
        cache,
        risk_bit,
        latent,
        intercepts,
    })
}

impl SynthCohort {
    /// Writes the time series, prescriptions, labels and warmed cache.
    pub fn write(&self, dir: &Path) -> Result<(), CohortError> {
        std::fs::create_dir_all(dir).map_err(|source| CohortError::Io { path: dir.to_path_buf(), source })?;
        write_timeseries(&dir.join(TIMESERIES_FILE), &self.feature_names, &self.series)?;
        write_prescriptions(&dir.join(PRESCRIPTIONS_FILE), &self.prescriptions)?;
        write_labels(&dir.join(LABELS_FILE), &self.labels)?;
        let cache_path = dir.join(CACHE_FILE);
        let text: String = self.cache.iter().map(|e| e.to_line() + "\n").collect();
        std::fs::write(&cache_path, text).map_err(|source| CohortError::Io { path: cache_path, source })
    }

    /// Resolves prescriptions against the warmed cache.
    pub fn resolved_rows(&self) -> Vec<ResolvedRow> {
        let mut cache = ResolutionCache::in_memory();
        for e in &self.cache {
            cache.append(e.clone()).expect("in-memory append");
        }
        let mut resolver = Resolver::offline(cache);
        let mut out = Vec::new();
        for p in &self.prescriptions {
            let q = DrugQuery::new(&p.drug_name, &p.generic_name, &p.ndc);
            if let Ok(Resolution::Resolved(r)) = resolver.resolve(&q) {
                out.push(ResolvedRow {
                    patient_id: p.patient_id.clone(),
                    order_index: p.order_index,
                    smiles: r.smiles,
                    cid: Some(r.cid),
                    resolution_path: r.path.to_string(),
                });
            }
        }
        out
    }

    pub fn to_cohort(&self) -> Result<Cohort, CohortError> {
        Cohort::assemble(self.feature_names.clone(), self.series.clone(), &self.labels, &self.resolved_rows())
    }
}

/// Stand-in for a pretrained SMILES embedding table: a fixed Gaussian
/// random projection of each molecule's ECFP bits to `width` dimensions.
pub fn standin_embedding_table(vocab: &[String], width: usize, seed: u64) -> Result<EmbeddingTable, CohortError> {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut proj = vec![0.0; DEFAULT_NBITS * width];
    let mut rng = seed::rng(seed::derive(seed, tag::SYNTH));
    for v in proj.iter_mut() {
        *v = unit.sample(&mut rng);
    }
    let mut table = EmbeddingTable::new(width);
    for s in vocab {
        let mol = smiles::parse(s).map_err(|e| CohortError::Config(format!("vocabulary SMILES {s:?}: {e}")))?;
        let fp = fingerprint::ecfp(&mol, DEFAULT_RADIUS, DEFAULT_NBITS);
        let scale = 1.0 / (fp.popcount().max(1) as f64).sqrt();
        let mut row = vec![0.0; width];
        for b in fp.ones() {
            for (r, p) in row.iter_mut().zip(&proj[b * width..(b + 1) * width]) {
                *r += p * scale;
            }
        }
        if table.get(s).is_none() {
            table.insert(s.clone(), row).map_err(|e| CohortError::Config(e.to_string()))?;
        }
    }
    Ok(table)
}

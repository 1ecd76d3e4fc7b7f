//! CSV formats:
//!
//! - time series: `patient_id,hour,<feature>...`, hours 0..23, one row each
//! - labels: `patient_id,mort_hosp,mort_icu,los_3,los_7`, values 0/1
//! - prescriptions: `patient_id,order_index,drug_name,generic_name,ndc`
//! - resolved drugs: `patient_id,order_index,smiles,cid,resolution_path`

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CohortError, Labels, Task, TimeSeries, HOURS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prescription {
    pub patient_id: String,
    pub order_index: usize,
    pub drug_name: String,
    pub generic_name: String,
    pub ndc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedRow {
    pub patient_id: String,
    pub order_index: usize,
    pub smiles: String,
    pub cid: Option<u64>,
    pub resolution_path: String,
}

const PRESCRIPTION_HEADER: [&str; 5] = ["patient_id", "order_index", "drug_name", "generic_name", "ndc"];
const RESOLVED_HEADER: [&str; 5] = ["patient_id", "order_index", "smiles", "cid", "resolution_path"];

fn open(path: &Path) -> Result<File, CohortError> {
    File::open(path).map_err(|source| CohortError::Io { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<File, CohortError> {
    File::create(path).map_err(|source| CohortError::Io { path: path.to_path_buf(), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CohortError + '_ {
    move |source| CohortError::Csv { path: path.to_path_buf(), source }
}

fn header_err(path: &Path, reason: impl Into<String>) -> CohortError {
    CohortError::Header { path: path.to_path_buf(), reason: reason.into() }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(r)
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<(), CohortError> {
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(header_err(path, format!("expected {}, found {}", want.join(","), got.join(","))));
    }
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize, expected: usize) -> Result<&str, CohortError> {
    rec.get(i).ok_or(CohortError::RaggedRow { line: line_of(rec), expected, found: rec.len() })
}

pub fn ingest_timeseries(path: &Path) -> Result<(Vec<String>, BTreeMap<String, TimeSeries>), CohortError> {
    ingest_timeseries_from(open(path)?, path)
}

pub(crate) fn ingest_timeseries_from<R: Read>(
    r: R,
    path: &Path,
) -> Result<(Vec<String>, BTreeMap<String, TimeSeries>), CohortError> {
    let mut rdr = reader(r);
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.get(0) != Some("patient_id") || header.get(1) != Some("hour") {
        return Err(header_err(path, "must start with patient_id,hour"));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    if names.is_empty() {
        return Err(header_err(path, "no feature columns"));
    }
    let f = names.len();
    let width = f + 2;

    let mut rows: BTreeMap<String, Vec<Option<Vec<f64>>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != width {
            return Err(CohortError::RaggedRow { line: line_of(&rec), expected: width, found: rec.len() });
        }
        let id = rec[0].to_string();
        let bad = |column: &str, value: &str| CohortError::BadValue {
            line: line_of(&rec),
            column: column.to_string(),
            value: value.to_string(),
        };
        let hour: usize = rec[1].parse().map_err(|_| bad("hour", &rec[1]))?;
        if hour >= HOURS {
            return Err(bad("hour", &rec[1]));
        }
        let mut values = Vec::with_capacity(f);
        for (j, name) in names.iter().enumerate() {
            let raw = &rec[j + 2];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => return Err(bad(name, raw)),
            }
        }
        let slots = rows.entry(id.clone()).or_insert_with(|| vec![None; HOURS]);
        if slots[hour].is_some() {
            return Err(CohortError::DuplicateHour { id, hour });
        }
        slots[hour] = Some(values);
    }

    let mut out = BTreeMap::new();
    for (id, slots) in rows {
        let mut values = Vec::with_capacity(HOURS * f);
        for (hour, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(v) => values.extend(v),
                None => return Err(CohortError::MissingHour { id, hour }),
            }
        }
        out.insert(id, TimeSeries { features: f, values });
    }
    Ok((names, out))
}

pub fn write_timeseries(path: &Path, names: &[String], series: &BTreeMap<String, TimeSeries>) -> Result<(), CohortError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    let mut header = vec!["patient_id".to_string(), "hour".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(&err)?;
    for (id, ts) in series {
        for h in 0..HOURS {
            let mut rec = vec![id.clone(), h.to_string()];
            rec.extend(ts.hour(h).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(&err)?;
        }
    }
    w.flush().map_err(|source| CohortError::Io { path: path.to_path_buf(), source })
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, Labels>, CohortError> {
    read_labels_from(open(path)?, path)
}

pub(crate) fn read_labels_from<R: Read>(r: R, path: &Path) -> Result<BTreeMap<String, Labels>, CohortError> {
    let mut rdr = reader(r);
    let mut want = vec!["patient_id"];
    want.extend(Task::ALL.iter().map(|t| t.name()));
    check_header(path, rdr.headers().map_err(csv_err(path))?, &want)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let id = field(&rec, 0, 5)?.to_string();
        let mut labels = [false; 4];
        for t in Task::ALL {
            let raw = field(&rec, t.index() + 1, 5)?;
            labels[t.index()] = match raw {
                "0" => false,
                "1" => true,
                _ => {
                    return Err(CohortError::BadValue {
                        line: line_of(&rec),
                        column: t.name().to_string(),
                        value: raw.to_string(),
                    })
                }
            };
        }
        if rec.len() != 5 {
            return Err(CohortError::RaggedRow { line: line_of(&rec), expected: 5, found: rec.len() });
        }
        if out.insert(id.clone(), Labels(labels)).is_some() {
            return Err(CohortError::BadValue { line: line_of(&rec), column: "patient_id".into(), value: id });
        }
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &BTreeMap<String, Labels>) -> Result<(), CohortError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    let mut header = vec!["patient_id"];
    header.extend(Task::ALL.iter().map(|t| t.name()));
    w.write_record(&header).map_err(&err)?;
    for (id, l) in labels {
        let mut rec = vec![id.clone()];
        rec.extend(l.0.iter().map(|&b| (b as u8).to_string()));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|source| CohortError::Io { path: path.to_path_buf(), source })
}

fn read_typed<T: for<'de> Deserialize<'de>, R: Read>(r: R, path: &Path, header: &[&str]) -> Result<Vec<T>, CohortError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    check_header(path, rdr.headers().map_err(csv_err(path))?, header)?;
    rdr.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err(path))
}

fn write_typed<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), CohortError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    let err = csv_err(path);
    w.write_record(header).map_err(&err)?;
    for r in rows {
        w.serialize(r).map_err(&err)?;
    }
    w.flush().map_err(|source| CohortError::Io { path: path.to_path_buf(), source })
}

/// Reads the prescriptions table. An empty file (not even a header) is an
/// empty table.
pub fn read_prescriptions(path: &Path) -> Result<Vec<Prescription>, CohortError> {
    let bytes = std::fs::read(path).map_err(|source| CohortError::Io { path: path.to_path_buf(), source })?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(Vec::new());
    }
    read_typed(&bytes[..], path, &PRESCRIPTION_HEADER)
}

pub fn write_prescriptions(path: &Path, rows: &[Prescription]) -> Result<(), CohortError> {
    write_typed(path, rows, &PRESCRIPTION_HEADER)
}

pub fn read_resolved(path: &Path) -> Result<Vec<ResolvedRow>, CohortError> {
    read_typed(open(path)?, path, &RESOLVED_HEADER)
}

pub fn write_resolved(path: &Path, rows: &[ResolvedRow]) -> Result<(), CohortError> {
    write_typed(path, rows, &RESOLVED_HEADER)
}

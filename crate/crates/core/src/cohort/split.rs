use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Cohort, CohortError};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.7, val: 0.1, test: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

fn floor_share(g: usize, r: f64) -> usize {
    // the epsilon keeps exact products such as 10·0.1 from flooring down
    (g as f64 * r + 1e-9).floor() as usize
}

/// Groups patients by `key`, shuffles each group with a seed-derived
/// stream and hands out floor(g·val) to validation and floor(g·test) to
/// test; the remainder goes to training. Id lists come back sorted.
pub fn stratified_split_keys(ids: &[String], keys: &[u8], ratios: SplitRatios, seed: u64) -> CohortSplit {
    assert_eq!(ids.len(), keys.len());
    let mut groups: BTreeMap<u8, Vec<&String>> = BTreeMap::new();
    for (id, &k) in ids.iter().zip(keys) {
        groups.entry(k).or_default().push(id);
    }
    let mut split = CohortSplit { seed, train: vec![], val: vec![], test: vec![] };
    for (key, mut members) in groups {
        members.sort();
        members.shuffle(&mut seed::rng(seed::derive_path(seed, &[seed::tag::SPLIT, key as u64])));
        let g = members.len();
        let n_val = floor_share(g, ratios.val);
        let n_test = floor_share(g, ratios.test);
        let (val, rest) = members.split_at(n_val);
        let (test, train) = rest.split_at(n_test);
        split.val.extend(val.iter().map(|s| s.to_string()));
        split.test.extend(test.iter().map(|s| s.to_string()));
        split.train.extend(train.iter().map(|s| s.to_string()));
    }
    split.train.sort();
    split.val.sort();
    split.test.sort();
    split
}

/// Stratified on the 4-bit composite label so one split serves all tasks.
pub fn stratified_split(cohort: &Cohort, ratios: SplitRatios, seed: u64) -> CohortSplit {
    let ids: Vec<String> = cohort.records.iter().map(|r| r.id.clone()).collect();
    let keys: Vec<u8> = cohort.records.iter().map(|r| r.labels.composite()).collect();
    stratified_split_keys(&ids, &keys, ratios, seed)
}

impl CohortSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Record indices of (train, val, test) in `cohort`. Fails on ids the
    /// cohort does not contain.
    pub fn indices(&self, cohort: &Cohort) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), CohortError> {
        let index = cohort.index_of();
        let map = |ids: &[String]| {
            ids.iter()
                .map(|id| index.get(id.as_str()).copied().ok_or_else(|| CohortError::Config(format!("split names unknown patient {id}"))))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok((map(&self.train)?, map(&self.val)?, map(&self.test)?))
    }

    pub fn write(&self, path: &Path) -> Result<(), CohortError> {
        let json = serde_json::to_string_pretty(self).expect("split serializes");
        std::fs::write(path, json + "\n").map_err(|source| CohortError::Io { path: path.to_path_buf(), source })
    }

    pub fn read(path: &Path) -> Result<CohortSplit, CohortError> {
        let text = std::fs::read_to_string(path).map_err(|source| CohortError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| CohortError::Config(format!("{}: {e}", path.display())))
    }
}

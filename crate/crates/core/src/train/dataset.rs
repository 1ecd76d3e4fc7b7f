use crate::cohort::{Cohort, DrugFeatures, Labels, Standardizer, Task};
use crate::embedding::EmbeddingProvider;
use crate::nn::{DrugRows, Sample};

use super::TrainError;

/// Model-ready view of a cohort: standardized series and, for models with
/// a drug branch, the sparse drug matrices.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    pub series: Vec<Vec<f64>>,
    pub labels: Vec<Labels>,
    pub drugs: Option<DrugFeatures>,
    pub standardizer: Standardizer,
    pub n_drugs: usize,
}

impl Dataset {
    /// `provider = None` skips drug featurization (baseline models).
    pub fn build(
        cohort: &Cohort,
        standardizer: Standardizer,
        provider: Option<&EmbeddingProvider>,
        n_drugs: usize,
    ) -> Result<Dataset, TrainError> {
        if standardizer.mean.len() != cohort.features() {
            return Err(TrainError::Data(format!(
                "standardizer has {} features, cohort has {}",
                standardizer.mean.len(),
                cohort.features()
            )));
        }
        let series = cohort.records.iter().map(|r| standardizer.apply(&r.series).values).collect();
        let drugs = provider.map(|p| DrugFeatures::build(&cohort.records, p, n_drugs)).transpose()?;
        Ok(Dataset {
            feature_names: cohort.feature_names.clone(),
            ids: cohort.records.iter().map(|r| r.id.clone()).collect(),
            series,
            labels: cohort.records.iter().map(|r| r.labels).collect(),
            drugs,
            standardizer,
            n_drugs,
        })
    }

    /// Standardization statistics from `train` only, or identity.
    pub fn fit_standardizer(cohort: &Cohort, train: &[usize], enabled: bool) -> Standardizer {
        if enabled && !train.is_empty() {
            Standardizer::fit(train.iter().map(|&i| &cohort.records[i].series))
        } else {
            Standardizer::identity(cohort.features())
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    /// Drug representation width, 0 without drug features.
    pub fn k(&self) -> usize {
        self.drugs.as_ref().map_or(0, |d| d.k)
    }

    pub fn label(&self, i: usize, task: Task) -> bool {
        self.labels[i].get(task)
    }

    pub fn labels_of(&self, idx: &[usize], task: Task) -> Vec<bool> {
        idx.iter().map(|&i| self.label(i, task)).collect()
    }

    pub fn sample(&self, i: usize, task: Task) -> Sample<'_> {
        let drugs = match &self.drugs {
            Some(d) => d.rows(i),
            None => DrugRows { table: &[], idx: &[], len: self.n_drugs },
        };
        Sample { series: &self.series[i], drugs, label: self.label(i, task) as u8 as f64 }
    }

    pub fn samples(&self, idx: &[usize], task: Task) -> Vec<Sample<'_>> {
        idx.iter().map(|&i| self.sample(i, task)).collect()
    }
}

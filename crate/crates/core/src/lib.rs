//! Clinical drug representations fused with ICU time series.
//!
//! Prescriptions are resolved to PubChem compounds ([`resolver`]), parsed
//! ([`smiles`]) and turned into fixed-width drug vectors ([`fingerprint`],
//! [`embedding`]). Patient cohorts ([`cohort`]) pair 24-hour time series
//! with a padded per-patient drug matrix. [`nn`] holds the GRU / 1D-CNN
//! kernels with exact backward passes, [`train`] the baseline and multimodal
//! models with their training protocol, and [`metrics`] the evaluation.

pub mod cohort;
pub mod embedding;
pub mod exec;
pub mod fingerprint;
pub mod metrics;
pub mod nn;
pub mod resolver;
pub mod seed;
pub mod smiles;
pub mod train;

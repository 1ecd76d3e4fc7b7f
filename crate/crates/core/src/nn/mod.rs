//! Double-precision GRU / 1D-CNN kernels with exact backward passes.

pub mod adam;
pub mod container;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod network;
pub mod ops;
pub mod pool;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use container::{load_container, save_container, ContainerError};
pub use conv::{Conv1dLayer, DrugRows, SparseVec};
pub use dense::DenseLayer;
pub use gradcheck::{grad_check, grad_check_against, GradCheckReport, TensorCheck};
pub use gru::{GruCell, GruTrace};
pub use loss::{weighted_bce, weighted_bce_mean, ClassWeights, PROB_EPS};
pub use network::{Architecture, BatchResult, GradWorkspace, L2Scope, Mode, Network, Sample, Trace, GRAD_CHUNK};
pub use tensor::{glorot_uniform, ParamId, Params, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("input of length {len} is shorter than kernel {kernel}")]
    InputTooShort { len: usize, kernel: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid architecture: {0}")]
    Config(String),
}

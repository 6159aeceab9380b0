//! Multi-modal information disentanglement.
//!
//! Per-modality feature vectors are split into modality-invariant (`S_m`),
//! modality-specific (`P_m`) and explicitly modeled noise (`N_m`) parts by a
//! shared encoder and per-modality private encoders. Seven loss terms shape
//! the split; the informative parts are fused for prediction.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! it to `f64`, which is what the training loop, the file formats and the
//! verification suite use.

pub mod cli;
pub mod data;
pub mod gradcheck;
pub mod linalg;
pub mod losses;
pub mod nn;
pub mod scalar;
pub mod tensor;
pub mod training;
pub mod verify;

pub use scalar::Scalar;

pub type Array = tensor::Array<f64>;
pub type Graph = tensor::Graph<f64>;
pub type Tensor<'g> = tensor::Tensor<'g, f64>;
pub type ModelParams = nn::ModelParams<f64>;

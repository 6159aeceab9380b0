//! Parametric sub-networks: input projections, shared and private encoders,
//! statistics networks, decoders, fusion layer and prediction heads.

mod checkpoint;
mod model;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use model::{
    sample_noise, BoundModel, CyclicDirection, DisentangledSet, ForwardOptions, ModelParams, Prediction, StatsNet,
};
pub use params::{Linear, Mlp, ParamStore};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "V")]
    Visual,
    #[serde(rename = "A")]
    Acoustic,
    #[serde(rename = "T")]
    Text,
}

impl Modality {
    /// Fixed order V, A, T used for every concatenation.
    pub const ALL: [Modality; 3] = [Modality::Visual, Modality::Acoustic, Modality::Text];

    pub fn index(self) -> usize {
        match self {
            Modality::Visual => 0,
            Modality::Acoustic => 1,
            Modality::Text => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Modality::Visual => "V",
            Modality::Acoustic => "A",
            Modality::Text => "T",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Modality {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "V" | "v" | "visual" => Ok(Modality::Visual),
            "A" | "a" | "acoustic" | "audio" => Ok(Modality::Acoustic),
            "T" | "t" | "text" => Ok(Modality::Text),
            other => Err(ModelError::UnknownModality(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification { classes: usize },
}

impl TaskKind {
    pub fn output_width(self) -> usize {
        match self {
            TaskKind::Regression => 1,
            TaskKind::Classification { classes } => classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_k: usize,
    /// Raw feature widths in V, A, T order.
    pub input_dims: [usize; 3],
    pub task: TaskKind,
    pub stats_hidden: usize,
    pub stats_layers: usize,
    pub head_hidden: usize,
    pub head_layers: usize,
    pub grl_scale: f64,
    /// One reconstruction decoder per modality instead of a shared one.
    pub per_modality_recon: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub const DEFAULT_D_K: usize = 64;

    pub fn new(input_dims: [usize; 3], task: TaskKind) -> Self {
        Self::with_d_k(Self::DEFAULT_D_K, input_dims, task)
    }

    /// Hidden widths follow `d_k`.
    pub fn with_d_k(d_k: usize, input_dims: [usize; 3], task: TaskKind) -> Self {
        Self {
            d_k,
            input_dims,
            task,
            stats_hidden: d_k,
            stats_layers: 2,
            head_hidden: d_k,
            head_layers: 2,
            grl_scale: 1.0,
            per_modality_recon: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.d_k < 2 {
            return bad(format!("d_k must be at least 2, got {}", self.d_k));
        }
        if let Some(m) = Modality::ALL.iter().find(|m| self.input_dims[m.index()] == 0) {
            return bad(format!("input width of modality {m} must be positive"));
        }
        if self.stats_hidden == 0 || self.head_hidden == 0 {
            return bad("hidden widths must be positive".into());
        }
        if let TaskKind::Classification { classes } = self.task {
            if classes < 2 {
                return bad(format!("classification needs at least 2 classes, got {classes}"));
            }
        }
        if !(self.grl_scale > 0.0 && self.grl_scale.is_finite()) {
            return bad(format!("GRL scale must be positive, got {}", self.grl_scale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("layer {layer}: expected input width {expected}, got {got}")]
    Width {
        layer: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown modality tag {0:?}")]
    UnknownModality(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{op}: row counts differ ({lhs} vs {rhs})")]
    Rows { op: &'static str, lhs: usize, rhs: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

//! Optimizer, training loop, evaluation, probes and the ablation suite.

mod ablation;
mod metrics;
mod optim;
mod probe;
mod train;

pub use self::ablation::{format_ablation_table, run_ablation_suite, AblationGroup, AblationResult, AblationRow};
pub use self::metrics::{
    accuracy, classification_report, mean_absolute_error, pearson, regression_report, weighted_f1, MetricsReport,
};
pub use self::optim::{Adam, AdamConfig};
pub use self::probe::{embed_rows, probe_disentanglement, ComponentProbe, ProbeReport, PROBE_RIDGE};
pub use self::train::{evaluate, predict_split, train, train_observed, EpochRecord, StepRecord, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::losses::{LossFlags, LossTerm, LossWeights};
use crate::nn::{ForwardOptions, Modality, ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch}, step {step}: {cause}")]
    Divergence {
        epoch: usize,
        step: u64,
        cause: String,
        /// Parameters after the last finite step.
        last_good: Box<ModelParams<f64>>,
    },
    #[error("probe needs ground-truth factors; this dataset has none")]
    UnsupportedProbe,
    #[error("probe regression for {0} is singular")]
    SingularProbe(String),
}

/// Switches that remove parts of the model or objective. Each one is
/// independent of the others.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationFlags {
    /// Loss terms that are not computed (logged as 0).
    pub disabled_losses: Vec<LossTerm>,
    /// Zero `S_m` at the fusion input; its losses stay on.
    pub mute_invariant: bool,
    /// Zero `P_m` at the fusion input; its losses stay on.
    pub mute_specific: bool,
    /// Fuse projected features directly, bypassing the encoders.
    pub non_disentangled: bool,
    pub dropped_modalities: Vec<Modality>,
}

impl AblationFlags {
    pub fn loss_flags(&self) -> LossFlags {
        let mut f = LossFlags::default();
        for &t in &self.disabled_losses {
            f.set(t, false);
        }
        f
    }

    /// Parses one CLI token: `no-<term>`, `only-task`, `mute-invariant`,
    /// `mute-specific`, `non-disentangled` or `drop-<V|A|T>`.
    pub fn apply(&mut self, token: &str) -> Result<(), TrainError> {
        let bad = || TrainError::Config(format!("unknown ablation flag {token:?}"));
        match token {
            "mute-invariant" => self.mute_invariant = true,
            "mute-specific" => self.mute_specific = true,
            "non-disentangled" => self.non_disentangled = true,
            "only-task" => {
                for t in LossTerm::ALL {
                    if t != LossTerm::Task && !self.disabled_losses.contains(&t) {
                        self.disabled_losses.push(t);
                    }
                }
            }
            _ => {
                if let Some(name) = token.strip_prefix("no-") {
                    let t: LossTerm = name.parse().map_err(|_| bad())?;
                    if !self.disabled_losses.contains(&t) {
                        self.disabled_losses.push(t);
                    }
                } else if let Some(tag) = token.strip_prefix("drop-") {
                    let m: Modality = tag.parse().map_err(|_| bad())?;
                    if !self.dropped_modalities.contains(&m) {
                        self.dropped_modalities.push(m);
                    }
                } else {
                    return Err(bad());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weights: LossWeights,
    pub ablation: AblationFlags,
    /// Master seed; initialization, shuffling, noise and permutations each
    /// get their own stream derived from it.
    pub seed: u64,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 100,
            batch_size: 32,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            weights: LossWeights::default(),
            ablation: AblationFlags::default(),
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        let positive = [("lr", self.lr), ("eps", self.eps)];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(format!("{k} must be positive, got {v}"));
        }
        for (k, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{k} must lie in [0, 1), got {v}"));
            }
        }
        let w = &self.weights;
        let weights = [("alpha", w.alpha), ("beta", w.beta), ("gamma", w.gamma), ("lambda", w.lambda)];
        if let Some((k, v)) = weights.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return bad(format!("weight {k} must be finite and ≥ 0, got {v}"));
        }
        if let Some(l) = w.lambda_bt {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda_bt must be finite and ≥ 0, got {l}"));
            }
        }
        if self.ablation.dropped_modalities.len() >= 3 {
            return bad("cannot drop every modality".into());
        }
        if self.patience == Some(0) {
            return bad("patience must be positive".into());
        }
        Ok(())
    }

    /// Forward wiring implied by the ablation flags.
    pub fn forward_options(&self, grl_scale: f64) -> ForwardOptions {
        let a = &self.ablation;
        ForwardOptions {
            active: Modality::ALL.map(|m| !a.dropped_modalities.contains(&m)),
            mute_invariant: a.mute_invariant,
            mute_specific: a.mute_specific,
            non_disentangled: a.non_disentangled,
            grl_scale: Some(grl_scale),
        }
    }
}

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStreams {
    pub init: u64,
    pub shuffle: u64,
    pub noise: u64,
    pub permutation: u64,
}

impl SeedStreams {
    pub fn new(master: u64) -> Self {
        Self {
            init: derive_seed(master, 1),
            shuffle: derive_seed(master, 2),
            noise: derive_seed(master, 3),
            permutation: derive_seed(master, 4),
        }
    }
}

/// SplitMix64 finalizer over `master` offset by `stream`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_tokens() {
        let mut a = AblationFlags::default();
        a.apply("no-info").unwrap();
        a.apply("drop-T").unwrap();
        a.apply("mute-specific").unwrap();
        assert_eq!(a.disabled_losses, [LossTerm::Info]);
        assert_eq!(a.dropped_modalities, [Modality::Text]);
        assert!(a.mute_specific && !a.mute_invariant);
        assert!(a.apply("no-such").is_err());
        assert!(a.apply("drop-X").is_err());

        let mut only = AblationFlags::default();
        only.apply("only-task").unwrap();
        let f = only.loss_flags();
        assert!(LossTerm::ALL.iter().all(|&t| f.is_enabled(t) == (t == LossTerm::Task)));
    }

    #[test]
    fn streams_differ() {
        let s = SeedStreams::new(7);
        let v = [s.init, s.shuffle, s.noise, s.permutation];
        for i in 0..4 {
            for j in 0..i {
                assert_ne!(v[i], v[j]);
            }
        }
        assert_eq!(s, SeedStreams::new(7));
        assert_ne!(SeedStreams::new(8), s);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            lr: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.ablation.dropped_modalities = Modality::ALL.to_vec();
        assert!(c.validate().is_err());
    }
}

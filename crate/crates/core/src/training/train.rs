use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{classification_report, regression_report, MetricsReport};
use super::optim::Adam;
use super::{SeedStreams, TrainConfig, TrainError};
use crate::data::{batches, BatchMode, DataError, Dataset, Split};
use crate::losses::{compute_parts, total_loss, LossBreakdown};
use crate::nn::{ForwardOptions, ModelConfig, ModelError, ModelParams, TaskKind};
use crate::tensor::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    /// Optimizer step after this update, starting at 1.
    pub step: u64,
    #[serde(flatten)]
    pub losses: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Per-term means over the epoch's steps.
    pub train: LossBreakdown,
    pub valid: MetricsReport,
    /// This epoch set a new best validation score.
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ModelParams<f64>,
    /// Optimizer state matching `params`.
    pub optimizer: Adam<f64>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
    pub valid: MetricsReport,
    /// `None` when the dataset has no test split.
    pub test: Option<MetricsReport>,
    pub seeds: SeedStreams,
    pub stopped_early: bool,
}

pub fn train(ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_observed(ds, model_cfg, cfg, &mut |_| {})
}

/// Trains and calls `on_step` after every optimizer update.
///
/// Per step: draw a batch, draw fresh noise, run the full forward pass,
/// combine the enabled loss terms, backpropagate, update. Per epoch: score
/// the validation split and keep the best parameters. The model is
/// initialized from a seed derived from `cfg.seed`; `model_cfg.seed` is
/// overwritten with it.
pub fn train_observed(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    on_step: &mut dyn FnMut(&StepRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    ds.validate()?;
    let seeds = SeedStreams::new(cfg.seed);
    let mut mc = model_cfg.clone();
    mc.seed = seeds.init;
    check_compatible(&mc, ds)?;
    let mut params = ModelParams::<f64>::new(mc)?;
    let mut opt = Adam::new(cfg.adam(), params.store());

    let opts = cfg.forward_options(params.config().grl_scale);
    let flags = cfg.ablation.loss_flags();
    let lambda_bt = cfg.weights.lambda_bt_for(params.config().d_k);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeds.shuffle);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seeds.noise);
    let mut perm_rng = ChaCha8Rng::seed_from_u64(seeds.permutation);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps = Vec::new();
    let mut best: Option<(f64, usize, ModelParams<f64>, Adam<f64>, MetricsReport)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let epoch_batches = batches(ds, Split::Train, cfg.batch_size, BatchMode::Train, true, &mut shuffle_rng)?;
        if epoch_batches.is_empty() {
            return Err(DataError::EmptySplit(Split::Train).into());
        }
        let first_step = steps.len();
        for batch in &epoch_batches {
            let graph = Graph::new();
            let net = params.bind(&graph);
            let diverged = |cause: String, p: &ModelParams<f64>, step: u64| TrainError::Divergence {
                epoch,
                step,
                cause,
                last_good: Box::new(p.clone()),
            };
            let set = net.forward_full(&batch.inputs, &mut noise_rng, &opts)?;
            let parts = compute_parts(&net, &set, &batch.targets, &opts, &flags, lambda_bt, &mut perm_rng)?;
            let (total, losses) = match total_loss(&parts, &cfg.weights, lambda_bt) {
                Ok(v) => v,
                Err(ModelError::NonFinite(what)) => return Err(diverged(what, &params, opt.step + 1)),
                Err(e) => return Err(e.into()),
            };
            let grads = match total {
                Some(t) => {
                    t.backward().map_err(ModelError::from)?;
                    graph.param_grads()
                }
                None => Vec::new(),
            };
            if let Err(e) = opt.update(params.store_mut(), &grads) {
                return Err(diverged(e.to_string(), &params, opt.step + 1));
            }
            let rec = StepRecord {
                epoch,
                step: opt.step,
                losses,
            };
            on_step(&rec);
            steps.push(rec);
        }

        let valid = evaluate(&params, ds, Split::Valid, &opts)?;
        let score = valid.selection_score();
        let improved = best.as_ref().map_or(true, |b| score > b.0);
        if improved {
            best = Some((score, epoch, params.clone(), opt.clone(), valid.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        history.push(EpochRecord {
            epoch,
            train: mean_breakdown(&steps[first_step..]),
            valid,
            improved,
        });
        if cfg.patience.is_some_and(|p| since_best >= p) {
            stopped_early = true;
            break;
        }
    }

    let (_, best_epoch, params, optimizer, valid) = best.expect("at least one epoch");
    let test = if ds.split_indices(Split::Test).is_empty() {
        None
    } else {
        Some(evaluate(&params, ds, Split::Test, &opts)?)
    };
    Ok(TrainOutcome {
        params,
        optimizer,
        best_epoch,
        history,
        steps,
        valid,
        test,
        seeds,
        stopped_early,
    })
}

fn mean_breakdown(steps: &[StepRecord]) -> LossBreakdown {
    let Some(first) = steps.first() else {
        return LossBreakdown::default();
    };
    let n = steps.len() as f64;
    let mean = |f: fn(&LossBreakdown) -> f64| steps.iter().map(|s| f(&s.losses)).sum::<f64>() / n;
    LossBreakdown {
        task: mean(|b| b.task),
        np: mean(|b| b.np),
        info: mean(|b| b.info),
        cons: mean(|b| b.cons),
        diff: mean(|b| b.diff),
        recon: mean(|b| b.recon),
        cyr: mean(|b| b.cyr),
        cyr_raw: mean(|b| b.cyr_raw),
        total: mean(|b| b.total),
        ..first.losses
    }
}

fn check_compatible(mc: &ModelConfig, ds: &Dataset) -> Result<(), TrainError> {
    if mc.input_dims != ds.input_dims() {
        return Err(TrainError::Config(format!(
            "model expects input widths {:?}, dataset has {:?}",
            mc.input_dims,
            ds.input_dims()
        )));
    }
    if mc.task != ds.task() {
        return Err(TrainError::Config(format!(
            "model task {:?} does not match dataset task {:?}",
            mc.task,
            ds.task()
        )));
    }
    Ok(())
}

/// Model outputs for every sample of `split`, in ascending sample order,
/// together with those sample indices.
pub fn predict_split(
    params: &ModelParams<f64>,
    ds: &Dataset,
    split: Split,
    opts: &ForwardOptions,
) -> Result<(Vec<usize>, Vec<Vec<f64>>), TrainError> {
    check_compatible(params.config(), ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0); // unused: evaluation never shuffles
    let mut indices = Vec::new();
    let mut outputs = Vec::new();
    for batch in batches(ds, split, EVAL_BATCH, BatchMode::Eval, false, &mut rng)? {
        let graph = Graph::new();
        let pred = params.bind(&graph).predict(&batch.inputs, opts)?;
        pred.y_hat.with_value(|y| {
            for i in 0..y.rows() {
                outputs.push(y.row(i).to_vec());
            }
        });
        indices.extend(batch.indices);
    }
    Ok((indices, outputs))
}

const EVAL_BATCH: usize = 256;

/// Task-gated metrics of `params` on one split.
pub fn evaluate(
    params: &ModelParams<f64>,
    ds: &Dataset,
    split: Split,
    opts: &ForwardOptions,
) -> Result<MetricsReport, TrainError> {
    let (idx, out) = predict_split(params, ds, split, opts)?;
    Ok(match ds.task() {
        TaskKind::Regression => {
            let y: Vec<f64> = idx.iter().map(|&i| ds.labels.value(i)).collect();
            let y_hat: Vec<f64> = out.iter().map(|r| r[0]).collect();
            regression_report(split, &y, &y_hat)
        }
        TaskKind::Classification { classes } => {
            let y: Vec<usize> = idx.iter().map(|&i| ds.labels.value(i) as usize).collect();
            let y_hat: Vec<usize> = out.iter().map(|r| argmax(r)).collect();
            classification_report(split, &y, &y_hat, classes)
        }
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

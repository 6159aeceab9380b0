//! Linear probes from learned components to the ground-truth factors of a
//! synthetic dataset. Probes are fit on the training split and scored on the
//! test split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::data::{Dataset, Labels, ModalityBatch, Split};
use crate::linalg::{r_squared, ridge_fit, ridge_predict};
use crate::losses::Component;
use crate::nn::{sample_noise, ForwardOptions, Modality, ModelParams};
use crate::tensor::{Array, Graph};

pub const PROBE_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentProbe {
    pub modality: Modality,
    pub component: Component,
    /// Held-out R² onto the shared factor `s`.
    pub r2_shared: f64,
    /// Held-out R² onto the modality's own private factor `p_m`.
    pub r2_private: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// S, P, N for V, then A, then T.
    pub components: Vec<ComponentProbe>,
    /// Test accuracy of a linear classifier from `N_V ⊕ N_A ⊕ N_T` to the label.
    pub noise_label_accuracy: f64,
    /// Test rate of the most frequent test label: the best constant predictor.
    pub majority_rate: f64,
}

impl ProbeReport {
    pub fn get(&self, m: Modality, c: Component) -> &ComponentProbe {
        self.components
            .iter()
            .find(|p| p.modality == m && p.component == c)
            .expect("every pair is probed")
    }
}

/// Embeddings `[component][modality]` of the given rows, batched.
pub fn embed_rows(
    params: &ModelParams<f64>,
    ds: &Dataset,
    idx: &[usize],
    noise_rng: &mut ChaCha8Rng,
) -> Result<[[Array<f64>; 3]; 3], TrainError> {
    let d_k = params.config().d_k;
    let mut cols: [[Vec<f64>; 3]; 3] = Default::default();
    let opts = ForwardOptions::default();
    for chunk in idx.chunks(256) {
        let batch = ModalityBatch::gather(ds, chunk.to_vec());
        let noise = [0, 1, 2].map(|_| sample_noise(chunk.len(), d_k, noise_rng));
        let graph = Graph::new();
        let set = params.bind(&graph).forward_with_noise(&batch.inputs, &noise, &opts)?;
        for m in 0..3 {
            for (c, t) in [set.s[m], set.p[m], set.n[m]].iter().enumerate() {
                t.with_value(|a| cols[c][m].extend_from_slice(a.data()));
            }
        }
    }
    let n = idx.len();
    Ok(cols.map(|per_m| per_m.map(|v| Array::from_shape_vec(&[n, d_k], v).expect("n × d_k"))))
}

fn labels_as_classes(labels: &Labels, idx: &[usize]) -> (Vec<usize>, usize) {
    match labels {
        // sign of the score; zero counts as negative
        Labels::Scores(v) => (idx.iter().map(|&i| usize::from(v[i] > 0.0)).collect(), 2),
        Labels::Classes { labels, classes } => (idx.iter().map(|&i| labels[i] as usize).collect(), *classes as usize),
    }
}

fn one_hot(y: &[usize], k: usize) -> Array<f64> {
    let mut a = Array::zeros(&[y.len(), k]);
    for (i, &c) in y.iter().enumerate() {
        a.set(i, c, 1.0);
    }
    a
}

fn concat_cols(parts: &[Array<f64>]) -> Array<f64> {
    let n = parts[0].rows();
    let width: usize = parts.iter().map(Array::cols).sum();
    let mut data = Vec::with_capacity(n * width);
    for i in 0..n {
        for p in parts {
            data.extend_from_slice(p.row(i));
        }
    }
    Array::from_shape_vec(&[n, width], data).expect("positive dims")
}

fn probe_r2(x_tr: &Array<f64>, y_tr: &Array<f64>, x_te: &Array<f64>, y_te: &Array<f64>, what: &str) -> Result<f64, TrainError> {
    let coef = ridge_fit(x_tr, y_tr, PROBE_RIDGE).ok_or_else(|| TrainError::SingularProbe(what.to_string()))?;
    Ok(r_squared(y_te, &ridge_predict(x_te, &coef)))
}

/// Ridge probes from every `S_m`, `P_m`, `N_m` to `s` and `p_m`, plus the
/// noise-branch label probe. `noise_seed` fixes the `G_m` draws.
pub fn probe_disentanglement(params: &ModelParams<f64>, ds: &Dataset, noise_seed: u64) -> Result<ProbeReport, TrainError> {
    let factors = ds.factors.as_ref().ok_or(TrainError::UnsupportedProbe)?;
    let train_idx = ds.split_indices(Split::Train);
    let test_idx = ds.split_indices(Split::Test);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(crate::data::DataError::EmptySplit(if train_idx.is_empty() { Split::Train } else { Split::Test }).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let tr = embed_rows(params, ds, &train_idx, &mut rng)?;
    let te = embed_rows(params, ds, &test_idx, &mut rng)?;

    let s_tr = factors.shared.select_rows(&train_idx);
    let s_te = factors.shared.select_rows(&test_idx);
    let mut components = Vec::with_capacity(9);
    for m in Modality::ALL {
        let i = m.index();
        let p_tr = factors.private[i].select_rows(&train_idx);
        let p_te = factors.private[i].select_rows(&test_idx);
        for (c, comp) in [Component::Invariant, Component::Specific, Component::Noise].into_iter().enumerate() {
            let tag = format!("{}_{m}", comp.tag());
            components.push(ComponentProbe {
                modality: m,
                component: comp,
                r2_shared: probe_r2(&tr[c][i], &s_tr, &te[c][i], &s_te, &tag)?,
                r2_private: probe_r2(&tr[c][i], &p_tr, &te[c][i], &p_te, &tag)?,
            });
        }
    }

    let (y_tr, k) = labels_as_classes(&ds.labels, &train_idx);
    let (y_te, _) = labels_as_classes(&ds.labels, &test_idx);
    let n_tr = concat_cols(&tr[2]);
    let n_te = concat_cols(&te[2]);
    let coef = ridge_fit(&n_tr, &one_hot(&y_tr, k), PROBE_RIDGE)
        .ok_or_else(|| TrainError::SingularProbe("noise label probe".into()))?;
    let scores = ridge_predict(&n_te, &coef);
    let correct = (0..y_te.len())
        .filter(|&i| {
            let row = scores.row(i);
            let best = (0..k).fold(0, |b, c| if row[c] > row[b] { c } else { b });
            best == y_te[i]
        })
        .count();
    let mut counts = vec![0usize; k];
    for &c in &y_te {
        counts[c] += 1;
    }
    let majority_rate = *counts.iter().max().expect("k ≥ 1") as f64 / y_te.len() as f64;

    Ok(ProbeReport {
        components,
        noise_label_accuracy: correct as f64 / y_te.len() as f64,
        majority_rate,
    })
}

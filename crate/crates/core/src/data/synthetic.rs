use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DataError, Dataset, Factors, Labels, Provenance, Split};
use crate::linalg::orthonormal_columns;
use crate::nn::{Modality, TaskKind};
use crate::tensor::Array;

/// Generator settings for data with known shared and private factors.
///
/// Per sample: `s ~ N(0, I_{d_s})`, `p_m ~ N(0, I_{d_p})`,
/// `x_m = A_m [s; p_m] + σ ε`, with `A_m` a seeded `d_m × (d_s + d_p)` matrix
/// with orthonormal columns. The score is `w_s·s + Σ_m w_{p,m}·p_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub d_shared: usize,
    pub d_private: usize,
    /// Feature widths, V, A, T.
    pub dims: [usize; 3],
    pub sigma: f64,
    /// Defaults to 0.6 per shared factor.
    pub w_shared: Option<Vec<f64>>,
    /// Defaults to 0.3 per private factor of every modality.
    pub w_private: Option<[Vec<f64>; 3]>,
    pub task: TaskKind,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            d_shared: 4,
            d_private: 4,
            dims: [16, 16, 16],
            sigma: 0.1,
            w_shared: None,
            w_private: None,
            task: TaskKind::Regression,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Spec(m));
        if self.n_samples < 10 {
            return bad(format!("n_samples must be at least 10, got {}", self.n_samples));
        }
        if self.d_shared == 0 || self.d_private == 0 {
            return bad("factor dimensions must be positive".into());
        }
        for m in Modality::ALL {
            let d = self.dims[m.index()];
            if self.d_shared + self.d_private > d {
                return bad(format!(
                    "d_s + d_p = {} exceeds d_{m} = {d}; factors would not be identifiable",
                    self.d_shared + self.d_private
                ));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be a finite value ≥ 0, got {}", self.sigma));
        }
        if let Some(w) = &self.w_shared {
            if w.len() != self.d_shared {
                return bad(format!("w_shared has {} entries, d_s is {}", w.len(), self.d_shared));
            }
        }
        if let Some(ws) = &self.w_private {
            if ws.iter().any(|w| w.len() != self.d_private) {
                return bad(format!("every w_private row needs {} entries", self.d_private));
            }
        }
        if let TaskKind::Classification { classes } = self.task {
            if classes < 2 {
                return bad(format!("classification needs at least 2 classes, got {classes}"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn label_weights(&self) -> (Vec<f64>, [Vec<f64>; 3]) {
        let ws = self.w_shared.clone().unwrap_or_else(|| vec![0.6; self.d_shared]);
        let wp = self
            .w_private
            .clone()
            .unwrap_or_else(|| [0, 1, 2].map(|_| vec![0.3; self.d_private]));
        (ws, wp)
    }
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array<f64> {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Array::from_shape_vec(&[rows, cols], data).expect("positive dims")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_samples;
    let k = spec.d_shared + spec.d_private;
    let mixing: Vec<Array<f64>> = Modality::ALL
        .iter()
        .map(|m| orthonormal_columns(&normal_matrix(spec.dims[m.index()], k, &mut rng)))
        .collect();
    let shared = normal_matrix(n, spec.d_shared, &mut rng);
    let private = [0, 1, 2].map(|_| normal_matrix(n, spec.d_private, &mut rng));

    let mut features = Vec::with_capacity(3);
    for m in Modality::ALL {
        let i = m.index();
        let d = spec.dims[i];
        let a = &mixing[i];
        let mut x = Array::zeros(&[n, d]);
        for r in 0..n {
            let latent: Vec<f64> = shared.row(r).iter().chain(private[i].row(r)).copied().collect();
            for c in 0..d {
                let clean: f64 = a.row(c).iter().zip(&latent).map(|(w, z)| w * z).sum();
                let eps: f64 = rng.sample(StandardNormal);
                x.set(r, c, clean + spec.sigma * eps);
            }
        }
        features.push(x);
    }

    let (ws, wp) = spec.label_weights();
    let scores: Vec<f64> = (0..n)
        .map(|r| {
            let mut y: f64 = shared.row(r).iter().zip(&ws).map(|(a, b)| a * b).sum();
            for (i, w) in wp.iter().enumerate() {
                y += private[i].row(r).iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            }
            y
        })
        .collect();
    let labels = match spec.task {
        TaskKind::Regression => Labels::Scores(scores),
        TaskKind::Classification { classes } => Labels::Classes {
            labels: bin_scores(&scores, classes),
            classes: classes as u32,
        },
    };

    let n_train = n * 7 / 10;
    let n_valid = n / 10;
    let splits = (0..n)
        .map(|i| {
            if i < n_train {
                Split::Train
            } else if i < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            }
        })
        .collect();

    let ds = Dataset {
        features: features.try_into().expect("three modalities"),
        labels,
        splits,
        provenance: Provenance::Synthetic { spec_hash: spec.hash() },
        factors: Some(Factors { shared, private }),
    };
    ds.validate()?;
    Ok(ds)
}

/// Two classes split on the sign; more classes use equal-count quantile bins.
fn bin_scores(scores: &[f64], classes: usize) -> Vec<u32> {
    if classes == 2 {
        return scores.iter().map(|&y| u32::from(y > 0.0)).collect();
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..classes)
        .map(|q| sorted[q * sorted.len() / classes])
        .collect();
    scores
        .iter()
        .map(|&y| cuts.iter().filter(|&&c| y >= c).count() as u32)
        .collect()
}

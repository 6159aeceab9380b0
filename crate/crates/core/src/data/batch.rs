use rand::seq::SliceRandom;
use rand::Rng;

use super::{DataError, Dataset, Split};
use crate::losses::Targets;
use crate::tensor::Array;

/// Training drops the final short batch; evaluation keeps it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBatch {
    /// Dataset row of each batch row.
    pub indices: Vec<usize>,
    /// `batch × d_m` per modality, V, A, T.
    pub inputs: [Array<f64>; 3],
    pub targets: Targets,
}

impl ModalityBatch {
    pub fn gather(ds: &Dataset, indices: Vec<usize>) -> Self {
        let inputs = [0, 1, 2].map(|m| ds.features[m].select_rows(&indices));
        let targets = ds.labels.targets(&indices);
        Self {
            indices,
            inputs,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Partitions one split into batches. With `shuffle`, the order is a
/// permutation drawn from `rng`; otherwise ascending sample order.
pub fn batches<R: Rng + ?Sized>(
    ds: &Dataset,
    split: Split,
    batch_size: usize,
    mode: BatchMode,
    shuffle: bool,
    rng: &mut R,
) -> Result<Vec<ModalityBatch>, DataError> {
    let min = if mode == BatchMode::Train { 2 } else { 1 };
    if batch_size < min {
        return Err(DataError::BatchSize(batch_size));
    }
    let mut idx = ds.split_indices(split);
    if idx.is_empty() {
        return Err(DataError::EmptySplit(split));
    }
    if shuffle {
        idx.shuffle(rng);
    }
    Ok(idx
        .chunks(batch_size)
        .filter(|c| mode == BatchMode::Eval || c.len() == batch_size)
        .map(|c| ModalityBatch::gather(ds, c.to_vec()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Labels, Provenance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(n: usize) -> Dataset {
        Dataset {
            features: [0, 1, 2].map(|_| {
                Array::from_shape_vec(&[n, 2], (0..2 * n).map(|v| v as f64).collect()).unwrap()
            }),
            labels: Labels::Scores((0..n).map(|v| v as f64).collect()),
            splits: vec![Split::Train; n],
            provenance: Provenance::File { path: "mem".into() },
            factors: None,
        }
    }

    #[test]
    fn drop_last_in_training_only() {
        let ds = dataset(100);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let train = batches(&ds, Split::Train, 32, BatchMode::Train, true, &mut rng).unwrap();
        assert_eq!(train.iter().map(ModalityBatch::len).collect::<Vec<_>>(), [32, 32, 32]);
        let eval = batches(&ds, Split::Train, 32, BatchMode::Eval, false, &mut rng).unwrap();
        assert_eq!(eval.len(), 4);
        let mut seen: Vec<usize> = eval.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn shuffle_is_seeded() {
        let ds = dataset(40);
        let order = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            batches(&ds, Split::Train, 8, BatchMode::Train, true, &mut rng)
                .unwrap()
                .into_iter()
                .flat_map(|b| b.indices)
                .collect::<Vec<_>>()
        };
        assert_eq!(order(3), order(3));
        assert_ne!(order(3), order(4));
    }

    #[test]
    fn rejects_tiny_training_batches() {
        let ds = dataset(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            batches(&ds, Split::Train, 1, BatchMode::Train, false, &mut rng),
            Err(DataError::BatchSize(1))
        ));
        assert!(batches(&ds, Split::Train, 1, BatchMode::Eval, false, &mut rng).is_ok());
        assert!(matches!(
            batches(&ds, Split::Test, 4, BatchMode::Eval, false, &mut rng),
            Err(DataError::EmptySplit(Split::Test))
        ));
    }
}

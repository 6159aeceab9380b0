//! MNDF feature container.
//!
//! ```text
//! "MNDF" | u32 version = 1 | u32 n_samples | u32 d_V | u32 d_A | u32 d_T
//! | u8 task (0 regression, 1 classification) | u32 class count (0 for regression)
//! | X_V | X_A | X_T            row-major little-endian f64
//! | labels                     f64 per sample (regression) or u32 (classification)
//! | split tags                 u8 per sample: 0 train, 1 valid, 2 test
//! ```

use super::{DataError, Dataset, Labels, Provenance, Split};
use crate::tensor::Array;

pub const MINDF_MAGIC: &[u8; 4] = b"MNDF";
pub const MINDF_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 * 5 + 1 + 4;

pub fn write_mindf(ds: &Dataset) -> Result<Vec<u8>, DataError> {
    ds.validate()?;
    let n = ds.len();
    let dims = ds.input_dims();
    let mut out = Vec::with_capacity(HEADER_LEN + n * (dims.iter().sum::<usize>() * 8 + 9));
    out.extend_from_slice(MINDF_MAGIC);
    for v in [MINDF_VERSION, n as u32, dims[0] as u32, dims[1] as u32, dims[2] as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    match &ds.labels {
        Labels::Scores(_) => {
            out.push(0);
            out.extend_from_slice(&0u32.to_le_bytes());
        }
        Labels::Classes { classes, .. } => {
            out.push(1);
            out.extend_from_slice(&classes.to_le_bytes());
        }
    }
    for x in &ds.features {
        for v in x.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    match &ds.labels {
        Labels::Scores(v) => v.iter().for_each(|y| out.extend_from_slice(&y.to_le_bytes())),
        Labels::Classes { labels, .. } => labels.iter().for_each(|y| out.extend_from_slice(&y.to_le_bytes())),
    }
    out.extend(ds.splits.iter().map(|s| s.code()));
    Ok(out)
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize, what: &'static str) -> Result<&'a [u8], DataError> {
    let s = buf.get(*pos..*pos + n).ok_or(DataError::Truncated(what))?;
    *pos += n;
    Ok(s)
}

fn u32_at(buf: &[u8], pos: &mut usize, what: &'static str) -> Result<u32, DataError> {
    Ok(u32::from_le_bytes(take(buf, pos, 4, what)?.try_into().unwrap()))
}

pub fn read_mindf(buf: &[u8]) -> Result<Dataset, DataError> {
    let mut pos = 0;
    let magic: [u8; 4] = take(buf, &mut pos, 4, "magic")?.try_into().unwrap();
    if &magic != MINDF_MAGIC {
        return Err(DataError::BadMagic(magic));
    }
    let version = u32_at(buf, &mut pos, "version")?;
    if version != MINDF_VERSION {
        return Err(DataError::Version(version));
    }
    let n = u32_at(buf, &mut pos, "header")? as usize;
    let dims = [
        u32_at(buf, &mut pos, "header")? as usize,
        u32_at(buf, &mut pos, "header")? as usize,
        u32_at(buf, &mut pos, "header")? as usize,
    ];
    let task = take(buf, &mut pos, 1, "header")?[0];
    let classes = u32_at(buf, &mut pos, "header")?;
    if n == 0 || dims.contains(&0) {
        return Err(DataError::Header(format!("n_samples {n} and dims {dims:?} must be positive")));
    }
    match (task, classes) {
        (0, 0) => {}
        (0, c) => return Err(DataError::Header(format!("regression header with class count {c}"))),
        (1, c) if c >= 2 => {}
        (1, c) => return Err(DataError::Header(format!("classification needs ≥ 2 classes, header has {c}"))),
        (t, _) => return Err(DataError::Header(format!("unknown task kind {t}"))),
    }
    let label_width = if task == 0 { 8 } else { 4 };
    let expected = n * (dims.iter().sum::<usize>() * 8 + label_width + 1);
    let actual = buf.len() - pos;
    if actual > expected {
        return Err(DataError::PayloadMismatch { expected, actual });
    }

    let mut features = Vec::with_capacity(3);
    for d in dims {
        let raw = take(buf, &mut pos, n * d * 8, "features")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        features.push(Array::from_shape_vec(&[n, d], data).expect("checked dims"));
    }
    let labels = if task == 0 {
        let raw = take(buf, &mut pos, n * 8, "labels")?;
        Labels::Scores(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    } else {
        let raw = take(buf, &mut pos, n * 4, "labels")?;
        Labels::Classes {
            labels: raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect(),
            classes,
        }
    };
    let splits = take(buf, &mut pos, n, "split tags")?
        .iter()
        .map(|&c| Split::from_code(c).ok_or_else(|| DataError::Header(format!("split tag {c}"))))
        .collect::<Result<Vec<_>, _>>()?;

    if let Labels::Scores(v) = &labels {
        if v.iter().any(|y| !y.is_finite()) {
            return Err(DataError::Header("non-finite label".into()));
        }
    }
    let ds = Dataset {
        features: features.try_into().expect("three modalities"),
        labels,
        splits,
        provenance: Provenance::File { path: Default::default() },
        factors: None,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::nn::{Modality, TaskKind};

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            n_samples: 30,
            dims: [8, 9, 10],
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        for task in [TaskKind::Regression, TaskKind::Classification { classes: 3 }] {
            let ds = generate_synthetic(&SyntheticSpec { task, ..spec() }).unwrap();
            let back = read_mindf(&write_mindf(&ds).unwrap()).unwrap();
            assert!(ds.same_content(&back));
        }
    }

    #[test]
    fn header_layout() {
        let bytes = write_mindf(&generate_synthetic(&spec()).unwrap()).unwrap();
        assert_eq!(&bytes[..4], b"MNDF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 30);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        assert_eq!(bytes[24], 0);
        assert_eq!(bytes.len(), HEADER_LEN + 30 * (27 * 8 + 8 + 1));
    }

    #[test]
    fn distinct_diagnostics() {
        let bytes = write_mindf(&generate_synthetic(&spec()).unwrap()).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_mindf(&bad), Err(DataError::BadMagic(_))));

        assert!(matches!(read_mindf(&bytes[..bytes.len() - 7]), Err(DataError::Truncated(_))));
        assert!(matches!(read_mindf(&bytes[..10]), Err(DataError::Truncated(_))));

        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 16]);
        assert!(matches!(read_mindf(&long), Err(DataError::PayloadMismatch { .. })));

        let mut nan = bytes.clone();
        let at = HEADER_LEN + 8 * (30 * 8 + 2);
        nan[at..at + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        match read_mindf(&nan) {
            Err(DataError::NonFinite { modality, row, col }) => {
                assert_eq!((modality, row, col), (Modality::Acoustic, 0, 2));
            }
            other => panic!("expected NaN diagnostic, got {other:?}"),
        }
    }
}

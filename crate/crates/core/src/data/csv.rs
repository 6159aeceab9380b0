//! CSV directory layout, the text alternative to MNDF.
//!
//! ```text
//! <dir>/x_V.csv, x_A.csv, x_T.csv   header f0,f1,...; one row per sample
//! <dir>/labels.csv                  header "score,split" (regression)
//!                                   or "class[K],split" (K classes);
//!                                   split is train, valid or test
//! ```
//!
//! Floats are written in shortest round-trip form, so CSV and MNDF hold the
//! same 64-bit values.

use std::path::Path;

use super::{DataError, Dataset, Labels, Provenance, Split};
use crate::nn::Modality;
use crate::tensor::Array;

fn csv_err(path: &Path, msg: impl ToString) -> DataError {
    DataError::Csv {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    }
}

pub fn write_csv_dir(dir: impl AsRef<Path>, ds: &Dataset) -> Result<(), DataError> {
    let dir = dir.as_ref();
    ds.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    for m in Modality::ALL {
        let path = dir.join(format!("x_{m}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let x = &ds.features[m.index()];
        w.write_record((0..x.cols()).map(|j| format!("f{j}")))
            .map_err(|e| csv_err(&path, e))?;
        for i in 0..x.rows() {
            w.write_record(x.row(i).iter().map(|v| v.to_string()))
                .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| DataError::io(&path, e))?;
    }
    let path = dir.join("labels.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let head = match &ds.labels {
        Labels::Scores(_) => "score".to_string(),
        Labels::Classes { classes, .. } => format!("class[{classes}]"),
    };
    w.write_record([head.as_str(), "split"]).map_err(|e| csv_err(&path, e))?;
    for (i, split) in ds.splits.iter().enumerate() {
        let label = match &ds.labels {
            Labels::Scores(v) => v[i].to_string(),
            Labels::Classes { labels, .. } => labels[i].to_string(),
        };
        w.write_record([label.as_str(), split.name()])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| DataError::io(&path, e))?;
    Ok(())
}

fn read_matrix(path: &Path) -> Result<Array<f64>, DataError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let width = r.headers().map_err(|e| csv_err(path, e))?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != width {
            return Err(csv_err(path, format!("row {i} has {} fields, header has {width}", rec.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| csv_err(path, format!("row {i}: {field:?} is not a number")))?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(csv_err(path, "no data rows"));
    }
    Array::from_shape_vec(&[rows, width], data).map_err(|e| csv_err(path, e))
}

pub fn read_csv_dir(dir: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let dir = dir.as_ref();
    let features = Modality::ALL
        .iter()
        .map(|m| read_matrix(&dir.join(format!("x_{m}.csv"))))
        .collect::<Result<Vec<_>, _>>()?;

    let path = dir.join("labels.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let head = r.headers().map_err(|e| csv_err(&path, e))?.get(0).unwrap_or("").to_string();
    let classes: Option<u32> = if head == "score" {
        None
    } else if let Some(k) = head.strip_prefix("class[").and_then(|s| s.strip_suffix(']')) {
        Some(k.parse().map_err(|_| csv_err(&path, format!("bad class count in {head:?}")))?)
    } else {
        return Err(csv_err(&path, format!("first column must be score or class[K], got {head:?}")));
    };
    let mut scores = Vec::new();
    let mut classes_v = Vec::new();
    let mut splits = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&path, e))?;
        let (Some(label), Some(split)) = (rec.get(0), rec.get(1)) else {
            return Err(csv_err(&path, format!("row {i} needs label and split")));
        };
        let bad = |_| csv_err(&path, format!("row {i}: bad label {label:?}"));
        match classes {
            None => scores.push(label.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
            Some(_) => classes_v.push(label.trim().parse::<u32>().map_err(|e| bad(e.to_string()))?),
        }
        splits.push(split.trim().parse::<Split>().map_err(|e| csv_err(&path, e))?);
    }
    let labels = match classes {
        None => Labels::Scores(scores),
        Some(classes) => Labels::Classes {
            labels: classes_v,
            classes,
        },
    };
    let ds = Dataset {
        features: features.try_into().expect("three modalities"),
        labels,
        splits,
        provenance: Provenance::File { path: dir.to_path_buf() },
        factors: None,
    };
    ds.validate()?;
    Ok(ds)
}

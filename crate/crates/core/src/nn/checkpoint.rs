//! MNDP parameter checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "MNDP" | u32 version = 1
//! config: u32 d_k | u32 d_V | u32 d_A | u32 d_T | u8 task (0 regression, 1 classification)
//!         | u32 classes | u32 stats_hidden | u32 stats_layers | u32 head_hidden
//!         | u32 head_layers | f64 grl_scale | u8 per_modality_recon | u64 seed
//! u64 optimizer step | u32 group count
//! per group: u32 name length | name bytes (UTF-8) | u32 rank | u32 dims[rank] | f64 data (row-major)
//! ```
//!
//! Model parameter groups come first in layout order; optional optimizer
//! state groups follow, named `adam.m/<param>` and `adam.v/<param>`.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{ModelConfig, ModelError, ModelParams, TaskKind};
use crate::scalar::Scalar;
use crate::tensor::Array;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MNDP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("checkpoint group name is not UTF-8")]
    Utf8,
    #[error("checkpoint holds inconsistent data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parameters plus optional optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T: Scalar> {
    pub params: ModelParams<T>,
    pub step: u64,
    /// Extra named groups stored after the parameters.
    pub extra: Vec<(String, Array<T>)>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_group<T: Scalar>(out: &mut Vec<u8>, name: &str, a: &Array<T>) {
    put_u32(out, name.len());
    out.extend_from_slice(name.as_bytes());
    put_u32(out, a.rank());
    for &d in a.shape() {
        put_u32(out, d);
    }
    for &x in a.data() {
        out.extend_from_slice(&x.as_f64().to_le_bytes());
    }
}

pub fn write_checkpoint<T: Scalar>(ckpt: &Checkpoint<T>) -> Vec<u8> {
    let cfg = ckpt.params.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_u32(&mut out, cfg.d_k);
    for d in cfg.input_dims {
        put_u32(&mut out, d);
    }
    match cfg.task {
        TaskKind::Regression => {
            out.push(0);
            put_u32(&mut out, 0);
        }
        TaskKind::Classification { classes } => {
            out.push(1);
            put_u32(&mut out, classes);
        }
    }
    put_u32(&mut out, cfg.stats_hidden);
    put_u32(&mut out, cfg.stats_layers);
    put_u32(&mut out, cfg.head_hidden);
    put_u32(&mut out, cfg.head_layers);
    out.extend_from_slice(&cfg.grl_scale.to_le_bytes());
    out.push(u8::from(cfg.per_modality_recon));
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.extend_from_slice(&ckpt.step.to_le_bytes());
    put_u32(&mut out, ckpt.params.store().len() + ckpt.extra.len());
    for (_, name, a) in ckpt.params.store().iter() {
        put_group(&mut out, name, a);
    }
    for (name, a) in &ckpt.extra {
        put_group(&mut out, name, a);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated(what))?;
        let s = self.buf.get(self.pos..end).ok_or(CheckpointError::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &'static str) -> Result<usize, CheckpointError> {
        self.u32(what).map(|v| v as usize)
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let d_k = r.usize("config")?;
    let input_dims = [r.usize("config")?, r.usize("config")?, r.usize("config")?];
    let task_tag = r.u8("config")?;
    let classes = r.usize("config")?;
    let task = match task_tag {
        0 => TaskKind::Regression,
        1 => TaskKind::Classification { classes },
        t => return Err(CheckpointError::Invalid(format!("task tag {t}"))),
    };
    let mut config = ModelConfig::with_d_k(d_k, input_dims, task);
    config.stats_hidden = r.usize("config")?;
    config.stats_layers = r.usize("config")?;
    config.head_hidden = r.usize("config")?;
    config.head_layers = r.usize("config")?;
    config.grl_scale = r.f64("config")?;
    config.per_modality_recon = r.u8("config")? != 0;
    config.seed = r.u64("config")?;
    let step = r.u64("optimizer step")?;
    let count = r.usize("group count")?;

    let mut groups = Vec::new();
    for _ in 0..count {
        let len = r.usize("group name")?;
        let name = std::str::from_utf8(r.take(len, "group name")?)
            .map_err(|_| CheckpointError::Utf8)?
            .to_string();
        let rank = r.usize("group rank")?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.usize("group dims")?);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(8).ok_or(CheckpointError::Truncated("group data"))?, "group data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let a = Array::from_shape_vec(&shape, data).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        groups.push((name, a));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Invalid(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }

    let template = ModelParams::<T>::new(config.clone())?;
    let n_params = template.store().len();
    if groups.len() < n_params {
        return Err(CheckpointError::Invalid(format!(
            "{} groups, model needs {n_params}",
            groups.len()
        )));
    }
    let extra = groups.split_off(n_params);
    for ((_, expected, _), (name, _)) in template.store().iter().zip(&groups) {
        if expected != name {
            return Err(CheckpointError::Invalid(format!(
                "group {name:?} where {expected:?} was expected"
            )));
        }
    }
    let params = ModelParams::from_parts(config, groups)?;
    Ok(Checkpoint { params, step, extra })
}

pub fn save_checkpoint<T: Scalar>(path: impl AsRef<Path>, ckpt: &Checkpoint<T>) -> Result<(), CheckpointError> {
    fs::write(path, write_checkpoint(ckpt))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>, CheckpointError> {
    read_checkpoint(&fs::read(path)?)
}

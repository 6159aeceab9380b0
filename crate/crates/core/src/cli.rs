//! The `mind` command line: data generation, training, evaluation,
//! verification, ablation and embedding export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{generate_synthetic, load_features, write_csv_dir, write_features, write_mindf, Dataset, Split, SyntheticSpec};
use crate::nn::{load_checkpoint, save_checkpoint, Checkpoint, Modality, ModelConfig, ModelParams};
use crate::training::{
    embed_rows, evaluate, format_ablation_table, probe_disentanglement, run_ablation_suite, train_observed,
    AblationRow, MetricsReport, ProbeReport, TrainConfig, TrainError, TrainOutcome,
};
use crate::verify::{run_verify, VerifyHooks, VerifySettings};

pub const OUT_DIR_ENV: &str = "MIND_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mind", version, about = "Multi-modal information disentanglement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known factors.
    Synth(SynthArgs),
    /// Train one model and write checkpoint, logs, report and manifest.
    Train(RunArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Run the gradient, oracle and invariant checks.
    Verify(VerifyArgs),
    /// Export S, P and N embeddings of every sample as CSV.
    DumpEmbeddings(DumpArgs),
    /// Train the ablation grid and write a grouped table.
    Ablate(RunArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "runs")]
    pub out_dir: PathBuf,
    /// Master seed, overriding the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator spec; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (MNDF) or directory (with --csv). Defaults to <out-dir>/synthetic.mndf.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the CSV directory layout instead of MNDF.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run config.
    #[arg(long, required_unless_present = "manifest")]
    pub config: Option<PathBuf>,
    /// Re-run exactly the configuration recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    /// Ablation switch: no-<term>, only-task, mute-invariant, mute-specific,
    /// non-disentangled, drop-<V|A|T>. Repeatable.
    #[arg(long)]
    pub ablate: Vec<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset file (MNDF) or CSV directory.
    #[arg(long, required_unless_present = "config")]
    pub data: Option<PathBuf>,
    /// Take the dataset from a run config instead.
    #[arg(long, conflicts_with = "data")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// train, valid or test.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Ablation switches the model was trained with.
    #[arg(long)]
    pub ablate: Vec<String>,
    /// Report path; defaults to <out-dir>/eval_<split>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV path; defaults to <out-dir>/embeddings.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the noise draws; without it every dump draws fresh noise.
    #[arg(long)]
    pub fixed_noise_seed: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse()
}

/// Where the data of a run comes from: a file, or a generator spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

/// Model widths; input widths and task come from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub d_k: usize,
    /// Defaults to `d_k`.
    pub stats_hidden: Option<usize>,
    pub stats_layers: usize,
    /// Defaults to `d_k`.
    pub head_hidden: Option<usize>,
    pub head_layers: usize,
    pub grl_scale: f64,
    pub per_modality_recon: bool,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let c = ModelConfig::new([1, 1, 1], crate::nn::TaskKind::Regression);
        Self {
            d_k: c.d_k,
            stats_hidden: None,
            stats_layers: c.stats_layers,
            head_hidden: None,
            head_layers: c.head_layers,
            grl_scale: c.grl_scale,
            per_modality_recon: c.per_modality_recon,
        }
    }
}

impl ModelSettings {
    pub fn model_config(&self, ds: &Dataset) -> ModelConfig {
        let mut c = ModelConfig::with_d_k(self.d_k, ds.input_dims(), ds.task());
        c.stats_hidden = self.stats_hidden.unwrap_or(self.d_k);
        c.stats_layers = self.stats_layers;
        c.head_hidden = self.head_hidden.unwrap_or(self.d_k);
        c.head_layers = self.head_layers;
        c.grl_scale = self.grl_scale;
        c.per_modality_recon = self.per_modality_recon;
        c
    }
}

/// The run config file: `[data]`, `[model]` and `[train]` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub model: ModelSettings,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Reads a TOML config; a relative `data.path` is taken relative to the
    /// config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(p) = &cfg.data.path {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                let joined = base.join(p);
                cfg.data.path = Some(fs::canonicalize(&joined).unwrap_or(joined));
            }
        }
        Ok(cfg)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match (&self.data.path, &self.data.synthetic) {
            (Some(p), None) => Ok(load_features(p).with_context(|| format!("loading dataset {}", p.display()))?),
            (None, Some(spec)) => Ok(generate_synthetic(spec)?),
            (Some(_), Some(_)) => bail!("config sets both data.path and data.synthetic; pick one"),
            (None, None) => bail!("config must set data.path or a [data.synthetic] table"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub samples: usize,
    /// SHA-256 of the dataset's MNDF encoding.
    pub sha256: String,
    pub source: DataSource,
}

/// Everything needed to rerun a command bitwise: no timestamps, no host data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub dataset: DatasetRecord,
    /// Artifact name to file name, relative to the manifest.
    pub artifacts: BTreeMap<String, String>,
}

pub fn dataset_sha256(ds: &Dataset) -> Result<String> {
    let bytes = write_mindf(ds)?;
    Ok(hex(&Sha256::digest(bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json_line<W: Write, S: Serialize>(w: &mut W, value: &S) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn write_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => cmd_verify(a),
        Command::DumpEmbeddings(a) => cmd_dump_embeddings(a),
        Command::Ablate(a) => cmd_ablate(a),
    }
}

pub fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut spec: SyntheticSpec = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading spec {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing spec {}", p.display()))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(s) = a.common.seed {
        spec.seed = s;
    }
    let ds = generate_synthetic(&spec)?;
    let out = a.out.unwrap_or_else(|| {
        let name = if a.csv { "synthetic" } else { "synthetic.mndf" };
        a.common.out_dir.join(name)
    });
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    if a.csv {
        write_csv_dir(&out, &ds)?;
    } else {
        write_features(&out, &ds)?;
    }
    let file_name = out.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let manifest = RunManifest {
        tool: "mind".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "synth".into(),
        seed: spec.seed,
        config: RunConfig {
            data: DataSource {
                path: None,
                synthetic: Some(spec.clone()),
            },
            ..Default::default()
        },
        dataset: DatasetRecord {
            samples: ds.len(),
            sha256: dataset_sha256(&ds)?,
            source: DataSource {
                path: None,
                synthetic: Some(spec),
            },
        },
        artifacts: BTreeMap::from([("dataset".to_string(), file_name.clone())]),
    };
    let manifest_path = out.with_file_name(format!("{file_name}.manifest.json"));
    write_manifest(&manifest_path, &manifest)?;
    println!("wrote {} ({} samples) and {}", out.display(), ds.len(), manifest_path.display());
    Ok(())
}

/// Config for `train`/`ablate`: from a manifest or a config file, with
/// command-line overrides applied.
fn resolve_run(a: &RunArgs) -> Result<(RunConfig, Option<String>)> {
    let (mut cfg, expected_hash) = match (&a.manifest, &a.config) {
        (Some(m), _) => {
            let text = fs::read_to_string(m).with_context(|| format!("reading manifest {}", m.display()))?;
            let manifest: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", m.display()))?;
            (manifest.config, Some(manifest.dataset.sha256))
        }
        (None, Some(c)) => (RunConfig::load(c)?, None),
        (None, None) => bail!("either --config or --manifest is required"),
    };
    if let Some(s) = a.common.seed {
        cfg.train.seed = s;
    }
    for token in &a.ablate {
        cfg.train.ablation.apply(token)?;
    }
    cfg.train.validate()?;
    Ok((cfg, expected_hash))
}

fn load_checked(cfg: &RunConfig, expected_hash: Option<&str>) -> Result<(Dataset, String)> {
    let ds = cfg.load_dataset()?;
    let hash = dataset_sha256(&ds)?;
    if let Some(want) = expected_hash {
        if want != hash {
            bail!("dataset content changed since the manifest was written (sha256 {hash}, manifest has {want})");
        }
    }
    Ok((ds, hash))
}

pub fn cmd_train(a: RunArgs) -> Result<()> {
    let (cfg, expected) = resolve_run(&a)?;
    let (ds, hash) = load_checked(&cfg, expected.as_deref())?;
    let out = &a.common.out_dir;
    create_dir(out)?;

    let artifacts = BTreeMap::from(
        [
            ("checkpoint", "checkpoint.mndp"),
            ("losses", "losses.jsonl"),
            ("metrics", "metrics.jsonl"),
            ("report", "report.txt"),
        ]
        .map(|(k, v)| (k.to_string(), v.to_string())),
    );
    let manifest = RunManifest {
        tool: "mind".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "train".into(),
        seed: cfg.train.seed,
        config: cfg.clone(),
        dataset: DatasetRecord {
            samples: ds.len(),
            sha256: hash,
            source: cfg.data.clone(),
        },
        artifacts,
    };
    write_manifest(&out.join("manifest.json"), &manifest)?;

    let model_cfg = cfg.model.model_config(&ds);
    let losses_path = out.join("losses.jsonl");
    let mut losses = BufWriter::new(File::create(&losses_path).with_context(|| format!("creating {}", losses_path.display()))?);
    let mut log_err = None;
    let result = train_observed(&ds, &model_cfg, &cfg.train, &mut |rec| {
        if log_err.is_none() {
            log_err = write_json_line(&mut losses, rec).err();
        }
    });
    losses.flush()?;
    if let Some(e) = log_err {
        return Err(e.context("writing loss log"));
    }
    let outcome = match result {
        Ok(o) => o,
        Err(TrainError::Divergence {
            epoch,
            step,
            cause,
            last_good,
        }) => {
            let path = out.join("checkpoint.mndp");
            save_checkpoint(
                &path,
                &Checkpoint {
                    params: *last_good,
                    step: step - 1,
                    extra: Vec::new(),
                },
            )?;
            bail!(
                "training diverged at epoch {epoch}, step {step} ({cause}); last good parameters saved to {}",
                path.display()
            );
        }
        Err(e) => return Err(e.into()),
    };

    let ckpt = Checkpoint {
        extra: outcome.optimizer.to_groups(&outcome.params),
        step: outcome.optimizer.step,
        params: outcome.params.clone(),
    };
    save_checkpoint(out.join("checkpoint.mndp"), &ckpt)?;

    let probe = match probe_disentanglement(&outcome.params, &ds, outcome.seeds.noise) {
        Ok(p) => Some(p),
        Err(TrainError::UnsupportedProbe) => None,
        Err(e) => return Err(e.into()),
    };
    write_metrics(&out.join("metrics.jsonl"), &outcome, probe.as_ref())?;
    let report = format_report(&cfg, &outcome, probe.as_ref());
    fs::write(out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MetricsLine<'a> {
    Epoch(&'a crate::training::EpochRecord),
    Final {
        best_epoch: usize,
        epochs_run: usize,
        stopped_early: bool,
        valid: &'a MetricsReport,
        test: Option<&'a MetricsReport>,
        probe: Option<&'a ProbeReport>,
    },
}

fn write_metrics(path: &Path, o: &TrainOutcome, probe: Option<&ProbeReport>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for e in &o.history {
        write_json_line(&mut w, &MetricsLine::Epoch(e))?;
    }
    write_json_line(
        &mut w,
        &MetricsLine::Final {
            best_epoch: o.best_epoch,
            epochs_run: o.history.len(),
            stopped_early: o.stopped_early,
            valid: &o.valid,
            test: o.test.as_ref(),
            probe,
        },
    )?;
    w.flush()?;
    Ok(())
}

fn metric_cells(m: &MetricsReport) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| format!("{:>8}", "-"), |x| format!("{x:>8.4}"));
    format!(
        "{:<6}{:>6}{}{}{}{}{}{}",
        m.split.name(),
        m.n,
        f(m.mae),
        f(m.corr),
        f(m.acc7),
        f(m.acc2),
        f(m.f1),
        f(m.accuracy)
    )
}

pub fn format_report(cfg: &RunConfig, o: &TrainOutcome, probe: Option<&ProbeReport>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "seed {}  epochs run {}  best epoch {}{}",
        cfg.train.seed,
        o.history.len(),
        o.best_epoch,
        if o.stopped_early { "  (early stop)" } else { "" }
    );
    let _ = writeln!(
        s,
        "\n{:<6}{:>6}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}",
        "split", "n", "MAE", "Corr", "Acc-7", "Acc-2", "F1", "Acc"
    );
    let _ = writeln!(s, "{}", metric_cells(&o.valid));
    if let Some(t) = &o.test {
        let _ = writeln!(s, "{}", metric_cells(t));
    }
    if let Some(last) = o.history.last() {
        let b = &last.train;
        let _ = writeln!(
            s,
            "\nlast epoch mean losses: total {:.6} task {:.6} np {:.6} info {:.6} cons {:.6} diff {:.6} recon {:.6} cyr {:.6}",
            b.total, b.task, b.np, b.info, b.cons, b.diff, b.recon, b.cyr
        );
    }
    if let Some(p) = probe {
        let _ = writeln!(s, "\nprobe R² (held out)   {:>10}{:>10}", "shared", "private");
        for c in &p.components {
            let _ = writeln!(
                s,
                "  {}_{:<19}{:>10.4}{:>10.4}",
                c.component.tag(),
                c.modality,
                c.r2_shared,
                c.r2_private
            );
        }
        let _ = writeln!(
            s,
            "noise label probe accuracy {:.4} (majority rate {:.4})",
            p.noise_label_accuracy, p.majority_rate
        );
    }
    s
}

fn data_from(args: &DataArgs) -> Result<Dataset> {
    match (&args.data, &args.config) {
        (Some(p), _) => Ok(load_features(p).with_context(|| format!("loading dataset {}", p.display()))?),
        (None, Some(c)) => RunConfig::load(c)?.load_dataset(),
        (None, None) => bail!("either --data or --config is required"),
    }
}

fn load_params(path: &Path, ds: &Dataset) -> Result<ModelParams<f64>> {
    let ckpt = load_checkpoint::<f64>(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let cfg = ckpt.params.config();
    if cfg.input_dims != ds.input_dims() || cfg.task != ds.task() {
        bail!(
            "checkpoint expects input widths {:?} and task {:?}, dataset has {:?} and {:?}",
            cfg.input_dims,
            cfg.task,
            ds.input_dims(),
            ds.task()
        );
    }
    Ok(ckpt.params)
}

pub fn cmd_eval(a: EvalArgs) -> Result<()> {
    let ds = data_from(&a.data)?;
    let params = load_params(&a.checkpoint, &ds)?;
    let mut train_cfg = TrainConfig::default();
    for t in &a.ablate {
        train_cfg.ablation.apply(t)?;
    }
    let opts = train_cfg.forward_options(params.config().grl_scale);
    let report = evaluate(&params, &ds, a.split, &opts)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    let out = a
        .out
        .unwrap_or_else(|| a.common.out_dir.join(format!("eval_{}.json", a.split.name())));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(&out, &json).with_context(|| format!("writing {}", out.display()))?;
    print!("{json}");
    Ok(())
}

pub fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let settings = VerifySettings {
        seed: a.seed,
        ..Default::default()
    };
    let report = run_verify(&settings, &VerifyHooks::default());
    print!("{}", report.table());
    if !report.all_passed() {
        bail!("verification failed");
    }
    Ok(())
}

pub fn cmd_dump_embeddings(a: DumpArgs) -> Result<()> {
    let ds = data_from(&a.data)?;
    let params = load_params(&a.checkpoint, &ds)?;
    let seed = a.fixed_noise_seed.unwrap_or_else(rand::random);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = (0..ds.len()).collect();
    let emb = embed_rows(&params, &ds, &idx, &mut rng)?;
    let out = a.out.unwrap_or_else(|| a.common.out_dir.join("embeddings.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut w = csv::Writer::from_path(&out).with_context(|| format!("creating {}", out.display()))?;
    let d_k = params.config().d_k;
    let mut header = vec!["sample".to_string(), "split".into(), "modality".into(), "component".into(), "label".into()];
    header.extend((0..d_k).map(|j| format!("e{j}")));
    w.write_record(&header)?;
    for i in 0..ds.len() {
        for m in Modality::ALL {
            for (c, tag) in ["S", "P", "N"].iter().enumerate() {
                let mut rec = vec![
                    i.to_string(),
                    ds.splits[i].name().to_string(),
                    m.to_string(),
                    tag.to_string(),
                    ds.labels.value(i).to_string(),
                ];
                rec.extend(emb[c][m.index()].row(i).iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    println!("wrote {} rows to {} (noise seed {seed})", 9 * ds.len(), out.display());
    Ok(())
}

pub fn cmd_ablate(a: RunArgs) -> Result<()> {
    let (cfg, expected) = resolve_run(&a)?;
    let (ds, hash) = load_checked(&cfg, expected.as_deref())?;
    let out = &a.common.out_dir;
    create_dir(out)?;
    let artifacts = BTreeMap::from(
        [("rows", "ablation.jsonl"), ("table", "ablation.txt")].map(|(k, v)| (k.to_string(), v.to_string())),
    );
    let manifest = RunManifest {
        tool: "mind".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "ablate".into(),
        seed: cfg.train.seed,
        config: cfg.clone(),
        dataset: DatasetRecord {
            samples: ds.len(),
            sha256: hash,
            source: cfg.data.clone(),
        },
        artifacts,
    };
    write_manifest(&out.join("manifest.json"), &manifest)?;

    let model_cfg = cfg.model.model_config(&ds);
    let rows_path = out.join("ablation.jsonl");
    let mut rows = BufWriter::new(File::create(&rows_path).with_context(|| format!("creating {}", rows_path.display()))?);
    let mut log_err = None;
    let results = run_ablation_suite(&ds, &model_cfg, &cfg.train, &AblationRow::all(), &mut |r| {
        eprintln!("finished {}", r.label);
        if log_err.is_none() {
            log_err = write_json_line(&mut rows, r).and_then(|_| Ok(rows.flush()?)).err();
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.context("writing ablation rows"));
    }
    let table = format_ablation_table(&results);
    fs::write(out.join("ablation.txt"), &table)?;
    print!("{table}");
    Ok(())
}

//! The ablation grid: the full model, each modality removed, each fusion
//! component muted, a non-disentangled baseline, each auxiliary loss removed,
//! and the task loss alone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::MetricsReport;
use super::train::train;
use super::{AblationFlags, TrainConfig, TrainError};
use crate::data::Dataset;
use crate::losses::LossTerm;
use crate::nn::{Modality, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationGroup {
    Full,
    Modality,
    Disentanglement,
    Constraint,
}

impl AblationGroup {
    pub fn title(self) -> &'static str {
        match self {
            AblationGroup::Full => "",
            AblationGroup::Modality => "Role of Modality",
            AblationGroup::Disentanglement => "Role of Disentanglement",
            AblationGroup::Constraint => "Role of Constraint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationRow {
    Full,
    WithoutModality(Modality),
    WithoutInvariant,
    WithoutSpecific,
    NonDisentangled,
    WithoutLoss(LossTerm),
    OnlyTask,
}

impl AblationRow {
    /// The default grid, in report order.
    pub fn all() -> Vec<AblationRow> {
        let mut rows = vec![AblationRow::Full];
        rows.extend(Modality::ALL.map(AblationRow::WithoutModality));
        rows.extend([
            AblationRow::WithoutInvariant,
            AblationRow::WithoutSpecific,
            AblationRow::NonDisentangled,
        ]);
        rows.extend(
            [
                LossTerm::Info,
                LossTerm::Cons,
                LossTerm::Diff,
                LossTerm::Recon,
                LossTerm::Cyr,
                LossTerm::NoisePred,
            ]
            .map(AblationRow::WithoutLoss),
        );
        rows.push(AblationRow::OnlyTask);
        rows
    }

    pub fn group(self) -> AblationGroup {
        match self {
            AblationRow::Full => AblationGroup::Full,
            AblationRow::WithoutModality(_) => AblationGroup::Modality,
            AblationRow::WithoutInvariant | AblationRow::WithoutSpecific | AblationRow::NonDisentangled => {
                AblationGroup::Disentanglement
            }
            AblationRow::WithoutLoss(_) | AblationRow::OnlyTask => AblationGroup::Constraint,
        }
    }

    pub fn label(self) -> String {
        match self {
            AblationRow::Full => "MInD".into(),
            AblationRow::WithoutModality(m) => format!(
                "w/o {}",
                match m {
                    Modality::Visual => "Visual",
                    Modality::Acoustic => "Audio",
                    Modality::Text => "Text",
                }
            ),
            AblationRow::WithoutInvariant => "w/o M-Invariant".into(),
            AblationRow::WithoutSpecific => "w/o M-Specific".into(),
            AblationRow::NonDisentangled => "Non-Disentangled".into(),
            AblationRow::WithoutLoss(t) => format!("w/o L_{}", loss_label(t)),
            AblationRow::OnlyTask => "Only L_Task".into(),
        }
    }

    /// CLI `--ablate` tokens that reproduce this row.
    pub fn tokens(self) -> Vec<String> {
        match self {
            AblationRow::Full => vec![],
            AblationRow::WithoutModality(m) => vec![format!("drop-{m}")],
            AblationRow::WithoutInvariant => vec!["mute-invariant".into()],
            AblationRow::WithoutSpecific => vec!["mute-specific".into()],
            AblationRow::NonDisentangled => vec!["non-disentangled".into(), "only-task".into()],
            AblationRow::WithoutLoss(t) => vec![format!("no-{t}")],
            AblationRow::OnlyTask => vec!["only-task".into()],
        }
    }

    /// `base` with this row's switches added.
    pub fn apply(self, base: &AblationFlags) -> AblationFlags {
        let mut flags = base.clone();
        for t in self.tokens() {
            flags.apply(&t).expect("row tokens are valid");
        }
        flags
    }
}

fn loss_label(t: LossTerm) -> &'static str {
    match t {
        LossTerm::Task => "Task",
        LossTerm::NoisePred => "NP",
        LossTerm::Info => "Info",
        LossTerm::Cons => "Cons",
        LossTerm::Diff => "Diff",
        LossTerm::Recon => "Recon",
        LossTerm::Cyr => "CyR",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub row: AblationRow,
    pub label: String,
    pub seed: u64,
    pub ablation: AblationFlags,
    pub valid: MetricsReport,
    pub test: Option<MetricsReport>,
}

/// Trains every row of `rows` on the same data. All rows share the master
/// seed, so they start from identical initial parameters and see identical
/// batch orders; differences are due to the ablation alone.
pub fn run_ablation_suite(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    base: &TrainConfig,
    rows: &[AblationRow],
    on_row: &mut dyn FnMut(&AblationResult),
) -> Result<Vec<AblationResult>, TrainError> {
    let mut out = Vec::with_capacity(rows.len());
    for &row in rows {
        let cfg = TrainConfig {
            ablation: row.apply(&base.ablation),
            ..base.clone()
        };
        let outcome = train(ds, model_cfg, &cfg)?;
        let result = AblationResult {
            row,
            label: row.label(),
            seed: cfg.seed,
            ablation: cfg.ablation,
            valid: outcome.valid,
            test: outcome.test,
        };
        on_row(&result);
        out.push(result);
    }
    Ok(out)
}

fn cell(v: Option<f64>, pct: bool) -> String {
    match v {
        Some(x) if pct => format!("{:>8.2}", 100.0 * x),
        Some(x) => format!("{x:>8.3}"),
        None => format!("{:>8}", "-"),
    }
}

/// Text table with one group header per block.
pub fn format_ablation_table(results: &[AblationResult]) -> String {
    let mut s = String::new();
    let regression = results.first().is_some_and(|r| r.valid.mae.is_some());
    let header = if regression {
        format!(
            "{:<20}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}",
            "Model", "vMAE", "MAE", "Corr", "Acc-7", "Acc-2", "F1"
        )
    } else {
        format!("{:<20}{:>8}{:>8}{:>8}", "Model", "vAcc", "Acc", "F1")
    };
    let rule = "-".repeat(header.len());
    let _ = writeln!(s, "{header}\n{rule}");
    let mut group = None;
    for r in results {
        let g = r.row.group();
        if group != Some(g) && g != AblationGroup::Full {
            let _ = writeln!(s, "{rule}\n{:^w$}\n{rule}", g.title(), w = rule.len());
        }
        group = Some(g);
        let t = r.test.as_ref();
        let field = |f: fn(&MetricsReport) -> Option<f64>| t.and_then(f);
        let line = if regression {
            format!(
                "{:<20}{}{}{}{}{}{}",
                r.label,
                cell(r.valid.mae, false),
                cell(field(|m| m.mae), false),
                cell(field(|m| m.corr), false),
                cell(field(|m| m.acc7), true),
                cell(field(|m| m.acc2), true),
                cell(field(|m| m.f1), true),
            )
        } else {
            let acc = |m: &MetricsReport| m.acc2.or(m.accuracy);
            format!(
                "{:<20}{}{}{}",
                r.label,
                cell(acc(&r.valid), true),
                cell(t.and_then(acc), true),
                cell(field(|m| m.f1), true),
            )
        };
        let _ = writeln!(s, "{line}");
    }
    s
}

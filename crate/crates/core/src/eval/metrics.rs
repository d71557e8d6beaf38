//! Zero-shot classification and group-robustness metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Class prompts and their embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub class_names: Vec<String>,
    pub embeddings: Matrix,
}

impl PromptSet {
    pub fn new(class_names: Vec<String>, embeddings: Matrix) -> Result<Self> {
        if class_names.len() < 2 || class_names.len() != embeddings.nrows() {
            return Err(Error::Dimension(format!(
                "need at least 2 classes with one embedding each, got {} names and {} rows",
                class_names.len(),
                embeddings.nrows()
            )));
        }
        if let Some(i) = (0..embeddings.nrows()).find(|&i| embeddings.row(i).norm() <= 1e-12) {
            return Err(Error::ZeroNormRow(i));
        }
        Ok(PromptSet {
            class_names,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_names.is_empty()
    }
}

/// Predict, for each row of `e`, the prompt with the highest cosine
/// similarity. Ties go to the lower class index.
pub fn zero_shot_predict(e: &Matrix, prompts: &PromptSet) -> Result<Vec<usize>> {
    if e.ncols() != prompts.embeddings.ncols() {
        return Err(Error::Dimension(format!(
            "embedding width {} does not match prompt width {}",
            e.ncols(),
            prompts.embeddings.ncols()
        )));
    }
    let prompt_norms: Vec<f64> = prompts.embeddings.row_iter().map(|r| r.norm()).collect();
    let sims = e * prompts.embeddings.transpose();
    (0..e.nrows())
        .map(|i| {
            let norm = e.row(i).norm();
            if norm <= 1e-12 {
                return Err(Error::ZeroNormRow(i));
            }
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for (c, pn) in prompt_norms.iter().enumerate() {
                let s = sims[(i, c)] / (norm * pn);
                if s > best_sim {
                    best = c;
                    best_sim = s;
                }
            }
            Ok(best)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub n: usize,
    pub acc: f64,
}

/// Accuracy overall and per group, plus class-level summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    /// Fraction of all samples classified correctly.
    pub avg_acc: f64,
    pub worst_group_acc: f64,
    pub gap: f64,
    /// Unweighted mean of per-group accuracies.
    pub balanced_acc: f64,
    pub per_group: BTreeMap<String, GroupStat>,
    pub micro_f1: f64,
    pub macro_recall: f64,
}

/// Accuracy metrics for single-label predictions.
///
/// Without groups, the worst group is the whole sample. Micro-F1 equals
/// accuracy in the single-label setting. Macro-recall averages per-class
/// recall over classes that occur in `labels`; predicted classes without
/// ground-truth instances are skipped with a warning.
pub fn group_metrics(preds: &[usize], labels: &[usize], groups: Option<&[String]>) -> Result<GroupMetrics> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    if preds.len() != labels.len() || groups.is_some_and(|g| g.len() != preds.len()) {
        return Err(Error::Dimension("predictions, labels and groups must have equal length".into()));
    }
    let n = preds.len();
    let correct: Vec<bool> = preds.iter().zip(labels).map(|(p, l)| p == l).collect();
    let avg_acc = correct.iter().filter(|&&c| c).count() as f64 / n as f64;

    let mut per_class: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&l, &c) in labels.iter().zip(&correct) {
        let e = per_class.entry(l).or_default();
        e.0 += 1;
        e.1 += c as usize;
    }
    let orphan = preds.iter().filter(|p| !per_class.contains_key(p)).count();
    if orphan > 0 {
        log::warn!("{orphan} predictions name classes absent from the labels; excluded from macro-recall");
    }
    let macro_recall =
        per_class.values().map(|&(m, c)| c as f64 / m as f64).sum::<f64>() / per_class.len() as f64;

    let mut per_group = BTreeMap::new();
    if let Some(groups) = groups {
        let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (g, &c) in groups.iter().zip(&correct) {
            let e = counts.entry(g.as_str()).or_default();
            e.0 += 1;
            e.1 += c as usize;
        }
        for (g, (m, c)) in counts {
            per_group.insert(
                g.to_string(),
                GroupStat {
                    n: m,
                    acc: c as f64 / m as f64,
                },
            );
        }
    }
    let (worst_group_acc, balanced_acc) = if per_group.is_empty() {
        (avg_acc, avg_acc)
    } else {
        let accs = per_group.values().map(|s| s.acc);
        (
            accs.clone().fold(f64::INFINITY, f64::min),
            accs.sum::<f64>() / per_group.len() as f64,
        )
    };
    Ok(GroupMetrics {
        avg_acc,
        worst_group_acc,
        gap: avg_acc - worst_group_acc,
        balanced_acc,
        per_group,
        micro_f1: avg_acc,
        macro_recall,
    })
}

/// Markdown table with columns Avg, WG, Gap, Acc, mF1, MRec (in percent).
/// `Acc` is the balanced (per-group mean) accuracy.
pub fn metrics_table(rows: &[(String, GroupMetrics)]) -> String {
    let mut s = String::from("| method | Avg | WG | Gap | Acc | mF1 | MRec |\n|---|---|---|---|---|---|---|\n");
    for (name, m) in rows {
        let _ = writeln!(
            s,
            "| {name} | {:.1} | {:.1} | {:.1} | {:.1} | {:.1} | {:.1} |",
            100.0 * m.avg_acc,
            100.0 * m.worst_group_acc,
            100.0 * m.gap,
            100.0 * m.balanced_acc,
            100.0 * m.micro_f1,
            100.0 * m.macro_recall
        );
    }
    s
}

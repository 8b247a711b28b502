//! Chunk-level precision/recall/F1 with per-type breakdown.
//!
//! A predicted chunk counts as correct only when its type, start, and end
//! all match a gold chunk exactly. Chunks come from the IOB2 decoder,
//! including its lenient handling of `I-X` with no open chunk, which keeps
//! the numbers in line with the standard CoNLL evaluation script.

use crate::corpus::{iob2_decode, LabeledSentence, Span};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

/// Gold/predicted/correct chunk counts for one entity type (or overall).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChunkCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl ChunkCounts {
    /// Precision as a percentage; 0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.predicted as f64
        }
    }

    /// Recall as a percentage; 0 when there are no gold chunks.
    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.gold as f64
        }
    }

    /// F1 = 2PR/(P+R), or 0 when P+R = 0.
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Evaluation result: overall and per-type chunk metrics plus token accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: ChunkCounts,
    /// Per entity type, ordered alphabetically.
    pub per_type: Vec<(String, ChunkCounts)>,
    pub token_correct: usize,
    pub token_total: usize,
}

impl EvalReport {
    /// Fraction of tokens whose predicted tag string equals the gold tag,
    /// as a percentage.
    pub fn token_accuracy(&self) -> f64 {
        if self.token_total == 0 {
            0.0
        } else {
            100.0 * self.token_correct as f64 / self.token_total as f64
        }
    }
}

/// Compares predictions against gold sentences chunk by chunk.
pub fn evaluate<S: AsRef<str>>(
    gold: &[LabeledSentence],
    predicted: &[Vec<S>],
) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::Data(format!(
            "gold has {} sentences, predictions have {}",
            gold.len(),
            predicted.len()
        )));
    }
    let mut overall = ChunkCounts::default();
    let mut per_type: BTreeMap<String, ChunkCounts> = BTreeMap::new();
    let mut token_correct = 0;
    let mut token_total = 0;

    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Data(format!(
                "sentence {i}: {} gold tags but {} predicted",
                g.len(),
                p.len()
            )));
        }
        token_total += g.len();
        token_correct += g
            .tags()
            .iter()
            .zip(p.iter())
            .filter(|(gt, pt)| gt.as_str() == pt.as_ref())
            .count();

        let gold_spans = iob2_decode(g.tags());
        let pred_spans = iob2_decode(p);
        let gold_set: HashSet<&Span> = gold_spans.iter().collect();

        for span in &gold_spans {
            overall.gold += 1;
            per_type.entry(span.entity_type.clone()).or_default().gold += 1;
        }
        for span in &pred_spans {
            overall.predicted += 1;
            let entry = per_type.entry(span.entity_type.clone()).or_default();
            entry.predicted += 1;
            if gold_set.contains(span) {
                overall.correct += 1;
                entry.correct += 1;
            }
        }
    }

    Ok(EvalReport {
        overall,
        per_type: per_type.into_iter().collect(),
        token_correct,
        token_total,
    })
}

/// Renders one row per named report with Prec./Rec./F1 columns; with
/// `per_type` set, renders one row per entity type plus Overall, with a
/// column group per report.
pub fn report_table(named: &[(&str, &EvalReport)], per_type: bool) -> String {
    assert!(!named.is_empty(), "need at least one report");
    if per_type {
        per_type_table(named)
    } else {
        overall_table(named)
    }
}

fn overall_table(named: &[(&str, &EvalReport)]) -> String {
    let name_width = named
        .iter()
        .map(|(n, _)| n.len())
        .max()
        .unwrap()
        .max("System".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>7}  {:>7}  {:>7}",
        "System", "Prec.", "Rec.", "F1"
    );
    for (name, report) in named {
        let c = report.overall;
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>7.2}  {:>7.2}  {:>7.2}",
            name,
            c.precision(),
            c.recall(),
            c.f1()
        );
    }
    out
}

fn per_type_table(named: &[(&str, &EvalReport)]) -> String {
    let mut types: Vec<&str> = Vec::new();
    for (_, report) in named {
        for (ty, _) in &report.per_type {
            if !types.contains(&ty.as_str()) {
                types.push(ty);
            }
        }
    }
    types.sort_unstable();

    let type_width = types
        .iter()
        .map(|t| t.len())
        .chain(["Overall".len(), "Entity".len()])
        .max()
        .unwrap();
    let mut out = String::new();
    let _ = write!(out, "{:<type_width$}", "Entity");
    for (name, _) in named {
        let _ = write!(out, "  {:>25}", name);
    }
    let _ = writeln!(out);
    let _ = write!(out, "{:<type_width$}", "");
    for _ in named {
        let _ = write!(out, "  {:>7}  {:>7}  {:>7}", "Prec.", "Rec.", "F1");
    }
    let _ = writeln!(out);
    for ty in &types {
        let _ = write!(out, "{:<type_width$}", ty);
        for (_, report) in named {
            let counts = report
                .per_type
                .iter()
                .find(|(t, _)| t == ty)
                .map(|(_, c)| *c)
                .unwrap_or_default();
            let _ = write!(
                out,
                "  {:>7.2}  {:>7.2}  {:>7.2}",
                counts.precision(),
                counts.recall(),
                counts.f1()
            );
        }
        let _ = writeln!(out);
    }
    let _ = write!(out, "{:<type_width$}", "Overall");
    for (_, report) in named {
        let c = report.overall;
        let _ = write!(
            out,
            "  {:>7.2}  {:>7.2}  {:>7.2}",
            c.precision(),
            c.recall(),
            c.f1()
        );
    }
    let _ = writeln!(out);
    out
}

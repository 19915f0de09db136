//! Evaluation reports: key/value records, a flat TSV table and a
//! human-readable results table.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{ClassificationReport, ClassifierModel, EvalReport};
use crate::graph::KnowledgeGraph;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub records: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Aligned text table for people; not parsed back.
    pub display: String,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.records.push((key.into(), value.to_string()));
    }

    pub fn extend(&mut self, records: &[(String, String)]) {
        self.records.extend_from_slice(records);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.records.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// One `key = value` line per record.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.records {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.txt` (records then the display table) and `<stem>.tsv`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        let tsv = dir.join(format!("{stem}.tsv"));
        let mut text = self.to_kv();
        if !self.display.is_empty() {
            text.push('\n');
            text.push_str(&self.display);
        }
        fs::write(&txt, text).map_err(|e| Error::io(&txt, e))?;
        fs::write(&tsv, self.to_tsv()).map_err(|e| Error::io(&tsv, e))?;
        Ok([txt, tsv])
    }
}

/// Dataset fingerprints: vocabulary hash, split sizes and split checksums.
pub fn dataset_provenance(graph: &KnowledgeGraph) -> Vec<(String, String)> {
    vec![
        ("dataset.vocab_hash".into(), graph.vocab_hash()),
        ("dataset.concepts".into(), graph.num_concepts().to_string()),
        ("dataset.relations".into(), graph.num_relations().to_string()),
        ("dataset.train".into(), graph.train().len().to_string()),
        ("dataset.valid".into(), graph.valid().len().to_string()),
        ("dataset.test".into(), graph.test().len().to_string()),
        ("dataset.train_sha256".into(), graph.checksum(graph.train())),
        ("dataset.valid_sha256".into(), graph.checksum(graph.valid())),
        ("dataset.test_sha256".into(), graph.checksum(graph.test())),
    ]
}

pub fn link_prediction_report(
    model: &str,
    setting: &str,
    score_mode: &str,
    eval: &EvalReport,
    provenance: &[(String, String)],
) -> Report {
    let mut r = Report::new();
    r.push("task", eval.task);
    r.push("model", model);
    r.push("setting", setting);
    r.push("score_mode", score_mode);
    r.push("n_test", eval.n_test);
    r.push("n_rankings", eval.n_rankings);
    r.push("mean_rank_raw", eval.mean_rank_raw);
    r.push("mean_rank_filtered", eval.mean_rank_filtered);
    r.push("hits10_raw", eval.hits10_raw);
    r.push("hits10_filtered", eval.hits10_filtered);
    r.extend(provenance);

    r.header = [
        "model",
        "setting",
        "task",
        "score_mode",
        "n_test",
        "mean_rank_raw",
        "mean_rank_filtered",
        "hits10_raw",
        "hits10_filtered",
    ]
    .map(String::from)
    .to_vec();
    r.rows.push(vec![
        model.to_string(),
        setting.to_string(),
        eval.task.to_string(),
        score_mode.to_string(),
        eval.n_test.to_string(),
        eval.mean_rank_raw.to_string(),
        eval.mean_rank_filtered.to_string(),
        eval.hits10_raw.to_string(),
        eval.hits10_filtered.to_string(),
    ]);
    r.display = render_link_table(&[(model, setting, eval)]);
    r
}

/// Mean rank and Hits@10, raw and filtered, one row per model.
pub fn render_link_table(rows: &[(&str, &str, &EvalReport)]) -> String {
    let width = rows.iter().map(|(m, _, _)| m.len()).max().unwrap_or(0).max(5) + 2;
    let mut out = String::new();
    let _ = writeln!(out, "{:width$}{:>9}{:>10} |{:>10}{:>10}", "", "Mean Rank", "", "Hits@10(%)", "");
    let _ = writeln!(out, "{:width$}{:>9}{:>10} |{:>10}{:>10}  Setting", "Model", "Raw", "Filter", "Raw", "Filter");
    for (model, setting, e) in rows {
        let _ = writeln!(
            out,
            "{model:width$}{:>9.1}{:>10.1} |{:>9.2}%{:>9.2}%  {setting}",
            e.mean_rank_raw, e.mean_rank_filtered, e.hits10_raw, e.hits10_filtered
        );
    }
    out
}

pub fn classification_report(
    model: &str,
    setting: &str,
    score_mode: &str,
    graph: &KnowledgeGraph,
    classifier: &ClassifierModel,
    test: &ClassificationReport,
    provenance: &[(String, String)],
) -> Report {
    let mut r = Report::new();
    r.push("task", "classify");
    r.push("model", model);
    r.push("setting", setting);
    r.push("score_mode", score_mode);
    r.push("n_test", test.n);
    r.push("correct", test.correct);
    r.push("accuracy", test.accuracy);
    r.push("accuracy_valid", classifier.accuracy_valid);
    r.push("fallback_delta", classifier.fallback.delta);
    for (rel, th) in &classifier.thresholds {
        r.push(format!("delta.{}", graph.relations().label(rel.0)), th.delta);
    }
    let flagged: Vec<&str> = classifier
        .flagged()
        .iter()
        .map(|rel| graph.relations().label(rel.0))
        .collect();
    r.push("single_label_relations", flagged.join(","));
    r.extend(provenance);

    r.header = [
        "relation",
        "delta",
        "valid_accuracy",
        "single_label",
        "test_correct",
        "test_total",
        "test_accuracy",
    ]
    .map(String::from)
    .to_vec();
    for (rel, &(correct, total)) in &test.per_relation {
        let th = classifier.thresholds.get(rel).unwrap_or(&classifier.fallback);
        let seen = classifier.thresholds.contains_key(rel);
        r.rows.push(vec![
            graph.relations().label(rel.0).to_string(),
            th.delta.to_string(),
            if seen { th.accuracy.to_string() } else { "NA".into() },
            th.single_label.to_string(),
            correct.to_string(),
            total.to_string(),
            (correct as f64 / total as f64).to_string(),
        ]);
    }
    r.display = render_classification_table(&[(model, setting, test.accuracy)]);
    r
}

/// Accuracy (%) per model and setting.
pub fn render_classification_table(rows: &[(&str, &str, f64)]) -> String {
    let width = rows.iter().map(|(m, _, _)| m.len()).max().unwrap_or(0).max(5) + 2;
    let mut out = String::new();
    let _ = writeln!(out, "{:width$}{:>10}  Setting", "Model", "Accuracy");
    for (model, setting, acc) in rows {
        let _ = writeln!(out, "{model:width$}{:>10.2}  {setting}", acc * 100.0);
    }
    out
}

//! On-disk artifact formats shared by the subcommands.
//!
//! Every artifact embeds the resolved run configuration: JSON documents get
//! a `meta` object, JSONL files get a meta header line, and CSV files get
//! `#`-prefixed comment lines. All outputs are UTF-8 with LF endings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use budgetalloc::dataset::BudgetSet;
use budgetalloc::features::{FeatureVector, FEATURE_NAMES};
use budgetalloc::{Error, Result};

/// Reproducibility header: the subcommand, its seed, and every resolved
/// parameter (flags merged over config-file values over defaults).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
}

impl RunMeta {
    pub fn new(subcommand: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        Self {
            tool: "budgetalloc".into(),
            subcommand: subcommand.into(),
            seed,
            config,
        }
    }

    /// One-line `key=value` rendering for CSV comment headers.
    pub fn comment_line(&self) -> String {
        let pairs: Vec<String> = self
            .config
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!(
            "tool={} subcommand={} seed={} {}",
            self.tool,
            self.subcommand,
            self.seed,
            pairs.join(" ")
        )
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Compact single-line JSON for bulky parameter dumps.
pub fn write_json_compact(path: &Path, value: &Value) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Labels artifact: budget indices plus the budget set they index into.
pub fn write_labels(
    path: &Path,
    meta: &RunMeta,
    budget_set: &BudgetSet,
    labels: &[usize],
) -> Result<()> {
    let levels: Vec<u32> = labels.iter().map(|&k| budget_set.level(k)).collect();
    write_json(
        path,
        &json!({
            "meta": meta,
            "budgets": budget_set.levels(),
            "costs": budget_set.costs(),
            "labels": labels,
            "levels": levels,
        }),
    )
}

#[derive(Deserialize)]
struct LabelsFile {
    labels: Vec<usize>,
    #[serde(default)]
    budgets: Option<Vec<u32>>,
    #[serde(default)]
    costs: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct PredictionRow {
    budget_index: usize,
}

/// Read labels from a labels JSON document or from prediction JSONL rows.
pub fn read_labels(path: &Path) -> Result<(Vec<usize>, Option<BudgetSet>)> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(file) = serde_json::from_str::<LabelsFile>(&text) {
        let set = match (file.budgets, file.costs) {
            (Some(levels), Some(costs)) => Some(BudgetSet::new(levels, costs)?),
            (Some(levels), None) => Some(BudgetSet::identity(levels)?),
            _ => None,
        };
        return Ok((file.labels, set));
    }
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if value.get("meta").is_some() && value.get("budget_index").is_none() {
            continue; // header line
        }
        let row: PredictionRow = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("expected a labels document or prediction rows: {e}"),
        })?;
        labels.push(row.budget_index);
    }
    if labels.is_empty() {
        return Err(Error::Schema(format!(
            "{} holds neither a labels document nor prediction rows",
            path.display()
        )));
    }
    Ok((labels, None))
}

#[derive(Serialize, Deserialize)]
struct FeatureRow {
    question_id: String,
    features: Vec<f64>,
}

/// Feature vectors as JSONL with a meta header line.
pub fn write_features(
    path: &Path,
    meta: &RunMeta,
    ids: &[String],
    features: &[FeatureVector],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = json!({ "feature_names": FEATURE_NAMES, "meta": meta });
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for (id, f) in ids.iter().zip(features) {
        let row = FeatureRow {
            question_id: id.clone(),
            features: f.as_slice().to_vec(),
        };
        writeln!(out, "{}", serde_json::to_string(&row)?)?;
    }
    Ok(())
}

/// Read a feature JSONL file (meta header optional).
pub fn read_features(path: &Path) -> Result<(Vec<String>, Vec<FeatureVector>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut ids = Vec::new();
    let mut features = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if value.get("feature_names").is_some() {
            continue; // header line
        }
        let row: FeatureRow = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if row.features.len() != FEATURE_NAMES.len() {
            return Err(Error::Schema(format!(
                "line {}: {} feature values, expected {}",
                idx + 1,
                row.features.len(),
                FEATURE_NAMES.len()
            )));
        }
        let mut values = [0.0; 16];
        values.copy_from_slice(&row.features);
        ids.push(row.question_id);
        features.push(FeatureVector::new(values));
    }
    if features.is_empty() {
        return Err(Error::Schema(format!(
            "{} holds no feature rows",
            path.display()
        )));
    }
    Ok((ids, features))
}

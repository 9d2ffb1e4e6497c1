//! Utility-table ingestion and self-consistency utility estimation.
//!
//! The pipeline's only view of the underlying model is an `N x K` table of
//! estimated accuracies, one row per question and one column per budget
//! level. Tables are either loaded directly (JSONL or CSV) or estimated from
//! recorded responses by majority voting over non-overlapping windows.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of budget levels.
pub const MAX_BUDGET_LEVELS: usize = 64;

/// Ordered set of budget levels with their costs.
///
/// Levels are positive integers (e.g. number of sampled responses), strictly
/// increasing; costs are non-negative and non-decreasing with the level. The
/// default cost function is the identity `C(b) = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSet {
    levels: Vec<u32>,
    costs: Vec<f64>,
}

impl BudgetSet {
    /// Budget set with explicit per-level costs.
    pub fn new(levels: Vec<u32>, costs: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() > MAX_BUDGET_LEVELS {
            return Err(Error::Validation(format!(
                "budget set must have 1..={} levels, got {}",
                MAX_BUDGET_LEVELS,
                levels.len()
            )));
        }
        if levels.len() != costs.len() {
            return Err(Error::Validation(format!(
                "levels ({}) and costs ({}) differ in length",
                levels.len(),
                costs.len()
            )));
        }
        if levels[0] == 0 {
            return Err(Error::Validation("budget levels must be positive".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "budget levels must be strictly increasing".into(),
            ));
        }
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Validation(
                "costs must be finite and non-negative".into(),
            ));
        }
        if costs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Validation(
                "costs must be non-decreasing with level".into(),
            ));
        }
        Ok(Self { levels, costs })
    }

    /// Budget set with identity costs `C(b) = b`.
    pub fn identity(levels: Vec<u32>) -> Result<Self> {
        let costs = levels.iter().map(|&b| b as f64).collect();
        Self::new(levels, costs)
    }

    /// Number of budget levels `K`.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Cost of the budget at index `k`.
    pub fn cost(&self, k: usize) -> f64 {
        self.costs[k]
    }

    /// Level value of the budget at index `k`.
    pub fn level(&self, k: usize) -> u32 {
        self.levels[k]
    }

    /// Cost of the cheapest budget.
    pub fn min_cost(&self) -> f64 {
        self.costs[0]
    }

    /// Cost of the most expensive budget.
    pub fn max_cost(&self) -> f64 {
        *self.costs.last().unwrap()
    }

    /// `C(b_K) - C(b_1)`, the worst-case per-instance cost swing.
    pub fn cost_span(&self) -> f64 {
        self.max_cost() - self.min_cost()
    }
}

/// The `N x K` accuracy matrix plus question metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    question_ids: Vec<String>,
    acc: Vec<Vec<f64>>,
    budget_set: BudgetSet,
    difficulty_tags: Option<Vec<String>>,
    question_texts: Option<Vec<String>>,
    entropy_estimates: Option<Vec<f64>>,
}

impl UtilityTable {
    pub fn new(
        question_ids: Vec<String>,
        acc: Vec<Vec<f64>>,
        budget_set: BudgetSet,
    ) -> Result<Self> {
        let table = Self {
            question_ids,
            acc,
            budget_set,
            difficulty_tags: None,
            question_texts: None,
            entropy_estimates: None,
        };
        table.validate()?;
        Ok(table)
    }

    /// Attach one difficulty tag per question.
    pub fn with_difficulty_tags(mut self, tags: Vec<String>) -> Result<Self> {
        if tags.len() != self.len() {
            return Err(Error::Validation(format!(
                "difficulty tags ({}) do not match question count ({})",
                tags.len(),
                self.len()
            )));
        }
        self.difficulty_tags = Some(tags);
        Ok(self)
    }

    /// Attach one question text per question.
    pub fn with_question_texts(mut self, texts: Vec<String>) -> Result<Self> {
        if texts.len() != self.len() {
            return Err(Error::Validation(format!(
                "question texts ({}) do not match question count ({})",
                texts.len(),
                self.len()
            )));
        }
        self.question_texts = Some(texts);
        Ok(self)
    }

    /// Attach one pre-computed entropy estimate per question (a cheap
    /// uncertainty signal carried through to feature extraction).
    pub fn with_entropy_estimates(mut self, entropies: Vec<f64>) -> Result<Self> {
        if entropies.len() != self.len() {
            return Err(Error::Validation(format!(
                "entropy estimates ({}) do not match question count ({})",
                entropies.len(),
                self.len()
            )));
        }
        if entropies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Validation(
                "entropy estimates must be finite".into(),
            ));
        }
        self.entropy_estimates = Some(entropies);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.question_ids.is_empty() {
            return Err(Error::Validation("table must have at least one row".into()));
        }
        if self.acc.len() != self.question_ids.len() {
            return Err(Error::Validation(format!(
                "{} accuracy rows for {} question ids",
                self.acc.len(),
                self.question_ids.len()
            )));
        }
        let k = self.budget_set.len();
        for (i, row) in self.acc.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Schema(format!(
                    "row {} has {} accuracy columns, expected {}",
                    i + 1,
                    row.len(),
                    k
                )));
            }
            for (j, &a) in row.iter().enumerate() {
                if !a.is_finite() || !(0.0..=1.0).contains(&a) {
                    return Err(Error::Validation(format!(
                        "accuracy {} out of [0,1] at row {}, budget column {}",
                        a,
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of questions `N`.
    pub fn len(&self) -> usize {
        self.question_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.question_ids.is_empty()
    }

    pub fn num_budgets(&self) -> usize {
        self.budget_set.len()
    }

    pub fn budget_set(&self) -> &BudgetSet {
        &self.budget_set
    }

    pub fn question_ids(&self) -> &[String] {
        &self.question_ids
    }

    pub fn difficulty_tags(&self) -> Option<&[String]> {
        self.difficulty_tags.as_deref()
    }

    pub fn question_texts(&self) -> Option<&[String]> {
        self.question_texts.as_deref()
    }

    pub fn entropy_estimates(&self) -> Option<&[f64]> {
        self.entropy_estimates.as_deref()
    }

    /// Accuracy row for question `i`.
    pub fn acc_row(&self, i: usize) -> &[f64] {
        &self.acc[i]
    }

    /// `Acc(x_i, b_k)`.
    pub fn acc(&self, i: usize, k: usize) -> f64 {
        self.acc[i][k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.acc.iter().map(|r| r.as_slice())
    }

    /// Sub-table restricted to the given row indices (order preserved).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Validation("subset must keep at least one row".into()));
        }
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Validation(format!(
                    "subset index {} out of range ({} rows)",
                    i,
                    self.len()
                )));
            }
        }
        let pick_str = |v: &Option<Vec<String>>| {
            v.as_ref()
                .map(|v| indices.iter().map(|&i| v[i].clone()).collect())
        };
        Ok(Self {
            question_ids: indices.iter().map(|&i| self.question_ids[i].clone()).collect(),
            acc: indices.iter().map(|&i| self.acc[i].clone()).collect(),
            budget_set: self.budget_set.clone(),
            difficulty_tags: pick_str(&self.difficulty_tags),
            question_texts: pick_str(&self.question_texts),
            entropy_estimates: self
                .entropy_estimates
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
        })
    }
}

/// Recorded responses for one question.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub question_id: String,
    pub gold_answer: String,
    pub responses: ResponsePool,
}

/// Raw sample pool: canonical answer strings, or correctness bits when only
/// graded outcomes were logged.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponsePool {
    Answers(Vec<String>),
    Bits(Vec<bool>),
}

impl ResponsePool {
    pub fn len(&self) -> usize {
        match self {
            ResponsePool::Answers(v) => v.len(),
            ResponsePool::Bits(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ResponseRecord {
    /// Build a record from raw strings, canonicalizing gold and responses.
    pub fn from_answers(
        question_id: impl Into<String>,
        gold: &str,
        responses: &[String],
    ) -> Result<Self> {
        let gold_answer = canonicalize(gold);
        if gold_answer.is_empty() {
            return Err(Error::Validation(
                "gold answer is empty after canonicalization".into(),
            ));
        }
        let mut canon = Vec::with_capacity(responses.len());
        for r in responses {
            let c = canonicalize(r);
            if c.is_empty() {
                return Err(Error::Validation(format!(
                    "question {}: response is empty after canonicalization",
                    question_id.into()
                )));
            }
            canon.push(c);
        }
        Ok(Self {
            question_id: question_id.into(),
            gold_answer,
            responses: ResponsePool::Answers(canon),
        })
    }

    pub fn from_bits(question_id: impl Into<String>, bits: Vec<bool>) -> Self {
        Self {
            question_id: question_id.into(),
            gold_answer: "1".into(),
            responses: ResponsePool::Bits(bits),
        }
    }
}

/// Canonical answer form: trimmed, lowercased, internal whitespace runs
/// collapsed to single spaces.
pub fn canonicalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Most frequent answer; ties broken by the lexicographically smallest
/// canonical string among the tied set.
pub fn majority_vote(answers: &[String]) -> Result<String> {
    if answers.is_empty() {
        return Err(Error::Validation("majority vote over an empty list".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for a in answers {
        *counts.entry(a.as_str()).or_insert(0) += 1;
    }
    let best = counts.values().copied().max().unwrap();
    let winner = counts
        .iter()
        .filter(|(_, &c)| c == best)
        .map(|(&a, _)| a)
        .min()
        .unwrap();
    Ok(winner.to_string())
}

/// Estimate `Acc(x, b)` for every question and budget by majority voting
/// within non-overlapping windows.
///
/// For each question, the first `pool_size` responses are split into
/// `floor(pool_size / b)` consecutive windows of size `b`; each window is
/// scored 1 if its majority vote matches the gold answer, else 0, and the
/// scores are averaged. In bits mode a window scores 1 when strictly more
/// than half of its bits are true and 0.5 on an exact tie.
pub fn estimate_utility(
    records: &[ResponseRecord],
    budget_set: &BudgetSet,
    pool_size: usize,
) -> Result<UtilityTable> {
    if records.is_empty() {
        return Err(Error::Validation("no response records".into()));
    }
    if pool_size == 0 {
        return Err(Error::Config("pool_size must be positive".into()));
    }
    for &level in budget_set.levels() {
        if level as usize > pool_size {
            return Err(Error::Config(format!(
                "budget level {} exceeds pool_size {}",
                level, pool_size
            )));
        }
    }
    let mut ids = Vec::with_capacity(records.len());
    let mut acc = Vec::with_capacity(records.len());
    for rec in records {
        if rec.responses.len() < pool_size {
            return Err(Error::Validation(format!(
                "question {}: {} responses, need at least {}",
                rec.question_id,
                rec.responses.len(),
                pool_size
            )));
        }
        let row = budget_set
            .levels()
            .iter()
            .map(|&b| window_accuracy(rec, b as usize, pool_size))
            .collect::<Result<Vec<f64>>>()?;
        ids.push(rec.question_id.clone());
        acc.push(row);
    }
    UtilityTable::new(ids, acc, budget_set.clone())
}

fn window_accuracy(rec: &ResponseRecord, window: usize, pool_size: usize) -> Result<f64> {
    let n_windows = pool_size / window;
    debug_assert!(n_windows >= 1);
    let mut total = 0.0;
    for w in 0..n_windows {
        let start = w * window;
        let end = start + window;
        total += match &rec.responses {
            ResponsePool::Answers(answers) => {
                let vote = majority_vote(&answers[start..end])?;
                if vote == rec.gold_answer {
                    1.0
                } else {
                    0.0
                }
            }
            ResponsePool::Bits(bits) => {
                let trues = bits[start..end].iter().filter(|&&b| b).count();
                if 2 * trues > window {
                    1.0
                } else if 2 * trues == window {
                    0.5
                } else {
                    0.0
                }
            }
        };
    }
    Ok(total / n_windows as f64)
}

/// On-disk table formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    /// Header line `{"budgets": [...], "costs": [...]}` then one
    /// `{"question_id", "acc", ...}` object per line.
    Jsonl,
    /// Header row `question_id,acc_b1,...,acc_bK`.
    Csv,
}

#[derive(Deserialize)]
struct JsonlHeader {
    budgets: Vec<u32>,
    #[serde(default)]
    costs: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct JsonlRow {
    question_id: String,
    acc: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    difficulty: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entropy: Option<f64>,
}

/// Load a utility table from disk. Row order is preserved.
pub fn load_utility_table(path: impl AsRef<Path>, format: TableFormat) -> Result<UtilityTable> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    match format {
        TableFormat::Jsonl => load_jsonl(reader),
        TableFormat::Csv => load_csv(reader),
    }
}

fn load_jsonl(reader: impl BufRead) -> Result<UtilityTable> {
    let mut lines = reader.lines().enumerate();
    let header: JsonlHeader = loop {
        match lines.next() {
            Some((idx, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("expected budget header object: {e}"),
                })?;
            }
            None => return Err(Error::Schema("empty utility file".into())),
        }
    };
    let budget_set = match header.costs {
        Some(costs) => BudgetSet::new(header.budgets, costs)?,
        None => BudgetSet::identity(header.budgets)?,
    };
    let k = budget_set.len();

    let mut ids = Vec::new();
    let mut acc = Vec::new();
    let mut difficulties: Vec<Option<String>> = Vec::new();
    let mut texts: Vec<Option<String>> = Vec::new();
    let mut entropies: Vec<Option<f64>> = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if row.acc.len() != k {
            return Err(Error::Schema(format!(
                "line {}: {} accuracy values, header declares {} budgets",
                idx + 1,
                row.acc.len(),
                k
            )));
        }
        for &a in &row.acc {
            if !a.is_finite() || !(0.0..=1.0).contains(&a) {
                return Err(Error::Validation(format!(
                    "line {}: accuracy {} out of [0,1]",
                    idx + 1,
                    a
                )));
            }
        }
        ids.push(row.question_id);
        acc.push(row.acc);
        difficulties.push(row.difficulty);
        texts.push(row.text);
        entropies.push(row.entropy);
    }

    let mut table = UtilityTable::new(ids, acc, budget_set)?;
    if difficulties.iter().any(Option::is_some) {
        table = table.with_difficulty_tags(
            difficulties
                .into_iter()
                .map(|d| d.unwrap_or_default())
                .collect(),
        )?;
    }
    if texts.iter().any(Option::is_some) {
        table = table
            .with_question_texts(texts.into_iter().map(|t| t.unwrap_or_default()).collect())?;
    }
    if entropies.iter().any(Option::is_some) {
        table = table.with_entropy_estimates(
            entropies.into_iter().map(|e| e.unwrap_or(0.0)).collect(),
        )?;
    }
    Ok(table)
}

fn load_csv(reader: impl BufRead) -> Result<UtilityTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("missing CSV header: {e}")))?
        .clone();
    let mut cols = headers.iter();
    if cols.next() != Some("question_id") {
        return Err(Error::Schema(
            "first CSV column must be question_id".into(),
        ));
    }
    let mut levels = Vec::new();
    for col in cols {
        let level = col
            .strip_prefix("acc_b")
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| Error::Schema(format!("unexpected CSV column '{col}'")))?;
        levels.push(level);
    }
    let budget_set = BudgetSet::identity(levels)?;
    let k = budget_set.len();

    let mut ids = Vec::new();
    let mut acc = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header row
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() != k + 1 {
            return Err(Error::Schema(format!(
                "line {}: {} columns, expected {}",
                line,
                record.len(),
                k + 1
            )));
        }
        let mut row = Vec::with_capacity(k);
        for field in record.iter().skip(1) {
            let a: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("'{field}' is not a number"),
            })?;
            if !a.is_finite() || !(0.0..=1.0).contains(&a) {
                return Err(Error::Validation(format!(
                    "line {}: accuracy {} out of [0,1]",
                    line, a
                )));
            }
            row.push(a);
        }
        ids.push(record[0].to_string());
        acc.push(row);
    }
    UtilityTable::new(ids, acc, budget_set)
}

/// Write a table in the JSONL utility format, optionally with extra keys
/// merged into the header object (used for reproducibility metadata).
pub fn write_utility_table_jsonl(
    table: &UtilityTable,
    mut out: impl Write,
    extra_header: Option<&serde_json::Value>,
) -> Result<()> {
    let mut header = serde_json::json!({
        "budgets": table.budget_set().levels(),
        "costs": table.budget_set().costs(),
    });
    if let Some(extra) = extra_header {
        if let (Some(obj), Some(extra_obj)) = (header.as_object_mut(), extra.as_object()) {
            for (key, value) in extra_obj {
                obj.insert(key.clone(), value.clone());
            }
        }
    }
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for i in 0..table.len() {
        let row = JsonlRow {
            question_id: table.question_ids()[i].clone(),
            acc: table.acc_row(i).to_vec(),
            difficulty: table.difficulty_tags().map(|t| t[i].clone()),
            text: table.question_texts().map(|t| t[i].clone()),
            entropy: table.entropy_estimates().map(|e| e[i]),
        };
        writeln!(out, "{}", serde_json::to_string(&row)?)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct ResponseRow {
    question_id: String,
    #[serde(default)]
    gold: Option<String>,
    #[serde(default)]
    responses: Option<Vec<String>>,
    #[serde(default)]
    bits: Option<Vec<bool>>,
}

/// Load response records from JSONL: `{"question_id", "gold", "responses"}`
/// per line, or `{"question_id", "bits"}` for correctness-only logs.
pub fn load_response_records(path: impl AsRef<Path>) -> Result<Vec<ResponseRecord>> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ResponseRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let record = match (row.responses, row.bits) {
            (Some(responses), None) => {
                let gold = row.gold.ok_or_else(|| Error::Schema(format!(
                    "line {}: answers-mode row is missing 'gold'",
                    idx + 1
                )))?;
                ResponseRecord::from_answers(row.question_id, &gold, &responses)?
            }
            (None, Some(bits)) => ResponseRecord::from_bits(row.question_id, bits),
            _ => {
                return Err(Error::Schema(format!(
                    "line {}: row must have exactly one of 'responses' or 'bits'",
                    idx + 1
                )))
            }
        };
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Schema("no response records in file".into()));
    }
    Ok(records)
}

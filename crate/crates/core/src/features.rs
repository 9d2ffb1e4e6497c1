//! Cheap text features for budget prediction.
//!
//! Sixteen features are computed from the question text alone (plus an
//! optional pre-computed entropy estimate); no model call is ever made.
//! The feature order is frozen: serialized vectors are plain JSON arrays
//! and the names below are the only documentation of which slot is which.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frozen feature order.
pub const FEATURE_NAMES: [&str; 16] = [
    "prompt_length_chars",
    "prompt_length_words",
    "sentence_count",
    "question_marks",
    "numbers_count",
    "number_magnitude_avg",
    "number_magnitude_max",
    "has_percentage",
    "has_fraction",
    "has_time_word",
    "has_money_word",
    "has_rate_word",
    "has_multi_step_word",
    "avg_word_length",
    "unique_word_ratio",
    "entropy_estimate",
];

/// Number of features.
pub const FEATURE_DIM: usize = 16;

/// A 16-dimensional feature vector in the frozen name order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_DIM]) -> Self {
        Self { values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Keyword lists for the boolean text flags. Entries are lowercase words or
/// multi-word phrases matched against the token sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordLexicons {
    pub percentage: Vec<String>,
    pub time: Vec<String>,
    pub money: Vec<String>,
    pub rate: Vec<String>,
    pub multi_step: Vec<String>,
}

impl Default for KeywordLexicons {
    fn default() -> Self {
        let list = |words: &[&str]| words.iter().map(|w| w.to_string()).collect();
        Self {
            percentage: list(&["percent", "percentage", "pct"]),
            time: list(&[
                "hour", "hours", "minute", "minutes", "second", "seconds", "day", "days",
                "week", "weeks", "month", "months", "year", "years", "clock", "am", "pm",
            ]),
            money: list(&[
                "dollar", "dollars", "cent", "cents", "money", "cost", "costs", "price",
                "prices", "pay", "pays", "paid", "buy", "buys", "bought", "sell", "sells",
                "sold", "spend", "spends", "spent", "earn", "earns", "earned",
            ]),
            rate: list(&[
                "per", "rate", "rates", "speed", "mph", "kph", "velocity", "each", "every",
            ]),
            multi_step: list(&[
                "then", "after that", "first", "next", "finally", "total", "altogether",
                "in all", "remaining", "left over",
            ]),
        }
    }
}

impl KeywordLexicons {
    /// Parse the lexicon file format: `[section]` headers with one keyword
    /// per line; `#` lines are comments. Unlisted sections keep defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Self::default();
        let mut section: Option<&mut Vec<String>> = None;
        let mut cleared = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let slot = match name {
                    "percentage" => &mut lex.percentage,
                    "time" => &mut lex.time,
                    "money" => &mut lex.money,
                    "rate" => &mut lex.rate,
                    "multi_step" => &mut lex.multi_step,
                    other => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            message: format!("unknown lexicon section '{other}'"),
                        })
                    }
                };
                if cleared.insert(name.to_string()) {
                    slot.clear();
                }
                section = Some(slot);
            } else {
                match section.as_deref_mut() {
                    Some(slot) => slot.push(line.to_lowercase()),
                    None => {
                        return Err(Error::Parse {
                            line: idx + 1,
                            message: "keyword before any [section] header".into(),
                        })
                    }
                }
            }
        }
        Ok(lex)
    }

    /// Render in the same file format `from_file` accepts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, words) in [
            ("percentage", &self.percentage),
            ("time", &self.time),
            ("money", &self.money),
            ("rate", &self.rate),
            ("multi_step", &self.multi_step),
        ] {
            let _ = writeln!(out, "[{name}]");
            for w in words {
                let _ = writeln!(out, "{w}");
            }
        }
        out
    }
}

/// Tokens: maximal alphanumeric runs, lowercased.
fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Does any lexicon entry occur as a contiguous token subsequence?
fn contains_phrase(tokens: &[String], lexicon: &[String]) -> bool {
    lexicon.iter().any(|entry| {
        let phrase: Vec<&str> = entry.split_whitespace().collect();
        if phrase.is_empty() || phrase.len() > tokens.len() {
            return false;
        }
        tokens
            .windows(phrase.len())
            .any(|w| w.iter().zip(&phrase).all(|(t, p)| t == p))
    })
}

/// Sentences end at `. ! ?` followed by whitespace or end of text; a
/// trailing unterminated fragment counts as one sentence.
fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut has_content = false;
    for (i, &c) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let at_end = chars[i + 1..].iter().all(|c| c.is_whitespace());
            let before_space = chars.get(i + 1).is_some_and(|c| c.is_whitespace());
            if has_content && (at_end || before_space) {
                count += 1;
                has_content = false;
            }
        } else if !c.is_whitespace() {
            has_content = true;
        }
    }
    if has_content {
        count += 1;
    }
    count.max(1)
}

/// Numeric literals: digit runs with optional decimal part; `a/b` with both
/// sides numeric parses as a single fraction value (and flags has_fraction).
/// Division by zero falls back to two separate numbers.
fn extract_numbers(text: &str) -> (Vec<f64>, bool) {
    let chars: Vec<char> = text.chars().collect();
    let mut values = Vec::new();
    let mut saw_fraction = false;
    let mut i = 0;

    let read_number = |i: &mut usize| -> f64 {
        let start = *i;
        while *i < chars.len() && chars[*i].is_ascii_digit() {
            *i += 1;
        }
        if *i < chars.len()
            && chars[*i] == '.'
            && chars.get(*i + 1).is_some_and(|c| c.is_ascii_digit())
        {
            *i += 1;
            while *i < chars.len() && chars[*i].is_ascii_digit() {
                *i += 1;
            }
        }
        chars[start..*i].iter().collect::<String>().parse().unwrap_or(0.0)
    };

    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let a = read_number(&mut i);
            if i < chars.len()
                && chars[i] == '/'
                && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())
            {
                let mut j = i + 1;
                let b = read_number(&mut j);
                saw_fraction = true;
                if b != 0.0 {
                    values.push(a / b);
                } else {
                    values.push(a);
                    values.push(b);
                }
                i = j;
            } else {
                values.push(a);
            }
        } else {
            i += 1;
        }
    }
    (values, saw_fraction)
}

/// Compute the frozen 16-feature vector for a question text.
///
/// `entropy_estimate` is an ingestion passthrough (0 when absent); the
/// remaining fifteen features come from the text and the lexicons alone.
pub fn extract_features(
    text: &str,
    entropy_estimate: Option<f64>,
    lexicons: &KeywordLexicons,
) -> Result<FeatureVector> {
    if text.trim().is_empty() {
        return Err(Error::Validation("question text is empty".into()));
    }
    if let Some(e) = entropy_estimate {
        if !e.is_finite() {
            return Err(Error::Validation(format!(
                "entropy estimate must be finite, got {e}"
            )));
        }
    }

    let tokens = tokenize(text);
    let n_tokens = tokens.len().max(1);
    let (numbers, saw_fraction) = extract_numbers(text);

    // Zero values are excluded from the log magnitudes to keep them finite.
    let magnitudes: Vec<f64> = numbers.iter().map(|v| v.abs()).filter(|&m| m > 0.0).collect();
    let (mag_avg, mag_max) = if magnitudes.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = magnitudes.iter().sum::<f64>() / magnitudes.len() as f64;
        let max = magnitudes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (mean.ln(), max.ln())
    };

    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let has_percentage = text.contains('%') || contains_phrase(&tokens, &lexicons.percentage);
    let has_fraction = saw_fraction;
    let has_money = text.contains('$') || contains_phrase(&tokens, &lexicons.money);

    let total_token_len: usize = tokens.iter().map(|t| t.chars().count()).sum();
    let unique: std::collections::HashSet<&str> =
        tokens.iter().map(|t| t.as_str()).collect();

    Ok(FeatureVector::new([
        text.chars().count() as f64,
        tokens.len() as f64,
        count_sentences(text) as f64,
        text.chars().filter(|&c| c == '?').count() as f64,
        numbers.len() as f64,
        mag_avg,
        mag_max,
        flag(has_percentage),
        flag(has_fraction),
        flag(contains_phrase(&tokens, &lexicons.time)),
        flag(has_money),
        flag(contains_phrase(&tokens, &lexicons.rate)),
        flag(contains_phrase(&tokens, &lexicons.multi_step)),
        total_token_len as f64 / n_tokens as f64,
        unique.len() as f64 / n_tokens as f64,
        entropy_estimate.unwrap_or(0.0),
    ]))
}

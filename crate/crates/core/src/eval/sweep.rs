//! Pareto frontier sweeps over a budget grid.
//!
//! For each grid budget the dual solver produces oracle labels on the full
//! table once; each seed then draws an 80/20 split (stratified by oracle
//! label when feasible), trains the classifier on the training side, and
//! evaluates every requested method on the held-out side. Rows are emitted
//! per (budget, method, seed) so means and deviations can be recomputed
//! downstream; the CSV schema is `budget,method,seed,accuracy,cost`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::UtilityTable;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::oracle::{self, RealizeMode};
use crate::policy::{self, PolicyKind, TrainConfig};
use crate::seed;

use super::{baseline_allocation, evaluate_allocation, BaselineKind};

/// Methods a sweep can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    Ours,
    Fixed,
    Random,
    Heuristic,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Oracle,
        Method::Ours,
        Method::Fixed,
        Method::Random,
        Method::Heuristic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Ours => "ours",
            Method::Fixed => "fixed",
            Method::Random => "random",
            Method::Heuristic => "heuristic",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Train/validation split protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Fraction of rows held out for evaluation.
    pub eval_fraction: f64,
    /// Stratify by oracle label when every observed class has at least
    /// this many members; otherwise split plainly at random.
    pub min_class_members: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            eval_fraction: 0.2,
            min_class_members: 5,
        }
    }
}

/// One (budget, method, seed) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub budget: f64,
    pub method: Method,
    pub seed: u64,
    pub accuracy: f64,
    pub cost: f64,
}

/// Plot-ready sweep output.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrontierSeries {
    pub rows: Vec<FrontierRow>,
}

impl FrontierSeries {
    /// Render as CSV. `comment` lines (reproducibility header) are emitted
    /// before the column header prefixed with `#`.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(c) = comment {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        out.push_str("budget,method,seed,accuracy,cost\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.budget,
                r.method.name(),
                r.seed,
                r.accuracy,
                r.cost
            );
        }
        out
    }

    /// Mean and population std of accuracy plus mean cost over seeds for
    /// one (method, budget) cell.
    pub fn aggregate(&self, method: Method, budget: f64) -> Option<(f64, f64, f64)> {
        let rows: Vec<&FrontierRow> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.budget == budget)
            .collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean_acc = rows.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|r| (r.accuracy - mean_acc).powi(2))
            .sum::<f64>()
            / n;
        let mean_cost = rows.iter().map(|r| r.cost).sum::<f64>() / n;
        Some((mean_acc, var.sqrt(), mean_cost))
    }

    pub fn budgets(&self) -> Vec<f64> {
        let mut grid: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !grid.contains(&r.budget) {
                grid.push(r.budget);
            }
        }
        grid
    }
}

/// Split rows into (train, eval) index sets.
///
/// Stratified by `labels` when every observed class clears the configured
/// minimum; per-class eval counts are `floor(count * eval_fraction)`, at
/// least 1. The plain split holds out `max(1, floor(n * eval_fraction))`.
pub fn train_eval_split(
    labels: &[usize],
    n_classes: usize,
    split: &SplitConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let n = labels.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let observed: Vec<&Vec<usize>> = by_class.iter().filter(|c| !c.is_empty()).collect();
    let stratify = observed
        .iter()
        .all(|c| c.len() >= split.min_class_members);

    let mut train = Vec::new();
    let mut eval = Vec::new();
    if stratify {
        // largest-remainder rounding keeps the held-out label mix
        // proportional, so the eval split's oracle cost tracks the full
        // table's instead of drifting with per-class floor truncation
        let total_held = ((n as f64 * split.eval_fraction).round() as usize).clamp(1, n - 1);
        let quotas: Vec<(usize, f64)> = by_class
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .map(|(idx, c)| (idx, c.len() as f64 * split.eval_fraction))
            .collect();
        let mut held: Vec<(usize, usize, f64)> = quotas
            .iter()
            .map(|&(idx, q)| (idx, (q as usize).max(1), q - q.floor()))
            .collect();
        let mut assigned: usize = held.iter().map(|h| h.1).sum();
        let mut by_remainder: Vec<usize> = (0..held.len()).collect();
        by_remainder.sort_by(|&a, &b| {
            held[b].2.partial_cmp(&held[a].2).unwrap().then(a.cmp(&b))
        });
        for &slot in by_remainder.iter().cycle().take(held.len() * 2) {
            if assigned >= total_held {
                break;
            }
            if held[slot].1 < by_class[held[slot].0].len() {
                held[slot].1 += 1;
                assigned += 1;
            }
        }
        for &(class_idx, count, _) in &held {
            let mut idx = by_class[class_idx].clone();
            idx.shuffle(rng);
            // singleton classes go to training whole
            let count = count.min(idx.len() - 1);
            eval.extend_from_slice(&idx[..count]);
            train.extend_from_slice(&idx[count..]);
        }
    }
    if !stratify || train.is_empty() || eval.is_empty() {
        train.clear();
        eval.clear();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let held = ((n as f64 * split.eval_fraction) as usize).clamp(1, n - 1);
        eval.extend_from_slice(&idx[..held]);
        train.extend_from_slice(&idx[held..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    (train, eval)
}

/// Run the sweep. Output rows are ordered by (grid position, seed, method).
#[allow(clippy::too_many_arguments)]
pub fn pareto_sweep(
    table: &UtilityTable,
    features: &[FeatureVector],
    budget_grid: &[f64],
    methods: &[Method],
    split: &SplitConfig,
    train_config: &TrainConfig,
    classifier: PolicyKind,
    seeds: &[u64],
) -> Result<FrontierSeries> {
    if features.len() != table.len() {
        return Err(Error::Validation(format!(
            "{} feature rows for a table of {} rows",
            features.len(),
            table.len()
        )));
    }
    if budget_grid.is_empty() || seeds.is_empty() || methods.is_empty() {
        return Err(Error::Validation(
            "sweep needs a non-empty grid, seed list, and method set".into(),
        ));
    }
    let set = table.budget_set();
    for &b in budget_grid {
        if !(set.min_cost()..=set.max_cost()).contains(&b) {
            return Err(Error::Validation(format!(
                "grid budget {} outside [{}, {}]",
                b,
                set.min_cost(),
                set.max_cost()
            )));
        }
    }

    let mut series = FrontierSeries::default();
    for (grid_idx, &budget) in budget_grid.iter().enumerate() {
        let solution = oracle::solve_budget(table, budget, 1e-9, 60, 0)?;
        let full_labels = oracle::realize_labels(&solution, table, 0, RealizeMode::Deterministic)?;

        for &seed_value in seeds {
            // one split stream per seed: with the plain (non-stratified)
            // protocol the held-out rows are identical across the grid, so
            // method curves over B are comparable point to point
            let mut rng = seed::rng(seed_value, "sweep-split", 0);
            let (train_idx, eval_idx) =
                train_eval_split(&full_labels, set.len(), split, &mut rng);
            let eval_table = table.subset(&eval_idx)?;
            let eval_features: Vec<FeatureVector> =
                eval_idx.iter().map(|&i| features[i].clone()).collect();
            let eval_oracle: Vec<usize> = eval_idx.iter().map(|&i| full_labels[i]).collect();

            for &method in methods {
                let labels = match method {
                    Method::Oracle => eval_oracle.clone(),
                    Method::Ours => {
                        let train_features: Vec<FeatureVector> =
                            train_idx.iter().map(|&i| features[i].clone()).collect();
                        let train_labels: Vec<usize> =
                            train_idx.iter().map(|&i| full_labels[i]).collect();
                        let model = policy::train_policy(
                            &train_features,
                            &train_labels,
                            classifier,
                            set,
                            train_config,
                            seed::sub_seed(seed_value, "sweep-train", grid_idx as u64),
                        )?;
                        eval_features
                            .iter()
                            .map(|f| policy::predict_budget(&model, f))
                            .collect::<Result<Vec<usize>>>()?
                    }
                    Method::Fixed | Method::Random | Method::Heuristic => {
                        let kind = match method {
                            Method::Fixed => BaselineKind::Fixed,
                            Method::Random => BaselineKind::Random,
                            _ => BaselineKind::Heuristic,
                        };
                        baseline_allocation(
                            kind,
                            &eval_table,
                            Some(&eval_features),
                            budget,
                            seed::sub_seed(seed_value, "sweep-baseline", grid_idx as u64),
                        )?
                    }
                };
                let report = evaluate_allocation(&eval_table, &labels, None)?;
                series.rows.push(FrontierRow {
                    budget,
                    method,
                    seed: seed_value,
                    accuracy: report.task_accuracy,
                    cost: report.realized_cost,
                });
            }
        }
    }
    Ok(series)
}

/// Parse an inclusive `start:stop:count` grid spec.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "grid spec '{spec}' must be start:stop:count"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid start '{}'", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid stop '{}'", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad grid count '{}'", parts[2])))?;
    if count == 0 {
        return Err(Error::Config("grid count must be positive".into()));
    }
    if count == 1 {
        if (start - stop).abs() > 1e-12 {
            return Err(Error::Config(
                "grid count 1 requires start == stop".into(),
            ));
        }
        return Ok(vec![start]);
    }
    if stop < start {
        return Err(Error::Config("grid stop must be at least start".into()));
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

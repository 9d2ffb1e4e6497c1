//! Scoring, baselines, and numerical verification of the method's bounds.

mod cluster;
mod sweep;

pub use cluster::archetype_cluster;
pub use sweep::{
    parse_grid, pareto_sweep, train_eval_split, FrontierRow, FrontierSeries, Method, SplitConfig,
};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::UtilityTable;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::oracle;
use crate::seed;

/// Accuracy/cost pair for one difficulty tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultySlice {
    pub accuracy: f64,
    pub cost: f64,
}

/// Headline metrics for one allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_accuracy: f64,
    pub realized_cost: f64,
    pub imitation_accuracy: Option<f64>,
    /// Oracle task accuracy minus policy task accuracy.
    pub oracle_gap: Option<f64>,
    pub per_difficulty: Option<BTreeMap<String, DifficultySlice>>,
    /// Fraction of instances assigned each budget level.
    pub label_distribution: Vec<f64>,
}

/// Score an allocation against the utility table; oracle comparisons are
/// filled in when oracle labels are supplied.
pub fn evaluate_allocation(
    table: &UtilityTable,
    labels: &[usize],
    oracle_labels: Option<&[usize]>,
) -> Result<EvalReport> {
    check_labels(table, labels)?;
    if let Some(o) = oracle_labels {
        check_labels(table, o)?;
    }
    let n = table.len() as f64;
    let task_accuracy = oracle::mean_accuracy(table, labels);
    let realized_cost = oracle::mean_cost(table.budget_set(), labels);

    let mut label_distribution = vec![0.0; table.num_budgets()];
    for &l in labels {
        label_distribution[l] += 1.0 / n;
    }

    let (imitation_accuracy, oracle_gap) = match oracle_labels {
        Some(o) => {
            let matches = labels.iter().zip(o).filter(|(a, b)| a == b).count();
            let oracle_acc = oracle::mean_accuracy(table, o);
            (
                Some(matches as f64 / n),
                Some(oracle_acc - task_accuracy),
            )
        }
        None => (None, None),
    };

    let per_difficulty = table.difficulty_tags().map(|tags| {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, tag) in tags.iter().enumerate() {
            groups.entry(tag.clone()).or_default().push(i);
        }
        groups
            .into_iter()
            .map(|(tag, idx)| {
                let m = idx.len() as f64;
                let acc = idx.iter().map(|&i| table.acc(i, labels[i])).sum::<f64>() / m;
                let cost = idx
                    .iter()
                    .map(|&i| table.budget_set().cost(labels[i]))
                    .sum::<f64>()
                    / m;
                (tag, DifficultySlice { accuracy: acc, cost })
            })
            .collect()
    });

    Ok(EvalReport {
        task_accuracy,
        realized_cost,
        imitation_accuracy,
        oracle_gap,
        per_difficulty,
        label_distribution,
    })
}

fn check_labels(table: &UtilityTable, labels: &[usize]) -> Result<()> {
    if labels.len() != table.len() {
        return Err(Error::Validation(format!(
            "{} labels for a table of {} rows",
            labels.len(),
            table.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= table.num_budgets()) {
        return Err(Error::Validation(format!(
            "label {} out of range for {} budgets",
            bad,
            table.num_budgets()
        )));
    }
    Ok(())
}

/// Non-learned allocation baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Every instance gets the largest budget whose cost fits the target.
    Fixed,
    /// Per instance, sample between the two adjacent budgets bracketing the
    /// target so the expected cost equals the target.
    Random,
    /// Longest prompts get the biggest budgets until the pool runs out.
    Heuristic,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(BaselineKind::Fixed),
            "random" => Ok(BaselineKind::Random),
            "heuristic" => Ok(BaselineKind::Heuristic),
            other => Err(Error::Config(format!("unknown baseline '{other}'"))),
        }
    }
}

/// Compute a baseline allocation at the target budget.
pub fn baseline_allocation(
    kind: BaselineKind,
    table: &UtilityTable,
    features: Option<&[FeatureVector]>,
    target_budget: f64,
    seed_value: u64,
) -> Result<Vec<usize>> {
    let set = table.budget_set();
    if target_budget < set.min_cost() {
        return Err(Error::Infeasible(format!(
            "target budget {} below the cheapest budget cost {}",
            target_budget,
            set.min_cost()
        )));
    }
    let n = table.len();
    match kind {
        BaselineKind::Fixed => {
            let k = (0..set.len())
                .rev()
                .find(|&k| set.cost(k) <= target_budget)
                .expect("min cost <= target was checked");
            Ok(vec![k; n])
        }
        BaselineKind::Random => {
            if target_budget >= set.max_cost() {
                return Ok(vec![set.len() - 1; n]);
            }
            let lo = (0..set.len())
                .rev()
                .find(|&k| set.cost(k) <= target_budget)
                .expect("min cost <= target was checked");
            if set.cost(lo) == target_budget {
                return Ok(vec![lo; n]);
            }
            let hi = (0..set.len())
                .find(|&k| set.cost(k) > target_budget)
                .expect("target below max cost");
            let w_lo = (set.cost(hi) - target_budget) / (set.cost(hi) - set.cost(lo));
            let mut rng = seed::rng(seed_value, "baseline-random", 0);
            Ok((0..n)
                .map(|_| if rng.gen_bool(w_lo) { lo } else { hi })
                .collect())
        }
        BaselineKind::Heuristic => {
            let features = features.ok_or_else(|| {
                Error::Validation("heuristic baseline requires feature vectors".into())
            })?;
            if features.len() != n {
                return Err(Error::Validation(format!(
                    "{} feature rows for a table of {} rows",
                    features.len(),
                    n
                )));
            }
            // longest prompts first; stable on ties by original index
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                features[b].values[1]
                    .partial_cmp(&features[a].values[1])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let min_cost = set.min_cost();
            let mut pool = target_budget * n as f64;
            let mut labels = vec![0usize; n];
            for (pos, &i) in order.iter().enumerate() {
                let remaining_after = (n - pos - 1) as f64;
                // spend as much as possible while keeping the cheapest
                // budget affordable for everyone behind us
                let spendable = pool - remaining_after * min_cost;
                let k = (0..set.len())
                    .rev()
                    .find(|&k| set.cost(k) <= spendable)
                    .unwrap_or(0);
                labels[i] = k;
                pool -= set.cost(k);
            }
            Ok(labels)
        }
    }
}

/// Empirical ledger of the regret and recovery bounds at one price.
///
/// All fields are computed; the inequalities between them are checked by
/// the test suites, not here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub lambda: f64,
    pub target_budget: f64,
    /// Penalized value of the evaluated policy.
    pub penalized_value_policy: f64,
    /// Penalized value of the oracle at this price.
    pub penalized_value_oracle: f64,
    pub regret: f64,
    /// Mismatch rate against the oracle labels.
    pub epsilon: f64,
    /// Worst-case net-value gap per instance.
    pub per_instance_gaps: Vec<f64>,
    /// Largest per-instance gap.
    pub m_bar: f64,
    /// Mean of gap * mismatch indicator.
    pub weighted_bound: f64,
    /// m_bar * epsilon.
    pub uniform_bound: f64,
    /// Oracle accuracy minus policy accuracy.
    pub acc_gap: f64,
    /// Oracle mean cost minus policy mean cost.
    pub cost_deviation: f64,
    pub oracle_cost: f64,
    pub policy_cost: f64,
    /// Near-feasibility bound: target + epsilon * (C(b_K) - C(b_1)).
    pub feasibility_slack_bound: f64,
}

/// Compute every regret/recovery quantity for a policy labeling at price
/// `lambda`, with the oracle labels derived internally.
pub fn regret_report(
    table: &UtilityTable,
    policy_labels: &[usize],
    lambda: f64,
    target_budget: f64,
) -> Result<RegretReport> {
    check_labels(table, policy_labels)?;
    let oracle_labels = oracle::oracle_allocation(table, lambda)?;
    let set = table.budget_set();
    let n = table.len();
    let nf = n as f64;

    let f = |i: usize, k: usize| table.acc(i, k) - lambda * set.cost(k);

    let mut j_policy = 0.0;
    let mut j_oracle = 0.0;
    let mut mismatches = 0usize;
    let mut weighted = 0.0;
    let mut gaps = Vec::with_capacity(n);
    for i in 0..n {
        let fo = f(i, oracle_labels[i]);
        let fp = f(i, policy_labels[i]);
        j_oracle += fo;
        j_policy += fp;
        let min_f = (0..set.len()).map(|k| f(i, k)).fold(f64::INFINITY, f64::min);
        let gap = fo - min_f;
        gaps.push(gap);
        if policy_labels[i] != oracle_labels[i] {
            mismatches += 1;
            weighted += gap;
        }
    }
    j_oracle /= nf;
    j_policy /= nf;
    let epsilon = mismatches as f64 / nf;
    let m_bar = gaps.iter().cloned().fold(0.0f64, f64::max);
    let oracle_acc = oracle::mean_accuracy(table, &oracle_labels);
    let policy_acc = oracle::mean_accuracy(table, policy_labels);
    let oracle_cost = oracle::mean_cost(set, &oracle_labels);
    let policy_cost = oracle::mean_cost(set, policy_labels);

    Ok(RegretReport {
        lambda,
        target_budget,
        penalized_value_policy: j_policy,
        penalized_value_oracle: j_oracle,
        regret: j_oracle - j_policy,
        epsilon,
        per_instance_gaps: gaps,
        m_bar,
        weighted_bound: weighted / nf,
        uniform_bound: m_bar * epsilon,
        acc_gap: oracle_acc - policy_acc,
        cost_deviation: oracle_cost - policy_cost,
        oracle_cost,
        policy_cost,
        feasibility_slack_bound: target_budget + epsilon * set.cost_span(),
    })
}

//! Budget classifiers imitating oracle labels.
//!
//! Two model families are implemented from scratch: a multiclass gradient
//! boosted tree ensemble (one regression tree per class per round, fit to
//! softmax residuals over histogram splits) and a multinomial logistic
//! model. Both are deterministic given the seed and config; the trained
//! policy serializes to a versioned JSON document that round-trips
//! bit-exactly.

mod linear;
mod tree;

pub use linear::LinearModel;
pub use tree::{Histogram, RegressionTree, TreeNode};

use serde::{Deserialize, Serialize};

use crate::dataset::BudgetSet;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM, FEATURE_NAMES};

/// Serialization format version.
pub const POLICY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Gbm,
    Linear,
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyKind::Gbm => write!(f, "gbm"),
            PolicyKind::Linear => write!(f, "linear"),
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbm" => Ok(PolicyKind::Gbm),
            "linear" => Ok(PolicyKind::Linear),
            other => Err(Error::Config(format!("unknown classifier kind '{other}'"))),
        }
    }
}

/// Training hyper-parameters. Defaults: 100 rounds, depth 5, learning rate
/// 0.1, 32 equal-frequency histogram bins, minimum leaf size 2, no class
/// reweighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub histogram_bins: usize,
    pub min_leaf_size: usize,
    /// Optional inverse-frequency class weights for imbalanced oracle labels.
    pub class_weighting: bool,
    pub linear_max_iterations: usize,
    pub linear_tolerance: f64,
    /// Ridge penalty on the linear model's non-bias weights.
    pub linear_l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 5,
            learning_rate: 0.1,
            histogram_bins: 32,
            min_leaf_size: 2,
            class_weighting: false,
            linear_max_iterations: 2000,
            linear_tolerance: 1e-6,
            linear_l2: 0.1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be positive".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.learning_rate >= 4.0 {
            return Err(Error::Config(format!(
                "learning_rate must be in (0, 4), got {}",
                self.learning_rate
            )));
        }
        if self.histogram_bins < 2 || self.histogram_bins > 64 {
            return Err(Error::Config("histogram_bins must be in 2..=64".into()));
        }
        if self.min_leaf_size == 0 {
            return Err(Error::Config("min_leaf_size must be positive".into()));
        }
        if self.linear_tolerance.is_nan() || self.linear_tolerance <= 0.0 {
            return Err(Error::Config("linear_tolerance must be positive".into()));
        }
        if self.linear_l2 < 0.0 || !self.linear_l2.is_finite() {
            return Err(Error::Config("linear_l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Provenance recorded at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub final_loss: f64,
    /// Mean training cross-entropy after each boosting round (GBM only).
    pub per_round_losses: Vec<f64>,
    pub iterations: usize,
    pub warning: Option<String>,
}

/// Gradient-boosted model: `rounds[r][c]` is round `r`'s tree for class `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub rounds: Vec<Vec<RegressionTree>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelParams {
    Gbm(GbmModel),
    Linear(LinearModel),
    /// Degenerate single-class training data.
    Constant,
}

/// A trained K-way budget classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    version: u32,
    kind: PolicyKind,
    budget_set: BudgetSet,
    feature_names: Vec<String>,
    config: TrainConfig,
    /// When set, every prediction returns this label.
    constant: Option<usize>,
    model: ModelParams,
    training_meta: TrainingMeta,
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn budget_set(&self) -> &BudgetSet {
        &self.budget_set
    }

    pub fn num_classes(&self) -> usize {
        self.budget_set.len()
    }

    pub fn training_meta(&self) -> &TrainingMeta {
        &self.training_meta
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn linear_model(&self) -> Option<&LinearModel> {
        match &self.model {
            ModelParams::Linear(m) => Some(m),
            _ => None,
        }
    }

    /// Raw class scores for a feature vector.
    pub fn scores(&self, features: &FeatureVector) -> Vec<f64> {
        match &self.model {
            ModelParams::Constant => {
                let mut s = vec![0.0; self.num_classes()];
                if let Some(c) = self.constant {
                    s[c] = 1.0;
                }
                s
            }
            ModelParams::Linear(m) => m.scores(features.as_slice()),
            ModelParams::Gbm(m) => {
                let mut s = vec![0.0; self.num_classes()];
                for round in &m.rounds {
                    for (score, tree) in s.iter_mut().zip(round) {
                        *score += self.config.learning_rate * tree.predict(features.as_slice());
                    }
                }
                s
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let policy: Policy = serde_json::from_str(json)?;
        policy.validate()?;
        Ok(policy)
    }

    fn validate(&self) -> Result<Self> {
        if self.version != POLICY_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "policy format version {} unsupported (expected {})",
                self.version, POLICY_FORMAT_VERSION
            )));
        }
        // re-run budget set invariants (serde bypasses the constructor)
        BudgetSet::new(
            self.budget_set.levels().to_vec(),
            self.budget_set.costs().to_vec(),
        )?;
        if self.feature_names != FEATURE_NAMES {
            return Err(Error::Schema(
                "policy feature names disagree with the frozen order".into(),
            ));
        }
        if let Some(c) = self.constant {
            if c >= self.num_classes() {
                return Err(Error::Schema(format!(
                    "constant label {} out of range for {} budgets",
                    c,
                    self.num_classes()
                )));
            }
        }
        match &self.model {
            ModelParams::Constant => {
                if self.constant.is_none() {
                    return Err(Error::Schema(
                        "constant model requires a constant label".into(),
                    ));
                }
            }
            ModelParams::Gbm(m) => {
                for round in &m.rounds {
                    if round.len() != self.num_classes() {
                        return Err(Error::Schema(format!(
                            "round has {} trees for {} classes",
                            round.len(),
                            self.num_classes()
                        )));
                    }
                    for tree in round {
                        if !tree.validate(self.config.max_depth) {
                            return Err(Error::Schema(
                                "malformed tree (bad indices, depth, or threshold)".into(),
                            ));
                        }
                    }
                }
            }
            ModelParams::Linear(m) => {
                if !m.validate(self.num_classes()) {
                    return Err(Error::Schema("malformed linear weights".into()));
                }
            }
        }
        Ok(self.clone())
    }
}

fn flatten(features: &[FeatureVector]) -> Result<Vec<f64>> {
    let mut data = Vec::with_capacity(features.len() * FEATURE_DIM);
    for (i, f) in features.iter().enumerate() {
        for &v in f.as_slice() {
            if v.is_nan() {
                return Err(Error::Validation(format!(
                    "NaN feature value in row {}",
                    i + 1
                )));
            }
            data.push(v);
        }
    }
    Ok(data)
}

/// Train a budget classifier on oracle labels.
///
/// The label space is the full budget set even when some levels are absent
/// from training. Single-class inputs short-circuit to a constant policy
/// with a warning flag instead of failing.
pub fn train_policy(
    features: &[FeatureVector],
    labels: &[usize],
    kind: PolicyKind,
    budget_set: &BudgetSet,
    config: &TrainConfig,
    seed: u64,
) -> Result<Policy> {
    config.validate()?;
    if features.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} feature rows for {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 2 {
        return Err(Error::Validation(
            "training needs at least two examples".into(),
        ));
    }
    let n_classes = budget_set.len();
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Validation(format!(
            "label {} out of range for {} budgets",
            bad, n_classes
        )));
    }
    let data = flatten(features)?;
    let n = features.len();

    let feature_names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Ok(Policy {
            version: POLICY_FORMAT_VERSION,
            kind,
            budget_set: budget_set.clone(),
            feature_names,
            config: config.clone(),
            constant: Some(first),
            model: ModelParams::Constant,
            training_meta: TrainingMeta {
                seed,
                final_loss: 0.0,
                per_round_losses: Vec::new(),
                iterations: 0,
                warning: Some(format!(
                    "single-class training data: constant policy at budget index {first}"
                )),
            },
        });
    }

    let sample_weights = if config.class_weighting {
        let mut counts = vec![0usize; n_classes];
        for &l in labels {
            counts[l] += 1;
        }
        let present = counts.iter().filter(|&&c| c > 0).count() as f64;
        labels
            .iter()
            .map(|&l| n as f64 / (present * counts[l] as f64))
            .collect()
    } else {
        vec![1.0; n]
    };

    let (model, training_meta) = match kind {
        PolicyKind::Gbm => {
            let (m, meta) = fit_gbm(&data, n, labels, n_classes, &sample_weights, config, seed);
            (ModelParams::Gbm(m), meta)
        }
        PolicyKind::Linear => {
            let fit = linear::fit_linear(
                &data,
                n,
                labels,
                n_classes,
                &sample_weights,
                config.linear_max_iterations,
                config.linear_tolerance,
                config.linear_l2,
            );
            let meta = TrainingMeta {
                seed,
                final_loss: fit.final_loss,
                per_round_losses: Vec::new(),
                iterations: fit.iterations,
                warning: None,
            };
            (ModelParams::Linear(fit.model), meta)
        }
    };

    Ok(Policy {
        version: POLICY_FORMAT_VERSION,
        kind,
        budget_set: budget_set.clone(),
        feature_names,
        config: config.clone(),
        constant: None,
        model,
        training_meta,
    })
}

#[allow(clippy::needless_range_loop)] // c is a class id, not just an index
fn fit_gbm(
    data: &[f64],
    n: usize,
    labels: &[usize],
    n_classes: usize,
    sample_weights: &[f64],
    config: &TrainConfig,
    seed: u64,
) -> (GbmModel, TrainingMeta) {
    let histogram = Histogram::build(data, n, config.histogram_bins);
    let binned = histogram.bin_all(data, n);
    let indices: Vec<usize> = (0..n).collect();
    let weight_sum: f64 = sample_weights.iter().sum();

    let mut scores = vec![vec![0.0f64; n_classes]; n];
    let mut probs = vec![vec![0.0f64; n_classes]; n];
    let mut residuals = vec![0.0f64; n];
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut per_round_losses = Vec::with_capacity(config.rounds);

    for _ in 0..config.rounds {
        for i in 0..n {
            probs[i].copy_from_slice(&scores[i]);
            linear::softmax_in_place(&mut probs[i]);
        }
        // one tree per class on this round's softmax residuals
        let mut round_trees = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            for i in 0..n {
                let y = if labels[i] == c { 1.0 } else { 0.0 };
                residuals[i] = sample_weights[i] * (y - probs[i][c]);
            }
            round_trees.push(tree::fit_tree(
                &binned,
                &residuals,
                &indices,
                &histogram,
                config.max_depth,
                config.min_leaf_size,
            ));
        }
        for (i, score_row) in scores.iter_mut().enumerate() {
            let row = &data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            for (c, tree) in round_trees.iter().enumerate() {
                score_row[c] += config.learning_rate * tree.predict(row);
            }
        }
        rounds.push(round_trees);

        let mut loss = 0.0;
        for i in 0..n {
            let mut p = scores[i].clone();
            linear::softmax_in_place(&mut p);
            loss -= sample_weights[i] * p[labels[i]].max(1e-15).ln();
        }
        per_round_losses.push(loss / weight_sum);
    }

    let final_loss = per_round_losses.last().copied().unwrap_or(f64::INFINITY);
    (
        GbmModel { rounds },
        TrainingMeta {
            seed,
            final_loss,
            per_round_losses,
            iterations: config.rounds,
            warning: None,
        },
    )
}

/// Predicted budget index: argmax of class scores, ties toward the cheaper
/// budget (lower index, consistent with the oracle's tie rule).
pub fn predict_budget(policy: &Policy, features: &FeatureVector) -> Result<usize> {
    if features.as_slice().len() != FEATURE_DIM {
        return Err(Error::Validation(format!(
            "feature vector has {} entries, expected {}",
            features.as_slice().len(),
            FEATURE_DIM
        )));
    }
    if let Some(c) = policy.constant {
        return Ok(c);
    }
    let scores = policy.scores(features);
    let mut best = 0;
    for k in 1..scores.len() {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Fraction of rows where the policy's prediction matches the oracle label.
pub fn imitation_accuracy(
    policy: &Policy,
    features: &[FeatureVector],
    oracle_labels: &[usize],
) -> Result<f64> {
    if features.len() != oracle_labels.len() {
        return Err(Error::Validation(format!(
            "{} feature rows for {} oracle labels",
            features.len(),
            oracle_labels.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::Validation("no rows to score".into()));
    }
    let mut hits = 0usize;
    for (f, &y) in features.iter().zip(oracle_labels) {
        if predict_budget(policy, f)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / features.len() as f64)
}

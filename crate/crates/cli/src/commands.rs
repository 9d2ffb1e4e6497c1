//! Subcommand implementations.

use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use budgetalloc::dataset::{
    estimate_utility, load_response_records, load_utility_table, write_utility_table_jsonl,
    BudgetSet, TableFormat, UtilityTable,
};
use budgetalloc::eval::{
    archetype_cluster, evaluate_allocation, parse_grid, pareto_sweep, regret_report, Method,
    SplitConfig,
};
use budgetalloc::features::{extract_features, FeatureVector, KeywordLexicons};
use budgetalloc::oracle::{self, RealizeMode};
use budgetalloc::policy::{
    imitation_accuracy, predict_budget, train_policy, Policy, PolicyKind, TrainConfig,
};
use budgetalloc::synth::{generate_workload, ArchetypeConfig};
use budgetalloc::{Error, Result};

use crate::artifacts::{
    read_features, read_labels, write_features, write_json, write_json_compact, write_labels,
    write_text, RunMeta,
};
use crate::config::{parse_list, ConfigFile, Resolver};

/// Flags shared by every table-reading subcommand.
#[derive(Debug, Args)]
pub struct TableArgs {
    /// Utility table (or response log) path.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Input format: jsonl, csv, or responses.
    #[arg(long)]
    pub format: Option<String>,
    /// Sample pool size when estimating from responses.
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Budget levels for response estimation, e.g. 1,2,4,8,16.
    #[arg(long)]
    pub budgets: Option<String>,
}

fn load_table(args: &TableArgs, r: &mut Resolver) -> Result<UtilityTable> {
    let path: PathBuf = r.required("table", args.table.clone().map(PathSpec))?.0;
    let format = r.value("format", args.format.clone(), "jsonl".to_string())?;
    match format.as_str() {
        "jsonl" => load_utility_table(&path, TableFormat::Jsonl),
        "csv" => load_utility_table(&path, TableFormat::Csv),
        "responses" => {
            let pool = r.value("pool_size", args.pool_size, 48)?;
            let budgets = r.value("budgets", args.budgets.clone(), "1,2,4,8,16".to_string())?;
            let levels: Vec<u32> = parse_list(&budgets, "budget level")?;
            let set = BudgetSet::identity(levels)?;
            let records = load_response_records(&path)?;
            estimate_utility(&records, &set, pool)
        }
        other => Err(Error::Config(format!(
            "unknown table format '{other}' (expected jsonl, csv, or responses)"
        ))),
    }
}

/// Newtype so paths can flow through the string-based resolver.
#[derive(Debug, Clone)]
struct PathSpec(PathBuf);

impl std::str::FromStr for PathSpec {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(PathSpec(PathBuf::from(s)))
    }
}

impl std::fmt::Display for PathSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.display())
    }
}

fn meta_value(meta: &RunMeta) -> Value {
    serde_json::to_value(meta).expect("meta serializes")
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Target average budget B.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Bisection stop tolerance on |avg_cost - B|.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Initial upper end of the price bracket.
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// How labels are realized from the mixture: stochastic or deterministic.
    #[arg(long)]
    pub realize: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path for the dual solution JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional output path for realized labels.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

pub fn solve(args: &SolveArgs, file: &ConfigFile) -> Result<()> {
    let mut r = Resolver::new(file);
    let table = load_table(&args.table, &mut r)?;
    let budget = r.required("budget", args.budget)?;
    let tol = r.value("tol", args.tol, 0.05)?;
    let max_iters = r.value("max_iters", args.max_iters, oracle::DEFAULT_MAX_ITERATIONS)?;
    let lambda_max = r.value("lambda_max", args.lambda_max, oracle::DEFAULT_LAMBDA_MAX)?;
    let realize = r.value("realize", args.realize.clone(), "stochastic".to_string())?;
    let seed = r.value("seed", args.seed, 0)?;
    let out = r.required("out", args.out.clone().map(PathSpec))?.0;
    let labels_out = r.optional("labels_out", args.labels_out.clone().map(PathSpec))?;

    let mode = match realize.as_str() {
        "stochastic" => RealizeMode::Stochastic,
        "deterministic" => RealizeMode::Deterministic,
        other => {
            return Err(Error::Config(format!(
                "unknown realize mode '{other}' (expected stochastic or deterministic)"
            )))
        }
    };

    let solution =
        oracle::solve_budget_with_bracket(&table, budget, tol, max_iters, seed, lambda_max)?;
    let meta = RunMeta::new("solve", seed, r.echo.clone());

    let mut doc = serde_json::to_value(&solution)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.insert("meta".into(), meta_value(&meta));
        if solution.constraint_slack {
            obj.insert(
                "notice".into(),
                json!(format!(
                    "constraint slack: unconstrained average cost {} is at or below target {}",
                    solution.achieved_cost, solution.target_budget
                )),
            );
        }
    }
    write_json(&out, &doc)?;

    if let Some(labels_path) = labels_out {
        let labels = oracle::realize_labels(&solution, &table, seed, mode)?;
        write_labels(&labels_path.0, &meta, table.budget_set(), &labels)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature JSONL path.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Labels JSON path (budget indices; from `solve --labels-out`).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Classifier kind: gbm or linear.
    #[arg(long)]
    pub kind: Option<String>,
    /// Budget levels when the labels file does not carry them.
    #[arg(long)]
    pub budgets: Option<String>,
    /// Costs matching --budgets (identity when omitted).
    #[arg(long)]
    pub costs: Option<String>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub histogram_bins: Option<usize>,
    #[arg(long)]
    pub min_leaf_size: Option<usize>,
    /// Weight classes inversely to their frequency.
    #[arg(long)]
    pub class_weighting: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn resolve_train_config(
    r: &mut Resolver,
    rounds: Option<usize>,
    max_depth: Option<usize>,
    learning_rate: Option<f64>,
    histogram_bins: Option<usize>,
    min_leaf_size: Option<usize>,
    class_weighting: bool,
) -> Result<TrainConfig> {
    let defaults = TrainConfig::default();
    Ok(TrainConfig {
        rounds: r.value("rounds", rounds, defaults.rounds)?,
        max_depth: r.value("max_depth", max_depth, defaults.max_depth)?,
        learning_rate: r.value("learning_rate", learning_rate, defaults.learning_rate)?,
        histogram_bins: r.value("histogram_bins", histogram_bins, defaults.histogram_bins)?,
        min_leaf_size: r.value("min_leaf_size", min_leaf_size, defaults.min_leaf_size)?,
        class_weighting: r.value("class_weighting", class_weighting.then_some(true), false)?,
        ..defaults
    })
}

pub fn train(args: &TrainArgs, file: &ConfigFile) -> Result<()> {
    let mut r = Resolver::new(file);
    let features_path = r.required("features", args.features.clone().map(PathSpec))?.0;
    let labels_path = r.required("labels", args.labels.clone().map(PathSpec))?.0;
    let kind: PolicyKind = r.value("kind", args.kind.clone(), "gbm".to_string())?.parse()?;
    let config = resolve_train_config(
        &mut r,
        args.rounds,
        args.max_depth,
        args.learning_rate,
        args.histogram_bins,
        args.min_leaf_size,
        args.class_weighting,
    )?;
    let seed = r.value("seed", args.seed, 0)?;
    let out = r.required("out", args.out.clone().map(PathSpec))?.0;

    let (_, features) = read_features(&features_path)?;
    let (labels, labels_set) = read_labels(&labels_path)?;
    let budget_set = match (&args.budgets, labels_set) {
        (Some(spec), _) => {
            r.note("budgets", spec);
            let levels: Vec<u32> = parse_list(spec, "budget level")?;
            match &args.costs {
                Some(cost_spec) => {
                    r.note("costs", cost_spec);
                    BudgetSet::new(levels, parse_list(cost_spec, "cost")?)?
                }
                None => BudgetSet::identity(levels)?,
            }
        }
        (None, Some(set)) => set,
        (None, None) => {
            return Err(Error::Config(
                "labels file lacks budget levels; pass --budgets".into(),
            ))
        }
    };

    let policy = train_policy(&features, &labels, kind, &budget_set, &config, seed)?;
    let meta = RunMeta::new("train", seed, r.echo.clone());
    let mut doc = serde_json::to_value(&policy)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.insert("meta".into(), meta_value(&meta));
        obj.insert(
            "training_imitation_accuracy".into(),
            json!(imitation_accuracy(&policy, &features, &labels)?),
        );
    }
    write_json_compact(&out, &doc)
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn predict(args: &PredictArgs, file: &ConfigFile) -> Result<()> {
    let mut r = Resolver::new(file);
    let policy_path = r.required("policy", args.policy.clone().map(PathSpec))?.0;
    let features_path = r.required("features", args.features.clone().map(PathSpec))?.0;
    let out = r.required("out", args.out.clone().map(PathSpec))?.0;

    let policy = Policy::from_json(&std::fs::read_to_string(&policy_path)?)?;
    let (ids, features) = read_features(&features_path)?;
    let meta = RunMeta::new("predict", 0, r.echo.clone());

    let mut lines = Vec::with_capacity(features.len() + 1);
    lines.push(serde_json::to_string(&json!({ "meta": meta_value(&meta) }))?);
    for (id, f) in ids.iter().zip(&features) {
        let k = predict_budget(&policy, f)?;
        lines.push(serde_json::to_string(&json!({
            "question_id": id,
            "budget_index": k,
            "budget_level": policy.budget_set().level(k),
        }))?);
    }
    write_text(&out, &(lines.join("\n") + "\n"))
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Labels to score (labels JSON or prediction JSONL).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Oracle labels for imitation metrics.
    #[arg(long)]
    pub oracle_labels: Option<PathBuf>,
    /// Dual solution JSON; supplies lambda and target for the regret ledger.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Price for the regret ledger (overrides --solution).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Target budget for the regret ledger (overrides --solution).
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Regret/recovery ledger output path.
    #[arg(long)]
    pub regret_out: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs, file: &ConfigFile) -> Result<()> {
    let mut r = Resolver::new(file);
    let table = load_table(&args.table, &mut r)?;
    let labels_path = r.required("labels", args.labels.clone().map(PathSpec))?.0;
    let oracle_path = r.optional("oracle_labels", args.oracle_labels.clone().map(PathSpec))?;
    let solution_path = r.optional("solution", args.solution.clone().map(PathSpec))?;
    let out = r.required("out", args.out.clone().map(PathSpec))?.0;
    let regret_out = r.optional("regret_out", args.regret_out.clone().map(PathSpec))?;

    let (labels, _) = read_labels(&labels_path)?;
    let oracle_labels = match oracle_path {
        Some(p) => Some(read_labels(&p.0)?.0),
        None => None,
    };

    // lambda/budget from flags, else from the solution document
    let (mut lambda, mut budget) = (args.lambda, args.budget);
    if let Some(p) = solution_path {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&p.0)?)?;
        if lambda.is_none() {
            lambda = doc.get("lambda_star").and_then(Value::as_f64);
        }
        if budget.is_none() {
            budget = doc.get("target_budget").and_then(Value::as_f64);
        }
    }
    if let Some(l) = lambda {
        r.note("lambda", l);
    }
    if let Some(b) = budget {
        r.note("budget", b);
    }

    let meta = RunMeta::new("eval", 0, r.echo.clone());
    let report = evaluate_allocation(&table, &labels, oracle_labels.as_deref())?;
    write_json(&out, &json!({ "meta": meta_value(&meta), "report": report }))?;

    if let Some(regret_path) = regret_out {
        let (Some(lambda), Some(budget)) = (lambda, budget) else {
            return Err(Error::Config(
                "regret ledger needs --lambda and --budget (or --solution)".into(),
            ));
        };
        let ledger = regret_report(&table, &labels, lambda, budget)?;
        write_json(
            &regret_path.0,
            &json!({ "meta": meta_value(&meta), "report": ledger }),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Feature JSONL; derived from table texts when omitted.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Keyword lexicon file for text-derived features.
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// Budget grid as start:stop:count (inclusive endpoints).
    #[arg(long)]
    pub grid: Option<String>,
    /// Comma list from {oracle, ours, fixed, random, heuristic}.
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma list of split/training seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Classifier for the "ours" method.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub eval_fraction: Option<f64>,
    #[arg(long)]
    pub min_class_members: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn sweep(args: &SweepArgs, file: &ConfigFile) -> Result<()> {
    let mut r = Resolver::new(file);
    let table = load_table(&args.table, &mut r)?;
    let features_path = r.optional("features", args.features.clone().map(PathSpec))?;
    let grid_spec = r.required("grid", args.grid.clone())?;
    let methods_spec = r.value(
        "methods",
        args.methods.clone(),
        "oracle,ours,fixed,random,heuristic".to_string(),
    )?;
    let seeds_spec = r.value("seeds", args.seeds.clone(), "0,1,2".to_string())?;
    let kind: PolicyKind = r.value("kind", args.kind.clone(), "gbm".to_string())?.parse()?;
    let split = SplitConfig {
        eval_fraction: r.value("eval_fraction", args.eval_fraction, 0.2)?,
        min_class_members: r.value("min_class_members", args.min_class_members, 5)?,
    };
    let defaults = TrainConfig::default();
    let train_config = TrainConfig {
        rounds: r.value("rounds", args.rounds, defaults.rounds)?,
        ..defaults
    };
    let out = r.required("out", args.out.clone().map(PathSpec))?.0;

    let grid = parse_grid(&grid_spec)?;
    let methods: Vec<Method> = methods_spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    let seeds: Vec<u64> = parse_list(&seeds_spec, "seed")?;

    let lexicons = match r.optional("lexicons", args.lexicons.clone().map(PathSpec))? {
        Some(p) => KeywordLexicons::from_file(&p.0)?,
        None => KeywordLexicons::default(),
    };
    let features = match features_path {
        Some(p) => read_features(&p.0)?.1,
        None => derive_features(&table, &lexicons)?,
    };

    let series = pareto_sweep(
        &table,
        &features,
        &grid,
        &methods,
        &split,
        &train_config,
        kind,
        &seeds,
    )?;
    let meta = RunMeta::new("sweep", seeds.first().copied().unwrap_or(0), r.echo.clone());
    write_text(&out, &series.to_csv(Some(&meta.comment_line())))
}

/// Extract features from the table's question texts (entropy estimates
/// pass through when present).
fn derive_features(table: &UtilityTable, lexicons: &KeywordLexicons) -> Result<Vec<FeatureVector>> {
    let texts = table.question_texts().ok_or_else(|| {
        Error::Validation(
            "table has no question texts; supply --features".into(),
        )
    })?;
    let entropies = table.entropy_estimates();
    texts
        .iter()
        .enumerate()
        .map(|(i, text)| extract_features(text, entropies.map(|e| e[i]), lexicons))
        .collect()
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of questions.
    #[arg(long)]
    pub n: Option<usize>,
    /// Budget levels, e.g. 1,2,4,8,16.
    #[arg(long)]
    pub budgets: Option<String>,
    /// Archetype mixture weights (easy,responsive,diminishing,hard).
    #[arg(long)]
    pub weights: Option<String>,
    /// Feature signal strength in [0,1].
    #[arg(long)]
    pub signal: Option<f64>,
    /// Accuracy noise scale.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_table: Option<PathBuf>,
    #[arg(long)]
    pub out_features: Option<PathBuf>,
    /// Sidecar with archetype assignments and generation parameters.
    #[arg(long)]
    pub out_meta: Option<PathBuf>,
}

pub fn synth(args: &SynthArgs, file: &ConfigFile) -> Result<()> {
    let mut r = Resolver::new(file);
    let n = r.value("n", args.n, 400)?;
    let budgets = r.value("budgets", args.budgets.clone(), "1,2,4,8,16".to_string())?;
    let weights_spec = r.value(
        "weights",
        args.weights.clone(),
        "0.35,0.25,0.20,0.20".to_string(),
    )?;
    let mut config = ArchetypeConfig::default();
    config.feature_signal_strength =
        r.value("signal", args.signal, config.feature_signal_strength)?;
    config.noise_scale = r.value("noise", args.noise, config.noise_scale)?;
    let weights: Vec<f64> = parse_list(&weights_spec, "mixture weight")?;
    if weights.len() != 4 {
        return Err(Error::Config(format!(
            "expected 4 mixture weights, got {}",
            weights.len()
        )));
    }
    config.mixture_weights = [weights[0], weights[1], weights[2], weights[3]];
    let seed = r.value("seed", args.seed, 0)?;
    let out_table = r.required("out_table", args.out_table.clone().map(PathSpec))?.0;
    let out_features = r
        .required("out_features", args.out_features.clone().map(PathSpec))?
        .0;
    let out_meta = r.optional("out_meta", args.out_meta.clone().map(PathSpec))?;

    let set = BudgetSet::identity(parse_list(&budgets, "budget level")?)?;
    let workload = generate_workload(n, &set, &config, seed)?;
    let meta = RunMeta::new("synth", seed, r.echo.clone());

    let mut table_bytes = Vec::new();
    write_utility_table_jsonl(
        &workload.table,
        &mut table_bytes,
        Some(&json!({ "meta": meta_value(&meta) })),
    )?;
    write_text(&out_table, std::str::from_utf8(&table_bytes).expect("utf8"))?;

    write_features(
        &out_features,
        &meta,
        workload.table.question_ids(),
        &workload.features,
    )?;

    if let Some(meta_path) = out_meta {
        let assignments: Vec<&str> =
            workload.assignments.iter().map(|a| a.name()).collect();
        write_json(
            &meta_path.0,
            &json!({
                "meta": meta_value(&meta),
                "generator": config,
                "assignments": assignments,
            }),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cluster(args: &ClusterArgs, file: &ConfigFile) -> Result<()> {
    let mut r = Resolver::new(file);
    let table = load_table(&args.table, &mut r)?;
    let k = r.value("k", args.k, 4)?;
    let seed = r.value("seed", args.seed, 0)?;
    let out = r.required("out", args.out.clone().map(PathSpec))?.0;

    let (assignments, centroids) = archetype_cluster(&table, k, seed)?;
    let mut sizes = vec![0usize; k];
    for &a in &assignments {
        sizes[a] += 1;
    }
    let meta = RunMeta::new("cluster", seed, r.echo.clone());
    write_json(
        &out,
        &json!({
            "meta": meta_value(&meta),
            "budgets": table.budget_set().levels(),
            "assignments": assignments,
            "centroids": centroids,
            "cluster_sizes": sizes,
        }),
    )
}


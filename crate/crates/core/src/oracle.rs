//! Lagrangian relaxation of the budget-constrained allocation problem.
//!
//! Attaching a price `lambda` to the average-cost constraint decouples the
//! problem across questions: each row independently picks the budget with
//! the best net value `Acc(x,b) - lambda * C(b)`. The induced average cost
//! is non-increasing in `lambda`, so a target budget is met by binary search
//! on the price, with stochastic mixing between the two bracketing label
//! sets to hit the target exactly in expectation. A brute-force enumerator
//! over all deterministic policies (and their two-point mixtures) serves as
//! the independent correctness oracle for small instances.

use serde::{Deserialize, Serialize};

use crate::dataset::{BudgetSet, UtilityTable};
use crate::error::{Error, Result};
use crate::seed;
use rand::Rng;

/// Default upper end of the lambda search bracket.
pub const DEFAULT_LAMBDA_MAX: f64 = 5.0;
/// Default number of bisection iterations.
pub const DEFAULT_MAX_ITERATIONS: usize = 50;
/// Enumeration guard for the brute-force solver: `N * log2(K)` at most this.
pub const BRUTE_FORCE_BITS: f64 = 40.0;

/// Net values `f_lambda(x, b_k) = acc[k] - lambda * C(b_k)` for one row.
pub fn net_values(acc_row: &[f64], lambda: f64, budget_set: &BudgetSet) -> Result<Vec<f64>> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Validation(format!(
            "lambda must be a non-negative real, got {lambda}"
        )));
    }
    if acc_row.len() != budget_set.len() {
        return Err(Error::Validation(format!(
            "accuracy row has {} entries for {} budgets",
            acc_row.len(),
            budget_set.len()
        )));
    }
    Ok(acc_row
        .iter()
        .zip(budget_set.costs())
        .map(|(&a, &c)| a - lambda * c)
        .collect())
}

/// Argmax of net value for one row, ties toward the cheaper budget and
/// toward the lower index among equal-cost ties.
///
/// Costs are non-decreasing with index, so both tie rules reduce to keeping
/// the first maximum.
fn best_budget(acc_row: &[f64], lambda: f64, costs: &[f64]) -> usize {
    let mut best_k = 0;
    let mut best_value = acc_row[0] - lambda * costs[0];
    for k in 1..acc_row.len() {
        let value = acc_row[k] - lambda * costs[k];
        if value > best_value {
            best_value = value;
            best_k = k;
        }
    }
    best_k
}

/// Oracle allocation `b*(x_i; lambda)` for every row.
pub fn oracle_allocation(table: &UtilityTable, lambda: f64) -> Result<Vec<usize>> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Validation(format!(
            "lambda must be a non-negative real, got {lambda}"
        )));
    }
    let costs = table.budget_set().costs();
    Ok(table.rows().map(|row| best_budget(row, lambda, costs)).collect())
}

/// Average cost induced by the oracle allocation at price `lambda`.
pub fn average_cost(table: &UtilityTable, lambda: f64) -> Result<f64> {
    let labels = oracle_allocation(table, lambda)?;
    Ok(mean_cost(table.budget_set(), &labels))
}

/// Mean cost of a labeling.
pub fn mean_cost(budget_set: &BudgetSet, labels: &[usize]) -> f64 {
    labels.iter().map(|&k| budget_set.cost(k)).sum::<f64>() / labels.len() as f64
}

/// Mean accuracy of a labeling.
pub fn mean_accuracy(table: &UtilityTable, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &k)| table.acc(i, k))
        .sum::<f64>()
        / labels.len() as f64
}

/// Crossover price between two budgets of one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    /// Index of the more expensive budget.
    pub expensive: usize,
    /// Index of the cheaper budget.
    pub cheap: usize,
    /// Price at which the two net values are equal.
    pub lambda: f64,
}

/// All pairwise crossover points of one row. Pairs with equal costs are
/// omitted; crossovers may be negative when the expensive budget never wins.
pub fn crossover_points(acc_row: &[f64], budget_set: &BudgetSet) -> Vec<Crossover> {
    let costs = budget_set.costs();
    let mut out = Vec::new();
    for hi in 0..acc_row.len() {
        for lo in 0..acc_row.len() {
            if costs[hi] > costs[lo] {
                out.push(Crossover {
                    expensive: hi,
                    cheap: lo,
                    lambda: (acc_row[hi] - acc_row[lo]) / (costs[hi] - costs[lo]),
                });
            }
        }
    }
    out
}

/// Dual function `G(lambda) = mean_i max_b [Acc(x_i,b) - lambda C(b)] + lambda B`.
pub fn dual_value(table: &UtilityTable, lambda: f64, target_budget: f64) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Validation(format!(
            "lambda must be a non-negative real, got {lambda}"
        )));
    }
    let costs = table.budget_set().costs();
    let sum: f64 = table
        .rows()
        .map(|row| {
            let k = best_budget(row, lambda, costs);
            row[k] - lambda * costs[k]
        })
        .sum();
    Ok(sum / table.len() as f64 + lambda * target_budget)
}

/// Result of targeting an average budget by binary search on the price.
///
/// `labels_lo` is the oracle labeling at the lower bracket price (cost at or
/// above the target) and `labels_hi` at the upper price (cost at or below);
/// mixing them with probability `mix_weight` on `labels_lo` hits the target
/// exactly in expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub lambda_star: f64,
    /// Bracket price producing `labels_lo` (cost at or above target).
    pub lambda_lo: f64,
    /// Bracket price producing `labels_hi` (cost at or below target).
    pub lambda_hi: f64,
    pub labels_lo: Vec<usize>,
    pub labels_hi: Vec<usize>,
    pub mix_weight: f64,
    pub achieved_cost: f64,
    pub target_budget: f64,
    pub iterations: usize,
    pub dual_value: f64,
    pub seed: u64,
    /// Set when the price-zero optimum already fits under the target and
    /// the constraint is slack.
    pub constraint_slack: bool,
}

impl DualSolution {
    pub fn len(&self) -> usize {
        self.labels_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels_lo.is_empty()
    }
}

/// Binary-search the price so that the oracle's average cost matches the
/// target budget.
///
/// The bracket starts at `[0, DEFAULT_LAMBDA_MAX]` and the upper end doubles
/// until its cost falls to the target or below. If the unconstrained optimum
/// (`lambda = 0`) already costs no more than the target, the constraint is
/// slack and that solution is returned unmixed. Stopping follows the
/// tolerance on `|avg_cost(mid) - target|` or the iteration cap; both
/// bracket endpoints are retained for mixing regardless.
pub fn solve_budget(
    table: &UtilityTable,
    target_budget: f64,
    tolerance: f64,
    max_iterations: usize,
    seed: u64,
) -> Result<DualSolution> {
    solve_budget_with_bracket(
        table,
        target_budget,
        tolerance,
        max_iterations,
        seed,
        DEFAULT_LAMBDA_MAX,
    )
}

/// `solve_budget` with an explicit initial upper bracket.
pub fn solve_budget_with_bracket(
    table: &UtilityTable,
    target_budget: f64,
    tolerance: f64,
    max_iterations: usize,
    seed: u64,
    lambda_max: f64,
) -> Result<DualSolution> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if max_iterations == 0 {
        return Err(Error::Config("max_iterations must be at least 1".into()));
    }
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        return Err(Error::Config(format!(
            "lambda bracket must be positive, got {lambda_max}"
        )));
    }
    let min_cost = table.budget_set().min_cost();
    if target_budget < min_cost {
        return Err(Error::Infeasible(format!(
            "target budget {} is below the cheapest average cost {}",
            target_budget, min_cost
        )));
    }

    let labels_at_zero = oracle_allocation(table, 0.0)?;
    let cost_at_zero = mean_cost(table.budget_set(), &labels_at_zero);
    if cost_at_zero <= target_budget {
        // Constraint slack: the free-compute optimum already fits.
        let dual = dual_value(table, 0.0, target_budget)?;
        return Ok(DualSolution {
            lambda_star: 0.0,
            lambda_lo: 0.0,
            lambda_hi: 0.0,
            labels_lo: labels_at_zero.clone(),
            labels_hi: labels_at_zero,
            mix_weight: 1.0,
            achieved_cost: cost_at_zero,
            target_budget,
            iterations: 0,
            dual_value: dual,
            seed,
            constraint_slack: true,
        });
    }

    // Widen the upper bracket until its cost is at or below the target.
    let mut hi = lambda_max;
    let mut cost_hi = average_cost(table, hi)?;
    let mut widenings = 0;
    while cost_hi > target_budget {
        widenings += 1;
        if widenings > 64 {
            return Err(Error::Numeric(format!(
                "lambda bracket exhausted at {}: avg cost {} still above target {}",
                hi, cost_hi, target_budget
            )));
        }
        hi *= 2.0;
        cost_hi = average_cost(table, hi)?;
    }

    // Invariant: avg_cost(lo) > target >= avg_cost(hi).
    let mut lo = 0.0f64;
    let mut cost_lo = cost_at_zero;
    let mut iterations = 0;
    for _ in 0..max_iterations {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let cost_mid = average_cost(table, mid)?;
        if cost_mid > target_budget {
            lo = mid;
            cost_lo = cost_mid;
        } else {
            hi = mid;
            cost_hi = cost_mid;
        }
        if (cost_mid - target_budget).abs() <= tolerance {
            break;
        }
    }

    let labels_lo = oracle_allocation(table, lo)?;
    let labels_hi = oracle_allocation(table, hi)?;
    // w * cost_lo + (1 - w) * cost_hi = target, with cost_lo > target >= cost_hi.
    let mix_weight = ((target_budget - cost_hi) / (cost_lo - cost_hi)).clamp(0.0, 1.0);
    let achieved_cost = mix_weight * cost_lo + (1.0 - mix_weight) * cost_hi;
    // Report the endpoint whose cost lands closer to the target; ties go to
    // the feasible (higher-price) side.
    let lambda_star = if (cost_lo - target_budget).abs() < (target_budget - cost_hi).abs() {
        lo
    } else {
        hi
    };
    let dual = dual_value(table, lambda_star, target_budget)?;
    Ok(DualSolution {
        lambda_star,
        lambda_lo: lo,
        lambda_hi: hi,
        labels_lo,
        labels_hi,
        mix_weight,
        achieved_cost,
        target_budget,
        iterations,
        dual_value: dual,
        seed,
        constraint_slack: false,
    })
}

/// How a mixed dual solution is turned into one concrete labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizeMode {
    /// Per differing instance, pick the expensive labeling with probability
    /// `mix_weight` using the seeded generator.
    Stochastic,
    /// Give the expensive labeling to the instances with the highest
    /// governing crossover price, as many as fit under the target.
    Deterministic,
}

/// Realize a concrete labeling from a mixed solution.
///
/// Deterministic mode needs the table to recover per-instance crossovers;
/// it sorts the differing instances by crossover price descending and
/// assigns `labels_lo` to the longest prefix whose mean cost stays at or
/// under the target.
pub fn realize_labels(
    solution: &DualSolution,
    table: &UtilityTable,
    seed: u64,
    mode: RealizeMode,
) -> Result<Vec<usize>> {
    if solution.labels_lo.len() != solution.labels_hi.len() {
        return Err(Error::Validation(
            "solution label sets differ in length".into(),
        ));
    }
    if solution.labels_lo.len() != table.len() {
        return Err(Error::Validation(format!(
            "solution has {} labels for a table of {} rows",
            solution.labels_lo.len(),
            table.len()
        )));
    }
    let k = table.num_budgets();
    if solution
        .labels_lo
        .iter()
        .chain(solution.labels_hi.iter())
        .any(|&l| l >= k)
    {
        return Err(Error::Validation("label index out of range".into()));
    }

    match mode {
        RealizeMode::Stochastic => {
            let mut rng = seed::rng(seed, "realize", 0);
            Ok(solution
                .labels_lo
                .iter()
                .zip(&solution.labels_hi)
                .map(|(&lo, &hi)| {
                    if lo == hi || rng.gen_bool(solution.mix_weight) {
                        lo
                    } else {
                        hi
                    }
                })
                .collect())
        }
        RealizeMode::Deterministic => {
            let costs = table.budget_set().costs();
            let mut labels = solution.labels_hi.clone();
            let mut total: f64 = labels.iter().map(|&l| costs[l]).sum();
            let n = labels.len() as f64;

            // Differing instances ordered by their governing crossover,
            // highest price first; index ascending breaks exact ties.
            let mut differing: Vec<(usize, f64)> = (0..labels.len())
                .filter(|&i| solution.labels_lo[i] != solution.labels_hi[i])
                .map(|i| {
                    let lo = solution.labels_lo[i];
                    let hi = solution.labels_hi[i];
                    let cross =
                        (table.acc(i, lo) - table.acc(i, hi)) / (costs[lo] - costs[hi]);
                    (i, cross)
                })
                .collect();
            differing.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

            for (i, _) in differing {
                let delta = costs[solution.labels_lo[i]] - costs[solution.labels_hi[i]];
                if (total + delta) / n <= solution.target_budget {
                    labels[i] = solution.labels_lo[i];
                    total += delta;
                } else {
                    break;
                }
            }
            Ok(labels)
        }
    }
}

/// Per-instance budget distributions: at most two nonzero entries per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedAllocation {
    pub probs: Vec<Vec<f64>>,
}

impl MixedAllocation {
    /// Expected mean cost under the row distributions.
    pub fn expected_cost(&self, budget_set: &BudgetSet) -> f64 {
        self.probs
            .iter()
            .map(|row| {
                row.iter()
                    .zip(budget_set.costs())
                    .map(|(&p, &c)| p * c)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / self.probs.len() as f64
    }

    /// Expected mean accuracy under the row distributions.
    pub fn expected_accuracy(&self, table: &UtilityTable) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(k, &p)| p * table.acc(i, k))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / self.probs.len() as f64
    }
}

/// Exhaustive solution of the constrained primal on a small table.
#[derive(Debug, Clone, PartialEq)]
pub enum BruteForceSolution {
    Deterministic(Vec<usize>),
    Mixed(MixedAllocation),
}

/// Enumerate every deterministic policy (and, in mixture mode, the
/// two-point mixtures along their frontier) and return the exact optimum
/// subject to mean cost at most `target_budget`.
///
/// Guarded by `N * log2(K) <= BRUTE_FORCE_BITS`.
pub fn brute_force_primal(
    table: &UtilityTable,
    target_budget: f64,
    allow_mixtures: bool,
) -> Result<(f64, BruteForceSolution)> {
    let n = table.len();
    let k = table.num_budgets();
    let bits = n as f64 * (k as f64).log2();
    if bits > BRUTE_FORCE_BITS {
        return Err(Error::TooLarge(format!(
            "N*log2(K) = {:.1} exceeds {}; shrink the instance",
            bits, BRUTE_FORCE_BITS
        )));
    }
    if target_budget < table.budget_set().min_cost() {
        return Err(Error::Infeasible(format!(
            "target budget {} below the cheapest policy cost {}",
            target_budget,
            table.budget_set().min_cost()
        )));
    }

    let costs = table.budget_set().costs();

    // Depth-first walk over all K^N policies. Sums are rebuilt along the
    // path, so per-policy rounding stays O(N * eps) instead of drifting
    // over the whole enumeration.
    struct Walk<'a> {
        table: &'a UtilityTable,
        costs: &'a [f64],
        k: usize,
        inv_n: f64,
        target: f64,
        allow_mixtures: bool,
        digits: Vec<usize>,
        best_value: f64,
        best_labels: Vec<usize>,
        frontier_points: Vec<(f64, f64, Vec<usize>)>,
    }

    impl Walk<'_> {
        fn descend(&mut self, pos: usize, cost_sum: f64, value_sum: f64) {
            if pos == self.digits.len() {
                let mean_c = cost_sum * self.inv_n;
                let mean_v = value_sum * self.inv_n;
                if mean_c <= self.target && mean_v > self.best_value {
                    self.best_value = mean_v;
                    self.best_labels = self.digits.clone();
                }
                if self.allow_mixtures {
                    self.frontier_points.push((mean_c, mean_v, self.digits.clone()));
                }
                return;
            }
            for d in 0..self.k {
                self.digits[pos] = d;
                self.descend(
                    pos + 1,
                    cost_sum + self.costs[d],
                    value_sum + self.table.acc(pos, d),
                );
            }
        }
    }

    let mut walk = Walk {
        table,
        costs,
        k,
        inv_n: 1.0 / n as f64,
        target: target_budget,
        allow_mixtures,
        digits: vec![0; n],
        best_value: f64::NEG_INFINITY,
        best_labels: Vec::new(),
        frontier_points: Vec::new(),
    };
    walk.descend(0, 0.0, 0.0);

    if walk.best_labels.is_empty() {
        return Err(Error::Infeasible(format!(
            "no deterministic policy fits under budget {}",
            target_budget
        )));
    }
    if allow_mixtures {
        let (value, mixed) = mix_on_frontier(
            &walk.frontier_points,
            target_budget,
            n,
            k,
            walk.best_value,
            &walk.best_labels,
        );
        Ok((value, BruteForceSolution::Mixed(mixed)))
    } else {
        Ok((walk.best_value, BruteForceSolution::Deterministic(walk.best_labels)))
    }
}

/// LP optimum at the target via the upper concave envelope of the
/// deterministic (cost, value) cloud, realized as a two-policy mixture.
fn mix_on_frontier(
    points: &[(f64, f64, Vec<usize>)],
    target_budget: f64,
    n: usize,
    k: usize,
    best_pure_value: f64,
    best_pure_labels: &[usize],
) -> (f64, MixedAllocation) {
    // Efficient frontier: sort by cost, keep strict value improvements.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .partial_cmp(&points[b].0)
            .unwrap()
            .then(points[b].1.partial_cmp(&points[a].1).unwrap())
    });
    let mut frontier: Vec<usize> = Vec::new();
    let mut best_v = f64::NEG_INFINITY;
    for idx in order {
        if points[idx].1 > best_v {
            best_v = points[idx].1;
            frontier.push(idx);
        }
    }
    // Upper concave hull over the frontier (costs strictly increasing).
    let mut hull: Vec<usize> = Vec::new();
    for &idx in &frontier {
        while hull.len() >= 2 {
            let a = &points[hull[hull.len() - 2]];
            let b = &points[hull[hull.len() - 1]];
            let c = &points[idx];
            // drop b if it lies on or under chord a-c
            let lhs = (b.1 - a.1) * (c.0 - a.0);
            let rhs = (c.1 - a.1) * (b.0 - a.0);
            if lhs <= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(idx);
    }

    let pure = |labels: &[usize], value: f64| {
        let mut probs = vec![vec![0.0; k]; n];
        for (i, &l) in labels.iter().enumerate() {
            probs[i][l] = 1.0;
        }
        (value, MixedAllocation { probs })
    };

    let last = &points[*hull.last().unwrap()];
    if target_budget >= last.0 {
        return pure(&last.2, last.1);
    }
    // Find the hull segment spanning the target.
    for w in hull.windows(2) {
        let a = &points[w[0]];
        let b = &points[w[1]];
        if a.0 <= target_budget && target_budget <= b.0 {
            if b.0 - a.0 <= f64::EPSILON {
                return pure(&b.2, b.1);
            }
            let alpha = (b.0 - target_budget) / (b.0 - a.0); // weight on a
            let value = alpha * a.1 + (1.0 - alpha) * b.1;
            if value <= best_pure_value {
                return pure(best_pure_labels, best_pure_value);
            }
            let mut probs = vec![vec![0.0; k]; n];
            for i in 0..n {
                if a.2[i] == b.2[i] {
                    probs[i][a.2[i]] = 1.0;
                } else {
                    probs[i][a.2[i]] += alpha;
                    probs[i][b.2[i]] += 1.0 - alpha;
                }
            }
            return (value, MixedAllocation { probs });
        }
    }
    // Target below the cheapest frontier point can't happen: the cheapest
    // policy costs C(b_1) <= target by the feasibility check above.
    pure(best_pure_labels, best_pure_value)
}

//! Shared generators for the integration suites.
#![allow(dead_code)]

use budgetalloc::dataset::{BudgetSet, UtilityTable};
use budgetalloc::seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed_value: u64, domain: &str) -> ChaCha8Rng {
    seed::rng(seed_value, domain, 0)
}

/// Random table with identity costs over power-of-two levels.
pub fn random_table(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> UtilityTable {
    let n = rng.gen_range(1..=max_n);
    let k = rng.gen_range(2..=max_k.max(2));
    let levels: Vec<u32> = (0..k).map(|i| 1u32 << i).collect();
    let set = BudgetSet::identity(levels).unwrap();
    table_with(rng, n, set)
}

/// Random table with random non-decreasing costs (ties possible).
pub fn random_table_random_costs(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    max_k: usize,
) -> UtilityTable {
    let n = rng.gen_range(1..=max_n);
    let k = rng.gen_range(2..=max_k.max(2));
    let levels: Vec<u32> = (1..=k as u32).collect();
    let mut costs: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..10.0)).collect();
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // occasionally force exact cost ties to exercise the tie rules
    for i in 1..k {
        if rng.gen_bool(0.15) {
            costs[i] = costs[i - 1];
        }
    }
    let set = BudgetSet::new(levels, costs).unwrap();
    table_with(rng, n, set)
}

fn table_with(rng: &mut ChaCha8Rng, n: usize, set: BudgetSet) -> UtilityTable {
    let k = set.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    let ids = (0..n).map(|i| format!("q{i}")).collect();
    UtilityTable::new(ids, rows, set).unwrap()
}

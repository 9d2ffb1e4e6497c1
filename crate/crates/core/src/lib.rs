//! Budget-constrained test-time compute allocation.
//!
//! Given an `N x K` table of per-question accuracies at `K` budget levels,
//! this crate solves the constrained program "maximize mean accuracy subject
//! to mean cost at most B" exactly via Lagrangian decomposition, distills
//! the resulting oracle labels into a lightweight classifier over cheap text
//! features, and evaluates policies, baselines, and the method's theoretical
//! guarantees numerically.
//!
//! Module map:
//! - [`dataset`]: budget sets, utility tables, ingestion, majority-vote
//!   utility estimation
//! - [`oracle`]: net values, oracle allocation, dual binary search, exact
//!   budget targeting by mixing, brute-force reference solver
//! - [`features`]: the frozen 16-feature text representation
//! - [`policy`]: gradient-boosted and linear budget classifiers
//! - [`synth`]: four-archetype synthetic workload generator
//! - [`eval`]: scoring, baselines, regret/recovery ledgers, Pareto sweeps,
//!   accuracy-curve clustering

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod oracle;
pub mod policy;
pub mod seed;
pub mod synth;

pub use dataset::{BudgetSet, ResponseRecord, UtilityTable};
pub use error::{Error, Result};
pub use eval::{EvalReport, RegretReport};
pub use features::{FeatureVector, KeywordLexicons};
pub use oracle::DualSolution;
pub use policy::{Policy, PolicyKind, TrainConfig};

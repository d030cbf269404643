//! Optimizers: Adam, the genetic algorithms guided by quality tables, and
//! the memetic search that mixes both.

mod adam;
mod ga;
mod memetic;
mod tables;

pub use adam::{adam_step, AdamState};
pub use ga::{
    crossover, elementary_ga, generations_for_budget, mutate, random_population, select_proportional,
    tree_structured_ga, EvalRecord, EvaluationLog, GAConfig, Genome,
};
pub(crate) use memetic::refine;
pub use memetic::{memetic_optimize, DifferentiableObjective, MemeticConfig, MemeticResult};
pub use tables::{bin_score, collect_quality_tables, genome_quality, QualityTables, TableConfig, MAX_SCORE};

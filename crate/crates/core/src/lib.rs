//! Search harness for architecture optimization over tabular
//! adversarial-robustness benchmarks.
//!
//! The crate provides:
//! - [`search_space`]: the 6-edge, 5-operation cell genotype and its
//!   enumeration/serialization.
//! - [`benchmark`]: complete accuracy tables (real CSV ingestion or seeded
//!   synthetic surrogates) with budget-metered evaluation.
//! - [`metaheuristics`]: six baseline optimizers (GA, PSO, DE, CMA-ES, JADE,
//!   SHADE) behind one ask/tell contract, plus random and exhaustive search.
//! - [`llm`]: the LLM-guided single-solution optimizer: prompt templating,
//!   tolerant response parsing, mock and remote chat backends, and the
//!   iterative best-solution loop.
//! - [`experiments`]: multi-trial campaigns, aggregation, and CSV/SVG
//!   reporting.

pub mod benchmark;
pub mod experiments;
pub mod llm;
pub mod metaheuristics;
pub mod search_space;
pub mod seeding;

pub use benchmark::{
    all_instances, generate_surrogate, AttackKind, BenchmarkTable, BudgetExhausted, DatasetKind,
    FitnessCounter, FormatError, TableSource,
};
pub use search_space::{
    enumerate_all, Genotype, GenotypeError, OperationKind, EDGE_LABELS, EDGE_ORDER, NUM_EDGES,
    NUM_GENOTYPES, NUM_OPERATIONS,
};

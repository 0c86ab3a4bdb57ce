//! Multi-trial campaigns over optimizers and benchmark instances, with
//! deterministic seeding, bounded parallelism and Table/figure-style
//! aggregation.

mod report;

pub use report::{
    export_convergence_svg, export_records_csv, export_summary_csv, export_traces_csv,
    import_records, ReportError,
};

use std::sync::Arc;

use thiserror::Error;

use crate::benchmark::{AttackKind, BenchmarkTable, DatasetKind, FitnessCounter};
use crate::llm::{llmo_run, LlmBackend, LlmoConfig, MockBackend, MockProfile, PromptTemplate, RemoteBackend, RemoteConfig};
use crate::metaheuristics::{make_optimizer, ExhaustiveSearch, MhSpec, Optimizer, RandomSearch};
use crate::search_space::Genotype;
use crate::seeding::{derive_seed, hash_str};

/// One optimizer run on one instance: the best-so-far accuracy after every
/// fitness evaluation, and the final best solution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub optimizer: String,
    pub dataset: DatasetKind,
    pub attack: AttackKind,
    pub trial: u32,
    pub seed: u64,
    pub budget: usize,
    pub trace: Vec<f64>,
    pub final_best: (Genotype, f64),
    pub complete: bool,
}

/// Aggregate statistics for one (optimizer, instance) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub optimizer: String,
    pub dataset: DatasetKind,
    pub attack: AttackKind,
    pub trials: u32,
    pub budget: usize,
    /// Mean / sample std / min / max of the final best accuracy.
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Pointwise mean of the best-so-far traces, shorter (aborted) traces
    /// padded with their last value.
    pub mean_trace: Vec<f64>,
    /// Best solution found across all trials of the cell.
    pub best_genotype: Genotype,
}

/// Backend selection for LLM-guided trials.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    /// Deterministic offline mock, seeded per trial.
    Mock(MockProfile),
    /// Shared remote endpoint; one client with a global rate limit.
    Remote(RemoteConfig),
}

/// One optimizer entry of a campaign.
#[derive(Debug, Clone, PartialEq)]
pub enum CampaignOptimizer {
    Mh(MhSpec),
    Llmo {
        budget: usize,
        parse_retry_cap: u32,
        backend: BackendChoice,
    },
    Random {
        budget: usize,
        batch_size: usize,
    },
    Exhaustive {
        budget: usize,
    },
}

impl CampaignOptimizer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CampaignOptimizer::Mh(spec) => spec.kind.name(),
            CampaignOptimizer::Llmo { .. } => "llmo",
            CampaignOptimizer::Random { .. } => "random",
            CampaignOptimizer::Exhaustive { .. } => "exhaustive",
        }
    }

    pub fn budget(&self) -> usize {
        match self {
            CampaignOptimizer::Mh(spec) => spec.budget,
            CampaignOptimizer::Llmo { budget, .. } => *budget,
            CampaignOptimizer::Random { budget, .. } => *budget,
            CampaignOptimizer::Exhaustive { budget } => *budget,
        }
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("campaign needs at least one optimizer and one instance")]
    EmptyCampaign,
    #[error("duplicate optimizer label '{0}'")]
    DuplicateLabel(String),
    #[error("invalid optimizer '{label}': {source}")]
    InvalidOptimizer {
        label: String,
        source: crate::metaheuristics::OptimizerError,
    },
    #[error("no records to summarize")]
    EmptyCell,
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Campaign description: labelled optimizers, instances, trial count and
/// the master seed that everything else derives from.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub optimizers: Vec<(String, CampaignOptimizer)>,
    pub instances: Vec<(DatasetKind, AttackKind)>,
    pub trials: u32,
    pub master_seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub jobs: usize,
    pub prompt_template: PromptTemplate,
}

impl CampaignConfig {
    pub fn new(
        optimizers: Vec<(String, CampaignOptimizer)>,
        instances: Vec<(DatasetKind, AttackKind)>,
        trials: u32,
        master_seed: u64,
    ) -> CampaignConfig {
        CampaignConfig {
            optimizers,
            instances,
            trials,
            master_seed,
            jobs: 0,
            prompt_template: PromptTemplate::default(),
        }
    }

    fn validate(&self) -> Result<(), CampaignError> {
        if self.optimizers.is_empty() || self.instances.is_empty() || self.trials == 0 {
            return Err(CampaignError::EmptyCampaign);
        }
        for (i, (label, optimizer)) in self.optimizers.iter().enumerate() {
            if self.optimizers[..i].iter().any(|(l, _)| l == label) {
                return Err(CampaignError::DuplicateLabel(label.clone()));
            }
            if let CampaignOptimizer::Mh(spec) = optimizer {
                spec.validate().map_err(|source| CampaignError::InvalidOptimizer {
                    label: label.clone(),
                    source,
                })?;
            }
        }
        Ok(())
    }
}

/// Deterministic per-trial seed.
pub fn trial_seed(
    master_seed: u64,
    optimizer_label: &str,
    dataset: DatasetKind,
    attack: AttackKind,
    trial: u32,
) -> u64 {
    derive_seed(&[
        master_seed,
        hash_str(optimizer_label),
        hash_str(dataset.name()),
        hash_str(attack.name()),
        trial as u64,
    ])
}

struct TrialTask<'c> {
    label: &'c str,
    optimizer: &'c CampaignOptimizer,
    dataset: DatasetKind,
    attack: AttackKind,
    trial: u32,
    seed: u64,
    remote: Option<Arc<RemoteBackend>>,
}

/// Runs every (optimizer, instance, trial) combination. Trial failures are
/// returned as flagged incomplete records; they never halt the campaign.
/// The result is ordered by (optimizer, instance, trial) regardless of the
/// worker count, so equal configurations yield identical record sets.
pub fn run_campaign(
    cfg: &CampaignConfig,
    table: &BenchmarkTable,
) -> Result<Vec<TrialRecord>, CampaignError> {
    cfg.validate()?;

    // One shared client per remote entry, so rate limits span trials.
    let remotes: Vec<Option<Arc<RemoteBackend>>> = cfg
        .optimizers
        .iter()
        .map(|(_, optimizer)| match optimizer {
            CampaignOptimizer::Llmo {
                backend: BackendChoice::Remote(remote_cfg),
                ..
            } => Some(Arc::new(RemoteBackend::new(remote_cfg.clone()))),
            _ => None,
        })
        .collect();

    let mut tasks = Vec::new();
    for ((label, optimizer), remote) in cfg.optimizers.iter().zip(remotes.iter()) {
        for &(dataset, attack) in &cfg.instances {
            for trial in 0..cfg.trials {
                tasks.push(TrialTask {
                    label,
                    optimizer,
                    dataset,
                    attack,
                    trial,
                    seed: trial_seed(cfg.master_seed, label, dataset, attack, trial),
                    remote: remote.clone(),
                });
            }
        }
    }

    let jobs = if cfg.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cfg.jobs
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;

    use rayon::prelude::*;
    let records = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| run_trial(task, table, &cfg.prompt_template))
            .collect()
    });
    Ok(records)
}

fn run_trial(task: &TrialTask<'_>, table: &BenchmarkTable, template: &PromptTemplate) -> TrialRecord {
    let mut record = match task.optimizer {
        CampaignOptimizer::Mh(spec) => run_ask_tell(
            || make_optimizer(spec, task.seed),
            spec.budget,
            task,
            table,
        ),
        CampaignOptimizer::Random { budget, batch_size } => run_ask_tell(
            || Ok(Box::new(RandomSearch::new(*batch_size, task.seed)) as Box<dyn Optimizer>),
            *budget,
            task,
            table,
        ),
        CampaignOptimizer::Exhaustive { budget } => run_ask_tell(
            || Ok(Box::new(ExhaustiveSearch::new(512)) as Box<dyn Optimizer>),
            *budget,
            task,
            table,
        ),
        CampaignOptimizer::Llmo {
            budget,
            parse_retry_cap,
            backend,
        } => {
            let backend: Arc<dyn LlmBackend> = match backend {
                BackendChoice::Mock(profile) => Arc::new(MockBackend::new(
                    derive_seed(&[task.seed, hash_str("backend")]),
                    profile.clone(),
                )),
                BackendChoice::Remote(_) => {
                    task.remote.clone().expect("remote built during setup") as Arc<dyn LlmBackend>
                }
            };
            let cfg = LlmoConfig {
                budget: *budget,
                parse_retry_cap: *parse_retry_cap,
                backend,
                seed: task.seed,
            };
            llmo_run(&cfg, template, table, task.dataset, task.attack)
        }
    };
    record.optimizer = task.label.to_string();
    record.trial = task.trial;
    record.seed = task.seed;
    record
}

/// Drives one ask/tell optimizer against the metered oracle, recording the
/// best-so-far accuracy after every evaluation. Internal-state invariants
/// are checked after every tell; a violation aborts the trial as incomplete.
fn run_ask_tell(
    build: impl FnOnce() -> Result<Box<dyn Optimizer>, crate::metaheuristics::OptimizerError>,
    budget: usize,
    task: &TrialTask<'_>,
    table: &BenchmarkTable,
) -> TrialRecord {
    let mut trace = Vec::with_capacity(budget);
    let mut best: Option<(Genotype, f64)> = None;
    let mut complete = true;

    match build() {
        Ok(mut optimizer) => {
            let mut counter = FitnessCounter::new(budget);
            loop {
                let remaining = counter.remaining();
                if remaining == 0 {
                    break;
                }
                let batch = match optimizer.ask() {
                    Ok(batch) => batch,
                    Err(_) => {
                        complete = false;
                        break;
                    }
                };
                if batch.is_empty() {
                    break; // nothing left to propose (exhaustive search)
                }
                let take = batch.len().min(remaining);
                let mut fitnesses = Vec::with_capacity(take);
                for genotype in &batch[..take] {
                    let accuracy = table
                        .evaluate(genotype, task.dataset, task.attack, &mut counter)
                        .expect("remaining budget was checked");
                    if best.is_none_or(|(_, b)| accuracy > b) {
                        best = Some((*genotype, accuracy));
                    }
                    trace.push(best.expect("just set").1);
                    fitnesses.push(accuracy);
                }
                if optimizer.tell(&fitnesses).is_err() || optimizer.check_invariants().is_err() {
                    complete = false;
                    break;
                }
            }
        }
        Err(_) => complete = false,
    }

    let final_best = best.unwrap_or_else(|| {
        (
            Genotype::from_index(0).expect("index 0 exists"),
            f64::NEG_INFINITY,
        )
    });
    TrialRecord {
        optimizer: task.label.to_string(),
        dataset: task.dataset,
        attack: task.attack,
        trial: task.trial,
        seed: task.seed,
        budget,
        trace,
        final_best,
        complete,
    }
}

/// Groups records by (optimizer, instance) in first-appearance order and
/// aggregates each cell.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<RunSummary>, CampaignError> {
    if records.is_empty() {
        return Err(CampaignError::EmptyCell);
    }
    let mut order: Vec<(String, DatasetKind, AttackKind)> = Vec::new();
    for r in records {
        let key = (r.optimizer.clone(), r.dataset, r.attack);
        if !order.contains(&key) {
            order.push(key);
        }
    }
    let mut summaries = Vec::with_capacity(order.len());
    for (optimizer, dataset, attack) in order {
        let cell: Vec<&TrialRecord> = records
            .iter()
            .filter(|r| r.optimizer == optimizer && r.dataset == dataset && r.attack == attack)
            .collect();
        summaries.push(summarize_cell(&optimizer, dataset, attack, &cell)?);
    }
    Ok(summaries)
}

fn summarize_cell(
    optimizer: &str,
    dataset: DatasetKind,
    attack: AttackKind,
    cell: &[&TrialRecord],
) -> Result<RunSummary, CampaignError> {
    if cell.is_empty() {
        return Err(CampaignError::EmptyCell);
    }
    let finals: Vec<f64> = cell.iter().map(|r| r.final_best.1).collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let std = if finals.len() > 1 {
        (finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = finals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let length = cell.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let mut mean_trace = vec![0.0; length];
    for r in cell.iter() {
        let last = r.trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        for (i, slot) in mean_trace.iter_mut().enumerate() {
            *slot += r.trace.get(i).copied().unwrap_or(last);
        }
    }
    for slot in mean_trace.iter_mut() {
        *slot /= n;
    }

    let best = cell
        .iter()
        .max_by(|a, b| {
            a.final_best
                .1
                .total_cmp(&b.final_best.1)
                .then(b.trial.cmp(&a.trial))
        })
        .expect("cell is non-empty");
    Ok(RunSummary {
        optimizer: optimizer.to_string(),
        dataset,
        attack,
        trials: cell.len() as u32,
        budget: cell.iter().map(|r| r.budget).max().expect("non-empty"),
        mean,
        std,
        min,
        max,
        mean_trace,
        best_genotype: best.final_best.0,
    })
}

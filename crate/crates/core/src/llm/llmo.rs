//! The iterative single-solution loop: evaluate a random start, then
//! repeatedly prompt the backend with the current best, parse a candidate
//! (with bounded re-query and random fallback), evaluate it and keep it only
//! on strict improvement.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::backend::LlmBackend;
use super::parse::parse_genotype;
use super::prompt::{render_prompt, PromptContext, PromptTemplate};
use crate::benchmark::{AttackKind, BenchmarkTable, DatasetKind, FitnessCounter};
use crate::experiments::TrialRecord;
use crate::search_space::Genotype;

/// Runtime configuration of one optimizer trial.
pub struct LlmoConfig {
    /// Total fitness-evaluation budget, including the initial random
    /// solution.
    pub budget: usize,
    /// Re-queries allowed per iteration when a response fails to parse;
    /// retries consume no fitness evaluations.
    pub parse_retry_cap: u32,
    pub backend: Arc<dyn LlmBackend>,
    pub seed: u64,
}

impl LlmoConfig {
    pub fn new(backend: Arc<dyn LlmBackend>, seed: u64) -> LlmoConfig {
        LlmoConfig {
            budget: 30,
            parse_retry_cap: 3,
            backend,
            seed,
        }
    }
}

/// Runs one trial. The trace records the best-so-far accuracy after every
/// fitness evaluation; a backend failure aborts the trial with the partial
/// record flagged incomplete.
pub fn llmo_run(
    cfg: &LlmoConfig,
    template: &PromptTemplate,
    table: &BenchmarkTable,
    dataset: DatasetKind,
    attack: AttackKind,
) -> TrialRecord {
    llmo_run_logged(cfg, template, table, dataset, attack, None)
}

/// [`llmo_run`] with an optional transcript sink receiving one JSON line
/// per backend exchange: `{iteration, prompt, response, parsed, accepted}`.
pub fn llmo_run_logged(
    cfg: &LlmoConfig,
    template: &PromptTemplate,
    table: &BenchmarkTable,
    dataset: DatasetKind,
    attack: AttackKind,
    mut transcript: Option<&mut dyn Write>,
) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counter = FitnessCounter::new(cfg.budget);
    let mut trace = Vec::with_capacity(cfg.budget);

    let mut best_genotype = Genotype::random(&mut rng);
    let mut best_accuracy = match table.evaluate(&best_genotype, dataset, attack, &mut counter) {
        Ok(v) => v,
        Err(_) => {
            // Budget zero: an empty, incomplete record.
            return TrialRecord {
                optimizer: "llmo".to_string(),
                dataset,
                attack,
                trial: 0,
                seed: cfg.seed,
                budget: cfg.budget,
                trace,
                final_best: (best_genotype, f64::NEG_INFINITY),
                complete: false,
            };
        }
    };
    trace.push(best_accuracy);

    let mut complete = true;
    let mut iteration = 0u64;
    'outer: while counter.remaining() > 0 {
        iteration += 1;
        let ctx = PromptContext::new(best_genotype, best_accuracy);
        let prompt = match render_prompt(template, &ctx) {
            Ok(p) => p,
            Err(_) => {
                complete = false;
                break 'outer;
            }
        };

        let mut candidate = None;
        for _attempt in 0..=cfg.parse_retry_cap {
            let response = match cfg.backend.complete(&prompt) {
                Ok(r) => r,
                Err(_) => {
                    complete = false;
                    break 'outer;
                }
            };
            let parsed = parse_genotype(&response);
            if let Some(sink) = transcript.as_deref_mut() {
                let line = json!({
                    "iteration": iteration,
                    "prompt": prompt,
                    "response": response,
                    "parsed": parsed.as_ref().map(|g| g.to_string()).ok(),
                    "accepted": parsed.is_ok(),
                });
                let _ = writeln!(sink, "{line}");
            }
            if let Ok(g) = parsed {
                candidate = Some(g);
                break;
            }
        }
        // Exhausted re-queries: fall back to a random genotype so the
        // iteration still spends its evaluation.
        let candidate = candidate.unwrap_or_else(|| Genotype::random(&mut rng));

        let accuracy = table
            .evaluate(&candidate, dataset, attack, &mut counter)
            .expect("remaining budget was checked");
        if accuracy > best_accuracy {
            best_accuracy = accuracy;
            best_genotype = candidate;
        }
        trace.push(best_accuracy);
    }

    TrialRecord {
        optimizer: "llmo".to_string(),
        dataset,
        attack,
        trial: 0,
        seed: cfg.seed,
        budget: cfg.budget,
        trace,
        final_best: (best_genotype, best_accuracy),
        complete,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::generate_surrogate;
    use crate::llm::backend::{BackendError, MockBackend, MockProfile};

    fn run_with(profile: MockProfile, seed: u64, budget: usize) -> TrialRecord {
        let table = generate_surrogate(3, 0.1);
        let backend = Arc::new(MockBackend::new(seed, profile));
        let mut cfg = LlmoConfig::new(backend, seed);
        cfg.budget = budget;
        llmo_run(
            &cfg,
            &PromptTemplate::default(),
            &table,
            DatasetKind::Cifar10,
            AttackKind::Clean,
        )
    }

    #[test]
    fn consumes_exactly_the_budget() {
        let record = run_with(MockProfile::PerturbBest, 11, 30);
        assert!(record.complete);
        assert_eq!(record.trace.len(), 30);
        assert!(record
            .trace
            .windows(2)
            .all(|w| w[1] >= w[0]), "trace must be non-decreasing");
        assert_eq!(record.final_best.1, *record.trace.last().unwrap());
    }

    #[test]
    fn echo_backend_never_improves_past_the_start() {
        let record = run_with(MockProfile::EchoBest, 7, 20);
        assert!(record.complete);
        assert_eq!(record.trace.len(), 20);
        let first = record.trace[0];
        assert!(record.trace.iter().all(|&v| v == first));
    }

    #[test]
    fn malformed_responses_fall_back_to_random_search() {
        let record = run_with(MockProfile::always_malformed(), 13, 30);
        assert!(record.complete);
        assert_eq!(record.trace.len(), 30, "fallback still spends evaluations");
    }

    #[test]
    fn identical_seeds_replay_identical_traces() {
        let a = run_with(MockProfile::PerturbBest, 21, 30);
        let b = run_with(MockProfile::PerturbBest, 21, 30);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_best, b.final_best);
        let c = run_with(MockProfile::PerturbBest, 22, 30);
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn backend_failure_yields_incomplete_partial_record() {
        struct FailingBackend;
        impl LlmBackend for FailingBackend {
            fn complete(&self, _prompt: &str) -> Result<String, BackendError> {
                Err(BackendError::Transport("down".into()))
            }
            fn name(&self) -> &str {
                "failing"
            }
            fn model_id(&self) -> &str {
                "none"
            }
        }
        let table = generate_surrogate(3, 0.1);
        let mut cfg = LlmoConfig::new(Arc::new(FailingBackend), 5);
        cfg.budget = 30;
        let record = llmo_run(
            &cfg,
            &PromptTemplate::default(),
            &table,
            DatasetKind::Cifar100,
            AttackKind::Fgsm,
        );
        assert!(!record.complete);
        assert_eq!(record.trace.len(), 1, "only the initial evaluation ran");
    }

    #[test]
    fn transcript_lines_are_json_records() {
        let table = generate_surrogate(3, 0.0);
        let backend = Arc::new(MockBackend::new(2, MockProfile::PerturbBest));
        let mut cfg = LlmoConfig::new(backend, 2);
        cfg.budget = 5;
        let mut sink = Vec::new();
        let record = llmo_run_logged(
            &cfg,
            &PromptTemplate::default(),
            &table,
            DatasetKind::Cifar10,
            AttackKind::Pgd,
            Some(&mut sink),
        );
        assert!(record.complete);
        let text = String::from_utf8(sink).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4, "one exchange per iteration after init");
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["iteration"].is_u64());
            assert!(v["prompt"].is_string());
            assert!(v["response"].is_string());
            assert_eq!(v["accepted"], serde_json::Value::Bool(true));
        }
    }
}

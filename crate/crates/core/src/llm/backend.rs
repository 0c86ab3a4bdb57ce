//! Backend contract and the deterministic mock used for offline runs.

use std::sync::Mutex;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::parse::parse_genotype;
use crate::search_space::{Genotype, NUM_EDGES, NUM_OPERATIONS};
use crate::seeding::{derive_seed, hash_str};

/// Failure of one completion call. Everything except authentication is
/// considered transient.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("authentication: {0}")]
    Auth(String),
    #[error("request timed out after {0} s")]
    Timeout(u64),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transport: {0}")]
    Transport(String),
}

impl BackendError {
    pub fn retryable(&self) -> bool {
        !matches!(self, BackendError::Auth(_))
    }
}

/// A single-turn text-completion backend. `complete` is the only effectful
/// operation; callers must not assume anything about the response format.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
    /// Backend family name (`mock`, `remote`).
    fn name(&self) -> &str;
    /// Model identity, for logging.
    fn model_id(&self) -> &str;
}

/// Behavior of the mock backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum MockProfile {
    /// Parse the current best out of the prompt and return it with 1-2
    /// genes changed: a stochastic hill-climbing suggestion.
    PerturbBest,
    /// Return the current best unchanged.
    EchoBest,
    /// Emit broken responses at the configured rates (fractions of calls);
    /// whatever probability mass remains behaves like `PerturbBest`.
    Adversarial {
        #[serde(default)]
        malformed: f64,
        #[serde(default)]
        wrong_length: f64,
        #[serde(default)]
        out_of_range: f64,
        #[serde(default)]
        empty: f64,
    },
}

impl MockProfile {
    /// Every response fails to parse as a wrong-length array.
    pub fn always_wrong_length() -> MockProfile {
        MockProfile::Adversarial {
            malformed: 0.0,
            wrong_length: 1.0,
            out_of_range: 0.0,
            empty: 0.0,
        }
    }

    /// Every response is unusable prose.
    pub fn always_malformed() -> MockProfile {
        MockProfile::Adversarial {
            malformed: 1.0,
            wrong_length: 0.0,
            out_of_range: 0.0,
            empty: 0.0,
        }
    }
}

/// Deterministic offline stand-in for a chat model. Responses are a pure
/// function of (seed, call index, prompt), so a fresh backend given the same
/// prompt sequence replays the same responses.
pub struct MockBackend {
    seed: u64,
    profile: MockProfile,
    calls: Mutex<u64>,
}

impl MockBackend {
    pub fn new(seed: u64, profile: MockProfile) -> MockBackend {
        MockBackend {
            seed,
            profile,
            calls: Mutex::new(0),
        }
    }

    fn next_call_index(&self) -> u64 {
        let mut calls = self.calls.lock().expect("mock call counter poisoned");
        let index = *calls;
        *calls += 1;
        index
    }

    fn perturb(&self, rng: &mut ChaCha8Rng, best: Genotype) -> Genotype {
        let distance = rng.random_range(1..=2usize);
        let mut genes = *best.genes();
        let mut changed = [false; NUM_EDGES];
        for _ in 0..distance {
            let position = loop {
                let p = rng.random_range(0..NUM_EDGES);
                if !changed[p] {
                    break p;
                }
            };
            changed[position] = true;
            // Uniform over the other values, so the gene always changes.
            let shift = rng.random_range(1..NUM_OPERATIONS as u8);
            genes[position] = (genes[position] + shift) % NUM_OPERATIONS as u8;
        }
        Genotype::from_genes(genes)
    }

    fn best_from_prompt(&self, rng: &mut ChaCha8Rng, prompt: &str) -> Genotype {
        parse_genotype(prompt).unwrap_or_else(|_| Genotype::random(rng))
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let call = self.next_call_index();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(&[self.seed, call, hash_str(prompt)]));
        let response = match &self.profile {
            MockProfile::PerturbBest => {
                let best = self.best_from_prompt(&mut rng, prompt);
                let candidate = self.perturb(&mut rng, best);
                format!(
                    "Based on the current best solution, a promising \
                     configuration to evaluate next is {candidate}."
                )
            }
            MockProfile::EchoBest => {
                let best = self.best_from_prompt(&mut rng, prompt);
                format!("The best configuration remains {best}.")
            }
            MockProfile::Adversarial {
                malformed,
                wrong_length,
                out_of_range,
                empty,
            } => {
                let draw: f64 = rng.random_range(0.0..1.0);
                if draw < *malformed {
                    "I cannot produce a configuration for this request right now.".to_string()
                } else if draw < malformed + wrong_length {
                    let length = [3usize, 4, 5, 7][rng.random_range(0..4)];
                    let values: Vec<String> = (0..length)
                        .map(|_| rng.random_range(0..NUM_OPERATIONS as u8).to_string())
                        .collect();
                    format!("Try [{}] instead.", values.join(","))
                } else if draw < malformed + wrong_length + out_of_range {
                    let mut values: Vec<i64> = (0..NUM_EDGES)
                        .map(|_| rng.random_range(0..NUM_OPERATIONS as i64))
                        .collect();
                    let position = rng.random_range(0..NUM_EDGES);
                    values[position] = if rng.random_bool(0.5) {
                        rng.random_range(NUM_OPERATIONS as i64..=9)
                    } else {
                        -1
                    };
                    let text: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                    format!("Here you go: [{}].", text.join(","))
                } else if draw < malformed + wrong_length + out_of_range + empty {
                    String::new()
                } else {
                    let best = self.best_from_prompt(&mut rng, prompt);
                    let candidate = self.perturb(&mut rng, best);
                    format!("A promising configuration to evaluate next is {candidate}.")
                }
            }
        };
        Ok(response)
    }

    fn name(&self) -> &str {
        "mock"
    }

    fn model_id(&self) -> &str {
        "mock-deterministic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::parse::ParseError;
    use crate::llm::prompt::{render_prompt, PromptContext, PromptTemplate};

    fn prompt_for(best: &[i64], acc: f64) -> String {
        let ctx = PromptContext::new(Genotype::from_indices(best).unwrap(), acc);
        render_prompt(&PromptTemplate::default(), &ctx).unwrap()
    }

    #[test]
    fn perturb_best_stays_within_hamming_two() {
        let backend = MockBackend::new(9, MockProfile::PerturbBest);
        let best = Genotype::from_indices(&[0, 0, 0, 0, 0, 0]).unwrap();
        let prompt = prompt_for(&[0, 0, 0, 0, 0, 0], 10.0);
        for _ in 0..50 {
            let response = backend.complete(&prompt).unwrap();
            let candidate = parse_genotype(&response).unwrap();
            let d = candidate.hamming_distance(&best);
            assert!(d == 1 || d == 2, "distance {d} from best");
        }
    }

    #[test]
    fn fresh_backends_replay_identical_responses() {
        let prompt = prompt_for(&[3, 1, 0, 4, 2, 2], 68.35);
        let a = MockBackend::new(4, MockProfile::PerturbBest);
        let b = MockBackend::new(4, MockProfile::PerturbBest);
        assert_eq!(a.complete(&prompt).unwrap(), b.complete(&prompt).unwrap());
        // Subsequent calls vary (the call index advances) but stay aligned
        // between the two instances.
        assert_eq!(a.complete(&prompt).unwrap(), b.complete(&prompt).unwrap());
        let c = MockBackend::new(5, MockProfile::PerturbBest);
        assert_ne!(
            MockBackend::new(4, MockProfile::PerturbBest)
                .complete(&prompt)
                .unwrap(),
            c.complete(&prompt).unwrap()
        );
    }

    #[test]
    fn echo_profile_returns_the_best() {
        let backend = MockBackend::new(1, MockProfile::EchoBest);
        let response = backend.complete(&prompt_for(&[3, 1, 0, 4, 2, 2], 50.0)).unwrap();
        assert_eq!(
            parse_genotype(&response).unwrap().genes(),
            &[3, 1, 0, 4, 2, 2]
        );
    }

    #[test]
    fn always_wrong_length_never_parses() {
        let backend = MockBackend::new(2, MockProfile::always_wrong_length());
        let prompt = prompt_for(&[1, 1, 1, 1, 1, 1], 20.0);
        for _ in 0..30 {
            let response = backend.complete(&prompt).unwrap();
            assert!(matches!(
                parse_genotype(&response),
                Err(ParseError::WrongLength { .. })
            ));
        }
    }

    #[test]
    fn always_malformed_never_parses() {
        let backend = MockBackend::new(3, MockProfile::always_malformed());
        let prompt = prompt_for(&[1, 2, 3, 4, 0, 1], 20.0);
        for _ in 0..30 {
            let response = backend.complete(&prompt).unwrap();
            assert!(parse_genotype(&response).is_err());
        }
    }

    #[test]
    fn adversarial_rates_mix_modes() {
        let backend = MockBackend::new(8, MockProfile::Adversarial {
            malformed: 0.25,
            wrong_length: 0.25,
            out_of_range: 0.25,
            empty: 0.0,
        });
        let prompt = prompt_for(&[2, 2, 2, 2, 2, 2], 30.0);
        let mut ok = 0;
        let mut failed = 0;
        for _ in 0..200 {
            let response = backend.complete(&prompt).unwrap();
            match parse_genotype(&response) {
                Ok(_) => ok += 1,
                Err(_) => failed += 1,
            }
        }
        // Roughly a quarter of calls should succeed.
        assert!(ok > 20 && failed > 100, "ok {ok} failed {failed}");
    }
}

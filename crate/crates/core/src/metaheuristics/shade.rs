//! SHADE: success-history adaptive differential evolution. F and Cr are
//! sampled around entries of a circular historical memory; after each
//! generation one slot is overwritten with improvement-weighted means of the
//! successful values (Lehmer for F, arithmetic for Cr).

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::de::{binomial_crossover, distinct_indices, midpoint_repair};
use super::jade::{sample_cr, sample_f, top_indices};
use super::{random_genome, transfer_decode, AskTellBase, ContinuousGenome, Optimizer, OptimizerError};
use crate::search_space::{Genotype, NUM_EDGES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadeParams {
    pub mu_f0: f64,
    pub mu_cr0: f64,
    /// Historical memory size H.
    pub memory_size: usize,
}

impl Default for ShadeParams {
    fn default() -> ShadeParams {
        ShadeParams {
            mu_f0: 0.5,
            mu_cr0: 0.5,
            memory_size: 10,
        }
    }
}

pub struct Shade {
    pop_size: usize,
    rng: ChaCha8Rng,
    positions: Vec<ContinuousGenome>,
    fitnesses: Vec<f64>,
    memory_f: Vec<f64>,
    memory_cr: Vec<f64>,
    memory_pos: usize,
    trials: Vec<ContinuousGenome>,
    trial_params: Vec<(f64, f64)>,
    initialized: bool,
    base: AskTellBase,
}

impl Shade {
    pub fn new(params: ShadeParams, pop_size: usize, mut rng: ChaCha8Rng) -> Shade {
        let positions = (0..pop_size).map(|_| random_genome(&mut rng)).collect();
        Shade {
            pop_size,
            positions,
            fitnesses: Vec::new(),
            memory_f: vec![params.mu_f0; params.memory_size],
            memory_cr: vec![params.mu_cr0; params.memory_size],
            memory_pos: 0,
            trials: Vec::new(),
            trial_params: Vec::new(),
            initialized: false,
            base: AskTellBase::default(),
            rng,
        }
    }

    pub fn memory(&self) -> (&[f64], &[f64]) {
        (&self.memory_f, &self.memory_cr)
    }

    fn build_trials(&mut self) {
        self.trials.clear();
        self.trial_params.clear();
        let p_min = 2.0 / self.pop_size as f64;
        for i in 0..self.pop_size {
            let slot = self.rng.random_range(0..self.memory_f.len());
            let f = sample_f(&mut self.rng, self.memory_f[slot]);
            let cr = sample_cr(&mut self.rng, self.memory_cr[slot]);
            // Per-individual greediness, at least two candidates.
            let p_i = self.rng.random_range(p_min..=0.2);
            let count = ((p_i * self.pop_size as f64).round() as usize).max(2);
            let elite = top_indices(&self.fitnesses, count);
            let pbest = elite[self.rng.random_range(0..elite.len())];
            let [r1, r2] = distinct_indices::<2, _>(&mut self.rng, self.pop_size, i);
            let mut mutant = [0.0; NUM_EDGES];
            for (d, coord) in mutant.iter_mut().enumerate() {
                *coord = self.positions[i][d]
                    + f * (self.positions[pbest][d] - self.positions[i][d])
                    + f * (self.positions[r1][d] - self.positions[r2][d]);
            }
            midpoint_repair(&mut mutant, &self.positions[i]);
            let trial = binomial_crossover(&mut self.rng, &self.positions[i], &mutant, cr);
            self.trials.push(trial);
            self.trial_params.push((f, cr));
        }
    }

    fn update_memory(&mut self, success: &[(f64, f64, f64)]) {
        if success.is_empty() {
            return;
        }
        let total: f64 = success.iter().map(|(_, _, delta)| delta).sum();
        let mut num_f = 0.0;
        let mut den_f = 0.0;
        let mut mean_cr = 0.0;
        for &(f, cr, delta) in success {
            let w = delta / total;
            num_f += w * f * f;
            den_f += w * f;
            mean_cr += w * cr;
        }
        self.memory_f[self.memory_pos] = (num_f / den_f).clamp(0.0, 1.0);
        self.memory_cr[self.memory_pos] = mean_cr.clamp(0.0, 1.0);
        self.memory_pos = (self.memory_pos + 1) % self.memory_f.len();
    }
}

impl Optimizer for Shade {
    fn name(&self) -> &'static str {
        "shade"
    }

    fn ask(&mut self) -> Result<Vec<Genotype>, OptimizerError> {
        let batch: Vec<Genotype> = if self.initialized {
            self.build_trials();
            self.trials.iter().map(transfer_decode).collect()
        } else {
            self.positions.iter().map(transfer_decode).collect()
        };
        self.base.stage(batch)
    }

    fn tell(&mut self, fitnesses: &[f64]) -> Result<(), OptimizerError> {
        let (_, full) = self.base.absorb(fitnesses)?;
        if !full {
            return Ok(());
        }
        if !self.initialized {
            self.fitnesses = fitnesses.to_vec();
            self.initialized = true;
            return Ok(());
        }
        let mut success = Vec::new();
        for (i, &fit) in fitnesses.iter().enumerate() {
            if fit > self.fitnesses[i] {
                let (f, cr) = self.trial_params[i];
                success.push((f, cr, fit - self.fitnesses[i]));
            }
            if fit >= self.fitnesses[i] {
                self.fitnesses[i] = fit;
                self.positions[i] = self.trials[i];
            }
        }
        self.update_memory(&success);
        Ok(())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }

    fn check_invariants(&self) -> Result<(), String> {
        for (i, (&f, &cr)) in self.memory_f.iter().zip(self.memory_cr.iter()).enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("shade memory_f[{i}] = {f} outside [0, 1]"));
            }
            if !(0.0..=1.0).contains(&cr) {
                return Err(format!("shade memory_cr[{i}] = {cr} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

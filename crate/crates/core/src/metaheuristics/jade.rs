//! JADE: adaptive differential evolution with current-to-pbest/1 mutation.
//! Per-individual F is drawn from a Cauchy around an adapted location, Cr
//! from a Gaussian; the locations track successful values (Lehmer mean for
//! F, arithmetic mean for Cr). No external archive.

use rand::{Rng, RngExt};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::de::{binomial_crossover, distinct_indices, midpoint_repair};
use super::{random_genome, transfer_decode, AskTellBase, ContinuousGenome, Optimizer, OptimizerError};
use crate::search_space::{Genotype, NUM_EDGES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JadeParams {
    /// Initial location of the F distribution.
    pub mu_f0: f64,
    /// Initial location of the Cr distribution.
    pub mu_cr0: f64,
    /// Adaptation rate.
    pub c: f64,
    /// Fraction of the population eligible as pbest.
    pub p: f64,
}

impl Default for JadeParams {
    fn default() -> JadeParams {
        JadeParams {
            mu_f0: 0.5,
            mu_cr0: 0.5,
            c: 0.1,
            p: 0.1,
        }
    }
}

/// F ~ Cauchy(location, 0.1), resampled while non-positive, truncated to 1.
pub(super) fn sample_f<R: Rng + ?Sized>(rng: &mut R, location: f64) -> f64 {
    let cauchy = Cauchy::new(location, 0.1).expect("valid scale");
    loop {
        let f = cauchy.sample(rng);
        if f > 1.0 {
            return 1.0;
        }
        if f > 0.0 {
            return f;
        }
    }
}

/// Cr ~ Normal(location, 0.1), clipped to [0, 1].
pub(super) fn sample_cr<R: Rng + ?Sized>(rng: &mut R, location: f64) -> f64 {
    let normal = Normal::new(location, 0.1).expect("valid sigma");
    normal.sample(rng).clamp(0.0, 1.0)
}

/// Unweighted Lehmer mean, `sum(x^2) / sum(x)`.
pub(super) fn lehmer_mean(values: &[f64]) -> f64 {
    let num: f64 = values.iter().map(|v| v * v).sum();
    let den: f64 = values.iter().sum();
    num / den
}

/// Indices of the top `count` fitnesses, best first.
pub(super) fn top_indices(fitnesses: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]).then(a.cmp(&b)));
    order.truncate(count.max(1));
    order
}

pub struct Jade {
    params: JadeParams,
    pop_size: usize,
    rng: ChaCha8Rng,
    positions: Vec<ContinuousGenome>,
    fitnesses: Vec<f64>,
    mu_f: f64,
    mu_cr: f64,
    trials: Vec<ContinuousGenome>,
    trial_params: Vec<(f64, f64)>,
    initialized: bool,
    base: AskTellBase,
}

impl Jade {
    pub fn new(params: JadeParams, pop_size: usize, mut rng: ChaCha8Rng) -> Jade {
        let positions = (0..pop_size).map(|_| random_genome(&mut rng)).collect();
        Jade {
            mu_f: params.mu_f0,
            mu_cr: params.mu_cr0,
            params,
            pop_size,
            rng,
            positions,
            fitnesses: Vec::new(),
            trials: Vec::new(),
            trial_params: Vec::new(),
            initialized: false,
            base: AskTellBase::default(),
        }
    }

    pub fn mu_f(&self) -> f64 {
        self.mu_f
    }

    pub fn mu_cr(&self) -> f64 {
        self.mu_cr
    }

    fn build_trials(&mut self) {
        self.trials.clear();
        self.trial_params.clear();
        let pbest_count = ((self.params.p * self.pop_size as f64).ceil() as usize).max(1);
        let elite = top_indices(&self.fitnesses, pbest_count);
        for i in 0..self.pop_size {
            let f = sample_f(&mut self.rng, self.mu_f);
            let cr = sample_cr(&mut self.rng, self.mu_cr);
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
}

impl Optimizer for Jade {
    fn name(&self) -> &'static str {
        "jade"
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
        let mut success_f = Vec::new();
        let mut success_cr = Vec::new();
        for (i, &fit) in fitnesses.iter().enumerate() {
            if fit > self.fitnesses[i] {
                let (f, cr) = self.trial_params[i];
                success_f.push(f);
                success_cr.push(cr);
            }
            if fit >= self.fitnesses[i] {
                self.fitnesses[i] = fit;
                self.positions[i] = self.trials[i];
            }
        }
        if !success_f.is_empty() {
            let c = self.params.c;
            self.mu_f = (1.0 - c) * self.mu_f + c * lehmer_mean(&success_f);
            let mean_cr: f64 = success_cr.iter().sum::<f64>() / success_cr.len() as f64;
            self.mu_cr = (1.0 - c) * self.mu_cr + c * mean_cr;
        }
        Ok(())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }

    fn check_invariants(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.mu_f) {
            return Err(format!("jade mu_f {} outside [0, 1]", self.mu_f));
        }
        if !(0.0..=1.0).contains(&self.mu_cr) {
            return Err(format!("jade mu_cr {} outside [0, 1]", self.mu_cr));
        }
        Ok(())
    }
}

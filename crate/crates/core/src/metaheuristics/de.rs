//! Differential evolution with the current-to-rand/1 mutation and binomial
//! crossover, on the continuous box.

use rand::{Rng, RngExt};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_genome, transfer_decode, AskTellBase, ContinuousGenome, Optimizer, OptimizerError};
use crate::search_space::{Genotype, NUM_EDGES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeParams {
    /// Scaling factor.
    pub f: f64,
    /// Crossover rate.
    pub cr: f64,
}

impl Default for DeParams {
    fn default() -> DeParams {
        DeParams { f: 0.8, cr: 0.9 }
    }
}

/// Picks `N` distinct population indices, all different from `exclude`.
pub(super) fn distinct_indices<const N: usize, R: Rng + ?Sized>(
    rng: &mut R,
    pop_size: usize,
    exclude: usize,
) -> [usize; N] {
    debug_assert!(pop_size > N);
    let mut out = [0usize; N];
    let mut filled = 0;
    while filled < N {
        let candidate = rng.random_range(0..pop_size);
        if candidate == exclude || out[..filled].contains(&candidate) {
            continue;
        }
        out[filled] = candidate;
        filled += 1;
    }
    out
}

/// Binomial crossover: take the mutant coordinate with probability `cr`,
/// and always at one forced dimension.
pub(super) fn binomial_crossover<R: Rng + ?Sized>(
    rng: &mut R,
    parent: &ContinuousGenome,
    mutant: &ContinuousGenome,
    cr: f64,
) -> ContinuousGenome {
    let forced = rng.random_range(0..NUM_EDGES);
    let mut trial = *parent;
    for d in 0..NUM_EDGES {
        if d == forced || rng.random_range(0.0..1.0) < cr {
            trial[d] = mutant[d];
        }
    }
    trial
}

/// Box-bound repair: an out-of-bounds mutant coordinate is pulled to the
/// midpoint between the violated bound and the parent coordinate.
pub(super) fn midpoint_repair(mutant: &mut ContinuousGenome, parent: &ContinuousGenome) {
    use super::{DOMAIN_HIGH, DOMAIN_LOW};
    for d in 0..NUM_EDGES {
        if mutant[d] < DOMAIN_LOW {
            mutant[d] = (DOMAIN_LOW + parent[d]) / 2.0;
        } else if mutant[d] >= DOMAIN_HIGH {
            mutant[d] = (DOMAIN_HIGH + parent[d]) / 2.0;
        }
    }
}

pub struct DifferentialEvolution {
    params: DeParams,
    pop_size: usize,
    rng: ChaCha8Rng,
    positions: Vec<ContinuousGenome>,
    fitnesses: Vec<f64>,
    trials: Vec<ContinuousGenome>,
    initialized: bool,
    base: AskTellBase,
}

impl DifferentialEvolution {
    pub fn new(params: DeParams, pop_size: usize, mut rng: ChaCha8Rng) -> DifferentialEvolution {
        let positions = (0..pop_size).map(|_| random_genome(&mut rng)).collect();
        DifferentialEvolution {
            params,
            pop_size,
            rng,
            positions,
            fitnesses: Vec::new(),
            trials: Vec::new(),
            initialized: false,
            base: AskTellBase::default(),
        }
    }

    fn build_trials(&mut self) {
        self.trials.clear();
        for i in 0..self.pop_size {
            let [r1, r2, r3] = distinct_indices::<3, _>(&mut self.rng, self.pop_size, i);
            // current-to-rand/1: blend toward r1 plus scaled difference of
            // r2 and r3, both weighted by F.
            let mut mutant = [0.0; NUM_EDGES];
            for (d, coord) in mutant.iter_mut().enumerate() {
                *coord = self.positions[i][d]
                    + self.params.f * (self.positions[r1][d] - self.positions[i][d])
                    + self.params.f * (self.positions[r2][d] - self.positions[r3][d]);
            }
            midpoint_repair(&mut mutant, &self.positions[i]);
            let trial = binomial_crossover(&mut self.rng, &self.positions[i], &mutant, self.params.cr);
            self.trials.push(trial);
        }
    }
}

impl Optimizer for DifferentialEvolution {
    fn name(&self) -> &'static str {
        "de"
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
        for (i, &fit) in fitnesses.iter().enumerate() {
            if fit > self.fitnesses[i] {
                self.fitnesses[i] = fit;
                self.positions[i] = self.trials[i];
            }
        }
        Ok(())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }
}

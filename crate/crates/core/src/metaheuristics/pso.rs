//! Particle swarm optimization on the continuous box, decoded per
//! evaluation. Velocities are clamped to `[vmin, vmax]`; positions are left
//! free and bounded only by the transfer decoding.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_genome, transfer_decode, AskTellBase, ContinuousGenome, Optimizer, OptimizerError};
use crate::search_space::{Genotype, NUM_EDGES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    /// Inertia factor.
    pub w: f64,
    /// Cognitive coefficient.
    pub c1: f64,
    /// Social coefficient.
    pub c2: f64,
    pub vmax: f64,
    pub vmin: f64,
}

impl Default for PsoParams {
    fn default() -> PsoParams {
        PsoParams {
            w: 1.0,
            c1: 2.05,
            c2: 2.05,
            vmax: 2.0,
            vmin: -2.0,
        }
    }
}

pub struct ParticleSwarm {
    params: PsoParams,
    pop_size: usize,
    rng: ChaCha8Rng,
    positions: Vec<ContinuousGenome>,
    velocities: Vec<ContinuousGenome>,
    pbest_pos: Vec<ContinuousGenome>,
    pbest_fit: Vec<f64>,
    gbest_pos: ContinuousGenome,
    gbest_fit: f64,
    initialized: bool,
    base: AskTellBase,
}

impl ParticleSwarm {
    pub fn new(params: PsoParams, pop_size: usize, mut rng: ChaCha8Rng) -> ParticleSwarm {
        let positions: Vec<ContinuousGenome> =
            (0..pop_size).map(|_| random_genome(&mut rng)).collect();
        ParticleSwarm {
            params,
            pop_size,
            rng,
            velocities: vec![[0.0; NUM_EDGES]; pop_size],
            pbest_pos: positions.clone(),
            pbest_fit: vec![f64::NEG_INFINITY; pop_size],
            gbest_pos: positions[0],
            gbest_fit: f64::NEG_INFINITY,
            positions,
            initialized: false,
            base: AskTellBase::default(),
        }
    }

    fn advance(&mut self) {
        for i in 0..self.pop_size {
            for d in 0..NUM_EDGES {
                let r1: f64 = self.rng.random_range(0.0..1.0);
                let r2: f64 = self.rng.random_range(0.0..1.0);
                let v = self.params.w * self.velocities[i][d]
                    + self.params.c1 * r1 * (self.pbest_pos[i][d] - self.positions[i][d])
                    + self.params.c2 * r2 * (self.gbest_pos[d] - self.positions[i][d]);
                self.velocities[i][d] = v.clamp(self.params.vmin, self.params.vmax);
                self.positions[i][d] += self.velocities[i][d];
            }
        }
    }
}

impl Optimizer for ParticleSwarm {
    fn name(&self) -> &'static str {
        "pso"
    }

    fn ask(&mut self) -> Result<Vec<Genotype>, OptimizerError> {
        if self.initialized {
            self.advance();
        }
        let batch = self.positions.iter().map(transfer_decode).collect();
        self.base.stage(batch)
    }

    fn tell(&mut self, fitnesses: &[f64]) -> Result<(), OptimizerError> {
        let (_, full) = self.base.absorb(fitnesses)?;
        if !full {
            return Ok(());
        }
        for (i, &fit) in fitnesses.iter().enumerate() {
            if fit > self.pbest_fit[i] {
                self.pbest_fit[i] = fit;
                self.pbest_pos[i] = self.positions[i];
            }
            if fit > self.gbest_fit {
                self.gbest_fit = fit;
                self.gbest_pos = self.positions[i];
            }
        }
        self.initialized = true;
        Ok(())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }
}

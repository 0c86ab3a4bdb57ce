//! Generational genetic algorithm on native integer genotypes: tournament
//! selection, one-point crossover, per-gene uniform reset mutation.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AskTellBase, Optimizer, OptimizerError};
use crate::search_space::{Genotype, NUM_EDGES, NUM_OPERATIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    /// Crossover probability.
    pub pc: f64,
    /// Per-gene mutation probability.
    pub pm: f64,
    /// Tournament size.
    pub tournament_k: usize,
}

impl Default for GaParams {
    fn default() -> GaParams {
        GaParams {
            pc: 0.9,
            pm: 0.01,
            tournament_k: 2,
        }
    }
}

pub struct GeneticAlgorithm {
    params: GaParams,
    pop_size: usize,
    rng: ChaCha8Rng,
    population: Vec<Genotype>,
    fitnesses: Vec<f64>,
    evaluated: bool,
    base: AskTellBase,
}

impl GeneticAlgorithm {
    pub fn new(params: GaParams, pop_size: usize, mut rng: ChaCha8Rng) -> GeneticAlgorithm {
        let population = (0..pop_size).map(|_| Genotype::random(&mut rng)).collect();
        GeneticAlgorithm {
            params,
            pop_size,
            rng,
            population,
            fitnesses: Vec::new(),
            evaluated: false,
            base: AskTellBase::default(),
        }
    }

    pub fn population(&self) -> &[Genotype] {
        &self.population
    }

    fn tournament(&mut self) -> Genotype {
        let mut winner = self.rng.random_range(0..self.pop_size);
        for _ in 1..self.params.tournament_k {
            let challenger = self.rng.random_range(0..self.pop_size);
            if self.fitnesses[challenger] > self.fitnesses[winner] {
                winner = challenger;
            }
        }
        self.population[winner]
    }

    fn crossover(&mut self, a: Genotype, b: Genotype) -> (Genotype, Genotype) {
        let cut = self.rng.random_range(1..NUM_EDGES);
        let mut ca = *a.genes();
        let mut cb = *b.genes();
        ca[cut..].copy_from_slice(&b.genes()[cut..]);
        cb[cut..].copy_from_slice(&a.genes()[cut..]);
        (Genotype::from_genes(ca), Genotype::from_genes(cb))
    }

    fn mutate(&mut self, g: Genotype) -> Genotype {
        let mut genes = *g.genes();
        for gene in genes.iter_mut() {
            if self.rng.random_bool(self.params.pm) {
                *gene = self.rng.random_range(0..NUM_OPERATIONS as u8);
            }
        }
        Genotype::from_genes(genes)
    }

    fn breed(&mut self) -> Vec<Genotype> {
        let mut offspring = Vec::with_capacity(self.pop_size);
        while offspring.len() < self.pop_size {
            let p1 = self.tournament();
            let p2 = self.tournament();
            let (c1, c2) = if self.rng.random_bool(self.params.pc) {
                self.crossover(p1, p2)
            } else {
                (p1, p2)
            };
            let c1 = self.mutate(c1);
            offspring.push(c1);
            if offspring.len() < self.pop_size {
                let c2 = self.mutate(c2);
                offspring.push(c2);
            }
        }
        offspring
    }
}

impl Optimizer for GeneticAlgorithm {
    fn name(&self) -> &'static str {
        "ga"
    }

    fn ask(&mut self) -> Result<Vec<Genotype>, OptimizerError> {
        let batch = if self.evaluated {
            self.breed()
        } else {
            self.population.clone()
        };
        self.base.stage(batch)
    }

    fn tell(&mut self, fitnesses: &[f64]) -> Result<(), OptimizerError> {
        let (batch, full) = self.base.absorb(fitnesses)?;
        if !full {
            return Ok(());
        }
        // Generational replacement.
        self.population = batch;
        self.fitnesses = fitnesses.to_vec();
        self.evaluated = true;
        Ok(())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn fresh(seed: u64) -> GeneticAlgorithm {
        GeneticAlgorithm::new(GaParams::default(), 30, ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn initial_population_is_valid_and_reproducible() {
        let a = fresh(5);
        let b = fresh(5);
        assert_eq!(a.population(), b.population());
        assert_eq!(a.population().len(), 30);
        assert!(a
            .population()
            .iter()
            .all(|g| g.genes().iter().all(|&v| v < 5)));
        assert_ne!(fresh(6).population(), a.population());
    }

    #[test]
    fn offspring_are_valid_and_best_is_monotone() {
        let mut ga = fresh(11);
        let mut prev_best = f64::NEG_INFINITY;
        for _ in 0..20 {
            let batch = ga.ask().unwrap();
            assert_eq!(batch.len(), 30);
            // Fitness: favor high gene sums, so selection has a gradient.
            let fits: Vec<f64> = batch
                .iter()
                .map(|g| g.genes().iter().map(|&v| v as f64).sum())
                .collect();
            ga.tell(&fits).unwrap();
            let best = ga.best().unwrap().1;
            assert!(best >= prev_best);
            prev_best = best;
        }
        assert!(prev_best >= 18.0, "selection should make progress");
    }

    #[test]
    fn crossover_swaps_tails() {
        let mut ga = fresh(3);
        let a = Genotype::from_indices(&[0, 0, 0, 0, 0, 0]).unwrap();
        let b = Genotype::from_indices(&[4, 4, 4, 4, 4, 4]).unwrap();
        let (c1, c2) = ga.crossover(a, b);
        // One-point: each child is a prefix of one parent and suffix of the other.
        let cut = c1.genes().iter().position(|&g| g == 4).unwrap();
        assert!((1..NUM_EDGES).contains(&cut));
        assert!(c1.genes()[..cut].iter().all(|&g| g == 0));
        assert!(c1.genes()[cut..].iter().all(|&g| g == 4));
        assert!(c2.genes()[..cut].iter().all(|&g| g == 4));
        assert!(c2.genes()[cut..].iter().all(|&g| g == 0));
    }

    #[test]
    fn partial_tell_skips_replacement() {
        let mut ga = fresh(8);
        let first = ga.ask().unwrap();
        ga.tell(&vec![1.0; 30]).unwrap();
        let second = ga.ask().unwrap();
        ga.tell(&[50.0; 4]).unwrap(); // truncated final batch
        assert_eq!(ga.population().len(), 30);
        assert_ne!(ga.population(), &second[..], "offspring not adopted");
        assert_eq!(ga.best().unwrap().1, 50.0, "best still tracks prefix");
        let _ = first;
    }
}

//! The baseline optimizers behind a single ask/tell contract.
//!
//! GA searches the discrete genotype space natively; PSO, DE, CMA-ES, JADE
//! and SHADE search a continuous box `[0, 5)^6` and reach the genotype space
//! through [`transfer_decode`]. Random and exhaustive search are included as
//! reference pseudo-optimizers.
//!
//! Protocol: `ask` proposes a batch of candidate genotypes, the caller
//! evaluates at most that many (a final batch may be truncated by the
//! remaining budget) and hands the fitnesses back via `tell`. A `tell` that
//! covers only a prefix of the batch updates best-so-far bookkeeping but
//! skips the algorithm's distribution update.

mod cmaes;
mod de;
mod ga;
mod jade;
mod pso;
mod shade;

pub use cmaes::{CmaEs, CmaesParams};
pub use de::{DeParams, DifferentialEvolution};
pub use ga::{GaParams, GeneticAlgorithm};
pub use jade::{Jade, JadeParams};
pub use pso::{ParticleSwarm, PsoParams};
pub use shade::{Shade, ShadeParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search_space::{Genotype, NUM_EDGES, NUM_GENOTYPES, NUM_OPERATIONS};

/// Continuous search representation: one coordinate per edge, working
/// domain `[0.0, 5.0)`.
pub type ContinuousGenome = [f64; NUM_EDGES];

/// Lower bound of each continuous coordinate.
pub const DOMAIN_LOW: f64 = 0.0;
/// Exclusive upper bound of each continuous coordinate.
pub const DOMAIN_HIGH: f64 = NUM_OPERATIONS as f64;
/// Margin keeping clamped coordinates strictly below [`DOMAIN_HIGH`].
pub const DOMAIN_MARGIN: f64 = 1e-9;

/// Maps a continuous genome onto a genotype: per coordinate, clamp into
/// `[0, 5 - 1e-9]` and floor. Deterministic, total (non-finite coordinates
/// land on gene 0 or 4), and surjective onto the genotype space; distinct
/// genomes with floor-equal coordinates collapse onto the same genotype.
pub fn transfer_decode(x: &ContinuousGenome) -> Genotype {
    let mut genes = [0u8; NUM_EDGES];
    for (gene, &coord) in genes.iter_mut().zip(x.iter()) {
        let clamped = coord.clamp(DOMAIN_LOW, DOMAIN_HIGH - DOMAIN_MARGIN);
        *gene = clamped.floor() as u8;
    }
    Genotype::from_genes(genes)
}

/// Ask/tell protocol failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer spec: {0}")]
    InvalidSpec(String),
    #[error("protocol error: {0}")]
    Protocol(&'static str),
    #[error("budget mismatch: {told} fitnesses for a batch of {asked}")]
    BudgetMismatch { asked: usize, told: usize },
}

/// Black-box optimizer over the genotype space.
pub trait Optimizer: Send {
    /// Stable kind name (`ga`, `pso`, ...).
    fn name(&self) -> &'static str;

    /// Proposes the next batch of candidates. An empty batch signals that
    /// the optimizer has nothing left to propose (exhaustive search only).
    fn ask(&mut self) -> Result<Vec<Genotype>, OptimizerError>;

    /// Reports fitnesses for a prefix of the last asked batch.
    fn tell(&mut self, fitnesses: &[f64]) -> Result<(), OptimizerError>;

    /// Best (genotype, fitness) observed so far, if anything was told.
    fn best(&self) -> Option<(Genotype, f64)>;

    /// Cheap internal-state validation, run by the campaign after every
    /// tell: adaptation parameters in range, covariance positive-definite.
    fn check_invariants(&self) -> Result<(), String> {
        Ok(())
    }
}

/// Ask/tell bookkeeping shared by all optimizers: pending-batch tracking and
/// best-so-far maintenance.
#[derive(Debug, Default)]
pub(crate) struct AskTellBase {
    pending: Option<Vec<Genotype>>,
    best: Option<(Genotype, f64)>,
}

impl AskTellBase {
    pub(crate) fn stage(&mut self, batch: Vec<Genotype>) -> Result<Vec<Genotype>, OptimizerError> {
        if self.pending.is_some() {
            return Err(OptimizerError::Protocol("ask called twice without tell"));
        }
        self.pending = Some(batch.clone());
        Ok(batch)
    }

    /// Consumes the pending batch, updates best-so-far from the told prefix
    /// and returns `(batch, full)` where `full` says every asked genotype
    /// was evaluated.
    pub(crate) fn absorb(
        &mut self,
        fitnesses: &[f64],
    ) -> Result<(Vec<Genotype>, bool), OptimizerError> {
        let batch = self
            .pending
            .take()
            .ok_or(OptimizerError::Protocol("tell without ask"))?;
        if fitnesses.len() > batch.len() {
            return Err(OptimizerError::BudgetMismatch {
                asked: batch.len(),
                told: fitnesses.len(),
            });
        }
        for (g, &f) in batch.iter().zip(fitnesses.iter()) {
            if self.best.is_none_or(|(_, bf)| f > bf) {
                self.best = Some((*g, f));
            }
        }
        let full = fitnesses.len() == batch.len();
        Ok((batch, full))
    }

    pub(crate) fn best(&self) -> Option<(Genotype, f64)> {
        self.best
    }
}

/// Draws a uniform point in the continuous domain.
pub(crate) fn random_genome<R: Rng + ?Sized>(rng: &mut R) -> ContinuousGenome {
    use rand::RngExt;
    let mut x = [0.0; NUM_EDGES];
    for coord in x.iter_mut() {
        *coord = rng.random_range(DOMAIN_LOW..DOMAIN_HIGH);
    }
    x
}

fn probability(name: &str, value: f64) -> Result<(), OptimizerError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(OptimizerError::InvalidSpec(format!(
            "{name} = {value} outside [0, 1]"
        )))
    }
}

/// Parameters of one baseline optimizer kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MhKind {
    Ga(GaParams),
    Pso(PsoParams),
    De(DeParams),
    Cmaes(CmaesParams),
    Jade(JadeParams),
    Shade(ShadeParams),
}

impl MhKind {
    pub fn name(&self) -> &'static str {
        match self {
            MhKind::Ga(_) => "ga",
            MhKind::Pso(_) => "pso",
            MhKind::De(_) => "de",
            MhKind::Cmaes(_) => "cmaes",
            MhKind::Jade(_) => "jade",
            MhKind::Shade(_) => "shade",
        }
    }

    /// Default-parameter spec for a kind name.
    pub fn from_name(name: &str) -> Option<MhKind> {
        match name {
            "ga" => Some(MhKind::Ga(GaParams::default())),
            "pso" => Some(MhKind::Pso(PsoParams::default())),
            "de" => Some(MhKind::De(DeParams::default())),
            "cmaes" => Some(MhKind::Cmaes(CmaesParams::default())),
            "jade" => Some(MhKind::Jade(JadeParams::default())),
            "shade" => Some(MhKind::Shade(ShadeParams::default())),
            _ => None,
        }
    }
}

/// Full configuration of one baseline optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhSpec {
    #[serde(flatten)]
    pub kind: MhKind,
    pub population_size: usize,
    pub budget: usize,
}

impl MhSpec {
    pub fn new(kind: MhKind, budget: usize) -> MhSpec {
        MhSpec {
            kind,
            population_size: 30,
            budget,
        }
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.population_size < 2 {
            return Err(OptimizerError::InvalidSpec(format!(
                "population_size = {} below 2",
                self.population_size
            )));
        }
        if self.budget < self.population_size {
            return Err(OptimizerError::InvalidSpec(format!(
                "budget {} below population size {}",
                self.budget, self.population_size
            )));
        }
        match &self.kind {
            MhKind::Ga(p) => {
                probability("pc", p.pc)?;
                probability("pm", p.pm)?;
                if p.tournament_k == 0 {
                    return Err(OptimizerError::InvalidSpec("tournament_k = 0".into()));
                }
            }
            MhKind::Pso(p) => {
                if p.vmax < p.vmin {
                    return Err(OptimizerError::InvalidSpec(format!(
                        "vmax {} below vmin {}",
                        p.vmax, p.vmin
                    )));
                }
            }
            MhKind::De(p) => {
                probability("cr", p.cr)?;
                if !p.f.is_finite() || p.f < 0.0 {
                    return Err(OptimizerError::InvalidSpec(format!("bad F {}", p.f)));
                }
            }
            MhKind::Cmaes(p) => {
                if p.sigma0.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                    return Err(OptimizerError::InvalidSpec(format!(
                        "sigma0 = {} not positive",
                        p.sigma0
                    )));
                }
            }
            MhKind::Jade(p) => {
                probability("mu_f0", p.mu_f0)?;
                probability("mu_cr0", p.mu_cr0)?;
                probability("c", p.c)?;
                probability("p", p.p)?;
            }
            MhKind::Shade(p) => {
                probability("mu_f0", p.mu_f0)?;
                probability("mu_cr0", p.mu_cr0)?;
                if p.memory_size == 0 {
                    return Err(OptimizerError::InvalidSpec("memory_size = 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Builds the optimizer described by `spec`, seeding its private stream.
pub fn make_optimizer(spec: &MhSpec, seed: u64) -> Result<Box<dyn Optimizer>, OptimizerError> {
    spec.validate()?;
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let pop = spec.population_size;
    Ok(match &spec.kind {
        MhKind::Ga(p) => Box::new(GeneticAlgorithm::new(p.clone(), pop, rng)),
        MhKind::Pso(p) => Box::new(ParticleSwarm::new(p.clone(), pop, rng)),
        MhKind::De(p) => Box::new(DifferentialEvolution::new(p.clone(), pop, rng)),
        MhKind::Cmaes(p) => Box::new(CmaEs::new(p.clone(), pop, rng)),
        MhKind::Jade(p) => Box::new(Jade::new(p.clone(), pop, rng)),
        MhKind::Shade(p) => Box::new(Shade::new(p.clone(), pop, rng)),
    })
}

/// Uniform random search, batched like the population optimizers.
pub struct RandomSearch {
    batch_size: usize,
    rng: ChaCha8Rng,
    base: AskTellBase,
}

impl RandomSearch {
    pub fn new(batch_size: usize, seed: u64) -> RandomSearch {
        RandomSearch {
            batch_size: batch_size.max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
            base: AskTellBase::default(),
        }
    }
}

impl Optimizer for RandomSearch {
    fn name(&self) -> &'static str {
        "random"
    }

    fn ask(&mut self) -> Result<Vec<Genotype>, OptimizerError> {
        let batch = (0..self.batch_size)
            .map(|_| Genotype::random(&mut self.rng))
            .collect();
        self.base.stage(batch)
    }

    fn tell(&mut self, fitnesses: &[f64]) -> Result<(), OptimizerError> {
        self.base.absorb(fitnesses).map(|_| ())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }
}

/// Enumerates the whole genotype space in index order, then stops proposing.
pub struct ExhaustiveSearch {
    batch_size: usize,
    next_index: usize,
    base: AskTellBase,
}

impl ExhaustiveSearch {
    pub fn new(batch_size: usize) -> ExhaustiveSearch {
        ExhaustiveSearch {
            batch_size: batch_size.max(1),
            next_index: 0,
            base: AskTellBase::default(),
        }
    }
}

impl Optimizer for ExhaustiveSearch {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn ask(&mut self) -> Result<Vec<Genotype>, OptimizerError> {
        let end = (self.next_index + self.batch_size).min(NUM_GENOTYPES);
        let batch: Vec<Genotype> = (self.next_index..end)
            .map(|i| Genotype::from_index(i).expect("index in range"))
            .collect();
        self.next_index = end;
        if batch.is_empty() {
            // Nothing left; do not stage an empty pending batch.
            return Ok(batch);
        }
        self.base.stage(batch)
    }

    fn tell(&mut self, fitnesses: &[f64]) -> Result<(), OptimizerError> {
        self.base.absorb(fitnesses).map(|_| ())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::enumerate_all;

    #[test]
    fn decode_clamps_then_floors() {
        let g = transfer_decode(&[2.7, -1.0, 5.3, 0.0, 4.99, 3.2]);
        assert_eq!(g.genes(), &[2, 0, 4, 0, 4, 3]);
        assert_eq!(transfer_decode(&[0.0; 6]).genes(), &[0; 6]);
        // Non-finite coordinates still decode deterministically.
        let g = transfer_decode(&[f64::NAN, f64::INFINITY, f64::NEG_INFINITY, 1.0, 1.0, 1.0]);
        assert_eq!(g.genes()[1], 4);
        assert_eq!(g.genes()[2], 0);
    }

    #[test]
    fn decode_is_surjective_via_midpoints() {
        for g in enumerate_all() {
            let mut x = [0.0; NUM_EDGES];
            for (coord, &gene) in x.iter_mut().zip(g.genes().iter()) {
                *coord = gene as f64 + 0.5;
            }
            assert_eq!(transfer_decode(&x), g);
        }
    }

    #[test]
    fn exhaustive_covers_space_once() {
        let mut ex = ExhaustiveSearch::new(1000);
        let mut seen = 0usize;
        loop {
            let batch = ex.ask().unwrap();
            if batch.is_empty() {
                break;
            }
            for (i, g) in batch.iter().enumerate() {
                assert_eq!(g.to_index(), seen + i);
            }
            let fits: Vec<f64> = batch.iter().map(|g| g.to_index() as f64).collect();
            seen += batch.len();
            ex.tell(&fits).unwrap();
        }
        assert_eq!(seen, NUM_GENOTYPES);
        // Best fitness is the highest index since fitness == index here.
        assert_eq!(ex.best().unwrap().1, (NUM_GENOTYPES - 1) as f64);
    }

    #[test]
    fn protocol_violations_are_reported() {
        let mut rs = RandomSearch::new(5, 1);
        assert!(matches!(
            rs.tell(&[1.0]),
            Err(OptimizerError::Protocol(_))
        ));
        rs.ask().unwrap();
        assert!(matches!(rs.ask(), Err(OptimizerError::Protocol(_))));
        assert!(matches!(
            rs.tell(&[1.0; 6]),
            Err(OptimizerError::BudgetMismatch { asked: 5, told: 6 })
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = MhSpec::new(MhKind::from_name("ga").unwrap(), 3000);
        spec.population_size = 1;
        assert!(spec.validate().is_err());

        let mut spec = MhSpec::new(MhKind::Ga(GaParams { pc: 1.5, ..Default::default() }), 3000);
        assert!(spec.validate().is_err());
        spec = MhSpec::new(MhKind::from_name("de").unwrap(), 10);
        spec.population_size = 30;
        assert!(spec.validate().is_err(), "budget below population");
        assert!(MhKind::from_name("foo").is_none());
    }

    #[test]
    fn specs_round_trip_through_serde() {
        for name in ["ga", "pso", "de", "cmaes", "jade", "shade"] {
            let spec = MhSpec::new(MhKind::from_name(name).unwrap(), 3000);
            let text = serde_json::to_string(&spec).unwrap();
            assert!(text.contains(&format!("\"kind\":\"{name}\"")));
            let back: MhSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Floor-equal coordinates always collapse to the same genotype.
            #[test]
            fn decode_is_many_to_one(
                genes in proptest::array::uniform6(0u8..5),
                fracs_a in proptest::array::uniform6(0.0f64..1.0),
                fracs_b in proptest::array::uniform6(0.0f64..1.0),
            ) {
                let mut a = [0.0; NUM_EDGES];
                let mut b = [0.0; NUM_EDGES];
                for i in 0..NUM_EDGES {
                    a[i] = genes[i] as f64 + fracs_a[i] * 0.999;
                    b[i] = genes[i] as f64 + fracs_b[i] * 0.999;
                }
                prop_assert_eq!(transfer_decode(&a), transfer_decode(&b));
            }

            #[test]
            fn decode_output_is_always_valid(
                x in proptest::array::uniform6(-100.0f64..100.0),
            ) {
                let g = transfer_decode(&x);
                prop_assert!(g.genes().iter().all(|&v| v < 5));
            }
        }
    }
}

//! CMA-ES with standard small-dimension defaults: rank-mu and rank-one
//! covariance updates, cumulative step-size adaptation, boundary handling by
//! resampling (up to 100 draws) then clamping into the box.

use nalgebra::{SMatrix, SVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{transfer_decode, AskTellBase, ContinuousGenome, Optimizer, OptimizerError, DOMAIN_HIGH, DOMAIN_LOW, DOMAIN_MARGIN};
use crate::search_space::{Genotype, NUM_EDGES};

const DIM: usize = NUM_EDGES;
type Vec6 = SVector<f64, DIM>;
type Mat6 = SMatrix<f64, DIM, DIM>;

const RESAMPLE_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaesParams {
    /// Initial step size.
    pub sigma0: f64,
}

impl Default for CmaesParams {
    fn default() -> CmaesParams {
        CmaesParams { sigma0: 1.3 }
    }
}

pub struct CmaEs {
    lambda: usize,
    weights: Vec<f64>,
    mu: usize,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_one: f64,
    c_mu: f64,
    chi_n: f64,
    mean: Vec6,
    sigma: f64,
    cov: Mat6,
    path_sigma: Vec6,
    path_c: Vec6,
    generation: u64,
    rng: ChaCha8Rng,
    sampled: Vec<Vec6>,
    base: AskTellBase,
}

impl CmaEs {
    pub fn new(params: CmaesParams, pop_size: usize, rng: ChaCha8Rng) -> CmaEs {
        let n = DIM as f64;
        let lambda = pop_size;
        let mu = lambda / 2;
        let mut weights: Vec<f64> = (0..mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
            .collect();
        let sum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= sum;
        }
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_one = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff))
            .min(1.0 - c_one);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        CmaEs {
            lambda,
            weights,
            mu,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_one,
            c_mu,
            chi_n,
            mean: Vec6::from_element((DOMAIN_LOW + DOMAIN_HIGH) / 2.0),
            sigma: params.sigma0,
            cov: Mat6::identity(),
            path_sigma: Vec6::zeros(),
            path_c: Vec6::zeros(),
            generation: 0,
            rng,
            sampled: Vec::new(),
            base: AskTellBase::default(),
        }
    }

    pub fn mean(&self) -> [f64; DIM] {
        self.mean.into()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> [[f64; DIM]; DIM] {
        let mut out = [[0.0; DIM]; DIM];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = self.cov[(r, c)];
            }
        }
        out
    }

    /// Eigenbasis and per-axis standard deviations of the covariance.
    fn decompose(&self) -> (Mat6, Vec6) {
        let eigen = nalgebra::SymmetricEigen::new(self.cov);
        let mut scales = Vec6::zeros();
        for i in 0..DIM {
            scales[i] = eigen.eigenvalues[i].max(1e-20).sqrt();
        }
        (eigen.eigenvectors, scales)
    }

    fn in_box(x: &Vec6) -> bool {
        x.iter().all(|&v| (DOMAIN_LOW..DOMAIN_HIGH).contains(&v))
    }

    fn clamp_into_box(x: &mut Vec6) {
        for v in x.iter_mut() {
            *v = v.clamp(DOMAIN_LOW, DOMAIN_HIGH - DOMAIN_MARGIN);
        }
    }

    fn sample_population(&mut self) {
        let (basis, scales) = self.decompose();
        self.sampled.clear();
        for _ in 0..self.lambda {
            let mut x = Vec6::zeros();
            for attempt in 0..=RESAMPLE_LIMIT {
                let mut z = Vec6::zeros();
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut self.rng);
                }
                let y = basis * z.component_mul(&scales);
                x = self.mean + self.sigma * y;
                if Self::in_box(&x) || attempt == RESAMPLE_LIMIT {
                    break;
                }
            }
            Self::clamp_into_box(&mut x);
            self.sampled.push(x);
        }
    }
}

impl Optimizer for CmaEs {
    fn name(&self) -> &'static str {
        "cmaes"
    }

    fn ask(&mut self) -> Result<Vec<Genotype>, OptimizerError> {
        self.sample_population();
        let batch = self
            .sampled
            .iter()
            .map(|x| {
                let coords: ContinuousGenome = (*x).into();
                transfer_decode(&coords)
            })
            .collect();
        self.base.stage(batch)
    }

    fn tell(&mut self, fitnesses: &[f64]) -> Result<(), OptimizerError> {
        let (_, full) = self.base.absorb(fitnesses)?;
        if !full {
            return Ok(());
        }

        // Rank maximizing: best fitness first.
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]).then(a.cmp(&b)));

        let old_mean = self.mean;
        let steps: Vec<Vec6> = order
            .iter()
            .take(self.mu)
            .map(|&i| (self.sampled[i] - old_mean) / self.sigma)
            .collect();
        let mut step_mean = Vec6::zeros();
        for (w, y) in self.weights.iter().zip(steps.iter()) {
            step_mean += *w * y;
        }
        self.mean = old_mean + self.sigma * step_mean;

        // C^{-1/2} * step_mean via the eigendecomposition.
        let (basis, scales) = self.decompose();
        let mut whitened = basis.transpose() * step_mean;
        for i in 0..DIM {
            whitened[i] /= scales[i];
        }
        let whitened = basis * whitened;

        self.generation += 1;
        self.path_sigma = (1.0 - self.c_sigma) * self.path_sigma
            + (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt() * whitened;

        let expected_decay =
            (1.0 - (1.0 - self.c_sigma).powi(2 * self.generation as i32)).sqrt();
        let h_sigma = if self.path_sigma.norm() / expected_decay / self.chi_n
            < 1.4 + 2.0 / (DIM as f64 + 1.0)
        {
            1.0
        } else {
            0.0
        };
        self.path_c = (1.0 - self.c_c) * self.path_c
            + h_sigma * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt() * step_mean;

        let mut rank_mu = Mat6::zeros();
        for (w, y) in self.weights.iter().zip(steps.iter()) {
            rank_mu += *w * y * y.transpose();
        }
        let stall_correction = (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c);
        self.cov = (1.0 - self.c_one - self.c_mu) * self.cov
            + self.c_one * (self.path_c * self.path_c.transpose() + stall_correction * self.cov)
            + self.c_mu * rank_mu;
        // Keep exactly symmetric against drift.
        self.cov = (self.cov + self.cov.transpose()) * 0.5;

        self.sigma = (self.sigma
            * ((self.c_sigma / self.d_sigma) * (self.path_sigma.norm() / self.chi_n - 1.0))
                .exp())
        .max(1e-12);
        Ok(())
    }

    fn best(&self) -> Option<(Genotype, f64)> {
        self.base.best()
    }

    fn check_invariants(&self) -> Result<(), String> {
        let max_asym = (self.cov - self.cov.transpose()).abs().max();
        if max_asym > 1e-9 {
            return Err(format!("cmaes covariance asymmetry {max_asym}"));
        }
        if nalgebra::Cholesky::new(self.cov).is_none() {
            return Err("cmaes covariance not positive-definite".into());
        }
        Ok(())
    }
}

//! Seeded synthetic datasets drawn from a known logistic model, for
//! generate-and-refit checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{logistic, LabeledDataset, LogisticModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateDistribution {
    Bernoulli(f64),
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
}

enum Sampler {
    Bernoulli(Bernoulli),
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl Sampler {
    fn new(d: &CovariateDistribution) -> Result<Self> {
        let bad = |e: String| Error::Config(format!("invalid covariate distribution {d:?}: {e}"));
        Ok(match *d {
            CovariateDistribution::Bernoulli(p) => Sampler::Bernoulli(Bernoulli::new(p).map_err(|e| bad(e.to_string()))?),
            CovariateDistribution::Normal { mean, sd } => Sampler::Normal(Normal::new(mean, sd).map_err(|e| bad(e.to_string()))?),
            CovariateDistribution::Uniform { low, high } => {
                Sampler::Uniform(Uniform::new(low, high).map_err(|e| bad(e.to_string()))?)
            }
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Bernoulli(b) => f64::from(u8::from(b.sample(rng))),
            Sampler::Normal(n) => n.sample(rng),
            Sampler::Uniform(u) => u.sample(rng),
        }
    }
}

/// Draws `n` rows: covariates independently from `distributions`, then the
/// outcome from `Bernoulli(logistic(η))` under `model`.
pub fn generate(model: &LogisticModel, distributions: &[CovariateDistribution], n: usize, seed: u64) -> Result<LabeledDataset> {
    if distributions.len() != model.schema().len() {
        return Err(Error::Schema(format!(
            "{} covariate distributions for {} covariates",
            distributions.len(),
            model.schema().len()
        )));
    }
    let samplers = distributions.iter().map(Sampler::new).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = samplers.iter().map(|s| s.sample(&mut rng)).collect();
        let p = logistic(model.eta_unchecked(&z));
        outcomes.push(rng.random::<f64>() < p);
        rows.push(z);
    }
    LabeledDataset::new(model.schema().clone(), rows, outcomes)
}

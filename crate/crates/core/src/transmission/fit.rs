use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{logistic, softplus, LabeledDataset, LogisticModel};
use crate::error::{Error, Result};

/// |η| beyond which a fitted probability is within ~1e-13 of 0 or 1.
const SEPARATION_ETA: f64 = 30.0;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute score component.
    pub tol: f64,
    /// L2 penalty on the non-intercept coefficients. Zero means plain maximum likelihood.
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iter: 100,
            tol: 1e-8,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Intercept first, then one per covariate, from the inverse observed information.
    pub standard_errors: Vec<f64>,
    pub max_score: f64,
    pub ridge: f64,
}

/// Bernoulli log-likelihood of `data` under `model`.
pub fn log_likelihood(model: &LogisticModel, data: &LabeledDataset) -> Result<f64> {
    data.check_schema(model)?;
    Ok(data
        .rows()
        .iter()
        .zip(data.outcomes())
        .map(|(z, &y)| {
            let eta = model.eta_unchecked(z);
            if y {
                eta - softplus(eta)
            } else {
                -softplus(eta)
            }
        })
        .sum())
}

/// Gradient of the log-likelihood: `Σ (yᵢ − pᵢ) (1, zᵢ)`, intercept first.
pub fn score(model: &LogisticModel, data: &LabeledDataset) -> Result<Vec<f64>> {
    data.check_schema(model)?;
    let mut g = vec![0.0; model.parameter_count()];
    for (z, &y) in data.rows().iter().zip(data.outcomes()) {
        let r = f64::from(u8::from(y)) - logistic(model.eta_unchecked(z));
        g[0] += r;
        for (gi, zi) in g[1..].iter_mut().zip(z) {
            *gi += r * zi;
        }
    }
    Ok(g)
}

/// Akaike information criterion `2k − 2 ln L`, with `k` counting the intercept.
pub fn aic(model: &LogisticModel, data: &LabeledDataset) -> Result<f64> {
    Ok(2.0 * model.parameter_count() as f64 - 2.0 * log_likelihood(model, data)?)
}

struct Design {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Design {
    fn new(data: &LabeledDataset) -> Self {
        let n = data.len();
        let k = data.schema().len() + 1;
        let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { data.rows()[i][j - 1] });
        let y = DVector::from_iterator(n, data.outcomes().iter().map(|&b| f64::from(u8::from(b))));
        Design { x, y }
    }

    fn penalized_loglik(&self, eta: &DVector<f64>, beta: &DVector<f64>, ridge: f64) -> f64 {
        let ll: f64 = eta.iter().zip(self.y.iter()).map(|(&e, &y)| y * e - softplus(e)).sum();
        ll - 0.5 * ridge * beta.rows(1, beta.len() - 1).norm_squared()
    }
}

/// Maximum-likelihood fit by Newton–Raphson with step halving.
///
/// Converges when the largest score component falls below `config.tol` and
/// the Newton step has become negligible. With `ridge == 0`, fitted
/// probabilities pinned at 0 or 1 are reported as separation.
pub fn fit_logistic(data: &LabeledDataset, config: &FitConfig) -> Result<(LogisticModel, FitDiagnostics)> {
    let n = data.len();
    let positives = data.positives();
    if positives == 0 || positives == n {
        return Err(Error::Input("fitting needs at least one row of each outcome class".into()));
    }
    if !(config.ridge >= 0.0 && config.ridge.is_finite()) {
        return Err(Error::Config(format!("ridge must be ≥ 0, got {}", config.ridge)));
    }
    let design = Design::new(data);
    let k = design.x.ncols();
    let mut penalty = DMatrix::<f64>::identity(k, k) * config.ridge;
    penalty[(0, 0)] = 0.0;

    let mut beta = DVector::<f64>::zeros(k);
    beta[0] = (positives as f64 / (n - positives) as f64).ln();
    let mut eta = &design.x * &beta;
    let mut objective = design.penalized_loglik(&eta, &beta, config.ridge);

    let to_model = |beta: &DVector<f64>| {
        LogisticModel::new(data.schema().clone(), beta[0], beta.iter().skip(1).copied().collect())
    };

    for iter in 0..=config.max_iter {
        let p = eta.map(logistic);
        let w = p.map(|pi| pi * (1.0 - pi));
        let mut grad = design.x.tr_mul(&(&design.y - &p));
        grad -= &penalty * &beta;
        let max_score = grad.amax();

        if config.ridge == 0.0 && eta.amax() > SEPARATION_ETA {
            return Err(Error::Separation { iterations: iter });
        }

        let xw = DMatrix::from_fn(n, k, |i, j| design.x[(i, j)] * w[i]);
        let info = design.x.tr_mul(&xw) + &penalty;
        let Some(chol) = info.clone().cholesky() else {
            return Err(degenerate_information(config, &eta, iter));
        };
        let l = chol.l_dirty();
        let diag_max = (0..k).map(|i| l[(i, i)]).fold(0.0f64, f64::max);
        if (0..k).any(|i| l[(i, i)] <= 1e-7 * diag_max) {
            return Err(degenerate_information(config, &eta, iter));
        }
        let step = chol.solve(&grad);

        if max_score < config.tol && step.amax() < 1e-6 * (1.0 + beta.amax()) {
            let cov = chol.inverse();
            let standard_errors = (0..k).map(|i| cov[(i, i)].sqrt()).collect();
            let model = to_model(&beta)?;
            let ll = log_likelihood(&model, data)?;
            return Ok((
                model,
                FitDiagnostics {
                    log_likelihood: ll,
                    iterations: iter,
                    standard_errors,
                    max_score,
                    ridge: config.ridge,
                },
            ));
        }
        if iter == config.max_iter {
            return Err(Error::Convergence {
                iterations: iter,
                max_score,
                last: Box::new(to_model(&beta)?),
            });
        }

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + &step * scale;
            let cand_eta = &design.x * &candidate;
            let cand_obj = design.penalized_loglik(&cand_eta, &candidate, config.ridge);
            if cand_obj >= objective - 1e-12 * objective.abs().max(1.0) {
                beta = candidate;
                eta = cand_eta;
                objective = cand_obj;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::Convergence {
                iterations: iter,
                max_score,
                last: Box::new(to_model(&beta)?),
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn degenerate_information(config: &FitConfig, eta: &DVector<f64>, iter: usize) -> Error {
    if config.ridge == 0.0 && eta.amax() > SEPARATION_ETA / 2.0 {
        Error::Separation { iterations: iter }
    } else {
        Error::Singular
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    /// Mean of the per-fold accuracies.
    pub accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub fold_sizes: Vec<usize>,
}

/// Seeded k-fold cross-validated classification accuracy.
///
/// Rows are shuffled with a ChaCha8 stream seeded by `seed` and cut into `k`
/// contiguous parts whose sizes differ by at most one. Each fold's training
/// and held-out parts must contain both outcome classes.
pub fn k_fold_cv(data: &LabeledDataset, k: usize, threshold: f64, seed: u64, config: &FitConfig) -> Result<CvReport> {
    if k < 2 {
        return Err(Error::Input(format!("k-fold cross-validation needs k ≥ 2, got {k}")));
    }
    if k > data.len() {
        return Err(Error::Input(format!("k = {k} exceeds the number of rows ({})", data.len())));
    }
    crate::error::check_probability(threshold, "classification threshold")?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = data.len() / k;
    let extra = data.len() % k;
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for f in 0..k {
        bounds.push(bounds[f] + base + usize::from(f < extra));
    }

    let folds: Vec<Result<(f64, usize)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let test_idx = &order[bounds[f]..bounds[f + 1]];
            let train_idx: Vec<usize> = order[..bounds[f]].iter().chain(&order[bounds[f + 1]..]).copied().collect();
            let test = data.subset(test_idx);
            let train = data.subset(&train_idx);
            for (part, name) in [(&train, "training"), (&test, "held-out")] {
                let pos = part.positives();
                if pos == 0 || pos == part.len() {
                    return Err(Error::Fold {
                        fold: f,
                        reason: format!("{name} part contains a single outcome class"),
                    });
                }
            }
            let (model, _) = fit_logistic(&train, config)?;
            let correct = test
                .rows()
                .iter()
                .zip(test.outcomes())
                .filter(|(z, &y)| (logistic(model.eta_unchecked(z)) >= threshold) == y)
                .count();
            Ok((correct as f64 / test.len() as f64, test.len()))
        })
        .collect();

    let mut fold_accuracies = Vec::with_capacity(k);
    let mut fold_sizes = Vec::with_capacity(k);
    for r in folds {
        let (acc, size) = r?;
        fold_accuracies.push(acc);
        fold_sizes.push(size);
    }
    Ok(CvReport {
        accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
        fold_accuracies,
        fold_sizes,
    })
}

//! Stochastic cross-check of the analytic risk formulas.
//!
//! Trials are split into a fixed number of partitions. Partition `k` draws
//! from a ChaCha8 generator seeded with `seed` on stream `k`, so estimates do
//! not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_probability, Error, Result};
use crate::individual::{first_success_risk, hazard_risk_between, HazardContact};

/// Number of independent RNG streams trials are spread over.
pub const PARTITIONS: u64 = 64;

/// Trials used by acceptance-level validation.
pub const ACCEPTANCE_TRIALS: u64 = 1_000_000;
/// Trials used by the fast test tier.
pub const FAST_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub trials: u64,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Input("at least one trial is required".into()));
        }
        Ok(SimulationConfig { trials, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub risk: f64,
    /// `sqrt(r (1 − r) / trials)`.
    pub standard_error: f64,
    /// Standard error from the spread of per-partition frequencies.
    pub batch_standard_error: f64,
    pub trials: u64,
}

fn partition_rng(seed: u64, partition: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(partition);
    rng
}

fn run<F>(config: &SimulationConfig, trial: F) -> Result<Estimate>
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    if config.trials == 0 {
        return Err(Error::Input("at least one trial is required".into()));
    }
    let base = config.trials / PARTITIONS;
    let extra = config.trials % PARTITIONS;
    let counts: Vec<(u64, u64)> = (0..PARTITIONS)
        .into_par_iter()
        .map(|k| {
            let n = base + u64::from(k < extra);
            let mut rng = partition_rng(config.seed, k);
            let hits = (0..n).filter(|_| trial(&mut rng)).count() as u64;
            (hits, n)
        })
        .collect();
    let hits: u64 = counts.iter().map(|c| c.0).sum();
    let risk = hits as f64 / config.trials as f64;

    let used: Vec<f64> = counts.iter().filter(|c| c.1 > 0).map(|c| c.0 as f64 / c.1 as f64).collect();
    let batch_standard_error = if used.len() > 1 {
        let m = used.iter().sum::<f64>() / used.len() as f64;
        let var = used.iter().map(|f| (f - m).powi(2)).sum::<f64>() / (used.len() - 1) as f64;
        (var / used.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(Estimate {
        risk,
        standard_error: (risk * (1.0 - risk) / config.trials as f64).sqrt(),
        batch_standard_error,
        trials: config.trials,
    })
}

/// Fraction of trials in which at least one contact transmits, each contact
/// drawn as an independent Bernoulli trial in sequence order.
pub fn simulate_first_success(probs: &[f64], config: &SimulationConfig) -> Result<Estimate> {
    for (i, &p) in probs.iter().enumerate() {
        check_probability(p, &format!("probability #{i}"))?;
    }
    run(config, |rng| probs.iter().any(|&p| rng.random::<f64>() < p))
}

/// Fraction of trials whose infection time falls in `[t1, t2]`.
///
/// Each contact's infection time is drawn by inverting its own cumulative
/// hazard at a unit-exponential variate; the HCP is infected at the earliest
/// of these times.
pub fn simulate_hazard(contacts: &[HazardContact], t1: f64, t2: f64, config: &SimulationConfig) -> Result<Estimate> {
    // validates rates and window
    hazard_risk_between(contacts, t1, t2)?;
    if t2 <= t1 {
        return run(config, |_| false);
    }
    run(config, |rng| {
        let first = contacts
            .iter()
            .map(|c| {
                let e = -(-rng.random::<f64>()).ln_1p();
                infection_time(c, e)
            })
            .fold(f64::INFINITY, f64::min);
        first.is_finite() && first >= t1 && first <= t2
    })
}

/// Time at which the contact's cumulative hazard reaches `e`, or infinity.
fn infection_time(c: &HazardContact, mut e: f64) -> f64 {
    let mut t = c.start;
    for s in &c.segments {
        let mass = s.rate * s.length;
        if s.rate > 0.0 && mass >= e {
            return t + e / s.rate;
        }
        e -= mass;
        t += s.length;
    }
    f64::INFINITY
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    Binomial(Vec<f64>),
    Hazard { contacts: Vec<HazardContact>, t1: f64, t2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
}

impl Scenario {
    pub fn analytic(&self) -> Result<f64> {
        match &self.kind {
            ScenarioKind::Binomial(p) => first_success_risk(p),
            ScenarioKind::Hazard { contacts, t1, t2 } => hazard_risk_between(contacts, *t1, *t2),
        }
    }

    pub fn simulate(&self, config: &SimulationConfig) -> Result<Estimate> {
        match &self.kind {
            ScenarioKind::Binomial(p) => simulate_first_success(p, config),
            ScenarioKind::Hazard { contacts, t1, t2 } => simulate_hazard(contacts, *t1, *t2, config),
        }
    }
}

/// Ten fixed scenarios mixing binomial sequences and hazard processes.
pub fn bundled_scenarios() -> Vec<Scenario> {
    let binomial = |name: &str, p: Vec<f64>| Scenario {
        name: name.into(),
        kind: ScenarioKind::Binomial(p),
    };
    let hazard = |name: &str, contacts: Vec<HazardContact>, t1: f64, t2: f64| Scenario {
        name: name.into(),
        kind: ScenarioKind::Hazard { contacts, t1, t2 },
    };
    let constant = |start, rate, len| HazardContact::constant(start, rate, len).expect("valid contact");
    let matched = |start, p, len| HazardContact::matching_probability(start, p, len).expect("valid contact");
    let piecewise = |start, segs: &[(f64, f64)]| {
        HazardContact::new(
            start,
            segs.iter()
                .map(|&(r, l)| crate::individual::HazardSegment::new(r, l).expect("valid segment"))
                .collect(),
        )
        .expect("valid contact")
    };
    vec![
        binomial("single-contact", vec![0.05]),
        binomial("low-medium-medium", vec![0.01, 0.05, 0.05]),
        binomial("twenty-equal", vec![0.02; 20]),
        binomial("mixed-levels", vec![0.3, 0.001, 0.6, 0.1]),
        binomial("fifty-rare", vec![0.005; 50]),
        hazard("constant-hour", vec![constant(0.0, 0.01, 60.0)], 0.0, 60.0),
        hazard(
            "overlapping-piecewise",
            vec![
                piecewise(0.0, &[(0.002, 30.0), (0.02, 15.0), (0.0, 10.0), (0.005, 20.0)]),
                piecewise(20.0, &[(0.01, 40.0)]),
            ],
            10.0,
            70.0,
        ),
        hazard("late-window", vec![constant(0.0, 0.02, 120.0)], 45.0, 90.0),
        hazard(
            "matched-sequence",
            vec![matched(0.0, 0.1, 15.0), matched(15.0, 0.2, 30.0), matched(45.0, 0.05, 5.0)],
            0.0,
            50.0,
        ),
        hazard(
            "sparse-low-rate",
            vec![constant(0.0, 5e-4, 30.0), constant(600.0, 5e-4, 30.0), constant(1440.0, 5e-4, 30.0)],
            f64::NEG_INFINITY,
            f64::INFINITY,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub seed: u64,
    pub empirical: f64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub analytic: f64,
    pub first: Attempt,
    /// Present when the first attempt exceeded 3σ.
    pub retry: Option<Attempt>,
    pub passed: bool,
}

impl ScenarioOutcome {
    /// The attempt the verdict rests on.
    pub fn decisive(&self) -> &Attempt {
        self.retry.as_ref().unwrap_or(&self.first)
    }
}

fn z_score(empirical: f64, analytic: f64, se: f64) -> f64 {
    let diff = empirical - analytic;
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Runs every scenario. A scenario passes within 3σ, or within 4σ on one
/// retry with the next seed.
pub fn validate(scenarios: &[Scenario], config: &SimulationConfig) -> Result<Vec<ScenarioOutcome>> {
    scenarios
        .iter()
        .map(|s| {
            let analytic = s.analytic()?;
            let attempt = |seed: u64| -> Result<Attempt> {
                let est = s.simulate(&SimulationConfig { seed, ..*config })?;
                Ok(Attempt {
                    seed,
                    empirical: est.risk,
                    standard_error: est.standard_error,
                    z: z_score(est.risk, analytic, est.standard_error),
                })
            };
            let first = attempt(config.seed)?;
            let (retry, passed) = if first.z.abs() <= 3.0 {
                (None, true)
            } else {
                let second = attempt(config.seed.wrapping_add(1))?;
                let ok = second.z.abs() <= 4.0;
                (Some(second), ok)
            };
            Ok(ScenarioOutcome {
                name: s.name.clone(),
                analytic,
                first,
                retry,
                passed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(trials: u64, seed: u64) -> SimulationConfig {
        SimulationConfig::new(trials, seed).unwrap()
    }

    #[test]
    fn certain_and_impossible() {
        let e = simulate_first_success(&[1.0], &cfg(1000, 3)).unwrap();
        assert_eq!(e.risk, 1.0);
        assert_eq!(e.standard_error, 0.0);
        assert_eq!(simulate_first_success(&[0.0, 0.0], &cfg(1000, 3)).unwrap().risk, 0.0);
        assert_eq!(simulate_first_success(&[], &cfg(10, 3)).unwrap().risk, 0.0);
        assert!(matches!(simulate_first_success(&[1.5], &cfg(10, 3)), Err(Error::Domain(_))));
        assert!(SimulationConfig::new(0, 1).is_err());
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let p = [0.01, 0.05, 0.05];
        let a = simulate_first_success(&p, &cfg(50_000, 9)).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_first_success(&p, &cfg(50_000, 9)).unwrap());
        assert_eq!(a, b);
        let c = simulate_first_success(&p, &cfg(50_000, 10)).unwrap();
        assert_ne!(a.risk, c.risk);
    }

    #[test]
    fn sequence_within_three_sigma() {
        let e = simulate_first_success(&[0.01, 0.05, 0.05], &cfg(FAST_TRIALS * 20, 1)).unwrap();
        let analytic = first_success_risk(&[0.01, 0.05, 0.05]).unwrap();
        assert!((e.risk - analytic).abs() <= 4.0 * e.standard_error);
        let ratio = e.batch_standard_error / e.standard_error;
        assert!(ratio > 0.6 && ratio < 1.4, "batch/binomial SE ratio {ratio}");
    }

    #[test]
    fn hazard_trivial_cases() {
        let zero = vec![HazardContact::constant(0.0, 0.0, 60.0).unwrap()];
        assert_eq!(simulate_hazard(&zero, 0.0, 60.0, &cfg(1000, 1)).unwrap().risk, 0.0);
        let busy = vec![HazardContact::constant(0.0, 0.5, 60.0).unwrap()];
        assert_eq!(simulate_hazard(&busy, 30.0, 30.0, &cfg(1000, 1)).unwrap().risk, 0.0);
        let bad = vec![HazardContact {
            start: 0.0,
            segments: vec![crate::individual::HazardSegment { rate: -1.0, length: 1.0 }],
        }];
        assert!(matches!(simulate_hazard(&bad, 0.0, 1.0, &cfg(10, 1)), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_hazard_hour() {
        let c = vec![HazardContact::constant(0.0, 0.01, 60.0).unwrap()];
        let e = simulate_hazard(&c, 0.0, 60.0, &cfg(FAST_TRIALS * 10, 5)).unwrap();
        let exact = 1.0 - (-0.6f64).exp();
        assert!((e.risk - exact).abs() <= 4.0 * e.standard_error, "{} vs {exact}", e.risk);
    }

    #[test]
    fn inverse_cdf_walks_segments() {
        let c = HazardContact::new(
            10.0,
            vec![
                crate::individual::HazardSegment::new(0.1, 5.0).unwrap(),
                crate::individual::HazardSegment::new(0.0, 5.0).unwrap(),
                crate::individual::HazardSegment::new(0.5, 2.0).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(infection_time(&c, 0.25), 12.5);
        assert_eq!(infection_time(&c, 0.75), 20.5);
        assert_eq!(infection_time(&c, 2.0), f64::INFINITY);
        assert!((c.cumulative_hazard(infection_time(&c, 1.1)) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn bundled_scenarios_fast_tier() {
        let scenarios = bundled_scenarios();
        assert_eq!(scenarios.len(), 10);
        let outcomes = validate(&scenarios, &cfg(FAST_TRIALS, 2024)).unwrap();
        for o in &outcomes {
            assert!(o.passed, "{}: z = {}", o.name, o.decisive().z);
            assert!((0.0..=1.0).contains(&o.first.empirical));
        }
    }
}

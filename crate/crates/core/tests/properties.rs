use indexmap::IndexMap;
use nosocomial_risk::bayes_net::{infer_posterior, joint_probability_indexed, population_risk_posterior, BayesNet};
use nosocomial_risk::bundled;
use nosocomial_risk::individual::{first_success_risk, geometric_risk};
use nosocomial_risk::transmission::{
    aic, fit_logistic, log_likelihood, score, CovariateSchema, FitConfig, LabeledDataset, LogisticModel,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bundled_data() -> LabeledDataset {
    LabeledDataset::from_csv_reader(bundled::SYNTHETIC_DATASET.as_bytes()).unwrap()
}

fn generator() -> LogisticModel {
    LogisticModel::from_json_str(bundled::SYNTHETIC_GENERATOR).unwrap()
}

#[test]
fn score_matches_finite_differences() {
    let data = bundled_data();
    let base = generator();
    let analytic = score(&base, &data).unwrap();
    let h = 1e-5;
    for i in 0..base.parameter_count() {
        let shifted = |d: f64| {
            let mut intercept = base.intercept();
            let mut coef = base.coefficients().to_vec();
            if i == 0 {
                intercept += d;
            } else {
                coef[i - 1] += d;
            }
            let m = LogisticModel::new(base.schema().clone(), intercept, coef).unwrap();
            log_likelihood(&m, &data).unwrap()
        };
        let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
        assert!(
            (numeric - analytic[i]).abs() <= 1e-4 * analytic[i].abs().max(1.0),
            "parameter {i}: {numeric} vs {}",
            analytic[i]
        );
    }
}

#[test]
fn bundled_dataset_recovers_generator() {
    let data = bundled_data();
    let truth = generator();
    let (fit, diag) = fit_logistic(&data, &FitConfig::default()).unwrap();
    let est = std::iter::once(fit.intercept()).chain(fit.coefficients().iter().copied());
    let gen = std::iter::once(truth.intercept()).chain(truth.coefficients().iter().copied());
    for ((e, g), se) in est.zip(gen).zip(&diag.standard_errors) {
        assert!((e - g).abs() <= 3.0 * se, "{e} vs {g} (se {se})");
    }
    // risk-raising PPE gaps positive, training protective
    assert!(fit.coefficient("Lacked_PPE").unwrap() > 0.0);
    assert!(fit.coefficient("cont_wo_PPE").unwrap() > 0.0);
    assert!(fit.coefficient("PPE_train").unwrap() < 0.0);
}

#[test]
fn noise_column_does_not_help_aic() {
    let data = bundled_data();
    let (base, _) = fit_logistic(&data, &FitConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<f64> = (0..data.len()).map(|_| rng.random::<f64>()).collect();
    let noisy = data.with_column("noise", &noise).unwrap();
    let (fit, _) = fit_logistic(&noisy, &FitConfig::default()).unwrap();
    let ll_gain = log_likelihood(&fit, &noisy).unwrap() - log_likelihood(&base, &data).unwrap();
    assert!(ll_gain >= -1e-9);
    // an irrelevant column rarely buys a full unit of log-likelihood
    assert!(ll_gain < 1.0, "gain {ll_gain}");
    assert!(aic(&fit, &noisy).unwrap() > aic(&base, &data).unwrap());
}

#[test]
fn intercept_only_aic() {
    let empty = CovariateSchema::new(Vec::<String>::new()).unwrap();
    let data = LabeledDataset::new(empty, vec![Vec::new(); 100], (0..100).map(|i| i % 2 == 0).collect()).unwrap();
    let (m, _) = fit_logistic(&data, &FitConfig::default()).unwrap();
    assert!((aic(&m, &data).unwrap() - 140.63).abs() <= 0.01);
}

#[test]
fn demo_network_joint_is_normalised() {
    let net = BayesNet::bundled_demo();
    let cards: Vec<usize> = (0..net.len()).map(|v| net.cardinality(v)).collect();
    let mut states = vec![0usize; net.len()];
    let mut total = 0.0;
    'outer: loop {
        total += joint_probability_indexed(&net, &states);
        for v in 0..states.len() {
            states[v] += 1;
            if states[v] < cards[v] {
                continue 'outer;
            }
            states[v] = 0;
        }
        break;
    }
    assert!((total - 1.0).abs() <= 1e-9);
}

#[test]
fn demo_outcome_posterior_is_a_distribution() {
    let net = BayesNet::bundled_demo();
    let (node, state) = net.outcome().unwrap();
    let prior = population_risk_posterior(&net, &IndexMap::new()).unwrap();
    let direct = infer_posterior(&net, &net.nodes()[node].name, &IndexMap::new()).unwrap();
    assert!((prior - direct.probabilities[state]).abs() <= 1e-12);
    assert!((direct.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
}

proptest! {
    #[test]
    fn risk_bounded_and_monotone(ps in prop::collection::vec(0.0f64..=1.0, 0..30), extra in 0.0f64..=1.0) {
        let r = first_success_risk(&ps).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let mut longer = ps.clone();
        longer.push(extra);
        prop_assert!(first_success_risk(&longer).unwrap() >= r - 1e-15);
    }

    #[test]
    fn geometric_matches_repeated_sequence(p in 0.0f64..=1.0, n in 0u32..40) {
        let seq = vec![p; n as usize];
        let a = geometric_risk(p, n).unwrap();
        let b = first_success_risk(&seq).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn prediction_increases_with_positive_coefficient(x in -5.0f64..5.0, dx in 0.01f64..3.0) {
        let m = generator();
        let i = m.schema().index_of("Lacked_PPE").unwrap();
        let mut z = vec![0.0; m.schema().len()];
        z[i] = x;
        let lo = m.predict_probability(&z).unwrap();
        z[i] = x + dx;
        prop_assert!(m.predict_probability(&z).unwrap() > lo);
    }
}

//! Facility-level (population) infection risk.
//!
//! Two aggregators are provided: a logistic combiner over the individual risks
//! and the engineering/administrative control factors, and the equal-weight
//! average of four feature-marginalized expectations
//! `E_X[PIR] = Σ_x P(X = x) · E[PIR | X = x]`.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::transmission::logistic;

/// Allowed deviation of a mixture's probabilities from summing to one.
pub const MIXTURE_SUM_TOLERANCE: f64 = 0.02;

/// Named engineering- and administrative-control factor values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlFactors(pub IndexMap<String, f64>);

/// Parameters of the logistic combiner
/// `PIR_i = logistic((α · PIR + Σ wₖ Fₖ + b) / τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationModel {
    pub alpha: Vec<f64>,
    pub weights: IndexMap<String, f64>,
    pub bias: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    1.0
}

impl AggregationModel {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: AggregationModel =
            serde_json::from_str(s).map_err(|e| Error::parse(Some(e.line() as u64), e.to_string()))?;
        if !(m.tau.is_finite() && m.tau > 0.0) {
            return Err(Error::Config(format!("tau = {} must be positive", m.tau)));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

pub fn logistic_aggregate(individual_risks: &[f64], factors: &ControlFactors, model: &AggregationModel) -> Result<f64> {
    if !(model.tau.is_finite() && model.tau > 0.0) {
        return Err(Error::Config(format!("tau = {} must be positive", model.tau)));
    }
    if model.alpha.len() != individual_risks.len() {
        return Err(Error::Schema(format!(
            "{} individual risks but {} alpha weights",
            individual_risks.len(),
            model.alpha.len()
        )));
    }
    if model.weights.len() != factors.0.len() {
        return Err(Error::Schema(format!(
            "{} control factors but {} factor weights",
            factors.0.len(),
            model.weights.len()
        )));
    }
    for (i, &r) in individual_risks.iter().enumerate() {
        check_probability(r, &format!("individual risk #{i}"))?;
    }
    let mut f = model.bias;
    f += model.alpha.iter().zip(individual_risks).map(|(a, r)| a * r).sum::<f64>();
    for (name, w) in &model.weights {
        let v = factors
            .0
            .get(name)
            .ok_or_else(|| Error::Schema(format!("control factor `{name}` has a weight but no value")))?;
        if !v.is_finite() {
            return Err(Error::Domain(format!("control factor `{name}` is not finite")));
        }
        f += w * v;
    }
    Ok(logistic(f / model.tau))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureBin {
    pub label: String,
    pub p: f64,
    pub conditional_pir: f64,
}

/// A discrete feature distribution with the conditional risk in each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMixture {
    pub variable: String,
    pub bins: Vec<MixtureBin>,
}

impl FeatureMixture {
    pub fn probability_sum(&self) -> f64 {
        self.bins.iter().map(|b| b.p).sum()
    }

    fn check_bins(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::Input(format!("mixture `{}` has no bins", self.variable)));
        }
        for b in &self.bins {
            if !(b.p.is_finite() && b.p >= 0.0) {
                return Err(Error::Domain(format!("{}: bin `{}` has probability {}", self.variable, b.label, b.p)));
            }
            check_probability(b.conditional_pir, &format!("{}: conditional risk of bin `{}`", self.variable, b.label))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_bins()?;
        let sum = self.probability_sum();
        if (sum - 1.0).abs() > MIXTURE_SUM_TOLERANCE {
            return Err(Error::Distribution {
                variable: self.variable.clone(),
                sum,
                tolerance: MIXTURE_SUM_TOLERANCE,
            });
        }
        Ok(())
    }

    /// Rescales the bin probabilities to sum to exactly one. The sum must
    /// still be within tolerance.
    pub fn renormalized(&self) -> Result<FeatureMixture> {
        self.validate()?;
        let sum = self.probability_sum();
        Ok(FeatureMixture {
            variable: self.variable.clone(),
            bins: self
                .bins
                .iter()
                .map(|b| MixtureBin {
                    p: b.p / sum,
                    ..b.clone()
                })
                .collect(),
        })
    }
}

/// `Σ P(X = x) · E[PIR | X = x]` over the bins, as given.
pub fn mixture_expectation(mix: &FeatureMixture) -> Result<f64> {
    mix.validate()?;
    Ok(mix.bins.iter().map(|b| b.p * b.conditional_pir).sum())
}

/// Scales a reference PPE-attributed expectation by the ratio of PPE
/// insufficiency `(1 − target) / (1 − reference)`.
pub fn ppe_adjusted_expectation(reference_expectation: f64, reference_sufficiency: f64, target_sufficiency: f64) -> Result<f64> {
    if !(reference_expectation.is_finite() && reference_expectation >= 0.0) {
        return Err(Error::Domain(format!("reference expectation {reference_expectation} must be ≥ 0")));
    }
    check_probability(reference_sufficiency, "reference PPE sufficiency")?;
    check_probability(target_sufficiency, "target PPE sufficiency")?;
    if reference_sufficiency == 1.0 {
        return Err(Error::Division("reference PPE sufficiency of 1 leaves no insufficiency to scale".into()));
    }
    Ok(reference_expectation * (1.0 - target_sufficiency) / (1.0 - reference_sufficiency))
}

/// The four population features, in the order the estimator takes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationFeature {
    SohTime,
    Cs,
    PpeSl,
    Ors,
}

impl PopulationFeature {
    pub const ALL: [PopulationFeature; 4] = [
        PopulationFeature::SohTime,
        PopulationFeature::Cs,
        PopulationFeature::PpeSl,
        PopulationFeature::Ors,
    ];

    pub fn key(self) -> &'static str {
        match self {
            PopulationFeature::SohTime => "soh_time",
            PopulationFeature::Cs => "cs",
            PopulationFeature::PpeSl => "ppe_sl",
            PopulationFeature::Ors => "ors",
        }
    }
}

/// Arithmetic mean of the four feature expectations
/// (time from symptom onset to hospitalization, clinical severity, PPE
/// sufficiency level, occupational risk).
pub fn equal_weight_population_risk(expectations: &[f64]) -> Result<f64> {
    if expectations.len() != 4 {
        return Err(Error::Arity {
            expected: 4,
            found: expectations.len(),
        });
    }
    for (f, &e) in PopulationFeature::ALL.iter().zip(expectations) {
        check_probability(e, &format!("expectation over {}", f.key()))?;
    }
    Ok(expectations.iter().sum::<f64>() / 4.0)
}

/// How one feature's expectation is obtained in a case-study config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSource {
    Expectation(f64),
    Mixture {
        bins: Vec<MixtureBin>,
        #[serde(default)]
        renormalize: Option<bool>,
    },
    PpeAdjusted {
        reference_expectation: f64,
        reference_sufficiency: f64,
        target_sufficiency: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilityConfig {
    pub name: String,
    pub features: IndexMap<String, FeatureSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseStudyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Default for mixtures that do not say whether to renormalize.
    #[serde(default = "default_renormalize")]
    pub renormalize: bool,
    pub facilities: Vec<FacilityConfig>,
}

fn default_renormalize() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityRisk {
    pub name: String,
    pub soh_time: f64,
    pub cs: f64,
    pub ppe_sl: f64,
    pub ors: f64,
    pub pir: f64,
}

impl CaseStudyConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::parse(Some(e.line() as u64), e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// The two-facility configuration bundled with the crate.
    pub fn bundled() -> Self {
        Self::from_json_str(crate::bundled::CASE_STUDY).expect("bundled case study parses")
    }

    pub fn evaluate(&self) -> Result<Vec<FacilityRisk>> {
        self.facilities.iter().map(|f| self.evaluate_facility(f)).collect()
    }

    fn evaluate_facility(&self, facility: &FacilityConfig) -> Result<FacilityRisk> {
        if let Some(unknown) = facility
            .features
            .keys()
            .find(|k| !PopulationFeature::ALL.iter().any(|f| f.key() == k.as_str()))
        {
            return Err(Error::Config(format!("{}: unknown feature `{unknown}`", facility.name)));
        }
        let mut values = [0.0; 4];
        for (slot, feature) in values.iter_mut().zip(PopulationFeature::ALL) {
            let source = facility.features.get(feature.key()).ok_or_else(|| {
                Error::Config(format!("{}: feature `{}` is missing", facility.name, feature.key()))
            })?;
            *slot = match source {
                FeatureSource::Expectation(e) => *e,
                FeatureSource::Mixture { bins, renormalize } => {
                    let mix = FeatureMixture {
                        variable: format!("{}/{}", facility.name, feature.key()),
                        bins: bins.clone(),
                    };
                    if renormalize.unwrap_or(self.renormalize) {
                        mixture_expectation(&mix.renormalized()?)?
                    } else {
                        mixture_expectation(&mix)?
                    }
                }
                FeatureSource::PpeAdjusted {
                    reference_expectation,
                    reference_sufficiency,
                    target_sufficiency,
                } => ppe_adjusted_expectation(*reference_expectation, *reference_sufficiency, *target_sufficiency)?,
            };
        }
        let pir = equal_weight_population_risk(&values)?;
        let [soh_time, cs, ppe_sl, ors] = values;
        Ok(FacilityRisk {
            name: facility.name.clone(),
            soh_time,
            cs,
            ppe_sl,
            ors,
            pir,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn model(alpha: Vec<f64>, weights: &[(&str, f64)], bias: f64, tau: f64) -> AggregationModel {
        AggregationModel {
            alpha,
            weights: weights.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            bias,
            tau,
        }
    }

    fn factors(v: &[(&str, f64)]) -> ControlFactors {
        ControlFactors(v.iter().map(|(k, x)| (k.to_string(), *x)).collect())
    }

    fn mix(bins: &[(f64, f64)]) -> FeatureMixture {
        FeatureMixture {
            variable: "X".into(),
            bins: bins
                .iter()
                .enumerate()
                .map(|(i, &(p, c))| MixtureBin {
                    label: i.to_string(),
                    p,
                    conditional_pir: c,
                })
                .collect(),
        }
    }

    #[test]
    fn aggregate_hand_evaluations() {
        let zero = model(vec![0.0, 0.0], &[("vent", 0.0)], 0.0, 1.0);
        assert_eq!(logistic_aggregate(&[0.3, 0.9], &factors(&[("vent", 2.0)]), &zero).unwrap(), 0.5);
        // 1·0.2 + 0.5·0.4 − 0.4 = 0
        let m = model(vec![1.0], &[("training", 0.5)], -0.4, 1.0);
        assert_abs_diff_eq!(logistic_aggregate(&[0.2], &factors(&[("training", 0.4)]), &m).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn aggregate_tau_limit() {
        let mut prev = 1.0;
        for tau in [1.0, 10.0, 100.0] {
            let m = model(vec![2.0], &[], 0.5, tau);
            let r = logistic_aggregate(&[0.5], &ControlFactors::default(), &m).unwrap();
            assert!(r > 0.5 && r < prev);
            prev = r;
        }
        assert!(prev - 0.5 < 0.004);
    }

    #[test]
    fn aggregate_dimension_errors() {
        let m = model(vec![1.0], &[("a", 1.0)], 0.0, 1.0);
        assert!(matches!(logistic_aggregate(&[0.1, 0.2], &factors(&[("a", 1.0)]), &m), Err(Error::Schema(_))));
        assert!(matches!(logistic_aggregate(&[0.1], &factors(&[("b", 1.0)]), &m), Err(Error::Schema(_))));
        assert!(matches!(logistic_aggregate(&[0.1], &factors(&[]), &m), Err(Error::Schema(_))));
        let bad_tau = model(vec![1.0], &[], 0.0, 0.0);
        assert!(matches!(logistic_aggregate(&[0.1], &ControlFactors::default(), &bad_tau), Err(Error::Config(_))));
    }

    #[test]
    fn mixture_simple_cases() {
        assert_abs_diff_eq!(mixture_expectation(&mix(&[(1.0, 0.007)])).unwrap(), 0.007);
        assert_abs_diff_eq!(mixture_expectation(&mix(&[(0.5, 0.0), (0.5, 0.01)])).unwrap(), 0.005);
    }

    #[test]
    fn mixture_sum_tolerance() {
        assert!(mixture_expectation(&mix(&[(0.5, 0.1), (0.49, 0.2)])).is_ok());
        let err = mixture_expectation(&mix(&[(0.5, 0.1), (0.3, 0.2)])).unwrap_err();
        assert!(matches!(err, Error::Distribution { .. }), "{err}");
        assert!(mix(&[(0.1, 0.1), (0.01, 0.1), (0.08, 0.1)]).renormalized().is_err());
        let r = mix(&[(0.5, 0.1), (0.49, 0.2)]).renormalized().unwrap();
        assert_abs_diff_eq!(r.probability_sum(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn soh_time_distribution_reaches_published_expectation() {
        let cfg = CaseStudyConfig::bundled();
        let FeatureSource::Mixture { bins, .. } = &cfg.facilities[0].features["soh_time"] else {
            panic!("bundled SOH_time is a mixture");
        };
        let m = FeatureMixture {
            variable: "soh_time".into(),
            bins: bins.clone(),
        };
        let probs: Vec<f64> = m.bins.iter().map(|b| b.p).collect();
        assert_eq!(probs, [0.34, 0.21, 0.05, 0.02, 0.16, 0.21]);
        let e = mixture_expectation(&m.renormalized().unwrap()).unwrap();
        assert_abs_diff_eq!(e, 5.99e-3, epsilon = 5e-6);
    }

    #[test]
    fn ppe_adjustment() {
        assert_abs_diff_eq!(ppe_adjusted_expectation(0.0065, 0.9355, 0.9355).unwrap(), 0.0065, epsilon = 1e-15);
        let ca = ppe_adjusted_expectation(0.0065, 0.9355, 0.744).unwrap();
        assert_abs_diff_eq!(ca, 0.02580, epsilon = 2e-4);
        // oracle: plugging the adjusted term into the estimator gives the published total
        let total = equal_weight_population_risk(&[5.99e-3, 3.89e-3, ca, 0.0173]).unwrap();
        assert_abs_diff_eq!(total, 0.0132, epsilon = 2e-4);
        assert_eq!(ppe_adjusted_expectation(0.3, 0.5, 1.0).unwrap(), 0.0);
        assert!(matches!(ppe_adjusted_expectation(0.3, 1.0, 0.5), Err(Error::Division(_))));
    }

    #[test]
    fn equal_weight_estimator() {
        assert_abs_diff_eq!(equal_weight_population_risk(&[5.99e-3, 3.89e-3, 0.0065, 0.0173]).unwrap(), 0.0084, epsilon = 2e-4);
        assert_abs_diff_eq!(equal_weight_population_risk(&[5.99e-3, 3.89e-3, 0.02580, 0.0173]).unwrap(), 0.0132, epsilon = 2e-4);
        assert_eq!(equal_weight_population_risk(&[0.0; 4]).unwrap(), 0.0);
        assert!(matches!(equal_weight_population_risk(&[0.1; 3]), Err(Error::Arity { expected: 4, found: 3 })));
    }

    #[test]
    fn bundled_case_study() {
        let out = CaseStudyConfig::bundled().evaluate().unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].name, "Texas");
        assert_abs_diff_eq!(out[0].pir, 0.0084, epsilon = 2e-4);
        assert_eq!(out[1].name, "California");
        assert_abs_diff_eq!(out[1].pir, 0.0132, epsilon = 2e-4);
    }

    #[test]
    fn case_study_config_errors() {
        let missing = r#"{"facilities":[{"name":"X","features":{"soh_time":{"expectation":0},"cs":{"expectation":0},"ppe_sl":{"expectation":0}}}]}"#;
        assert!(matches!(CaseStudyConfig::from_json_str(missing).unwrap().evaluate(), Err(Error::Config(_))));
        let zeros = r#"{"facilities":[{"name":"X","features":{"soh_time":{"expectation":0},"cs":{"expectation":0},"ppe_sl":{"expectation":0},"ors":{"expectation":0}}}]}"#;
        assert_eq!(CaseStudyConfig::from_json_str(zeros).unwrap().evaluate().unwrap()[0].pir, 0.0);
        let bad_sum = r#"{"facilities":[{"name":"X","features":{"soh_time":{"mixture":{"bins":[{"label":"a","p":0.5,"conditional_pir":0.1}]}},"cs":{"expectation":0},"ppe_sl":{"expectation":0},"ors":{"expectation":0}}}]}"#;
        match CaseStudyConfig::from_json_str(bad_sum).unwrap().evaluate() {
            Err(Error::Distribution { variable, .. }) => assert_eq!(variable, "X/soh_time"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(CaseStudyConfig::from_json_str("{\"facilities\": 3}"), Err(Error::Parse { .. })));
    }

    proptest! {
        #[test]
        fn aggregate_increasing_in_weighted_risk(r in 0.0f64..0.9, dr in 0.001f64..0.1, a in 0.01f64..5.0, tau in 0.1f64..10.0) {
            let m = model(vec![a], &[], -0.2, tau);
            let lo = logistic_aggregate(&[r], &ControlFactors::default(), &m).unwrap();
            let hi = logistic_aggregate(&[r + dr], &ControlFactors::default(), &m).unwrap();
            prop_assert!(hi > lo);
        }

        #[test]
        fn mixture_linear_and_order_free(
            bins in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8),
            c in 0.0f64..1.0,
        ) {
            let total: f64 = bins.iter().map(|b| b.0).sum();
            prop_assume!(total > 0.0);
            let norm: Vec<(f64, f64)> = bins.iter().map(|&(p, r)| (p / total, r)).collect();
            let e = mixture_expectation(&mix(&norm)).unwrap();
            let lo = norm.iter().map(|b| b.1).fold(f64::MAX, f64::min);
            let hi = norm.iter().map(|b| b.1).fold(f64::MIN, f64::max);
            prop_assert!(e >= lo - 1e-12 && e <= hi + 1e-12);
            let scaled: Vec<(f64, f64)> = norm.iter().map(|&(p, r)| (p, r * c)).collect();
            prop_assert!((mixture_expectation(&mix(&scaled)).unwrap() - c * e).abs() < 1e-12);
            let reversed: Vec<(f64, f64)> = norm.iter().rev().copied().collect();
            prop_assert!((mixture_expectation(&mix(&reversed)).unwrap() - e).abs() < 1e-12);
        }

        #[test]
        fn estimator_symmetric_and_bounded(v in prop::array::uniform4(0.0f64..1.0)) {
            let r = equal_weight_population_risk(&v).unwrap();
            let rev = [v[3], v[2], v[1], v[0]];
            prop_assert!((equal_weight_population_risk(&rev).unwrap() - r).abs() < 1e-15);
            let lo = v.iter().copied().fold(f64::MAX, f64::min);
            let hi = v.iter().copied().fold(f64::MIN, f64::max);
            prop_assert!(r >= lo - 1e-15 && r <= hi + 1e-15);
        }
    }
}

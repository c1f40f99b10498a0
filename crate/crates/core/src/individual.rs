//! Individual-level infection risk.
//!
//! An HCP's close contacts are treated as independent Bernoulli trials ordered
//! in time. The potential infection risk (PIR) over a window is the probability
//! that the first successful transmission happens somewhere in the sequence:
//!
//! ```text
//! PIR = Σ_m [ Π_{r<m} (1 − p_r) ] · p_m  =  1 − Π_m (1 − p_m)
//! ```
//!
//! When the per-contact probability varies within a contact, each contact is
//! described by a piecewise-constant hazard and the risk is the survival
//! difference `S(t1) − S(t2)` with `S(t) = exp(−∫ h)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::time::Timestamp;
use crate::transmission::LogisticModel;

/// Epidemiological group of the person an HCP is in contact with.
///
/// Susceptible and recovered people cannot transmit during a stay and have no
/// compartment here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Compartment {
    #[serde(rename = "E")]
    Exposed,
    #[serde(rename = "IC")]
    InfectionConfirmed,
    #[serde(rename = "IS")]
    InfectionSuspected,
    #[serde(rename = "HW")]
    HealthcareWorker,
}

impl Compartment {
    pub const ALL: [Compartment; 4] = [
        Compartment::Exposed,
        Compartment::InfectionConfirmed,
        Compartment::InfectionSuspected,
        Compartment::HealthcareWorker,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Compartment::Exposed => "E",
            Compartment::InfectionConfirmed => "IC",
            Compartment::InfectionSuspected => "IS",
            Compartment::HealthcareWorker => "HW",
        }
    }
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Compartment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "E" => Ok(Compartment::Exposed),
            "IC" => Ok(Compartment::InfectionConfirmed),
            "IS" => Ok(Compartment::InfectionSuspected),
            "HW" => Ok(Compartment::HealthcareWorker),
            _ => Err(Error::parse(
                None,
                format!("unknown compartment `{s}` (expected one of E, IC, IS, HW)"),
            )),
        }
    }
}

/// One close contact between an HCP and another person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub contact_id: String,
    pub compartment: Compartment,
    pub start: Timestamp,
    pub duration_min: i64,
    pub transmission_prob: Option<f64>,
    pub covariates: Option<IndexMap<String, f64>>,
}

impl ContactEvent {
    pub fn with_probability(
        contact_id: impl Into<String>,
        compartment: Compartment,
        start: Timestamp,
        duration_min: i64,
        p: f64,
    ) -> Result<Self> {
        let event = ContactEvent {
            contact_id: contact_id.into(),
            compartment,
            start,
            duration_min,
            transmission_prob: Some(p),
            covariates: None,
        };
        event.validate()?;
        Ok(event)
    }

    pub fn with_covariates(
        contact_id: impl Into<String>,
        compartment: Compartment,
        start: Timestamp,
        duration_min: i64,
        covariates: IndexMap<String, f64>,
    ) -> Result<Self> {
        let event = ContactEvent {
            contact_id: contact_id.into(),
            compartment,
            start,
            duration_min,
            transmission_prob: None,
            covariates: Some(covariates),
        };
        event.validate()?;
        Ok(event)
    }

    pub fn end(&self) -> Timestamp {
        Timestamp(self.start.0 + self.duration_min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_min < 0 {
            return Err(Error::Domain(format!(
                "contact `{}` has negative duration {}",
                self.contact_id, self.duration_min
            )));
        }
        if let Some(p) = self.transmission_prob {
            check_probability(p, &format!("transmission probability of contact `{}`", self.contact_id))?;
        }
        if self.transmission_prob.is_none() && self.covariates.is_none() {
            return Err(Error::Config(format!(
                "contact `{}` has neither a transmission probability nor covariates",
                self.contact_id
            )));
        }
        Ok(())
    }

    /// Resolves the per-contact transmission probability, preferring an
    /// explicit value over the covariate route.
    pub fn resolve_probability(&self, model: Option<&LogisticModel>) -> Result<f64> {
        match (self.transmission_prob, &self.covariates) {
            (Some(p), _) => {
                check_probability(p, "transmission probability")?;
                Ok(p)
            }
            (None, Some(z)) => {
                let model = model.ok_or_else(|| {
                    Error::Config(format!(
                        "contact `{}` carries covariates but no transmission model was supplied",
                        self.contact_id
                    ))
                })?;
                model.predict_named(z)
            }
            (None, None) => Err(Error::Config(format!(
                "contact `{}` has neither a transmission probability nor covariates",
                self.contact_id
            ))),
        }
    }
}

/// Admission-to-recovery interval of a contact person, `[TP−, TP+]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureWindow {
    pub admit: Timestamp,
    pub recovery: Timestamp,
}

impl ExposureWindow {
    pub fn new(admit: Timestamp, recovery: Timestamp) -> Result<Self> {
        if admit > recovery {
            return Err(Error::Domain(format!(
                "exposure window admits at {admit} after recovery at {recovery}"
            )));
        }
        Ok(ExposureWindow { admit, recovery })
    }
}

/// The time span `[t1, t2]` over which risk is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub from: Timestamp,
    pub to: Timestamp,
}

impl ObservationWindow {
    pub fn new(from: Timestamp, to: Timestamp) -> Result<Self> {
        if from > to {
            return Err(Error::Domain(format!("observation window starts at {from} after it ends at {to}")));
        }
        Ok(ObservationWindow { from, to })
    }

    pub fn unbounded() -> Self {
        ObservationWindow {
            from: Timestamp::MIN,
            to: Timestamp::MAX,
        }
    }
}

impl Default for ObservationWindow {
    fn default() -> Self {
        Self::unbounded()
    }
}

/// Per-compartment contact tallies `N_E, N_IC, N_IS, N_HW`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CompartmentCounts {
    pub exposed: usize,
    pub confirmed: usize,
    pub suspected: usize,
    pub colleagues: usize,
}

impl CompartmentCounts {
    pub fn get(&self, c: Compartment) -> usize {
        match c {
            Compartment::Exposed => self.exposed,
            Compartment::InfectionConfirmed => self.confirmed,
            Compartment::InfectionSuspected => self.suspected,
            Compartment::HealthcareWorker => self.colleagues,
        }
    }

    pub fn total(&self) -> usize {
        self.exposed + self.confirmed + self.suspected + self.colleagues
    }
}

/// Time-ordered close contacts of one HCP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactSequence {
    hcp_id: String,
    events: Vec<ContactEvent>,
    window: ObservationWindow,
}

impl ContactSequence {
    /// Builds a sequence, sorting events by start time. Ties keep input order.
    pub fn new(hcp_id: impl Into<String>, mut events: Vec<ContactEvent>, window: ObservationWindow) -> Result<Self> {
        if window.from > window.to {
            return Err(Error::Domain("observation window is reversed".into()));
        }
        for e in &events {
            e.validate()?;
        }
        events.sort_by_key(|e| e.start);
        Ok(ContactSequence {
            hcp_id: hcp_id.into(),
            events,
            window,
        })
    }

    pub fn hcp_id(&self) -> &str {
        &self.hcp_id
    }

    pub fn events(&self) -> &[ContactEvent] {
        &self.events
    }

    pub fn window(&self) -> ObservationWindow {
        self.window
    }

    pub fn counts(&self) -> CompartmentCounts {
        let mut counts = CompartmentCounts::default();
        for e in &self.events {
            match e.compartment {
                Compartment::Exposed => counts.exposed += 1,
                Compartment::InfectionConfirmed => counts.confirmed += 1,
                Compartment::InfectionSuspected => counts.suspected += 1,
                Compartment::HealthcareWorker => counts.colleagues += 1,
            }
        }
        counts
    }
}

/// Probability that at least one of a sequence of independent contacts
/// transmits, accumulated contact by contact as first-success terms.
///
/// An empty sequence carries no risk.
pub fn first_success_risk(probs: &[f64]) -> Result<f64> {
    let mut survival = 1.0;
    let mut risk = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        check_probability(p, &format!("probability #{i}"))?;
        risk += survival * p;
        survival *= 1.0 - p;
    }
    Ok(risk.clamp(0.0, 1.0))
}

/// First-success risk of `n` contacts sharing the same probability `p`,
/// i.e. `1 − (1 − p)^n`.
pub fn geometric_risk(p: f64, n: u32) -> Result<f64> {
    check_probability(p, "probability")?;
    if n == 0 || p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok((-(f64::from(n) * (-p).ln_1p()).exp_m1()).clamp(0.0, 1.0))
}

/// Restricts an event to the part of it that falls inside both the
/// observation window and the contact person's exposure window.
///
/// Returns `None` when nothing of the event survives. A zero-length event is
/// kept when its instant lies inside the admissible interval; a positive-length
/// event must overlap it on an interval of positive length. A missing exposure
/// window does not restrict the event.
pub fn clip_to_exposure_window(
    event: &ContactEvent,
    exposure: Option<&ExposureWindow>,
    observation: &ObservationWindow,
) -> Option<ContactEvent> {
    let (mut lo, mut hi) = (observation.from, observation.to);
    if let Some(w) = exposure {
        lo = lo.max(w.admit);
        hi = hi.min(w.recovery);
    }
    if lo > hi {
        return None;
    }
    let start = event.start.max(lo);
    let end = event.end().min(hi);
    let keep = if event.duration_min == 0 {
        event.start >= lo && event.start <= hi
    } else {
        end > start
    };
    keep.then(|| ContactEvent {
        start,
        duration_min: end.0 - start.0,
        ..event.clone()
    })
}

/// Individual PIR for one HCP: clips every event to its exposure window,
/// resolves per-contact probabilities and accumulates first-success risk over
/// the surviving ordered events.
pub fn individual_risk(
    seq: &ContactSequence,
    model: Option<&LogisticModel>,
    windows: &HashMap<String, ExposureWindow>,
) -> Result<f64> {
    let mut probs = Vec::with_capacity(seq.events.len());
    for event in &seq.events {
        if event.transmission_prob.is_none() && event.covariates.is_none() {
            return Err(Error::Config(format!(
                "contact `{}` of HCP `{}` has neither a transmission probability nor covariates",
                event.contact_id, seq.hcp_id
            )));
        }
        let Some(clipped) = clip_to_exposure_window(event, windows.get(&event.contact_id), &seq.window) else {
            continue;
        };
        probs.push(clipped.resolve_probability(model)?);
    }
    first_success_risk(&probs)
}

/// Evaluates [`individual_risk`] for many HCP in parallel. Output order
/// matches input order.
pub fn batch_individual_risk(
    seqs: &[ContactSequence],
    model: Option<&LogisticModel>,
    windows: &HashMap<String, ExposureWindow>,
) -> Vec<Result<f64>> {
    seqs.par_iter().map(|s| individual_risk(s, model, windows)).collect()
}

/// A stretch of constant per-minute hazard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardSegment {
    pub rate: f64,
    pub length: f64,
}

impl HazardSegment {
    pub fn new(rate: f64, length: f64) -> Result<Self> {
        let seg = HazardSegment { rate, length };
        seg.validate()?;
        Ok(seg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::Domain(format!("hazard rate {} must be finite and ≥ 0", self.rate)));
        }
        if !(self.length.is_finite() && self.length >= 0.0) {
            return Err(Error::Domain(format!("segment length {} must be finite and ≥ 0", self.length)));
        }
        Ok(())
    }
}

/// The hazard an HCP is exposed to during one close contact: consecutive
/// piecewise-constant segments starting at `start`. Hazard is zero outside the
/// contact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardContact {
    pub start: f64,
    pub segments: Vec<HazardSegment>,
}

impl HazardContact {
    pub fn new(start: f64, segments: Vec<HazardSegment>) -> Result<Self> {
        let c = HazardContact { start, segments };
        c.validate()?;
        Ok(c)
    }

    pub fn constant(start: f64, rate: f64, length: f64) -> Result<Self> {
        Self::new(start, vec![HazardSegment::new(rate, length)?])
    }

    /// A constant-hazard contact whose total transmission probability is `p`.
    pub fn matching_probability(start: f64, p: f64, length: f64) -> Result<Self> {
        check_probability(p, "probability")?;
        if p == 1.0 {
            return Err(Error::Domain("a finite hazard cannot reach probability 1".into()));
        }
        if length <= 0.0 && p > 0.0 {
            return Err(Error::Domain("a zero-length contact cannot carry positive probability".into()));
        }
        let rate = if p == 0.0 { 0.0 } else { -(-p).ln_1p() / length };
        Self::constant(start, rate, length)
    }

    fn validate(&self) -> Result<()> {
        if !self.start.is_finite() {
            return Err(Error::Domain("hazard contact start must be finite".into()));
        }
        self.segments.iter().try_for_each(HazardSegment::validate)
    }

    /// Contact length τ.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn total_hazard(&self) -> f64 {
        self.segments.iter().map(|s| s.rate * s.length).sum()
    }

    /// `∫_{-∞}^{t} h(u) du` for this contact.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        let mut seg_start = self.start;
        for s in &self.segments {
            if t <= seg_start {
                break;
            }
            let covered = (t - seg_start).min(s.length);
            if covered > 0.0 && s.rate > 0.0 {
                acc += s.rate * covered;
            }
            seg_start += s.length;
        }
        acc
    }
}

fn minutes(t: Timestamp) -> f64 {
    if t <= Timestamp::MIN {
        f64::NEG_INFINITY
    } else if t >= Timestamp::MAX {
        f64::INFINITY
    } else {
        t.0 as f64
    }
}

/// `P(t1 ≤ T ≤ t2)` for the infection time `T` driven by the summed hazards of
/// all contacts, computed as `S(t1) − S(t2)`.
pub fn hazard_risk(contacts: &[HazardContact], window: &ObservationWindow) -> Result<f64> {
    hazard_risk_between(contacts, minutes(window.from), minutes(window.to))
}

/// [`hazard_risk`] with the window given directly in minutes.
pub fn hazard_risk_between(contacts: &[HazardContact], t1: f64, t2: f64) -> Result<f64> {
    if t1.is_nan() || t2.is_nan() || t1 > t2 {
        return Err(Error::Domain(format!("invalid window [{t1}, {t2}]")));
    }
    for c in contacts {
        c.validate()?;
    }
    let h1: f64 = contacts.iter().map(|c| c.cumulative_hazard(t1)).sum();
    let h2: f64 = contacts.iter().map(|c| c.cumulative_hazard(t2)).sum();
    let survival_t1 = (-h1).exp();
    let within = -(-(h2 - h1).max(0.0)).exp_m1();
    Ok((survival_t1 * within).clamp(0.0, 1.0))
}

/// Sum over contacts of each contact's own transmission probability
/// `1 − exp(−∫ h_m)`. Not a probability in general; an upper bound on the
/// full-window risk, useful only as a diagnostic.
pub fn hazard_upper_bound(contacts: &[HazardContact]) -> f64 {
    contacts.iter().map(|c| -(-c.total_hazard()).exp_m1()).sum()
}

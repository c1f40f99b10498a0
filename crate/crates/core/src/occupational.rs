//! Occupational risk score (ORS) and its mapping to a per-contact
//! transmission probability.
//!
//! `ORS = mean(CO, PP, EI) × hours / max(hours)` on raw 0–100 O*Net scores, and
//! `p̂ = ORS / (φ · max ORS)`, so the highest-scoring occupation gets `1/φ`.

use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::individual::geometric_risk;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub name: String,
    /// Contact with others, 0–100.
    pub co: f64,
    /// Physical proximity, 0–100.
    pub pp: f64,
    /// Exposure to disease or infection, 0–100.
    pub ei: f64,
    pub hours_per_week: f64,
}

impl OccupationProfile {
    pub fn validate(&self) -> Result<()> {
        for (label, v) in [("co", self.co), ("pp", self.pp), ("ei", self.ei)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::Domain(format!("{}: {label} = {v} is outside [0, 100]", self.name)));
            }
        }
        if !(self.hours_per_week.is_finite() && self.hours_per_week > 0.0) {
            return Err(Error::Domain(format!(
                "{}: hours_per_week = {} must be positive",
                self.name, self.hours_per_week
            )));
        }
        Ok(())
    }

    fn mean_score(&self) -> f64 {
        (self.co + self.pp + self.ei) / 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrsConfig {
    pub phi: f64,
}

impl Default for OrsConfig {
    fn default() -> Self {
        OrsConfig { phi: 20.0 }
    }
}

pub fn ors_scores(profiles: &[OccupationProfile]) -> Result<IndexMap<String, f64>> {
    if profiles.is_empty() {
        return Err(Error::Input("at least one occupation profile is required".into()));
    }
    for p in profiles {
        p.validate()?;
    }
    let max_hours = profiles.iter().map(|p| p.hours_per_week).fold(f64::MIN, f64::max);
    let mut out = IndexMap::with_capacity(profiles.len());
    for p in profiles {
        if out.insert(p.name.clone(), p.mean_score() * p.hours_per_week / max_hours).is_some() {
            return Err(Error::Input(format!("duplicate occupation `{}`", p.name)));
        }
    }
    Ok(out)
}

pub fn transmission_prob_from_ors(scores: &IndexMap<String, f64>, config: &OrsConfig) -> Result<IndexMap<String, f64>> {
    if scores.is_empty() {
        return Err(Error::Input("no occupational risk scores given".into()));
    }
    if !(config.phi.is_finite() && config.phi >= 1.0) {
        return Err(Error::Range(format!(
            "phi = {} must be ≥ 1 so that every probability stays ≤ 1",
            config.phi
        )));
    }
    if let Some((name, s)) = scores.iter().find(|(_, &s)| !(s.is_finite() && s > 0.0)) {
        return Err(Error::Domain(format!("ORS of `{name}` is {s}; scores must be positive")));
    }
    let max = scores.values().copied().fold(f64::MIN, f64::max);
    Ok(scores
        .iter()
        .map(|(name, &s)| (name.clone(), s / (config.phi * max)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyRow {
    pub name: String,
    pub ors: f64,
    pub p_hat: f64,
    pub pir: f64,
}

/// ORS, `p̂` and the `n_contacts`-contact first-success risk for each occupation.
pub fn occupation_case_study(scores: &IndexMap<String, f64>, n_contacts: u32, config: &OrsConfig) -> Result<Vec<CaseStudyRow>> {
    let probs = transmission_prob_from_ors(scores, config)?;
    scores
        .iter()
        .map(|(name, &ors)| {
            let p_hat = probs[name];
            Ok(CaseStudyRow {
                name: name.clone(),
                ors,
                p_hat,
                pir: geometric_risk(p_hat, n_contacts)?,
            })
        })
        .collect()
}

/// Occupation input as read from CSV: either full profiles
/// (`name,co,pp,ei,hours_per_week`) or precomputed scores (`name,ors`).
#[derive(Debug, Clone, PartialEq)]
pub enum OccupationInput {
    Profiles(Vec<OccupationProfile>),
    Scores(IndexMap<String, f64>),
}

impl OccupationInput {
    pub fn scores(&self) -> Result<IndexMap<String, f64>> {
        match self {
            OccupationInput::Profiles(p) => ors_scores(p),
            OccupationInput::Scores(s) => Ok(s.clone()),
        }
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(Some(1), e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let profile_header = ["name", "co", "pp", "ei", "hours_per_week"];
        let score_header = ["name", "ors"];
        let is_profiles = headers == profile_header;
        if !is_profiles && headers != score_header {
            return Err(Error::parse(
                Some(1),
                format!(
                    "expected header `{}` or `{}`, found `{}`",
                    profile_header.join(","),
                    score_header.join(","),
                    headers.join(",")
                ),
            ));
        }
        let mut profiles = Vec::new();
        let mut scores = IndexMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(e.position().map(|p| p.line()), e.to_string()))?;
            let line = rec.position().map(|p| p.line());
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("`{}` in column `{}` is not a number", &rec[i], headers[i])))
            };
            if is_profiles {
                profiles.push(OccupationProfile {
                    name: rec[0].to_string(),
                    co: num(1)?,
                    pp: num(2)?,
                    ei: num(3)?,
                    hours_per_week: num(4)?,
                });
            } else if scores.insert(rec[0].to_string(), num(1)?).is_some() {
                return Err(Error::parse(line, format!("duplicate occupation `{}`", &rec[0])));
            }
        }
        Ok(if is_profiles {
            OccupationInput::Profiles(profiles)
        } else {
            OccupationInput::Scores(scores)
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Reverse-engineered profiles bundled with the crate.
    pub fn bundled_profiles() -> Self {
        Self::from_csv_reader(crate::bundled::OCCUPATION_PROFILES.as_bytes()).expect("bundled profiles parse")
    }
}

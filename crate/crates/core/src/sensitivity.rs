//! Enumeration-based sensitivity of individual risk to per-contact
//! transmission levels and contact counts.
//!
//! Every sequence of `n` contacts drawn from a level set is enumerated with
//! uniform weight. Summaries use a fixed-chunk pairwise reduction, so results
//! are bitwise identical for any number of worker threads.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::individual::first_success_risk;
use crate::numfmt::format_sig;

/// Largest number of sequences any enumeration may visit.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

/// Default gap between the low and high level of the response surface.
pub const DEFAULT_OFFSET: f64 = 0.3;

const CHUNK: u64 = 4096;

/// Transmission levels labelled `0, 1, 2, …` in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LevelSet {
    probs: Vec<f64>,
}

impl LevelSet {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Input("level set is empty".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            check_probability(p, &format!("level {i}"))?;
        }
        Ok(LevelSet { probs })
    }

    /// Low, medium and high levels used for the sequence bar chart.
    pub fn low_medium_high() -> Self {
        LevelSet {
            probs: vec![0.01, 0.05, 0.1],
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Code of the `index`-th sequence in lexicographic order: one label per
    /// contact, digits when there are at most ten levels, dot-separated otherwise.
    pub fn code(&self, index: u64, n: u32) -> String {
        let labels = decode(index, self.len() as u64, n);
        if self.len() <= 10 {
            labels.iter().map(|&d| char::from(b'0' + d as u8)).collect()
        } else {
            labels.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(".")
        }
    }

    fn sequence_risk(&self, index: u64, n: u32, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(decode(index, self.len() as u64, n).into_iter().map(|d| self.probs[d]));
        first_success_risk(buf).expect("levels are validated probabilities")
    }
}

impl TryFrom<Vec<f64>> for LevelSet {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LevelSet::new(v)
    }
}

impl From<LevelSet> for Vec<f64> {
    fn from(l: LevelSet) -> Self {
        l.probs
    }
}

fn decode(mut index: u64, base: u64, n: u32) -> Vec<usize> {
    let mut digits = vec![0usize; n as usize];
    for slot in digits.iter_mut().rev() {
        *slot = (index % base) as usize;
        index /= base;
    }
    digits
}

fn sequence_count(levels: usize, n: u32) -> Result<u64> {
    if n == 0 {
        return Err(Error::Input("number of contacts must be at least 1".into()));
    }
    let count = (levels as f64).powi(n as i32);
    if count > ENUMERATION_BUDGET as f64 {
        return Err(Error::Budget {
            count,
            limit: ENUMERATION_BUDGET,
        });
    }
    Ok((levels as u64).pow(n))
}

/// Which denominator a dispersion statistic uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// `N − 1`.
    #[default]
    Sample,
    /// `N`.
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnumerationSummary {
    pub sequences: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub sum_sq: f64,
}

impl EnumerationSummary {
    pub fn variance(&self, d: Dispersion) -> f64 {
        let denom = match d {
            Dispersion::Sample if self.sequences > 1 => (self.sequences - 1) as f64,
            Dispersion::Sample => return 0.0,
            Dispersion::Population => self.sequences as f64,
        };
        self.sum_sq / denom
    }

    pub fn sd(&self, d: Dispersion) -> f64 {
        self.variance(d).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceRisk {
    pub code: String,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumeration {
    pub sequences: Vec<SequenceRisk>,
    pub summary: EnumerationSummary,
}

/// All `|levels|^n` sequences in lexicographic code order with their risk.
pub fn enumerate_sequence_risks(levels: &LevelSet, n: u32) -> Result<Enumeration> {
    let count = sequence_count(levels.len(), n)?;
    let sequences = (0..count)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| SequenceRisk {
            code: levels.code(i, n),
            risk: levels.sequence_risk(i, n, buf),
        })
        .collect();
    Ok(Enumeration {
        sequences,
        summary: summarize(levels, n, count),
    })
}

/// Mean and dispersion of the enumeration without materializing it.
pub fn enumeration_summary(levels: &LevelSet, n: u32) -> Result<EnumerationSummary> {
    let count = sequence_count(levels.len(), n)?;
    Ok(summarize(levels, n, count))
}

fn summarize(levels: &LevelSet, n: u32, count: u64) -> EnumerationSummary {
    let total = chunked_sum(count, |i, buf| levels.sequence_risk(i, n, buf));
    let mean = total / count as f64;
    let sum_sq = chunked_sum(count, |i, buf| {
        let d = levels.sequence_risk(i, n, buf) - mean;
        d * d
    });
    EnumerationSummary {
        sequences: count,
        mean,
        sum_sq,
    }
}

fn chunked_sum<F>(count: u64, f: F) -> f64
where
    F: Fn(u64, &mut Vec<f64>) -> f64 + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = Vec::new();
            (c * CHUNK..((c + 1) * CHUNK).min(count)).map(|i| f(i, &mut buf)).sum()
        })
        .collect();
    pairwise_sum(&partial)
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// One grid point of the two-level response surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub p_low: f64,
    pub n_contacts: u32,
    pub mean: f64,
    pub variance: f64,
}

/// `p_low = 0.01, 0.02, …, 0.50`.
pub fn default_p_low_grid() -> Vec<f64> {
    (1..=50).map(|i| i as f64 / 100.0).collect()
}

pub fn default_n_grid() -> Vec<u32> {
    (1..=12).collect()
}

/// Mean and population variance of risk over all sequences mixing
/// `p_low` and `p_low + offset`, for every grid combination.
pub fn response_surface(p_low_grid: &[f64], n_grid: &[u32], offset: f64) -> Result<Vec<SurfacePoint>> {
    if !(offset.is_finite() && offset >= 0.0) {
        return Err(Error::Range(format!("offset {offset} must be finite and ≥ 0")));
    }
    for &p in p_low_grid {
        check_probability(p, "p_low")?;
        if p + offset > 1.0 {
            return Err(Error::Range(format!("p_low {p} + offset {offset} exceeds 1")));
        }
    }
    for &n in n_grid {
        sequence_count(2, n)?;
    }
    let mut points = Vec::with_capacity(p_low_grid.len() * n_grid.len());
    for &p_low in p_low_grid {
        let levels = LevelSet::new(vec![p_low, p_low + offset])?;
        for &n in n_grid {
            let s = summarize(&levels, n, 2u64.pow(n));
            points.push(SurfacePoint {
                p_low,
                n_contacts: n,
                mean: s.mean,
                variance: s.variance(Dispersion::Population),
            });
        }
    }
    Ok(points)
}

const SURFACE_HEADER: [&str; 4] = ["p_low", "n", "mean", "variance"];

/// Writes `p_low,n,mean,variance` rows sorted by `(p_low, n)`.
pub fn surface_export<W: Write>(points: &[SurfacePoint], out: W) -> Result<()> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.p_low.total_cmp(&b.p_low).then(a.n_contacts.cmp(&b.n_contacts)));
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(SURFACE_HEADER).map_err(csv_err)?;
    for p in &sorted {
        w.write_record([
            format_sig(p.p_low),
            p.n_contacts.to_string(),
            format_sig(p.mean),
            format_sig(p.variance),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn surface_export_string(points: &[SurfacePoint]) -> String {
    let mut buf = Vec::new();
    surface_export(points, &mut buf).expect("writing to memory does not fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Reads a grid written by [`surface_export`].
pub fn parse_surface_csv<R: Read>(input: R) -> Result<Vec<SurfacePoint>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(Some(1), e.to_string()))?
        .clone();
    if header.iter().ne(SURFACE_HEADER) {
        return Err(Error::parse(Some(1), format!("expected header `{}`", SURFACE_HEADER.join(","))));
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(e.position().map(|p| p.line()), e.to_string()))?;
        let line = record.position().map(|p| p.line());
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("column `{}`: `{}` is not a number", SURFACE_HEADER[i], &record[i])))
        };
        let n_contacts = record[1]
            .parse::<u32>()
            .map_err(|_| Error::parse(line, format!("column `n`: `{}` is not a count", &record[1])))?;
        points.push(SurfacePoint {
            p_low: num(0)?,
            n_contacts,
            mean: num(2)?,
            variance: num(3)?,
        });
    }
    Ok(points)
}

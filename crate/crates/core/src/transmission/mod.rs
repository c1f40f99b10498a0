//! Logistic model of the per-contact transmission probability.
//!
//! `logit p = β₀ + Σ βᵢ zᵢ` over a fixed, named covariate schema. Models are
//! fitted by Newton–Raphson (IRLS) and exchanged as small JSON documents.

mod fit;
pub mod synthetic;

use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{aic, fit_logistic, k_fold_cv, log_likelihood, score, CvReport, FitConfig, FitDiagnostics};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Ordered, unique covariate names shared by a model and its data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CovariateSchema {
    names: Vec<String>,
}

impl CovariateSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if n.trim().is_empty() {
                return Err(Error::Schema(format!("covariate #{i} has an empty name")));
            }
            if names[..i].contains(n) {
                return Err(Error::Schema(format!("duplicate covariate `{n}`")));
            }
        }
        Ok(CovariateSchema { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl TryFrom<Vec<String>> for CovariateSchema {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        CovariateSchema::new(names)
    }
}

impl From<CovariateSchema> for Vec<String> {
    fn from(s: CovariateSchema) -> Self {
        s.names
    }
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    schema: CovariateSchema,
    intercept: f64,
    coefficients: Vec<f64>,
}

impl LogisticModel {
    pub fn new(schema: CovariateSchema, intercept: f64, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} coefficients for {} covariates",
                coefficients.len(),
                schema.len()
            )));
        }
        if !intercept.is_finite() || coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("model coefficients must be finite".into()));
        }
        Ok(LogisticModel {
            schema,
            intercept,
            coefficients,
        })
    }

    /// The model with every coefficient (and the intercept) set to zero.
    pub fn zeros(schema: CovariateSchema) -> Self {
        let k = schema.len();
        LogisticModel {
            schema,
            intercept: 0.0,
            coefficients: vec![0.0; k],
        }
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.schema.index_of(name).map(|i| self.coefficients[i])
    }

    /// Number of free parameters, intercept included.
    pub fn parameter_count(&self) -> usize {
        self.coefficients.len() + 1
    }

    pub fn linear_predictor(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.coefficients.len() {
            return Err(Error::Schema(format!(
                "covariate vector has {} entries, model expects {}",
                z.len(),
                self.coefficients.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariates must be finite".into()));
        }
        Ok(self.eta_unchecked(z))
    }

    pub(crate) fn eta_unchecked(&self, z: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(z).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict_probability(&self, z: &[f64]) -> Result<f64> {
        self.linear_predictor(z).map(logistic)
    }

    /// Predicts from named covariates. Every schema entry must be present and
    /// no unknown names are accepted.
    pub fn predict_named(&self, z: &IndexMap<String, f64>) -> Result<f64> {
        let mut v = vec![0.0; self.schema.len()];
        for (name, &value) in z {
            let i = self
                .schema
                .index_of(name)
                .ok_or_else(|| Error::Schema(format!("covariate `{name}` is not in the model schema")))?;
            v[i] = value;
        }
        if let Some(missing) = self.schema.names().iter().find(|n| !z.contains_key(*n)) {
            return Err(Error::Schema(format!("covariate `{missing}` is missing")));
        }
        self.predict_probability(&v)
    }

    pub fn to_file(&self, standard_errors: Option<Vec<f64>>) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            description: None,
            schema: self.schema.clone(),
            intercept: self.intercept,
            coefficients: self.coefficients.clone(),
            standard_errors,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        ModelFile::from_json_str(s)?.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// The coefficient table bundled with the crate (see `data/coefficients.json`).
    pub fn bundled() -> Self {
        Self::from_json_str(crate::bundled::COEFFICIENT_MODEL).expect("bundled model is valid")
    }
}

/// On-disk representation of a [`LogisticModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub schema: CovariateSchema,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_errors: Option<Vec<f64>>,
}

impl ModelFile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::parse(Some(e.line() as u64), e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format_version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        if let Some(se) = &file.standard_errors {
            if se.len() != file.coefficients.len() + 1 {
                return Err(Error::Schema("standard_errors must list the intercept then each coefficient".into()));
            }
        }
        Ok(file)
    }

    pub fn into_model(self) -> Result<LogisticModel> {
        LogisticModel::new(self.schema, self.intercept, self.coefficients)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }
}

/// Rows of covariates with a binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    schema: CovariateSchema,
    rows: Vec<Vec<f64>>,
    outcomes: Vec<bool>,
}

impl LabeledDataset {
    pub fn new(schema: CovariateSchema, rows: Vec<Vec<f64>>, outcomes: Vec<bool>) -> Result<Self> {
        if rows.len() != outcomes.len() {
            return Err(Error::Schema(format!("{} rows but {} outcomes", rows.len(), outcomes.len())));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} covariates, schema has {}",
                    r.len(),
                    schema.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("row {i} has a non-finite covariate")));
            }
        }
        Ok(LabeledDataset { schema, rows, outcomes })
    }

    /// Reads CSV with a header of covariate names plus an `outcome` column (0/1).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(Some(1), e.to_string()))?
            .clone();
        let outcome_col = headers
            .iter()
            .position(|h| h == "outcome")
            .ok_or_else(|| Error::parse(Some(1), "header has no `outcome` column"))?;
        let names: Vec<&str> = headers.iter().enumerate().filter(|(i, _)| *i != outcome_col).map(|(_, h)| h).collect();
        let schema = CovariateSchema::new(names.iter().copied()).map_err(|e| Error::parse(Some(1), e.to_string()))?;
        let mut rows = Vec::new();
        let mut outcomes = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(e.position().map(|p| p.line()), e.to_string()))?;
            let line = rec.position().map(|p| p.line());
            let mut row = Vec::with_capacity(schema.len());
            for (i, field) in rec.iter().enumerate() {
                if i == outcome_col {
                    outcomes.push(match field {
                        "0" => false,
                        "1" => true,
                        other => return Err(Error::parse(line, format!("outcome `{other}` is not 0 or 1"))),
                    });
                } else {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| Error::parse(line, format!("`{field}` in column `{}` is not a number", &headers[i])))?;
                    if !v.is_finite() {
                        return Err(Error::parse(line, format!("non-finite value in column `{}`", &headers[i])));
                    }
                    row.push(v);
                }
            }
            rows.push(row);
        }
        LabeledDataset::new(schema, rows, outcomes)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.names().iter().map(String::as_str).collect();
        header.push("outcome");
        w.write_record(&header).map_err(csv_io)?;
        for (row, &y) in self.rows.iter().zip(&self.outcomes) {
            let mut rec: Vec<String> = row.iter().map(|&v| crate::numfmt::format_sig(v)).collect();
            rec.push(if y { "1".into() } else { "0".into() });
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.outcomes.iter().filter(|&&y| y).count()
    }

    pub(crate) fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            outcomes: idx.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }

    /// Appends a covariate column.
    pub fn with_column(&self, name: &str, values: &[f64]) -> Result<LabeledDataset> {
        if values.len() != self.len() {
            return Err(Error::Schema("new column length differs from row count".into()));
        }
        let mut names = self.schema.names().to_vec();
        names.push(name.to_string());
        let rows = self
            .rows
            .iter()
            .zip(values)
            .map(|(r, &v)| {
                let mut r = r.clone();
                r.push(v);
                r
            })
            .collect();
        LabeledDataset::new(CovariateSchema::new(names)?, rows, self.outcomes.clone())
    }

    pub(crate) fn check_schema(&self, model: &LogisticModel) -> Result<()> {
        if self.schema != *model.schema() {
            return Err(Error::Schema(format!(
                "dataset columns [{}] do not match model schema [{}]",
                self.schema.names().join(", "),
                model.schema().names().join(", ")
            )));
        }
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

//! CSV ingestion of contact logs and exposure windows.
//!
//! Contacts: `hcp_id,contact_id,compartment,start_time,duration_min,prob[,covariate...]`.
//! Each row needs a `prob` or a full set of covariate values.
//!
//! Windows: `person_id,admit_time,recovery_time`, keyed by the contact person.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{check_probability, Error, Result};
use crate::individual::{Compartment, ContactEvent, ExposureWindow};
use crate::time::Timestamp;

pub const CONTACT_COLUMNS: [&str; 6] = ["hcp_id", "contact_id", "compartment", "start_time", "duration_min", "prob"];
pub const WINDOW_COLUMNS: [&str; 3] = ["person_id", "admit_time", "recovery_time"];

/// Contacts grouped by HCP, in order of first appearance.
pub type ContactLog = IndexMap<String, Vec<ContactEvent>>;

fn at_line(e: Error, line: Option<u64>) -> Error {
    match e {
        Error::Parse { line: None, message } => Error::Parse { line, message },
        Error::Parse { .. } | Error::Config(_) => e,
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::parse(e.position().map(|p| p.line()), e.to_string())
}

pub fn read_contacts<R: Read>(input: R) -> Result<ContactLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let mut log = ContactLog::new();
    if header.is_empty() || header == [""] {
        return Ok(log);
    }
    if header.len() < CONTACT_COLUMNS.len() || header[..CONTACT_COLUMNS.len()] != CONTACT_COLUMNS {
        return Err(Error::parse(
            Some(1),
            format!("contacts header must start with `{}`", CONTACT_COLUMNS.join(",")),
        ));
    }
    let covariate_names = &header[CONTACT_COLUMNS.len()..];
    if let Some(dup) = covariate_names
        .iter()
        .enumerate()
        .find(|(i, n)| n.is_empty() || covariate_names[..*i].contains(n))
    {
        return Err(Error::parse(Some(1), format!("covariate column `{}` is empty or repeated", dup.1)));
    }

    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line());
        let event = parse_contact(&record, covariate_names).map_err(|e| at_line(e, line))?;
        log.entry(record[0].to_string()).or_default().push(event);
    }
    Ok(log)
}

fn parse_contact(record: &csv::StringRecord, covariate_names: &[String]) -> Result<ContactEvent> {
    if record[0].is_empty() || record[1].is_empty() {
        return Err(Error::parse(None, "hcp_id and contact_id must be non-empty"));
    }
    let compartment: Compartment = record[2].parse()?;
    let start = Timestamp::parse_iso(&record[3])?;
    let duration_min: i64 = record[4]
        .parse()
        .map_err(|_| Error::parse(None, format!("duration_min `{}` is not a whole number of minutes", &record[4])))?;
    let transmission_prob = match &record[5] {
        "" => None,
        s => {
            let p: f64 = s.parse().map_err(|_| Error::parse(None, format!("prob `{s}` is not a number")))?;
            check_probability(p, "prob")?;
            Some(p)
        }
    };
    let cells: Vec<&str> = (CONTACT_COLUMNS.len()..record.len()).map(|i| &record[i]).collect();
    let covariates = if cells.iter().all(|c| c.is_empty()) {
        None
    } else {
        let mut map = IndexMap::with_capacity(cells.len());
        for (name, cell) in covariate_names.iter().zip(&cells) {
            if cell.is_empty() {
                return Err(Error::parse(None, format!("covariate `{name}` is empty while others are set")));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::parse(None, format!("covariate `{name}` value `{cell}` is not a number")))?;
            map.insert(name.clone(), v);
        }
        Some(map)
    };
    let event = ContactEvent {
        contact_id: record[1].to_string(),
        compartment,
        start,
        duration_min,
        transmission_prob,
        covariates,
    };
    event.validate()?;
    Ok(event)
}

pub fn load_contacts(path: impl AsRef<Path>) -> Result<ContactLog> {
    read_contacts(std::fs::File::open(path)?)
}

pub fn read_windows<R: Read>(input: R) -> Result<HashMap<String, ExposureWindow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let mut out = HashMap::new();
    if header.is_empty() || header.iter().eq([""]) {
        return Ok(out);
    }
    if header.iter().ne(WINDOW_COLUMNS) {
        return Err(Error::parse(Some(1), format!("windows header must be `{}`", WINDOW_COLUMNS.join(","))));
    }
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line());
        let window = Timestamp::parse_iso(&record[1])
            .and_then(|a| Ok((a, Timestamp::parse_iso(&record[2])?)))
            .and_then(|(a, r)| ExposureWindow::new(a, r))
            .map_err(|e| at_line(e, line))?;
        if out.insert(record[0].to_string(), window).is_some() {
            return Err(Error::parse(line, format!("person `{}` has more than one window", &record[0])));
        }
    }
    Ok(out)
}

pub fn load_windows(path: impl AsRef<Path>) -> Result<HashMap<String, ExposureWindow>> {
    read_windows(std::fs::File::open(path)?)
}

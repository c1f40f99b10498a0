use thiserror::Error;

use crate::bayes_net::NetworkIssue;
use crate::transmission::LogisticModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside its mathematical domain (probability outside [0,1], negative rate).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Dimension or name mismatch between a model and its inputs.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("distribution error: probabilities of `{variable}` sum to {sum}, outside 1 ± {tolerance}")]
    Distribution {
        variable: String,
        sum: f64,
        tolerance: f64,
    },

    #[error("division error: {0}")]
    Division(String),

    #[error("arity error: expected {expected} values, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("assignment error: {0}")]
    Assignment(String),

    #[error("enumeration budget exceeded: {count} sequences requested, limit is {limit}")]
    Budget { count: f64, limit: u64 },

    #[error("fold {fold} is degenerate: {reason}")]
    Fold { fold: usize, reason: String },

    #[error("no convergence after {iterations} iterations (max |score| = {max_score:e})")]
    Convergence {
        iterations: usize,
        max_score: f64,
        last: Box<LogisticModel>,
    },

    #[error(
        "complete or quasi-complete separation detected after {iterations} iterations; \
         coefficients diverge. Refit with a ridge penalty > 0"
    )]
    Separation { iterations: usize },

    #[error("information matrix is singular; check for constant or collinear covariates")]
    Singular,

    #[error("evidence has probability zero under the network")]
    ImpossibleEvidence,

    #[error("network failed validation:\n{}", format_issues(.0))]
    InvalidNetwork(Vec<NetworkIssue>),

    #[error("{}", match .line { Some(l) => format!("parse error at line {l}: {message}"), None => format!("parse error: {message}") })]
    Parse {
        line: Option<u64>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[NetworkIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn parse(line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} = {p} is not a probability in [0, 1]")))
    }
}

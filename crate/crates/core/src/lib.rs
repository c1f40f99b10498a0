//! Infection risk estimation for healthcare personnel.
//!
//! Individual risk accumulates per-contact transmission probabilities over an
//! ordered sequence of close contacts. Those probabilities come from a fitted
//! logistic model or from occupational risk scores. Facility-level risk is
//! obtained either from a discrete Bayesian network over control factors or
//! from an equal-weight combination of feature-marginalized expectations.
//!
//! The [`sensitivity`] and [`monte_carlo`] modules check the analytic
//! formulas by exhaustive enumeration and by simulation.

pub mod bayes_net;
pub mod bundled;
pub mod contacts;
pub mod error;
pub mod individual;
pub mod monte_carlo;
pub mod numfmt;
pub mod occupational;
pub mod population;
pub mod sensitivity;
pub mod time;
pub mod transmission;

pub use error::{Error, Result};

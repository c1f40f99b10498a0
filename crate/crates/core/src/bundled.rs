//! Reference inputs compiled into the library. The same files live under
//! `data/` for use from the command line.

pub const COEFFICIENT_MODEL: &str = include_str!("../data/coefficients.json");
pub const OCCUPATION_PROFILES: &str = include_str!("../data/occupations.csv");
pub const OCCUPATION_SCORES: &str = include_str!("../data/occupation_scores.csv");
pub const CASE_STUDY: &str = include_str!("../data/case_study.json");
pub const DEMO_NETWORK: &str = include_str!("../data/demo_network.json");
pub const SEQUENCE_011: &str = include_str!("../data/fig2_seq011.csv");
pub const SYNTHETIC_GENERATOR: &str = include_str!("../data/synthetic_generator.json");
pub const SYNTHETIC_DATASET: &str = include_str!("../data/synthetic_ppe.csv");

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nosocomial_risk::Error;

mod commands;
mod output;

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "nosorisk", version, about = "Infection risk estimation for healthcare personnel")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,

    /// Write results here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Seed for every randomized step.
    #[arg(long, default_value_t = 20200401, global = true)]
    seed: u64,

    /// Extra diagnostics on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-HCP infection risk from a contact log.
    Individual(IndividualArgs),
    /// Occupation table: risk score, per-contact probability and risk after n contacts.
    Tableiii(TableIiiArgs),
    /// Facility-level risk from feature expectations.
    Tableiv(TableIvArgs),
    /// Sequence enumeration and response surfaces.
    #[command(subcommand)]
    Sensitivity(SensitivityCommand),
    /// Fit a logistic transmission model.
    Fit(FitArgs),
    /// Transmission probabilities from a logistic model.
    Predict(PredictArgs),
    /// k-fold cross-validated accuracy.
    Cv(CvArgs),
    /// Draw a labelled dataset from a logistic model.
    Synth(SynthArgs),
    /// Posterior of a node in a Bayesian network.
    Bn(BnArgs),
    /// Monte Carlo checks of the analytic formulas.
    #[command(subcommand)]
    Mc(McCommand),
}

#[derive(Args, Debug)]
pub struct IndividualArgs {
    /// Contacts CSV.
    #[arg(long)]
    contacts: PathBuf,
    /// Logistic model used for rows that give covariates instead of `prob`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Exposure windows CSV.
    #[arg(long)]
    windows: Option<PathBuf>,
    /// Start of the observation window (ISO-8601).
    #[arg(long)]
    from: Option<String>,
    /// End of the observation window (ISO-8601).
    #[arg(long)]
    to: Option<String>,
}

#[derive(Args, Debug)]
pub struct TableIiiArgs {
    /// Occupations CSV (`name,co,pp,ei,hours_per_week` or `name,ors`). Defaults to the bundled profiles.
    #[arg(long)]
    occupations: Option<PathBuf>,
    /// Number of close contacts.
    #[arg(long, default_value_t = 5)]
    n: u32,
    /// Scaling factor: the top-scoring occupation gets probability 1/phi.
    #[arg(long, default_value_t = 20.0)]
    phi: f64,
}

#[derive(Args, Debug)]
pub struct TableIvArgs {
    /// Case-study JSON. Defaults to the bundled two-facility configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum SensitivityCommand {
    /// Risk of every contact sequence over a level set.
    Enumerate(EnumerateArgs),
    /// Mean and variance grid for the two-level process.
    Surface(SurfaceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DispersionArg {
    Sample,
    Population,
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    /// Comma-separated level probabilities.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.1])]
    levels: Vec<f64>,
    /// Sequence length.
    #[arg(long, default_value_t = 2)]
    n: u32,
    /// Denominator of the reported standard deviation.
    #[arg(long, value_enum, default_value_t = DispersionArg::Sample)]
    dispersion: DispersionArg,
    /// Print only the summary row.
    #[arg(long)]
    summary: bool,
}

#[derive(Args, Debug)]
pub struct SurfaceArgs {
    /// Comma-separated p_low values. Defaults to 0.01..=0.50 in steps of 0.01.
    #[arg(long, value_delimiter = ',')]
    plow: Vec<f64>,
    /// Comma-separated contact counts. Defaults to 1..=12.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u32>,
    /// p_high = p_low + offset.
    #[arg(long, default_value_t = nosocomial_risk::sensitivity::DEFAULT_OFFSET)]
    offset: f64,
}

#[derive(Args, Debug)]
pub struct FitOptions {
    /// L2 penalty on non-intercept coefficients.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Convergence threshold on the largest score component.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Labelled dataset CSV: covariate columns plus a 0/1 `outcome` column.
    #[arg(long)]
    data: PathBuf,
    /// Also write the fitted model file here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOptions,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model file. Defaults to the bundled coefficient table.
    #[arg(long)]
    model: Option<PathBuf>,
    /// CSV with one column per model covariate (an `outcome` column is ignored).
    #[arg(long, conflicts_with = "set")]
    data: Option<PathBuf>,
    /// Covariate value as NAME=VALUE; unset covariates are 0.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    /// Number of folds.
    #[arg(long, short, default_value_t = 10)]
    k: usize,
    /// Probability at or above which a case is predicted positive.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    fit: FitOptions,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generating model. Defaults to the bundled coefficient table.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of rows.
    #[arg(long)]
    n: usize,
    /// Covariate distribution as NAME=bernoulli:P, NAME=normal:MEAN:SD or
    /// NAME=uniform:LOW:HIGH. Unlisted covariates are Bernoulli(0.5).
    #[arg(long = "dist", value_name = "SPEC")]
    dist: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    MinDegree,
    ReverseTopological,
}

#[derive(Args, Debug)]
pub struct BnArgs {
    /// Network JSON. Defaults to the bundled illustrative network.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Node to query. Defaults to the declared outcome node.
    #[arg(long)]
    query: Option<String>,
    /// Observed state as NODE=STATE.
    #[arg(long, value_name = "NODE=STATE")]
    evidence: Vec<String>,
    /// Individual risk placed into the risk-bin node as evidence.
    #[arg(long)]
    risk: Option<f64>,
    #[arg(long, value_enum, default_value_t = OrderArg::MinDegree)]
    order: OrderArg,
}

#[derive(Subcommand, Debug)]
pub enum McCommand {
    /// Compare simulated and analytic risk on the bundled scenarios.
    Validate(McValidateArgs),
}

#[derive(Args, Debug)]
pub struct McValidateArgs {
    #[arg(long, default_value_t = nosocomial_risk::monte_carlo::ACCEPTANCE_TRIALS)]
    trials: u64,
}

/// Exit status for a library error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::InvalidNetwork(_) | Error::Io(_) => 2,
        Error::Convergence { .. } | Error::Separation { .. } | Error::Singular | Error::ImpossibleEvidence => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match commands::run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Separation { .. }) {
                eprintln!("hint: pass --ridge with a small positive value, e.g. --ridge 0.1");
            }
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &cli.output {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            outcome.report.write(cli.format, &mut w)?;
            w.flush()
        }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            outcome.report.write(cli.format, &mut lock).and_then(|_| lock.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(outcome.status)
}

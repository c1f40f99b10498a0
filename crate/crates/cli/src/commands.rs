use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use nosocomial_risk::bayes_net::{infer_posterior_with, BayesNet, EliminationStrategy};
use nosocomial_risk::contacts::{load_contacts, load_windows};
use nosocomial_risk::individual::{batch_individual_risk, ContactSequence, ObservationWindow};
use nosocomial_risk::monte_carlo::{bundled_scenarios, validate, SimulationConfig};
use nosocomial_risk::occupational::{occupation_case_study, OccupationInput, OrsConfig};
use nosocomial_risk::population::CaseStudyConfig;
use nosocomial_risk::sensitivity::{
    default_n_grid, default_p_low_grid, enumerate_sequence_risks, enumeration_summary, response_surface, Dispersion,
    LevelSet,
};
use nosocomial_risk::time::Timestamp;
use nosocomial_risk::transmission::synthetic::{generate, CovariateDistribution};
use nosocomial_risk::transmission::{aic, fit_logistic, k_fold_cv, FitConfig, LabeledDataset, LogisticModel};
use nosocomial_risk::{Error, Result};
use serde_json::json;

use crate::output::{num, Cell, Report, Table};
use crate::{
    BnArgs, Cli, Command, CvArgs, DispersionArg, EnumerateArgs, FitArgs, FitOptions, IndividualArgs, McCommand, OrderArg,
    PredictArgs, SensitivityCommand, SurfaceArgs, SynthArgs, TableIiiArgs, TableIvArgs,
};

pub struct Outcome {
    pub report: Report,
    pub status: u8,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome { report, status: 0 }
    }
}

impl From<Table> for Outcome {
    fn from(t: Table) -> Self {
        Report::from(t).into()
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Individual(a) => individual(a),
        Command::Tableiii(a) => table_iii(a),
        Command::Tableiv(a) => table_iv(a),
        Command::Sensitivity(SensitivityCommand::Enumerate(a)) => enumerate(a),
        Command::Sensitivity(SensitivityCommand::Surface(a)) => surface(a),
        Command::Fit(a) => fit(a, cli.verbose),
        Command::Predict(a) => predict(a),
        Command::Cv(a) => cv(a, cli.seed),
        Command::Synth(a) => synth(a, cli.seed),
        Command::Bn(a) => bn(a),
        Command::Mc(McCommand::Validate(a)) => mc_validate(a.trials, cli.seed),
    }
}

fn key_value(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Input(format!("`{s}` is not of the form NAME=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn load_model(path: Option<&Path>) -> Result<LogisticModel> {
    match path {
        Some(p) => LogisticModel::load(p),
        None => Ok(LogisticModel::bundled()),
    }
}

fn fit_config(o: &FitOptions) -> FitConfig {
    FitConfig {
        max_iter: o.max_iter,
        tol: o.tol,
        ridge: o.ridge,
    }
}

fn individual(a: &IndividualArgs) -> Result<Outcome> {
    let log = load_contacts(&a.contacts)?;
    let model = a.model.as_deref().map(LogisticModel::load).transpose()?;
    let windows = match &a.windows {
        Some(p) => load_windows(p)?,
        None => HashMap::new(),
    };
    let parse_bound = |s: &Option<String>, default| s.as_deref().map_or(Ok(default), Timestamp::parse_iso);
    let window = ObservationWindow::new(parse_bound(&a.from, Timestamp::MIN)?, parse_bound(&a.to, Timestamp::MAX)?)?;
    let seqs: Vec<ContactSequence> = log
        .into_iter()
        .map(|(hcp, events)| ContactSequence::new(hcp, events, window))
        .collect::<Result<_>>()?;
    let risks = batch_individual_risk(&seqs, model.as_ref(), &windows);

    let mut t = Table::new(&["hcp_id", "contacts", "E", "IC", "IS", "HW", "pir"]);
    for (seq, risk) in seqs.iter().zip(risks) {
        let c = seq.counts();
        t.push(vec![
            seq.hcp_id().into(),
            c.total().into(),
            c.exposed.into(),
            c.confirmed.into(),
            c.suspected.into(),
            c.colleagues.into(),
            risk?.into(),
        ]);
    }
    Ok(t.into())
}

fn table_iii(a: &TableIiiArgs) -> Result<Outcome> {
    let input = match &a.occupations {
        Some(p) => OccupationInput::load_csv(p)?,
        None => OccupationInput::bundled_profiles(),
    };
    let rows = occupation_case_study(&input.scores()?, a.n, &OrsConfig { phi: a.phi })?;
    let mut t = Table::new(&["name", "ors", "p_hat", "pir"]);
    for r in rows {
        t.push(vec![r.name.into(), r.ors.into(), r.p_hat.into(), r.pir.into()]);
    }
    Ok(t.into())
}

fn table_iv(a: &TableIvArgs) -> Result<Outcome> {
    let cfg = match &a.config {
        Some(p) => CaseStudyConfig::load(p)?,
        None => CaseStudyConfig::bundled(),
    };
    let mut t = Table::new(&["facility", "soh_time", "cs", "ppe_sl", "ors", "pir"]);
    for f in cfg.evaluate()? {
        t.push(vec![f.name.into(), f.soh_time.into(), f.cs.into(), f.ppe_sl.into(), f.ors.into(), f.pir.into()]);
    }
    Ok(t.into())
}

fn enumerate(a: &EnumerateArgs) -> Result<Outcome> {
    let levels = LevelSet::new(a.levels.clone())?;
    let dispersion = match a.dispersion {
        DispersionArg::Sample => Dispersion::Sample,
        DispersionArg::Population => Dispersion::Population,
    };
    let summary_table = |s: &nosocomial_risk::sensitivity::EnumerationSummary| {
        let mut t = Table::new(&["n", "sequences", "mean", "sd", "dispersion"]);
        let label = match dispersion {
            Dispersion::Sample => "sample",
            Dispersion::Population => "population",
        };
        t.push(vec![a.n.into(), s.sequences.into(), s.mean.into(), s.sd(dispersion).into(), label.into()]);
        t
    };
    if a.summary {
        let s = enumeration_summary(&levels, a.n)?;
        return Ok(summary_table(&s).into());
    }
    let e = enumerate_sequence_risks(&levels, a.n)?;
    eprintln!(
        "{} sequences: mean {}, {} sd {}",
        e.summary.sequences,
        nosocomial_risk::numfmt::format_sig(e.summary.mean),
        match dispersion {
            Dispersion::Sample => "sample",
            Dispersion::Population => "population",
        },
        nosocomial_risk::numfmt::format_sig(e.summary.sd(dispersion))
    );
    let mut t = Table::new(&["code", "risk"]);
    for s in &e.sequences {
        t.push(vec![s.code.clone().into(), s.risk.into()]);
    }
    let json = json!({
        "sequences": t.to_json(),
        "summary": summary_table(&e.summary).to_json()[0].clone(),
    });
    Ok(Report { table: t, json: Some(json) }.into())
}

fn surface(a: &SurfaceArgs) -> Result<Outcome> {
    let plow = if a.plow.is_empty() { default_p_low_grid() } else { a.plow.clone() };
    let ns = if a.n.is_empty() { default_n_grid() } else { a.n.clone() };
    let mut points = response_surface(&plow, &ns, a.offset)?;
    points.sort_by(|x, y| x.p_low.total_cmp(&y.p_low).then(x.n_contacts.cmp(&y.n_contacts)));
    let mut t = Table::new(&["p_low", "n", "mean", "variance"]);
    for p in points {
        t.push(vec![p.p_low.into(), p.n_contacts.into(), p.mean.into(), p.variance.into()]);
    }
    Ok(t.into())
}

fn coefficient_table(model: &LogisticModel, se: Option<&[f64]>) -> Table {
    let mut t = Table::new(&["term", "estimate", "std_error", "z"]);
    let terms = std::iter::once("(Intercept)").chain(model.schema().names().iter().map(String::as_str));
    let values = std::iter::once(model.intercept()).chain(model.coefficients().iter().copied());
    for (i, (term, v)) in terms.zip(values).enumerate() {
        let s = se.map(|s| s[i]);
        t.push(vec![term.into(), v.into(), s.into(), s.map(|s| v / s).into()]);
    }
    t
}

fn fit(a: &FitArgs, verbose: bool) -> Result<Outcome> {
    let data = LabeledDataset::load_csv(&a.data)?;
    let (model, diag) = fit_logistic(&data, &fit_config(&a.fit))?;
    let aic_value = aic(&model, &data)?;
    eprintln!(
        "converged in {} iterations: log-likelihood {}, AIC {}",
        diag.iterations,
        nosocomial_risk::numfmt::format_sig(diag.log_likelihood),
        nosocomial_risk::numfmt::format_sig(aic_value)
    );
    if verbose {
        eprintln!("max |score| at solution: {:e}", diag.max_score);
    }
    let file = model.to_file(Some(diag.standard_errors.clone()));
    if let Some(path) = &a.model_out {
        std::fs::write(path, file.to_json_pretty() + "\n")?;
    }
    let t = coefficient_table(&model, Some(&diag.standard_errors));
    let json = json!({
        "model": serde_json::to_value(&file).map_err(|e| Error::Input(e.to_string()))?,
        "log_likelihood": num(diag.log_likelihood),
        "aic": num(aic_value),
        "iterations": diag.iterations,
        "max_score": diag.max_score,
    });
    Ok(Report { table: t, json: Some(json) }.into())
}

fn read_covariate_rows(path: &Path, model: &LogisticModel) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(Some(1), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let names = model.schema().names();
    if let Some(extra) = header.iter().find(|h| h.as_str() != "outcome" && !names.contains(h)) {
        return Err(Error::Schema(format!("column `{extra}` is not a model covariate")));
    }
    let positions: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Schema(format!("covariate `{n}` has no column")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(e.position().map(|p| p.line()), e.to_string()))?;
        let line = rec.position().map(|p| p.line());
        let row = positions
            .iter()
            .map(|&i| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("`{}` in column `{}` is not a number", &rec[i], header[i])))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn predict(a: &PredictArgs) -> Result<Outcome> {
    let model = load_model(a.model.as_deref())?;
    let mut t = Table::new(&["row", "linear_predictor", "probability"]);
    if let Some(path) = &a.data {
        for (i, row) in read_covariate_rows(path, &model)?.iter().enumerate() {
            t.push(vec![(i + 1).into(), model.linear_predictor(row)?.into(), model.predict_probability(row)?.into()]);
        }
        return Ok(t.into());
    }
    let mut z: IndexMap<String, f64> = model.schema().names().iter().map(|n| (n.clone(), 0.0)).collect();
    for s in &a.set {
        let (k, v) = key_value(s)?;
        let value: f64 = v
            .parse()
            .map_err(|_| Error::Input(format!("value for `{k}` is not a number: `{v}`")))?;
        match z.get_mut(&k) {
            Some(slot) => *slot = value,
            None => return Err(Error::Schema(format!("`{k}` is not a model covariate"))),
        }
    }
    let row: Vec<f64> = z.values().copied().collect();
    t.push(vec![1usize.into(), model.linear_predictor(&row)?.into(), model.predict_named(&z)?.into()]);
    Ok(t.into())
}

fn cv(a: &CvArgs, seed: u64) -> Result<Outcome> {
    let data = LabeledDataset::load_csv(&a.data)?;
    let report = k_fold_cv(&data, a.k, a.threshold, seed, &fit_config(&a.fit))?;
    let mut t = Table::new(&["fold", "size", "accuracy"]);
    for (i, (acc, size)) in report.fold_accuracies.iter().zip(&report.fold_sizes).enumerate() {
        t.push(vec![(i + 1).to_string().into(), (*size).into(), (*acc).into()]);
    }
    t.push(vec!["mean".into(), data.len().into(), report.accuracy.into()]);
    Ok(t.into())
}

fn parse_distribution(spec: &str) -> Result<CovariateDistribution> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let nums = |xs: &[&str]| -> Result<Vec<f64>> {
        xs.iter()
            .map(|x| x.parse::<f64>().map_err(|_| Error::Input(format!("`{x}` in `{spec}` is not a number"))))
            .collect()
    };
    match parts.as_slice() {
        ["bernoulli", p] => Ok(CovariateDistribution::Bernoulli(nums(&[p])?[0])),
        ["normal", m, s] => {
            let v = nums(&[m, s])?;
            Ok(CovariateDistribution::Normal { mean: v[0], sd: v[1] })
        }
        ["uniform", l, h] => {
            let v = nums(&[l, h])?;
            Ok(CovariateDistribution::Uniform { low: v[0], high: v[1] })
        }
        _ => Err(Error::Input(format!(
            "distribution `{spec}` is not bernoulli:P, normal:MEAN:SD or uniform:LOW:HIGH"
        ))),
    }
}

fn synth(a: &SynthArgs, seed: u64) -> Result<Outcome> {
    let model = load_model(a.model.as_deref())?;
    let mut dists: IndexMap<String, CovariateDistribution> = model
        .schema()
        .names()
        .iter()
        .map(|n| (n.clone(), CovariateDistribution::Bernoulli(0.5)))
        .collect();
    for s in &a.dist {
        let (k, v) = key_value(s)?;
        let slot = dists
            .get_mut(&k)
            .ok_or_else(|| Error::Schema(format!("`{k}` is not a model covariate")))?;
        *slot = parse_distribution(&v)?;
    }
    let dists: Vec<CovariateDistribution> = dists.into_values().collect();
    let data = generate(&model, &dists, a.n, seed)?;
    let mut columns = model.schema().names().to_vec();
    columns.push("outcome".into());
    let mut t = Table::new(&columns);
    for (row, &y) in data.rows().iter().zip(data.outcomes()) {
        let mut cells: Vec<Cell> = row.iter().map(|&v| v.into()).collect();
        cells.push(Cell::Int(i64::from(y)));
        t.push(cells);
    }
    Ok(t.into())
}

fn bn(a: &BnArgs) -> Result<Outcome> {
    let net = match &a.network {
        Some(p) => BayesNet::load(p)?,
        None => BayesNet::bundled_demo(),
    };
    let query = match &a.query {
        Some(q) => q.clone(),
        None => {
            let (node, _) = net
                .outcome()
                .ok_or_else(|| Error::Config("no --query given and the network declares no outcome".into()))?;
            net.nodes()[node].name.clone()
        }
    };
    let mut evidence = IndexMap::new();
    for e in &a.evidence {
        let (k, v) = key_value(e)?;
        evidence.insert(k, v);
    }
    if let Some(r) = a.risk {
        let (node, state) = net.risk_evidence(r)?;
        evidence.insert(node, state);
    }
    let strategy = match a.order {
        OrderArg::MinDegree => EliminationStrategy::MinDegree,
        OrderArg::ReverseTopological => EliminationStrategy::ReverseTopological,
    };
    let post = infer_posterior_with(&net, &query, &evidence, &strategy)?;
    let mut t = Table::new(&["node", "state", "probability"]);
    for (s, p) in post.states.iter().zip(&post.probabilities) {
        t.push(vec![post.node.clone().into(), s.clone().into(), (*p).into()]);
    }
    Ok(t.into())
}

fn mc_validate(trials: u64, seed: u64) -> Result<Outcome> {
    let config = SimulationConfig::new(trials, seed)?;
    let outcomes = validate(&bundled_scenarios(), &config)?;
    let mut t = Table::new(&["scenario", "analytic", "empirical", "z", "seed", "retry_seed", "pass"]);
    let mut all = true;
    for o in &outcomes {
        let d = o.decisive();
        if let Some(r) = &o.retry {
            eprintln!(
                "{}: seed {} gave z = {:.3}; retried with seed {} (z = {:.3})",
                o.name, o.first.seed, o.first.z, r.seed, r.z
            );
        }
        all &= o.passed;
        t.push(vec![
            o.name.clone().into(),
            o.analytic.into(),
            d.empirical.into(),
            d.z.into(),
            o.first.seed.into(),
            o.retry.as_ref().map(|r| r.seed).into(),
            o.passed.into(),
        ]);
    }
    Ok(Outcome {
        report: t.into(),
        status: if all { 0 } else { 4 },
    })
}

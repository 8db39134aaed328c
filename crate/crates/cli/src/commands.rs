use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use smallball::asymptotics::{
    rate_table, small_ball, sqrt_log_mean_preset, sqrt_log_mean_problem, RateEntry, RateRow, Regime, RegimeReport,
};
use smallball::error::Error;
use smallball::laplace::{log_laplace_field, LogLaplaceParts, ProblemSpec, Process};

use crate::config::{Format, RunConfig};
use crate::output::{csv_bytes, exponent12, float, json_bytes, opt_float, Document};

/// Outcome of one record. Anything but `Ok` flags the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    OutOfRegime,
    Unsupported,
    Failed,
}

impl Status {
    fn of(e: &Error) -> Self {
        match e {
            Error::Domain(_) => Status::OutOfRegime,
            Error::Unsupported(_) => Status::Unsupported,
            _ => Status::Failed,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::OutOfRegime => "out_of_regime",
            Status::Unsupported => "unsupported",
            Status::Failed => "failed",
        }
    }
}

/// Bytes to write and whether any record was flagged.
pub struct CommandOutput {
    pub bytes: Vec<u8>,
    pub flagged: bool,
}

fn process_name(spec: &ProblemSpec) -> &'static str {
    match spec.process {
        Process::Noise { .. } => "noise",
        Process::Solution { .. } => "solution",
        Process::FiniteDimOu { .. } => "finite_dim_ou",
    }
}

fn gamma_of(spec: &ProblemSpec) -> Option<f64> {
    spec.field().map(|f| f.gamma)
}

fn regime_name(regime: Regime) -> String {
    serde_json::to_value(regime)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn require_problems(config: &RunConfig) -> Result<Vec<ProblemSpec>> {
    let problems = config.expanded_problems();
    if problems.is_empty() {
        bail!("no problems given: pass --preset or a config with a `problems` block");
    }
    Ok(problems)
}

/// Closed-form small-ball asymptotic, routing the `√(ln k)` mean problem to
/// its dedicated result.
pub fn engine(spec: &ProblemSpec) -> smallball::error::Result<RegimeReport> {
    if *spec == sqrt_log_mean_problem(spec.horizon) {
        sqrt_log_mean_preset()
    } else {
        small_ball(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsValue {
    pub eps: f64,
    pub log_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymRecord {
    pub process: String,
    pub gamma: Option<f64>,
    pub horizon: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<RegimeReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<EpsValue>,
}

pub fn asym_records(config: &RunConfig) -> Result<Vec<AsymRecord>> {
    let records = require_problems(config)?
        .iter()
        .map(|spec| {
            let mut record = AsymRecord {
                process: process_name(spec).into(),
                gamma: gamma_of(spec),
                horizon: spec.horizon,
                status: Status::Ok,
                message: None,
                report: None,
                values: Vec::new(),
            };
            match engine(spec) {
                Ok(rep) => {
                    record.values = config
                        .eps
                        .iter()
                        .map(|&eps| EpsValue {
                            eps,
                            log_probability: rep.asymptotic.evaluate(eps),
                        })
                        .collect();
                    record.report = Some(rep);
                }
                Err(e) => {
                    record.status = Status::of(&e);
                    record.message = Some(e.to_string());
                }
            }
            record
        })
        .collect();
    Ok(records)
}

pub fn cmd_asym(config: &RunConfig) -> Result<CommandOutput> {
    let records = asym_records(config)?;
    let flagged = records.iter().any(|r| r.status != Status::Ok);
    let bytes = match config.format() {
        Format::Json => json_bytes(&Document::new("asym", records))?,
        Format::Csv => {
            let header = [
                "process",
                "gamma",
                "horizon",
                "status",
                "regime",
                "branch",
                "constant",
                "rate",
                "log_power",
                "alpha",
                "tau",
                "beta",
                "display_constant",
                "published_constant",
                "message",
            ];
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.process.clone(),
                        opt_float(r.gamma),
                        float(r.horizon),
                        r.status.label().into(),
                    ];
                    match &r.report {
                        Some(rep) => row.extend([
                            regime_name(rep.regime),
                            rep.branch.clone(),
                            float(rep.asymptotic.constant),
                            rep.asymptotic.rate.to_string(),
                            rep.asymptotic.log_power.to_string(),
                            float(rep.laplace.alpha),
                            rep.laplace.tau.to_string(),
                            rep.laplace.beta.to_string(),
                            opt_float(rep.display_constant),
                            opt_float(rep.published_constant),
                        ]),
                        None => row.extend(std::iter::repeat_n(String::new(), 10)),
                    }
                    row.push(r.message.clone().unwrap_or_default());
                    row
                })
                .collect();
            csv_bytes(&header, &rows)?
        }
    };
    Ok(CommandOutput { bytes, flagged })
}

pub fn table_rows(config: &RunConfig) -> Result<Vec<RateRow>> {
    let Some(table) = &config.table else {
        bail!("no rate table given: pass --preset or a config with a `table` block");
    };
    Ok(rate_table(&table.gammas, table.d, table.m, table.r)?)
}

pub fn cmd_table(config: &RunConfig) -> Result<CommandOutput> {
    let rows = table_rows(config)?;
    let bytes = match config.format() {
        Format::Json => json_bytes(&Document::new("table", rows))?,
        Format::Csv => {
            let header = [
                "gamma",
                "rate_solution",
                "rate_noise",
                "log_power_solution",
                "log_power_noise",
                "regime_solution",
                "regime_noise",
            ];
            let cell = |e: Option<smallball::tauberian::Exponent>| e.map(exponent12).unwrap_or_default();
            let regime = |e: &RateEntry| e.regime.map(regime_name).unwrap_or_default();
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|row| {
                    vec![
                        exponent12(row.gamma),
                        cell(row.solution.rate),
                        cell(row.noise.rate),
                        cell(row.solution.log_power),
                        cell(row.noise.log_power),
                        regime(&row.solution),
                        regime(&row.noise),
                    ]
                })
                .collect();
            csv_bytes(&header, &body)?
        }
    };
    Ok(CommandOutput { bytes, flagged: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRecord {
    pub problem: usize,
    pub process: String,
    pub gamma: Option<f64>,
    pub p: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<LogLaplaceParts>,
}

pub fn laplace_records(config: &RunConfig) -> Result<Vec<LaplaceRecord>> {
    let grid = config.p_grid();
    let mut records = Vec::new();
    for (i, spec) in require_problems(config)?.iter().enumerate() {
        for &p in &grid {
            let (status, message, parts) = match log_laplace_field(spec, p, config.rel_tol()) {
                Ok(parts) => (Status::Ok, None, Some(parts)),
                Err(e) => (Status::of(&e), Some(e.to_string()), None),
            };
            records.push(LaplaceRecord {
                problem: i,
                process: process_name(spec).into(),
                gamma: gamma_of(spec),
                p,
                status,
                message,
                parts,
            });
        }
    }
    Ok(records)
}

pub fn cmd_laplace(config: &RunConfig) -> Result<CommandOutput> {
    let records = laplace_records(config)?;
    let flagged = records.iter().any(|r| r.status != Status::Ok);
    let bytes = match config.format() {
        Format::Json => json_bytes(&Document::new("laplace", records))?,
        Format::Csv => {
            let header = [
                "problem",
                "process",
                "gamma",
                "p",
                "status",
                "total",
                "s1",
                "s2",
                "s3",
                "s01",
                "s02",
                "truncation_modes",
                "tail_bound",
                "message",
            ];
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.problem.to_string(),
                        r.process.clone(),
                        opt_float(r.gamma),
                        float(r.p),
                        r.status.label().into(),
                    ];
                    match &r.parts {
                        Some(x) => row.extend([
                            float(x.total),
                            float(x.s1),
                            float(x.s2),
                            float(x.s3),
                            float(x.s01),
                            float(x.s02),
                            x.truncation_modes.to_string(),
                            float(x.tail_bound),
                        ]),
                        None => row.extend(std::iter::repeat_n(String::new(), 8)),
                    }
                    row.push(r.message.clone().unwrap_or_default());
                    row
                })
                .collect();
            csv_bytes(&header, &rows)?
        }
    };
    Ok(CommandOutput { bytes, flagged })
}

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use carbon_dispatch::accounting::{AccountingError, OperationReport};
use carbon_dispatch::dispatch::{
    parse_schedule_csv, write_schedule_csv, CaseMode, DispatchError, DispatchSchedule, EssParams,
};
use carbon_dispatch::harness::{
    build_signals, parse_sweep_csv, run_case, run_cases_on, sweep_on, write_sweep_csv, CaseBundle,
    HarnessError, RollingWindow,
};
use carbon_dispatch::ingest::{
    parse_grid_csv, synth_generate, write_grid_csv, GridSeries, IngestError, Resource,
    ResponseCurves,
};
use carbon_dispatch::mei::{
    estimate_mei, mei_table, CubicFit, ImportRule, MeiError, MeiTable, SupplyShareTable,
};

use config::{DataSource, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "carbon-dispatch",
    version,
    about = "Emission-aware storage dispatch"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the synthetic generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Supply-share table JSON; skips the regression step.
    #[arg(long, global = true)]
    shares_file: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Fit response curves and write the MEI table.
    Fit,
    /// Solve one case and write its schedule and report.
    Dispatch,
    /// Run all three cases.
    Cases,
    /// Capacity by carbon-price sweep.
    Sweep,
    /// Write a synthetic grid series.
    Synth,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Data {
        stage: &'static str,
        message: String,
    },
    #[error("{stage}: {message}")]
    Solver {
        stage: &'static str,
        message: String,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Solver { .. } => 4,
        }
    }

    fn data(stage: &'static str, e: impl ToString) -> Self {
        CliError::Data {
            stage,
            message: e.to_string(),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::InvalidParams(m) => CliError::Config(m),
            other => CliError::data("ingest", other),
        }
    }
}

impl From<MeiError> for CliError {
    fn from(e: MeiError) -> Self {
        match e {
            MeiError::InvalidSegmentation(_) | MeiError::NonFiniteFactor(_) => {
                CliError::Config(e.to_string())
            }
            MeiError::Ingest(inner) => inner.into(),
            other => CliError::data("mei", other),
        }
    }
}

impl From<DispatchError> for CliError {
    fn from(e: DispatchError) -> Self {
        match e {
            DispatchError::InvalidParams(_) | DispatchError::InvalidWindow { .. } => {
                CliError::Config(e.to_string())
            }
            DispatchError::LengthMismatch { .. } | DispatchError::EmptyHorizon => {
                CliError::data("dispatch", e)
            }
            other => CliError::Solver {
                stage: "dispatch",
                message: other.to_string(),
            },
        }
    }
}

impl From<AccountingError> for CliError {
    fn from(e: AccountingError) -> Self {
        match e {
            AccountingError::InvalidWindow => CliError::Config(e.to_string()),
            other => CliError::data("accounting", other),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Dispatch(d) => d.into(),
            HarnessError::Accounting(a) => a.into(),
            HarnessError::Mei(m) => m.into(),
            HarnessError::Cell { .. } => CliError::Solver {
                stage: "sweep",
                message: e.to_string(),
            },
            HarnessError::UnsupportedMode(_) | HarnessError::InvalidSweep(_) => {
                CliError::Config(e.to_string())
            }
            HarnessError::Csv(c) => CliError::data("output", c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FitDiagnostics {
    fits: BTreeMap<Resource, CubicFit>,
    shares: SupplyShareTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScheduleSidecar {
    mode: CaseMode,
    objective: f64,
    penalized_objective: f64,
    penalty: f64,
    epsilon: f64,
    carbon_price: f64,
    ess: EssParams,
    rolling: Option<RollingWindow>,
    hours: usize,
}

fn settings(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(path) = &cli.shares_file {
        config.shares_file = Some(path.clone());
    }
    if let Some(seed) = cli.seed {
        if config.input.is_none() {
            config.synth.get_or_insert_with(Default::default).seed = seed;
        }
    }
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

fn load_series(config: &RunConfig) -> Result<(GridSeries, Option<ResponseCurves>), CliError> {
    match config.source().map_err(CliError::Config)? {
        DataSource::Csv(path) => {
            let file = File::open(&path)
                .map_err(|e| CliError::data("ingest", format!("{}: {e}", path.display())))?;
            Ok((parse_grid_csv(BufReader::new(file))?, None))
        }
        DataSource::Synth(params) => {
            let (series, curves) = synth_generate(&params)?;
            Ok((series, Some(curves)))
        }
    }
}

fn load_shares(path: &Path) -> Result<SupplyShareTable, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::data("shares", format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::data("shares", format!("{}: {e}", path.display())))
}

/// MEI table from the shares file when given, otherwise fitted.
fn load_table(
    config: &RunConfig,
    series: &GridSeries,
) -> Result<(MeiTable, Option<FitDiagnostics>), CliError> {
    if let Some(path) = &config.shares_file {
        let shares = load_shares(path)?;
        let no_imports = shares.segments.iter().all(|s| s.mean_net_imports.is_none());
        if no_imports && config.mei.import_rule == ImportRule::Auto {
            eprintln!(
                "warning: shares file has no net-import levels; the auto rule counts no imports"
            );
        }
        let table = mei_table(&shares, &config.mei.factors, &config.mei.import_rule)?;
        return Ok((table, None));
    }
    let estimate = estimate_mei(series, &config.mei)?;
    Ok((
        estimate.table,
        Some(FitDiagnostics {
            fits: estimate.fits,
            shares: estimate.shares,
        }),
    ))
}

fn create_out(config: &RunConfig) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Config(format!("output directory {}: {e}", config.out.display())))?;
    Ok(&config.out)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data("output", format!("{}: {e}", path.display()))
}

/// Writes `value` as JSON and parses it back as `T`.
fn write_json<T: Serialize + DeserializeOwned>(path: &Path, value: &T) -> Result<T, CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))?;
    let back = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&back).map_err(|e| io_err(path, e))
}

fn write_schedule(
    path: &Path,
    series: &GridSeries,
    schedule: &DispatchSchedule,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_schedule_csv(BufWriter::new(file), &series.timestamps(), schedule)
        .map_err(|e| io_err(path, e))?;
    let rows = parse_schedule_csv(BufReader::new(
        File::open(path).map_err(|e| io_err(path, e))?,
    ))
    .map_err(|e| io_err(path, e))?;
    if rows.len() != schedule.len() {
        return Err(io_err(path, "row count differs after re-parse"));
    }
    Ok(())
}

fn cmd_fit(config: &RunConfig) -> Result<(), CliError> {
    let (series, _) = load_series(config)?;
    let (table, diagnostics) = load_table(config, &series)?;
    let out = create_out(config)?;
    let parsed = write_json(&out.join("mei_table.json"), &table)?;
    if parsed.segments.len() != table.segments.len() {
        return Err(io_err(&out.join("mei_table.json"), "segment count differs"));
    }
    if let Some(d) = diagnostics {
        write_json(&out.join("fit_diagnostics.json"), &d)?;
        for (r, fit) in &d.fits {
            println!("{:<7} R^2 {:.4}", r.as_str(), fit.r_squared);
        }
    }
    for seg in &table.segments {
        println!("segment {:>2}: mei {:.3}", seg.segment, seg.mei);
    }
    Ok(())
}

fn cmd_dispatch(config: &RunConfig) -> Result<(), CliError> {
    let (series, _) = load_series(config)?;
    let (table, _) = load_table(config, &series)?;
    let prices = build_signals(
        &series,
        &table,
        &config.mei.non_dispatchable,
        config.carbon_price,
    )?;
    let run = run_case(&prices, &config.ess, config.mode, &config.run)?;
    let out = create_out(config)?;
    write_schedule(&out.join("schedule.csv"), &series, &run.schedule)?;
    write_json(
        &out.join("schedule.json"),
        &ScheduleSidecar {
            mode: config.mode,
            objective: run.schedule.objective,
            penalized_objective: run.schedule.penalized_objective,
            penalty: run.schedule.penalty,
            epsilon: config.run.solver.epsilon,
            carbon_price: config.carbon_price,
            ess: config.ess,
            rolling: config.run.rolling,
            hours: run.schedule.len(),
        },
    )?;
    let report: OperationReport = write_json(&out.join("report.json"), &run.report)?;
    println!(
        "{}: objective {:.4}",
        config.mode.as_str(),
        run.schedule.objective
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

fn cmd_cases(config: &RunConfig) -> Result<(), CliError> {
    let (series, _) = load_series(config)?;
    let (table, _) = load_table(config, &series)?;
    let prices = build_signals(
        &series,
        &table,
        &config.mei.non_dispatchable,
        config.carbon_price,
    )?;
    let results = run_cases_on(prices, &config.ess, &config.run)?;
    let out = create_out(config)?;
    for run in &results.runs {
        let name = format!("schedule_{}.csv", run.mode.as_str());
        write_schedule(&out.join(name), &series, &run.schedule)?;
    }
    let bundle = write_json(&out.join("cases.json"), &CaseBundle::new(&results))?;
    for (mode, r) in &bundle.reports {
        println!(
            "{:<16} elec {:>12.2}  carbon {:>12.2}  ER {:>10.3}  life {:.4}",
            mode.as_str(),
            r.elec_revenue,
            r.carbon_revenue,
            r.emission_reduction,
            r.remaining_lifetime
        );
    }
    if let Err(e) = results.check_dominance(1e-6) {
        eprintln!("warning: case ordering not satisfied: {e}");
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig) -> Result<(), CliError> {
    let (series, _) = load_series(config)?;
    let (table, _) = load_table(config, &series)?;
    let base = build_signals(&series, &table, &config.mei.non_dispatchable, 0.0)?;
    let grid = sweep_on(&base, &config.ess, &config.sweep, &config.run)?;
    let out = create_out(config)?;
    let path = out.join("sweep.csv");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_sweep_csv(&grid, BufWriter::new(file)).map_err(|e| io_err(&path, e))?;
    let cells = parse_sweep_csv(BufReader::new(
        File::open(&path).map_err(|e| io_err(&path, e))?,
    ))
    .map_err(|e| io_err(&path, e))?;
    if cells != grid.cells {
        return Err(io_err(&path, "cells differ after re-parse"));
    }
    println!("{} cells written to {}", cells.len(), path.display());
    Ok(())
}

fn cmd_synth(config: &RunConfig) -> Result<(), CliError> {
    let (series, curves) = load_series(config)?;
    let out = create_out(config)?;
    let path = out.join("synthetic.csv");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_grid_csv(&series, BufWriter::new(file))?;
    let parsed = parse_grid_csv(BufReader::new(
        File::open(&path).map_err(|e| io_err(&path, e))?,
    ))?;
    if parsed.len() != series.len() {
        return Err(io_err(&path, "row count differs after re-parse"));
    }
    if let Some(c) = curves {
        write_json(&out.join("response_curves.json"), &c)?;
    }
    println!("{} hours written to {}", series.len(), path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = settings(cli)?;
    match cli.command {
        Command::Fit => cmd_fit(&config),
        Command::Dispatch => cmd_dispatch(&config),
        Command::Cases => cmd_cases(&config),
        Command::Sweep => cmd_sweep(&config),
        Command::Synth => cmd_synth(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

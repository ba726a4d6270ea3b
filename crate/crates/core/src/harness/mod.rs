//! Three-case comparison, capacity x carbon-price sweep and normalized scores.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::accounting::{evaluate_with, AccountingError, AccountingOptions, OperationReport};
use crate::dispatch::{
    effective_price, rolling_horizon, solve_dispatch_with, CaseMode, DispatchError,
    DispatchSchedule, EssParams, PriceSignals, SolverSettings,
};
use crate::ingest::{FuelSet, GridSeries};
use crate::mei::{mei_series, MeiError, MeiTable};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
    #[error(transparent)]
    Mei(#[from] MeiError),
    #[error("sweep cell (capacity {capacity}, carbon price {carbon_price}) failed: {source}")]
    Cell {
        capacity: f64,
        carbon_price: f64,
        source: DispatchError,
    },
    #[error("sweep mode must be carbon_only or combined, got {0:?}")]
    UnsupportedMode(CaseMode),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindow {
    pub window: usize,
    pub step: usize,
}

/// How each case is solved and scored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub solver: SolverSettings,
    pub rolling: Option<RollingWindow>,
    pub accounting: AccountingOptions,
}

/// Hourly electricity price, a constant carbon price and MEI looked up from
/// each hour's residual demand.
pub fn build_signals(
    series: &GridSeries,
    table: &MeiTable,
    non_dispatchable: &FuelSet,
    carbon_price: f64,
) -> Result<PriceSignals, HarnessError> {
    let mei = mei_series(series, table, non_dispatchable)?;
    Ok(PriceSignals::with_constant_carbon(
        series.prices(),
        carbon_price,
        mei,
    )?)
}

/// Solves one case and scores it.
pub fn run_case(
    prices: &PriceSignals,
    ess: &EssParams,
    mode: CaseMode,
    options: &RunOptions,
) -> Result<CaseRun, HarnessError> {
    let schedule = match options.rolling {
        None => solve_dispatch_with(prices, ess, mode, &options.solver)?,
        Some(r) => rolling_horizon(prices, ess, mode, r.window, r.step, &options.solver)?,
    };
    let report = evaluate_with(&schedule, prices, ess, &options.accounting)?;
    Ok(CaseRun {
        mode,
        schedule,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRun {
    pub mode: CaseMode,
    pub schedule: DispatchSchedule,
    pub report: OperationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyResult {
    pub ess: EssParams,
    pub prices: PriceSignals,
    /// In [`CaseMode::ALL`] order.
    pub runs: Vec<CaseRun>,
}

impl CaseStudyResult {
    pub fn run(&self, mode: CaseMode) -> &CaseRun {
        self.runs
            .iter()
            .find(|r| r.mode == mode)
            .expect("every mode is present")
    }

    pub fn report(&self, mode: CaseMode) -> &OperationReport {
        &self.run(mode).report
    }

    /// Value of `mode`'s schedule under the combined effective price.
    pub fn combined_value(&self, mode: CaseMode) -> f64 {
        let c = effective_price(&self.prices, CaseMode::Combined);
        let s = &self.run(mode).schedule;
        c.iter().zip(&s.p_grid).map(|(c, g)| c * g).sum()
    }

    /// Checks the ordering implied by each case optimizing its own signal:
    /// electricity revenue 1 >= 3 >= 2, emission reduction 2 >= 3 >= 1 and the
    /// combined value of case 3 at least that of the others.
    pub fn check_dominance(&self, tol: f64) -> Result<(), String> {
        use CaseMode::*;
        let r = |m| self.report(m);
        let chain = |name: &str, a: f64, b: f64, c: f64| {
            if a + tol < b || b + tol < c {
                Err(format!("{name}: expected {a} >= {b} >= {c}"))
            } else {
                Ok(())
            }
        };
        chain(
            "elec_revenue",
            r(ElectricityOnly).elec_revenue,
            r(Combined).elec_revenue,
            r(CarbonOnly).elec_revenue,
        )?;
        chain(
            "emission_reduction",
            r(CarbonOnly).emission_reduction,
            r(Combined).emission_reduction,
            r(ElectricityOnly).emission_reduction,
        )?;
        let best = self.combined_value(Combined);
        for m in [ElectricityOnly, CarbonOnly] {
            if self.combined_value(m) > best + tol {
                return Err(format!(
                    "{} beats combined on the combined price",
                    m.as_str()
                ));
            }
        }
        Ok(())
    }
}

/// Runs the three cases on identical inputs.
pub fn run_cases(
    series: &GridSeries,
    table: &MeiTable,
    non_dispatchable: &FuelSet,
    ess: &EssParams,
    carbon_price: f64,
    options: &RunOptions,
) -> Result<CaseStudyResult, HarnessError> {
    let prices = build_signals(series, table, non_dispatchable, carbon_price)?;
    run_cases_on(prices, ess, options)
}

pub fn run_cases_on(
    prices: PriceSignals,
    ess: &EssParams,
    options: &RunOptions,
) -> Result<CaseStudyResult, HarnessError> {
    let runs = CaseMode::ALL
        .par_iter()
        .map(|&mode| run_case(&prices, ess, mode, options))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CaseStudyResult {
        ess: *ess,
        prices,
        runs,
    })
}

/// Scores scaled to [0, 1] across the three cases, larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub revenue: f64,
    pub emission_reduction: f64,
    pub remaining_lifetime: f64,
}

/// Min-max scaling; every value maps to 1 when all are equal.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 1.0 })
        .collect()
}

/// Revenue is `total_revenue`, electricity plus carbon.
pub fn normalize_reports(reports: &[OperationReport]) -> Vec<NormalizedScore> {
    let col = |f: fn(&OperationReport) -> f64| min_max(&reports.iter().map(f).collect::<Vec<_>>());
    let revenue = col(|r| r.total_revenue);
    let er = col(|r| r.emission_reduction);
    let life = col(|r| r.remaining_lifetime);
    (0..reports.len())
        .map(|i| NormalizedScore {
            revenue: revenue[i],
            emission_reduction: er[i],
            remaining_lifetime: life[i],
        })
        .collect()
}

pub fn normalized_performance(results: &CaseStudyResult) -> BTreeMap<CaseMode, NormalizedScore> {
    let reports: Vec<_> = results.runs.iter().map(|r| r.report).collect();
    results
        .runs
        .iter()
        .map(|r| r.mode)
        .zip(normalize_reports(&reports))
        .collect()
}

/// Summary written next to the per-case schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBundle {
    pub carbon_price: Option<f64>,
    pub ess: EssParams,
    pub reports: BTreeMap<CaseMode, OperationReport>,
    pub objectives: BTreeMap<CaseMode, f64>,
    pub normalized: BTreeMap<CaseMode, NormalizedScore>,
}

impl CaseBundle {
    pub fn new(results: &CaseStudyResult) -> Self {
        let cp = results.prices.carbon_price();
        let constant = cp.iter().all(|c| *c == cp[0]).then_some(cp[0]);
        Self {
            carbon_price: constant,
            ess: results.ess,
            reports: results.runs.iter().map(|r| (r.mode, r.report)).collect(),
            objectives: results
                .runs
                .iter()
                .map(|r| (r.mode, r.schedule.objective))
                .collect(),
            normalized: normalized_performance(results),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub capacities: Vec<f64>,
    pub carbon_prices: Vec<f64>,
    /// Power limit per MWh of capacity.
    pub c_rate: f64,
    pub mode: CaseMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            capacities: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            carbon_prices: vec![20.0, 40.0, 80.0, 160.0, 320.0],
            c_rate: 1.0,
            mode: CaseMode::Combined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub capacity: f64,
    pub carbon_price: f64,
    /// Net emissions impact, `-emission_reduction`.
    pub emissions: f64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub capacities: Vec<f64>,
    pub carbon_prices: Vec<f64>,
    pub c_rate: f64,
    pub mode: CaseMode,
    /// Row-major, capacity outer.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, capacity_index: usize, price_index: usize) -> &SweepCell {
        &self.cells[capacity_index * self.carbon_prices.len() + price_index]
    }
}

pub fn sensitivity_sweep(
    series: &GridSeries,
    table: &MeiTable,
    non_dispatchable: &FuelSet,
    ess: &EssParams,
    config: &SweepConfig,
    options: &RunOptions,
) -> Result<SweepGrid, HarnessError> {
    let base = build_signals(series, table, non_dispatchable, 0.0)?;
    sweep_on(&base, ess, config, options)
}

/// Sweep over `base` signals; their carbon price is replaced per cell.
pub fn sweep_on(
    base: &PriceSignals,
    ess: &EssParams,
    config: &SweepConfig,
    options: &RunOptions,
) -> Result<SweepGrid, HarnessError> {
    if !matches!(config.mode, CaseMode::CarbonOnly | CaseMode::Combined) {
        return Err(HarnessError::UnsupportedMode(config.mode));
    }
    if config.capacities.is_empty() || config.carbon_prices.is_empty() {
        return Err(HarnessError::InvalidSweep("axes must be non-empty".into()));
    }
    if !(config.c_rate > 0.0 && config.c_rate.is_finite()) {
        return Err(HarnessError::InvalidSweep("c_rate must be positive".into()));
    }
    let coords: Vec<(f64, f64)> = config
        .capacities
        .iter()
        .flat_map(|&e| config.carbon_prices.iter().map(move |&lc| (e, lc)))
        .collect();
    let cells = coords
        .par_iter()
        .map(|&(capacity, carbon_price)| {
            let cell_err = |source| HarnessError::Cell {
                capacity,
                carbon_price,
                source,
            };
            let prices = PriceSignals::with_constant_carbon(
                base.elec_price().to_vec(),
                carbon_price,
                base.mei().to_vec(),
            )
            .map_err(cell_err)?;
            let device = ess.with_capacity(capacity, config.c_rate);
            let run = run_case(&prices, &device, config.mode, options).map_err(|e| match e {
                HarnessError::Dispatch(d) => cell_err(d),
                other => other,
            })?;
            Ok(SweepCell {
                capacity,
                carbon_price,
                emissions: -run.report.emission_reduction,
                revenue: run.report.total_revenue,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SweepGrid {
        capacities: config.capacities.clone(),
        carbon_prices: config.carbon_prices.clone(),
        c_rate: config.c_rate,
        mode: config.mode,
        cells,
    })
}

pub const SWEEP_HEADER: [&str; 4] = ["capacity", "carbon_price", "emissions", "revenue"];

pub fn write_sweep_csv<W: Write>(grid: &SweepGrid, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for cell in &grid.cells {
        w.serialize(cell)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_sweep_csv<R: Read>(reader: R) -> Result<Vec<SweepCell>, csv::Error> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "unexpected sweep header",
        )));
    }
    r.deserialize().collect()
}

//! Emission-aware storage dispatch.
//!
//! The dispatch problem maximizes `sum_t c_t * (p_dis_t - p_ch_t)` over hourly
//! charge/discharge powers subject to power limits and cumulative
//! state-of-charge bounds, where `c_t` is the effective price of the chosen
//! [`CaseMode`]. A small throughput penalty selects the minimum-throughput
//! solution among optimal ones; it is excluded from the reported objective.
//!
//! Powers are in MW over one-hour steps, so MW and MWh coincide per step.

mod dp;
mod flow;
mod io;
mod rolling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dp::{dp_oracle, DpConfig, DpResult};
pub use io::{parse_schedule_csv, write_schedule_csv, ScheduleRow, SCHEDULE_HEADER};
pub use rolling::rolling_horizon;

/// Default relative throughput penalty (fraction of the largest |c_t|).
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DispatchError {
    #[error("invalid storage parameters: {0}")]
    InvalidParams(String),
    #[error("signal length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("horizon is empty")]
    EmptyHorizon,
    #[error("terminal state-of-charge floor {floor} is unreachable")]
    Infeasible { floor: f64 },
    #[error("solver did not converge within {iterations} augmentations")]
    SolverStalled { iterations: usize },
    #[error("dp lattice needs {needed} cells, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("invalid rolling window: window {window}, step {step}, horizon {horizon}")]
    InvalidWindow {
        window: usize,
        step: usize,
        horizon: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TerminalPolicy {
    #[default]
    Free,
    /// Final state of charge must be at least the initial one.
    AtLeastInitial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EssParams {
    /// Energy capacity, MWh.
    pub capacity: f64,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Initial state of charge as a fraction of capacity.
    pub soc0: f64,
    pub cycle_life: f64,
    pub terminal_policy: TerminalPolicy,
}

impl Default for EssParams {
    fn default() -> Self {
        Self {
            capacity: 4.0,
            p_ch_max: 1.0,
            p_dis_max: 1.0,
            eta_ch: 0.92,
            eta_dis: 0.92,
            soc0: 0.0,
            cycle_life: 3000.0,
            terminal_policy: TerminalPolicy::Free,
        }
    }
}

impl EssParams {
    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |m: &str| Err(DispatchError::InvalidParams(m.to_string()));
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return bad("capacity must be positive");
        }
        if !(self.p_ch_max >= 0.0 && self.p_dis_max >= 0.0)
            || !self.p_ch_max.is_finite()
            || !self.p_dis_max.is_finite()
        {
            return bad("power limits must be non-negative");
        }
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0 && self.eta_dis > 0.0 && self.eta_dis <= 1.0) {
            return bad("efficiencies must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.soc0) {
            return bad("soc0 must lie in [0, 1]");
        }
        if !(self.cycle_life > 0.0) {
            return bad("cycle_life must be positive");
        }
        Ok(())
    }

    /// Same device with capacity `capacity` and power limits `capacity * c_rate`.
    pub fn with_capacity(&self, capacity: f64, c_rate: f64) -> Self {
        Self {
            capacity,
            p_ch_max: capacity * c_rate,
            p_dis_max: capacity * c_rate,
            ..*self
        }
    }

    fn terminal_floor(&self) -> Option<f64> {
        match self.terminal_policy {
            TerminalPolicy::Free => None,
            TerminalPolicy::AtLeastInitial => Some(self.soc0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseMode {
    ElectricityOnly,
    CarbonOnly,
    Combined,
}

impl CaseMode {
    pub const ALL: [CaseMode; 3] = [
        CaseMode::ElectricityOnly,
        CaseMode::CarbonOnly,
        CaseMode::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseMode::ElectricityOnly => "electricity_only",
            CaseMode::CarbonOnly => "carbon_only",
            CaseMode::Combined => "combined",
        }
    }
}

/// Hourly electricity price (money/MWh), carbon price (money/tCO2) and MEI (tCO2e/MWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSignals {
    elec_price: Vec<f64>,
    carbon_price: Vec<f64>,
    mei: Vec<f64>,
}

impl PriceSignals {
    pub fn new(
        elec_price: Vec<f64>,
        carbon_price: Vec<f64>,
        mei: Vec<f64>,
    ) -> Result<Self, DispatchError> {
        let n = elec_price.len();
        if n == 0 {
            return Err(DispatchError::EmptyHorizon);
        }
        for v in [&carbon_price, &mei] {
            if v.len() != n {
                return Err(DispatchError::LengthMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if elec_price
            .iter()
            .chain(&carbon_price)
            .chain(&mei)
            .any(|v| !v.is_finite())
        {
            return Err(DispatchError::InvalidParams(
                "signals must be finite".into(),
            ));
        }
        Ok(Self {
            elec_price,
            carbon_price,
            mei,
        })
    }

    /// Signals with one carbon price for every hour.
    pub fn with_constant_carbon(
        elec_price: Vec<f64>,
        carbon_price: f64,
        mei: Vec<f64>,
    ) -> Result<Self, DispatchError> {
        let n = elec_price.len();
        Self::new(elec_price, vec![carbon_price; n], mei)
    }

    pub fn len(&self) -> usize {
        self.elec_price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elec_price.is_empty()
    }

    pub fn elec_price(&self) -> &[f64] {
        &self.elec_price
    }

    pub fn carbon_price(&self) -> &[f64] {
        &self.carbon_price
    }

    pub fn mei(&self) -> &[f64] {
        &self.mei
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            elec_price: self.elec_price[start..end].to_vec(),
            carbon_price: self.carbon_price[start..end].to_vec(),
            mei: self.mei[start..end].to_vec(),
        }
    }
}

/// Per-hour coefficient on net grid power for `mode`.
pub fn effective_price(prices: &PriceSignals, mode: CaseMode) -> Vec<f64> {
    let carbon = prices
        .carbon_price
        .iter()
        .zip(&prices.mei)
        .map(|(lc, rho)| lc * rho);
    match mode {
        CaseMode::ElectricityOnly => prices.elec_price.clone(),
        CaseMode::CarbonOnly => carbon.collect(),
        CaseMode::Combined => prices
            .elec_price
            .iter()
            .zip(carbon)
            .map(|(lg, c)| lg + c)
            .collect(),
    }
}

/// Absolute throughput penalty for a coefficient sequence: `epsilon` times the
/// largest |c_t|, or `epsilon` itself when every coefficient is zero. Tying the
/// penalty to the price scale keeps the argmax invariant under positive scaling.
pub fn tie_break_penalty(coeffs: &[f64], epsilon: f64) -> f64 {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale > 0.0 {
        epsilon * scale
    } else {
        epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    pub p_ch: Vec<f64>,
    pub p_dis: Vec<f64>,
    /// `p_dis - p_ch`; positive when exporting to the grid.
    pub p_grid: Vec<f64>,
    /// State of charge after each hour.
    pub soc: Vec<f64>,
    pub soc0: f64,
    pub effective_price: Vec<f64>,
    /// `sum c_t * p_grid_t`, without the throughput penalty.
    pub objective: f64,
    /// Objective minus the throughput penalty, the quantity actually maximized.
    pub penalized_objective: f64,
    /// Absolute throughput penalty used, money/MWh.
    pub penalty: f64,
}

impl DispatchSchedule {
    /// Assembles a schedule from hourly powers; SoC, net power and objectives
    /// are derived here so every constructor shares one definition.
    pub fn from_powers(
        p_ch: Vec<f64>,
        p_dis: Vec<f64>,
        ess: &EssParams,
        soc0: f64,
        effective_price: Vec<f64>,
        penalty: f64,
    ) -> Self {
        let p_grid: Vec<f64> = p_dis.iter().zip(&p_ch).map(|(d, c)| d - c).collect();
        let mut soc = Vec::with_capacity(p_ch.len());
        let mut level = soc0;
        for (c, d) in p_ch.iter().zip(&p_dis) {
            level += ess.eta_ch * c / ess.capacity - d / (ess.eta_dis * ess.capacity);
            soc.push(level);
        }
        let objective: f64 = effective_price
            .iter()
            .zip(&p_grid)
            .map(|(c, g)| c * g)
            .sum();
        let throughput: f64 = p_ch.iter().chain(&p_dis).sum();
        Self {
            p_ch,
            p_dis,
            p_grid,
            soc,
            soc0,
            effective_price,
            objective,
            penalized_objective: objective - penalty * throughput,
            penalty,
        }
    }

    pub fn len(&self) -> usize {
        self.p_ch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_ch.is_empty()
    }

    /// Total charge plus discharge energy, MWh.
    pub fn throughput(&self) -> f64 {
        self.p_ch.iter().chain(&self.p_dis).sum()
    }

    pub fn is_idle(&self) -> bool {
        self.p_ch.iter().chain(&self.p_dis).all(|p| *p == 0.0)
    }

    /// Checks power bounds, the SoC recursion (1e-9), SoC bounds (1e-9) and the
    /// net-power identity. Returns the first violation found.
    pub fn check_invariants(&self, ess: &EssParams) -> Result<(), String> {
        const TOL: f64 = 1e-9;
        let n = self.len();
        if [self.p_dis.len(), self.p_grid.len(), self.soc.len()]
            .iter()
            .any(|l| *l != n)
        {
            return Err("vector lengths differ".into());
        }
        let mut level = self.soc0;
        for t in 0..n {
            let (c, d) = (self.p_ch[t], self.p_dis[t]);
            if !(0.0..=ess.p_ch_max).contains(&c) {
                return Err(format!("hour {t}: p_ch {c} outside [0, {}]", ess.p_ch_max));
            }
            if !(0.0..=ess.p_dis_max).contains(&d) {
                return Err(format!(
                    "hour {t}: p_dis {d} outside [0, {}]",
                    ess.p_dis_max
                ));
            }
            if self.p_grid[t] != d - c {
                return Err(format!("hour {t}: p_grid is not p_dis - p_ch"));
            }
            level += ess.eta_ch * c / ess.capacity - d / (ess.eta_dis * ess.capacity);
            if (self.soc[t] - level).abs() > TOL {
                return Err(format!(
                    "hour {t}: soc drifts from recursion by {}",
                    self.soc[t] - level
                ));
            }
            if self.soc[t] < -TOL || self.soc[t] > 1.0 + TOL {
                return Err(format!("hour {t}: soc {} outside [0, 1]", self.soc[t]));
            }
        }
        Ok(())
    }

    /// Hours with both charge and discharge strictly positive.
    pub fn simultaneous_hours(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&t| self.p_ch[t] > 0.0 && self.p_dis[t] > 0.0)
            .collect()
    }
}

/// Solver settings shared by the exact solver and the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Relative throughput penalty, see [`tie_break_penalty`].
    pub epsilon: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Globally optimal dispatch with the default settings.
pub fn solve_dispatch(
    prices: &PriceSignals,
    ess: &EssParams,
    mode: CaseMode,
) -> Result<DispatchSchedule, DispatchError> {
    solve_dispatch_with(prices, ess, mode, &SolverSettings::default())
}

pub fn solve_dispatch_with(
    prices: &PriceSignals,
    ess: &EssParams,
    mode: CaseMode,
    settings: &SolverSettings,
) -> Result<DispatchSchedule, DispatchError> {
    ess.validate()?;
    if prices.is_empty() {
        return Err(DispatchError::EmptyHorizon);
    }
    let coeffs = effective_price(prices, mode);
    solve_coefficients(coeffs, ess, ess.soc0, ess.terminal_floor(), settings)
}

/// Solves for an explicit coefficient sequence, start SoC and terminal floor.
pub(crate) fn solve_coefficients(
    coeffs: Vec<f64>,
    ess: &EssParams,
    soc0: f64,
    terminal_floor: Option<f64>,
    settings: &SolverSettings,
) -> Result<DispatchSchedule, DispatchError> {
    if !(settings.epsilon > 0.0 && settings.epsilon.is_finite()) {
        return Err(DispatchError::InvalidParams(
            "epsilon must be positive".into(),
        ));
    }
    let penalty = tie_break_penalty(&coeffs, settings.epsilon);
    let (p_ch, p_dis) = flow::solve(&coeffs, ess, soc0, terminal_floor, penalty)?;
    Ok(DispatchSchedule::from_powers(
        p_ch, p_dis, ess, soc0, coeffs, penalty,
    ))
}

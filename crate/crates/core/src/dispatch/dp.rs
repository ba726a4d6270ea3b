//! Dynamic-programming oracle over a discretized state-of-charge lattice.
//!
//! States are the `soc_steps + 1` evenly spaced SoC levels; an hourly decision
//! moves between two levels. A given net stored-energy change can be realized
//! with additional same-hour cycling (charge and discharge together), which is
//! searched over `power_steps + 1` evenly spaced amounts. Every lattice
//! schedule is feasible for the exact problem, so the oracle value is a lower
//! bound on the optimum that tightens as the lattice is refined.

use serde::{Deserialize, Serialize};

use super::{
    effective_price, tie_break_penalty, CaseMode, DispatchError, DispatchSchedule, EssParams,
    PriceSignals, SolverSettings, TerminalPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpConfig {
    pub soc_steps: usize,
    pub power_steps: usize,
    /// Upper bound on `T * soc_steps * power_steps`.
    pub budget: u64,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            soc_steps: 200,
            power_steps: 50,
            budget: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpResult {
    pub objective: f64,
    pub penalized_objective: f64,
    pub schedule: DispatchSchedule,
}

#[derive(Debug, Clone, Copy)]
struct HourAction {
    reward: f64,
    p_ch: f64,
    p_dis: f64,
}

struct Hour<'a> {
    ess: &'a EssParams,
    price: f64,
    penalty: f64,
    power_steps: usize,
}

impl Hour<'_> {
    /// Best realization of a net stored-energy change `delta` (MWh), or `None`
    /// when the power limits cannot deliver it.
    fn best(&self, delta: f64) -> Option<HourAction> {
        let ess = self.ess;
        let cap_x = ess.eta_ch * ess.p_ch_max;
        let cap_y = ess.p_dis_max / ess.eta_dis;
        let slack = 1e-12 * ess.capacity;
        let (x0, y0) = if delta >= 0.0 {
            (delta, 0.0)
        } else {
            (0.0, -delta)
        };
        if x0 > cap_x + slack || y0 > cap_y + slack {
            return None;
        }
        let z_max = (cap_x - x0).min(cap_y - y0).max(0.0);
        let mut best: Option<HourAction> = None;
        for k in 0..=self.power_steps {
            let z = z_max * k as f64 / self.power_steps as f64;
            let p_ch = ((x0 + z) / ess.eta_ch).min(ess.p_ch_max);
            let p_dis = ((y0 + z) * ess.eta_dis).min(ess.p_dis_max);
            let reward = self.price * (p_dis - p_ch) - self.penalty * (p_ch + p_dis);
            if best.is_none_or(|b| reward > b.reward) {
                best = Some(HourAction {
                    reward,
                    p_ch,
                    p_dis,
                });
            }
        }
        best
    }
}

/// Exact optimum over the lattice described by `config`, maximizing the same
/// penalized objective as the exact solver.
pub fn dp_oracle(
    prices: &PriceSignals,
    ess: &EssParams,
    mode: CaseMode,
    config: &DpConfig,
    settings: &SolverSettings,
) -> Result<DpResult, DispatchError> {
    ess.validate()?;
    let n = prices.len();
    if n == 0 {
        return Err(DispatchError::EmptyHorizon);
    }
    if config.soc_steps < 10 || config.power_steps < 2 {
        return Err(DispatchError::InvalidParams(
            "dp oracle needs soc_steps >= 10 and power_steps >= 2".into(),
        ));
    }
    let needed = n as u64 * config.soc_steps as u64 * config.power_steps as u64;
    if needed > config.budget {
        return Err(DispatchError::BudgetExceeded {
            needed,
            budget: config.budget,
        });
    }

    let coeffs = effective_price(prices, mode);
    let penalty = tie_break_penalty(&coeffs, settings.epsilon);
    let steps = config.soc_steps;
    let levels = steps + 1;
    let level_energy = ess.capacity / steps as f64;
    let level = |k: usize| k as f64 / steps as f64;
    let hour = |t: usize| Hour {
        ess,
        price: coeffs[t],
        penalty,
        power_steps: config.power_steps,
    };
    // Per hour, best action for each level difference d in [-steps, steps].
    let table: Vec<Vec<Option<HourAction>>> = (0..n)
        .map(|t| {
            let h = hour(t);
            (0..2 * levels - 1)
                .map(|i| h.best((i as f64 - steps as f64) * level_energy))
                .collect()
        })
        .collect();
    let action = |t: usize, from: usize, to: usize| table[t][to + steps - from];

    let floor = match ess.terminal_policy {
        TerminalPolicy::Free => None,
        TerminalPolicy::AtLeastInitial => Some(ess.soc0),
    };
    let mut value = vec![vec![f64::NEG_INFINITY; levels]; n + 1];
    for (k, v) in value[n].iter_mut().enumerate() {
        if floor.is_none_or(|f| level(k) >= f - 1e-12) {
            *v = 0.0;
        }
    }
    let mut choice = vec![vec![usize::MAX; levels]; n];
    for t in (1..n).rev() {
        for from in 0..levels {
            let mut best = f64::NEG_INFINITY;
            for to in 0..levels {
                let next = value[t + 1][to];
                if next == f64::NEG_INFINITY {
                    continue;
                }
                if let Some(a) = action(t, from, to) {
                    let v = a.reward + next;
                    if v > best {
                        best = v;
                        choice[t][from] = to;
                    }
                }
            }
            value[t][from] = best;
        }
    }

    // The first hour starts from soc0, which need not sit on the lattice.
    let first = hour(0);
    let mut start: Option<(f64, usize, HourAction)> = None;
    for to in 0..levels {
        let next = value[1][to];
        if next == f64::NEG_INFINITY {
            continue;
        }
        if let Some(a) = first.best((level(to) - ess.soc0) * ess.capacity) {
            let v = a.reward + next;
            if start.is_none_or(|(b, ..)| v > b) {
                start = Some((v, to, a));
            }
        }
    }
    let (_, mut at, a0) = start.ok_or(DispatchError::Infeasible {
        floor: floor.unwrap_or(0.0),
    })?;

    let mut p_ch = vec![a0.p_ch];
    let mut p_dis = vec![a0.p_dis];
    for t in 1..n {
        let to = choice[t][at];
        let a = action(t, at, to).expect("recorded transition is feasible");
        p_ch.push(a.p_ch);
        p_dis.push(a.p_dis);
        at = to;
    }
    let schedule = DispatchSchedule::from_powers(p_ch, p_dis, ess, ess.soc0, coeffs, penalty);
    Ok(DpResult {
        objective: schedule.objective,
        penalized_objective: schedule.penalized_objective,
        schedule,
    })
}

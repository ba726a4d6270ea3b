//! Receding-horizon dispatch: solve a window, commit its first `step` hours,
//! carry the resulting SoC forward.

use super::{
    effective_price, solve_coefficients, tie_break_penalty, CaseMode, DispatchError,
    DispatchSchedule, EssParams, PriceSignals, SolverSettings,
};

/// Stitches window solutions into one schedule over the full horizon.
///
/// A window that reaches the end of the horizon is committed entirely, so
/// `window >= T` reproduces the full-horizon solution. The terminal policy is
/// enforced only on that last window, relative to the original `soc0`.
pub fn rolling_horizon(
    prices: &PriceSignals,
    ess: &EssParams,
    mode: CaseMode,
    window: usize,
    step: usize,
    settings: &SolverSettings,
) -> Result<DispatchSchedule, DispatchError> {
    ess.validate()?;
    let n = prices.len();
    if n == 0 {
        return Err(DispatchError::EmptyHorizon);
    }
    if window == 0 || step == 0 || step > window {
        return Err(DispatchError::InvalidWindow {
            window,
            step,
            horizon: n,
        });
    }
    let coeffs = effective_price(prices, mode);
    let mut p_ch = Vec::with_capacity(n);
    let mut p_dis = Vec::with_capacity(n);
    let mut soc = ess.soc0;
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        let last = end == n;
        let floor = if last { ess.terminal_floor() } else { None };
        let part = solve_coefficients(coeffs[start..end].to_vec(), ess, soc, floor, settings)?;
        let keep = if last { end - start } else { step };
        p_ch.extend_from_slice(&part.p_ch[..keep]);
        p_dis.extend_from_slice(&part.p_dis[..keep]);
        soc = part.soc[keep - 1].clamp(0.0, 1.0);
        if last {
            break;
        }
        start += step;
    }
    let penalty = tie_break_penalty(&coeffs, settings.epsilon);
    Ok(DispatchSchedule::from_powers(
        p_ch, p_dis, ess, ess.soc0, coeffs, penalty,
    ))
}

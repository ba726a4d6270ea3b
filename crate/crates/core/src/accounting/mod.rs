//! Revenue, emission-reduction, credit and lifetime metrics for a schedule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{DispatchSchedule, EssParams, PriceSignals};

#[derive(Debug, Error, PartialEq)]
pub enum AccountingError {
    #[error("signal length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("compliance window must be at least one hour")]
    InvalidWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperationReport {
    pub elec_revenue: f64,
    pub carbon_revenue: f64,
    pub total_revenue: f64,
    /// tCO2; positive when the schedule displaces emissions.
    pub emission_reduction: f64,
    pub epc_quantity: f64,
    pub epc_value: f64,
    pub fec: f64,
    pub remaining_lifetime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AccountingOptions {
    /// Hours per compliance window; `None` means one window over the horizon.
    pub compliance_window: Option<usize>,
}

pub fn evaluate(
    schedule: &DispatchSchedule,
    prices: &PriceSignals,
    ess: &EssParams,
) -> Result<OperationReport, AccountingError> {
    evaluate_with(schedule, prices, ess, &AccountingOptions::default())
}

pub fn evaluate_with(
    schedule: &DispatchSchedule,
    prices: &PriceSignals,
    ess: &EssParams,
    options: &AccountingOptions,
) -> Result<OperationReport, AccountingError> {
    let n = schedule.len();
    if prices.len() != n {
        return Err(AccountingError::LengthMismatch {
            expected: n,
            found: prices.len(),
        });
    }
    let window = match options.compliance_window {
        Some(0) => return Err(AccountingError::InvalidWindow),
        Some(w) => w,
        None => n.max(1),
    };
    let (lg, lc, rho) = (prices.elec_price(), prices.carbon_price(), prices.mei());
    let g = &schedule.p_grid;

    let mut elec_revenue = 0.0;
    let mut carbon_revenue = 0.0;
    let mut emission_reduction = 0.0;
    for t in 0..n {
        elec_revenue += lg[t] * g[t];
        carbon_revenue += lc[t] * rho[t] * g[t];
        emission_reduction += rho[t] * g[t];
    }

    let mut epc_quantity = 0.0;
    let mut epc_value = 0.0;
    for start in (0..n).step_by(window) {
        let end = (start + window).min(n);
        let er: f64 = (start..end).map(|t| rho[t] * g[t]).sum();
        let credits = er.max(0.0);
        let mean_price = lc[start..end].iter().sum::<f64>() / (end - start) as f64;
        epc_quantity += credits;
        epc_value += credits * mean_price;
    }

    let fec = full_equivalent_cycles(schedule, ess);
    Ok(OperationReport {
        elec_revenue,
        carbon_revenue,
        total_revenue: elec_revenue + carbon_revenue,
        emission_reduction,
        epc_quantity,
        epc_value,
        fec,
        remaining_lifetime: 1.0 - fec / ess.cycle_life,
    })
}

/// Discharged energy divided by capacity.
pub fn full_equivalent_cycles(schedule: &DispatchSchedule, ess: &EssParams) -> f64 {
    schedule.p_dis.iter().sum::<f64>() / ess.capacity
}

/// `1 - FEC / cycle_life`; negative once the rated cycle life is exceeded.
pub fn remaining_lifetime(schedule: &DispatchSchedule, ess: &EssParams) -> f64 {
    1.0 - full_equivalent_cycles(schedule, ess) / ess.cycle_life
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn schedule(p_ch: Vec<f64>, p_dis: Vec<f64>, ess: &EssParams) -> DispatchSchedule {
        let n = p_ch.len();
        DispatchSchedule::from_powers(p_ch, p_dis, ess, ess.soc0, vec![0.0; n], 0.0)
    }

    #[test]
    fn idle_schedule_reports_zero() {
        let ess = EssParams::default();
        let p = PriceSignals::with_constant_carbon(vec![30.0; 5], 80.0, vec![0.3; 5]).unwrap();
        let r = evaluate(&schedule(vec![0.0; 5], vec![0.0; 5], &ess), &p, &ess).unwrap();
        assert_eq!(
            r,
            OperationReport {
                elec_revenue: 0.0,
                carbon_revenue: 0.0,
                total_revenue: 0.0,
                emission_reduction: 0.0,
                epc_quantity: 0.0,
                epc_value: 0.0,
                fec: 0.0,
                remaining_lifetime: 1.0,
            }
        );
    }

    #[test]
    fn single_discharge_hour() {
        let ess = EssParams {
            soc0: 1.0,
            ..EssParams::default()
        };
        let p = PriceSignals::new(vec![30.0], vec![80.0], vec![0.25]).unwrap();
        let r = evaluate(&schedule(vec![0.0], vec![1.0], &ess), &p, &ess).unwrap();
        assert!((r.elec_revenue - 30.0).abs() < 1e-12);
        assert!((r.carbon_revenue - 20.0).abs() < 1e-12);
        assert!((r.total_revenue - 50.0).abs() < 1e-12);
        assert!((r.emission_reduction - 0.25).abs() < 1e-12);
        assert!((r.epc_quantity - 0.25).abs() < 1e-12);
        assert!((r.epc_value - 20.0).abs() < 1e-12);
        assert!((r.fec - 0.25).abs() < 1e-12);
    }

    #[test]
    fn round_trip_at_uniform_mei_loses_emissions() {
        let ess = EssParams::default();
        let eta2 = ess.eta_ch * ess.eta_dis;
        let s = schedule(vec![1.0, 0.0], vec![0.0, eta2], &ess);
        assert!(s.soc[1].abs() < 1e-12);
        let p = PriceSignals::with_constant_carbon(vec![0.0; 2], 80.0, vec![0.3; 2]).unwrap();
        let r = evaluate(&s, &p, &ess).unwrap();
        assert!((r.emission_reduction + 0.3 * (1.0 - eta2)).abs() < 1e-12);
        assert_eq!(r.epc_quantity, 0.0);
        assert_eq!(r.epc_value, 0.0);
    }

    #[test]
    fn compliance_windows_floor_each_window() {
        let ess = EssParams::default();
        // window 1: net emitter, window 2: net reducer
        let s = schedule(vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.0], &ess);
        let p =
            PriceSignals::new(vec![0.0; 4], vec![40.0, 40.0, 100.0, 60.0], vec![0.2; 4]).unwrap();
        let full = evaluate(&s, &p, &ess).unwrap();
        assert!((full.emission_reduction - (-0.2 + 0.1)).abs() < 1e-12);
        assert_eq!(full.epc_quantity, 0.0);
        let r = evaluate_with(
            &s,
            &p,
            &ess,
            &AccountingOptions {
                compliance_window: Some(2),
            },
        )
        .unwrap();
        assert!((r.epc_quantity - 0.1).abs() < 1e-12);
        assert!((r.epc_value - 0.1 * 80.0).abs() < 1e-12);
        assert_eq!(r.emission_reduction, full.emission_reduction);
        assert_eq!(
            evaluate_with(
                &s,
                &p,
                &ess,
                &AccountingOptions {
                    compliance_window: Some(0)
                }
            ),
            Err(AccountingError::InvalidWindow)
        );
    }

    #[test]
    fn length_mismatch() {
        let ess = EssParams::default();
        let p = PriceSignals::with_constant_carbon(vec![1.0; 3], 80.0, vec![0.1; 3]).unwrap();
        assert_eq!(
            evaluate(&schedule(vec![0.0; 2], vec![0.0; 2], &ess), &p, &ess),
            Err(AccountingError::LengthMismatch {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn lifetime_examples() {
        let ess = EssParams {
            capacity: 1.0,
            p_dis_max: 1.0,
            soc0: 1.0,
            cycle_life: 3000.0,
            ..EssParams::default()
        };
        let s = schedule(vec![0.0; 1500], vec![1.0; 1500], &ess);
        assert!((remaining_lifetime(&s, &ess) - 0.5).abs() < 1e-12);
        assert_eq!(
            remaining_lifetime(&schedule(vec![0.0; 3], vec![0.0; 3], &ess), &ess),
            1.0
        );
        let a = schedule(vec![0.0; 4], vec![0.5, 0.0, 0.0, 0.25], &ess);
        let b = schedule(vec![0.0; 4], vec![0.0, 0.25, 0.5, 0.0], &ess);
        assert_eq!(remaining_lifetime(&a, &ess), remaining_lifetime(&b, &ess));
        let over = EssParams {
            cycle_life: 1.0,
            ..ess
        };
        assert!(remaining_lifetime(&schedule(vec![0.0; 3], vec![1.0; 3], &ess), &over) < 0.0);
    }

    #[test]
    fn json_has_the_eight_fields() {
        let r = OperationReport {
            elec_revenue: 1.0,
            carbon_revenue: 2.0,
            total_revenue: 3.0,
            emission_reduction: 0.5,
            epc_quantity: 0.5,
            epc_value: 40.0,
            fec: 0.1,
            remaining_lifetime: 0.9,
        };
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 8);
        for k in [
            "elec_revenue",
            "carbon_revenue",
            "total_revenue",
            "emission_reduction",
            "epc_quantity",
            "epc_value",
            "fec",
            "remaining_lifetime",
        ] {
            assert!(keys.iter().any(|x| x == k));
        }
        assert_eq!(serde_json::from_value::<OperationReport>(v).unwrap(), r);
    }

    fn powers(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n)
    }

    proptest! {
        #[test]
        fn revenues_are_linear_in_the_schedule(
            a_ch in powers(12), a_dis in powers(12), b_ch in powers(12), b_dis in powers(12),
            lg in prop::collection::vec(-20.0f64..150.0, 12),
            rho in prop::collection::vec(-0.05f64..0.4, 12),
        ) {
            let ess = EssParams::default();
            let p = PriceSignals::with_constant_carbon(lg, 80.0, rho).unwrap();
            let sum = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<_>>();
            let ra = evaluate(&schedule(a_ch.clone(), a_dis.clone(), &ess), &p, &ess).unwrap();
            let rb = evaluate(&schedule(b_ch.clone(), b_dis.clone(), &ess), &p, &ess).unwrap();
            let rs = evaluate(&schedule(sum(&a_ch, &b_ch), sum(&a_dis, &b_dis), &ess), &p, &ess).unwrap();
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
            prop_assert!(close(rs.elec_revenue, ra.elec_revenue + rb.elec_revenue));
            prop_assert!(close(rs.carbon_revenue, ra.carbon_revenue + rb.carbon_revenue));
            prop_assert!(close(rs.total_revenue, ra.total_revenue + rb.total_revenue));
            prop_assert!(close(rs.emission_reduction, ra.emission_reduction + rb.emission_reduction));
            prop_assert_eq!(rs.total_revenue, rs.elec_revenue + rs.carbon_revenue);
        }

        #[test]
        fn lifetime_never_grows_with_more_hours(dis in prop::collection::vec(0.0f64..1.0, 1..30)) {
            let ess = EssParams::default();
            let mut prev = 1.0;
            for k in 1..=dis.len() {
                let s = schedule(vec![0.0; k], dis[..k].to_vec(), &ess);
                let l = remaining_lifetime(&s, &ess);
                prop_assert!(l <= prev);
                prev = l;
            }
        }

        #[test]
        fn round_trip_needs_mei_spread_to_reduce(
            amount in 0.1f64..1.0, rho_ch in 0.0f64..0.5, rho_dis in 0.0f64..0.5,
        ) {
            let ess = EssParams::default();
            let eta2 = ess.eta_ch * ess.eta_dis;
            let s = schedule(vec![amount, 0.0], vec![0.0, amount * eta2], &ess);
            let p = PriceSignals::with_constant_carbon(vec![0.0; 2], 80.0, vec![rho_ch, rho_dis]).unwrap();
            let r = evaluate(&s, &p, &ess).unwrap();
            prop_assert_eq!(r.emission_reduction > 0.0, rho_dis * eta2 > rho_ch);
        }
    }
}

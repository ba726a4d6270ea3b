//! Marginal supply shares per residual-demand segment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{segment_index, CubicFit, MeiError, SegmentationConfig};
use crate::ingest::{FuelSet, GridSeries, Resource};

/// How a segment slope is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShareMethod {
    /// Secant of the fitted cubic across the segment boundaries.
    #[default]
    Chord,
    /// Least-squares line through the raw points falling in the segment.
    SegmentRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ShareOptions {
    pub method: ShareMethod,
    /// Evaluate segments outside the fitted domain on the cubic's extension
    /// (nominal one-width window) instead of failing.
    pub extrapolate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentShares {
    pub segment: usize,
    pub shares: BTreeMap<Resource, f64>,
    /// Sum of the shares, recomputed on construction.
    pub total: f64,
    /// Mean observed net imports over the hours in this segment.
    pub mean_net_imports: Option<f64>,
    pub sample_count: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub windows: BTreeMap<Resource, (f64, f64)>,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawShareTable")]
pub struct SupplyShareTable {
    pub segmentation: SegmentationConfig,
    pub segments: Vec<SegmentShares>,
}

#[derive(Deserialize)]
struct RawShareTable {
    #[serde(default)]
    segmentation: SegmentationConfig,
    segments: Vec<RawSegment>,
}

#[derive(Deserialize)]
struct RawSegment {
    shares: BTreeMap<Resource, f64>,
    #[serde(default)]
    mean_net_imports: Option<f64>,
}

impl TryFrom<RawShareTable> for SupplyShareTable {
    type Error = MeiError;

    fn try_from(raw: RawShareTable) -> Result<Self, Self::Error> {
        SupplyShareTable::from_rows(
            raw.segmentation,
            raw.segments
                .into_iter()
                .map(|r| (r.shares, r.mean_net_imports))
                .collect(),
        )
    }
}

impl SupplyShareTable {
    /// Builds a table from externally supplied shares, one row per segment in order.
    pub fn from_rows(
        segmentation: SegmentationConfig,
        rows: Vec<(BTreeMap<Resource, f64>, Option<f64>)>,
    ) -> Result<Self, MeiError> {
        segmentation.validate()?;
        if rows.len() != segmentation.count {
            return Err(MeiError::LengthMismatch {
                expected: segmentation.count,
                found: rows.len(),
            });
        }
        let segments = rows
            .into_iter()
            .enumerate()
            .map(|(i, (shares, mean_net_imports))| SegmentShares {
                segment: i + 1,
                total: shares.values().sum(),
                shares,
                mean_net_imports,
                sample_count: 0,
                windows: BTreeMap::new(),
                extrapolated: false,
            })
            .collect();
        Ok(Self {
            segmentation,
            segments,
        })
    }

    pub fn share(&self, segment: usize, resource: Resource) -> f64 {
        self.segments[segment - 1].shares[&resource]
    }
}

/// Chord-based shares with default options.
pub fn supply_shares(
    fits: &BTreeMap<Resource, CubicFit>,
    config: &SegmentationConfig,
    series: &GridSeries,
    non_dispatchable: &FuelSet,
) -> Result<SupplyShareTable, MeiError> {
    supply_shares_with(
        fits,
        config,
        series,
        non_dispatchable,
        &ShareOptions::default(),
    )
}

pub fn supply_shares_with(
    fits: &BTreeMap<Resource, CubicFit>,
    config: &SegmentationConfig,
    series: &GridSeries,
    non_dispatchable: &FuelSet,
    options: &ShareOptions,
) -> Result<SupplyShareTable, MeiError> {
    config.validate()?;
    for r in Resource::ALL {
        if !fits.contains_key(&r) {
            return Err(MeiError::MissingFit(r));
        }
    }
    let rd = series.residual_demands(non_dispatchable)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.count];
    for (t, x) in rd.iter().enumerate() {
        members[segment_index(*x, config) - 1].push(t);
    }

    let mut segments = Vec::with_capacity(config.count);
    for s in 1..=config.count {
        let hours = &members[s - 1];
        let mean_net_imports = (!hours.is_empty()).then(|| {
            hours
                .iter()
                .map(|&t| series.records()[t].net_imports)
                .sum::<f64>()
                / hours.len() as f64
        });

        let mut shares = BTreeMap::new();
        let mut windows = BTreeMap::new();
        let mut extrapolated = false;
        match options.method {
            ShareMethod::Chord => {
                let clipped: BTreeMap<Resource, Option<(f64, f64)>> = fits
                    .iter()
                    .map(|(r, f)| (*r, chord_window(config, s, f.fit_domain)))
                    .collect();
                if clipped.values().all(Option::is_none) && !options.extrapolate {
                    return Err(MeiError::EmptySegmentDomain { segment: s });
                }
                for (r, fit) in fits {
                    let (lo, hi) = match clipped[r] {
                        Some(w) => w,
                        None => {
                            extrapolated = true;
                            nominal_window(config, s)
                        }
                    };
                    shares.insert(*r, fit.chord(lo, hi));
                    windows.insert(*r, (lo, hi));
                }
            }
            ShareMethod::SegmentRegression => {
                let xs: Vec<f64> = hours.iter().map(|&t| rd[t]).collect();
                for (r, fit) in fits {
                    let ys: Vec<f64> = hours
                        .iter()
                        .map(|&t| series.records()[t].resource_output(*r))
                        .collect();
                    let slope = match line_slope(&xs, &ys) {
                        Some(v) => v,
                        None if options.extrapolate => {
                            extrapolated = true;
                            let (lo, hi) = nominal_window(config, s);
                            fit.chord(lo, hi)
                        }
                        None => return Err(MeiError::EmptySegmentDomain { segment: s }),
                    };
                    shares.insert(*r, slope);
                }
            }
        }
        segments.push(SegmentShares {
            segment: s,
            total: shares.values().sum(),
            shares,
            mean_net_imports,
            sample_count: hours.len(),
            windows,
            extrapolated,
        });
    }
    Ok(SupplyShareTable {
        segmentation: *config,
        segments,
    })
}

/// Segment bounds with the unbounded ends capped at one width.
fn nominal_window(config: &SegmentationConfig, s: usize) -> (f64, f64) {
    match config.bounds(s) {
        (None, Some(hi)) => (hi - config.width, hi),
        (Some(lo), None) => (lo, lo + config.width),
        (Some(lo), Some(hi)) => (lo, hi),
        (None, None) => unreachable!("segments have at least one finite bound"),
    }
}

/// Chord window for segment `s` given a fit domain; `None` when the segment
/// does not overlap the domain. The end segments are clipped to the domain.
fn chord_window(config: &SegmentationConfig, s: usize, domain: (f64, f64)) -> Option<(f64, f64)> {
    let (a, b) = domain;
    let (lo, hi) = nominal_window(config, s);
    let (lo, hi) = match config.bounds(s) {
        (None, _) => (lo.max(a), hi),
        (_, None) => (lo, hi.min(b)),
        _ => (lo, hi),
    };
    (hi > lo && a < hi && b > lo).then_some((lo, hi))
}

fn line_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::super::{fit_cubic, fit_resources};
    use super::*;
    use crate::ingest::{default_non_dispatchable, synth_generate, SynthParams};

    fn linear_fits(domain: (f64, f64)) -> BTreeMap<Resource, CubicFit> {
        let xs: Vec<f64> = (0..50)
            .map(|i| domain.0 + (domain.1 - domain.0) * i as f64 / 49.0)
            .collect();
        Resource::ALL
            .iter()
            .map(|r| {
                let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 100.0).collect();
                (*r, fit_cubic(&xs, &ys).unwrap())
            })
            .collect()
    }

    fn small_series() -> GridSeries {
        synth_generate(&SynthParams {
            horizon_hours: 48,
            ..SynthParams::default()
        })
        .unwrap()
        .0
    }

    #[test]
    fn linear_resource_has_constant_share() {
        let fits = linear_fits((-3000.0, 15000.0));
        let table = supply_shares(
            &fits,
            &SegmentationConfig::default(),
            &small_series(),
            &default_non_dispatchable(),
        )
        .unwrap();
        for row in &table.segments {
            for v in row.shares.values() {
                assert!((v - 0.5).abs() < 1e-9);
            }
            assert_eq!(row.total, row.shares.values().sum::<f64>());
        }
    }

    #[test]
    fn end_windows_are_clipped_to_domain() {
        let fits = linear_fits((-1500.0, 12400.0));
        let table = supply_shares(
            &fits,
            &SegmentationConfig::default(),
            &small_series(),
            &default_non_dispatchable(),
        )
        .unwrap();
        assert_eq!(
            table.segments[0].windows[&Resource::Gas],
            (-1500.0, -1000.0)
        );
        assert_eq!(
            table.segments[14].windows[&Resource::Gas],
            (12000.0, 12400.0)
        );
        assert_eq!(table.segments[5].windows[&Resource::Gas], (3000.0, 4000.0));
    }

    #[test]
    fn segment_outside_domain_is_an_error_unless_extrapolating() {
        let fits = linear_fits((0.0, 9000.0));
        let cfg = SegmentationConfig::default();
        let nd = default_non_dispatchable();
        let err = supply_shares(&fits, &cfg, &small_series(), &nd).unwrap_err();
        assert!(matches!(err, MeiError::EmptySegmentDomain { segment: 1 }));
        let opts = ShareOptions {
            extrapolate: true,
            ..Default::default()
        };
        let table = supply_shares_with(&fits, &cfg, &small_series(), &nd, &opts).unwrap();
        assert!(table.segments[0].extrapolated);
        assert_eq!(
            table.segments[0].windows[&Resource::Gas],
            (-2000.0, -1000.0)
        );
        assert!(table.segments[14].extrapolated);
        assert!(!table.segments[5].extrapolated);
    }

    #[test]
    fn shares_scale_with_output() {
        let (series, _) = synth_generate(&SynthParams {
            horizon_hours: 2000,
            ..SynthParams::default()
        })
        .unwrap();
        let nd = default_non_dispatchable();
        let cfg = SegmentationConfig::default();
        let opts = ShareOptions {
            extrapolate: true,
            ..Default::default()
        };
        let fits = fit_resources(&series, &nd).unwrap();
        let base = supply_shares_with(&fits, &cfg, &series, &nd, &opts).unwrap();
        let alpha = 2.5;
        let scaled_fits: BTreeMap<_, _> =
            fits.iter().map(|(r, f)| (*r, f.scaled_by(alpha))).collect();
        let scaled = supply_shares_with(&scaled_fits, &cfg, &series, &nd, &opts).unwrap();
        for (a, b) in base.segments.iter().zip(&scaled.segments) {
            for r in Resource::ALL {
                assert!(
                    (a.shares[&r] * alpha - b.shares[&r]).abs()
                        <= 1e-12 * (1.0 + b.shares[&r].abs())
                );
            }
        }
    }

    #[test]
    fn segment_regression_on_linear_data() {
        let (mut series, _) = synth_generate(&SynthParams {
            horizon_hours: 3000,
            noise_scale: 0.0,
            ..SynthParams::default()
        })
        .unwrap();
        // replace gas with an exact line in residual demand
        let nd = default_non_dispatchable();
        let rd = series.residual_demands(&nd).unwrap();
        let mut records = series.into_records();
        for (r, x) in records.iter_mut().zip(&rd) {
            r.gen.insert(crate::ingest::Fuel::Gas, 0.25 * x + 4000.0);
        }
        series = GridSeries::new(records).unwrap();
        let fits = fit_resources(&series, &nd).unwrap();
        let opts = ShareOptions {
            method: ShareMethod::SegmentRegression,
            extrapolate: true,
        };
        let table =
            supply_shares_with(&fits, &SegmentationConfig::default(), &series, &nd, &opts).unwrap();
        for row in table.segments.iter().filter(|r| r.sample_count >= 2) {
            assert!((row.shares[&Resource::Gas] - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn share_table_json_recomputes_totals() {
        let json = r#"{
            "segmentation": {"first_upper_bound": 0.0, "width": 10.0, "count": 2},
            "segments": [
                {"shares": {"gas": 0.5, "hydro": 0.25, "import": 0.25}, "total": 99.0},
                {"shares": {"gas": 0.1, "hydro": 0.2, "import": 0.3}, "mean_net_imports": 5.0}
            ]
        }"#;
        let table: SupplyShareTable = serde_json::from_str(json).unwrap();
        assert_eq!(table.segments[0].total, 1.0);
        assert_eq!(table.segments[1].mean_net_imports, Some(5.0));
        let short = r#"{"segments": [{"shares": {"gas": 1.0}}]}"#;
        assert!(serde_json::from_str::<SupplyShareTable>(short).is_err());
    }
}

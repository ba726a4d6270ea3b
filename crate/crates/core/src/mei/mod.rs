//! Marginal emission intensity (MEI): cubic fits of the marginal resources
//! against residual demand, piecewise-linear supply shares per residual-demand
//! segment, and the per-segment / per-hour intensity lookup.

mod fit;
mod shares;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    default_non_dispatchable, residual_demand, FuelSet, GridSeries, IngestError, Resource,
};

pub use fit::{fit_cubic, CubicFit};
pub use shares::{
    supply_shares, supply_shares_with, SegmentShares, ShareMethod, ShareOptions, SupplyShareTable,
};

#[derive(Debug, Error)]
pub enum MeiError {
    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("segment {segment} lies wholly outside the fitted domain")]
    EmptySegmentDomain { segment: usize },
    #[error("resource sets differ: shares cover {shares:?}, factors cover {factors:?}")]
    ResourceMismatch {
        shares: Vec<Resource>,
        factors: Vec<Resource>,
    },
    #[error("segment {segment} is outside 1..={count}")]
    InvalidSegment { segment: usize, count: usize },
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("emission factor for {0} is not finite")]
    NonFiniteFactor(Resource),
    #[error("no fit supplied for {0}")]
    MissingFit(Resource),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Residual-demand segmentation. Segment 1 is `(-inf, first_upper_bound)`,
/// segments `2..count-1` are `[lo, lo + width)` and segment `count` is
/// `[last_lower_bound, +inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub first_upper_bound: f64,
    pub width: f64,
    pub count: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            first_upper_bound: -1000.0,
            width: 1000.0,
            count: 15,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), MeiError> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(MeiError::InvalidSegmentation(
                "width must be positive".into(),
            ));
        }
        if !self.first_upper_bound.is_finite() {
            return Err(MeiError::InvalidSegmentation(
                "first_upper_bound must be finite".into(),
            ));
        }
        if self.count < 2 {
            return Err(MeiError::InvalidSegmentation(
                "at least two segments are required".into(),
            ));
        }
        Ok(())
    }

    pub fn last_lower_bound(&self) -> f64 {
        self.first_upper_bound + (self.count - 2) as f64 * self.width
    }

    /// `(lower, upper)` bounds of segment `s`; `None` marks an unbounded end.
    pub fn bounds(&self, s: usize) -> (Option<f64>, Option<f64>) {
        let lo = |k: usize| self.first_upper_bound + (k - 2) as f64 * self.width;
        if s <= 1 {
            (None, Some(self.first_upper_bound))
        } else if s >= self.count {
            (Some(self.last_lower_bound()), None)
        } else {
            (Some(lo(s)), Some(lo(s + 1)))
        }
    }
}

/// Segment id (1-based) containing `rd`. Boundaries belong to the higher segment.
pub fn segment_index(rd: f64, config: &SegmentationConfig) -> usize {
    if rd < config.first_upper_bound {
        return 1;
    }
    let steps = ((rd - config.first_upper_bound) / config.width).floor();
    if steps >= (config.count - 2) as f64 {
        config.count
    } else {
        2 + steps as usize
    }
}

/// Emission factor per marginal resource, tCO2e/MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmissionFactors(pub BTreeMap<Resource, f64>);

impl Default for EmissionFactors {
    fn default() -> Self {
        Self(
            [
                (Resource::Gas, 0.37),
                (Resource::Hydro, 0.0),
                (Resource::Import, 0.44),
            ]
            .into_iter()
            .collect(),
        )
    }
}

impl EmissionFactors {
    pub fn get(&self, resource: Resource) -> Option<f64> {
        self.0.get(&resource).copied()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|(r, e)| (*r, e * alpha)).collect())
    }
}

/// Which segments count the import emission factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImportRule {
    /// Counted where the segment's mean observed net imports are positive.
    #[default]
    Auto,
    Explicit(BTreeSet<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeiSegment {
    pub segment: usize,
    pub shares: BTreeMap<Resource, f64>,
    pub total: f64,
    pub import_counted: bool,
    /// tCO2e/MWh.
    pub mei: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeiTable {
    pub segmentation: SegmentationConfig,
    pub factors: EmissionFactors,
    pub segments: Vec<MeiSegment>,
}

impl MeiTable {
    pub fn mei(&self, segment: usize) -> f64 {
        self.segments[segment - 1].mei
    }

    pub fn lookup(&self, rd: f64) -> f64 {
        self.mei(segment_index(rd, &self.segmentation))
    }

    pub fn values(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.mei).collect()
    }
}

/// Per-segment MEI: `m_s = sum_n share_{n,s} * e_n`, where imports contribute
/// only in segments selected by `import_rule`.
pub fn mei_table(
    shares: &SupplyShareTable,
    factors: &EmissionFactors,
    import_rule: &ImportRule,
) -> Result<MeiTable, MeiError> {
    let seg = shares.segmentation;
    seg.validate()?;
    for (r, e) in &factors.0 {
        if !e.is_finite() {
            return Err(MeiError::NonFiniteFactor(*r));
        }
    }
    if let ImportRule::Explicit(set) = import_rule {
        if let Some(&bad) = set.iter().find(|s| **s == 0 || **s > seg.count) {
            return Err(MeiError::InvalidSegment {
                segment: bad,
                count: seg.count,
            });
        }
    }
    let factor_keys: Vec<Resource> = factors.0.keys().copied().collect();

    let mut segments = Vec::with_capacity(shares.segments.len());
    for row in &shares.segments {
        let share_keys: Vec<Resource> = row.shares.keys().copied().collect();
        if share_keys != factor_keys {
            return Err(MeiError::ResourceMismatch {
                shares: share_keys,
                factors: factor_keys,
            });
        }
        let import_counted = match import_rule {
            ImportRule::Auto => row.mean_net_imports.is_some_and(|m| m > 0.0),
            ImportRule::Explicit(set) => set.contains(&row.segment),
        };
        let mei = row
            .shares
            .iter()
            .filter(|(r, _)| **r != Resource::Import || import_counted)
            .map(|(r, lambda)| lambda * factors.0[r])
            .sum();
        segments.push(MeiSegment {
            segment: row.segment,
            shares: row.shares.clone(),
            total: row.total,
            import_counted,
            mei,
        });
    }
    Ok(MeiTable {
        segmentation: seg,
        factors: factors.clone(),
        segments,
    })
}

/// Hourly MEI: the segment value at each hour's residual demand.
pub fn mei_series(
    series: &GridSeries,
    table: &MeiTable,
    non_dispatchable: &FuelSet,
) -> Result<Vec<f64>, MeiError> {
    series
        .records()
        .iter()
        .map(|r| Ok(table.lookup(residual_demand(r, non_dispatchable)?)))
        .collect()
}

/// Fits every marginal resource against residual demand.
pub fn fit_resources(
    series: &GridSeries,
    non_dispatchable: &FuelSet,
) -> Result<BTreeMap<Resource, CubicFit>, MeiError> {
    let rd = series.residual_demands(non_dispatchable)?;
    Resource::ALL
        .iter()
        .map(|&r| {
            let ys: Vec<f64> = series
                .records()
                .iter()
                .map(|rec| rec.resource_output(r))
                .collect();
            Ok((r, fit_cubic(&rd, &ys)?))
        })
        .collect()
}

/// Settings for the series → MEI table pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeiConfig {
    pub non_dispatchable: FuelSet,
    pub segmentation: SegmentationConfig,
    pub factors: EmissionFactors,
    pub import_rule: ImportRule,
    pub shares: ShareOptions,
}

impl Default for MeiConfig {
    fn default() -> Self {
        Self {
            non_dispatchable: default_non_dispatchable(),
            segmentation: SegmentationConfig::default(),
            factors: EmissionFactors::default(),
            import_rule: ImportRule::Auto,
            shares: ShareOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeiEstimate {
    pub fits: BTreeMap<Resource, CubicFit>,
    pub shares: SupplyShareTable,
    pub table: MeiTable,
}

/// Fit, segment and tabulate in one pass.
pub fn estimate_mei(series: &GridSeries, config: &MeiConfig) -> Result<MeiEstimate, MeiError> {
    config.segmentation.validate()?;
    let fits = fit_resources(series, &config.non_dispatchable)?;
    let shares = supply_shares_with(
        &fits,
        &config.segmentation,
        series,
        &config.non_dispatchable,
        &config.shares,
    )?;
    let table = mei_table(&shares, &config.factors, &config.import_rule)?;
    Ok(MeiEstimate {
        fits,
        shares,
        table,
    })
}

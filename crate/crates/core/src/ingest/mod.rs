//! Hourly grid time series: record types, CSV ingestion, residual demand and a
//! seeded synthetic generator with known marginal response curves.

mod csv_io;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{parse_grid_csv, write_grid_csv, CSV_HEADER};
pub use synth::{
    synth_generate, DemandProfile, PriceModel, ResponseCurves, SmoothStep, SynthParams, WindProfile,
};

/// Length of one time step in hours. Sub-hourly data is rejected.
pub const STEP_HOURS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("timestamps are not spaced exactly one hour apart at {timestamp}")]
    NonHourlySpacing { timestamp: String },
    #[error("non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid timestamp at row {row}: {value:?}")]
    InvalidTimestamp { row: usize, value: String },
    #[error("negative value in `{column}` at {timestamp}")]
    NegativeValue { column: String, timestamp: String },
    #[error("series is empty")]
    EmptySeries,
    #[error("fuel `{0}` is not present in the record")]
    UnknownFuel(Fuel),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Generation fuels reported per hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fuel {
    Nuclear,
    Hydro,
    Wind,
    Solar,
    Biofuel,
    Gas,
}

impl Fuel {
    pub const ALL: [Fuel; 6] = [
        Fuel::Nuclear,
        Fuel::Hydro,
        Fuel::Wind,
        Fuel::Solar,
        Fuel::Biofuel,
        Fuel::Gas,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Fuel::Nuclear => "nuclear",
            Fuel::Hydro => "hydro",
            Fuel::Wind => "wind",
            Fuel::Solar => "solar",
            Fuel::Biofuel => "biofuel",
            Fuel::Gas => "gas",
        }
    }
}

impl fmt::Display for Fuel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fuel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fuel::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown fuel `{s}`"))
    }
}

pub type FuelSet = BTreeSet<Fuel>;

/// Fuels subtracted from total demand by default. Hydro stays in because the
/// reported hydro output merges baseload and dispatchable units.
pub fn default_non_dispatchable() -> FuelSet {
    [Fuel::Nuclear, Fuel::Wind, Fuel::Solar, Fuel::Biofuel]
        .into_iter()
        .collect()
}

/// Resources that follow residual demand at the margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Gas,
    Hydro,
    Import,
}

impl Resource {
    pub const ALL: [Resource; 3] = [Resource::Gas, Resource::Hydro, Resource::Import];

    pub fn as_str(self) -> &'static str {
        match self {
            Resource::Gas => "gas",
            Resource::Hydro => "hydro",
            Resource::Import => "import",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One hour of grid data. Energies in MWh, price in money/MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyGridRecord {
    pub timestamp: DateTime<FixedOffset>,
    pub total_demand: f64,
    pub gen: BTreeMap<Fuel, f64>,
    /// Positive when importing.
    pub net_imports: f64,
    pub price: f64,
}

impl HourlyGridRecord {
    /// Builds a record after checking the non-negativity invariants.
    pub fn new(
        timestamp: DateTime<FixedOffset>,
        total_demand: f64,
        gen: BTreeMap<Fuel, f64>,
        net_imports: f64,
        price: f64,
    ) -> Result<Self, IngestError> {
        let record = Self {
            timestamp,
            total_demand,
            gen,
            net_imports,
            price,
        };
        record.validate()?;
        Ok(record)
    }

    fn validate(&self) -> Result<(), IngestError> {
        let negative = |column: &str| IngestError::NegativeValue {
            column: column.to_string(),
            timestamp: self.timestamp.to_rfc3339(),
        };
        if !(self.total_demand >= 0.0) {
            return Err(negative("total_demand"));
        }
        if let Some((fuel, _)) = self.gen.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(negative(fuel.as_str()));
        }
        Ok(())
    }

    pub fn generation(&self, fuel: Fuel) -> Option<f64> {
        self.gen.get(&fuel).copied()
    }

    /// Observed output of a marginal resource (net imports for [`Resource::Import`]).
    pub fn resource_output(&self, resource: Resource) -> f64 {
        match resource {
            Resource::Gas => self.gen.get(&Fuel::Gas).copied().unwrap_or(0.0),
            Resource::Hydro => self.gen.get(&Fuel::Hydro).copied().unwrap_or(0.0),
            Resource::Import => self.net_imports,
        }
    }
}

/// Total demand minus the output of the non-dispatchable fuels. May be negative.
pub fn residual_demand(
    record: &HourlyGridRecord,
    non_dispatchable: &FuelSet,
) -> Result<f64, IngestError> {
    let mut rd = record.total_demand;
    for &fuel in non_dispatchable {
        rd -= record
            .generation(fuel)
            .ok_or(IngestError::UnknownFuel(fuel))?;
    }
    Ok(rd)
}

/// A non-empty, strictly hourly sequence of records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSeries {
    records: Vec<HourlyGridRecord>,
}

impl GridSeries {
    pub fn new(records: Vec<HourlyGridRecord>) -> Result<Self, IngestError> {
        if records.is_empty() {
            return Err(IngestError::EmptySeries);
        }
        for pair in records.windows(2) {
            let gap = pair[1].timestamp.signed_duration_since(pair[0].timestamp);
            if gap.num_seconds() != 3600 || gap.subsec_nanos() != 0 {
                return Err(IngestError::NonHourlySpacing {
                    timestamp: pair[1].timestamp.to_rfc3339(),
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[HourlyGridRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn timestamps(&self) -> Vec<DateTime<FixedOffset>> {
        self.records.iter().map(|r| r.timestamp).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.price).collect()
    }

    pub fn residual_demands(&self, non_dispatchable: &FuelSet) -> Result<Vec<f64>, IngestError> {
        self.records
            .iter()
            .map(|r| residual_demand(r, non_dispatchable))
            .collect()
    }

    /// Contiguous sub-series `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self, IngestError> {
        let end = (start + len).min(self.records.len());
        Self::new(self.records[start.min(end)..end].to_vec())
    }

    pub fn into_records(self) -> Vec<HourlyGridRecord> {
        self.records
    }
}

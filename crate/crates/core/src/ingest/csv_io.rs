use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat};

use super::{Fuel, GridSeries, HourlyGridRecord, IngestError};

/// Exact header expected on ingestion and emitted on export.
pub const CSV_HEADER: [&str; 10] = [
    "timestamp",
    "total_demand",
    "nuclear",
    "hydro",
    "wind",
    "solar",
    "biofuel",
    "gas",
    "net_imports",
    "price",
];

/// Parses and validates an hourly grid CSV. Row order is checked, not repaired.
pub fn parse_grid_csv<R: Read>(source: R) -> Result<GridSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut index = [0usize; CSV_HEADER.len()];
    for (slot, name) in index.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i + 1;
        let cell = |col: usize| row.get(index[col]).unwrap_or("");
        let number = |col: usize| -> Result<f64, IngestError> {
            let raw = cell(col);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::NonNumericCell {
                    row: row_no,
                    column: CSV_HEADER[col].to_string(),
                    value: raw.to_string(),
                })
        };

        let timestamp =
            DateTime::parse_from_rfc3339(cell(0)).map_err(|_| IngestError::InvalidTimestamp {
                row: row_no,
                value: cell(0).to_string(),
            })?;
        let total_demand = number(1)?;
        let mut gen = BTreeMap::new();
        for (col, fuel) in [
            (2, Fuel::Nuclear),
            (3, Fuel::Hydro),
            (4, Fuel::Wind),
            (5, Fuel::Solar),
            (6, Fuel::Biofuel),
            (7, Fuel::Gas),
        ] {
            gen.insert(fuel, number(col)?);
        }
        let net_imports = number(8)?;
        let price = number(9)?;
        records.push(HourlyGridRecord::new(
            timestamp,
            total_demand,
            gen,
            net_imports,
            price,
        )?);
    }
    GridSeries::new(records)
}

/// Writes a series in the ingestion schema; `parse_grid_csv` reads it back exactly.
pub fn write_grid_csv<W: Write>(series: &GridSeries, sink: W) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CSV_HEADER)?;
    for r in series.records() {
        let g = |f: Fuel| r.generation(f).unwrap_or(0.0).to_string();
        writer.write_record([
            r.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, false),
            r.total_demand.to_string(),
            g(Fuel::Nuclear),
            g(Fuel::Hydro),
            g(Fuel::Wind),
            g(Fuel::Solar),
            g(Fuel::Biofuel),
            g(Fuel::Gas),
            r.net_imports.to_string(),
            r.price.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

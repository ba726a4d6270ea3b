//! Hourly schedule CSV.

use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use super::{DispatchError, DispatchSchedule};

pub const SCHEDULE_HEADER: [&str; 6] = [
    "timestamp",
    "p_ch",
    "p_dis",
    "p_grid",
    "soc",
    "effective_price",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub timestamp: DateTime<FixedOffset>,
    pub p_ch: f64,
    pub p_dis: f64,
    pub p_grid: f64,
    pub soc: f64,
    pub effective_price: f64,
}

/// Writes one row per hour. `timestamps` must match the schedule length.
pub fn write_schedule_csv<W: Write>(
    writer: W,
    timestamps: &[DateTime<FixedOffset>],
    schedule: &DispatchSchedule,
) -> Result<(), csv::Error> {
    if timestamps.len() != schedule.len() {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            DispatchError::LengthMismatch {
                expected: schedule.len(),
                found: timestamps.len(),
            }
            .to_string(),
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    for (t, ts) in timestamps.iter().enumerate() {
        w.serialize(ScheduleRow {
            timestamp: *ts,
            p_ch: schedule.p_ch[t],
            p_dis: schedule.p_dis[t],
            p_grid: schedule.p_grid[t],
            soc: schedule.soc[t],
            effective_price: schedule.effective_price[t],
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_schedule_csv<R: Read>(reader: R) -> Result<Vec<ScheduleRow>, csv::Error> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(SCHEDULE_HEADER) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "unexpected schedule header: {}",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        )));
    }
    r.deserialize().collect()
}

//! Seeded synthetic grid series. The marginal resources are generated as known
//! cubic functions of residual demand so that fitted shares can be checked
//! against ground truth.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Duration, FixedOffset, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Fuel, GridSeries, HourlyGridRecord, IngestError, Resource};

/// Sigmoid-shaped cubic: `floor + rise * (3u^2 - 2u^3)` with
/// `u = (x - x_start) / (x_end - x_start)`. Not clamped outside
/// `[x_start, x_end]`, so the curve is a plain cubic on the whole real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothStep {
    pub floor: f64,
    pub rise: f64,
    pub x_start: f64,
    pub x_end: f64,
}

impl SmoothStep {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.x_start) / (self.x_end - self.x_start);
        self.floor + self.rise * u * u * (3.0 - 2.0 * u)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let w = self.x_end - self.x_start;
        let u = (x - self.x_start) / w;
        self.rise * 6.0 * u * (1.0 - u) / w
    }
}

/// Ground-truth marginal response of each resource to residual demand.
/// Net imports close the balance: `import(x) = x + import_offset - gas(x) - hydro(x)`,
/// so the three slopes sum to one everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurves {
    pub gas: SmoothStep,
    pub hydro: SmoothStep,
    pub import_offset: f64,
}

impl ResponseCurves {
    pub fn eval(&self, resource: Resource, x: f64) -> f64 {
        match resource {
            Resource::Gas => self.gas.eval(x),
            Resource::Hydro => self.hydro.eval(x),
            Resource::Import => x + self.import_offset - self.gas.eval(x) - self.hydro.eval(x),
        }
    }

    pub fn derivative(&self, resource: Resource, x: f64) -> f64 {
        match resource {
            Resource::Gas => self.gas.derivative(x),
            Resource::Hydro => self.hydro.derivative(x),
            Resource::Import => 1.0 - self.gas.derivative(x) - self.hydro.derivative(x),
        }
    }

    /// Chord slope of the true curve over `[lo, hi]`.
    pub fn chord(&self, resource: Resource, lo: f64, hi: f64) -> f64 {
        (self.eval(resource, hi) - self.eval(resource, lo)) / (hi - lo)
    }
}

impl Default for ResponseCurves {
    fn default() -> Self {
        Self {
            gas: SmoothStep {
                floor: 500.0,
                rise: 8000.0,
                x_start: -3000.0,
                x_end: 14000.0,
            },
            hydro: SmoothStep {
                floor: 2000.0,
                rise: 3000.0,
                x_start: -3000.0,
                x_end: 14000.0,
            },
            import_offset: 1500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandProfile {
    pub base: f64,
    /// Peak-to-trough swing of the daily cycle (trough 04:00, peak 16:00).
    pub diurnal_amplitude: f64,
    pub weekend_drop: f64,
    /// Half-sine bump over the horizon.
    pub seasonal_amplitude: f64,
    pub noise: f64,
}

impl Default for DemandProfile {
    fn default() -> Self {
        Self {
            base: 13300.0,
            diurnal_amplitude: 6500.0,
            weekend_drop: 1200.0,
            seasonal_amplitude: 3000.0,
            noise: 400.0,
        }
    }
}

/// AR(1) wind output clipped to `[0, capacity]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindProfile {
    pub mean: f64,
    pub capacity: f64,
    pub persistence: f64,
    pub volatility: f64,
}

impl Default for WindProfile {
    fn default() -> Self {
        Self {
            mean: 2500.0,
            capacity: 6500.0,
            persistence: 0.95,
            volatility: 550.0,
        }
    }
}

/// `price = base + per_gwh * rd / 1000 + diurnal_amplitude * diurnal + noise * N(0,1)`,
/// optionally floored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceModel {
    pub base: f64,
    pub per_gwh: f64,
    pub diurnal_amplitude: f64,
    pub noise: f64,
    pub floor: Option<f64>,
}

impl Default for PriceModel {
    fn default() -> Self {
        Self {
            base: 12.0,
            per_gwh: 2.0,
            diurnal_amplitude: 6.0,
            noise: 1.5,
            floor: Some(5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub horizon_hours: usize,
    pub start: DateTime<FixedOffset>,
    pub seed: u64,
    pub demand: DemandProfile,
    pub nuclear: f64,
    pub wind: WindProfile,
    pub solar_peak: f64,
    pub biofuel: f64,
    pub curves: ResponseCurves,
    /// Standard deviation (MWh) of the noise on gas, hydro and net imports.
    pub noise_scale: f64,
    pub price: PriceModel,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            horizon_hours: 4380,
            start: DateTime::parse_from_rfc3339("2024-10-01T00:00:00-04:00").unwrap(),
            seed: 42,
            demand: DemandProfile::default(),
            nuclear: 9000.0,
            wind: WindProfile::default(),
            solar_peak: 1500.0,
            biofuel: 150.0,
            curves: ResponseCurves::default(),
            noise_scale: 150.0,
            price: PriceModel::default(),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: &str| Err(IngestError::InvalidParams(msg.to_string()));
        if self.horizon_hours < 24 {
            return bad("horizon_hours must be at least 24");
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise_scale must be non-negative");
        }
        if !(self.demand.noise >= 0.0 && self.price.noise >= 0.0 && self.wind.volatility >= 0.0) {
            return bad("noise levels must be non-negative");
        }
        if !(0.0..1.0).contains(&self.wind.persistence) {
            return bad("wind persistence must lie in [0, 1)");
        }
        for (name, c) in [("gas", self.curves.gas), ("hydro", self.curves.hydro)] {
            if !(c.x_end > c.x_start) {
                return Err(IngestError::InvalidParams(format!(
                    "{name} curve needs x_end > x_start"
                )));
            }
        }
        if self.nuclear < 0.0
            || self.solar_peak < 0.0
            || self.biofuel < 0.0
            || self.wind.capacity < 0.0
        {
            return bad("generation levels must be non-negative");
        }
        Ok(())
    }
}

/// Daily shape in [0, 1]: trough at 04:00, peak at 16:00.
fn diurnal(hour: u32) -> f64 {
    0.5 * (1.0 - (2.0 * PI * (hour as f64 - 4.0) / 24.0).cos())
}

fn daylight(hour: u32) -> f64 {
    (PI * (hour as f64 - 6.0) / 13.0).sin().max(0.0)
}

/// Generates a deterministic synthetic series for `params.seed`. Residual
/// demand uses the default non-dispatchable set.
pub fn synth_generate(params: &SynthParams) -> Result<(GridSeries, ResponseCurves), IngestError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut gauss = move || -> f64 { rng.sample(StandardNormal) };

    let horizon = params.horizon_hours;
    let curves = params.curves;
    let mut wind = params.wind.mean.clamp(0.0, params.wind.capacity);
    let mut records = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let timestamp = params.start + Duration::hours(t as i64);
        let hour = timestamp.hour();
        let weekend = matches!(timestamp.weekday(), Weekday::Sat | Weekday::Sun);
        let shape = diurnal(hour);

        let d = &params.demand;
        let seasonal = d.seasonal_amplitude * (PI * t as f64 / horizon as f64).sin();
        let total = (d.base + d.diurnal_amplitude * shape + seasonal
            - if weekend { d.weekend_drop } else { 0.0 }
            + d.noise * gauss())
        .max(0.0);

        let w = &params.wind;
        wind = (w.mean + w.persistence * (wind - w.mean) + w.volatility * gauss())
            .clamp(0.0, w.capacity);
        let solar = params.solar_peak * daylight(hour);
        let nuclear = params.nuclear;
        let biofuel = params.biofuel;

        let rd = total - nuclear - wind - solar - biofuel;
        let sigma = params.noise_scale;
        let gas = (curves.eval(Resource::Gas, rd) + sigma * gauss()).max(0.0);
        let hydro = (curves.eval(Resource::Hydro, rd) + sigma * gauss()).max(0.0);
        let net_imports = curves.eval(Resource::Import, rd) + sigma * gauss();

        let p = &params.price;
        let mut price =
            p.base + p.per_gwh * rd / 1000.0 + p.diurnal_amplitude * shape + p.noise * gauss();
        if let Some(floor) = p.floor {
            price = price.max(floor);
        }

        let gen: BTreeMap<Fuel, f64> = [
            (Fuel::Nuclear, nuclear),
            (Fuel::Hydro, hydro),
            (Fuel::Wind, wind),
            (Fuel::Solar, solar),
            (Fuel::Biofuel, biofuel),
            (Fuel::Gas, gas),
        ]
        .into_iter()
        .collect();
        records.push(HourlyGridRecord::new(
            timestamp,
            total,
            gen,
            net_imports,
            price,
        )?);
    }
    Ok((GridSeries::new(records)?, curves))
}

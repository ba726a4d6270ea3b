//! Declarative run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use carbon_dispatch::dispatch::{CaseMode, EssParams};
use carbon_dispatch::harness::{RunOptions, SweepConfig};
use carbon_dispatch::ingest::SynthParams;
use carbon_dispatch::mei::MeiConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Hourly grid CSV. Mutually exclusive with `synth`.
    pub input: Option<PathBuf>,
    pub synth: Option<SynthParams>,
    /// Supply-share table JSON used instead of fitting.
    pub shares_file: Option<PathBuf>,
    pub out: PathBuf,
    /// Money per tCO2, applied to every hour.
    pub carbon_price: f64,
    pub mode: CaseMode,
    pub mei: MeiConfig,
    pub ess: EssParams,
    pub run: RunOptions,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            synth: None,
            shares_file: None,
            out: PathBuf::from("out"),
            carbon_price: 80.0,
            mode: CaseMode::Combined,
            mei: MeiConfig::default(),
            ess: EssParams::default(),
            run: RunOptions::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synth(SynthParams),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.input, &mut config.shares_file]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Exactly one source; a config naming neither uses the default generator.
    pub fn source(&self) -> Result<DataSource, String> {
        match (&self.input, &self.synth) {
            (Some(_), Some(_)) => Err("set either `input` or `[synth]`, not both".into()),
            (Some(p), None) => Ok(DataSource::Csv(p.clone())),
            (None, Some(s)) => Ok(DataSource::Synth(s.clone())),
            (None, None) => Ok(DataSource::Synth(SynthParams::default())),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.source()?;
        if !self.carbon_price.is_finite() {
            return Err("carbon_price must be finite".into());
        }
        self.ess.validate().map_err(|e| e.to_string())?;
        self.mei
            .segmentation
            .validate()
            .map_err(|e| e.to_string())?;
        if let Some(r) = self.run.rolling {
            if r.window == 0 || r.step == 0 || r.step > r.window {
                return Err(format!(
                    "rolling window {} / step {} must satisfy 1 <= step <= window",
                    r.window, r.step
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(
            c.source().unwrap(),
            DataSource::Synth(SynthParams::default())
        );
        assert_eq!(c.ess.eta_ch, 0.92);
        assert_eq!(c.carbon_price, 80.0);
    }

    #[test]
    fn nested_overrides() {
        let c: RunConfig = toml::from_str(
            r#"
            carbon_price = 40.0
            mode = "carbon_only"
            [ess]
            capacity = 8.0
            terminal_policy = "at_least_initial"
            [mei]
            non_dispatchable = ["nuclear", "wind"]
            import_rule = { explicit = [14, 15] }
            [mei.segmentation]
            first_upper_bound = -500.0
            width = 500.0
            count = 30
            [run.rolling]
            window = 48
            step = 24
            [sweep]
            capacities = [1.0, 2.0]
            [synth]
            horizon_hours = 100
            seed = 3
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.mode, CaseMode::CarbonOnly);
        assert_eq!(c.ess.capacity, 8.0);
        assert_eq!(c.ess.p_ch_max, 1.0);
        assert_eq!(c.mei.non_dispatchable.len(), 2);
        assert_eq!(c.mei.segmentation.count, 30);
        assert_eq!(c.run.rolling.unwrap().window, 48);
        assert_eq!(c.sweep.capacities, vec![1.0, 2.0]);
        assert_eq!(c.sweep.c_rate, 1.0);
        match c.source().unwrap() {
            DataSource::Synth(s) => assert_eq!((s.horizon_hours, s.seed), (100, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn both_sources_are_rejected() {
        let c: RunConfig = toml::from_str("input = \"a.csv\"\n[synth]\nseed = 1\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("carbon_prise = 3.0").is_err());
    }

    #[test]
    fn bad_rolling_is_rejected() {
        let c: RunConfig = toml::from_str("[run.rolling]\nwindow = 4\nstep = 8\n").unwrap();
        assert!(c.validate().is_err());
    }
}

//! Experiment configuration: one JSON document whose defaults reproduce the
//! 5 V → 12 V reference experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abc::{AbcConfig, SearchBox};
use crate::error::{Error, Result};
use crate::fopid::{build_fopid, Controller, FopidParams, OutputLimits};
use crate::frac_approx::OraConfig;
use crate::plant::ConverterParams;
use crate::simloop::{simulate, Disturbance, ModulatorConfig, Scenario, SimResult};

/// Everything needed to close the loop around one controller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub converter: ConverterParams,
    pub modulator: ModulatorConfig,
    pub ora: OraConfig,
    pub scenario: Scenario,
    pub limits: OutputLimits,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            converter: ConverterParams::default(),
            modulator: ModulatorConfig::default(),
            ora: OraConfig::default(),
            scenario: Scenario::default(),
            limits: ControllerSection::default().limits,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.converter.validate()?;
        self.modulator.validate()?;
        self.ora.validate()?;
        self.scenario.validate()?;
        self.limits.validate()
    }

    pub fn build_controller(&self, params: &FopidParams) -> Result<Controller> {
        build_fopid(params, &self.ora, self.modulator.dt())?.with_limits(self.limits)
    }

    /// Build a fresh controller and run the scenario.
    pub fn evaluate(&self, params: &FopidParams) -> Result<SimResult> {
        let mut c = self.build_controller(params)?;
        simulate(&mut c, &self.converter, &self.modulator, &self.scenario)
    }

    /// Same loop with the input-voltage step scenario.
    pub fn with_disturbance(&self, test: &DisturbanceTest) -> Self {
        Self {
            scenario: Scenario {
                horizon: test.horizon,
                disturbance: Some(Disturbance {
                    time: test.time,
                    relative_step: test.relative_step,
                }),
                ..self.scenario
            },
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerSection {
    /// Parameters for `simulate` / `disturb`; `None` means "tune first".
    pub params: Option<FopidParams>,
    /// Duty-cycle command range.
    pub limits: OutputLimits,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            params: None,
            // a duty of 1 keeps the switch closed forever and the output can
            // never rise, so the loop is clamped below it
            limits: OutputLimits { min: 0.0, max: 0.9 },
        }
    }
}

/// Input-voltage step experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisturbanceTest {
    pub time: f64,
    pub relative_step: f64,
    pub horizon: f64,
}

impl Default for DisturbanceTest {
    fn default() -> Self {
        Self {
            time: 0.15,
            relative_step: 0.1,
            horizon: 0.3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub converter: ConverterParams,
    pub modulator: ModulatorConfig,
    pub ora: OraConfig,
    pub scenario: Scenario,
    pub abc: AbcConfig,
    pub search: SearchBox,
    pub controller: ControllerSection,
    pub disturbance_test: DisturbanceTest,
    pub output_dir: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_config().validate()?;
        self.search.validate()?;
        self.abc.validate(&self.search.fopid_bounds())?;
        if let Some(p) = &self.controller.params {
            p.validate()?;
        }
        self.loop_config()
            .with_disturbance(&self.disturbance_test)
            .scenario
            .validate()
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            converter: self.converter,
            modulator: self.modulator,
            ora: self.ora,
            scenario: self.scenario,
            limits: self.controller.limits,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_setup() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg.converter.r_load, 25.0);
        assert_eq!(cfg.converter.l_filter, 250e-6);
        assert_eq!(cfg.converter.r_l, 0.075);
        assert_eq!(cfg.converter.c_filter, 1056e-6);
        assert_eq!(cfg.converter.r_c, 0.0375);
        assert_eq!(cfg.converter.v_g, 5.0);
        assert_eq!(cfg.scenario.v_ref, 12.0);
        assert_eq!(cfg.scenario.horizon, 0.05);
        assert_eq!(cfg.abc.colony_size, 10);
        assert_eq!(cfg.abc.max_iterations, 20);
        assert!((cfg.modulator.dt() - 0.5e-6).abs() < 1e-18);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg =
            RunConfig::from_json(r#"{"converter": {"v_g": 6.0}, "abc": {"rng_seed": 9}}"#).unwrap();
        assert_eq!(cfg.converter.v_g, 6.0);
        assert_eq!(cfg.converter.r_load, 25.0);
        assert_eq!(cfg.abc.rng_seed, 9);
        assert_eq!(cfg.abc.colony_size, 10);
    }

    #[test]
    fn bad_documents_are_config_errors() {
        for doc in [
            "not json",
            r#"{"converter": {"r_load": -1}}"#,
            r#"{"unknown_section": 1}"#,
            r#"{"disturbance_test": {"time": 0.5, "horizon": 0.3}}"#,
            r#"{"controller": {"params": {"kp": 1, "ti": 0, "td": 0, "lambda": 1, "mu": 1}}}"#,
        ] {
            let err = RunConfig::from_json(doc).unwrap_err();
            assert!(err.is_config(), "{doc}: {err}");
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }
}

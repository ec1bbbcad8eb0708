//! Whole-system configuration, loaded from a sectioned TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisConfig, BudgetConfig, BudgetInputs, DeviceConfig, HandConfig};
use crate::control::ControlParams;
use crate::engine::{LatencyConfig, Rig, SimulationConfig};
use crate::error::{Error, Result};
use crate::kinematics::{FingerGeometry, MountPose};
use crate::piano::{KeyboardLayout, LayoutConfig};
use crate::plant::MotorAxis;
use crate::sensors::{AccelerometerModel, DividerConfig, FlexSensorModel};
use crate::synth::SynthConfig;

/// The shipped configuration file, identical to [`GlobalConfig::default`].
pub const DEFAULT_TOML: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalConfig {
    pub layout: LayoutConfig,
    pub flex: FlexSensorModel,
    pub divider: DividerConfig,
    pub accel: AccelerometerModel,
    pub geometry: FingerGeometry,
    pub mount: MountPose,
    pub hand: HandConfig,
    pub axis_h: MotorAxis,
    pub axis_v: MotorAxis,
    pub control: ControlParams,
    pub latency: LatencyConfig,
    pub simulation: SimulationConfig,
    pub device: DeviceConfig,
    pub budget: BudgetConfig,
    pub synth: SynthConfig,
    pub analysis: AnalysisConfig,
}

impl GlobalConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::config(key, e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.keyboard()?;
        self.flex.validate()?;
        self.divider.validate()?;
        self.accel.validate()?;
        self.geometry.validate()?;
        self.mount.validate()?;
        self.axis_h.validate("axis_h")?;
        self.axis_v.validate("axis_v")?;
        self.control.validate()?;
        self.latency.validate()?;
        self.simulation.validate()?;
        self.synth.validate()?;
        if !self.hand.pinkie_x.is_finite() {
            return Err(Error::config("hand.pinkie_x", "must be finite"));
        }
        if !(self.device.mass_g > 0.0) {
            return Err(Error::config("device.mass_g", "must be positive"));
        }
        if !(self.budget.latency_ms > 0.0) {
            return Err(Error::config("budget.latency_ms", "must be positive"));
        }
        if !(self.budget.mass_g > 0.0) {
            return Err(Error::config("budget.mass_g", "must be positive"));
        }
        if self.analysis.n_bins < crate::analysis::SphereGrid::MIN_BINS {
            return Err(Error::config("analysis.n_bins", "must be at least 100"));
        }
        if self.analysis.samples == 0 {
            return Err(Error::config("analysis.samples", "must be positive"));
        }
        if self.control.v_cap > self.axis_v.v_max {
            return Err(Error::config("control.v_cap", "must not exceed axis_v.v_max"));
        }
        let hover = self.geometry.drop(self.mount.home_theta_v);
        if hover >= self.mount.base_z {
            return Err(Error::config("mount.base_z", "hovering fingertip would sit below the key surface"));
        }
        Ok(())
    }

    pub fn keyboard(&self) -> Result<KeyboardLayout> {
        KeyboardLayout::new(self.layout.clone())
    }

    pub fn rig(&self) -> Result<Rig> {
        Ok(Rig {
            layout: self.keyboard()?,
            geometry: self.geometry.clone(),
            mount: self.mount.clone(),
            axis_h: self.axis_h.clone(),
            axis_v: self.axis_v.clone(),
            params: self.control.clone(),
        })
    }

    pub fn budget_inputs<'a>(&'a self, layout: &'a KeyboardLayout) -> BudgetInputs<'a> {
        BudgetInputs {
            budget: &self.budget,
            device: &self.device,
            latency: &self.latency,
            layout,
            geometry: &self.geometry,
            mount: &self.mount,
            axis_v: &self.axis_v,
        }
    }
}

//! Calibration and the two control laws.
//!
//! The thumb's flex reading selects a horizontal position between the
//! nearest and furthest calibrated notes; the travel speed is proportional to
//! the distance still to go. The foot's Y reading selects a vertical position
//! between hover and fully pressed, and its Z reading sets how fast the
//! finger gets there.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::AxisCommand;
use crate::sensors::SensorTrace;

/// Labels a calibration trace must carry, in the order they are checked.
pub const CALIBRATION_LABELS: [&str; 6] = ["flex_min", "flex_max", "foot_up", "foot_down", "z_active", "z_rest"];

/// Encoder anchors, read from the same key-value format as [`CalibrationSet`].
pub const ANCHOR_KEYS: [&str; 4] = ["enc_h_min", "enc_h_max", "enc_hover", "enc_pressed"];

const CALIBRATION_KEYS: [&str; 10] = [
    "flex_min", "flex_max", "enc_h_min", "enc_h_max", "y_min", "y_max", "z_min", "z_max", "enc_hover",
    "enc_pressed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalibrationSet {
    /// ADC code with the thumb straight
    pub flex_min: i64,
    /// ADC code with the thumb flexed
    pub flex_max: i64,
    /// counts at the nearest playable note
    pub enc_h_min: i64,
    /// counts at the furthest playable note
    pub enc_h_max: i64,
    /// ADC code with the foot on the ground
    pub y_min: i64,
    /// ADC code with the foot lifted
    pub y_max: i64,
    /// ADC code with the foot stationary
    pub z_min: i64,
    /// ADC code while the foot is being lifted
    pub z_max: i64,
    pub enc_hover: i64,
    pub enc_pressed: i64,
}

/// Encoder counts for the four robot poses recorded during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderAnchors {
    pub enc_h_min: i64,
    pub enc_h_max: i64,
    pub enc_hover: i64,
    pub enc_pressed: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlParams {
    /// (deg/s) per count of remaining horizontal distance
    pub kp_h: f64,
    /// deg/s, ceiling on both axes' profile velocity
    pub v_cap: f64,
    /// deg/s at a Z reading of `z_max`
    pub kv_z: f64,
    /// ADC codes above `z_min` that count as a lift onset
    pub z_threshold: f64,
    /// deg/s, lower bound on the vertical profile velocity
    pub v_floor: f64,
    /// ms during which further lift onsets are ignored
    pub refractory_ms: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self { kp_h: 0.5, v_cap: 4000.0, kv_z: 4000.0, z_threshold: 40.0, v_floor: 5.0, refractory_ms: 250.0 }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp_h > 0.0) {
            return Err(Error::config("control.kp_h", "must be positive"));
        }
        if !(self.v_cap > 0.0) {
            return Err(Error::config("control.v_cap", "must be positive"));
        }
        if !(self.kv_z > 0.0) {
            return Err(Error::config("control.kv_z", "must be positive"));
        }
        if !(self.z_threshold > 0.0) {
            return Err(Error::config("control.z_threshold", "must be positive"));
        }
        if !(self.v_floor > 0.0 && self.v_floor <= self.v_cap) {
            return Err(Error::config("control.v_floor", "must be in (0, control.v_cap]"));
        }
        if !(self.refractory_ms >= 0.0) {
            return Err(Error::config("control.refractory_ms", "must be non-negative"));
        }
        Ok(())
    }
}

/// Affine map of `s` from `[s_min, s_max]` onto `[p_min, p_max]`, clamped to
/// the output interval.
pub fn linear_map(s: f64, s_min: f64, s_max: f64, p_min: f64, p_max: f64) -> Result<f64> {
    if s_min == s_max {
        return Err(Error::DegenerateCalibration { what: "sensor range".into(), value: s_min });
    }
    let p = p_min + (s - s_min) * (p_max - p_min) / (s_max - s_min);
    Ok(p.clamp(p_min.min(p_max), p_min.max(p_max)))
}

impl CalibrationSet {
    pub fn validate(&self) -> Result<()> {
        for (what, lo, hi) in [
            ("flex", self.flex_min, self.flex_max),
            ("y", self.y_min, self.y_max),
            ("z", self.z_min, self.z_max),
            ("enc_hover/enc_pressed", self.enc_hover, self.enc_pressed),
        ] {
            if lo == hi {
                return Err(Error::DegenerateCalibration { what: what.into(), value: lo as f64 });
            }
        }
        Ok(())
    }

    /// Check the encoder anchors lie inside the joints' count ranges.
    pub fn validate_ranges(&self, h_range: (i64, i64), v_range: (i64, i64)) -> Result<()> {
        for (name, value, (lo, hi)) in [
            ("enc_h_min", self.enc_h_min, h_range),
            ("enc_h_max", self.enc_h_max, h_range),
            ("enc_hover", self.enc_hover, v_range),
            ("enc_pressed", self.enc_pressed, v_range),
        ] {
            if !(lo..=hi).contains(&value) {
                return Err(Error::input(format!("calibration {name} = {value} outside joint range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn anchors(&self) -> EncoderAnchors {
        EncoderAnchors {
            enc_h_min: self.enc_h_min,
            enc_h_max: self.enc_h_max,
            enc_hover: self.enc_hover,
            enc_pressed: self.enc_pressed,
        }
    }

    fn entries(&self) -> [(&'static str, i64); 10] {
        [
            ("flex_min", self.flex_min),
            ("flex_max", self.flex_max),
            ("enc_h_min", self.enc_h_min),
            ("enc_h_max", self.enc_h_max),
            ("y_min", self.y_min),
            ("y_max", self.y_max),
            ("z_min", self.z_min),
            ("z_max", self.z_max),
            ("enc_hover", self.enc_hover),
            ("enc_pressed", self.enc_pressed),
        ]
    }

    /// One `name = integer` line per field.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map = parse_int_kv(text, &CALIBRATION_KEYS)?;
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::input(format!("calibration key `{k}` missing")));
        let set = Self {
            flex_min: get("flex_min")?,
            flex_max: get("flex_max")?,
            enc_h_min: get("enc_h_min")?,
            enc_h_max: get("enc_h_max")?,
            y_min: get("y_min")?,
            y_max: get("y_max")?,
            z_min: get("z_min")?,
            z_max: get("z_max")?,
            enc_hover: get("enc_hover")?,
            enc_pressed: get("enc_pressed")?,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text).map_err(|e| match e {
            Error::Input(reason) => Error::parse(path, reason),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv()).map_err(|e| Error::io(path, e))
    }
}

impl EncoderAnchors {
    pub fn to_kv(&self) -> String {
        format!(
            "enc_h_min = {}\nenc_h_max = {}\nenc_hover = {}\nenc_pressed = {}\n",
            self.enc_h_min, self.enc_h_max, self.enc_hover, self.enc_pressed
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map = parse_int_kv(text, &ANCHOR_KEYS)?;
        let get = |k: &str| map.get(k).copied().ok_or_else(|| Error::input(format!("anchor key `{k}` missing")));
        Ok(Self {
            enc_h_min: get("enc_h_min")?,
            enc_h_max: get("enc_h_max")?,
            enc_hover: get("enc_hover")?,
            enc_pressed: get("enc_pressed")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text).map_err(|e| match e {
            Error::Input(reason) => Error::parse(path, reason),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv()).map_err(|e| Error::io(path, e))
    }
}

fn parse_int_kv(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, i64>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::input(format!("line {}: expected `name = integer`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !allowed.contains(&k) {
            return Err(Error::input(format!("line {}: unknown key `{k}`", n + 1)));
        }
        let value: i64 = v.parse().map_err(|_| Error::input(format!("line {}: `{v}` is not an integer", n + 1)))?;
        if map.insert(k.to_string(), value).is_some() {
            return Err(Error::input(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(map)
}

/// Mean of the labelled samples, rounded to the nearest code.
fn labelled_mean(trace: &SensorTrace, label: &str, pick: impl Fn(&crate::sensors::SensorSample) -> u16) -> Result<i64> {
    let (sum, n) = trace
        .samples()
        .iter()
        .filter(|s| s.label.as_deref() == Some(label))
        .fold((0u64, 0u64), |(sum, n), s| (sum + u64::from(pick(s)), n + 1));
    if n == 0 {
        return Err(Error::CalibrationIncomplete { label: label.to_string() });
    }
    // Round half up in exact integer arithmetic.
    Ok(((2 * sum + n) / (2 * n)) as i64)
}

/// Sensor anchors from labelled trace segments, combined with the robot's
/// encoder anchors.
pub fn calibrate_from_trace(trace: &SensorTrace, anchors: &EncoderAnchors) -> Result<CalibrationSet> {
    for label in CALIBRATION_LABELS {
        if !trace.samples().iter().any(|s| s.label.as_deref() == Some(label)) {
            return Err(Error::CalibrationIncomplete { label: label.to_string() });
        }
    }
    let set = CalibrationSet {
        flex_min: labelled_mean(trace, "flex_min", |s| s.flex_adc)?,
        flex_max: labelled_mean(trace, "flex_max", |s| s.flex_adc)?,
        enc_h_min: anchors.enc_h_min,
        enc_h_max: anchors.enc_h_max,
        y_min: labelled_mean(trace, "foot_down", |s| s.acc_y_adc)?,
        y_max: labelled_mean(trace, "foot_up", |s| s.acc_y_adc)?,
        z_min: labelled_mean(trace, "z_rest", |s| s.acc_z_adc)?,
        z_max: labelled_mean(trace, "z_active", |s| s.acc_z_adc)?,
        enc_hover: anchors.enc_hover,
        enc_pressed: anchors.enc_pressed,
    };
    set.validate()?;
    Ok(set)
}

/// Horizontal position command from a flex reading.
pub fn horizontal_update(flex_adc: u16, calib: &CalibrationSet, params: &ControlParams, current_counts: i64) -> Result<AxisCommand> {
    let target = linear_map(
        f64::from(flex_adc),
        calib.flex_min as f64,
        calib.flex_max as f64,
        calib.enc_h_min as f64,
        calib.enc_h_max as f64,
    )?;
    let setpoint = target.round() as i64;
    let distance = (setpoint - current_counts).abs() as f64;
    Ok(AxisCommand::position(setpoint, (params.kp_h * distance).min(params.v_cap)))
}

/// Vertical position command from the foot's Y and Z readings.
pub fn vertical_update(acc_y_adc: u16, acc_z_adc: u16, calib: &CalibrationSet, params: &ControlParams) -> Result<AxisCommand> {
    let target = linear_map(
        f64::from(acc_y_adc),
        calib.y_min as f64,
        calib.y_max as f64,
        calib.enc_hover as f64,
        calib.enc_pressed as f64,
    )?;
    if calib.z_min == calib.z_max {
        return Err(Error::DegenerateCalibration { what: "z".into(), value: calib.z_min as f64 });
    }
    let lift = (f64::from(acc_z_adc) - calib.z_min as f64) / (calib.z_max - calib.z_min) as f64;
    let limit = (params.kv_z * lift).clamp(params.v_floor, params.v_cap);
    Ok(AxisCommand::position(target.round() as i64, limit))
}

//! Sensor models for the thumb flex sensor and the foot accelerometer, and the
//! timestamped trace of ADC codes that drives a simulation.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flex sensor resistance, linear in bend angle between two measured endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexSensorModel {
    /// kΩ when flat
    pub r_flat: f64,
    /// kΩ at full bend
    pub r_bent: f64,
    /// degrees of bend at which `r_bent` is reached
    pub angle_range: f64,
}

impl Default for FlexSensorModel {
    fn default() -> Self {
        Self { r_flat: 13.0, r_bent: 26.0, angle_range: 180.0 }
    }
}

impl FlexSensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_flat > 0.0) {
            return Err(Error::config("flex.r_flat", "must be positive"));
        }
        if !(self.r_bent > self.r_flat) {
            return Err(Error::config("flex.r_bent", "must exceed flex.r_flat"));
        }
        if !(self.angle_range > 0.0 && self.angle_range <= 180.0) {
            return Err(Error::config("flex.angle_range", "must be in (0, 180]"));
        }
        Ok(())
    }

    /// Resistance in kΩ at `bend_angle` degrees.
    pub fn resistance(&self, bend_angle: f64) -> Result<f64> {
        if !(0.0..=self.angle_range).contains(&bend_angle) {
            return Err(Error::input(format!(
                "bend angle {bend_angle} outside [0, {}] degrees",
                self.angle_range
            )));
        }
        Ok(self.r_flat + bend_angle / self.angle_range * (self.r_bent - self.r_flat))
    }

    /// Bend angle producing resistance `r` (inverse of [`Self::resistance`]).
    pub fn bend_for_resistance(&self, r: f64) -> Result<f64> {
        let angle = (r - self.r_flat) / (self.r_bent - self.r_flat) * self.angle_range;
        if !(0.0..=self.angle_range).contains(&angle) {
            return Err(Error::input(format!("resistance {r} kΩ outside the sensor's range")));
        }
        Ok(angle)
    }
}

/// Flex sensor in the upper leg of a divider, buffered and sampled by an ADC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DividerConfig {
    /// V
    pub vcc: f64,
    /// kΩ, lower leg
    pub r_fixed: f64,
    pub adc_bits: u32,
    /// V, ADC full-scale reference
    pub v_ref: f64,
}

impl Default for DividerConfig {
    fn default() -> Self {
        Self { vcc: 5.0, r_fixed: 20.0, adc_bits: 12, v_ref: 5.0 }
    }
}

impl DividerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vcc > 0.0) {
            return Err(Error::config("divider.vcc", "must be positive"));
        }
        if !(self.r_fixed > 0.0) {
            return Err(Error::config("divider.r_fixed", "must be positive"));
        }
        if !(8..=16).contains(&self.adc_bits) {
            return Err(Error::config("divider.adc_bits", "must be in [8, 16]"));
        }
        if !(self.v_ref > 0.0) {
            return Err(Error::config("divider.v_ref", "must be positive"));
        }
        Ok(())
    }

    pub fn full_scale(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }

    /// Buffered divider output for a flex resistance of `r_flex` kΩ.
    pub fn voltage(&self, r_flex: f64) -> Result<f64> {
        if !(r_flex > 0.0) {
            return Err(Error::input(format!("flex resistance must be positive, got {r_flex}")));
        }
        Ok(self.vcc * self.r_fixed / (r_flex + self.r_fixed))
    }

    /// Flex resistance that produces divider output `v`.
    pub fn resistance_for_voltage(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v < self.vcc) {
            return Err(Error::input(format!("divider voltage {v} outside (0, {})", self.vcc)));
        }
        Ok(self.r_fixed * (self.vcc / v - 1.0))
    }

    /// Clamp to `[0, v_ref]` and quantize, rounding halves up.
    pub fn quantize(&self, v: f64) -> u16 {
        let full = f64::from(self.full_scale());
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, self.v_ref) };
        let code = (v * full / self.v_ref + 0.5).floor();
        code.min(full) as u16
    }

    /// Voltage at the centre of an ADC code.
    pub fn code_voltage(&self, code: u16) -> f64 {
        f64::from(code) * self.v_ref / f64::from(self.full_scale())
    }
}

/// Free function forms, matching how the pipeline stages are usually named.
pub fn flex_resistance(bend_angle: f64, model: &FlexSensorModel) -> Result<f64> {
    model.resistance(bend_angle)
}

pub fn divider_voltage(r_flex: f64, cfg: &DividerConfig) -> Result<f64> {
    cfg.voltage(r_flex)
}

pub fn adc_quantize(v: f64, cfg: &DividerConfig) -> u16 {
    cfg.quantize(v)
}

/// Three-axis analog accelerometer strapped to the foot. Only Y (along the
/// foot) and Z (normal to the sole) are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelerometerModel {
    /// V/g
    pub sensitivity: f64,
    /// V
    pub zero_g_bias: f64,
    /// V, standard deviation of additive noise
    pub noise_sigma: f64,
}

impl Default for AccelerometerModel {
    fn default() -> Self {
        Self { sensitivity: 0.3, zero_g_bias: 1.5, noise_sigma: 0.0 }
    }
}

impl AccelerometerModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sensitivity > 0.0) {
            return Err(Error::config("accel.sensitivity", "must be positive"));
        }
        if !self.zero_g_bias.is_finite() {
            return Err(Error::config("accel.zero_g_bias", "must be finite"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::config("accel.noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// Noise-free `(v_y, v_z)` for a foot pitched up by `foot_pitch` degrees
    /// and accelerating along its sole normal by `dyn_accel` g.
    pub fn output(&self, foot_pitch: f64, dyn_accel: f64) -> Result<(f64, f64)> {
        if !(foot_pitch.abs() <= 90.0) {
            return Err(Error::input(format!("foot pitch {foot_pitch} outside [-90, 90] degrees")));
        }
        let p = foot_pitch.to_radians();
        let v_y = self.zero_g_bias + self.sensitivity * p.sin();
        let v_z = self.zero_g_bias + self.sensitivity * (p.cos() + dyn_accel);
        Ok((v_y, v_z))
    }

    /// As [`Self::output`], with zero-mean Gaussian noise drawn from `rng`
    /// when `noise_sigma > 0`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        foot_pitch: f64,
        dyn_accel: f64,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let (v_y, v_z) = self.output(foot_pitch, dyn_accel)?;
        if self.noise_sigma == 0.0 {
            return Ok((v_y, v_z));
        }
        let noise = Normal::new(0.0, self.noise_sigma).map_err(|e| Error::input(e.to_string()))?;
        Ok((v_y + noise.sample(rng), v_z + noise.sample(rng)))
    }
}

pub fn accel_output(foot_pitch: f64, dyn_accel: f64, model: &AccelerometerModel) -> Result<(f64, f64)> {
    model.output(foot_pitch, dyn_accel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSample {
    /// ms
    pub t: f64,
    pub flex_adc: u16,
    pub acc_y_adc: u16,
    pub acc_z_adc: u16,
    /// Calibration segment tag, if any.
    pub label: Option<String>,
}

/// Uniformly sampled, strictly time-ordered sensor readings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SensorTrace {
    samples: Vec<SensorSample>,
    sample_period: f64,
}

pub const TRACE_HEADER: [&str; 5] = ["t_ms", "flex_adc", "acc_y_adc", "acc_z_adc", "label"];

#[derive(Deserialize)]
struct TraceRow {
    t_ms: f64,
    flex_adc: u16,
    acc_y_adc: u16,
    acc_z_adc: u16,
    label: Option<String>,
}

impl SensorTrace {
    pub fn new(samples: Vec<SensorSample>, sample_period: f64) -> Result<Self> {
        let trace = Self { samples, sample_period };
        trace.check_timing()?;
        Ok(trace)
    }

    /// Build a trace inferring the sample period from the first two samples.
    pub fn from_samples(samples: Vec<SensorSample>) -> Result<Self> {
        let period = match samples.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 1.0,
        };
        Self::new(samples, period)
    }

    pub fn empty() -> Self {
        Self { samples: Vec::new(), sample_period: 1.0 }
    }

    pub fn samples(&self) -> &[SensorSample] {
        &self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    fn check_timing(&self) -> Result<()> {
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::input(format!("sample period must be positive, got {}", self.sample_period)));
        }
        if let Some(first) = self.samples.first() {
            if !(first.t >= 0.0) {
                return Err(Error::input(format!("negative timestamp {}", first.t)));
            }
        }
        let tol = 0.01 * self.sample_period;
        for (i, pair) in self.samples.windows(2).enumerate() {
            let dt = pair[1].t - pair[0].t;
            if !(dt > 0.0) {
                return Err(Error::input(format!("timestamps not strictly increasing at sample {}", i + 1)));
            }
            if (dt - self.sample_period).abs() > tol {
                return Err(Error::input(format!(
                    "non-uniform spacing at sample {}: {dt} ms vs period {} ms",
                    i + 1,
                    self.sample_period
                )));
            }
        }
        Ok(())
    }

    /// Check every code fits the ADC resolution.
    pub fn validate_codes(&self, adc: &DividerConfig) -> Result<()> {
        let full = adc.full_scale();
        for (i, s) in self.samples.iter().enumerate() {
            if s.flex_adc > full || s.acc_y_adc > full || s.acc_z_adc > full {
                return Err(Error::input(format!("sample {i}: ADC code above full scale {full}")));
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::input(format!("trace header: {e}")))?;
        if headers.iter().ne(TRACE_HEADER.iter().copied()) {
            return Err(Error::input(format!("trace header must be `{}`", TRACE_HEADER.join(","))));
        }
        let mut samples = Vec::new();
        for (line, row) in rdr.deserialize::<TraceRow>().enumerate() {
            let row = row.map_err(|e| Error::input(format!("trace row {}: {e}", line + 1)))?;
            samples.push(SensorSample {
                t: row.t_ms,
                flex_adc: row.flex_adc,
                acc_y_adc: row.acc_y_adc,
                acc_z_adc: row.acc_z_adc,
                label: row.label.filter(|l| !l.is_empty()),
            });
        }
        Self::from_samples(samples)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file).map_err(|e| match e {
            Error::Input(reason) => Error::parse(path, reason),
            other => other,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let map = |e: csv::Error| Error::Runtime(format!("writing trace: {e}"));
        wtr.write_record(TRACE_HEADER).map_err(map)?;
        for s in &self.samples {
            wtr.write_record([
                s.t.to_string(),
                s.flex_adc.to_string(),
                s.acc_y_adc.to_string(),
                s.acc_z_adc.to_string(),
                s.label.clone().unwrap_or_default(),
            ])
            .map_err(map)?;
        }
        wtr.flush().map_err(|e| Error::Runtime(format!("writing trace: {e}")))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

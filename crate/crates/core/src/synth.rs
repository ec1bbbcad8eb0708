//! Scripted sensor traces and direction fixtures.
//!
//! Every trace is rendered through the sensor models, so the codes it
//! contains are what the ADC would read for the scripted thumb and foot
//! motion.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::DirectionSet;
use crate::config::GlobalConfig;
use crate::control::{calibrate_from_trace, CalibrationSet, EncoderAnchors};
use crate::error::{Error, Result};
use crate::kinematics::theta_for_key;
use crate::piano::KeyColor;
use crate::sensors::{SensorSample, SensorTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub sample_period_ms: f64,
    /// key the straight thumb points at
    pub near_key: usize,
    /// key the fully flexed thumb points at
    pub far_key: usize,
    /// degrees of thumb flexion held during the `flex_max` segment
    pub thumb_flexed_deg: f64,
    /// degrees of foot pitch with the toes raised
    pub foot_up_pitch: f64,
    /// g of lift acceleration during the `z_active` segment
    pub lift_accel_g: f64,
    /// length of each labelled calibration segment
    pub segment_ms: f64,
    /// time for the finger to settle over the key before the first press
    pub settle_ms: f64,
    /// length of the acceleration burst when the foot moves
    pub lift_ms: f64,
    /// time the toes stay raised
    pub hold_ms: f64,
    /// press repetition period
    pub cycle_ms: f64,
    /// time per note in a scale run
    pub note_ms: f64,
    /// fraction of `lift_accel_g` used when no speed is given
    pub default_speed: f64,
    /// flex noise in ADC codes
    pub flex_noise: f64,
    /// half-height of the device's sweep band, degrees of elevation
    pub band_elevation: f64,
    /// half-angle of the thumb's workspace cap, degrees
    pub thumb_cap_half_angle: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_period_ms: 1.0,
            near_key: 39,
            far_key: 44,
            thumb_flexed_deg: 150.0,
            foot_up_pitch: 30.0,
            lift_accel_g: 1.0,
            segment_ms: 200.0,
            settle_ms: 600.0,
            lift_ms: 60.0,
            hold_ms: 200.0,
            cycle_ms: 500.0,
            note_ms: 800.0,
            default_speed: 0.8,
            flex_noise: 0.0,
            band_elevation: 60.0,
            thumb_cap_half_angle: 54.9,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("synth.sample_period_ms", self.sample_period_ms),
            ("synth.thumb_flexed_deg", self.thumb_flexed_deg),
            ("synth.foot_up_pitch", self.foot_up_pitch),
            ("synth.lift_accel_g", self.lift_accel_g),
            ("synth.segment_ms", self.segment_ms),
            ("synth.lift_ms", self.lift_ms),
            ("synth.hold_ms", self.hold_ms),
            ("synth.cycle_ms", self.cycle_ms),
            ("synth.note_ms", self.note_ms),
            ("synth.thumb_cap_half_angle", self.thumb_cap_half_angle),
            ("synth.band_elevation", self.band_elevation),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.settle_ms >= 0.0) {
            return Err(Error::config("synth.settle_ms", "must be non-negative"));
        }
        if !(self.hold_ms >= self.lift_ms && self.hold_ms + self.lift_ms <= self.cycle_ms) {
            return Err(Error::config("synth.hold_ms", "must cover the lift burst and fit in the cycle"));
        }
        if !(self.default_speed > 0.0 && self.default_speed <= 1.0) {
            return Err(Error::config("synth.default_speed", "must be in (0, 1]"));
        }
        if !(self.flex_noise >= 0.0) {
            return Err(Error::config("synth.flex_noise", "must be non-negative"));
        }
        if self.band_elevation > 90.0 {
            return Err(Error::config("synth.band_elevation", "must be at most 90"));
        }
        if self.thumb_cap_half_angle > 180.0 {
            return Err(Error::config("synth.thumb_cap_half_angle", "must be at most 180"));
        }
        if self.near_key == self.far_key {
            return Err(Error::config("synth.far_key", "must differ from synth.near_key"));
        }
        Ok(())
    }
}

/// Encoder anchors the robot records while the finger is jogged over the
/// near and far keys and pressed down once.
pub fn anchors_for(cfg: &GlobalConfig) -> Result<EncoderAnchors> {
    let layout = cfg.keyboard()?;
    let key = |index: usize, name: &str| {
        layout
            .key(index)
            .ok_or_else(|| Error::config(format!("synth.{name}"), format!("no key {index} on the keyboard")))
    };
    let near = key(cfg.synth.near_key, "near_key")?;
    let far = key(cfg.synth.far_key, "far_key")?;
    let counts_h = |x: f64| -> Result<i64> {
        let theta = theta_for_key(x, &cfg.mount, &cfg.geometry)?;
        Ok(cfg.axis_h.encoder_counts(theta - cfg.mount.home_theta_h))
    };
    // Fully pressed: the tip sits at the bottom of the key's travel.
    let pressed = cfg.geometry.theta_v_for_drop(cfg.mount.base_z + layout.config().key_travel)?;
    Ok(EncoderAnchors {
        enc_h_min: counts_h(near.center_x)?,
        enc_h_max: counts_h(far.center_x)?,
        enc_hover: 0,
        enc_pressed: cfg.axis_v.encoder_counts(pressed - cfg.mount.home_theta_v),
    })
}

/// What the thumb and foot are doing at one instant.
#[derive(Debug, Clone, Copy)]
struct Pose {
    flex_code: Option<f64>,
    thumb_deg: f64,
    pitch_deg: f64,
    dyn_g: f64,
}

impl Pose {
    fn rest() -> Self {
        Self { flex_code: None, thumb_deg: 0.0, pitch_deg: 0.0, dyn_g: 0.0 }
    }
}

struct Renderer<'a> {
    cfg: &'a GlobalConfig,
    rng: ChaCha8Rng,
    flex_noise: Option<Normal<f64>>,
}

impl<'a> Renderer<'a> {
    fn new(cfg: &'a GlobalConfig, seed: u64, flex_noise: f64) -> Result<Self> {
        if !(flex_noise >= 0.0) {
            return Err(Error::input(format!("flex noise must be non-negative, got {flex_noise}")));
        }
        let flex_noise = if flex_noise > 0.0 {
            Some(Normal::new(0.0, flex_noise).map_err(|e| Error::input(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { cfg, rng: ChaCha8Rng::seed_from_u64(seed), flex_noise })
    }

    fn sample(&mut self, t: f64, pose: Pose, label: Option<&str>) -> Result<SensorSample> {
        let div = &self.cfg.divider;
        let full = f64::from(div.full_scale());
        let flex = match pose.flex_code {
            Some(code) => code,
            None => {
                let r = self.cfg.flex.resistance(pose.thumb_deg)?;
                f64::from(div.quantize(div.voltage(r)?))
            }
        };
        let noise = self.flex_noise.map_or(0.0, |n| n.sample(&mut self.rng));
        let flex_adc = (flex + noise + 0.5).floor().clamp(0.0, full) as u16;
        let (vy, vz) = self.cfg.accel.sample(pose.pitch_deg, pose.dyn_g, &mut self.rng)?;
        Ok(SensorSample {
            t,
            flex_adc,
            acc_y_adc: div.quantize(vy),
            acc_z_adc: div.quantize(vz),
            label: label.map(str::to_string),
        })
    }
}

fn sample_times(period: f64, end: f64) -> impl Iterator<Item = f64> {
    let n = (end / period).round() as usize;
    (0..n).map(move |i| i as f64 * period)
}

/// Six labelled segments, one per calibration quantity.
pub fn calibration_trace(cfg: &GlobalConfig, seed: u64) -> Result<SensorTrace> {
    let s = &cfg.synth;
    let segments = [
        ("flex_min", Pose::rest()),
        ("flex_max", Pose { thumb_deg: s.thumb_flexed_deg, ..Pose::rest() }),
        ("foot_down", Pose::rest()),
        ("foot_up", Pose { pitch_deg: s.foot_up_pitch, ..Pose::rest() }),
        ("z_rest", Pose::rest()),
        ("z_active", Pose { dyn_g: s.lift_accel_g, ..Pose::rest() }),
    ];
    let mut r = Renderer::new(cfg, seed, 0.0)?;
    let mut samples = Vec::new();
    for t in sample_times(s.sample_period_ms, s.segment_ms * segments.len() as f64) {
        let seg = ((t / s.segment_ms) as usize).min(segments.len() - 1);
        let (label, pose) = segments[seg];
        samples.push(r.sample(t, pose, Some(label))?);
    }
    SensorTrace::new(samples, s.sample_period_ms)
}

/// Calibration recorded from the noise-free calibration script.
pub fn default_calibration(cfg: &GlobalConfig) -> Result<CalibrationSet> {
    let quiet = GlobalConfig { accel: crate::sensors::AccelerometerModel { noise_sigma: 0.0, ..cfg.accel.clone() }, ..cfg.clone() };
    calibrate_from_trace(&calibration_trace(&quiet, 0)?, &anchors_for(cfg)?)
}

/// Flex code (fractional) that the calibrated map sends to `key`.
pub fn flex_code_for_key(cfg: &GlobalConfig, calib: &CalibrationSet, key: usize) -> Result<f64> {
    let layout = cfg.keyboard()?;
    let k = layout.key(key).ok_or_else(|| Error::input(format!("no key {key} on the keyboard")))?;
    let theta = theta_for_key(k.center_x, &cfg.mount, &cfg.geometry)?;
    let counts = cfg.axis_h.encoder_counts(theta - cfg.mount.home_theta_h);
    let (lo, hi) = (calib.enc_h_min.min(calib.enc_h_max), calib.enc_h_min.max(calib.enc_h_max));
    if !(lo..=hi).contains(&counts) {
        return Err(Error::input(format!(
            "key {key} ({}) needs {counts} counts, outside the calibrated span [{lo}, {hi}]",
            k.note_name()
        )));
    }
    let frac = (counts - calib.enc_h_min) as f64 / (calib.enc_h_max - calib.enc_h_min) as f64;
    Ok(calib.flex_min as f64 + frac * (calib.flex_max - calib.flex_min) as f64)
}

/// One scripted key press.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gesture {
    pub key: usize,
    /// fraction of the full lift acceleration, in (0, 1]
    pub speed: f64,
    /// ms at which the thumb starts pointing at the key
    pub aim_at: f64,
    /// ms at which the toes come up
    pub lift_at: f64,
}

/// Render a gesture script. Before the first gesture the thumb is straight.
pub fn render_gestures(
    cfg: &GlobalConfig,
    calib: &CalibrationSet,
    gestures: &[Gesture],
    end_ms: f64,
    flex_noise: f64,
    seed: u64,
) -> Result<SensorTrace> {
    let s = &cfg.synth;
    let mut aims = Vec::with_capacity(gestures.len());
    for g in gestures {
        if !(g.speed > 0.0 && g.speed <= 1.0) {
            return Err(Error::input(format!("press speed must be in (0, 1], got {}", g.speed)));
        }
        aims.push(flex_code_for_key(cfg, calib, g.key)?);
    }
    let mut r = Renderer::new(cfg, seed, flex_noise)?;
    let cos_up = s.foot_up_pitch.to_radians().cos();

    let mut samples = Vec::new();
    for t in sample_times(s.sample_period_ms, end_ms) {
        let mut pose = Pose::rest();
        if let Some(i) = gestures.iter().rposition(|g| g.aim_at <= t) {
            pose.flex_code = Some(aims[i]);
        }
        for g in gestures {
            let up = t >= g.lift_at && t < g.lift_at + s.hold_ms;
            let drop_at = g.lift_at + s.hold_ms;
            let burst = (t >= g.lift_at && t < g.lift_at + s.lift_ms) || (t >= drop_at && t < drop_at + s.lift_ms);
            if up {
                pose.pitch_deg = s.foot_up_pitch;
            }
            if burst {
                // Gravity's share of Z is cancelled so Z reads the same lift
                // level whatever the foot's pitch.
                let cos_now = if up { cos_up } else { 1.0 };
                pose.dyn_g = 1.0 - cos_now + g.speed * s.lift_accel_g;
            }
        }
        samples.push(r.sample(t, pose, None)?);
    }
    SensorTrace::new(samples, s.sample_period_ms)
}

/// `count` presses of one key at a fixed speed.
pub fn press_trace(
    cfg: &GlobalConfig,
    calib: &CalibrationSet,
    key: usize,
    speed: f64,
    count: usize,
    flex_noise: f64,
    seed: u64,
) -> Result<SensorTrace> {
    if count == 0 {
        return Err(Error::input("press count must be at least 1"));
    }
    let s = &cfg.synth;
    let gestures: Vec<Gesture> = (0..count)
        .map(|i| Gesture { key, speed, aim_at: 0.0, lift_at: s.settle_ms + i as f64 * s.cycle_ms })
        .collect();
    render_gestures(cfg, calib, &gestures, s.settle_ms + count as f64 * s.cycle_ms, flex_noise, seed)
}

/// White keys from the near key to the far key, one press each.
pub fn scale_keys(cfg: &GlobalConfig) -> Result<Vec<usize>> {
    let layout = cfg.keyboard()?;
    let (a, b) = (cfg.synth.near_key.min(cfg.synth.far_key), cfg.synth.near_key.max(cfg.synth.far_key));
    Ok((a..=b).filter(|&i| layout.key(i).is_some_and(|k| k.color == KeyColor::White)).collect())
}

pub fn scale_trace(cfg: &GlobalConfig, calib: &CalibrationSet, flex_noise: f64, seed: u64) -> Result<SensorTrace> {
    let s = &cfg.synth;
    let keys = scale_keys(cfg)?;
    let gestures: Vec<Gesture> = keys
        .iter()
        .enumerate()
        .map(|(i, &key)| {
            let start = i as f64 * s.note_ms;
            Gesture { key, speed: s.default_speed, aim_at: start, lift_at: start + 0.5 * s.note_ms }
        })
        .collect();
    render_gestures(cfg, calib, &gestures, keys.len() as f64 * s.note_ms, flex_noise, seed)
}

/// Uniform directions with elevation in `[-elevation, elevation]` over the
/// full azimuth.
pub fn band_sweep(n: usize, elevation: f64, seed: u64) -> Result<DirectionSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zmax = elevation.to_radians().sin();
    let dirs = (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-zmax..=zmax);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).sqrt();
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect();
    DirectionSet::new(dirs)
}

/// Uniform directions within `half_angle` degrees of the +x axis.
pub fn thumb_cap(n: usize, half_angle: f64, seed: u64) -> Result<DirectionSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cmin = half_angle.to_radians().cos();
    let dirs = (0..n)
        .map(|_| {
            let c: f64 = rng.random_range(cmin..=1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let s = (1.0 - c * c).sqrt();
            [c, s * phi.cos(), s * phi.sin()]
        })
        .collect();
    DirectionSet::new(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::CALIBRATION_LABELS;

    #[test]
    fn default_anchors() {
        let a = anchors_for(&GlobalConfig::default()).unwrap();
        assert_eq!(a.enc_hover, 0);
        // Oracle: hover angle over each key from the law of cosines on x.
        let counts = |x: f64| {
            let theta = ((x - 520.0) / 123.25f64).acos().to_degrees();
            ((theta - 90.0) * 16384.0 / 360.0).round() as i64
        };
        assert_eq!(a.enc_h_min, counts(552.25));
        assert_eq!(a.enc_h_max, counts(622.75));
        assert!((a.enc_h_min + 690).abs() <= 2 && (a.enc_h_max + 2570).abs() <= 2);
        // About 8.7 degrees down lowers the tip by the full key travel.
        assert!((a.enc_pressed - 397).abs() <= 2, "{}", a.enc_pressed);
    }

    #[test]
    fn calibration_trace_has_every_label() {
        let trace = calibration_trace(&GlobalConfig::default(), 1).unwrap();
        for label in CALIBRATION_LABELS {
            assert!(trace.samples().iter().any(|s| s.label.as_deref() == Some(label)), "{label}");
        }
        let c = default_calibration(&GlobalConfig::default()).unwrap();
        assert_eq!((c.flex_min, c.y_min, c.y_max, c.z_min, c.z_max), (2482, 1229, 1351, 1474, 1720));
        assert!((c.flex_max - 1869).abs() <= 1);
    }

    #[test]
    fn press_trace_shape() {
        let cfg = GlobalConfig::default();
        let calib = default_calibration(&cfg).unwrap();
        let trace = press_trace(&cfg, &calib, 40, 0.8, 2, 0.0, 1).unwrap();
        assert_eq!(trace.len(), 1600);
        let at = |t: usize| &trace.samples()[t];
        assert_eq!(at(599).acc_y_adc, 1229);
        assert_eq!(at(600).acc_y_adc, 1351);
        // Z during the lift burst sits at 80% of the calibrated span.
        let expect = 1474.0 + 0.8 * (1720.0 - 1474.0);
        assert!((f64::from(at(600).acc_z_adc) - expect).abs() <= 1.0);
        assert_eq!(at(800).acc_y_adc, 1229);
        assert!(f64::from(at(800).acc_z_adc) > 1474.0 + 40.0);
        assert_eq!(at(1100).acc_y_adc, 1351);
        let flex = flex_code_for_key(&cfg, &calib, 40).unwrap();
        assert!((f64::from(at(0).flex_adc) - flex).abs() <= 0.5);
    }

    #[test]
    fn unreachable_keys_are_rejected() {
        let cfg = GlobalConfig::default();
        let calib = default_calibration(&cfg).unwrap();
        assert!(press_trace(&cfg, &calib, 20, 0.8, 1, 0.0, 1).is_err());
        assert!(press_trace(&cfg, &calib, 40, 1.5, 1, 0.0, 1).is_err());
        assert!(press_trace(&cfg, &calib, 40, 0.8, 0, 0.0, 1).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = GlobalConfig::default();
        let calib = default_calibration(&cfg).unwrap();
        let a = press_trace(&cfg, &calib, 40, 0.8, 1, 2.0, 9).unwrap();
        let b = press_trace(&cfg, &calib, 40, 0.8, 1, 2.0, 9).unwrap();
        let c = press_trace(&cfg, &calib, 40, 0.8, 1, 2.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn scale_covers_white_keys() {
        assert_eq!(scale_keys(&GlobalConfig::default()).unwrap(), vec![39, 41, 43, 44]);
    }

    #[test]
    fn direction_fixtures_stay_in_their_regions() {
        let band = band_sweep(5_000, 60.0, 1).unwrap();
        let lim = 60f64.to_radians().sin();
        assert!(band.dirs().iter().all(|d| d[2].abs() <= lim + 1e-12));
        let cap = thumb_cap(5_000, 54.9, 2).unwrap();
        let cmin = 54.9f64.to_radians().cos();
        assert!(cap.dirs().iter().all(|d| d[0] >= cmin - 1e-12));
    }
}

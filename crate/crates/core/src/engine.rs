//! Fixed-timestep simulation of the full sensing-to-actuation loop.
//!
//! Every tick the stepper
//! 1. exposes the trace sample that has made it through the sensor and ADC
//!    transport stages,
//! 2. runs the horizontal and vertical control laws on it and queues the
//!    resulting commands behind the compute, command-transport,
//!    controller and mechanical stages,
//! 3. activates whatever commands are due, advances both axes, and
//! 4. emits key events when the fingertip crosses the half-travel plane.
//!
//! Delays are whole ticks. A command whose due tick is `k` drives the axis
//! over the interval that ends at tick `k`, so with zero delays and an
//! unconstrained plant a key-on lands on the same tick as the sample that
//! caused it.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::control::{horizontal_update, vertical_update, CalibrationSet, ControlParams};
use crate::error::{Error, Result};
use crate::kinematics::{tip_in_keyboard, FingerGeometry, JointState, MountPose};
use crate::piano::{note_name, KeyEvent, KeyEventKind, KeyboardLayout};
use crate::plant::{axis_step, AxisCommand, AxisState, MotorAxis};
use crate::sensors::{SensorSample, SensorTrace};

/// Per-stage transport delays in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyConfig {
    pub sensor_sample: f64,
    pub adc_transport: f64,
    pub compute: f64,
    pub command_transport: f64,
    pub controller_process: f64,
    pub mech_motion: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            sensor_sample: 5.0,
            adc_transport: 10.0,
            compute: 5.0,
            command_transport: 10.0,
            controller_process: 5.0,
            mech_motion: 50.0,
        }
    }
}

impl LatencyConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("latency.sensor_sample", self.sensor_sample),
            ("latency.adc_transport", self.adc_transport),
            ("latency.compute", self.compute),
            ("latency.command_transport", self.command_transport),
            ("latency.controller_process", self.controller_process),
            ("latency.mech_motion", self.mech_motion),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Delay before a sample reaches the control software.
    pub fn upstream(&self) -> f64 {
        self.sensor_sample + self.adc_transport
    }

    /// Delay from the control software to motion at the joint.
    pub fn downstream(&self) -> f64 {
        self.compute + self.command_transport + self.controller_process + self.mech_motion
    }

    pub fn non_mechanical(&self) -> f64 {
        self.upstream() + self.compute + self.command_transport + self.controller_process
    }

    pub fn total(&self) -> f64 {
        self.upstream() + self.downstream()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Deterministic,
    Concurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// ms
    pub timestep: f64,
    pub seed: u64,
    pub mode: Mode,
    /// ms simulated past the last sample's arrival at the joints
    pub tail_ms: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { timestep: 1.0, seed: 42, mode: Mode::Deterministic, tail_ms: 300.0 }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(Error::config("simulation.timestep", "must be positive"));
        }
        if !(self.tail_ms >= 0.0) {
            return Err(Error::config("simulation.tail_ms", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRecord {
    pub intention_t: f64,
    pub action_t: f64,
}

impl LatencyRecord {
    pub fn delay(&self) -> f64 {
        self.action_t - self.intention_t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub theta_h_counts: i64,
    pub theta_v_counts: i64,
    pub tip_x: f64,
    pub tip_z: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub key_events: Vec<KeyEvent>,
    pub latency: Vec<LatencyRecord>,
    /// Lift onsets detected on the raw Z signal, ms.
    pub intentions: Vec<f64>,
    /// Times at which the fingertip went through the press plane over no key.
    pub air_presses: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

pub const EVENT_HEADER: &str = "t_ms,kind,key_index,note_name,velocity";
pub const STEP_HEADER: &str = "t_ms,theta_h_counts,theta_v_counts,tip_x,tip_z";
pub const LATENCY_HEADER: &str = "intention_t_ms,action_t_ms,delay_ms";

impl EventLog {
    pub fn is_empty(&self) -> bool {
        self.key_events.is_empty() && self.latency.is_empty() && self.intentions.is_empty() && self.air_presses.is_empty()
    }

    pub fn key_ons(&self) -> impl Iterator<Item = &KeyEvent> {
        self.key_events.iter().filter(|e| e.kind == KeyEventKind::On)
    }

    pub fn events_csv(&self) -> String {
        let mut out = format!("{EVENT_HEADER}\n");
        for e in &self.key_events {
            let name = note_name(crate::piano::LOWEST_MIDI_NOTE + e.key_index as u8);
            let _ = writeln!(out, "{:.3},{},{},{},{}", e.t, e.kind.as_str(), e.key_index, name, e.velocity);
        }
        out
    }

    pub fn steps_csv(&self) -> String {
        let mut out = format!("{STEP_HEADER}\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{:.3},{},{},{:.4},{:.4}",
                s.t, s.theta_h_counts, s.theta_v_counts, s.tip_x, s.tip_z
            );
        }
        out
    }

    pub fn latency_csv(&self) -> String {
        let mut out = format!("{LATENCY_HEADER}\n");
        for r in &self.latency {
            let _ = writeln!(out, "{:.3},{:.3},{:.3}", r.intention_t, r.action_t, r.delay());
        }
        out
    }

    /// Parse the key-event CSV written by [`Self::events_csv`].
    pub fn parse_events_csv(text: &str) -> Result<Vec<KeyEvent>> {
        let mut lines = text.lines();
        if lines.next() != Some(EVENT_HEADER) {
            return Err(Error::input(format!("event log header must be `{EVENT_HEADER}`")));
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let bad = || Error::input(format!("event row {}: `{line}`", i + 1));
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad());
                }
                let kind = match f[1] {
                    "on" => KeyEventKind::On,
                    "off" => KeyEventKind::Off,
                    _ => return Err(bad()),
                };
                Ok(KeyEvent {
                    t: f[0].parse().map_err(|_| bad())?,
                    kind,
                    key_index: f[2].parse().map_err(|_| bad())?,
                    velocity: f[4].parse().map_err(|_| bad())?,
                })
            })
            .collect()
    }

    /// Parse the latency CSV written by [`Self::latency_csv`].
    pub fn parse_latency_csv(text: &str) -> Result<Vec<LatencyRecord>> {
        let mut lines = text.lines();
        if lines.next() != Some(LATENCY_HEADER) {
            return Err(Error::input(format!("latency header must be `{LATENCY_HEADER}`")));
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let bad = || Error::input(format!("latency row {}: `{line}`", i + 1));
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 3 {
                    return Err(bad());
                }
                let record = LatencyRecord {
                    intention_t: f[0].parse().map_err(|_| bad())?,
                    action_t: f[1].parse().map_err(|_| bad())?,
                };
                if record.action_t < record.intention_t {
                    return Err(Error::input(format!("latency row {}: action before intention", i + 1)));
                }
                Ok(record)
            })
            .collect()
    }
}

/// Velocity byte for a press arriving at `angular_speed` deg/s.
pub fn midi_velocity(angular_speed: f64, v_cap: f64) -> u8 {
    let v = (127.0 * angular_speed.max(0.0) / v_cap + 0.5).floor();
    v.clamp(1.0, 127.0) as u8
}

/// Lift onsets: upward crossings of `z_min + z_threshold` (in the direction of
/// `z_max`), ignoring crossings within `refractory_ms` of the previous onset.
pub fn intention_detect(stream: &[(f64, u16)], calib: &CalibrationSet, params: &ControlParams) -> Vec<f64> {
    let dir = if calib.z_max >= calib.z_min { 1.0 } else { -1.0 };
    let threshold = calib.z_min as f64 + dir * params.z_threshold;
    let above = |z: u16| dir * (f64::from(z) - threshold) >= 0.0;

    let mut out: Vec<f64> = Vec::new();
    for pair in stream.windows(2) {
        let ((_, z0), (t1, z1)) = (pair[0], pair[1]);
        if !above(z0) && above(z1) {
            let clear = out.last().is_none_or(|&last| t1 - last >= params.refractory_ms);
            if clear {
                out.push(t1);
            }
        }
    }
    out
}

/// Everything physical about the instrument and the device.
#[derive(Debug, Clone)]
pub struct Rig {
    pub layout: KeyboardLayout,
    pub geometry: FingerGeometry,
    pub mount: MountPose,
    pub axis_h: MotorAxis,
    pub axis_v: MotorAxis,
    pub params: ControlParams,
}

impl Rig {
    /// Tip height below which a key counts as struck: half way down its travel.
    pub fn press_plane(&self) -> f64 {
        -0.5 * self.layout.config().key_travel
    }

    pub fn joints(&self, h: &AxisState, v: &AxisState) -> JointState {
        JointState { theta_h: self.mount.home_theta_h + h.angle, theta_v: self.mount.home_theta_v + v.angle }
    }

    /// Encoder-count span of each joint's mechanical range.
    pub fn count_ranges(&self) -> ((i64, i64), (i64, i64)) {
        let g = &self.geometry;
        let m = &self.mount;
        let h = (
            self.axis_h.encoder_counts(g.theta_h_min - m.home_theta_h),
            self.axis_h.encoder_counts(g.theta_h_max - m.home_theta_h),
        );
        let v = (
            self.axis_v.encoder_counts(g.theta_v_min - m.home_theta_v),
            self.axis_v.encoder_counts(g.theta_v_max - m.home_theta_v),
        );
        (h, v)
    }
}

#[derive(Clone, Copy)]
struct Tagged {
    due: usize,
    cmd: AxisCommand,
}

/// Index of the newest sample visible at each tick, computed once.
fn visible_samples(trace: &SensorTrace, t0: f64, dt: f64, up_ticks: usize, n_ticks: usize) -> Vec<Option<usize>> {
    let samples = trace.samples();
    let mut out = Vec::with_capacity(n_ticks);
    let mut cursor: Option<usize> = None;
    for k in 0..n_ticks {
        if k < up_ticks {
            out.push(None);
            continue;
        }
        let horizon = t0 + (k - up_ticks) as f64 * dt + 1e-9;
        let mut next = cursor.map_or(0, |c| c + 1);
        while next < samples.len() && samples[next].t <= horizon {
            cursor = Some(next);
            next += 1;
        }
        out.push(cursor);
    }
    out
}

fn ticks(ms: f64, dt: f64) -> usize {
    (ms / dt).round() as usize
}

struct Stepper<'a> {
    rig: &'a Rig,
    dt: f64,
    t0: f64,
    down_ticks: usize,
    h: AxisState,
    v: AxisState,
    active_h: AxisCommand,
    active_v: AxisCommand,
    queue_h: VecDeque<Tagged>,
    queue_v: VecDeque<Tagged>,
    pressed: bool,
    held_key: Option<usize>,
    log: EventLog,
    record_steps: bool,
}

impl<'a> Stepper<'a> {
    fn new(rig: &'a Rig, dt: f64, t0: f64, down_ticks: usize, record_steps: bool) -> Self {
        let h = AxisState::enabled();
        let v = AxisState::enabled();
        Self {
            rig,
            dt,
            t0,
            down_ticks,
            h,
            v,
            active_h: AxisCommand::hold(&h),
            active_v: AxisCommand::hold(&v),
            queue_h: VecDeque::new(),
            queue_v: VecDeque::new(),
            pressed: false,
            held_key: None,
            log: EventLog::default(),
            record_steps,
        }
    }

    /// Merge this tick's commands: horizontal first, then vertical.
    fn enqueue(&mut self, k: usize, h: Option<AxisCommand>, v: Option<AxisCommand>) {
        let due = k + self.down_ticks;
        if let Some(cmd) = h {
            self.queue_h.push_back(Tagged { due, cmd });
        }
        if let Some(cmd) = v {
            self.queue_v.push_back(Tagged { due, cmd });
        }
    }

    fn tick(&mut self, k: usize) -> Result<()> {
        while self.queue_h.front().is_some_and(|c| c.due <= k) {
            self.active_h = self.queue_h.pop_front().map(|c| c.cmd).unwrap_or(self.active_h);
        }
        while self.queue_v.front().is_some_and(|c| c.due <= k) {
            self.active_v = self.queue_v.pop_front().map(|c| c.cmd).unwrap_or(self.active_v);
        }
        self.h = axis_step(&self.h, &self.active_h, self.dt, &self.rig.axis_h)?;
        self.v = axis_step(&self.v, &self.active_v, self.dt, &self.rig.axis_v)?;

        let t = self.t0 + k as f64 * self.dt;
        let tip = tip_in_keyboard(self.rig.joints(&self.h, &self.v), &self.rig.geometry, &self.rig.mount);
        let now_pressed = tip.z <= self.rig.press_plane();

        if now_pressed && !self.pressed {
            match self.rig.layout.key_at(tip.x, tip.depth) {
                Some(key) => {
                    let velocity = midi_velocity(self.v.velocity.abs(), self.rig.params.v_cap);
                    self.log.key_events.push(KeyEvent { t, kind: KeyEventKind::On, key_index: key.index, velocity });
                    self.held_key = Some(key.index);
                }
                None => self.log.air_presses.push(t),
            }
        } else if !now_pressed && self.pressed {
            if let Some(key_index) = self.held_key.take() {
                self.log.key_events.push(KeyEvent { t, kind: KeyEventKind::Off, key_index, velocity: 0 });
            }
        }
        self.pressed = now_pressed;

        if self.record_steps {
            self.log.steps.push(StepRecord {
                t,
                theta_h_counts: self.h.encoder_count,
                theta_v_counts: self.v.encoder_count,
                tip_x: tip.x,
                tip_z: tip.z,
            });
        }
        Ok(())
    }
}

fn horizontal_command(s: &SensorSample, calib: &CalibrationSet, params: &ControlParams, counts: i64) -> Result<AxisCommand> {
    horizontal_update(s.flex_adc, calib, params, counts)
}

fn vertical_command(s: &SensorSample, calib: &CalibrationSet, params: &ControlParams) -> Result<AxisCommand> {
    vertical_update(s.acc_y_adc, s.acc_z_adc, calib, params)
}

/// Pair each intention with the first key-on at or after it and before the
/// next intention.
fn pair_latencies(intentions: &[f64], events: &[KeyEvent]) -> Vec<LatencyRecord> {
    let ons: Vec<f64> = events.iter().filter(|e| e.kind == KeyEventKind::On).map(|e| e.t).collect();
    let mut out = Vec::new();
    for (i, &intent) in intentions.iter().enumerate() {
        let next = intentions.get(i + 1).copied().unwrap_or(f64::INFINITY);
        if let Some(&action) = ons.iter().find(|&&t| t >= intent && t < next) {
            out.push(LatencyRecord { intention_t: intent, action_t: action });
        }
    }
    out
}

/// Run a trace through the rig.
pub fn run(
    trace: &SensorTrace,
    calib: &CalibrationSet,
    rig: &Rig,
    latency: &LatencyConfig,
    sim: &SimulationConfig,
    record_steps: bool,
) -> Result<EventLog> {
    sim.validate()?;
    latency.validate()?;
    calib.validate()?;
    let (h_range, v_range) = rig.count_ranges();
    calib.validate_ranges(h_range, v_range)?;
    if trace.is_empty() {
        return Ok(EventLog::default());
    }

    let dt = sim.timestep;
    let samples = trace.samples();
    let t0 = samples[0].t;
    let t_last = samples[samples.len() - 1].t;
    let up_ticks = ticks(latency.upstream(), dt);
    let down_ticks = ticks(latency.downstream(), dt);
    let n_ticks = ((t_last - t0 + latency.total() + sim.tail_ms) / dt).ceil() as usize + 1;
    let visible = visible_samples(trace, t0, dt, up_ticks, n_ticks);

    let mut stepper = Stepper::new(rig, dt, t0, down_ticks, record_steps);
    match sim.mode {
        Mode::Deterministic => {
            for (k, seen) in visible.iter().enumerate() {
                let (h, v) = match seen {
                    Some(i) => {
                        let s = &samples[*i];
                        let h = horizontal_command(s, calib, &rig.params, stepper.h.encoder_count)?;
                        let v = vertical_command(s, calib, &rig.params)?;
                        (Some(h), Some(v))
                    }
                    None => (None, None),
                };
                stepper.enqueue(k, h, v);
                stepper.tick(k)?;
            }
        }
        Mode::Concurrent => run_concurrent(&mut stepper, samples, &visible, calib, &rig.params)?,
    }

    let stream: Vec<(f64, u16)> = samples.iter().map(|s| (s.t, s.acc_z_adc)).collect();
    let mut log = stepper.log;
    log.intentions = intention_detect(&stream, calib, &rig.params);
    log.latency = pair_latencies(&log.intentions, &log.key_events);
    Ok(log)
}

/// Horizontal and vertical pipelines on their own threads. The vertical law
/// needs no feedback and streams ahead; the horizontal law reads the encoder,
/// so it answers one request per tick.
fn run_concurrent(
    stepper: &mut Stepper<'_>,
    samples: &[SensorSample],
    visible: &[Option<usize>],
    calib: &CalibrationSet,
    params: &ControlParams,
) -> Result<()> {
    std::thread::scope(|scope| {
        let (v_tx, v_rx) = mpsc::sync_channel::<(usize, Result<Option<AxisCommand>>)>(256);
        let (req_tx, req_rx) = mpsc::channel::<(usize, usize, i64)>();
        let (h_tx, h_rx) = mpsc::channel::<(usize, Result<AxisCommand>)>();

        scope.spawn(move || {
            for (k, seen) in visible.iter().enumerate() {
                let cmd = seen.map(|i| vertical_command(&samples[i], calib, params)).transpose();
                if v_tx.send((k, cmd)).is_err() {
                    break;
                }
            }
        });
        scope.spawn(move || {
            for (k, i, counts) in req_rx {
                if h_tx.send((k, horizontal_command(&samples[i], calib, params, counts))).is_err() {
                    break;
                }
            }
        });

        let hung = || Error::Runtime("control pipeline stopped unexpectedly".into());
        for (k, seen) in visible.iter().enumerate() {
            let h = match seen {
                Some(i) => {
                    req_tx.send((k, *i, stepper.h.encoder_count)).map_err(|_| hung())?;
                    let (tick, cmd) = h_rx.recv().map_err(|_| hung())?;
                    debug_assert_eq!(tick, k);
                    Some(cmd?)
                }
                None => None,
            };
            let (tick, v) = v_rx.recv().map_err(|_| hung())?;
            debug_assert_eq!(tick, k);
            stepper.enqueue(k, h, v?);
            stepper.tick(k)?;
        }
        drop(req_tx);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calib() -> CalibrationSet {
        CalibrationSet {
            flex_min: 2482,
            flex_max: 1869,
            enc_h_min: -690,
            enc_h_max: -2570,
            y_min: 1229,
            y_max: 1351,
            z_min: 1474,
            z_max: 1720,
            enc_hover: 0,
            enc_pressed: 397,
        }
    }

    #[test]
    fn midi_velocity_examples() {
        assert_eq!(midi_velocity(4000.0, 4000.0), 127);
        assert_eq!(midi_velocity(0.0, 4000.0), 1);
        assert_eq!(midi_velocity(2000.0, 4000.0), 64);
        assert_eq!(midi_velocity(9000.0, 4000.0), 127);
    }

    #[test]
    fn latency_config_sums() {
        let l = LatencyConfig::default();
        assert_eq!(l.total(), 85.0);
        assert_eq!(l.non_mechanical(), 35.0);
        assert!(LatencyConfig { compute: -1.0, ..Default::default() }.validate().is_err());
    }

    fn stream(values: &[u16]) -> Vec<(f64, u16)> {
        values.iter().enumerate().map(|(i, &z)| (i as f64 * 10.0, z)).collect()
    }

    #[test]
    fn intention_examples() {
        let p = ControlParams::default();
        let c = calib();
        assert!(intention_detect(&stream(&[1474; 50]), &c, &p).is_empty());

        let mut single = vec![1474u16; 50];
        single[10..16].fill(1700);
        assert_eq!(intention_detect(&stream(&single), &c, &p), vec![100.0]);

        let mut two = vec![1474u16; 80];
        two[10..16].fill(1700);
        two[50..56].fill(1700);
        assert_eq!(intention_detect(&stream(&two), &c, &p), vec![100.0, 500.0]);

        // A second onset inside the refractory window is ignored.
        let mut close = vec![1474u16; 80];
        close[10..16].fill(1700);
        close[25..30].fill(1700);
        assert_eq!(intention_detect(&stream(&close), &c, &p), vec![100.0]);
    }

    #[test]
    fn intention_threshold_is_inclusive() {
        let p = ControlParams::default();
        let c = calib();
        let z = (c.z_min as f64 + p.z_threshold) as u16;
        assert_eq!(intention_detect(&stream(&[1474, z - 1, z]), &c, &p), vec![20.0]);
    }

    #[test]
    fn latency_pairing() {
        let on = |t| KeyEvent { t, kind: KeyEventKind::On, key_index: 1, velocity: 64 };
        let off = |t| KeyEvent { t, kind: KeyEventKind::Off, key_index: 1, velocity: 0 };
        let events = vec![on(90.0), off(200.0), on(600.0), off(700.0)];
        let recs = pair_latencies(&[5.0, 300.0, 510.0], &events);
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].delay(), 85.0);
        assert_eq!(recs[1].delay(), 90.0);
    }

    #[test]
    fn csv_round_trips() {
        let log = EventLog {
            key_events: vec![
                KeyEvent { t: 86.0, kind: KeyEventKind::On, key_index: 40, velocity: 102 },
                KeyEvent { t: 290.0, kind: KeyEventKind::Off, key_index: 40, velocity: 0 },
            ],
            latency: vec![LatencyRecord { intention_t: 0.0, action_t: 86.0 }],
            ..Default::default()
        };
        let text = log.events_csv();
        assert_eq!(text, "t_ms,kind,key_index,note_name,velocity\n86.000,on,40,C#4,102\n290.000,off,40,C#4,0\n");
        assert_eq!(EventLog::parse_events_csv(&text).unwrap(), log.key_events);
        assert_eq!(EventLog::parse_latency_csv(&log.latency_csv()).unwrap(), log.latency);
        assert!(EventLog::parse_latency_csv("intention_t_ms,action_t_ms,delay_ms\n5,1,-4\n").is_err());
    }
}

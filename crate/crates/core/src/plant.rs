//! Geared DC motor axis with a quadrature encoder and a profile-following
//! axis controller.
//!
//! The controller is modelled as a slew-limited velocity profile: velocity
//! moves toward its target at no more than `a_max`, never exceeds the commanded
//! limit, and in position mode decelerates so it lands exactly on the
//! setpoint without overshoot. Kinematics inside a step are integrated
//! exactly (constant acceleration, then constant velocity).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorAxis {
    pub gear_ratio: f64,
    /// encoder impulses per motor revolution
    pub encoder_cpr: u32,
    /// edges decoded per impulse
    pub quadrature: u32,
    /// deg/s, output side
    pub v_max: f64,
    /// deg/s², output side
    pub a_max: f64,
    /// N·m, motor side
    pub nominal_torque: f64,
}

impl Default for MotorAxis {
    fn default() -> Self {
        Self {
            gear_ratio: 16.0,
            encoder_cpr: 256,
            quadrature: 4,
            v_max: 4500.0,
            a_max: 1.0e7,
            nominal_torque: 0.010,
        }
    }
}

impl MotorAxis {
    pub fn validate(&self, section: &str) -> Result<()> {
        if !(self.gear_ratio >= 1.0) {
            return Err(Error::config(format!("{section}.gear_ratio"), "must be at least 1"));
        }
        if self.encoder_cpr == 0 {
            return Err(Error::config(format!("{section}.encoder_cpr"), "must be positive"));
        }
        if self.quadrature == 0 {
            return Err(Error::config(format!("{section}.quadrature"), "must be positive"));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::config(format!("{section}.v_max"), "must be positive"));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::config(format!("{section}.a_max"), "must be positive"));
        }
        if !(self.nominal_torque > 0.0) {
            return Err(Error::config(format!("{section}.nominal_torque"), "must be positive"));
        }
        Ok(())
    }

    pub fn counts_per_output_rev(&self) -> f64 {
        f64::from(self.encoder_cpr) * f64::from(self.quadrature) * self.gear_ratio
    }

    /// Output-side angle in degrees to encoder counts, rounding halves away
    /// from zero.
    pub fn encoder_counts(&self, angle: f64) -> i64 {
        (angle * self.counts_per_output_rev() / 360.0).round() as i64
    }

    pub fn counts_to_degrees(&self, counts: i64) -> f64 {
        counts as f64 * 360.0 / self.counts_per_output_rev()
    }

    pub fn output_torque(&self, motor_torque: f64) -> f64 {
        motor_torque * self.gear_ratio
    }

    /// Ratio of available output torque to `required` (N·m).
    pub fn torque_margin(&self, required: f64) -> Result<f64> {
        if !(required > 0.0) {
            return Err(Error::input(format!("required torque must be positive, got {required}")));
        }
        Ok(self.output_torque(self.nominal_torque) / required)
    }
}

pub fn counts_per_output_rev(axis: &MotorAxis) -> f64 {
    axis.counts_per_output_rev()
}

pub fn encoder_counts(angle: f64, axis: &MotorAxis) -> i64 {
    axis.encoder_counts(angle)
}

pub fn torque_margin(required: f64, axis: &MotorAxis) -> Result<f64> {
    axis.torque_margin(required)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisState {
    /// degrees, output side, relative to the pose at enable
    pub angle: f64,
    /// deg/s
    pub velocity: f64,
    pub encoder_count: i64,
}

impl AxisState {
    /// State right after the controller is enabled: the encoder reads zero.
    pub fn enabled() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisMode {
    Position,
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisCommand {
    pub mode: AxisMode,
    /// counts in position mode, deg/s in velocity mode
    pub setpoint: f64,
    /// deg/s profile velocity (position mode)
    pub velocity_limit: f64,
}

impl AxisCommand {
    pub fn position(setpoint_counts: i64, velocity_limit: f64) -> Self {
        Self { mode: AxisMode::Position, setpoint: setpoint_counts as f64, velocity_limit }
    }

    pub fn velocity(deg_per_s: f64) -> Self {
        Self { mode: AxisMode::Velocity, setpoint: deg_per_s, velocity_limit: deg_per_s.abs() }
    }

    /// Position command that holds the current encoder count.
    pub fn hold(state: &AxisState) -> Self {
        Self::position(state.encoder_count, 0.0)
    }
}

/// Move from `v0` toward `v_target` at `accel` for `dt` seconds. Returns the
/// final velocity and the distance covered.
fn slew(v0: f64, v_target: f64, accel: f64, dt: f64) -> (f64, f64) {
    let dv = v_target - v0;
    let t_ramp = dv.abs() / accel;
    if t_ramp >= dt {
        let v1 = v0 + dv.signum() * accel * dt;
        (v1, 0.5 * (v0 + v1) * dt)
    } else {
        let ramp = 0.5 * (v0 + v_target) * t_ramp;
        (v_target, ramp + v_target * (dt - t_ramp))
    }
}

/// Advance one axis by `dt_ms` under `command`.
pub fn axis_step(state: &AxisState, command: &AxisCommand, dt_ms: f64, axis: &MotorAxis) -> Result<AxisState> {
    if !(dt_ms > 0.0) {
        return Err(Error::input(format!("time step must be positive, got {dt_ms}")));
    }
    let dt = dt_ms / 1000.0;
    let a = axis.a_max;

    let (angle, velocity) = match command.mode {
        AxisMode::Velocity => {
            let target = command.setpoint.clamp(-axis.v_max, axis.v_max);
            let (v1, dist) = slew(state.velocity, target, a, dt);
            (state.angle + dist, v1)
        }
        AxisMode::Position => {
            let target = axis.counts_to_degrees(command.setpoint.round() as i64);
            let err = target - state.angle;
            let limit = command.velocity_limit.clamp(0.0, axis.v_max);
            if err == 0.0 {
                (state.angle, 0.0)
            } else {
                // Cap speed so the remaining distance can still be braked.
                let brake = (2.0 * a * err.abs()).sqrt();
                let v_des = err.signum() * limit.min(brake);
                let (v1, dist) = slew(state.velocity, v_des, a, dt);
                let next = state.angle + dist;
                let overshoot = (target - next) * err <= 0.0;
                if overshoot {
                    (target, 0.0)
                } else {
                    (next, v1)
                }
            }
        }
    };

    Ok(AxisState { angle, velocity, encoder_count: axis.encoder_counts(angle) })
}

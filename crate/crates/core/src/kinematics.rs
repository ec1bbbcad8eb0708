//! Two-joint finger kinematics.
//!
//! The knuckle link `l0` turns with the horizontal joint `theta_h` about a
//! vertical axis through the mount pivot. The proximal link `l1` pitches down
//! by `theta_v` about a horizontal axis at the end of the knuckle, and the
//! distal link `l2` is rigidly bent a further `bend_angle` downward from it.
//!
//! In the base frame the fingertip sits at
//! `(r cos θh, r sin θh, -d)` with
//! `r(θv) = l0 + l1 cos θv + l2 cos(θv + bend)` and
//! `d(θv) = l1 sin θv + l2 sin(θv + bend)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerGeometry {
    /// mm
    pub l0_knuckle: f64,
    /// mm
    pub l1_proximal: f64,
    /// mm
    pub l2_distal: f64,
    /// degrees between the proximal and distal links
    pub bend_angle: f64,
    pub theta_h_min: f64,
    pub theta_h_max: f64,
    /// Positive is downward.
    pub theta_v_min: f64,
    pub theta_v_max: f64,
}

impl Default for FingerGeometry {
    fn default() -> Self {
        Self {
            l0_knuckle: 41.0,
            l1_proximal: 58.0,
            l2_distal: 48.5,
            bend_angle: 60.0,
            theta_h_min: -180.0,
            theta_h_max: 180.0,
            theta_v_min: -90.0,
            theta_v_max: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    /// degrees
    pub theta_h: f64,
    /// degrees, positive downward
    pub theta_v: f64,
}

/// Where the finger's pivot sits relative to the keyboard, plus the joint
/// pose at which both encoders were zeroed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountPose {
    /// mm along the keyboard
    pub base_x: f64,
    /// mm into the keyboard from the front edge of the white keys
    pub base_depth: f64,
    /// mm above the undepressed key surface
    pub base_z: f64,
    /// degrees; rotates the base frame about the vertical
    pub heading: f64,
    /// joint pose at controller enable (encoder zero)
    pub home_theta_h: f64,
    pub home_theta_v: f64,
}

impl Default for MountPose {
    fn default() -> Self {
        Self {
            base_x: 520.0,
            base_depth: 0.0,
            base_z: 44.0,
            heading: 0.0,
            home_theta_h: 90.0,
            home_theta_v: 0.0,
        }
    }
}

impl MountPose {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_z > 0.0) {
            return Err(Error::config("mount.base_z", "must be positive"));
        }
        for (key, v) in [
            ("mount.base_x", self.base_x),
            ("mount.base_depth", self.base_depth),
            ("mount.heading", self.heading),
            ("mount.home_theta_h", self.home_theta_h),
            ("mount.home_theta_v", self.home_theta_v),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn home(&self) -> JointState {
        JointState { theta_h: self.home_theta_h, theta_v: self.home_theta_v }
    }
}

/// Fingertip in keyboard coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipPosition {
    pub x: f64,
    pub depth: f64,
    /// mm relative to the undepressed key surface; negative is below it.
    pub z: f64,
}

impl FingerGeometry {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("geometry.l0_knuckle", self.l0_knuckle),
            ("geometry.l1_proximal", self.l1_proximal),
            ("geometry.l2_distal", self.l2_distal),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !(self.bend_angle > 0.0 && self.bend_angle <= 90.0) {
            return Err(Error::config("geometry.bend_angle", "must be in (0, 90]"));
        }
        if !(self.theta_h_min < self.theta_h_max && self.theta_h_max - self.theta_h_min <= 360.0) {
            return Err(Error::config("geometry.theta_h_max", "horizontal range must be non-empty and span at most 360 degrees"));
        }
        if !(self.theta_v_min < self.theta_v_max && self.theta_v_max - self.theta_v_min <= 120.0) {
            return Err(Error::config("geometry.theta_v_max", "vertical range must be non-empty and span at most 120 degrees"));
        }
        Ok(())
    }

    /// Radial reach from the pivot at vertical angle `theta_v` (degrees).
    pub fn radius(&self, theta_v: f64) -> f64 {
        let v = theta_v.to_radians();
        let b = self.bend_angle.to_radians();
        self.l0_knuckle + self.l1_proximal * v.cos() + self.l2_distal * (v + b).cos()
    }

    /// Fingertip drop below the pivot at vertical angle `theta_v` (degrees).
    pub fn drop(&self, theta_v: f64) -> f64 {
        let v = theta_v.to_radians();
        let b = self.bend_angle.to_radians();
        self.l1_proximal * v.sin() + self.l2_distal * (v + b).sin()
    }

    /// `d(θv) = amplitude · sin(θv + phase)`; returns `(amplitude, phase)`.
    fn drop_phasor(&self) -> (f64, f64) {
        let b = self.bend_angle.to_radians();
        let c = self.l1_proximal + self.l2_distal * b.cos();
        let s = self.l2_distal * b.sin();
        (c.hypot(s), s.atan2(c))
    }

    /// Upper end of the interval on which the drop strictly increases.
    fn monotone_upper(&self) -> f64 {
        self.theta_v_max.min(90.0 - self.bend_angle)
    }

    /// Vertical angle in `[theta_v_min, min(theta_v_max, 90 - bend)]` at which
    /// the fingertip has dropped `drop` mm below the pivot.
    pub fn theta_v_for_drop(&self, drop: f64) -> Result<f64> {
        let (amp, phase) = self.drop_phasor();
        let lo = self.theta_v_min.max(-self.bend_angle);
        let hi = self.monotone_upper();
        let (d_lo, d_hi) = (self.drop(lo), self.drop(hi));
        if drop < d_lo - 1e-12 || drop > d_hi + 1e-12 {
            return Err(Error::Range { travel: drop - d_lo, max_travel: d_hi - d_lo });
        }
        let theta = ((drop / amp).clamp(-1.0, 1.0).asin() - phase).to_degrees();
        Ok(theta.clamp(lo, hi))
    }

    pub fn check_joints(&self, joints: JointState) -> Result<()> {
        let JointState { theta_h, theta_v } = joints;
        if !(self.theta_h_min..=self.theta_h_max).contains(&theta_h) {
            return Err(Error::input(format!(
                "theta_h {theta_h} outside [{}, {}]",
                self.theta_h_min, self.theta_h_max
            )));
        }
        if !(self.theta_v_min..=self.theta_v_max).contains(&theta_v) {
            return Err(Error::input(format!(
                "theta_v {theta_v} outside [{}, {}]",
                self.theta_v_min, self.theta_v_max
            )));
        }
        Ok(())
    }
}

/// Fingertip `(x, y, z)` in mm in the base frame.
pub fn fingertip_position(joints: JointState, geometry: &FingerGeometry) -> Result<[f64; 3]> {
    geometry.check_joints(joints)?;
    let r = geometry.radius(joints.theta_v);
    let h = joints.theta_h.to_radians();
    Ok([r * h.cos(), r * h.sin(), -geometry.drop(joints.theta_v)])
}

/// Fingertip in keyboard coordinates for a mounted finger. Joint limits are
/// not checked; the plant is responsible for staying in range.
pub fn tip_in_keyboard(joints: JointState, geometry: &FingerGeometry, mount: &MountPose) -> TipPosition {
    let r = geometry.radius(joints.theta_v);
    let h = (joints.theta_h + mount.heading).to_radians();
    TipPosition {
        x: mount.base_x + r * h.cos(),
        depth: mount.base_depth + r * h.sin(),
        z: mount.base_z - geometry.drop(joints.theta_v),
    }
}

/// Horizontal joint angle that places the hovering fingertip over
/// `key_center_x`, choosing the solution that reaches into the keyboard.
pub fn theta_for_key(key_center_x: f64, mount: &MountPose, geometry: &FingerGeometry) -> Result<f64> {
    let r = geometry.radius(mount.home_theta_v);
    let c = (key_center_x - mount.base_x) / r;
    if !(-1.0..=1.0).contains(&c) {
        return Err(Error::Reach { target_x: key_center_x, min_x: mount.base_x - r, max_x: mount.base_x + r });
    }
    Ok(c.acos().to_degrees() - mount.heading)
}

/// Rotation from `hover_theta_v` that lowers the fingertip by `travel` mm.
pub fn press_angle(travel: f64, hover_theta_v: f64, geometry: &FingerGeometry) -> Result<f64> {
    if !(travel >= 0.0) {
        return Err(Error::input(format!("travel must be non-negative, got {travel}")));
    }
    if travel == 0.0 {
        return Ok(0.0);
    }
    let start = geometry.drop(hover_theta_v);
    let max_travel = geometry.drop(geometry.monotone_upper()) - start;
    if travel > max_travel {
        return Err(Error::Range { travel, max_travel });
    }
    Ok(geometry.theta_v_for_drop(start + travel)? - hover_theta_v)
}

/// Torque in N·m about the press joint needed to hold `force` N at the tip.
pub fn required_torque(force: f64, theta_v: f64, geometry: &FingerGeometry) -> Result<f64> {
    if !(force >= 0.0) {
        return Err(Error::input(format!("force must be non-negative, got {force}")));
    }
    let v = theta_v.to_radians();
    let b = geometry.bend_angle.to_radians();
    let arm_mm = geometry.l1_proximal * v.cos() + geometry.l2_distal * (v + b).cos();
    Ok(force * arm_mm / 1000.0)
}

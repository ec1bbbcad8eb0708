//! Fingertip position, key aiming, press depth and contact torque.

use sr3t::kinematics::{fingertip_position, press_angle, required_torque, theta_for_key, FingerGeometry, JointState, MountPose};
use sr3t::piano::{KeyboardLayout, LayoutConfig};

fn main() -> sr3t::Result<()> {
    let geo = FingerGeometry::default();
    let mount = MountPose::default();
    let layout = KeyboardLayout::new(LayoutConfig::default())?;

    let tip = fingertip_position(JointState { theta_h: 0.0, theta_v: 0.0 }, &geo)?;
    println!("tip at rest, base frame: ({:.2}, {:.2}, {:.2}) mm", tip[0], tip[1], tip[2]);

    for index in 39..=44 {
        let key = layout.key(index).expect("key exists");
        let theta = theta_for_key(key.center_x, &mount, &geo)?;
        println!("{:<4} x {:7.2} -> horizontal joint {theta:6.2} deg", key.note_name(), key.center_x);
    }

    let press = press_angle(layout.config().key_travel, 0.0, &geo)?;
    println!("10 mm of travel from hover needs {press:.3} deg of vertical rotation");
    let torque = required_torque(layout.config().press_force, 0.0, &geo)?;
    println!("0.5 N at the tip needs {:.2} mN·m at the vertical joint", torque * 1000.0);
    Ok(())
}

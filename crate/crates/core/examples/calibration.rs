//! Labelled calibration trace to a calibration set, and the control laws
//! that use it.

use sr3t::control::{calibrate_from_trace, horizontal_update, vertical_update};
use sr3t::synth::{anchors_for, calibration_trace};
use sr3t::GlobalConfig;

fn main() -> sr3t::Result<()> {
    let cfg = GlobalConfig::default();
    let trace = calibration_trace(&cfg, 1)?;
    let calib = calibrate_from_trace(&trace, &anchors_for(&cfg)?)?;
    print!("{}", calib.to_kv());

    let mid = ((calib.flex_min + calib.flex_max) / 2) as u16;
    let h = horizontal_update(mid, &calib, &cfg.control, 0)?;
    println!("flex {mid} -> horizontal setpoint {} counts at {:.0} deg/s", h.setpoint, h.velocity_limit);

    let v = vertical_update(calib.y_max as u16, calib.z_max as u16, &calib, &cfg.control)?;
    println!("foot up, full lift -> vertical setpoint {} counts at {:.0} deg/s", v.setpoint, v.velocity_limit);
    Ok(())
}

//! Thumb bend to ADC code through the flex sensor, divider and converter,
//! plus the foot accelerometer's two axes.

use sr3t::sensors::{AccelerometerModel, DividerConfig, FlexSensorModel};

fn main() -> sr3t::Result<()> {
    let flex = FlexSensorModel::default();
    let divider = DividerConfig::default();
    println!("bend(deg)  R(kOhm)  V      code");
    for bend in [0.0, 45.0, 90.0, 150.0, 180.0] {
        let r = flex.resistance(bend)?;
        let v = divider.voltage(r)?;
        println!("{bend:8.1}  {r:7.3}  {v:.4} {:5}", divider.quantize(v));
    }

    let accel = AccelerometerModel::default();
    println!("\npitch  dyn(g)  y code  z code");
    for (pitch, dyn_g) in [(0.0, 0.0), (30.0, 0.0), (0.0, 1.0), (30.0, 0.5)] {
        let (vy, vz) = accel.output(pitch, dyn_g)?;
        println!("{pitch:5.1}  {dyn_g:6.2}  {:6}  {:6}", divider.quantize(vy), divider.quantize(vz));
    }
    Ok(())
}

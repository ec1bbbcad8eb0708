//! Keys the finger adds beyond the player's pinkie.

use sr3t::analysis::range_increase;
use sr3t::kinematics::MountPose;
use sr3t::synth::default_calibration;
use sr3t::GlobalConfig;

fn main() -> sr3t::Result<()> {
    let cfg = GlobalConfig::default();
    let calib = default_calibration(&cfg)?;
    let layout = cfg.keyboard()?;

    let report = range_increase(&cfg.mount, &cfg.geometry, &calib, &layout, &cfg.axis_h, &cfg.hand);
    print!("{}", report.to_text(&layout));

    // Same calibrated span, mount one white key further right.
    let shifted = MountPose { base_x: cfg.mount.base_x + layout.config().white_width, ..cfg.mount.clone() };
    let moved = range_increase(&shifted, &cfg.geometry, &calib, &layout, &cfg.axis_h, &cfg.hand);
    println!("mount moved one white key right: {} whole notes", moved.whole_notes());
    Ok(())
}

//! Synthesize presses over a key, run them through the rig, and print the
//! key events.

use sr3t::engine::run;
use sr3t::synth::{default_calibration, press_trace};
use sr3t::GlobalConfig;

fn main() -> sr3t::Result<()> {
    let cfg = GlobalConfig::default();
    let calib = default_calibration(&cfg)?;
    let trace = press_trace(&cfg, &calib, 40, 0.8, 3, 2.0, cfg.simulation.seed)?;
    let log = run(&trace, &calib, &cfg.rig()?, &cfg.latency, &cfg.simulation, false)?;
    print!("{}", log.events_csv());
    for r in &log.latency {
        println!("intention {:7.1} ms -> key-on {:7.1} ms ({:.0} ms)", r.intention_t, r.action_t, r.delay());
    }
    Ok(())
}

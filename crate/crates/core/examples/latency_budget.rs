//! Measure intention-to-action latency over many presses and check the
//! design budgets.

use sr3t::analysis::{budget_check, latency_stats};
use sr3t::engine::run;
use sr3t::synth::{default_calibration, press_trace};
use sr3t::GlobalConfig;

fn main() -> sr3t::Result<()> {
    let cfg = GlobalConfig::default();
    let calib = default_calibration(&cfg)?;
    let trace = press_trace(&cfg, &calib, 41, 0.8, 100, 0.0, cfg.simulation.seed)?;
    let log = run(&trace, &calib, &cfg.rig()?, &cfg.latency, &cfg.simulation, false)?;

    let stats = latency_stats(&log.latency, cfg.budget.latency_ms)?;
    print!("{}", stats.to_text());
    println!("stage sum {:.0} ms, of which {:.0} ms before the motor moves", cfg.latency.total(), cfg.latency.non_mechanical());

    let layout = cfg.keyboard()?;
    print!("{}", budget_check(cfg.budget_inputs(&layout), Some(stats.mean))?.to_text());
    Ok(())
}

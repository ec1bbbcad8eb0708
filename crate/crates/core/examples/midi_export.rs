//! Simulate a short scale and write it as a standard MIDI file.

use sr3t::engine::run;
use sr3t::midi::{read_midi, write_midi};
use sr3t::synth::{default_calibration, scale_trace};
use sr3t::GlobalConfig;

fn main() -> sr3t::Result<()> {
    let cfg = GlobalConfig::default();
    let calib = default_calibration(&cfg)?;
    let trace = scale_trace(&cfg, &calib, 0.0, cfg.simulation.seed)?;
    let log = run(&trace, &calib, &cfg.rig()?, &cfg.latency, &cfg.simulation, false)?;

    let bytes = write_midi(&log.key_events)?;
    let hex: Vec<String> = bytes[..14].iter().map(|b| format!("{b:02X}")).collect();
    println!("{} bytes, header {}", bytes.len(), hex.join(" "));
    for note in read_midi(&bytes)? {
        println!("tick {:5}  {}  note {:3}  velocity {:3}", note.tick, if note.on { "on " } else { "off" }, note.note, note.velocity);
    }
    let path = std::env::temp_dir().join("sr3t_scale.mid");
    std::fs::write(&path, &bytes).map_err(|e| sr3t::Error::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

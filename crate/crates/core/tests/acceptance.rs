//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sr3t::analysis::{cap_solid_angle, workspace_from_limits};
use sr3t::cli::{execute, Cli};
use sr3t::control::{horizontal_update, linear_map, vertical_update, CalibrationSet, ControlParams};
use sr3t::engine::{run, EventLog};
use sr3t::kinematics::required_torque;
use sr3t::midi::read_midi;
use sr3t::piano::KeyEventKind;
use sr3t::plant::MotorAxis;
use sr3t::synth;
use sr3t::{Error, GlobalConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn cli(dir: &Path, args: &[&str]) -> String {
    let mut argv = vec!["sr3t", "--out", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    let parsed = Cli::try_parse_from(&argv).unwrap_or_else(|e| panic!("{argv:?}: {e}"));
    execute(&parsed).unwrap_or_else(|e| panic!("{argv:?}: {e}"))
}

fn read_kv(path: &Path) -> BTreeMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn rel_within(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn latency_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let start = Instant::now();
    cli(d, &["synth", "calibration"]);
    cli(d, &["calibrate", "--trace", &p(d, "trace.csv"), "--anchors", &p(d, "anchors.txt")]);
    cli(d, &["synth", "press", "--key", "40", "--count", "100"]);
    cli(d, &["simulate", "--trace", &p(d, "trace.csv"), "--calibration", &p(d, "calibration.txt")]);
    cli(d, &["analyze", "latency", "--latency", &p(d, "latency.csv")]);
    cli(d, &["analyze", "budget", "--latency", &p(d, "latency.csv")]);
    let elapsed = start.elapsed();

    let stats = read_kv(&d.join("latency_report.txt"));
    let budget = read_kv(&d.join("budget.txt"));
    let n: usize = stats["n"].parse().unwrap();
    let mean: f64 = stats["mean_ms"].parse().unwrap();
    let flagged = stats["over_budget"] == "true" && budget["latency_pass"] == "false";
    outcome(
        n == 100 && within(mean, 85.0, 2.0) && flagged && elapsed < Duration::from_secs(5),
        format!("{n} presses, mean {mean:.2} ms (85 ± 2), budget flagged: {flagged}, {:.2} s (< 5 s)", elapsed.as_secs_f64()),
    )
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// Fraction of uniform directions satisfying `inside`, scaled to steradians.
fn monte_carlo(seed: u64, inside: impl Fn([f64; 3]) -> bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1_000_000;
    let hits = (0..n)
        .filter(|_| {
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).sqrt();
            inside([s * phi.cos(), s * phi.sin(), z])
        })
        .count();
    4.0 * PI * hits as f64 / n as f64
}

fn workspace_ratio() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cli(d, &["synth", "sweep"]);
    cli(d, &["synth", "thumb-cap"]);
    let start = Instant::now();
    cli(d, &["analyze", "workspace", "--device", &p(d, "device_dirs.csv"), "--thumb", &p(d, "thumb_dirs.csv")]);
    let elapsed = start.elapsed();

    let kv = read_kv(&d.join("workspace.txt"));
    let device: f64 = kv["device_sr"].parse().unwrap();
    let thumb: f64 = kv["thumb_sr"].parse().unwrap();
    let ratio: f64 = kv["ratio"].parse().unwrap();

    let band_analytic = workspace_from_limits(360.0, -60.0, 60.0).unwrap();
    let cap_analytic = cap_solid_angle(54.9);
    let band_lim = 60f64.to_radians().sin();
    let band_mc = monte_carlo(11, |d| d[2].abs() <= band_lim);
    let cap_lim = 54.9f64.to_radians().cos();
    let cap_mc = monte_carlo(12, |d| d[0] >= cap_lim);

    let pass = within(band_analytic, 10.883, 1e-3)
        && within(cap_analytic, 2.670, 1e-3)
        && rel_within(device, band_analytic, 0.02)
        && rel_within(device, band_mc, 0.02)
        && rel_within(thumb, cap_analytic, 0.02)
        && rel_within(thumb, cap_mc, 0.02)
        && within(ratio, 4.0, 0.2)
        && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "device {device:.4} sr (analytic {band_analytic:.4}, MC {band_mc:.4}), thumb {thumb:.4} sr (analytic {cap_analytic:.4}, MC {cap_mc:.4}), ratio {ratio:.3} (4.0 ± 0.2), {:.2} s (< 10 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn range_increase() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    cli(dir.path(), &["analyze", "range"]);
    let kv = read_kv(&dir.path().join("range.txt"));
    let notes: usize = kv["whole_notes"].parse().unwrap();
    outcome(notes == 4, format!("{notes} whole notes beyond the pinkie (exactly 4)"))
}

fn torque_budget() -> Outcome {
    let cfg = GlobalConfig::default();
    let required = required_torque(cfg.layout.press_force, 0.0, &cfg.geometry).unwrap();
    // Oracle: 0.5 N on a lever of l1 + l2·cos(bend) = 58 + 48.5·cos 60° = 82.25 mm.
    let oracle = 0.5 * (58.0 + 48.5 * 0.5) / 1000.0;
    let margin = cfg.axis_v.torque_margin(required).unwrap();
    let dir = tempfile::tempdir().unwrap();
    cli(dir.path(), &["analyze", "budget"]);
    let kv = read_kv(&dir.path().join("budget.txt"));
    let pass = within(required * 1000.0, 41.1, 0.1)
        && within(required, oracle, 1e-12)
        && within(margin, 3.89, 0.01)
        && kv["torque_pass"] == "true";
    outcome(pass, format!("required {:.3} mN·m (41.1 ± 0.1), margin {margin:.4} (3.89 ± 0.01), torque pass: {}", required * 1000.0, kv["torque_pass"]))
}

fn encoder_arithmetic() -> Outcome {
    let axis = MotorAxis::default();
    let full = axis.encoder_counts(360.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let theta: f64 = rng.random_range(-720.0..720.0);
        if axis.encoder_counts(theta) != (theta * 256.0 * 4.0 * 16.0 / 360.0).round() as i64 {
            mismatches += 1;
        }
    }
    outcome(full == 16384 && mismatches == 0, format!("360° = {full} counts (16384), {mismatches}/1000 random angles mismatched"))
}

fn random_calibration(rng: &mut ChaCha8Rng) -> CalibrationSet {
    let mut pair = |lo: i64, hi: i64| loop {
        let a = rng.random_range(lo..=hi);
        let b = rng.random_range(lo..=hi);
        if a != b {
            return (a, b);
        }
    };
    let (flex_min, flex_max) = pair(0, 4095);
    let (enc_h_min, enc_h_max) = pair(-8000, 8000);
    let (y_min, y_max) = pair(0, 4095);
    let (z_min, z_max) = pair(0, 4095);
    let (enc_hover, enc_pressed) = pair(-2000, 2000);
    CalibrationSet { flex_min, flex_max, enc_h_min, enc_h_max, y_min, y_max, z_min, z_max, enc_hover, enc_pressed }
}

fn calibration_exactness() -> Outcome {
    let params = ControlParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = 0;
    for _ in 0..1000 {
        let c = random_calibration(&mut rng);
        if c.validate().is_err() {
            failures += 1;
            continue;
        }
        let h = |flex: f64| horizontal_update(flex as u16, &c, &params, 0).unwrap().setpoint;
        let v = |y: f64| vertical_update(y as u16, c.z_min as u16, &c, &params).unwrap().setpoint;
        let mid = |a: i64, b: i64| (a + b) as f64 / 2.0;
        let checks = [
            (h(c.flex_min as f64), c.enc_h_min as f64),
            (h(c.flex_max as f64), c.enc_h_max as f64),
            (v(c.y_min as f64), c.enc_hover as f64),
            (v(c.y_max as f64), c.enc_pressed as f64),
        ];
        let endpoints_ok = checks.iter().all(|&(got, want)| (got - want).abs() <= 1.0);
        // The midpoint of the sensor range, exact in real arithmetic.
        let mid_h = linear_map(mid(c.flex_min, c.flex_max), c.flex_min as f64, c.flex_max as f64, c.enc_h_min as f64, c.enc_h_max as f64).unwrap();
        let mid_v = linear_map(mid(c.y_min, c.y_max), c.y_min as f64, c.y_max as f64, c.enc_hover as f64, c.enc_pressed as f64).unwrap();
        let mid_ok = (mid_h - mid(c.enc_h_min, c.enc_h_max)).abs() <= 1.0 && (mid_v - mid(c.enc_hover, c.enc_pressed)).abs() <= 1.0;
        if !(endpoints_ok && mid_ok) {
            failures += 1;
        }
    }

    let mut degenerate_named = 0;
    type Breaker = fn(&mut CalibrationSet);
    let degenerate_cases: [(&str, Breaker); 3] = [
        ("flex", |c| c.flex_max = c.flex_min),
        ("y", |c| c.y_max = c.y_min),
        ("z", |c| c.z_max = c.z_min),
    ];
    for (name, break_it) in degenerate_cases {
        let mut c = random_calibration(&mut rng);
        break_it(&mut c);
        if let Err(e @ Error::DegenerateCalibration { .. }) = c.validate() {
            if e.to_string().contains(name) {
                degenerate_named += 1;
            }
        }
    }
    outcome(
        failures == 0 && degenerate_named == 3,
        format!("{failures}/1000 random sets off by more than 1 count, {degenerate_named}/3 degenerate sets rejected by name"),
    )
}

fn key_targeting() -> Outcome {
    let cfg = GlobalConfig::default();
    let calib = synth::default_calibration(&cfg).unwrap();
    let layout = cfg.keyboard().unwrap();
    let report = sr3t::analysis::range_increase(&cfg.mount, &cfg.geometry, &calib, &layout, &cfg.axis_h, &cfg.hand);
    let rig = cfg.rig().unwrap();
    let mut trials = 0;
    let mut hits = 0;
    let mut misses = Vec::new();
    for &key in &report.reachable {
        for rep in 0..10u64 {
            let trace = synth::press_trace(&cfg, &calib, key, cfg.synth.default_speed, 1, 2.0, 1000 * key as u64 + rep).unwrap();
            let log = run(&trace, &calib, &rig, &cfg.latency, &cfg.simulation, false).unwrap();
            let ons: Vec<usize> = log.key_ons().map(|e| e.key_index).collect();
            trials += 1;
            if ons == [key] {
                hits += 1;
            } else {
                misses.push(format!("{key}->{ons:?}"));
            }
        }
    }
    let whites = report.reachable.iter().filter(|&&k| layout.keys()[k].color == sr3t::piano::KeyColor::White).count();
    let blacks = report.reachable.len() - whites;
    outcome(
        hits == trials && whites > 0 && blacks > 0,
        format!("{hits}/{trials} noisy presses on target over {whites} white and {blacks} black keys {misses:?}"),
    )
}

fn simulate_outputs(dir: &Path, trace: &str, calib: &str, mode: &str) -> [Vec<u8>; 3] {
    cli(dir, &["--verbose", "simulate", "--trace", trace, "--calibration", calib, "--mode", mode, "--midi"]);
    ["events.csv", "steps.csv", "out.mid"].map(|f| std::fs::read(dir.join(f)).unwrap())
}

fn determinism() -> (Outcome, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    cli(d, &["synth", "calibration"]);
    cli(d, &["calibrate", "--trace", &p(d, "trace.csv"), "--anchors", &p(d, "anchors.txt")]);
    cli(d, &["--seed", "7", "synth", "press", "--key", "42", "--count", "8", "--noise", "2"]);
    let (trace, calib) = (p(d, "trace.csv"), p(d, "calibration.txt"));

    let runs: Vec<[Vec<u8>; 3]> = ["deterministic", "deterministic", "concurrent", "concurrent"]
        .iter()
        .enumerate()
        .map(|(i, mode)| {
            let sub = d.join(format!("run{i}"));
            simulate_outputs(&sub, &trace, &calib, mode)
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    let events = EventLog::parse_events_csv(std::str::from_utf8(&runs[0][0]).unwrap()).unwrap();
    let non_trivial = events.iter().filter(|e| e.kind == KeyEventKind::On).count() == 8 && !runs[0][1].is_empty();
    (
        outcome(same && non_trivial, format!("events, steps and MIDI byte-identical across 2 deterministic + 2 concurrent runs: {same}")),
        runs[0][2].clone(),
    )
}

fn midi_well_formed(bytes: &[u8]) -> Outcome {
    const HEADER: [u8; 14] = [0x4D, 0x54, 0x68, 0x64, 0x00, 0x00, 0x00, 0x06, 0x00, 0x00, 0x00, 0x01, 0x01, 0xE0];
    let header_ok = bytes.len() >= 14 && bytes[..14] == HEADER;
    let notes = match read_midi(bytes) {
        Ok(n) => n,
        Err(e) => return outcome(false, format!("unparseable: {e}")),
    };
    let mut open = [0i32; 128];
    let mut balanced = true;
    for n in &notes {
        open[usize::from(n.note)] += if n.on { 1 } else { -1 };
        balanced &= open[usize::from(n.note)] >= 0;
    }
    balanced &= open.iter().all(|&c| c == 0);
    outcome(header_ok && balanced && !notes.is_empty(), format!("header exact: {header_ok}, {} note messages, balanced: {balanced}", notes.len()))
}

fn main() {
    let (det, midi_bytes) = determinism();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 latency reproduction", latency_reproduction()),
        ("2 workspace ratio", workspace_ratio()),
        ("3 range increase", range_increase()),
        ("4 torque budget", torque_budget()),
        ("5 encoder arithmetic", encoder_arithmetic()),
        ("6 calibration exactness", calibration_exactness()),
        ("7 key targeting", key_targeting()),
        ("8 determinism", det),
        ("9 MIDI well-formedness", midi_well_formed(&midi_bytes)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

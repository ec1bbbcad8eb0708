//! Command-line interface: argument definitions and command handlers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{budget_check, latency_stats, range_increase, DirectionSet, WorkspaceReport};
use crate::config::GlobalConfig;
use crate::control::{calibrate_from_trace, CalibrationSet, EncoderAnchors};
use crate::engine::{run as run_engine, EventLog, Mode};
use crate::error::{Error, Result};
use crate::midi::save_midi;
use crate::sensors::SensorTrace;
use crate::synth;

#[derive(Debug, Parser)]
#[command(name = "sr3t", version, about = "Robotic thumb simulator: synthesize traces, calibrate, simulate, analyze")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides simulation.seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Also write the per-step log when simulating
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sensor trace or direction fixture
    Synth {
        #[command(subcommand)]
        scenario: Scenario,
    },
    /// Compute a calibration from a labelled trace and encoder anchors
    Calibrate {
        /// Labelled calibration trace CSV
        #[arg(long)]
        trace: PathBuf,
        /// Encoder anchors file
        #[arg(long)]
        anchors: PathBuf,
    },
    /// Run a trace through the rig
    Simulate {
        /// Sensor trace CSV
        #[arg(long)]
        trace: PathBuf,
        /// Calibration file from `calibrate`
        #[arg(long)]
        calibration: PathBuf,
        /// Overrides simulation.mode
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Also write out.mid
        #[arg(long)]
        midi: bool,
    },
    /// Reports over simulation output and configuration
    Analyze {
        #[command(subcommand)]
        report: Report,
    },
}

#[derive(Debug, Subcommand)]
pub enum Scenario {
    /// Six labelled calibration segments (trace.csv, anchors.txt)
    Calibration,
    /// Repeated presses of one key (trace.csv)
    Press(PressArgs),
    /// One press per white key across the calibrated reach (trace.csv)
    Scale {
        /// Flex noise in ADC codes
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Device workspace sweep over the elevation band (device_dirs.csv)
    Sweep {
        /// Number of directions; analysis.samples when omitted
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Human thumb workspace cap (thumb_dirs.csv)
    ThumbCap {
        /// Number of directions; analysis.samples when omitted
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct PressArgs {
    /// Key index, 0 = lowest key
    #[arg(long, default_value_t = 40)]
    pub key: usize,
    /// Fraction of full lift speed in (0, 1], or `max`
    #[arg(long, value_parser = parse_speed)]
    pub speed: Option<f64>,
    /// Number of presses
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Flex noise in ADC codes
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

fn parse_speed(s: &str) -> std::result::Result<f64, String> {
    if s == "max" {
        return Ok(1.0);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(format!("`{s}` is not `max` or a number in (0, 1]")),
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Deterministic,
    Concurrent,
}

#[derive(Debug, Subcommand)]
pub enum Report {
    /// Solid angles of two direction sets and their ratio
    Workspace {
        /// Device direction CSV
        #[arg(long)]
        device: PathBuf,
        /// Thumb direction CSV
        #[arg(long)]
        thumb: PathBuf,
        /// Overrides analysis.n_bins
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Intention-to-action statistics from a latency CSV
    Latency {
        /// Latency CSV from `simulate`
        #[arg(long)]
        latency: PathBuf,
    },
    /// Whole notes the finger adds beyond the pinkie
    Range {
        /// Calibration file; the default calibration when omitted
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Latency, mass and torque against the design budgets
    Budget {
        /// Measured latency CSV; the nominal stage sum when omitted
        #[arg(long)]
        latency: Option<PathBuf>,
    },
}

/// Load the configuration and apply the global overrides.
fn load_config(cli: &Cli) -> Result<GlobalConfig> {
    let mut cfg = match &cli.config {
        Some(path) => GlobalConfig::load(path)?,
        None => GlobalConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Execute a parsed command line and return the text to print.
pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let out = |name: &str| cli.out.join(name);
    let seed = cfg.simulation.seed;
    let mut msg = String::new();

    match &cli.command {
        Command::Synth { scenario } => match scenario {
            Scenario::Calibration => {
                let trace = synth::calibration_trace(&cfg, seed)?;
                trace.save(&out("trace.csv"))?;
                synth::anchors_for(&cfg)?.save(&out("anchors.txt"))?;
                let _ = writeln!(msg, "wrote {} ({} samples)", out("trace.csv").display(), trace.len());
                let _ = writeln!(msg, "wrote {}", out("anchors.txt").display());
            }
            Scenario::Press(args) => {
                let calib = synth::default_calibration(&cfg)?;
                let speed = args.speed.unwrap_or(cfg.synth.default_speed);
                let trace = synth::press_trace(&cfg, &calib, args.key, speed, args.count, args.noise, seed)?;
                trace.save(&out("trace.csv"))?;
                let _ = writeln!(msg, "wrote {} ({} samples)", out("trace.csv").display(), trace.len());
            }
            Scenario::Scale { noise } => {
                let calib = synth::default_calibration(&cfg)?;
                let trace = synth::scale_trace(&cfg, &calib, *noise, seed)?;
                trace.save(&out("trace.csv"))?;
                let _ = writeln!(msg, "wrote {} ({} samples)", out("trace.csv").display(), trace.len());
            }
            Scenario::Sweep { samples } => {
                let n = samples.unwrap_or(cfg.analysis.samples);
                let dirs = synth::band_sweep(n, cfg.synth.band_elevation, seed)?;
                dirs.save(&out("device_dirs.csv"))?;
                let _ = writeln!(msg, "wrote {} ({n} directions)", out("device_dirs.csv").display());
            }
            Scenario::ThumbCap { samples } => {
                let n = samples.unwrap_or(cfg.analysis.samples);
                let dirs = synth::thumb_cap(n, cfg.synth.thumb_cap_half_angle, seed.wrapping_add(1))?;
                dirs.save(&out("thumb_dirs.csv"))?;
                let _ = writeln!(msg, "wrote {} ({n} directions)", out("thumb_dirs.csv").display());
            }
        },

        Command::Calibrate { trace, anchors } => {
            let trace = SensorTrace::load(trace)?;
            trace.validate_codes(&cfg.divider)?;
            let anchors = EncoderAnchors::load(anchors)?;
            let calib = calibrate_from_trace(&trace, &anchors)?;
            calib.save(&out("calibration.txt"))?;
            msg.push_str(&calib.to_kv());
        }

        Command::Simulate { trace, calibration, mode, midi } => {
            let trace = SensorTrace::load(trace)?;
            trace.validate_codes(&cfg.divider)?;
            let calib = CalibrationSet::load(calibration)?;
            let mut sim = cfg.simulation.clone();
            if let Some(m) = mode {
                sim.mode = match m {
                    ModeArg::Deterministic => Mode::Deterministic,
                    ModeArg::Concurrent => Mode::Concurrent,
                };
            }
            let log = run_engine(&trace, &calib, &cfg.rig()?, &cfg.latency, &sim, cli.verbose)?;
            write_file(&out("events.csv"), log.events_csv())?;
            write_file(&out("latency.csv"), log.latency_csv())?;
            let _ = writeln!(
                msg,
                "{} key-ons, {} intentions, {} paired, {} air presses",
                log.key_ons().count(),
                log.intentions.len(),
                log.latency.len(),
                log.air_presses.len()
            );
            let _ = writeln!(msg, "wrote {}", out("events.csv").display());
            let _ = writeln!(msg, "wrote {}", out("latency.csv").display());
            if cli.verbose {
                write_file(&out("steps.csv"), log.steps_csv())?;
                let _ = writeln!(msg, "wrote {}", out("steps.csv").display());
            }
            if *midi {
                save_midi(&log.key_events, &out("out.mid"))?;
                let _ = writeln!(msg, "wrote {}", out("out.mid").display());
            }
        }

        Command::Analyze { report } => match report {
            Report::Workspace { device, thumb, bins } => {
                let n_bins = bins.unwrap_or(cfg.analysis.n_bins);
                let report = WorkspaceReport::compute(&DirectionSet::load(device)?, &DirectionSet::load(thumb)?, n_bins)?;
                write_file(&out("workspace.txt"), report.to_kv())?;
                msg.push_str(&report.to_text());
            }
            Report::Latency { latency } => {
                let stats = latency_stats(&load_latency(latency)?, cfg.budget.latency_ms)?;
                write_file(&out("latency_report.txt"), stats.to_kv())?;
                msg.push_str(&stats.to_text());
            }
            Report::Range { calibration } => {
                let calib = match calibration {
                    Some(path) => CalibrationSet::load(path)?,
                    None => synth::default_calibration(&cfg)?,
                };
                let layout = cfg.keyboard()?;
                let report = range_increase(&cfg.mount, &cfg.geometry, &calib, &layout, &cfg.axis_h, &cfg.hand);
                write_file(&out("range.txt"), report.to_kv())?;
                msg.push_str(&report.to_text(&layout));
            }
            Report::Budget { latency } => {
                let measured = match latency {
                    Some(path) => Some(latency_stats(&load_latency(path)?, cfg.budget.latency_ms)?.mean),
                    None => None,
                };
                let layout = cfg.keyboard()?;
                let report = budget_check(cfg.budget_inputs(&layout), measured)?;
                write_file(&out("budget.txt"), report.to_kv())?;
                msg.push_str(&report.to_text());
            }
        },
    }
    Ok(msg)
}

fn load_latency(path: &Path) -> Result<Vec<crate::engine::LatencyRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EventLog::parse_latency_csv(&text).map_err(|e| match e {
        Error::Input(reason) => Error::parse(path, reason),
        other => other,
    })
}

/// Parse `args`, run, and report. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

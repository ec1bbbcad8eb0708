//! Trace-driven simulator and analysis toolkit for a supernumerary robotic
//! thumb that plays piano keys from a flex sensor on the thumb and an
//! accelerometer on the foot.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod control;
pub mod engine;
pub mod error;
pub mod kinematics;
pub mod midi;
pub mod piano;
pub mod plant;
pub mod sensors;
pub mod synth;

pub use config::GlobalConfig;
pub use error::{Error, Result};

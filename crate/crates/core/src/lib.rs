//! Scene model, synthesis, DSP, scheduling, manipulation, rendering and
//! scoring for the SoundShift audio-mixing engine.

pub mod dsp;
pub mod error;
pub mod format;
pub mod manipulate;
pub mod model;
pub mod presets;
pub mod render;
pub mod schedule;
pub mod scoring;
pub mod synth;
pub mod timeshift;
pub mod validate;
pub mod wav;

pub use error::{Error, Result, Violation};

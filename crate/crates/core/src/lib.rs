//! Three-dimensional psychoacoustic sonification.
//!
//! A position `(x, y, z)` relative to the listener is rendered as one continuous mono
//! sound: chroma motion for x, beats or roughness for y, fullness or brightness for z.
//! Besides the engine the crate carries the acoustic checks that each auditory cue
//! responds only to its own axis, the 16-field identification experiment and the
//! statistics used to evaluate it.

pub mod analysis;
pub mod experiment;
pub mod fixtures;
pub mod handoff;
pub mod psymap;
pub mod report;
pub mod stats;
pub mod synth;
pub mod wav;

pub use psymap::{default_config, map_position, MappingConfig, Position, SynthParams};
pub use synth::{AudioBlock, SynthState};

//! Position → synthesis-parameter mapping.
//!
//! Each axis drives its own auditory quality:
//!
//! | axis | negative direction            | positive direction          | distance cue |
//! |------|-------------------------------|-----------------------------|--------------|
//! | x    | counterclockwise chroma cycle | clockwise chroma cycle      | cycle speed  |
//! | y    | roughness                     | loudness fluctuation        | degree/speed |
//! | z    | brightness (back)             | loss of fullness (front)    | degree       |
//!
//! The origin is the listener; `(0, 0, 0)` renders a steady, full, unmodulated tone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("rejected input: coordinate {axis} is not finite ({value})")]
    NonFinite { axis: char, value: f64 },
    #[error("invalid mapping config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

/// The first violated [`MappingConfig`] constraint.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be finite and strictly positive (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error(
        "ranges overlap: need beat_rate_min ({beat_rate_min}) < beat_rate_max ({beat_rate_max}) < rough_mod_freq ({rough_mod_freq})"
    )]
    RangesOverlap {
        beat_rate_min: f64,
        beat_rate_max: f64,
        rough_mod_freq: f64,
    },
    #[error("f0 ({f0} Hz) must lie below the Nyquist frequency ({nyquist} Hz)")]
    BaseAboveNyquist { f0: f64, nyquist: f64 },
    #[error("spectral envelope never reaches the partial band [0, {nyquist_octaves:.3}] octaves")]
    EnvelopeOutsideBand { nyquist_octaves: f64 },
}

/// Normalized target coordinate relative to the listener. Components are clamped to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a position, saturating coordinates outside `[-1, 1]`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, MapError> {
        for (axis, value) in [('x', x), ('y', y), ('z', z)] {
            if !value.is_finite() {
                return Err(MapError::NonFinite { axis, value });
            }
        }
        Ok(Position {
            x: x.clamp(-1.0, 1.0),
            y: y.clamp(-1.0, 1.0),
            z: z.clamp(-1.0, 1.0),
        })
    }
}

/// The five psychoacoustic controls plus the loudness-normalizing gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Signed chroma cycles per second; positive is clockwise (heard as rising).
    pub chroma_rate: f64,
    /// Loudness fluctuation frequency in Hz; zero when the target is not above.
    pub beat_rate: f64,
    /// Roughness degree in `[0, 1]`; zero when the target is not below.
    pub roughness: f64,
    /// Fullness degree in `[0, 1]`.
    pub fullness: f64,
    /// Brightness degree in `[0, 1]`.
    pub brightness: f64,
    /// Linear output scale.
    pub master_gain: f64,
}

impl SynthParams {
    /// Origin parameters with a placeholder unit gain. Use [`neutral_params`] for a
    /// calibrated gain.
    pub const NEUTRAL: SynthParams = SynthParams {
        chroma_rate: 0.0,
        beat_rate: 0.0,
        roughness: 0.0,
        fullness: 1.0,
        brightness: 0.0,
        master_gain: 1.0,
    };
}

/// Tuning of the mapping and the synthesizer.
///
/// Deserializes from JSON where every field is optional and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    /// Maximum chroma speed in cycles per second, reached at |x| = 1.
    pub r_max: f64,
    pub beat_rate_min: f64,
    pub beat_rate_max: f64,
    /// Amplitude-modulation frequency used for roughness, Hz.
    pub rough_mod_freq: f64,
    pub curve_exponent_x: f64,
    pub curve_exponent_y: f64,
    pub curve_exponent_z: f64,
    /// Frequency of the lowest partial slot, Hz.
    pub f0: f64,
    /// Envelope center above `f0` at zero brightness, octaves.
    pub envelope_center_octaves: f64,
    /// Envelope half-width at full fullness, octaves.
    pub envelope_width_max_octaves: f64,
    /// Envelope center shift at full brightness, octaves.
    pub brightness_shift_max_octaves: f64,
    pub sample_rate: f64,
    /// Frames per render block; also the length of the parameter ramp.
    pub block_size: usize,
}

impl Default for MappingConfig {
    fn default() -> Self {
        default_config()
    }
}

pub fn default_config() -> MappingConfig {
    MappingConfig {
        r_max: 1.0,
        beat_rate_min: 0.5,
        beat_rate_max: 8.0,
        rough_mod_freq: 70.0,
        curve_exponent_x: 1.0,
        curve_exponent_y: 1.0,
        curve_exponent_z: 1.0,
        f0: 55.0,
        envelope_center_octaves: 4.0,
        envelope_width_max_octaves: 3.0,
        brightness_shift_max_octaves: 2.0,
        sample_rate: 48_000.0,
        block_size: 1024,
    }
}

impl MappingConfig {
    pub fn nyquist(&self) -> f64 {
        0.5 * self.sample_rate
    }

    /// Height of the Nyquist frequency above `f0`, in octaves.
    pub fn nyquist_octaves(&self) -> f64 {
        (self.nyquist() / self.f0).log2()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_config(self)
    }
}

/// Accepts iff every config invariant holds; otherwise reports the first violation.
pub fn validate_config(cfg: &MappingConfig) -> Result<(), ConfigError> {
    let positive = [
        ("r_max", cfg.r_max),
        ("beat_rate_min", cfg.beat_rate_min),
        ("beat_rate_max", cfg.beat_rate_max),
        ("rough_mod_freq", cfg.rough_mod_freq),
        ("curve_exponent_x", cfg.curve_exponent_x),
        ("curve_exponent_y", cfg.curve_exponent_y),
        ("curve_exponent_z", cfg.curve_exponent_z),
        ("f0", cfg.f0),
        ("envelope_center_octaves", cfg.envelope_center_octaves),
        ("envelope_width_max_octaves", cfg.envelope_width_max_octaves),
        ("brightness_shift_max_octaves", cfg.brightness_shift_max_octaves),
        ("sample_rate", cfg.sample_rate),
        ("block_size", cfg.block_size as f64),
    ];
    for (field, value) in positive {
        if !(value.is_finite() && value > 0.0) {
            return Err(ConfigError::NotPositive { field, value });
        }
    }
    if !(cfg.beat_rate_min < cfg.beat_rate_max && cfg.beat_rate_max < cfg.rough_mod_freq) {
        return Err(ConfigError::RangesOverlap {
            beat_rate_min: cfg.beat_rate_min,
            beat_rate_max: cfg.beat_rate_max,
            rough_mod_freq: cfg.rough_mod_freq,
        });
    }
    if cfg.f0 >= cfg.nyquist() {
        return Err(ConfigError::BaseAboveNyquist {
            f0: cfg.f0,
            nyquist: cfg.nyquist(),
        });
    }
    // The narrowest, lowest window must still overlap the playable band.
    let nyquist_octaves = cfg.nyquist_octaves();
    let lo = cfg.envelope_center_octaves - synth::FULLNESS_FLOOR_OCTAVES;
    let hi = cfg.envelope_center_octaves
        + cfg.brightness_shift_max_octaves
        + synth::FULLNESS_FLOOR_OCTAVES;
    if hi <= 0.0 || lo >= nyquist_octaves {
        return Err(ConfigError::EnvelopeOutsideBand { nyquist_octaves });
    }
    Ok(())
}

fn shaped(magnitude: f64, exponent: f64) -> f64 {
    magnitude.abs().powf(exponent)
}

/// Maps a position to the parameters that sonify it.
pub fn map_position(pos: Position, cfg: &MappingConfig) -> Result<SynthParams, MapError> {
    let pos = Position::new(pos.x, pos.y, pos.z)?;
    validate_config(cfg)?;

    let chroma_rate = pos.x.signum() * cfg.r_max * shaped(pos.x, cfg.curve_exponent_x);
    let chroma_rate = if pos.x == 0.0 { 0.0 } else { chroma_rate };

    let (beat_rate, roughness) = if pos.y > 0.0 {
        let span = cfg.beat_rate_max - cfg.beat_rate_min;
        (cfg.beat_rate_min + span * shaped(pos.y, cfg.curve_exponent_y), 0.0)
    } else if pos.y < 0.0 {
        (0.0, shaped(pos.y, cfg.curve_exponent_y))
    } else {
        (0.0, 0.0)
    };

    let (fullness, brightness) = if pos.z >= 0.0 {
        (1.0 - shaped(pos.z, cfg.curve_exponent_z), 0.0)
    } else {
        (1.0, shaped(pos.z, cfg.curve_exponent_z))
    };

    let mut params = SynthParams {
        chroma_rate,
        beat_rate,
        roughness,
        fullness,
        brightness,
        master_gain: 1.0,
    };
    params.master_gain = synth::loudness_normalize(&params, cfg)?;
    Ok(params)
}

/// Calibrated parameters for the origin.
pub fn neutral_params(cfg: &MappingConfig) -> Result<SynthParams, MapError> {
    map_position(Position::ORIGIN, cfg)
}

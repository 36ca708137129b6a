//! Shepard partial bank under a movable log-frequency window, amplitude modulated for
//! beats or roughness and normalized to a fixed RMS level.
//!
//! Partial slot `k` sounds at `f0 * 2^(k + φ)` where `φ` is the chroma phase. When `φ`
//! wraps past 1 every physical partial moves up one slot, so oscillator phases are
//! shifted along with it and the waveform stays continuous. Newly created slots always
//! enter outside the spectral window (below it or above Nyquist) and are silent.
//!
//! All smoothing is per sample and independent of how the caller splits the stream into
//! blocks: rendering `N` then `M` frames is sample-identical to rendering `N + M`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::psymap::{self, MapError, MappingConfig, Position, SynthParams};

/// Long-term RMS every render is normalized to (about -14 dBFS).
pub const CALIBRATION_RMS: f64 = 0.2;
/// Modulation depth of the loudness-fluctuation branch.
pub const BEAT_DEPTH: f64 = 0.8;
/// Smallest envelope half-width, octaves. Guarantees at least one partial holds
/// half the peak weight at every chroma phase.
pub const FULLNESS_FLOOR_OCTAVES: f64 = 1.0;

const MIN_WEIGHT_ENERGY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("configuration error: state built for {state} Hz, config says {config} Hz")]
    SampleRateMismatch { state: f64, config: f64 },
    #[error("empty spectrum: no partial falls inside the spectral envelope")]
    EmptySpectrum,
    #[error("frame count must be positive")]
    EmptyRequest,
    #[error("invalid config: {0}")]
    Config(#[from] psymap::ConfigError),
}

/// Mono samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    pub samples: Vec<f32>,
    pub sample_rate: f64,
}

impl AudioBlock {
    pub fn new(samples: Vec<f32>, sample_rate: f64) -> Self {
        AudioBlock {
            samples,
            sample_rate,
        }
    }

    pub fn silence(frames: usize, sample_rate: f64) -> Self {
        AudioBlock::new(vec![0.0; frames], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Joins consecutive blocks of the same rate.
    pub fn concat<'a>(blocks: impl IntoIterator<Item = &'a AudioBlock>) -> Option<AudioBlock> {
        let mut iter = blocks.into_iter();
        let first = iter.next()?;
        let mut out = first.clone();
        for b in iter {
            if b.sample_rate != out.sample_rate {
                return None;
            }
            out.samples.extend_from_slice(&b.samples);
        }
        Some(out)
    }
}

/// Phases of the two modulators, radians in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModPhases {
    pub beat: f64,
    pub rough: f64,
}

/// Partial frequencies `f0 * 2^(k + φ)` up to Nyquist, ascending.
pub fn partial_frequencies(chroma_phase: f64, cfg: &MappingConfig) -> Vec<f64> {
    let nyquist = cfg.nyquist();
    (0..)
        .map(|k| cfg.f0 * (k as f64 + chroma_phase).exp2())
        .take_while(|&f| f <= nyquist)
        .collect()
}

/// Center and half-width of the spectral window, in octaves above `f0`.
pub fn envelope_shape(fullness: f64, brightness: f64, cfg: &MappingConfig) -> (f64, f64) {
    let fullness = fullness.clamp(0.0, 1.0);
    let brightness = brightness.clamp(0.0, 1.0);
    let center = cfg.envelope_center_octaves + brightness * cfg.brightness_shift_max_octaves;
    let floor = FULLNESS_FLOOR_OCTAVES.min(cfg.envelope_width_max_octaves);
    let half_width = floor + fullness * (cfg.envelope_width_max_octaves - floor);
    (center, half_width)
}

#[inline]
fn raised_cosine(offset: f64, half_width: f64) -> f64 {
    if offset.abs() >= half_width {
        0.0
    } else {
        0.5 * (1.0 + (PI * offset / half_width).cos())
    }
}

/// Window weight of a partial at `freq`.
pub fn envelope_weight(freq: f64, fullness: f64, brightness: f64, cfg: &MappingConfig) -> f64 {
    if !(freq > 0.0) {
        return 0.0;
    }
    let (center, half_width) = envelope_shape(fullness, brightness, cfg);
    raised_cosine((freq / cfg.f0).log2() - center, half_width)
}

/// Antiderivative of the squared raised cosine, offset `d` in `[-h, h]`.
fn squared_window_integral(d: f64, half_width: f64) -> f64 {
    let u = PI * d / half_width;
    0.25 * (half_width / PI) * (1.5 * u + 2.0 * u.sin() + 0.25 * (2.0 * u).sin())
}

/// Sum of squared partial weights averaged over one chroma cycle.
///
/// Over a full cycle the partial slots sweep every log-frequency in `[0, nyquist]`
/// exactly once, so the average is the integral of the squared window over that band.
pub fn mean_weight_energy(center: f64, half_width: f64, cfg: &MappingConfig) -> f64 {
    let lo = (-half_width).max(-center);
    let hi = half_width.min(cfg.nyquist_octaves() - center);
    if hi <= lo {
        return 0.0;
    }
    squared_window_integral(hi, half_width) - squared_window_integral(lo, half_width)
}

/// Sum of squared partial weights at a given chroma phase.
pub fn weight_energy(chroma_phase: f64, fullness: f64, brightness: f64, cfg: &MappingConfig) -> f64 {
    partial_frequencies(chroma_phase, cfg)
        .into_iter()
        .map(|f| envelope_weight(f, fullness, brightness, cfg).powi(2))
        .sum()
}

/// Depth of the loudness-fluctuation branch; fades in below `beat_rate_min` so that a
/// ramp towards zero rate is continuous.
pub fn beat_depth(params: &SynthParams, cfg: &MappingConfig) -> f64 {
    if params.beat_rate <= 0.0 {
        0.0
    } else {
        BEAT_DEPTH * (params.beat_rate / cfg.beat_rate_min).min(1.0)
    }
}

#[inline]
fn am_factor(depth: f64, phase: f64) -> f64 {
    1.0 - 0.5 * depth + 0.5 * depth * phase.cos()
}

/// Instantaneous amplitude-modulation gain in `[0, 1]`.
pub fn modulation_gain(params: &SynthParams, phases: ModPhases, cfg: &MappingConfig) -> f64 {
    let beats = am_factor(beat_depth(params, cfg), phases.beat);
    let rough = am_factor(params.roughness.clamp(0.0, 1.0), phases.rough);
    beats * rough
}

/// Time average of the squared modulation gain.
pub fn modulation_mean_square(params: &SynthParams, cfg: &MappingConfig) -> f64 {
    let ms = |d: f64| (1.0 - 0.5 * d).powi(2) + d * d / 8.0;
    ms(beat_depth(params, cfg)) * ms(params.roughness.clamp(0.0, 1.0))
}

/// Gain that brings the modulation- and chroma-averaged RMS of the partial bank to
/// [`CALIBRATION_RMS`].
pub fn loudness_normalize(params: &SynthParams, cfg: &MappingConfig) -> Result<f64, SynthError> {
    let (center, half_width) = envelope_shape(params.fullness, params.brightness, cfg);
    let energy = mean_weight_energy(center, half_width, cfg);
    if !(energy > MIN_WEIGHT_ENERGY) {
        return Err(SynthError::EmptySpectrum);
    }
    let power = 0.5 * energy * modulation_mean_square(params, cfg);
    Ok(CALIBRATION_RMS / power.sqrt())
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn lerp_params(a: &SynthParams, b: &SynthParams, t: f64) -> SynthParams {
    SynthParams {
        chroma_rate: lerp(a.chroma_rate, b.chroma_rate, t),
        beat_rate: lerp(a.beat_rate, b.beat_rate, t),
        roughness: lerp(a.roughness, b.roughness, t),
        fullness: lerp(a.fullness, b.fullness, t),
        brightness: lerp(a.brightness, b.brightness, t),
        master_gain: lerp(a.master_gain, b.master_gain, t),
    }
}

#[inline]
fn wrap_tau(phase: f64) -> f64 {
    if phase >= TAU {
        phase - TAU
    } else {
        phase
    }
}

/// Oscillator and smoothing state of one sonification stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthState {
    sample_rate: f64,
    chroma_phase: f64,
    partial_phases: Vec<f64>,
    partial_base_incr: Vec<f64>,
    mod_phases: ModPhases,
    ramp_from: SynthParams,
    current: SynthParams,
    target: SynthParams,
    ramp_pos: usize,
    ramp_len: usize,
}

impl SynthState {
    /// Steady state at `params` with all oscillator phases at zero.
    pub fn new(cfg: &MappingConfig, params: SynthParams) -> Result<Self, SynthError> {
        psymap::validate_config(cfg)?;
        let slots = cfg.nyquist_octaves().floor() as usize + 1;
        let partial_base_incr = (0..slots)
            .map(|k| TAU * cfg.f0 * (k as f64).exp2() / cfg.sample_rate)
            .collect();
        Ok(SynthState {
            sample_rate: cfg.sample_rate,
            chroma_phase: 0.0,
            partial_phases: vec![0.0; slots],
            partial_base_incr,
            mod_phases: ModPhases::default(),
            ramp_from: params,
            current: params,
            target: params,
            ramp_pos: 0,
            ramp_len: 0,
        })
    }

    /// Steady state at the calibrated origin parameters.
    pub fn neutral(cfg: &MappingConfig) -> Result<Self, MapError> {
        let params = psymap::neutral_params(cfg)?;
        Ok(SynthState::new(cfg, params)?)
    }

    /// Like [`SynthState::new`] but with seeded random partial phases.
    pub fn with_random_phases(
        cfg: &MappingConfig,
        params: SynthParams,
        seed: u64,
    ) -> Result<Self, SynthError> {
        let mut state = SynthState::new(cfg, params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut state.partial_phases {
            *p = rng.random_range(0.0..TAU);
        }
        Ok(state)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn chroma_phase(&self) -> f64 {
        self.chroma_phase
    }

    pub fn partial_phases(&self) -> &[f64] {
        &self.partial_phases
    }

    pub fn mod_phases(&self) -> ModPhases {
        self.mod_phases
    }

    /// Parameters in effect at the last rendered sample.
    pub fn current_params(&self) -> SynthParams {
        self.current
    }

    pub fn param_target(&self) -> SynthParams {
        self.target
    }

    /// Offsets the chroma phase, e.g. for listening variety.
    pub fn set_chroma_phase(&mut self, phase: f64) {
        self.chroma_phase = phase.rem_euclid(1.0);
    }

    fn retarget(&mut self, target: &SynthParams, ramp_len: usize) {
        if *target != self.target {
            self.ramp_from = self.current;
            self.target = *target;
            self.ramp_pos = 0;
            self.ramp_len = ramp_len;
        }
    }

    fn shift_slots_up(&mut self) {
        self.partial_phases.rotate_right(1);
        self.partial_phases[0] = 0.0;
    }

    fn shift_slots_down(&mut self) {
        self.partial_phases.rotate_left(1);
        if let Some(last) = self.partial_phases.last_mut() {
            *last = 0.0;
        }
    }

    #[inline]
    fn next_sample(&mut self, cfg: &MappingConfig, nyquist_octaves: f64) -> f32 {
        if self.ramp_pos < self.ramp_len {
            self.ramp_pos += 1;
            let t = self.ramp_pos as f64 / self.ramp_len as f64;
            self.current = lerp_params(&self.ramp_from, &self.target, t);
        } else {
            self.current = self.target;
        }
        let p = self.current;

        let (center, half_width) = envelope_shape(p.fullness, p.brightness, cfg);
        let octave_scale = self.chroma_phase.exp2();
        let mut acc = 0.0;
        let mut energy = 0.0;
        for (k, (phase, base)) in self
            .partial_phases
            .iter_mut()
            .zip(&self.partial_base_incr)
            .enumerate()
        {
            let height = k as f64 + self.chroma_phase;
            if height <= nyquist_octaves {
                let w = raised_cosine(height - center, half_width);
                if w > 0.0 {
                    acc += w * phase.sin();
                    energy += w * w;
                }
            }
            *phase = wrap_tau(*phase + base * octave_scale);
        }

        let y = if energy > MIN_WEIGHT_ENERGY {
            let flatten = (mean_weight_energy(center, half_width, cfg) / energy).sqrt();
            p.master_gain * flatten * modulation_gain(&p, self.mod_phases, cfg) * acc
        } else {
            0.0
        };

        let sr = self.sample_rate;
        self.mod_phases.beat = (self.mod_phases.beat + TAU * p.beat_rate / sr).rem_euclid(TAU);
        self.mod_phases.rough = wrap_tau(self.mod_phases.rough + TAU * cfg.rough_mod_freq / sr);

        self.chroma_phase += p.chroma_rate / sr;
        if self.chroma_phase >= 1.0 {
            self.chroma_phase -= 1.0;
            self.shift_slots_up();
        } else if self.chroma_phase < 0.0 {
            self.chroma_phase += 1.0;
            self.shift_slots_down();
        }

        y.clamp(-1.0, 1.0) as f32
    }

    /// Renders `out.len()` frames towards `target`. Allocation-free.
    pub fn render_into(
        &mut self,
        target: &SynthParams,
        out: &mut [f32],
        cfg: &MappingConfig,
    ) -> Result<(), SynthError> {
        if cfg.sample_rate != self.sample_rate {
            return Err(SynthError::SampleRateMismatch {
                state: self.sample_rate,
                config: cfg.sample_rate,
            });
        }
        self.retarget(target, cfg.block_size);
        let nyquist_octaves = cfg.nyquist_octaves();
        for s in out.iter_mut() {
            *s = self.next_sample(cfg, nyquist_octaves);
        }
        Ok(())
    }

    /// Renders `nframes` frames towards `target`. Changed targets are reached by a
    /// linear ramp lasting `cfg.block_size` frames.
    pub fn render(
        &mut self,
        target: &SynthParams,
        nframes: usize,
        cfg: &MappingConfig,
    ) -> Result<AudioBlock, SynthError> {
        if nframes == 0 {
            return Err(SynthError::EmptyRequest);
        }
        let mut samples = vec![0.0f32; nframes];
        self.render_into(target, &mut samples, cfg)?;
        Ok(AudioBlock::new(samples, self.sample_rate))
    }
}

/// Free-function form of [`SynthState::render`].
pub fn render(
    state: &mut SynthState,
    params_target: &SynthParams,
    nframes: usize,
    cfg: &MappingConfig,
) -> Result<AudioBlock, SynthError> {
    state.render(params_target, nframes, cfg)
}

/// Steady-state rendering of `params` for `seconds`.
pub fn render_params(
    params: &SynthParams,
    seconds: f64,
    cfg: &MappingConfig,
) -> Result<AudioBlock, SynthError> {
    let frames = (seconds * cfg.sample_rate).round() as usize;
    SynthState::new(cfg, *params)?.render(params, frames, cfg)
}

/// Maps `pos` and renders it from a steady state for `seconds`.
pub fn render_position(
    pos: Position,
    seconds: f64,
    cfg: &MappingConfig,
) -> Result<AudioBlock, MapError> {
    let params = psymap::map_position(pos, cfg)?;
    Ok(render_params(&params, seconds, cfg)?)
}

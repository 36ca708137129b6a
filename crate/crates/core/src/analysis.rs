//! Acoustic correlates of the three sonified axes and the orthogonality sweep.
//!
//! * level: long-term RMS
//! * spectral shape: centroid and spread of the frame-averaged power spectrum on a
//!   log2-frequency axis
//! * modulation: dominant frequency and depth of the low-passed RMS envelope;
//!   20 Hz low-pass for loudness fluctuation, 300 Hz for roughness
//! * chroma motion: drift of the octave-folded spectrum over time

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::psymap::{MapError, MappingConfig, Position};
use crate::synth::{self, AudioBlock, CALIBRATION_RMS};

pub const FRAME_LEN: usize = 4096;
pub const HOP_LEN: usize = FRAME_LEN / 4;
/// Level reported for digital silence, dB.
pub const RMS_FLOOR_DB: f64 = -240.0;
/// Bins whose power is below this fraction of the spectral peak are left out of the
/// shape statistics.
pub const SPECTRAL_FLOOR: f64 = 1e-6;
/// Envelope depth below which a signal counts as unmodulated.
pub const MOD_DETECT_DEPTH: f64 = 0.02;
pub const BEAT_LOWPASS_HZ: f64 = 20.0;
pub const ROUGH_LOWPASS_HZ: f64 = 300.0;
pub const BEAT_BAND: (f64, f64) = (0.25, 20.0);
pub const ROUGH_BAND: (f64, f64) = (20.0, 150.0);
pub const MIN_FEATURE_SECONDS: f64 = 1.0;
pub const MIN_CHROMA_SECONDS: f64 = 4.0;
/// Per-point render length of the orthogonality sweep.
pub const SWEEP_SECONDS: f64 = 4.0;

const ENVELOPE_RATE: f64 = 2400.0;
const FILTER_SETTLE_SECONDS: f64 = 0.1;
const CHROMA_MIN_CONCENTRATION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("input too short: {got:.3} s, need at least {need:.3} s")]
    TooShort { got: f64, need: f64 },
    #[error("no stable octave-folded spectral peak to track")]
    NoStablePeak,
    #[error("blocks have inconsistent sample rates")]
    MixedRates,
    #[error("sweep needs at least 3 points per axis, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Level relative to the calibration RMS, dB.
    pub rms_db: f64,
    /// Spectral centroid, octaves above `f0`.
    pub centroid_octaves: f64,
    /// Spectral spread around the centroid, octaves.
    pub bandwidth_octaves: f64,
    /// Dominant envelope modulation frequency; 0 when unmodulated.
    pub mod_freq_hz: f64,
    pub mod_depth: f64,
    /// Signed chroma cycles per second.
    pub chroma_rate_est: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    RmsDb,
    CentroidOctaves,
    BandwidthOctaves,
    ModFreqHz,
    ModDepth,
    ChromaRateEst,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::RmsDb,
        Feature::CentroidOctaves,
        Feature::BandwidthOctaves,
        Feature::ModFreqHz,
        Feature::ModDepth,
        Feature::ChromaRateEst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::RmsDb => "rms_db",
            Feature::CentroidOctaves => "centroid_oct",
            Feature::BandwidthOctaves => "bandwidth_oct",
            Feature::ModFreqHz => "mod_freq_hz",
            Feature::ModDepth => "mod_depth",
            Feature::ChromaRateEst => "chroma_rate",
        }
    }

    pub fn index(self) -> usize {
        Feature::ALL.iter().position(|&f| f == self).unwrap()
    }
}

impl FeatureVector {
    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::RmsDb => self.rms_db,
            Feature::CentroidOctaves => self.centroid_octaves,
            Feature::BandwidthOctaves => self.bandwidth_octaves,
            Feature::ModFreqHz => self.mod_freq_hz,
            Feature::ModDepth => self.mod_depth,
            Feature::ChromaRateEst => self.chroma_rate_est,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn position(self, value: f64) -> Position {
        let mut p = Position::ORIGIN;
        match self {
            Axis::X => p.x = value,
            Axis::Y => p.y = value,
            Axis::Z => p.z = value,
        }
        p
    }
}

/// Peak-to-peak variation of every feature (columns, [`Feature::ALL`] order) under each
/// single-axis sweep (rows, x/y/z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    pub rows: [[f64; 6]; 3],
}

impl SensitivityMatrix {
    pub fn get(&self, axis: Axis, feature: Feature) -> f64 {
        self.rows[axis.index()][feature.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: Axis,
    pub coordinate: f64,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points_per_axis: usize,
    pub seconds_per_point: f64,
    pub matrix: SensitivityMatrix,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn axis_points(&self, axis: Axis) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(move |p| p.axis == axis)
    }

    /// Plain-text rendering: the sensitivity matrix followed by every point.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "peak-to-peak feature variation ({} points/axis, {} s each)",
            self.points_per_axis, self.seconds_per_point
        );
        let _ = write!(s, "{:>6}", "sweep");
        for f in Feature::ALL {
            let _ = write!(s, " {:>14}", f.name());
        }
        s.push('\n');
        for axis in Axis::ALL {
            let _ = write!(s, "{:>6}", format!("{axis:?}").to_lowercase());
            for f in Feature::ALL {
                let _ = write!(s, " {:>14.5}", self.matrix.get(axis, f));
            }
            s.push('\n');
        }
        s.push('\n');
        let _ = write!(s, "{:>6} {:>7}", "axis", "coord");
        for f in Feature::ALL {
            let _ = write!(s, " {:>14}", f.name());
        }
        s.push('\n');
        for p in &self.points {
            let _ = write!(
                s,
                "{:>6} {:>7.3}",
                format!("{:?}", p.axis).to_lowercase(),
                p.coordinate
            );
            for f in Feature::ALL {
                let _ = write!(s, " {:>14.5}", p.features.get(f));
            }
            s.push('\n');
        }
        s
    }
}

/// RMS level in dB relative to full scale (a full-scale square wave reads 0 dB).
pub fn rms(audio: &AudioBlock) -> f64 {
    rms_of(&audio.samples)
}

fn rms_of(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return RMS_FLOOR_DB;
    }
    // Block-wise accumulation keeps the rounding error small for long inputs.
    let sum_sq: f64 = samples
        .chunks(4096)
        .map(|c| c.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>())
        .sum();
    let mean = sum_sq / samples.len() as f64;
    if mean <= 0.0 {
        RMS_FLOOR_DB
    } else {
        (10.0 * mean.log10()).max(RMS_FLOOR_DB)
    }
}

/// RMS level relative to [`CALIBRATION_RMS`], dB.
pub fn rms_re_calibration(audio: &AudioBlock) -> f64 {
    let db = rms(audio);
    if db <= RMS_FLOOR_DB {
        RMS_FLOOR_DB
    } else {
        db - 20.0 * CALIBRATION_RMS.log10()
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (TAU * n as f64 / len as f64).cos())
        .collect()
}

/// Short-time spectral analysis with a fixed Hann frame.
struct FrameAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    sample_rate: f64,
}

impl FrameAnalyzer {
    fn new(sample_rate: f64) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(FRAME_LEN);
        FrameAnalyzer {
            fft,
            window: hann(FRAME_LEN),
            sample_rate,
        }
    }

    fn bin_freq(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / FRAME_LEN as f64
    }

    fn frames(len: usize) -> usize {
        if len < FRAME_LEN {
            0
        } else {
            (len - FRAME_LEN) / HOP_LEN + 1
        }
    }

    fn magnitudes(&self, frame: &[f32], buf: &mut [Complex<f64>], out: &mut [f64]) {
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x as f64 * w, 0.0);
        }
        self.fft.process(buf);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.norm();
        }
    }

    /// Power spectrum averaged over all frames, bins `0..=FRAME_LEN/2`.
    fn mean_power(&self, samples: &[f32]) -> Vec<f64> {
        let half = FRAME_LEN / 2 + 1;
        let mut acc = vec![0.0; half];
        let mut buf = vec![Complex::new(0.0, 0.0); FRAME_LEN];
        let mut mag = vec![0.0; half];
        let n = Self::frames(samples.len());
        for i in 0..n {
            let start = i * HOP_LEN;
            self.magnitudes(&samples[start..start + FRAME_LEN], &mut buf, &mut mag);
            for (a, m) in acc.iter_mut().zip(&mag) {
                *a += m * m;
            }
        }
        if n > 0 {
            for a in &mut acc {
                *a /= n as f64;
            }
        }
        acc
    }
}

/// Centroid and spread of a power spectrum over `[f0, nyquist)` in log2 frequency.
fn log_spectral_shape(analyzer: &FrameAnalyzer, mag: &[f64], f0: f64) -> (f64, f64) {
    let nyquist = 0.5 * analyzer.sample_rate;
    let bins: Vec<(f64, f64)> = (1..mag.len())
        .map(|b| (analyzer.bin_freq(b), mag[b]))
        .filter(|&(f, _)| f >= f0 && f < nyquist)
        .collect();
    let peak = bins.iter().map(|&(_, m)| m).fold(0.0, f64::max);
    if peak <= 0.0 {
        return (0.0, 0.0);
    }
    let floor = peak * SPECTRAL_FLOOR;
    let (mut total, mut first) = (0.0, 0.0);
    for &(f, m) in bins.iter().filter(|&&(_, m)| m >= floor) {
        total += m;
        first += m * (f / f0).log2();
    }
    let centroid = first / total;
    let second: f64 = bins
        .iter()
        .filter(|&&(_, m)| m >= floor)
        .map(|&(f, m)| m * ((f / f0).log2() - centroid).powi(2))
        .sum();
    (centroid, (second / total).sqrt())
}

/// Butterworth low-pass of order 4 as two cascaded biquads.
struct LowPass4 {
    stages: [Biquad; 2],
}

struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = TAU * cutoff / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let cos = w0.cos();
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Biquad {
            b: [0.5 * b1, b1, 0.5 * b1],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            z: [0.0; 2],
        }
    }

    #[inline]
    fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

impl LowPass4 {
    fn new(cutoff: f64, sample_rate: f64) -> Self {
        // Pole-pair quality factors of a 4th-order Butterworth.
        let q1 = 1.0 / (2.0 * (PI / 8.0).cos());
        let q2 = 1.0 / (2.0 * (3.0 * PI / 8.0).cos());
        LowPass4 {
            stages: [
                Biquad::lowpass(cutoff, q1, sample_rate),
                Biquad::lowpass(cutoff, q2, sample_rate),
            ],
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.stages[0].process(x);
        self.stages[1].process(y)
    }
}

/// Square-law, low-passed and decimated RMS envelope with the filter transient dropped.
/// Returns the envelope and its sample rate.
fn envelope(samples: &[f32], sample_rate: f64, cutoff: f64) -> (Vec<f64>, f64) {
    let step = ((sample_rate / ENVELOPE_RATE).floor() as usize).max(1);
    let rate = sample_rate / step as f64;
    let settle = (FILTER_SETTLE_SECONDS * sample_rate) as usize;
    let mut lp = LowPass4::new(cutoff, sample_rate);
    let mut out = Vec::with_capacity(samples.len() / step + 1);
    for (n, &x) in samples.iter().enumerate() {
        let x = x as f64;
        let y = lp.process(x * x);
        if n >= settle && (n - settle) % step == 0 {
            out.push(y.max(0.0).sqrt());
        }
    }
    (out, rate)
}

/// Strongest envelope component inside `band`: `(frequency, depth)`.
fn envelope_peak(env: &[f64], rate: f64, band: (f64, f64)) -> (f64, f64) {
    if env.len() < 8 {
        return (0.0, 0.0);
    }
    let dc = env.iter().sum::<f64>() / env.len() as f64;
    if dc <= 0.0 {
        return (0.0, 0.0);
    }
    let window = hann(env.len());
    let coherent: f64 = window.iter().sum();
    let n = (8 * env.len()).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = env
        .iter()
        .zip(&window)
        .map(|(&e, &w)| Complex::new((e - dc) * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let resolution = rate / n as f64;
    let lo = ((band.0 / resolution).ceil() as usize).max(1);
    let hi = ((band.1 / resolution).floor() as usize).min(n / 2 - 1);
    if lo >= hi {
        return (0.0, 0.0);
    }
    let mag = |k: usize| buf[k].norm();
    let k = (lo..=hi).max_by(|&a, &b| mag(a).total_cmp(&mag(b))).unwrap();
    let (l, c, r) = (mag(k - 1), mag(k), mag(k + 1));
    let denom = l - 2.0 * c + r;
    let delta = if denom.abs() > 0.0 {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let peak_mag = c - 0.25 * (l - r) * delta;
    let amplitude = 2.0 * peak_mag / coherent;
    let depth = (2.0 * amplitude / (dc + amplitude)).clamp(0.0, 1.0);
    ((k as f64 + delta) * resolution, depth)
}

/// Dominant modulation `(frequency, depth)`; frequency is 0 below [`MOD_DETECT_DEPTH`].
fn modulation(samples: &[f32], sample_rate: f64) -> (f64, f64) {
    let (beat_env, beat_rate) = envelope(samples, sample_rate, BEAT_LOWPASS_HZ);
    let (rough_env, rough_rate) = envelope(samples, sample_rate, ROUGH_LOWPASS_HZ);
    let beats = envelope_peak(&beat_env, beat_rate, BEAT_BAND);
    let rough = envelope_peak(&rough_env, rough_rate, ROUGH_BAND);
    let (freq, depth) = if beats.1 >= rough.1 { beats } else { rough };
    if depth < MOD_DETECT_DEPTH {
        (0.0, depth)
    } else {
        (freq, depth)
    }
}

/// Per-frame pitch-class position of the octave-folded spectrum, in cycles, or `None`
/// when a frame has no concentrated pitch class.
fn chroma_track(samples: &[f32], cfg: &MappingConfig) -> Vec<Option<f64>> {
    let analyzer = FrameAnalyzer::new(cfg.sample_rate);
    let nyquist = cfg.nyquist();
    let half = FRAME_LEN / 2 + 1;
    let fold: Vec<(usize, f64, f64)> = (1..half)
        .filter_map(|b| {
            let f = analyzer.bin_freq(b);
            (f >= cfg.f0 && f < nyquist).then(|| {
                let pc = TAU * (f / cfg.f0).log2();
                (b, pc.cos(), pc.sin())
            })
        })
        .collect();
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME_LEN];
    let mut mag = vec![0.0; half];
    (0..FrameAnalyzer::frames(samples.len()))
        .map(|i| {
            let start = i * HOP_LEN;
            analyzer.magnitudes(&samples[start..start + FRAME_LEN], &mut buf, &mut mag);
            let (mut re, mut im, mut total) = (0.0, 0.0, 0.0);
            for &(b, c, s) in &fold {
                let p = mag[b] * mag[b];
                re += p * c;
                im += p * s;
                total += p;
            }
            let concentrated =
                total > 0.0 && (re * re + im * im).sqrt() >= CHROMA_MIN_CONCENTRATION * total;
            concentrated.then(|| im.atan2(re) / TAU)
        })
        .collect()
}

/// Least-squares slope of the unwrapped chroma track, cycles per second.
fn chroma_slope(track: &[Option<f64>], sample_rate: f64) -> Option<f64> {
    let stable = track.iter().filter(|t| t.is_some()).count();
    if stable < 2 || 2 * stable < track.len() {
        return None;
    }
    let hop_seconds = HOP_LEN as f64 / sample_rate;
    let mut points = Vec::with_capacity(stable);
    let mut prev: Option<f64> = None;
    let mut unwrapped = 0.0;
    for (i, pc) in track.iter().enumerate() {
        let Some(pc) = *pc else { continue };
        unwrapped = match prev {
            None => pc,
            Some(p) => {
                let mut d = pc - p;
                d -= d.round();
                unwrapped + d
            }
        };
        prev = Some(pc);
        points.push((i as f64 * hop_seconds, unwrapped));
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mc = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, c) in &points {
        num += (t - mt) * (c - mc);
        den += (t - mt) * (t - mt);
    }
    (den > 0.0).then(|| num / den)
}

/// Signed chroma speed of a stream given as consecutive blocks.
pub fn estimate_chroma_rate(
    blocks: &[AudioBlock],
    cfg: &MappingConfig,
) -> Result<f64, AnalysisError> {
    let audio = AudioBlock::concat(blocks).ok_or(if blocks.is_empty() {
        AnalysisError::TooShort {
            got: 0.0,
            need: MIN_CHROMA_SECONDS,
        }
    } else {
        AnalysisError::MixedRates
    })?;
    if audio.duration() < MIN_CHROMA_SECONDS {
        return Err(AnalysisError::TooShort {
            got: audio.duration(),
            need: MIN_CHROMA_SECONDS,
        });
    }
    chroma_slope(&chroma_track(&audio.samples, cfg), audio.sample_rate)
        .ok_or(AnalysisError::NoStablePeak)
}

/// Full feature vector; the input must last at least [`MIN_FEATURE_SECONDS`].
///
/// The spectral statistics use `cfg.f0` as reference; the analysis runs at the audio's
/// own sample rate.
pub fn extract_features(
    audio: &AudioBlock,
    cfg: &MappingConfig,
) -> Result<FeatureVector, AnalysisError> {
    if audio.duration() < MIN_FEATURE_SECONDS {
        return Err(AnalysisError::TooShort {
            got: audio.duration(),
            need: MIN_FEATURE_SECONDS,
        });
    }
    let cfg = &MappingConfig {
        sample_rate: audio.sample_rate,
        ..cfg.clone()
    };
    let analyzer = FrameAnalyzer::new(audio.sample_rate);
    let power = analyzer.mean_power(&audio.samples);
    let (centroid_octaves, bandwidth_octaves) = log_spectral_shape(&analyzer, &power, cfg.f0);
    let (mod_freq_hz, mod_depth) = modulation(&audio.samples, audio.sample_rate);
    let chroma_rate_est =
        chroma_slope(&chroma_track(&audio.samples, cfg), audio.sample_rate).unwrap_or(0.0);
    Ok(FeatureVector {
        rms_db: rms_re_calibration(audio),
        centroid_octaves,
        bandwidth_octaves,
        mod_freq_hz,
        mod_depth,
        chroma_rate_est,
    })
}

/// Sweeps each axis over `[-1, 1]` with the others at 0 and records feature variation.
pub fn orthogonality_sweep(
    cfg: &MappingConfig,
    points_per_axis: usize,
) -> Result<SweepReport, AnalysisError> {
    orthogonality_sweep_for(cfg, points_per_axis, SWEEP_SECONDS)
}

pub fn orthogonality_sweep_for(
    cfg: &MappingConfig,
    points_per_axis: usize,
    seconds_per_point: f64,
) -> Result<SweepReport, AnalysisError> {
    if points_per_axis < 3 {
        return Err(AnalysisError::TooFewPoints(points_per_axis));
    }
    let jobs: Vec<(Axis, f64)> = Axis::ALL
        .iter()
        .flat_map(|&axis| {
            (0..points_per_axis).map(move |i| {
                let c = -1.0 + 2.0 * i as f64 / (points_per_axis - 1) as f64;
                // Snap the grid so the origin is hit exactly for odd point counts.
                (axis, (c * 1e12).round() / 1e12)
            })
        })
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(axis, coordinate)| {
            let audio = synth::render_position(axis.position(coordinate), seconds_per_point, cfg)?;
            Ok(SweepPoint {
                axis,
                coordinate,
                features: extract_features(&audio, cfg)?,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;

    let mut rows = [[0.0; 6]; 3];
    for axis in Axis::ALL {
        for f in Feature::ALL {
            let values = points
                .iter()
                .filter(|p| p.axis == axis)
                .map(|p| p.features.get(f));
            let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            rows[axis.index()][f.index()] = hi - lo;
        }
    }
    Ok(SweepReport {
        points_per_axis,
        seconds_per_point,
        matrix: SensitivityMatrix { rows },
        points,
    })
}

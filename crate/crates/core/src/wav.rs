//! Mono WAV input and output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::AudioBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitDepth {
    Int16,
    Int24,
    Float32,
}

impl BitDepth {
    pub fn bits(self) -> u16 {
        match self {
            BitDepth::Int16 => 16,
            BitDepth::Int24 => 24,
            BitDepth::Float32 => 32,
        }
    }
}

impl std::str::FromStr for BitDepth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "16" | "int16" => Ok(BitDepth::Int16),
            "24" | "int24" => Ok(BitDepth::Int24),
            "32f" | "f32" | "float" | "float32" => Ok(BitDepth::Float32),
            _ => Err(format!("unknown bit depth '{s}' (expected 16, 24 or f32)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavSpec {
    pub sample_rate: f64,
    pub bit_depth: BitDepth,
    pub channels: u16,
}

impl WavSpec {
    pub fn mono(sample_rate: f64, bit_depth: BitDepth) -> Self {
        WavSpec {
            sample_rate,
            bit_depth,
            channels: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("malformed wav: {0}")]
    Malformed(String),
    #[error("unsupported wav format: {0}")]
    Unsupported(String),
}

fn from_hound(err: hound::Error) -> WavError {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            WavError::Malformed(format!("truncated file: {e}"))
        }
        hound::Error::IoError(e) => WavError::Io(e),
        hound::Error::FormatError(m) => WavError::Malformed(m.to_string()),
        hound::Error::TooWide => WavError::Unsupported("sample too wide".into()),
        hound::Error::Unsupported => WavError::Unsupported("format not supported".into()),
        hound::Error::InvalidSampleFormat => WavError::Unsupported("invalid sample format".into()),
        other => WavError::Malformed(other.to_string()),
    }
}

/// Errors while reading samples mean the data chunk is shorter than declared.
fn data_error(err: hound::Error) -> WavError {
    match err {
        hound::Error::IoError(e) => WavError::Malformed(format!("truncated data chunk: {e}")),
        other => from_hound(other),
    }
}

fn hound_spec(spec: &WavSpec) -> Result<hound::WavSpec, WavError> {
    if spec.channels != 1 {
        return Err(WavError::Unsupported(format!(
            "{} channels; only mono is written",
            spec.channels
        )));
    }
    if !(spec.sample_rate.fract() == 0.0 && spec.sample_rate >= 1.0 && spec.sample_rate <= u32::MAX as f64) {
        return Err(WavError::SpecMismatch(format!(
            "sample rate {} is not a positive integer",
            spec.sample_rate
        )));
    }
    Ok(hound::WavSpec {
        channels: 1,
        sample_rate: spec.sample_rate as u32,
        bits_per_sample: spec.bit_depth.bits(),
        sample_format: match spec.bit_depth {
            BitDepth::Float32 => hound::SampleFormat::Float,
            _ => hound::SampleFormat::Int,
        },
    })
}

fn quantize(v: f32, bits: u16) -> i32 {
    let full = (1i64 << (bits - 1)) as f64;
    let q = (v as f64 * full).round();
    q.clamp(-full, full - 1.0) as i32
}

/// Writes `audio` to `path`; integer formats clip to `[-1, 1)`.
pub fn write_wav(audio: &AudioBlock, spec: &WavSpec, path: &Path) -> Result<(), WavError> {
    if audio.sample_rate != spec.sample_rate {
        return Err(WavError::SpecMismatch(format!(
            "audio at {} Hz, spec at {} Hz",
            audio.sample_rate, spec.sample_rate
        )));
    }
    let mut w = WavStreamWriter::create(path, spec)?;
    w.write(&audio.samples)?;
    w.finalize()
}

/// Incremental writer for streams of unknown length; the header is completed by
/// [`WavStreamWriter::finalize`].
pub struct WavStreamWriter {
    inner: hound::WavWriter<BufWriter<File>>,
    depth: BitDepth,
}

impl WavStreamWriter {
    pub fn create(path: &Path, spec: &WavSpec) -> Result<Self, WavError> {
        let hspec = hound_spec(spec)?;
        let file = BufWriter::new(File::create(path)?);
        Ok(WavStreamWriter {
            inner: hound::WavWriter::new(file, hspec).map_err(from_hound)?,
            depth: spec.bit_depth,
        })
    }

    pub fn write(&mut self, samples: &[f32]) -> Result<(), WavError> {
        for &s in samples {
            match self.depth {
                BitDepth::Float32 => self.inner.write_sample(s),
                BitDepth::Int16 => self.inner.write_sample(quantize(s, 16) as i16),
                BitDepth::Int24 => self.inner.write_sample(quantize(s, 24)),
            }
            .map_err(from_hound)?;
        }
        Ok(())
    }

    pub fn finalize(self) -> Result<(), WavError> {
        self.inner.finalize().map_err(from_hound)
    }
}

/// Reads a mono WAV file. A data chunk shorter than its header claims fails with
/// [`WavError::Malformed`].
pub fn read_wav(path: &Path) -> Result<(AudioBlock, WavSpec), WavError> {
    let mut r = hound::WavReader::open(path).map_err(from_hound)?;
    let h = r.spec();
    if h.channels != 1 {
        return Err(WavError::Unsupported(format!(
            "{} channels; only mono is read",
            h.channels
        )));
    }
    let bit_depth = match (h.sample_format, h.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => BitDepth::Float32,
        (hound::SampleFormat::Int, 16) => BitDepth::Int16,
        (hound::SampleFormat::Int, 24) => BitDepth::Int24,
        (fmt, bits) => {
            return Err(WavError::Unsupported(format!("{bits}-bit {fmt:?}")));
        }
    };
    let expected = r.len() as usize;
    let samples: Vec<f32> = match bit_depth {
        BitDepth::Float32 => r
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(data_error)?,
        BitDepth::Int16 | BitDepth::Int24 => {
            let scale = 1.0 / (1i64 << (h.bits_per_sample - 1)) as f64;
            r.samples::<i32>()
                .map(|s| s.map(|v| (v as f64 * scale) as f32))
                .collect::<Result<_, _>>()
                .map_err(data_error)?
        }
    };
    if samples.len() != expected {
        return Err(WavError::Malformed(format!(
            "data chunk holds {} of {expected} samples",
            samples.len()
        )));
    }
    let spec = WavSpec::mono(h.sample_rate as f64, bit_depth);
    Ok((AudioBlock::new(samples, spec.sample_rate), spec))
}

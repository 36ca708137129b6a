//! Live streaming: a control reader thread feeds positions to a block render loop.
//!
//! Control protocol: one position per line, `x y z` (spaces or commas). Blank lines
//! and lines starting with `#` are ignored. Malformed lines are reported and skipped.

use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use anyhow::Result;
use psyson::handoff::{param_channel, ParamReceiver, ParamSender};
use psyson::psymap::{map_position, MappingConfig, Position};
use psyson::synth::SynthState;
use psyson::wav::WavStreamWriter;

/// Parses one control line; `Ok(None)` for blank and comment lines.
pub fn parse_control_line(line: &str) -> Result<Option<Position>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = line
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .collect();
    if fields.len() != 3 {
        return Err(format!("expected 3 numbers, got {}", fields.len()));
    }
    let mut v = [0.0; 3];
    for (slot, f) in v.iter_mut().zip(&fields) {
        *slot = f
            .parse::<f64>()
            .map_err(|_| format!("'{f}' is not a number"))?;
    }
    Position::new(v[0], v[1], v[2])
        .map(Some)
        .map_err(|e| e.to_string())
}

#[derive(Debug, Default)]
pub struct ControlCounters {
    pub accepted: AtomicU64,
    pub rejected: AtomicU64,
    pub finished: AtomicBool,
}

/// Reads control lines until EOF, publishing mapped parameters. Warnings go to `warn`.
pub fn spawn_control_reader<R, W>(
    input: R,
    mut tx: ParamSender,
    cfg: MappingConfig,
    counters: Arc<ControlCounters>,
    mut warn: W,
) -> JoinHandle<()>
where
    R: BufRead + Send + 'static,
    W: Write + Send + 'static,
{
    std::thread::spawn(move || {
        for (n, line) in input.lines().enumerate() {
            let Ok(line) = line else { break };
            let parsed = parse_control_line(&line)
                .and_then(|p| p.map(|p| map_position(p, &cfg).map_err(|e| e.to_string())).transpose());
            match parsed {
                Ok(Some(params)) => {
                    tx.publish(params);
                    counters.accepted.fetch_add(1, Ordering::SeqCst);
                }
                Ok(None) => {}
                Err(e) => {
                    counters.rejected.fetch_add(1, Ordering::SeqCst);
                    let _ = writeln!(warn, "warning: control line {}: {e}; ignored", n + 1);
                }
            }
        }
        counters.finished.store(true, Ordering::SeqCst);
    })
}

/// Block renderer that picks up the newest parameters at each block boundary.
pub struct LiveRenderer {
    state: SynthState,
    rx: ParamReceiver,
    cfg: MappingConfig,
    buf: Vec<f32>,
}

impl LiveRenderer {
    pub fn new(cfg: &MappingConfig, rx: ParamReceiver) -> Result<Self> {
        Ok(LiveRenderer {
            state: SynthState::neutral(cfg)?,
            rx,
            cfg: cfg.clone(),
            buf: vec![0.0; cfg.block_size],
        })
    }

    pub fn next_block(&mut self) -> Result<&[f32]> {
        let target = self.rx.latest();
        self.state.render_into(&target, &mut self.buf, &self.cfg)?;
        Ok(&self.buf)
    }

    #[cfg(test)]
    pub fn state(&self) -> &SynthState {
        &self.state
    }
}

pub enum Sink {
    /// Raw little-endian f32 samples.
    Raw(Box<dyn Write>),
    Wav(WavStreamWriter),
}

impl Sink {
    pub fn write(&mut self, samples: &[f32]) -> Result<()> {
        match self {
            Sink::Raw(w) => {
                let mut bytes = Vec::with_capacity(samples.len() * 4);
                for s in samples {
                    bytes.extend_from_slice(&s.to_le_bytes());
                }
                w.write_all(&bytes)?;
            }
            Sink::Wav(w) => w.write(samples)?,
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        match self {
            Sink::Raw(mut w) => w.flush()?,
            Sink::Wav(w) => w.finalize()?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlayOptions {
    /// Pace output by the wall clock instead of sink back-pressure.
    pub realtime: bool,
    /// Stop after this many seconds of audio.
    pub duration: Option<f64>,
    /// Audio rendered after the control input ends, when no duration is given.
    pub linger: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PlayStats {
    pub blocks: u64,
    pub frames: u64,
    pub underruns: u64,
    pub lines_accepted: u64,
    pub lines_rejected: u64,
}

/// Streams audio controlled by `input` into `sink` until the duration is reached or
/// the input ends.
pub fn play<R, W>(
    input: R,
    sink: &mut Sink,
    cfg: &MappingConfig,
    opts: PlayOptions,
    warn: W,
) -> Result<PlayStats>
where
    R: BufRead + Send + 'static,
    W: Write + Send + Clone + 'static,
{
    let neutral = map_position(Position::ORIGIN, cfg)?;
    let (tx, rx) = param_channel(neutral);
    let counters = Arc::new(ControlCounters::default());
    let reader = spawn_control_reader(input, tx, cfg.clone(), counters.clone(), warn.clone());
    let mut renderer = LiveRenderer::new(cfg, rx)?;
    let mut warn = warn;

    // Give the first control line a chance to arrive before audio starts.
    let wait_start = Instant::now();
    while counters.accepted.load(Ordering::SeqCst) == 0
        && !counters.finished.load(Ordering::SeqCst)
        && wait_start.elapsed() < Duration::from_millis(500)
    {
        std::thread::sleep(Duration::from_millis(1));
    }

    let block_seconds = cfg.block_size as f64 / cfg.sample_rate;
    let limit = opts
        .duration
        .map(|d| (d * cfg.sample_rate).round() as u64);
    let mut stats = PlayStats::default();
    let mut linger_left: Option<u64> = None;
    let mut clock = Instant::now();
    let mut scheduled = 0u64;
    loop {
        if let Some(limit) = limit {
            if stats.frames >= limit {
                break;
            }
        } else if counters.finished.load(Ordering::SeqCst) {
            let left = linger_left.get_or_insert((opts.linger * cfg.sample_rate).round() as u64);
            if *left == 0 {
                break;
            }
        }
        let block = renderer.next_block()?;
        let mut n = block.len() as u64;
        if let Some(limit) = limit {
            n = n.min(limit - stats.frames);
        }
        if let Some(left) = linger_left.as_mut() {
            n = n.min(*left);
            *left -= n;
        }
        sink.write(&block[..n as usize])?;
        stats.blocks += 1;
        stats.frames += n;

        if opts.realtime {
            scheduled += 1;
            // Stay one block ahead of the wall clock.
            let due = clock + Duration::from_secs_f64((scheduled as f64 - 1.0) * block_seconds);
            let now = Instant::now();
            if now > due + Duration::from_secs_f64(block_seconds) {
                stats.underruns += 1;
                let _ = writeln!(
                    warn,
                    "warning: underrun at {:.3} s; stream continues",
                    stats.frames as f64 / cfg.sample_rate
                );
                clock = now;
                scheduled = 0;
            } else if now < due {
                std::thread::sleep(due - now);
            }
        }
    }
    drop(renderer);
    // A finite input is drained shortly; a live terminal is left to the process exit.
    let drain_start = Instant::now();
    while !counters.finished.load(Ordering::SeqCst)
        && drain_start.elapsed() < Duration::from_millis(100)
    {
        std::thread::sleep(Duration::from_millis(1));
    }
    if counters.finished.load(Ordering::SeqCst) {
        let _ = reader.join();
    }
    stats.lines_accepted = counters.accepted.load(Ordering::SeqCst);
    stats.lines_rejected = counters.rejected.load(Ordering::SeqCst);
    Ok(stats)
}

/// Writer handle to stderr that can be shared with the reader thread.
#[derive(Clone, Copy)]
pub struct Stderr;

impl Write for Stderr {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stderr().flush()
    }
}

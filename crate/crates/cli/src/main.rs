//! `psyson` command-line front end.

mod live;

use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use psyson::analysis::{self, FeatureVector};
use psyson::experiment::{self, ConfusionMatrix, PlaneGroup, SessionLog};
use psyson::psymap::{self, MappingConfig, Position};
use psyson::report;
use psyson::synth;
use psyson::wav::{self, BitDepth, WavSpec};
use psyson::fixtures;

#[derive(Parser)]
#[command(name = "psyson", version, about = "Three-dimensional psychoacoustic sonification")]
struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Mapping configuration (JSON); missing fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render one position to a WAV file.
    Render {
        /// Position as X,Y,Z in [-1, 1].
        #[arg(long, value_parser = parse_position, allow_hyphen_values = true)]
        pos: Position,
        /// Duration in seconds.
        #[arg(long, default_value_t = 2.0)]
        dur: f64,
        #[arg(long)]
        out: PathBuf,
        /// Sample format: f32, 16 or 24.
        #[arg(long, default_value = "f32")]
        format: BitDepth,
    },
    /// Stream audio controlled by "x y z" lines on stdin.
    Play {
        /// WAV file to write; raw little-endian f32 on stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pace output by the wall clock and report underruns.
        #[arg(long)]
        realtime: bool,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Seconds to keep playing after stdin closes (without --duration).
        #[arg(long, default_value_t = 0.5)]
        linger: f64,
        #[arg(long, default_value = "f32")]
        format: BitDepth,
    },
    /// Render the stimuli of one experiment session plus an answer key.
    Stimuli {
        #[arg(long)]
        group: PlaneGroup,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        outdir: PathBuf,
        /// Seconds per stimulus.
        #[arg(long, default_value_t = experiment::DEFAULT_STIMULUS_SECONDS)]
        dur: f64,
        #[arg(long, default_value = "f32")]
        format: BitDepth,
    },
    /// Score session logs: metrics per session and per group, confusion per group.
    Score {
        #[arg(long = "session", required = true, num_args = 1..)]
        sessions: Vec<PathBuf>,
    },
    /// Full statistics report over session logs and/or published confusion tables.
    Report {
        /// Directory of session log JSON files.
        #[arg(long)]
        sessions: Option<PathBuf>,
        /// Include confusion tables; the built-in published tables when no directory is given.
        #[arg(long, num_args = 0..=1, value_name = "DIR")]
        fixtures: Option<Option<PathBuf>>,
    },
    /// Orthogonality sweep of each axis with feature variation per axis.
    Sweep {
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Seconds rendered per point.
        #[arg(long, default_value_t = analysis::SWEEP_SECONDS)]
        seconds: f64,
    },
    /// Acoustic features of a WAV file.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn parse_position(s: &str) -> Result<Position, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got '{s}'"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("'{p}' is not a number"))?;
    }
    for (axis, value) in ['x', 'y', 'z'].iter().zip(v) {
        if !(-1.0..=1.0).contains(&value) {
            return Err(format!("{axis} = {value} outside [-1, 1]"));
        }
    }
    Position::new(v[0], v[1], v[2]).map_err(|e| e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<MappingConfig> {
    let cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => psymap::default_config(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn print_features(f: &FeatureVector) {
    println!("rms_db (re calibration)  {:>10.3}", f.rms_db);
    println!("centroid (oct above f0)  {:>10.4}", f.centroid_octaves);
    println!("bandwidth (oct)          {:>10.4}", f.bandwidth_octaves);
    println!("mod_freq (Hz)            {:>10.3}", f.mod_freq_hz);
    println!("mod_depth                {:>10.4}", f.mod_depth);
    println!("chroma_rate (cyc/s)      {:>10.4}", f.chroma_rate_est);
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Render { pos, dur, out, format } => {
            if !(dur > 0.0 && dur.is_finite()) {
                bail!("duration must be positive");
            }
            let params = psymap::map_position(pos, &cfg)?;
            let audio = synth::render_params(&params, dur, &cfg)?;
            wav::write_wav(&audio, &WavSpec::mono(cfg.sample_rate, format), &out)?;
            if cli.json {
                print_json(&serde_json::json!({
                    "out": out,
                    "frames": audio.len(),
                    "sample_rate": audio.sample_rate,
                    "position": pos,
                    "params": params,
                }))?;
            } else {
                println!("wrote {} ({} frames, {:.3} s)", out.display(), audio.len(), audio.duration());
            }
        }
        Cmd::Play { out, realtime, duration, linger, format } => {
            let mut sink = match &out {
                Some(p) => live::Sink::Wav(wav::WavStreamWriter::create(p, &WavSpec::mono(cfg.sample_rate, format))?),
                None => live::Sink::Raw(Box::new(io::BufWriter::new(io::stdout()))),
            };
            let opts = live::PlayOptions { realtime, duration, linger };
            let stats = live::play(BufReader::new(io::stdin()), &mut sink, &cfg, opts, live::Stderr)?;
            sink.finish()?;
            let summary = serde_json::json!({
                "frames": stats.frames,
                "blocks": stats.blocks,
                "underruns": stats.underruns,
                "lines_accepted": stats.lines_accepted,
                "lines_rejected": stats.lines_rejected,
            });
            if out.is_some() && cli.json {
                print_json(&summary)?;
            } else {
                eprintln!("{summary}");
            }
        }
        Cmd::Stimuli { group, seed, outdir, dur, format } => {
            if !(dur > 0.0 && dur.is_finite()) {
                bail!("duration must be positive");
            }
            let set = experiment::export_stimuli(group, seed, &cfg, dur)?;
            let paths = experiment::write_stimuli(&set, &outdir, &WavSpec::mono(cfg.sample_rate, format))?;
            if cli.json {
                print_json(&set.key)?;
            } else {
                println!("wrote {} files to {}", paths.len(), outdir.display());
                for t in &set.key.trials {
                    println!("trial {:>2}  field {:>2}  {}", t.trial_no, t.field, t.file);
                }
            }
        }
        Cmd::Score { sessions } => {
            let logs = sessions
                .iter()
                .map(|p| SessionLog::load(p).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let mut per_session = Vec::new();
            for (p, log) in sessions.iter().zip(&logs) {
                let m = experiment::score_session(log).with_context(|| format!("scoring {}", p.display()))?;
                per_session.push((log, m));
            }
            let mut groups = Vec::new();
            for g in PlaneGroup::ALL {
                let of_group: Vec<SessionLog> = logs.iter().filter(|l| l.group == g).cloned().collect();
                if !of_group.is_empty() {
                    groups.push((g, of_group.len(), experiment::confusion_matrix(&of_group)?));
                }
            }
            if cli.json {
                print_json(&serde_json::json!({
                    "sessions": per_session.iter().map(|(l, m)| serde_json::json!({
                        "participant_id": l.participant_id,
                        "group": l.group,
                        "metrics": m,
                    })).collect::<Vec<_>>(),
                    "groups": groups.iter().map(|(g, n, c)| serde_json::json!({
                        "group": g,
                        "sessions": n,
                        "confusion": c,
                    })).collect::<Vec<_>>(),
                }))?;
            } else {
                println!(
                    "{:<16}{:>6}{:>10}{:>10}{:>10}{:>10}{:>10}",
                    "participant", "group", "hit", "quadrant", "neighbor", "dim1", "dim2"
                );
                for (l, m) in &per_session {
                    println!(
                        "{:<16}{:>6}{:>10.3}{:>10.3}{:>10.3}{:>10.3}{:>10.3}",
                        l.participant_id,
                        l.group,
                        m.hit_rate,
                        m.quadrant_rate,
                        m.neighbor_rate,
                        m.dim1_direction_rate,
                        m.dim2_direction_rate
                    );
                }
                for (_, _, c) in &groups {
                    println!("\n{}", c.to_table());
                }
            }
        }
        Cmd::Report { sessions, fixtures: fx } => {
            if sessions.is_none() && fx.is_none() {
                bail!("report needs --sessions DIR and/or --fixtures [DIR]");
            }
            let logs = match &sessions {
                Some(dir) => report::load_sessions_dir(dir)?,
                None => Vec::new(),
            };
            let tables: Vec<ConfusionMatrix> = match fx {
                None => Vec::new(),
                Some(None) => fixtures::builtin_all(),
                Some(Some(dir)) => fixtures::load_dir(&dir)?,
            };
            let r = report::build_report(&logs, &tables)?;
            if cli.json {
                print_json(&r)?;
            } else {
                print!("{}", r.to_text());
            }
        }
        Cmd::Sweep { points, seconds } => {
            if !(seconds >= analysis::MIN_CHROMA_SECONDS) {
                bail!("--seconds must be at least {}", analysis::MIN_CHROMA_SECONDS);
            }
            let r = analysis::orthogonality_sweep_for(&cfg, points, seconds)?;
            if cli.json {
                print_json(&r)?;
            } else {
                print!("{}", r.to_table());
            }
        }
        Cmd::Analyze { input } => {
            let (audio, spec) = wav::read_wav(&input)?;
            let f = analysis::extract_features(&audio, &cfg)?;
            if cli.json {
                print_json(&serde_json::json!({
                    "file": input,
                    "sample_rate": spec.sample_rate,
                    "seconds": audio.duration(),
                    "features": f,
                }))?;
            } else {
                println!("{}: {:.3} s at {} Hz", input.display(), audio.duration(), spec.sample_rate);
                print_features(&f);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

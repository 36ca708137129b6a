//! The 16-field identification experiment: stimulus order, map geometry, session logs,
//! scoring and confusion matrices.
//!
//! Fields are numbered quadrant by quadrant (top-left, top-right, bottom-left,
//! bottom-right), row by row inside each quadrant:
//!
//! ```text
//!  1  2 |  5  6
//!  3  4 |  7  8
//! ------+------
//!  9 10 | 13 14
//! 11 12 | 15 16
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Axis;
use crate::psymap::{MapError, MappingConfig, Position};
use crate::synth::{self, AudioBlock};
use crate::wav::{self, WavError, WavSpec};

pub const FIELDS: usize = 16;
pub const TRIALS: usize = 20;
pub const REPEATS: usize = TRIALS - FIELDS;
pub const MAX_EXPERIENCE: u8 = 6;
pub const DEFAULT_STIMULUS_SECONDS: f64 = 10.0;

const CELL_CENTERS: [f64; 4] = [-0.75, -0.25, 0.25, 0.75];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("field index {0} outside 1..=16")]
    InvalidField(i64),
    #[error("incomplete session: {0}")]
    Incomplete(String),
    #[error("invalid session: {0}")]
    Invalid(String),
    #[error("cannot aggregate sessions of different groups ({0} and {1})")]
    MixedGroups(PlaneGroup, PlaneGroup),
    #[error("no sessions to aggregate")]
    NoSessions,
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// A field of the 4×4 map, `1..=16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct FieldIndex(u8);

impl TryFrom<i64> for FieldIndex {
    type Error = ExperimentError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        if (1..=FIELDS as i64).contains(&v) {
            Ok(FieldIndex(v as u8))
        } else {
            Err(ExperimentError::InvalidField(v))
        }
    }
}

impl From<FieldIndex> for u8 {
    fn from(f: FieldIndex) -> u8 {
        f.0
    }
}

impl fmt::Display for FieldIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FieldIndex {
    pub fn new(index: u8) -> Result<Self, ExperimentError> {
        Self::try_from(index as i64)
    }

    pub fn all() -> impl Iterator<Item = FieldIndex> {
        (1..=FIELDS as u8).map(FieldIndex)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based position in tables.
    pub fn offset(self) -> usize {
        self.0 as usize - 1
    }

    /// Quadrant `1..=4`.
    pub fn quadrant(self) -> u8 {
        (self.0 - 1) / 4 + 1
    }

    /// Zero-based `(row, column)`, rows counted from the top.
    pub fn cell(self) -> (usize, usize) {
        let q = (self.0 as usize - 1) / 4;
        let w = (self.0 as usize - 1) % 4;
        (2 * (q / 2) + w / 2, 2 * (q % 2) + w % 2)
    }

    pub fn from_cell(row: usize, col: usize) -> Result<Self, ExperimentError> {
        if row > 3 || col > 3 {
            return Err(ExperimentError::InvalidField(-1));
        }
        let q = 2 * (row / 2) + col / 2;
        let w = 2 * (row % 2) + col % 2;
        Ok(FieldIndex((4 * q + w + 1) as u8))
    }

    pub fn chebyshev(self, other: FieldIndex) -> usize {
        let (r1, c1) = self.cell();
        let (r2, c2) = other.cell();
        r1.abs_diff(r2).max(c1.abs_diff(c2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneGroup {
    XY,
    XZ,
    ZY,
}

impl PlaneGroup {
    pub const ALL: [PlaneGroup; 3] = [PlaneGroup::XY, PlaneGroup::XZ, PlaneGroup::ZY];

    /// `(horizontal, vertical)` axes of the plane.
    pub fn axes(self) -> (Axis, Axis) {
        match self {
            PlaneGroup::XY => (Axis::X, Axis::Y),
            PlaneGroup::XZ => (Axis::X, Axis::Z),
            PlaneGroup::ZY => (Axis::Z, Axis::Y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlaneGroup::XY => "xy",
            PlaneGroup::XZ => "xz",
            PlaneGroup::ZY => "zy",
        }
    }

    /// Position for plane coordinates `(h, v)`.
    pub fn position(self, h: f64, v: f64) -> Result<Position, MapError> {
        let (ha, va) = self.axes();
        let mut c = [0.0; 3];
        c[ha.index()] = h;
        c[va.index()] = v;
        Position::new(c[0], c[1], c[2])
    }
}

impl fmt::Display for PlaneGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlaneGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xy" => Ok(PlaneGroup::XY),
            "xz" => Ok(PlaneGroup::XZ),
            "zy" => Ok(PlaneGroup::ZY),
            _ => Err(format!("unknown group '{s}' (expected xy, xz or zy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial_no: u32,
    pub target: FieldIndex,
    pub response: FieldIndex,
    pub response_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionLog {
    pub participant_id: String,
    pub group: PlaneGroup,
    pub experience_rating: u8,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
}

impl SessionLog {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let log: SessionLog = serde_json::from_str(text)?;
        log.check_fields()?;
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session log serializes")
    }

    fn check_fields(&self) -> Result<(), ExperimentError> {
        if self.experience_rating > MAX_EXPERIENCE {
            return Err(ExperimentError::Invalid(format!(
                "experience rating {} outside 0..=6",
                self.experience_rating
            )));
        }
        let mut seen = HashSet::new();
        for t in &self.trials {
            if !(t.response_time.is_finite() && t.response_time >= 0.0) {
                return Err(ExperimentError::Invalid(format!(
                    "trial {}: response time {} is not a non-negative number",
                    t.trial_no, t.response_time
                )));
            }
            if !seen.insert(t.trial_no) {
                return Err(ExperimentError::Invalid(format!(
                    "trial number {} repeated",
                    t.trial_no
                )));
            }
        }
        Ok(())
    }

    /// Checks the record invariants and that trials `1..=20` are all present.
    pub fn validate_complete(&self) -> Result<(), ExperimentError> {
        self.check_fields()?;
        if self.trials.len() != TRIALS {
            return Err(ExperimentError::Incomplete(format!(
                "{} of {TRIALS} trials",
                self.trials.len()
            )));
        }
        if let Some(t) = self
            .trials
            .iter()
            .find(|t| !(1..=TRIALS as u32).contains(&t.trial_no))
        {
            return Err(ExperimentError::Incomplete(format!(
                "trial number {} outside 1..={TRIALS}",
                t.trial_no
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hit_rate: f64,
    pub quadrant_rate: f64,
    pub neighbor_rate: f64,
    /// Same side of the horizontal plane axis.
    pub dim1_direction_rate: f64,
    /// Same side of the vertical plane axis.
    pub dim2_direction_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub hits: u32,
    pub quadrants: u32,
    pub neighbors: u32,
    pub dim1_directions: u32,
    pub dim2_directions: u32,
    pub trials: u32,
}

impl Counts {
    pub fn add_trial(&mut self, target: FieldIndex, response: FieldIndex) {
        let (tr, tc) = target.cell();
        let (rr, rc) = response.cell();
        self.trials += 1;
        self.hits += (target == response) as u32;
        self.quadrants += (target.quadrant() == response.quadrant()) as u32;
        self.neighbors += (target.chebyshev(response) <= 1) as u32;
        self.dim1_directions += (tc / 2 == rc / 2) as u32;
        self.dim2_directions += (tr / 2 == rr / 2) as u32;
    }

    pub fn metrics(&self) -> Metrics {
        let n = self.trials.max(1) as f64;
        Metrics {
            hit_rate: self.hits as f64 / n,
            quadrant_rate: self.quadrants as f64 / n,
            neighbor_rate: self.neighbors as f64 / n,
            dim1_direction_rate: self.dim1_directions as f64 / n,
            dim2_direction_rate: self.dim2_directions as f64 / n,
        }
    }
}

pub fn session_counts(log: &SessionLog) -> Result<Counts, ExperimentError> {
    log.validate_complete()?;
    let mut c = Counts::default();
    for t in &log.trials {
        c.add_trial(t.target, t.response);
    }
    Ok(c)
}

pub fn score_session(log: &SessionLog) -> Result<Metrics, ExperimentError> {
    Ok(session_counts(log)?.metrics())
}

/// Row-percentage confusion table; row = sonified target, column = selected field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionMatrix {
    pub group: PlaneGroup,
    /// Presentations per target; `None` for published tables that only give percentages.
    pub presentations: Option<[u32; 16]>,
    pub percent: [[f64; 16]; 16],
}

impl ConfusionMatrix {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }

    pub fn row(&self, target: FieldIndex) -> &[f64; FIELDS] {
        &self.percent[target.offset()]
    }

    /// Whether `target` was presented; without counts a row is presented when it has mass.
    pub fn is_presented(&self, target: FieldIndex) -> bool {
        match &self.presentations {
            Some(p) => p[target.offset()] > 0,
            None => self.row(target).iter().any(|&v| v != 0.0),
        }
    }

    pub fn unpresented(&self) -> Vec<FieldIndex> {
        FieldIndex::all().filter(|&f| !self.is_presented(f)).collect()
    }

    pub fn row_sum(&self, target: FieldIndex) -> f64 {
        self.row(target).iter().sum()
    }

    /// The 256 entries row by row.
    pub fn flatten(&self) -> Vec<f64> {
        self.percent.iter().flatten().copied().collect()
    }

    /// Fixed-width text table with quadrant separators.
    pub fn to_table(&self) -> String {
        let mut s = format!("confusion ({}) rows=target, cols=response, %\n     ", self.group);
        for c in FieldIndex::all() {
            s.push_str(&format!("{:>6}", c));
            if c.get() % 4 == 0 && c.get() < 16 {
                s.push_str(" |");
            }
        }
        s.push('\n');
        for r in FieldIndex::all() {
            s.push_str(&format!("t{:<3} ", r));
            for c in FieldIndex::all() {
                s.push_str(&format!("{:>6.1}", self.row(r)[c.offset()]));
                if c.get() % 4 == 0 && c.get() < 16 {
                    s.push_str(" |");
                }
            }
            if !self.is_presented(r) {
                s.push_str("  (not presented)");
            }
            s.push('\n');
            if r.get() % 4 == 0 && r.get() < 16 {
                s.push_str(&format!("{}\n", "-".repeat(5 + 6 * 16 + 6)));
            }
        }
        s
    }
}

pub fn confusion_matrix(logs: &[SessionLog]) -> Result<ConfusionMatrix, ExperimentError> {
    let group = logs.first().ok_or(ExperimentError::NoSessions)?.group;
    let mut counts = [[0u32; FIELDS]; FIELDS];
    let mut presented = [0u32; FIELDS];
    for log in logs {
        if log.group != group {
            return Err(ExperimentError::MixedGroups(group, log.group));
        }
        log.check_fields()?;
        for t in &log.trials {
            counts[t.target.offset()][t.response.offset()] += 1;
            presented[t.target.offset()] += 1;
        }
    }
    let mut percent = [[0.0; FIELDS]; FIELDS];
    for i in 0..FIELDS {
        if presented[i] > 0 {
            for j in 0..FIELDS {
                percent[i][j] = 100.0 * counts[i][j] as f64 / presented[i] as f64;
            }
        }
    }
    Ok(ConfusionMatrix {
        group,
        presentations: Some(presented),
        percent,
    })
}

/// SplitMix64, the stimulus-order generator. Kept explicit so that other
/// implementations can reproduce [`generate_sequence`] bit for bit.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Value in `0..n`: the high word of `next_u64() * n`.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

/// The 20 targets of one session: a shuffled pass over all 16 fields, then 4 distinct
/// repeats.
///
/// Shuffle: `for i in 15..=1: j = below(i + 1); swap(i, j)` on `[1..16]`. Repeats: a
/// fresh `[1..16]`, `for k in 0..4: j = k + below(16 - k); swap(k, j)`, first four.
pub fn generate_sequence(seed: u64) -> Vec<FieldIndex> {
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<FieldIndex> = FieldIndex::all().collect();
    for i in (1..FIELDS).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    let mut pool: Vec<FieldIndex> = FieldIndex::all().collect();
    for k in 0..REPEATS {
        let j = k + rng.below((FIELDS - k) as u64) as usize;
        pool.swap(k, j);
    }
    order.extend_from_slice(&pool[..REPEATS]);
    order
}

pub fn field_center(field: FieldIndex, group: PlaneGroup) -> Position {
    let (row, col) = field.cell();
    group
        .position(CELL_CENTERS[col], CELL_CENTERS[3 - row])
        .expect("cell centers are in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerEntry {
    pub trial_no: u32,
    pub field: FieldIndex,
    pub position: Position,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub group: PlaneGroup,
    pub seed: u64,
    pub duration_seconds: f64,
    pub trials: Vec<AnswerEntry>,
}

#[derive(Debug, Clone)]
pub struct StimulusSet {
    pub key: AnswerKey,
    pub audio: Vec<AudioBlock>,
}

pub fn stimulus_file_name(trial_no: u32) -> String {
    format!("trial_{trial_no:02}.wav")
}

/// Renders the 20 stimuli of a session, each `seconds` long.
pub fn export_stimuli(
    group: PlaneGroup,
    seed: u64,
    cfg: &MappingConfig,
    seconds: f64,
) -> Result<StimulusSet, ExperimentError> {
    cfg.validate().map_err(MapError::from)?;
    let trials: Vec<AnswerEntry> = generate_sequence(seed)
        .into_iter()
        .enumerate()
        .map(|(i, field)| AnswerEntry {
            trial_no: i as u32 + 1,
            field,
            position: field_center(field, group),
            file: stimulus_file_name(i as u32 + 1),
        })
        .collect();
    let audio = trials
        .par_iter()
        .map(|t| synth::render_position(t.position, seconds, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StimulusSet {
        key: AnswerKey {
            group,
            seed,
            duration_seconds: seconds,
            trials,
        },
        audio,
    })
}

/// Writes one WAV per trial and `answer_key.json` into `dir`; returns all written paths.
pub fn write_stimuli(
    set: &StimulusSet,
    dir: &Path,
    spec: &WavSpec,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(set.audio.len() + 1);
    for (entry, audio) in set.key.trials.iter().zip(&set.audio) {
        let path = dir.join(&entry.file);
        wav::write_wav(audio, spec, &path)?;
        paths.push(path);
    }
    let key_path = dir.join("answer_key.json");
    std::fs::write(&key_path, serde_json::to_string_pretty(&set.key)?)?;
    paths.push(key_path);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psymap::default_config;

    fn f(i: u8) -> FieldIndex {
        FieldIndex::new(i).unwrap()
    }

    fn session(targets: &[FieldIndex], responses: &[FieldIndex]) -> SessionLog {
        SessionLog {
            participant_id: "p".into(),
            group: PlaneGroup::XY,
            experience_rating: 0,
            seed: 0,
            trials: targets
                .iter()
                .zip(responses)
                .enumerate()
                .map(|(i, (&t, &r))| TrialRecord {
                    trial_no: i as u32 + 1,
                    target: t,
                    response: r,
                    response_time: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn layout_table() {
        let grid: Vec<Vec<u8>> = (0..4)
            .map(|r| (0..4).map(|c| FieldIndex::from_cell(r, c).unwrap().get()).collect())
            .collect();
        assert_eq!(
            grid,
            vec![
                vec![1, 2, 5, 6],
                vec![3, 4, 7, 8],
                vec![9, 10, 13, 14],
                vec![11, 12, 15, 16]
            ]
        );
        for fi in FieldIndex::all() {
            let (r, c) = fi.cell();
            assert_eq!(FieldIndex::from_cell(r, c).unwrap(), fi);
        }
    }

    #[test]
    fn field_centers() {
        assert_eq!(field_center(f(1), PlaneGroup::XY), Position::new(-0.75, 0.75, 0.0).unwrap());
        assert_eq!(field_center(f(16), PlaneGroup::XY), Position::new(0.75, -0.75, 0.0).unwrap());
        // Second field of the top-right quadrant: top row, rightmost column.
        assert_eq!(field_center(f(6), PlaneGroup::XZ), Position::new(0.75, 0.0, 0.75).unwrap());
        assert_eq!(field_center(f(5), PlaneGroup::XZ), Position::new(0.25, 0.0, 0.75).unwrap());
        assert_eq!(field_center(f(9), PlaneGroup::ZY), Position::new(0.0, -0.25, -0.75).unwrap());
    }

    #[test]
    fn field_serde_rejects_out_of_range() {
        assert!(serde_json::from_str::<FieldIndex>("0").is_err());
        assert!(serde_json::from_str::<FieldIndex>("17").is_err());
        assert_eq!(serde_json::from_str::<FieldIndex>("7").unwrap(), f(7));
        assert_eq!(serde_json::to_string(&f(7)).unwrap(), "7");
    }

    #[test]
    fn sequence_shape() {
        for seed in 0..200u64 {
            let s = generate_sequence(seed);
            assert_eq!(s.len(), TRIALS);
            let mut first: Vec<u8> = s[..16].iter().map(|x| x.get()).collect();
            first.sort();
            assert_eq!(first, (1..=16).collect::<Vec<_>>());
            let tail: HashSet<_> = s[16..].iter().collect();
            assert_eq!(tail.len(), 4);
            assert_eq!(s, generate_sequence(seed));
        }
    }

    #[test]
    fn sequences_differ_between_seeds() {
        let mut collisions = 0;
        for i in 0..1000u64 {
            if generate_sequence(2 * i) == generate_sequence(2 * i + 1) {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs of SplitMix64 for seed 1234567.
        let mut r = SplitMix64::new(1234567);
        let want = [
            6457827717110365317u64,
            3203168211198807973,
            9817491932198370423,
            4593380528125082431,
            16408922859458223821,
        ];
        for w in want {
            assert_eq!(r.next_u64(), w);
        }
    }

    #[test]
    fn sequence_reference_values() {
        let want: [[u8; 20]; 2] = [
            [16, 14, 6, 7, 9, 2, 13, 11, 8, 15, 10, 1, 5, 4, 3, 12, 4, 3, 9, 5],
            [9, 1, 8, 4, 14, 11, 3, 12, 6, 13, 7, 16, 15, 5, 2, 10, 12, 16, 7, 14],
        ];
        for (seed, w) in [42u64, 2024].into_iter().zip(want) {
            let got: Vec<u8> = generate_sequence(seed).iter().map(|x| x.get()).collect();
            assert_eq!(got, w);
        }
    }

    #[test]
    fn perfect_session() {
        let t = generate_sequence(5);
        let m = score_session(&session(&t, &t)).unwrap();
        assert_eq!(
            m,
            Metrics {
                hit_rate: 1.0,
                quadrant_rate: 1.0,
                neighbor_rate: 1.0,
                dim1_direction_rate: 1.0,
                dim2_direction_rate: 1.0
            }
        );
    }

    #[test]
    fn shifted_column_session() {
        let targets: Vec<FieldIndex> = (0..TRIALS)
            .map(|i| FieldIndex::from_cell(i % 4, (i / 4) % 3).unwrap())
            .collect();
        let responses: Vec<FieldIndex> = targets
            .iter()
            .map(|t| {
                let (r, c) = t.cell();
                FieldIndex::from_cell(r, c + 1).unwrap()
            })
            .collect();
        let m = score_session(&session(&targets, &responses)).unwrap();
        assert_eq!(m.hit_rate, 0.0);
        assert_eq!(m.neighbor_rate, 1.0);
        assert_eq!(m.dim2_direction_rate, 1.0);
        let crossing = targets.iter().filter(|t| t.cell().1 == 1).count();
        assert_eq!(m.dim1_direction_rate, 1.0 - crossing as f64 / 20.0);
    }

    #[test]
    fn constant_response_counts_target_ones() {
        let t = generate_sequence(77);
        let ones = vec![f(1); TRIALS];
        let m = score_session(&session(&t, &ones)).unwrap();
        let n = t.iter().filter(|&&x| x == f(1)).count();
        assert_eq!(m.hit_rate, n as f64 / 20.0);
    }

    #[test]
    fn incomplete_session_rejected() {
        let t = generate_sequence(1);
        assert!(matches!(
            score_session(&session(&t[..19], &t[..19])),
            Err(ExperimentError::Incomplete(_))
        ));
        let mut s = session(&t, &t);
        s.trials[3].trial_no = 2;
        assert!(score_session(&s).is_err());
        let mut s = session(&t, &t);
        s.experience_rating = 7;
        assert!(score_session(&s).is_err());
    }

    #[test]
    fn session_json_schema() {
        let t = generate_sequence(3);
        let s = session(&t, &t);
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["experience_rating", "group", "participant_id", "seed", "trials"]);
        let mut tkeys: Vec<_> = v["trials"][0].as_object().unwrap().keys().cloned().collect();
        tkeys.sort();
        assert_eq!(tkeys, ["response", "response_time", "target", "trial_no"]);
        assert_eq!(v["group"], "xy");
        assert_eq!(SessionLog::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn confusion_diagonal_matches_hits() {
        let t = generate_sequence(9);
        let r: Vec<FieldIndex> = t.iter().map(|x| f(x.get() % 16 + 1)).rev().collect();
        let s = session(&t, &r);
        let cm = confusion_matrix(std::slice::from_ref(&s)).unwrap();
        let hits = score_session(&s).unwrap().hit_rate * 20.0;
        let diag: f64 = FieldIndex::all()
            .map(|i| cm.row(i)[i.offset()] * cm.presentations.unwrap()[i.offset()] as f64 / 100.0)
            .sum();
        assert!((diag - hits).abs() < 1e-9);
        for i in FieldIndex::all() {
            assert!((cm.row_sum(i) - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_confusion_is_identity() {
        let t = generate_sequence(4);
        let cm = confusion_matrix(&[session(&t, &t)]).unwrap();
        for i in 0..FIELDS {
            for j in 0..FIELDS {
                assert_eq!(cm.percent[i][j], if i == j { 100.0 } else { 0.0 });
            }
        }
        let back = ConfusionMatrix::from_json(&cm.to_json()).unwrap();
        assert_eq!(back, cm);
    }

    #[test]
    fn mixed_groups_rejected() {
        let t = generate_sequence(4);
        let a = session(&t, &t);
        let mut b = a.clone();
        b.group = PlaneGroup::ZY;
        assert!(matches!(
            confusion_matrix(&[a, b]),
            Err(ExperimentError::MixedGroups(..))
        ));
        assert!(matches!(confusion_matrix(&[]), Err(ExperimentError::NoSessions)));
    }

    #[test]
    fn unpresented_rows_flagged() {
        let t = vec![f(1); 3];
        let cm = confusion_matrix(&[session(&t, &t)]).unwrap();
        assert_eq!(cm.unpresented().len(), 15);
        assert!(cm.is_presented(f(1)));
    }

    #[test]
    fn quadrant_implies_both_directions() {
        for a in FieldIndex::all() {
            for b in FieldIndex::all() {
                if a.quadrant() == b.quadrant() {
                    let mut c = Counts::default();
                    c.add_trial(a, b);
                    assert_eq!((c.dim1_directions, c.dim2_directions), (1, 1));
                }
            }
        }
    }

    #[test]
    fn stimuli_follow_sequence() {
        let cfg = default_config();
        let set = export_stimuli(PlaneGroup::XZ, 11, &cfg, 0.1).unwrap();
        assert_eq!(set.audio.len(), 20);
        assert!(set.audio.iter().all(|a| a.len() == 4800));
        let fields: Vec<_> = set.key.trials.iter().map(|t| t.field).collect();
        assert_eq!(fields, generate_sequence(11));
        let dir = tempfile::tempdir().unwrap();
        let paths = write_stimuli(&set, dir.path(), &WavSpec::mono(48_000.0, wav::BitDepth::Int16)).unwrap();
        assert_eq!(paths.len(), 21);
        assert!(paths.iter().all(|p| p.exists()));
    }
}

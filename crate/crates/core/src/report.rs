//! Batch evaluation of session logs and confusion tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{
    confusion_matrix, session_counts, ConfusionMatrix, ExperimentError, Metrics, PlaneGroup,
    SessionLog, FIELDS,
};
use crate::stats::{self, AnovaTable, PcaSummary, StatsError, TauResult};

/// Ratings at or above this count as experienced in the ANOVA.
pub const EXPERIENCED_FROM: u8 = 4;
pub const MEASURES: [&str; 5] = [
    "hit_rate",
    "quadrant_rate",
    "neighbor_rate",
    "dim1_direction_rate",
    "dim2_direction_rate",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Session {
        path: String,
        source: ExperimentError,
    },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("nothing to report: no sessions and no confusion tables")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSummary {
    pub participant_id: String,
    pub group: PlaneGroup,
    pub experience_rating: u8,
    pub hits: u32,
    pub metrics: Metrics,
    /// `P(X >= hits)` under guessing, 20 trials at 1/16.
    pub binomial_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: PlaneGroup,
    pub participants: usize,
    pub mean: Metrics,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSource {
    Sessions,
    Fixtures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauComparison {
    pub source: MatrixSource,
    pub a: PlaneGroup,
    pub b: PlaneGroup,
    pub result: TauResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub quantity: String,
    pub published: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSection {
    pub note: String,
    pub values: Vec<Benchmark>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub participants: Vec<ParticipantSummary>,
    pub groups: Vec<GroupSummary>,
    pub fixtures: Vec<ConfusionMatrix>,
    pub tau: Vec<TauComparison>,
    pub measures: Vec<String>,
    pub correlation: Option<Vec<Vec<f64>>>,
    pub pca: Option<PcaSummary>,
    /// First principal component against experience (rating >= 4) and group.
    pub anova: Option<AnovaTable>,
    /// Why optional sections were left out.
    pub notes: Vec<String>,
    pub benchmarks: BenchmarkSection,
}

/// Figures from the original human study. They depend on participant data that is not
/// available and are reported for comparison only.
pub fn benchmarks() -> BenchmarkSection {
    let b = |q: &str, p: &str| Benchmark {
        quantity: q.into(),
        published: p.into(),
    };
    BenchmarkSection {
        note: "published results of the original listening study; raw data unavailable, \
               not recomputed here and not checked by any test"
            .into(),
        values: vec![
            b("group mean hit rate", "51-64 %"),
            b("group mean quadrant rate", "85-91 %"),
            b("group mean per-axis direction rate", "90-98 %"),
            b("variance explained by first principal component", "81.5 %"),
            b("two-way ANOVA, experience x group", "0.46 < p < 0.69"),
            b("correlation between measures", "0.55 <= rho <= 0.95"),
            b("all participants above chance (binomial)", "p <= 0.001"),
        ],
    }
}

/// Reads every `*.json` file in `dir` as a session log, in file-name order.
pub fn load_sessions_dir(dir: &Path) -> Result<Vec<SessionLog>, ReportError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            SessionLog::load(p).map_err(|source| ReportError::Session {
                path: p.display().to_string(),
                source,
            })
        })
        .collect()
}

fn metrics_row(m: &Metrics) -> [f64; 5] {
    [
        m.hit_rate,
        m.quadrant_rate,
        m.neighbor_rate,
        m.dim1_direction_rate,
        m.dim2_direction_rate,
    ]
}

fn mean_metrics(ms: &[Metrics]) -> Metrics {
    let n = ms.len().max(1) as f64;
    let mut acc = [0.0; 5];
    for m in ms {
        for (a, v) in acc.iter_mut().zip(metrics_row(m)) {
            *a += v;
        }
    }
    Metrics {
        hit_rate: acc[0] / n,
        quadrant_rate: acc[1] / n,
        neighbor_rate: acc[2] / n,
        dim1_direction_rate: acc[3] / n,
        dim2_direction_rate: acc[4] / n,
    }
}

fn pairwise_tau(
    mats: &[ConfusionMatrix],
    source: MatrixSource,
) -> Result<Vec<TauComparison>, StatsError> {
    let mut out = Vec::new();
    for i in 0..mats.len() {
        for j in i + 1..mats.len() {
            out.push(TauComparison {
                source,
                a: mats[i].group,
                b: mats[j].group,
                result: stats::kendall_tau_b(&mats[i].flatten(), &mats[j].flatten())?,
            });
        }
    }
    Ok(out)
}

pub fn build_report(
    sessions: &[SessionLog],
    fixtures: &[ConfusionMatrix],
) -> Result<BatchReport, ReportError> {
    if sessions.is_empty() && fixtures.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut notes = Vec::new();
    let mut participants = Vec::with_capacity(sessions.len());
    for s in sessions {
        let counts = session_counts(s).map_err(|source| ReportError::Session {
            path: s.participant_id.clone(),
            source,
        })?;
        participants.push(ParticipantSummary {
            participant_id: s.participant_id.clone(),
            group: s.group,
            experience_rating: s.experience_rating,
            hits: counts.hits,
            metrics: counts.metrics(),
            binomial_p: stats::binomial_test_ge(counts.hits, counts.trials, 1.0 / FIELDS as f64)?,
        });
    }

    let mut groups = Vec::new();
    for g in PlaneGroup::ALL {
        let logs: Vec<SessionLog> = sessions.iter().filter(|s| s.group == g).cloned().collect();
        if logs.is_empty() {
            continue;
        }
        let ms: Vec<Metrics> = participants
            .iter()
            .filter(|p| p.group == g)
            .map(|p| p.metrics)
            .collect();
        groups.push(GroupSummary {
            group: g,
            participants: logs.len(),
            mean: mean_metrics(&ms),
            confusion: confusion_matrix(&logs)?,
        });
    }

    let mut tau = Vec::new();
    let session_mats: Vec<ConfusionMatrix> = groups.iter().map(|g| g.confusion.clone()).collect();
    for (mats, source) in [
        (session_mats.as_slice(), MatrixSource::Sessions),
        (fixtures, MatrixSource::Fixtures),
    ] {
        match pairwise_tau(mats, source) {
            Ok(t) => tau.extend(t),
            Err(e) => notes.push(format!("tau ({source:?}): {e}")),
        }
    }

    let rows: Vec<Vec<f64>> = participants
        .iter()
        .map(|p| metrics_row(&p.metrics).to_vec())
        .collect();
    let (mut correlation, mut pca, mut anova) = (None, None, None);
    if rows.len() >= 2 {
        match stats::correlation_matrix(&rows) {
            Ok(c) => correlation = Some(c),
            Err(e) => notes.push(format!("correlation: {}", describe(&e))),
        }
        match stats::pca(&rows) {
            Ok(p) => {
                let pc1: Vec<f64> = p.scores.iter().map(|s| s[0]).collect();
                let experienced: Vec<bool> = participants
                    .iter()
                    .map(|p| p.experience_rating >= EXPERIENCED_FROM)
                    .collect();
                let group: Vec<&str> = participants.iter().map(|p| p.group.name()).collect();
                match stats::anova_two_way(&pc1, &experienced, &group) {
                    Ok(t) => anova = Some(t),
                    Err(e) => notes.push(format!("anova: {e}")),
                }
                pca = Some(p);
            }
            Err(e) => notes.push(format!("pca: {}", describe(&e))),
        }
    } else if !sessions.is_empty() {
        notes.push("pca/anova: need at least 2 sessions".into());
    }

    Ok(BatchReport {
        participants,
        groups,
        fixtures: fixtures.to_vec(),
        tau,
        measures: MEASURES.iter().map(|s| s.to_string()).collect(),
        correlation,
        pca,
        anova,
        notes,
        benchmarks: benchmarks(),
    })
}

fn describe(e: &StatsError) -> String {
    match e {
        StatsError::ConstantColumn(j) => format!("measure {} is constant", MEASURES[*j]),
        other => other.to_string(),
    }
}

fn metrics_line(m: &Metrics) -> String {
    metrics_row(m)
        .iter()
        .map(|v| format!("{v:>9.3}"))
        .collect::<Vec<_>>()
        .join("")
}

impl BatchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let header = format!(
            "{:>9}{:>9}{:>9}{:>9}{:>9}",
            "hit", "quadrant", "neighbor", "dim1", "dim2"
        );
        if !self.participants.is_empty() {
            let _ = writeln!(s, "== participants ==");
            let _ = writeln!(s, "{:<16}{:>6}{:>5}{:>6}{header}{:>12}", "id", "group", "exp", "hits", "binom_p");
            for p in &self.participants {
                let _ = writeln!(
                    s,
                    "{:<16}{:>6}{:>5}{:>6}{}{:>12.3e}",
                    p.participant_id,
                    p.group.name(),
                    p.experience_rating,
                    p.hits,
                    metrics_line(&p.metrics),
                    p.binomial_p
                );
            }
            let _ = writeln!(s, "\n== group means ==");
            let _ = writeln!(s, "{:<6}{:>4}{header}", "group", "n");
            for g in &self.groups {
                let _ = writeln!(s, "{:<6}{:>4}{}", g.group.name(), g.participants, metrics_line(&g.mean));
            }
            for g in &self.groups {
                let _ = writeln!(s, "\n{}", g.confusion.to_table());
            }
        }
        if !self.fixtures.is_empty() {
            let _ = writeln!(s, "== published confusion tables ==");
            for f in &self.fixtures {
                let _ = writeln!(s, "{}", f.to_table());
            }
        }
        if !self.tau.is_empty() {
            let _ = writeln!(s, "== Kendall tau-b between vectorized confusion tables ==");
            for t in &self.tau {
                let _ = writeln!(
                    s,
                    "{:<9} {}-{}  tau = {:.4}  z = {:.3}  p = {:.3e}",
                    format!("{:?}", t.source).to_lowercase(),
                    t.a,
                    t.b,
                    t.result.tau,
                    t.result.z,
                    t.result.p_value
                );
            }
            s.push('\n');
        }
        if let Some(c) = &self.correlation {
            let _ = writeln!(s, "== correlation between measures ==");
            for (name, row) in MEASURES.iter().zip(c) {
                let _ = writeln!(
                    s,
                    "{name:<20}{}",
                    row.iter().map(|v| format!("{v:>8.3}")).collect::<String>()
                );
            }
            s.push('\n');
        }
        if let Some(p) = &self.pca {
            let _ = writeln!(s, "== principal components ==");
            let _ = writeln!(
                s,
                "variance explained: {}",
                p.variance_explained
                    .iter()
                    .map(|v| format!("{:.1}%", 100.0 * v))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            let _ = writeln!(s, "loadings on PC1:");
            for (name, l) in MEASURES.iter().zip(&p.loadings) {
                let _ = writeln!(s, "  {name:<20}{:>8.3}", l[0]);
            }
            s.push('\n');
        }
        if let Some(a) = &self.anova {
            let _ = writeln!(s, "== two-way ANOVA on PC1 (type I) ==");
            let _ = writeln!(s, "{:<22}{:>5}{:>12}{:>12}{:>10}{:>10}", "effect", "df", "SS", "MS", "F", "p");
            for (name, e) in [
                ("experience (>=4)", a.a),
                ("group", a.b),
                ("experience x group", a.interaction),
            ] {
                let _ = writeln!(
                    s,
                    "{name:<22}{:>5}{:>12.5}{:>12.5}{:>10.3}{:>10.4}",
                    e.df, e.sum_sq, e.mean_sq, e.f, e.p_value
                );
            }
            let r = a.residual;
            let _ = writeln!(s, "{:<22}{:>5}{:>12.5}{:>12.5}\n", "residual", r.df, r.sum_sq, r.mean_sq);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        if !self.notes.is_empty() {
            s.push('\n');
        }
        let _ = writeln!(s, "== reference values (not reproduced) ==");
        let _ = writeln!(s, "{}", self.benchmarks.note);
        for b in &self.benchmarks.values {
            let _ = writeln!(s, "  {:<50}{}", b.quantity, b.published);
        }
        s
    }
}

//! Per-record evaluation, corpus-level runs, noise accounting and holdout
//! dedup.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::ast::parse_snippet;
use crate::coverage::{
    extract_features, gate, CoverageConfig, CoverageScore, CoverageScorer, FeatureVector,
    RemoteErrorPolicy, ScoreRequest,
};
use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::relevance::{extract_call_sites, extract_signature, is_relevant};
use crate::syntax::{run_syntax_rules, strip_source, NoiseLabel, SyntaxFinding};

/// Records are evaluated in chunks of this size; each chunk is fanned out to
/// the worker pool and emitted in input order.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Keep,
    KeepTransformed,
    Drop,
}

impl Action {
    pub fn from_labels(labels: &BTreeSet<NoiseLabel>) -> Action {
        if labels.iter().any(|l| l.is_drop()) {
            Action::Drop
        } else if labels.is_empty() {
            Action::Keep
        } else {
            Action::KeepTransformed
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub record_id: String,
    pub labels: BTreeSet<NoiseLabel>,
    pub action: Action,
    /// Present iff `action` is `KeepTransformed`.
    pub transformed_focal: Option<String>,
    pub coverage: Option<CoverageScore>,
    pub evidence: Vec<SyntaxFinding>,
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Verdict", 5)?;
        st.serialize_field("id", &self.record_id)?;
        st.serialize_field("labels", &self.labels)?;
        st.serialize_field("action", &self.action)?;
        st.serialize_field("coverage", &self.coverage.map(|c| c.value()))?;
        st.serialize_field("evidence", &self.evidence)?;
        st.end()
    }
}

impl Verdict {
    /// The record as it appears in the clean output, if it survives.
    pub fn apply(&self, record: &Record) -> Option<Record> {
        match self.action {
            Action::Keep => Some(record.clone()),
            Action::KeepTransformed => {
                let mut out = record.clone();
                out.focal_method = self.transformed_focal.clone()?;
                Some(out)
            }
            Action::Drop => None,
        }
    }
}

/// Which records the coverage scorer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringScope {
    /// Only records that survived the syntax and relevance filters.
    #[default]
    Survivors,
    /// Every record, so per-type rates share the whole-dataset denominator.
    All,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub object_mode: bool,
    pub coverage: CoverageConfig,
    pub scope: ScoringScope,
}

/// Runs every detector over one record. Labels accumulate; no filter
/// short-circuits another. Only scorer failures under the `Fail` policy and
/// hard scorer errors (e.g. a missing sidecar score) are returned as errors.
pub fn evaluate_record(
    record: &Record,
    cfg: &PipelineConfig,
    scorer: &dyn CoverageScorer,
) -> Result<Verdict> {
    let focal_tree = parse_snippet(&record.focal_method);
    let test_tree = parse_snippet(&record.test_case);
    let syntax = run_syntax_rules(
        &record.focal_method,
        &focal_tree,
        &record.test_case,
        &test_tree,
        cfg.object_mode,
    );
    let mut labels: BTreeSet<NoiseLabel> = syntax.findings.iter().map(|f| f.label).collect();

    // downstream filters see the annotation-free focal text
    let focal_tree = match &syntax.transformed_focal {
        Some(text) => parse_snippet(text),
        None => focal_tree,
    };
    let sig = extract_signature(&focal_tree).ok();
    let calls = extract_call_sites(&test_tree);
    let relevant = sig
        .as_ref()
        .is_some_and(|s| is_relevant(s, &calls).is_some());
    if !relevant {
        labels.insert(NoiseLabel::NoRelevance);
    }

    let score_it = match cfg.scope {
        ScoringScope::All => true,
        ScoringScope::Survivors => !labels.iter().any(|l| l.is_drop()),
    };
    let mut coverage = None;
    if score_it {
        let features = extract_features(&focal_tree, &test_tree, sig.as_ref(), &calls);
        let request = ScoreRequest {
            id: &record.id,
            focal_method: focal_tree.source(),
            test_case: &record.test_case,
            features: &features,
        };
        match scorer.score(&request) {
            Ok(score) => {
                if !gate(&score, cfg.coverage.threshold()) {
                    labels.insert(NoiseLabel::LowCoverage);
                }
                coverage = Some(score);
            }
            Err(Error::Scorer { .. })
                if cfg.coverage.on_remote_error == RemoteErrorPolicy::Keep => {}
            Err(Error::Scorer { .. })
                if cfg.coverage.on_remote_error == RemoteErrorPolicy::Drop =>
            {
                labels.insert(NoiseLabel::LowCoverage);
            }
            Err(e) => return Err(e),
        }
    }

    let action = Action::from_labels(&labels);
    Ok(Verdict {
        record_id: record.id.clone(),
        transformed_focal: (action == Action::KeepTransformed)
            .then_some(syntax.transformed_focal)
            .flatten(),
        labels,
        action,
        coverage,
        evidence: syntax.findings,
    })
}

/// Features of a record as the scorer sees it: annotation-stripped focal
/// side, raw test side.
pub fn record_features(record: &Record) -> FeatureVector {
    let focal = strip_source(&record.focal_method).source;
    let focal_tree = parse_snippet(&focal);
    let test_tree = parse_snippet(&record.test_case);
    let sig = extract_signature(&focal_tree).ok();
    let calls = extract_call_sites(&test_tree);
    extract_features(&focal_tree, &test_tree, sig.as_ref(), &calls)
}

/// Maps `f` over a record stream on `pool` in chunks and hands results to
/// `emit` in input order.
pub fn for_each_ordered<I, T, M, F>(
    records: I,
    pool: &rayon::ThreadPool,
    f: M,
    mut emit: F,
) -> Result<()>
where
    I: IntoIterator<Item = Result<Record>>,
    T: Send,
    M: Fn(&Record) -> Result<T> + Sync,
    F: FnMut(&Record, T) -> Result<()>,
{
    let mut records = records.into_iter();
    loop {
        let chunk: Vec<Record> = records.by_ref().take(CHUNK).collect::<Result<_>>()?;
        if chunk.is_empty() {
            return Ok(());
        }
        let results: Vec<Result<T>> = pool.install(|| chunk.par_iter().map(&f).collect());
        for (record, result) in chunk.iter().zip(results) {
            emit(record, result?)?;
        }
    }
}

/// Evaluates a record stream on `pool`, calling `emit` for every record in
/// input order, and returns the aggregated report. Output is independent of
/// the pool size.
pub fn run_pipeline<I, F>(
    records: I,
    cfg: &PipelineConfig,
    scorer: &dyn CoverageScorer,
    pool: &rayon::ThreadPool,
    mut emit: F,
) -> Result<NoiseReport>
where
    I: IntoIterator<Item = Result<Record>>,
    F: FnMut(&Record, &Verdict) -> Result<()>,
{
    let mut report = NoiseReport::default();
    for_each_ordered(
        records,
        pool,
        |r| evaluate_record(r, cfg, scorer),
        |record, verdict| {
            report.add(&verdict);
            emit(record, &verdict)
        },
    )?;
    debug_assert_eq!(report.check_invariants(), Ok(()));
    Ok(report)
}

/// Table-style noise distribution. Each label is counted once per record
/// carrying it, so per-label counts can sum past `total_noisy`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoiseReport {
    pub total_records: u64,
    pub per_label: BTreeMap<NoiseLabel, u64>,
    pub total_noisy: u64,
    pub kept: u64,
    pub kept_transformed: u64,
    pub dropped: u64,
}

/// Percentage in [0, 100] rounded to two decimals.
pub fn percent(count: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let raw = count as f64 * 100.0 / total as f64;
    (raw * 100.0).round() / 100.0
}

impl NoiseReport {
    pub fn add(&mut self, verdict: &Verdict) {
        self.total_records += 1;
        for label in &verdict.labels {
            *self.per_label.entry(*label).or_default() += 1;
        }
        if !verdict.labels.is_empty() {
            self.total_noisy += 1;
        }
        match verdict.action {
            Action::Keep => self.kept += 1,
            Action::KeepTransformed => self.kept_transformed += 1,
            Action::Drop => self.dropped += 1,
        }
    }

    pub fn merge(&mut self, other: &NoiseReport) {
        self.total_records += other.total_records;
        for (label, n) in &other.per_label {
            *self.per_label.entry(*label).or_default() += n;
        }
        self.total_noisy += other.total_noisy;
        self.kept += other.kept;
        self.kept_transformed += other.kept_transformed;
        self.dropped += other.dropped;
    }

    pub fn count(&self, label: NoiseLabel) -> u64 {
        self.per_label.get(&label).copied().unwrap_or(0)
    }

    pub fn percent(&self, label: NoiseLabel) -> f64 {
        percent(self.count(label), self.total_records)
    }

    pub fn total_noisy_percent(&self) -> f64 {
        percent(self.total_noisy, self.total_records)
    }

    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let sum: u64 = self.per_label.values().sum();
        let max = self.per_label.values().copied().max().unwrap_or(0);
        if self.total_noisy > sum || self.total_noisy < max {
            return Err(format!(
                "total_noisy {} outside [{max}, {sum}]",
                self.total_noisy
            ));
        }
        if self.kept + self.kept_transformed + self.dropped != self.total_records {
            return Err("kept + kept_transformed + dropped != total_records".into());
        }
        Ok(())
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<38} {:>10} {:>9}",
            "Category of Noise Data", "Count", "Percent"
        );
        for label in NoiseLabel::ALL {
            let _ = writeln!(
                out,
                "{:<38} {:>10} {:>8.2}%",
                label.title(),
                self.count(label),
                self.percent(label)
            );
        }
        let _ = writeln!(
            out,
            "{:<38} {:>10} {:>8.2}%",
            "Total Noise",
            self.total_noisy,
            self.total_noisy_percent()
        );
        let _ = writeln!(
            out,
            "records {}  kept {}  kept_transformed {}  dropped {}",
            self.total_records, self.kept, self.kept_transformed, self.dropped
        );
        out
    }
}

impl Serialize for NoiseReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Percentages {
            per_label: BTreeMap<NoiseLabel, f64>,
            total_noisy: f64,
            kept: f64,
            kept_transformed: f64,
            dropped: f64,
        }
        let total = self.total_records;
        let per_label: BTreeMap<NoiseLabel, u64> = NoiseLabel::ALL
            .iter()
            .map(|&l| (l, self.count(l)))
            .collect();
        let percentages = Percentages {
            per_label: NoiseLabel::ALL
                .iter()
                .map(|&l| (l, self.percent(l)))
                .collect(),
            total_noisy: percent(self.total_noisy, total),
            kept: percent(self.kept, total),
            kept_transformed: percent(self.kept_transformed, total),
            dropped: percent(self.dropped, total),
        };
        let mut st = s.serialize_struct("NoiseReport", 7)?;
        st.serialize_field("total_records", &self.total_records)?;
        st.serialize_field("per_label", &per_label)?;
        st.serialize_field("total_noisy", &self.total_noisy)?;
        st.serialize_field("kept", &self.kept)?;
        st.serialize_field("kept_transformed", &self.kept_transformed)?;
        st.serialize_field("dropped", &self.dropped)?;
        st.serialize_field("percentages", &percentages)?;
        st.end()
    }
}

static CALLABLE_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([A-Za-z_$][A-Za-z0-9_$]*)\s*\(").expect("static pattern"));

const NOT_A_NAME: &[&str] = &[
    "if",
    "for",
    "while",
    "switch",
    "catch",
    "synchronized",
    "return",
    "new",
    "throw",
    "super",
    "this",
    "try",
    "assert",
];

/// Name of the focal method: from the first declaration when one parses,
/// otherwise the identifier right before the first parameter list.
pub fn focal_name(source: &str) -> Option<String> {
    if let Some(decl) = parse_snippet(source).declarations().next() {
        if let Some(name) = decl.child_by_field("name") {
            return Some(name.text().to_owned());
        }
    }
    CALLABLE_NAME
        .captures_iter(source)
        .map(|c| c.get(1).expect("group 1").as_str())
        .find(|name| !NOT_A_NAME.contains(name))
        .map(str::to_owned)
}

/// Drops training records whose focal method name (case-sensitive) also names
/// a holdout focal method. Records with no extractable name survive.
pub fn dedup_by_focal_name<'h>(
    train: impl IntoIterator<Item = Record>,
    holdout: impl IntoIterator<Item = &'h Record>,
) -> (Vec<Record>, usize) {
    let names: HashSet<String> = holdout
        .into_iter()
        .filter_map(|r| focal_name(&r.focal_method))
        .collect();
    let mut dropped = 0;
    let kept = train
        .into_iter()
        .filter(|r| {
            let leak = focal_name(&r.focal_method).is_some_and(|n| names.contains(&n));
            dropped += usize::from(leak);
            !leak
        })
        .collect();
    (kept, dropped)
}

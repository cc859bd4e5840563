//! Detection and cleaning of noisy (focal method, test case) pairs in
//! unit-test-generation datasets.
//!
//! Three filters run over every record: syntax rules over the parsed
//! snippets ([`syntax`]), a call-signature relevance check ([`relevance`]) and
//! a branch-coverage gate with pluggable scorers ([`coverage`]). [`pipeline`]
//! composes them, counts noise per category and writes verdicts.

pub mod ast;
pub mod cli;
pub mod coverage;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod relevance;
pub mod syntax;

pub use ast::{parse_snippet, Node, SyntaxTree};
pub use coverage::{
    gate, static_estimate, CoverageConfig, CoverageScore, CoverageScorer, FeatureVector,
    RemoteErrorPolicy, RemoteScorer, ScoreSource, ScorerSpec, SidecarScorer, StaticScorer,
};
pub use dataset::{read_records, read_sidecar_scores, write_records, FieldMapping, Record};
pub use error::{Error, Result};
pub use pipeline::{
    dedup_by_focal_name, evaluate_record, run_pipeline, Action, NoiseReport, PipelineConfig,
    ScoringScope, Verdict,
};
pub use relevance::{CallSite, MethodSignature, TypeName};
pub use syntax::{NoiseLabel, Side, SyntaxFinding};

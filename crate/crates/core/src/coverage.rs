//! Branch-coverage scoring and the low-coverage gate.
//!
//! Scores come from one of three backends: a static heuristic over a fixed
//! feature vector, a sidecar file of externally computed predictions, or an
//! HTTP scoring service.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ast::{Node, SyntaxTree};
use crate::dataset::read_sidecar_scores;
use crate::error::{Error, Result};
use crate::relevance::{call_matches, CallSite, MethodSignature};

pub const DEFAULT_THRESHOLD: f64 = 0.01;
pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Static,
    Sidecar,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageScore {
    value: f64,
    source: ScoreSource,
}

impl CoverageScore {
    /// Rejects values outside [0, 1] and NaN.
    pub fn new(value: f64, source: ScoreSource) -> Option<Self> {
        (0.0..=1.0)
            .contains(&value)
            .then_some(CoverageScore { value, source })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn source(&self) -> ScoreSource {
        self.source
    }
}

/// Keep iff the score is strictly above the threshold.
pub fn gate(score: &CoverageScore, threshold: f64) -> bool {
    score.value > threshold
}

/// Deterministic per-pair features, exported for external scorers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub branch_points: u32,
    pub matched_calls: u32,
    pub total_invocations: u32,
    pub assertion_count: u32,
    pub focal_lines: u32,
    pub test_lines: u32,
    pub param_arity: u32,
    pub return_is_void: u32,
    pub loop_count: u32,
    pub catch_count: u32,
}

fn is_loop(kind: &str) -> bool {
    matches!(
        kind,
        "for_statement" | "enhanced_for_statement" | "while_statement" | "do_statement"
    )
}

fn is_branch_point(node: &Node<'_>) -> bool {
    match node.kind() {
        "if_statement" | "ternary_expression" | "catch_clause" | "&&" | "||" => true,
        "switch_label" => node.children().next().is_some_and(|c| c.kind() == "case"),
        kind => is_loop(kind),
    }
}

fn count(n: usize) -> u32 {
    u32::try_from(n).unwrap_or(u32::MAX)
}

fn is_assertion(name: &str) -> bool {
    name == "fail"
        || name
            .get(..6)
            .is_some_and(|prefix| prefix.eq_ignore_ascii_case("assert"))
}

pub fn extract_features(
    focal: &SyntaxTree,
    test: &SyntaxTree,
    sig: Option<&MethodSignature>,
    calls: &[CallSite],
) -> FeatureVector {
    let decl = focal.declarations().next();
    let scope: Vec<Node<'_>> = match decl {
        Some(d) => d
            .child_by_field("body")
            .map(|b| b.descendants().collect())
            .unwrap_or_default(),
        None => focal.dfs().filter(|n| n.in_snippet()).collect(),
    };

    let assertion_count = test
        .nodes_of_kind("method_invocation")
        .filter_map(|inv| inv.child_by_field("name"))
        .filter(|name| is_assertion(name.text()))
        .count();

    let return_is_void = match decl {
        Some(d) if d.kind() == "constructor_declaration" => true,
        Some(d) => d
            .child_by_field("type")
            .is_some_and(|t| t.kind() == "void_type"),
        None => false,
    };

    FeatureVector {
        branch_points: count(scope.iter().filter(|n| is_branch_point(n)).count()),
        matched_calls: count(
            sig.map_or(0, |s| calls.iter().filter(|c| call_matches(s, c)).count()),
        ),
        total_invocations: count(calls.len()),
        assertion_count: count(assertion_count),
        focal_lines: count(focal.source().lines().count()),
        test_lines: count(test.source().lines().count()),
        param_arity: count(sig.map_or(0, MethodSignature::arity)),
        return_is_void: u32::from(return_is_void),
        loop_count: count(scope.iter().filter(|n| is_loop(n.kind())).count()),
        catch_count: count(scope.iter().filter(|n| n.kind() == "catch_clause").count()),
    }
}

/// Zero-dependency fallback: uncalled code scores 0, straight-line code 1,
/// otherwise calls plus assertions per two outcomes of each branch point.
pub fn static_estimate(f: &FeatureVector) -> CoverageScore {
    let value = if f.matched_calls == 0 {
        0.0
    } else if f.branch_points == 0 {
        1.0
    } else {
        let hits = f64::from(f.matched_calls) + f64::from(f.assertion_count);
        (hits / (2.0 * f64::from(f.branch_points))).min(1.0)
    };
    CoverageScore {
        value,
        source: ScoreSource::Static,
    }
}

/// What the pipeline does when the remote scorer fails for a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemoteErrorPolicy {
    #[default]
    Fail,
    Keep,
    Drop,
}

impl FromStr for RemoteErrorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail" => Ok(Self::Fail),
            "keep" => Ok(Self::Keep),
            "drop" => Ok(Self::Drop),
            other => Err(Error::Config(format!(
                "unknown remote error policy `{other}` (expected fail, keep or drop)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    Static,
    Sidecar(PathBuf),
    Remote(String),
}

impl FromStr for ScorerSpec {
    type Err = Error;

    /// `static`, `sidecar:<path>` or `http:<url>`. A full `http://` or
    /// `https://` URL is accepted as-is.
    fn from_str(s: &str) -> Result<Self> {
        if s == "static" {
            return Ok(Self::Static);
        }
        if let Some(path) = s.strip_prefix("sidecar:").filter(|p| !p.is_empty()) {
            return Ok(Self::Sidecar(PathBuf::from(path)));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(Self::Remote(s.trim_end_matches('/').to_owned()));
        }
        if let Some(url) = s.strip_prefix("http:").filter(|u| !u.is_empty()) {
            return Ok(Self::Remote(url.trim_end_matches('/').to_owned()));
        }
        Err(Error::Config(format!(
            "bad coverage scorer `{s}` (expected static, sidecar:<path> or http:<url>)"
        )))
    }
}

#[derive(Debug, Clone)]
pub struct CoverageConfig {
    threshold: f64,
    pub scorer: ScorerSpec,
    pub remote_timeout: Duration,
    pub on_remote_error: RemoteErrorPolicy,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            threshold: DEFAULT_THRESHOLD,
            scorer: ScorerSpec::Static,
            remote_timeout: DEFAULT_REMOTE_TIMEOUT,
            on_remote_error: RemoteErrorPolicy::Fail,
        }
    }
}

impl CoverageConfig {
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "coverage threshold {threshold} outside [0, 1)"
            )));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn build_scorer(&self) -> Result<Box<dyn CoverageScorer>> {
        Ok(match &self.scorer {
            ScorerSpec::Static => Box::new(StaticScorer),
            ScorerSpec::Sidecar(path) => Box::new(SidecarScorer::load(path)?),
            ScorerSpec::Remote(url) => Box::new(RemoteScorer::new(url, self.remote_timeout)),
        })
    }
}

/// The text a scorer sees for one record. `focal_method` is the
/// annotation-stripped focal snippet.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScoreRequest<'a> {
    pub id: &'a str,
    pub focal_method: &'a str,
    pub test_case: &'a str,
    #[serde(skip)]
    pub features: &'a FeatureVector,
}

/// A coverage backend. Implementations must be deterministic for the static
/// and sidecar cases. `Error::Scorer` is the recoverable failure that the
/// remote error policy applies to; any other error aborts the run.
pub trait CoverageScorer: Send + Sync {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<CoverageScore>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StaticScorer;

impl CoverageScorer for StaticScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<CoverageScore> {
        Ok(static_estimate(request.features))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SidecarScorer {
    scores: HashMap<String, f64>,
}

impl SidecarScorer {
    pub fn new(scores: HashMap<String, f64>) -> Self {
        SidecarScorer { scores }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(Self::new(read_sidecar_scores(path)?))
    }
}

impl CoverageScorer for SidecarScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<CoverageScore> {
        let value = *self
            .scores
            .get(request.id)
            .ok_or_else(|| Error::MissingScore {
                id: request.id.to_owned(),
            })?;
        CoverageScore::new(value, ScoreSource::Sidecar).ok_or_else(|| Error::ScoreOutOfRange {
            id: request.id.to_owned(),
            value,
        })
    }
}

#[derive(Deserialize)]
struct ScoreResponse {
    branch_coverage: f64,
}

#[derive(Serialize)]
struct BatchRequest<'a> {
    items: &'a [ScoreRequest<'a>],
}

#[derive(Deserialize)]
struct BatchResponse {
    scores: Vec<BatchEntry>,
}

#[derive(Deserialize)]
struct BatchEntry {
    id: String,
    branch_coverage: f64,
}

/// Client for the HTTP scoring protocol (`/score`, `/score_batch`, `/health`).
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    base_url: String,
    agent: ureq::Agent,
}

impl RemoteScorer {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteScorer {
            base_url: base_url.trim_end_matches('/').to_owned(),
            agent,
        }
    }

    fn post(&self, path: &str, body: String) -> std::result::Result<String, String> {
        let url = format!("{}{path}", self.base_url);
        let mut response = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        if status != 200 {
            return Err(format!("HTTP {status} from {url}"));
        }
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())
    }

    pub fn health(&self) -> bool {
        let url = format!("{}/health", self.base_url);
        matches!(self.agent.get(&url).call(), Ok(r) if r.status().as_u16() == 200)
    }

    /// Scores several records in one request. Every requested id must come
    /// back exactly once with an in-range value.
    pub fn score_batch(
        &self,
        items: &[ScoreRequest<'_>],
    ) -> Result<HashMap<String, CoverageScore>> {
        let batch_error = |reason: String| Error::Scorer {
            id: items.first().map_or_else(String::new, |i| i.id.to_owned()),
            reason,
        };
        let body = serde_json::to_string(&BatchRequest { items }).expect("plain strings serialize");
        let text = self.post("/score_batch", body).map_err(batch_error)?;
        let parsed: BatchResponse =
            serde_json::from_str(&text).map_err(|e| batch_error(format!("bad response: {e}")))?;
        let mut out = HashMap::new();
        for entry in parsed.scores {
            let score = CoverageScore::new(entry.branch_coverage, ScoreSource::Remote).ok_or_else(
                || Error::Scorer {
                    id: entry.id.clone(),
                    reason: format!("score out of range ({})", entry.branch_coverage),
                },
            )?;
            if out.insert(entry.id.clone(), score).is_some() {
                return Err(Error::Scorer {
                    id: entry.id,
                    reason: "duplicate id in batch response".into(),
                });
            }
        }
        if let Some(missing) = items.iter().find(|i| !out.contains_key(i.id)) {
            return Err(Error::Scorer {
                id: missing.id.to_owned(),
                reason: "missing from batch response".into(),
            });
        }
        if out.len() != items.len() {
            return Err(batch_error("unexpected ids in batch response".into()));
        }
        Ok(out)
    }
}

impl CoverageScorer for RemoteScorer {
    fn score(&self, request: &ScoreRequest<'_>) -> Result<CoverageScore> {
        let fail = |reason: String| Error::Scorer {
            id: request.id.to_owned(),
            reason,
        };
        let body = serde_json::to_string(request).expect("plain strings serialize");
        let text = self.post("/score", body).map_err(fail)?;
        let parsed: ScoreResponse =
            serde_json::from_str(&text).map_err(|e| fail(format!("bad response: {e}")))?;
        CoverageScore::new(parsed.branch_coverage, ScoreSource::Remote)
            .ok_or_else(|| fail(format!("score out of range ({})", parsed.branch_coverage)))
    }
}

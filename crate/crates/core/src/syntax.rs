//! Rule-based syntax detectors and the annotation-strip transform.

use std::fmt;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::ast::{parse_snippet, Node, SyntaxTree};
use crate::relevance::TypeName;

/// The eight noise categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLabel {
    AmbiguousDataType,
    UnnecessaryAnnotations,
    EmptyExceptionHandling,
    MissingImplementation,
    SyntaxError,
    NonEnglishLiteral,
    NoRelevance,
    LowCoverage,
}

impl NoiseLabel {
    pub const ALL: [NoiseLabel; 8] = [
        NoiseLabel::AmbiguousDataType,
        NoiseLabel::UnnecessaryAnnotations,
        NoiseLabel::EmptyExceptionHandling,
        NoiseLabel::MissingImplementation,
        NoiseLabel::SyntaxError,
        NoiseLabel::NonEnglishLiteral,
        NoiseLabel::NoRelevance,
        NoiseLabel::LowCoverage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLabel::AmbiguousDataType => "ambiguous_data_type",
            NoiseLabel::UnnecessaryAnnotations => "unnecessary_annotations",
            NoiseLabel::EmptyExceptionHandling => "empty_exception_handling",
            NoiseLabel::MissingImplementation => "missing_implementation",
            NoiseLabel::SyntaxError => "syntax_error",
            NoiseLabel::NonEnglishLiteral => "non_english_literal",
            NoiseLabel::NoRelevance => "no_relevance",
            NoiseLabel::LowCoverage => "low_coverage",
        }
    }

    /// Human-readable category name used in tabular reports.
    pub fn title(self) -> &'static str {
        match self {
            NoiseLabel::AmbiguousDataType => "Ambiguous Data Type",
            NoiseLabel::UnnecessaryAnnotations => "Unnecessary Annotations",
            NoiseLabel::EmptyExceptionHandling => "Empty Exception Handling Statement",
            NoiseLabel::MissingImplementation => "Missing Implementation",
            NoiseLabel::SyntaxError => "Syntax Errors",
            NoiseLabel::NonEnglishLiteral => "Non-English Literal",
            NoiseLabel::NoRelevance => "No Relevance",
            NoiseLabel::LowCoverage => "Low Coverage",
        }
    }

    /// Every label except annotation noise removes the record.
    pub fn is_drop(self) -> bool {
        self != NoiseLabel::UnnecessaryAnnotations
    }
}

impl fmt::Display for NoiseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Focal,
    Test,
}

/// Half-open byte range, serialized as `[start, end]`.
pub type Span = (usize, usize);

fn span_of(range: Range<usize>) -> Span {
    (range.start, range.end)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxFinding {
    pub label: NoiseLabel,
    pub side: Side,
    #[serde(rename = "spans")]
    pub evidence_spans: Vec<Span>,
}

impl SyntaxFinding {
    fn new(label: NoiseLabel, side: Side, spans: Vec<Span>) -> Self {
        debug_assert!(!spans.is_empty());
        SyntaxFinding {
            label,
            side,
            evidence_spans: spans,
        }
    }
}

const GENERIC_MARKERS: &[&str] = &["E", "T", "K", "V", "N"];

fn is_ambiguous_marker(node: &Node<'_>) -> bool {
    match node.kind() {
        "wildcard" => true,
        "type_identifier" | "identifier" => GENERIC_MARKERS.contains(&node.text()),
        _ => false,
    }
}

/// The declared type of a formal or spread parameter, with `[]` appended for
/// C-style dimensions on the name.
pub(crate) fn parameter_type(param: Node<'_>) -> Option<(TypeName, bool)> {
    match param.kind() {
        "formal_parameter" => {
            let ty = param.child_by_field("type")?;
            let mut text = ty.text().to_owned();
            if let Some(dims) = param.child_by_field("dimensions") {
                text.push_str(dims.text());
            }
            Some((TypeName::normalize(&text), false))
        }
        "spread_parameter" => {
            let ty = param.named_children().find(|c| {
                !matches!(
                    c.kind(),
                    "modifiers" | "variable_declarator" | "annotation" | "marker_annotation"
                )
            })?;
            Some((TypeName::normalize(ty.text()), true))
        }
        _ => None,
    }
}

fn declaration_types<'t>(decl: Node<'t>) -> Vec<(TypeName, Range<usize>)> {
    let mut types = Vec::new();
    if let Some(ret) = decl.child_by_field("type") {
        types.push((TypeName::normalize(ret.text()), ret.span()));
    }
    if let Some(params) = decl.child_by_field("parameters") {
        for p in params.named_children() {
            if let Some((ty, _)) = parameter_type(p) {
                types.push((ty, p.span()));
            }
        }
    }
    types
}

/// Flags declarations with generic type parameters named E, T, K, V or N, or
/// carrying a wildcard. `object_mode` also flags Object-typed signatures.
pub fn detect_ambiguous_types(tree: &SyntaxTree, object_mode: bool) -> Vec<SyntaxFinding> {
    let mut findings = Vec::new();
    for decl in tree.declarations().filter(|d| d.in_snippet()) {
        let mut spans: Vec<Span> = decl
            .child_of_kind("type_parameters")
            .into_iter()
            .flat_map(|tp| tp.descendants())
            .filter(is_ambiguous_marker)
            .map(|n| span_of(n.span()))
            .collect();
        if object_mode {
            spans.extend(
                declaration_types(decl)
                    .into_iter()
                    .filter(|(ty, _)| ty.as_str() == Some("Object"))
                    .map(|(_, span)| span_of(span)),
            );
        }
        if !spans.is_empty() {
            findings.push(SyntaxFinding::new(
                NoiseLabel::AmbiguousDataType,
                Side::Focal,
                spans,
            ));
        }
    }
    findings
}

fn is_annotation(node: &Node<'_>) -> bool {
    matches!(node.kind(), "annotation" | "marker_annotation")
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b >= 0x80
}

/// Result of removing annotations from a focal snippet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrippedSource {
    pub source: String,
    /// Deleted byte ranges of the input, ascending and disjoint.
    pub stripped: Vec<Span>,
}

/// Deletes every annotation in the snippet together with the whitespace that
/// follows it, up to and including one newline.
pub fn strip_annotations(source: &str, tree: &SyntaxTree) -> StrippedSource {
    let bytes = source.as_bytes();
    let mut ranges: Vec<Span> = Vec::new();
    for node in tree.dfs().filter(|n| is_annotation(n) && n.in_snippet()) {
        let Range { start, end } = node.span();
        if ranges.last().is_some_and(|&(_, e)| start < e) {
            // nested inside an annotation already removed
            continue;
        }
        let mut cut = end;
        while cut < bytes.len() && matches!(bytes[cut], b' ' | b'\t' | b'\r') {
            cut += 1;
        }
        if cut < bytes.len() && bytes[cut] == b'\n' {
            cut += 1;
        }
        // never glue two identifiers together
        let joins_words = start > 0
            && is_ident_byte(bytes[start - 1])
            && cut < bytes.len()
            && is_ident_byte(bytes[cut]);
        if joins_words {
            cut = end;
        }
        ranges.push((start, cut));
    }

    let mut out = String::with_capacity(source.len());
    let mut pos = 0;
    for &(start, end) in &ranges {
        out.push_str(&source[pos..start]);
        pos = end;
    }
    out.push_str(&source[pos..]);
    StrippedSource {
        source: out,
        stripped: ranges,
    }
}

fn clause_body<'t>(clause: Node<'t>) -> Option<Node<'t>> {
    clause
        .child_by_field("body")
        .or_else(|| clause.child_of_kind("block"))
}

pub fn detect_empty_exception_handling(tree: &SyntaxTree, side: Side) -> Vec<SyntaxFinding> {
    tree.dfs()
        .filter(|n| matches!(n.kind(), "catch_clause" | "finally_clause") && n.in_snippet())
        .filter(|clause| clause_body(*clause).is_some_and(|b| b.statement_count() == 0))
        .map(|clause| {
            SyntaxFinding::new(
                NoiseLabel::EmptyExceptionHandling,
                side,
                vec![span_of(clause.span())],
            )
        })
        .collect()
}

pub fn detect_missing_implementation(tree: &SyntaxTree, side: Side) -> Vec<SyntaxFinding> {
    tree.declarations()
        .filter(|d| d.in_snippet())
        .filter(|decl| match decl.child_by_field("body") {
            None => true,
            Some(body) => body.statement_count() == 0,
        })
        .map(|decl| {
            SyntaxFinding::new(
                NoiseLabel::MissingImplementation,
                side,
                vec![span_of(decl.span())],
            )
        })
        .collect()
}

/// One finding per maximal ERROR region. Zero-width recovery tokens count.
pub fn detect_syntax_errors(tree: &SyntaxTree, side: Side) -> Vec<SyntaxFinding> {
    tree.dfs()
        .filter(|n| n.is_error() && !n.parent().is_some_and(has_error_ancestor))
        .map(|n| SyntaxFinding::new(NoiseLabel::SyntaxError, side, vec![span_of(n.span())]))
        .collect()
}

fn has_error_ancestor(node: Node<'_>) -> bool {
    let mut current = Some(node);
    while let Some(n) = current {
        if n.is_error() {
            return true;
        }
        current = n.parent();
    }
    false
}

static NON_ENGLISH: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\x{ac00}-\x{d7ff}\x{4e00}-\x{9fa5}\x{30a0}-\x{30ff}\x{3040}-\x{309f}]+")
        .expect("static pattern")
});

/// Hangul, CJK unified ideograph and kana runs anywhere in the raw text.
pub fn detect_non_english(text: &str, side: Side) -> Vec<SyntaxFinding> {
    NON_ENGLISH
        .find_iter(text)
        .map(|m| {
            SyntaxFinding::new(
                NoiseLabel::NonEnglishLiteral,
                side,
                vec![span_of(m.range())],
            )
        })
        .collect()
}

/// Output of running every syntax rule over one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxOutcome {
    pub findings: Vec<SyntaxFinding>,
    /// Annotation-free focal text, present only when something was stripped.
    pub transformed_focal: Option<String>,
}

/// Runs all six rule families. Ambiguous types and annotation stripping apply
/// to the focal side only; the remaining detectors run on both sides.
pub fn run_syntax_rules(
    focal: &str,
    focal_tree: &SyntaxTree,
    test: &str,
    test_tree: &SyntaxTree,
    object_mode: bool,
) -> SyntaxOutcome {
    let mut findings = detect_ambiguous_types(focal_tree, object_mode);

    let stripped = strip_annotations(focal, focal_tree);
    let transformed_focal = if stripped.stripped.is_empty() {
        None
    } else {
        findings.push(SyntaxFinding::new(
            NoiseLabel::UnnecessaryAnnotations,
            Side::Focal,
            stripped.stripped.clone(),
        ));
        Some(stripped.source)
    };

    for (side, text, tree) in [
        (Side::Focal, focal, focal_tree),
        (Side::Test, test, test_tree),
    ] {
        findings.extend(detect_empty_exception_handling(tree, side));
        findings.extend(detect_missing_implementation(tree, side));
        findings.extend(detect_syntax_errors(tree, side));
        findings.extend(detect_non_english(text, side));
    }
    SyntaxOutcome {
        findings,
        transformed_focal,
    }
}

/// Convenience: strip a snippet without a pre-parsed tree.
pub fn strip_source(source: &str) -> StrippedSource {
    strip_annotations(source, &parse_snippet(source))
}

//! JSONL corpus files: canonical records, field mappings for foreign layouts,
//! and sidecar coverage-score files.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;

use crate::error::{Error, Result};

/// Opaque pass-through fields. Values keep their exact source bytes.
#[derive(Debug, Clone, Default, Serialize)]
#[serde(transparent)]
pub struct Meta(IndexMap<String, Box<RawValue>>);

impl Meta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|raw| raw.get())
    }

    /// Inserts `raw_json` verbatim. Fails if it is not a single JSON value.
    pub fn insert_raw(&mut self, key: impl Into<String>, raw_json: &str) -> Result<()> {
        let raw = RawValue::from_string(raw_json.to_owned())
            .map_err(|e| Error::Config(format!("meta value is not JSON: {e}")))?;
        self.0.insert(key.into(), raw);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.get()))
    }
}

impl PartialEq for Meta {
    fn eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.iter().zip(other.iter()).all(|(a, b)| a == b)
    }
}

impl Eq for Meta {}

/// One (focal method, test case) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Record {
    pub id: String,
    pub focal_method: String,
    pub test_case: String,
    pub focal_path: Option<String>,
    pub test_path: Option<String>,
    pub meta: Meta,
}

impl Record {
    pub fn new(
        id: impl Into<String>,
        focal_method: impl Into<String>,
        test_case: impl Into<String>,
    ) -> Self {
        Record {
            id: id.into(),
            focal_method: focal_method.into(),
            test_case: test_case.into(),
            focal_path: None,
            test_path: None,
            meta: Meta::new(),
        }
    }
}

type FieldPath = Vec<String>;

/// Where each canonical field lives inside a source JSON object.
///
/// Paths are dot-separated (`focal_method.body`). When `id` is unmapped the
/// zero-based line number is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMapping {
    id: Option<FieldPath>,
    focal_method: FieldPath,
    test_case: FieldPath,
    focal_path: Option<FieldPath>,
    test_path: Option<FieldPath>,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            id: Some(vec!["id".into()]),
            focal_method: vec!["focal_method".into()],
            test_case: vec!["test_case".into()],
            focal_path: Some(vec!["focal_path".into()]),
            test_path: Some(vec!["test_path".into()]),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingFile {
    id: Option<String>,
    focal_method: String,
    test_case: String,
    focal_path: Option<String>,
    test_path: Option<String>,
}

fn split_path(path: &str) -> Result<FieldPath> {
    let parts: Vec<String> = path.split('.').map(str::to_owned).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Mapping(format!("bad path `{path}`")));
    }
    Ok(parts)
}

impl FieldMapping {
    /// Builds a mapping from dot-separated paths. `id: None` means ids are
    /// synthesized from line numbers.
    pub fn new(
        id: Option<&str>,
        focal_method: &str,
        test_case: &str,
        focal_path: Option<&str>,
        test_path: Option<&str>,
    ) -> Result<Self> {
        Ok(FieldMapping {
            id: id.map(split_path).transpose()?,
            focal_method: split_path(focal_method)?,
            test_case: split_path(test_case)?,
            focal_path: focal_path.map(split_path).transpose()?,
            test_path: test_path.map(split_path).transpose()?,
        })
    }

    /// Parses a mapping file: a JSON object from canonical field name to path.
    /// `focal_method` and `test_case` are mandatory.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MappingFile =
            serde_json::from_str(text).map_err(|e| Error::Mapping(e.to_string()))?;
        Self::new(
            file.id.as_deref(),
            &file.focal_method,
            &file.test_case,
            file.focal_path.as_deref(),
            file.test_path.as_deref(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn roots(&self) -> HashSet<&str> {
        [
            self.id.as_ref(),
            Some(&self.focal_method),
            Some(&self.test_case),
            self.focal_path.as_ref(),
            self.test_path.as_ref(),
        ]
        .into_iter()
        .flatten()
        .map(|p| p[0].as_str())
        .collect()
    }
}

/// Iterates the non-empty lines of a JSONL stream as (1-based line number, text).
pub struct JsonLines<R> {
    reader: R,
    line: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> JsonLines<R> {
    pub fn new(reader: R) -> Self {
        JsonLines {
            reader,
            line: 0,
            buf: Vec::new(),
        }
    }
}

impl<R: BufRead> Iterator for JsonLines<R> {
    type Item = Result<(usize, String)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(Error::io("<input>", e))),
            }
            self.line += 1;
            let mut bytes = self.buf.as_slice();
            if let Some(rest) = bytes.strip_suffix(b"\n") {
                bytes = rest;
            }
            if let Some(rest) = bytes.strip_suffix(b"\r") {
                bytes = rest;
            }
            if bytes.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            return Some(match std::str::from_utf8(bytes) {
                Ok(s) => Ok((self.line, s.to_owned())),
                Err(_) => Err(Error::InvalidUtf8 { line: self.line }),
            });
        }
    }
}

/// Streaming record reader. Yields records in file order and rejects
/// duplicate ids.
pub struct RecordReader<R> {
    lines: JsonLines<R>,
    mapping: FieldMapping,
    roots: HashSet<String>,
    seen: HashSet<String>,
    path: Option<PathBuf>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R, mapping: FieldMapping) -> Self {
        let roots = mapping.roots().into_iter().map(str::to_owned).collect();
        RecordReader {
            lines: JsonLines::new(reader),
            mapping,
            roots,
            seen: HashSet::new(),
            path: None,
        }
    }

    fn parse_line(&mut self, line: usize, text: &str) -> Result<Record> {
        let object: IndexMap<String, Box<RawValue>> =
            serde_json::from_str(text).map_err(|e| Error::MalformedJson {
                line,
                detail: e.to_string(),
            })?;

        let id = match &self.mapping.id {
            Some(path) => {
                lookup_string(&object, path, line, true)?.ok_or_else(|| missing(path, line))?
            }
            None => (line - 1).to_string(),
        };
        if id.is_empty() {
            return Err(Error::EmptyId { line });
        }
        let focal_method = lookup_string(&object, &self.mapping.focal_method, line, false)?
            .ok_or_else(|| missing(&self.mapping.focal_method, line))?;
        let test_case = lookup_string(&object, &self.mapping.test_case, line, false)?
            .ok_or_else(|| missing(&self.mapping.test_case, line))?;
        let focal_path = match &self.mapping.focal_path {
            Some(p) => lookup_string(&object, p, line, false)?,
            None => None,
        };
        let test_path = match &self.mapping.test_path {
            Some(p) => lookup_string(&object, p, line, false)?,
            None => None,
        };

        let mut meta = IndexMap::new();
        for (key, raw) in object {
            if self.roots.contains(&key) {
                continue;
            }
            if key == "meta" && raw.get().trim_start().starts_with('{') {
                let nested: IndexMap<String, Box<RawValue>> = serde_json::from_str(raw.get())
                    .map_err(|e| Error::MalformedJson {
                        line,
                        detail: e.to_string(),
                    })?;
                for (k, v) in nested {
                    insert_meta(&mut meta, k, v, line)?;
                }
            } else {
                insert_meta(&mut meta, key, raw, line)?;
            }
        }

        if !self.seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id, line });
        }
        Ok(Record {
            id,
            focal_method,
            test_case,
            focal_path,
            test_path,
            meta: Meta(meta),
        })
    }
}

fn insert_meta(
    meta: &mut IndexMap<String, Box<RawValue>>,
    key: String,
    value: Box<RawValue>,
    line: usize,
) -> Result<()> {
    if meta.contains_key(&key) {
        return Err(Error::Mapping(format!(
            "line {line}: meta key `{key}` appears both nested and top-level"
        )));
    }
    meta.insert(key, value);
    Ok(())
}

fn missing(path: &FieldPath, line: usize) -> Error {
    Error::MissingField {
        field: path.join("."),
        line,
    }
}

/// Resolves `path` in `object`. Null or absent yields `None`. Ids may also be
/// integers, rendered in decimal.
fn lookup_string(
    object: &IndexMap<String, Box<RawValue>>,
    path: &FieldPath,
    line: usize,
    allow_integer: bool,
) -> Result<Option<String>> {
    let Some(raw) = object.get(&path[0]) else {
        return Ok(None);
    };
    let mut value: Value = serde_json::from_str(raw.get()).map_err(|e| Error::MalformedJson {
        line,
        detail: e.to_string(),
    })?;
    for segment in &path[1..] {
        value = match value {
            Value::Object(mut map) => match map.remove(segment) {
                Some(v) => v,
                None => return Ok(None),
            },
            Value::Null => return Ok(None),
            _ => {
                return Err(Error::FieldType {
                    field: path.join("."),
                    line,
                })
            }
        };
    }
    match value {
        Value::Null => Ok(None),
        Value::String(s) => Ok(Some(s)),
        Value::Number(n) if allow_integer && (n.is_i64() || n.is_u64()) => Ok(Some(n.to_string())),
        _ => Err(Error::FieldType {
            field: path.join("."),
            line,
        }),
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        let item = match self.lines.next()? {
            Ok((line, text)) => self.parse_line(line, &text),
            Err(e) => Err(e),
        };
        Some(item.map_err(|e| match (e, &self.path) {
            (Error::Io { source, .. }, Some(path)) => Error::io(path.clone(), source),
            (e, _) => e,
        }))
    }
}

/// Opens `path` and streams its records through `mapping`.
pub fn read_records(path: &Path, mapping: FieldMapping) -> Result<RecordReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = RecordReader::new(BufReader::new(file), mapping);
    reader.path = Some(path.to_owned());
    Ok(reader)
}

/// Line-oriented JSON writer: one compact object per LF-terminated line.
pub struct JsonlWriter<W: Write> {
    out: W,
    path: PathBuf,
}

impl JsonlWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(JsonlWriter {
            out: BufWriter::new(file),
            path: path.to_owned(),
        })
    }
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlWriter {
            out,
            path: PathBuf::from("<output>"),
        }
    }

    pub fn write<T: Serialize + ?Sized>(&mut self, item: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, item).map_err(|e| Error::io(&self.path, e.into()))?;
        self.out
            .write_all(b"\n")
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.out)
    }
}

pub fn write_records<'a>(records: impl IntoIterator<Item = &'a Record>, path: &Path) -> Result<()> {
    let mut writer = JsonlWriter::create(path)?;
    for record in records {
        writer.write(record)?;
    }
    writer.finish()?;
    Ok(())
}

#[derive(Deserialize)]
struct SidecarLine {
    id: String,
    branch_coverage: f64,
}

pub fn parse_sidecar_scores<R: BufRead>(reader: R) -> Result<HashMap<String, f64>> {
    let mut scores = HashMap::new();
    for item in JsonLines::new(reader) {
        let (line, text) = item?;
        let row: SidecarLine = serde_json::from_str(&text).map_err(|e| Error::MalformedJson {
            line,
            detail: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&row.branch_coverage) {
            return Err(Error::ScoreOutOfRange {
                id: row.id,
                value: row.branch_coverage,
            });
        }
        if scores.contains_key(&row.id) {
            return Err(Error::DuplicateId { id: row.id, line });
        }
        scores.insert(row.id, row.branch_coverage);
    }
    Ok(scores)
}

/// Reads `{"id": ..., "branch_coverage": ...}` lines into an id → score map.
pub fn read_sidecar_scores(path: &Path) -> Result<HashMap<String, f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sidecar_scores(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

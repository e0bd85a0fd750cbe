//! Parsing and streaming of CASELAW-style case records.
//!
//! Each record is a JSON object carrying `id`, `decision_date`,
//! `jurisdiction.name_long` and `casebody.data.opinions`. Files hold one
//! record per line (JSON lines); a file containing a single pretty-printed
//! record is accepted as well.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Kind of a judicial opinion, as declared by the record's `type` field.
///
/// Unrecognized type strings are retained verbatim so downstream filters
/// can decide what to do with them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpinionKind {
    Majority,
    Dissent,
    Other(String),
}

impl OpinionKind {
    pub fn from_type_str(s: &str) -> Self {
        match s {
            "majority" => OpinionKind::Majority,
            "dissent" => OpinionKind::Dissent,
            other => OpinionKind::Other(other.to_string()),
        }
    }

    pub fn as_type_str(&self) -> &str {
        match self {
            OpinionKind::Majority => "majority",
            OpinionKind::Dissent => "dissent",
            OpinionKind::Other(s) => s,
        }
    }
}

impl fmt::Display for OpinionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_type_str())
    }
}

/// One opinion inside a case body. `text` is whitespace-stripped and
/// guaranteed non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opinion {
    pub kind: OpinionKind,
    pub author: Option<String>,
    pub text: String,
}

/// A parsed legal case record.
///
/// `decision_date` holds the date only when it parses as `YYYY-MM-DD`;
/// otherwise the raw string is kept in `raw_decision_date` and flagged by
/// the parser.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalCase {
    pub id: u64,
    pub decision_date: Option<String>,
    pub raw_decision_date: Option<String>,
    pub jurisdiction_name: Option<String>,
    pub opinions: Vec<Opinion>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("missing case body (no opinions array)")]
    MissingCaseBody,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Checks a strict `YYYY-MM-DD` calendar date (leap years included).
fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| s[r].parse::<u32>().ok();
    let (y, m, d) = match (digits(0..4), digits(5..7), digits(8..10)) {
        (Some(y), Some(m), Some(d)) => (y, m, d),
        _ => return false,
    };
    if !(1..=12).contains(&m) || d == 0 {
        return false;
    }
    let leap = y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
    let max_day = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ => {
            if leap {
                29
            } else {
                28
            }
        }
    };
    d <= max_day
}

fn opt_str(v: &Value) -> Option<String> {
    v.as_str().map(|s| s.to_string()).filter(|s| !s.is_empty())
}

/// Parse one complete case record from its JSON text.
pub fn parse_case(record_text: &str) -> Result<LegalCase, IngestError> {
    let v: Value = serde_json::from_str(record_text)
        .map_err(|e| IngestError::MalformedRecord(e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| IngestError::MalformedRecord("record is not an object".into()))?;

    let id = obj
        .get("id")
        .and_then(Value::as_u64)
        .ok_or_else(|| IngestError::MalformedRecord("missing or non-integer id".into()))?;

    let (decision_date, raw_decision_date) = match obj.get("decision_date").and_then(opt_str) {
        Some(s) if is_iso_date(&s) => (Some(s), None),
        Some(s) => (None, Some(s)),
        None => (None, None),
    };

    let jurisdiction_name = obj
        .get("jurisdiction")
        .and_then(|j| j.get("name_long"))
        .and_then(opt_str);

    let opinions_val = obj
        .get("casebody")
        .and_then(|c| c.get("data"))
        .and_then(|d| d.get("opinions"))
        .and_then(Value::as_array)
        .ok_or(IngestError::MissingCaseBody)?;

    let mut opinions = Vec::with_capacity(opinions_val.len());
    for op in opinions_val {
        let kind = op
            .get("type")
            .and_then(Value::as_str)
            .map(OpinionKind::from_type_str)
            .ok_or_else(|| IngestError::MalformedRecord("opinion without type".into()))?;
        let text = op
            .get("text")
            .and_then(Value::as_str)
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| IngestError::MalformedRecord("opinion with empty text".into()))?
            .to_string();
        let author = op.get("author").and_then(opt_str);
        opinions.push(Opinion { kind, author, text });
    }

    Ok(LegalCase {
        id,
        decision_date,
        raw_decision_date,
        jurisdiction_name,
        opinions,
    })
}

/// Serialize a case back to the canonical record form accepted by
/// [`parse_case`].
pub fn case_to_record(case: &LegalCase) -> String {
    let opinions: Vec<Value> = case
        .opinions
        .iter()
        .map(|op| {
            let mut o = serde_json::Map::new();
            o.insert("type".into(), op.kind.as_type_str().into());
            o.insert("text".into(), op.text.clone().into());
            if let Some(a) = &op.author {
                o.insert("author".into(), a.clone().into());
            }
            Value::Object(o)
        })
        .collect();
    let mut root = serde_json::Map::new();
    root.insert("id".into(), case.id.into());
    if let Some(d) = case
        .decision_date
        .as_ref()
        .or(case.raw_decision_date.as_ref())
    {
        root.insert("decision_date".into(), d.clone().into());
    }
    if let Some(j) = &case.jurisdiction_name {
        root.insert(
            "jurisdiction".into(),
            serde_json::json!({ "name_long": j }),
        );
    }
    root.insert(
        "casebody".into(),
        serde_json::json!({ "data": { "opinions": opinions } }),
    );
    Value::Object(root).to_string()
}

/// One entry in the streaming error report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub file: PathBuf,
    pub byte_offset: u64,
    pub kind: String,
}

impl ParseFailure {
    /// `<file>:<byte-offset>\t<error-kind>`
    pub fn report_line(&self) -> String {
        format!(
            "{}:{}\t{}",
            self.file.display(),
            self.byte_offset,
            self.kind
        )
    }
}

fn failure_kind(e: &IngestError) -> &'static str {
    match e {
        IngestError::MalformedRecord(_) => "MalformedRecord",
        IngestError::MissingCaseBody => "MissingCaseBody",
        IngestError::Io { .. } => "IoError",
    }
}

/// Lazy case stream over a list of record files.
///
/// Holds at most `page_size` parsed cases in memory; per-record parse
/// failures are collected into [`CaseStream::failures`] and skipped.
/// Duplicate case ids keep the first occurrence and log the rest.
pub struct CaseStream {
    paths: Vec<PathBuf>,
    page_size: usize,
    file_idx: usize,
    reader: Option<BufReader<File>>,
    offset: u64,
    page: std::collections::VecDeque<LegalCase>,
    seen_ids: HashSet<u64>,
    pub failures: Vec<ParseFailure>,
    pub duplicate_ids: Vec<u64>,
}

impl CaseStream {
    pub fn new<P: AsRef<Path>>(paths: &[P], page_size: usize) -> Self {
        assert!(page_size > 0, "page_size must be positive");
        CaseStream {
            paths: paths.iter().map(|p| p.as_ref().to_path_buf()).collect(),
            page_size,
            file_idx: 0,
            reader: None,
            offset: 0,
            page: std::collections::VecDeque::new(),
            seen_ids: HashSet::new(),
            failures: Vec::new(),
            duplicate_ids: Vec::new(),
        }
    }

    fn fill_page(&mut self) -> Result<(), IngestError> {
        while self.page.len() < self.page_size {
            if self.reader.is_none() {
                if self.file_idx >= self.paths.len() {
                    return Ok(());
                }
                let path = &self.paths[self.file_idx];
                let f = File::open(path).map_err(|e| IngestError::Io {
                    path: path.clone(),
                    source: e,
                })?;
                self.reader = Some(BufReader::new(f));
                self.offset = 0;
            }
            let path = self.paths[self.file_idx].clone();
            let reader = self.reader.as_mut().unwrap();
            let mut line = String::new();
            let n = reader
                .read_line(&mut line)
                .map_err(|e| IngestError::Io {
                    path: path.clone(),
                    source: e,
                })?;
            if n == 0 {
                self.reader = None;
                self.file_idx += 1;
                continue;
            }
            let record_offset = self.offset;
            self.offset += n as u64;
            if line.trim().is_empty() {
                continue;
            }
            match parse_case(&line) {
                Ok(case) => {
                    if self.seen_ids.insert(case.id) {
                        self.page.push_back(case);
                    } else {
                        self.duplicate_ids.push(case.id);
                    }
                }
                Err(e) => self.failures.push(ParseFailure {
                    file: path,
                    byte_offset: record_offset,
                    kind: failure_kind(&e).to_string(),
                }),
            }
        }
        Ok(())
    }
}

impl Iterator for CaseStream {
    type Item = Result<LegalCase, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.page.is_empty() {
            if let Err(e) = self.fill_page() {
                // unreadable file aborts the stream
                self.file_idx = self.paths.len();
                self.reader = None;
                return Some(Err(e));
            }
        }
        self.page.pop_front().map(Ok)
    }
}

/// Convenience wrapper: stream cases from `input_paths` with bounded
/// memory, in file order then record order.
pub fn stream_cases<P: AsRef<Path>>(input_paths: &[P], page_size: usize) -> CaseStream {
    CaseStream::new(input_paths, page_size)
}

/// Opinions of the requested kinds, in original order.
pub fn extract_opinions<'a>(
    case: &'a LegalCase,
    kinds: &HashSet<OpinionKind>,
) -> Vec<&'a Opinion> {
    case.opinions
        .iter()
        .filter(|op| kinds.contains(&op.kind))
        .collect()
}

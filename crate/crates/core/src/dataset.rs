//! JSONL dataset ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_answer;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` has no reference answers")]
    EmptyReferences(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
}

/// Gold answers. Only evaluation and agent selection ever look at these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ReferenceAnswerSet(pub Vec<String>);

impl ReferenceAnswerSet {
    pub fn new<S: Into<String>>(answers: impl IntoIterator<Item = S>) -> Self {
        Self(answers.into_iter().map(Into::into).collect())
    }

    pub fn answers(&self) -> &[String] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when `answer` equals one of the references after normalization.
    pub fn matches_normalized(&self, answer: &str) -> bool {
        let a = normalize_answer(answer);
        !a.is_empty() && self.0.iter().any(|r| normalize_answer(r) == a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub reference_answers: Vec<String>,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl DatasetRecord {
    pub fn question(&self) -> Question {
        Question { id: self.id.clone(), text: self.question.clone() }
    }

    pub fn references(&self) -> ReferenceAnswerSet {
        ReferenceAnswerSet(self.reference_answers.clone())
    }
}

pub fn ingest(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let file = File::open(path)
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_jsonl(BufReader::new(file))
}

/// Parses one JSON object per line. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_jsonl(reader: impl BufRead) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
        if record.reference_answers.iter().all(|r| r.trim().is_empty()) {
            return Err(DatasetError::EmptyReferences(record.id));
        }
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

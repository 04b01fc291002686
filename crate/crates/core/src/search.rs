//! Search hook used by self-ask agents and premise verification.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dataset::DatasetRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("search unavailable: {0}")]
    Unavailable(String),
    #[error("cannot load search stub: {0}")]
    Load(String),
}

pub trait SearchHook: Send + Sync {
    fn search(&self, question_id: &str, query: &str) -> Result<Vec<SearchHit>, SearchError>;
}

/// A hook that is always offline.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoSearch;

impl SearchHook for NoSearch {
    fn search(&self, _question_id: &str, _query: &str) -> Result<Vec<SearchHit>, SearchError> {
        Err(SearchError::Unavailable("no search provider configured".into()))
    }
}

/// Local knowledge base keyed by question id. Every query for a question gets
/// that question's hits.
#[derive(Debug, Default, Clone)]
pub struct StubSearch {
    entries: HashMap<String, Vec<SearchHit>>,
}

#[derive(Deserialize)]
struct StubLine {
    question_id: String,
    title: String,
    snippet: String,
}

impl StubSearch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, question_id: impl Into<String>, hit: SearchHit) {
        self.entries.entry(question_id.into()).or_default().push(hit);
    }

    pub fn with_hit(mut self, question_id: &str, title: &str, snippet: &str) -> Self {
        self.insert(question_id, SearchHit { title: title.into(), snippet: snippet.into() });
        self
    }

    /// One hit per record stating its first reference answer. Only for
    /// simulated runs: in live runs this would leak the gold answer.
    pub fn from_references(records: &[DatasetRecord]) -> Self {
        let mut stub = Self::new();
        for r in records {
            if let Some(answer) = r.reference_answers.first() {
                stub.insert(
                    r.id.clone(),
                    SearchHit { title: "reference".into(), snippet: format!("The answer to this question is {answer}.") },
                );
            }
        }
        stub
    }

    /// JSONL with `question_id`, `title`, `snippet` per line.
    pub fn load(path: &Path) -> Result<Self, SearchError> {
        let file = File::open(path).map_err(|e| SearchError::Load(format!("{}: {e}", path.display())))?;
        let mut stub = Self::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| SearchError::Load(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: StubLine =
                serde_json::from_str(&line).map_err(|e| SearchError::Load(format!("line {}: {e}", i + 1)))?;
            stub.insert(entry.question_id, SearchHit { title: entry.title, snippet: entry.snippet });
        }
        Ok(stub)
    }
}

impl SearchHook for StubSearch {
    fn search(&self, question_id: &str, _query: &str) -> Result<Vec<SearchHit>, SearchError> {
        Ok(self.entries.get(question_id).cloned().unwrap_or_default())
    }
}

/// Generic web-search client: `GET <endpoint>?q=<query>` returning either a
/// JSON array of `{title, snippet}` or an object with such an array under
/// `results`.
pub struct HttpSearch {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpSearch {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Self { endpoint: endpoint.into(), api_key, agent }
    }
}

impl SearchHook for HttpSearch {
    fn search(&self, _question_id: &str, query: &str) -> Result<Vec<SearchHit>, SearchError> {
        let mut req = self.agent.get(&self.endpoint).query("q", query);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body: Value = req
            .call()
            .map_err(|e| SearchError::Unavailable(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| SearchError::Unavailable(e.to_string()))?;
        let items = body.get("results").unwrap_or(&body);
        serde_json::from_value(items.clone()).map_err(|e| SearchError::Unavailable(format!("bad search payload: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_returns_hits_for_question_only() {
        let s = StubSearch::new().with_hit("q1", "t", "X was discovered in 1898");
        assert_eq!(s.search("q1", "anything").unwrap().len(), 1);
        assert!(s.search("q2", "anything").unwrap().is_empty());
    }

    #[test]
    fn no_search_is_unavailable() {
        assert!(NoSearch.search("q", "x").is_err());
    }

    #[test]
    fn stub_loads_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        std::fs::write(&path, "{\"question_id\":\"q\",\"title\":\"a\",\"snippet\":\"b\"}\n\n").unwrap();
        let s = StubSearch::load(&path).unwrap();
        assert_eq!(s.search("q", "").unwrap(), vec![SearchHit { title: "a".into(), snippet: "b".into() }]);
    }
}

//! Per-question transcripts and the prediction rows derived from them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deliberation::DeliberationOutcome;
use crate::ensemble::{Stage1Record, Stance};
use crate::metrics::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Failed,
}

/// One line of `predictions_*.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub answer: String,
    pub confidence: f64,
    pub correct: bool,
}

impl PredictionRow {
    pub fn prediction(&self) -> Prediction {
        Prediction::new(self.id.clone(), self.confidence, self.correct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTranscript {
    pub id: String,
    pub question: String,
    pub reference_answers: Vec<String>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub stage1: Vec<Stage1Record>,
    pub stances: Vec<Stance>,
    pub deliberation: Option<DeliberationOutcome>,
    /// Top stage-1 stance with its mean confidence.
    pub pre: Option<PredictionRow>,
    /// Final verdict after deliberation.
    pub post: Option<PredictionRow>,
}

impl QuestionTranscript {
    pub fn is_completed(&self) -> bool {
        self.status == Status::Completed && self.pre.is_some() && self.post.is_some()
    }
}

/// File name for a question id. Ids that are not already safe get a hash
/// suffix so distinct ids never share a file.
pub fn file_name(question_id: &str) -> String {
    let safe: String = question_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect();
    if safe == question_id && !safe.starts_with('.') && !safe.is_empty() {
        format!("{safe}.json")
    } else {
        let digest = Sha256::digest(question_id.as_bytes());
        let hex: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
        format!("{safe}-{hex}.json")
    }
}

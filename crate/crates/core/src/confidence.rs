//! Scalar confidence math: sequence-probability confidence, the
//! uncertainty-aware calibration score used to rank agent skills on a
//! validation split, threshold filtering, and softmax slot allocation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfidenceError {
    #[error("empty token sequence")]
    EmptySequence,
    #[error("token probability {0} outside (0, 1]")]
    OutOfRangeProb(f64),
    #[error("no agent type survived the threshold")]
    NoSurvivors,
    #[error("slot count must be at least 1")]
    NoSlots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceSource {
    Logit,
    Verbalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawConfidence {
    pub value: f64,
    pub source: ConfidenceSource,
}

impl RawConfidence {
    /// Verbalized confidence, clamped to [0, 1].
    pub fn verbalized(value: f64) -> Self {
        Self { value: value.clamp(0.0, 1.0), source: ConfidenceSource::Verbalized }
    }
}

/// Geometric mean of the token probabilities, `P(w_1..w_n)^(1/n)`, computed
/// in log space.
pub fn perplexity_confidence(token_probs: &[f64]) -> Result<RawConfidence, ConfidenceError> {
    if token_probs.is_empty() {
        return Err(ConfidenceError::EmptySequence);
    }
    let mut log_sum = 0.0;
    for &p in token_probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(ConfidenceError::OutOfRangeProb(p));
        }
        log_sum += p.ln();
    }
    let value = (log_sum / token_probs.len() as f64).exp().clamp(0.0, 1.0);
    Ok(RawConfidence { value, source: ConfidenceSource::Logit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "lowercase")]
pub enum ValidationAnswer {
    Answer(String),
    Abstain,
}

/// One candidate agent's answer to one validation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCell {
    pub agent_index: usize,
    pub example_index: usize,
    pub answer: ValidationAnswer,
    pub confidence: RawConfidence,
    pub is_correct: bool,
}

impl ValidationCell {
    pub fn abstain(agent_index: usize, example_index: usize) -> Self {
        Self {
            agent_index,
            example_index,
            answer: ValidationAnswer::Abstain,
            confidence: RawConfidence::verbalized(0.0),
            is_correct: false,
        }
    }
}

/// `0` for an abstention, otherwise `+c` when correct and `-c` when wrong.
pub fn calibration_score(cell: &ValidationCell) -> f64 {
    match cell.answer {
        ValidationAnswer::Abstain => 0.0,
        ValidationAnswer::Answer(_) => {
            let sign = if cell.is_correct { 1.0 } else { -1.0 };
            sign * cell.confidence.value
        }
    }
}

/// Mean calibration score over the cells; `0` for an empty slice.
pub fn mean_calibration_score(cells: &[ValidationCell]) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    cells.iter().map(calibration_score).sum::<f64>() / cells.len() as f64
}

/// The mean score if it reaches `tau` (inclusive), otherwise `None`.
pub fn aggregate_and_filter(cells: &[ValidationCell], tau: f64) -> Option<f64> {
    let mean = mean_calibration_score(cells);
    (mean >= tau).then_some(mean)
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Splits `n` slots across the surviving types: `floor(n * softmax(score))`
/// each, then one extra slot per type in descending score order (ties keep
/// input order) until all `n` are handed out. Input order is the types'
/// registration order.
pub fn allocate_slots<K: Clone>(surviving: &[(K, f64)], n: usize) -> Result<Vec<(K, usize)>, ConfidenceError> {
    if n == 0 {
        return Err(ConfidenceError::NoSlots);
    }
    if surviving.is_empty() {
        return Err(ConfidenceError::NoSurvivors);
    }
    let scores: Vec<f64> = surviving.iter().map(|(_, s)| *s).collect();
    let shares = softmax(&scores);
    let mut slots: Vec<usize> = shares.iter().map(|p| ((n as f64) * p).floor() as usize).collect();

    let mut order: Vec<usize> = (0..surviving.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let assigned: usize = slots.iter().sum();
    if assigned > n {
        // Only reachable through rounding when n * p lands a hair above an integer.
        let mut excess = assigned - n;
        for &i in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if slots[i] > 0 {
                slots[i] -= 1;
                excess -= 1;
            }
        }
    } else {
        for &i in order.iter().cycle().take(n - assigned) {
            slots[i] += 1;
        }
    }
    Ok(surviving.iter().zip(slots).map(|((k, _), s)| (k.clone(), s)).collect())
}

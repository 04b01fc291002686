//! Calibration metrics: ECE, Brier score, accuracy and reliability bins.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no predictions")]
    EmptyInput,
    #[error("bin count must be at least 1")]
    InvalidBins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub confidence: f64,
    pub correct: bool,
}

impl Prediction {
    pub fn new(question_id: impl Into<String>, confidence: f64, correct: bool) -> Self {
        Self { question_id: question_id.into(), confidence, correct }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Absolute,
    Squared,
}

impl Distance {
    fn apply(self, gap: f64) -> f64 {
        match self {
            Distance::Absolute => gap.abs(),
            Distance::Squared => gap * gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBins {
    pub bin_count: usize,
    pub bins: Vec<Bin>,
}

fn lower_edge(b: usize, bins: usize) -> f64 {
    b as f64 / bins as f64
}

/// Bin of `confidence` among `bins` equal-width bins. A value on an interior
/// edge goes to the bin above it; 1.0 goes to the last bin.
pub fn bin_index(confidence: f64, bins: usize) -> usize {
    let c = confidence.clamp(0.0, 1.0);
    let mut idx = ((c * bins as f64).floor() as usize).min(bins - 1);
    // floor(c * B) can land one off either side of an edge in floating point
    while idx > 0 && c < lower_edge(idx, bins) {
        idx -= 1;
    }
    while idx + 1 < bins && c >= lower_edge(idx + 1, bins) {
        idx += 1;
    }
    idx
}

pub fn reliability_bins(predictions: &[Prediction], bins: usize) -> Result<ReliabilityBins, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::InvalidBins);
    }
    let mut sums = vec![(0usize, 0.0f64, 0usize); bins];
    for p in predictions {
        let s = &mut sums[bin_index(p.confidence, bins)];
        s.0 += 1;
        s.1 += p.confidence;
        s.2 += usize::from(p.correct);
    }
    let bins_out = sums
        .into_iter()
        .enumerate()
        .map(|(b, (count, conf, correct))| Bin {
            lo: lower_edge(b, bins),
            hi: lower_edge(b + 1, bins),
            count,
            mean_confidence: (count > 0).then(|| conf / count as f64),
            accuracy: (count > 0).then(|| correct as f64 / count as f64),
        })
        .collect();
    Ok(ReliabilityBins { bin_count: bins, bins: bins_out })
}

pub fn ece(predictions: &[Prediction], bins: usize, distance: Distance) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = predictions.len() as f64;
    let table = reliability_bins(predictions, bins)?;
    Ok(table
        .bins
        .iter()
        .filter_map(|b| Some(b.count as f64 / n * distance.apply(b.accuracy? - b.mean_confidence?)))
        .sum())
}

pub fn brier(predictions: &[Prediction]) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total: f64 = predictions
        .iter()
        .map(|p| {
            let d = p.confidence - if p.correct { 1.0 } else { 0.0 };
            d * d
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

pub fn accuracy(predictions: &[Prediction]) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(predictions.iter().filter(|p| p.correct).count() as f64 / predictions.len() as f64)
}

impl ReliabilityBins {
    /// `bin_lo,bin_hi,count,mean_confidence,accuracy` with six decimals;
    /// empty bins leave the two means blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,mean_confidence,accuracy\n");
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for b in &self.bins {
            let _ = writeln!(out, "{:.6},{:.6},{},{},{}", b.lo, b.hi, b.count, fmt(b.mean_confidence), fmt(b.accuracy));
        }
        out
    }
}

//! Calibration report over a set of transcripts, and run-directory I/O.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{accuracy, brier, ece, reliability_bins, Distance, MetricsError, Prediction, ReliabilityBins};
use crate::transcript::{PredictionRow, QuestionTranscript};

pub const TRANSCRIPT_DIR: &str = "transcripts";
pub const METRICS_FILE: &str = "metrics.json";
pub const PREDICTIONS_PRE: &str = "predictions_pre.jsonl";
pub const PREDICTIONS_POST: &str = "predictions_post.jsonl";
pub const RELIABILITY_PRE: &str = "reliability_pre.csv";
pub const RELIABILITY_POST: &str = "reliability_post.csv";
pub const SELECTION_FILE: &str = "selection.json";
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no transcripts found in {0}")]
    NoTranscripts(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

/// Metrics for one side of the comparison. Scores are `None` when no
/// question completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub accuracy: Option<f64>,
    pub ece_abs: Option<f64>,
    pub ece_sq: Option<f64>,
    pub brier: Option<f64>,
    pub n: usize,
    pub failures: usize,
}

impl MetricsSummary {
    pub fn compute(predictions: &[Prediction], bins: usize, failures: usize) -> Result<Self, MetricsError> {
        if predictions.is_empty() {
            return Ok(Self { accuracy: None, ece_abs: None, ece_sq: None, brier: None, n: 0, failures });
        }
        Ok(Self {
            accuracy: Some(accuracy(predictions)?),
            ece_abs: Some(ece(predictions, bins, Distance::Absolute)?),
            ece_sq: Some(ece(predictions, bins, Distance::Squared)?),
            brier: Some(brier(predictions)?),
            n: predictions.len(),
            failures,
        })
    }
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bins: usize,
    pub pre: MetricsSummary,
    pub post: MetricsSummary,
    #[serde(skip)]
    pub reliability_pre: Option<ReliabilityBins>,
    #[serde(skip)]
    pub reliability_post: Option<ReliabilityBins>,
}

/// Completed rows sorted by question id, so the numbers do not depend on the
/// order questions finished in.
pub fn prediction_rows(transcripts: &[QuestionTranscript]) -> (Vec<PredictionRow>, Vec<PredictionRow>) {
    let mut done: Vec<&QuestionTranscript> = transcripts.iter().filter(|t| t.is_completed()).collect();
    done.sort_by(|a, b| a.id.cmp(&b.id));
    let pre = done.iter().filter_map(|t| t.pre.clone()).collect();
    let post = done.iter().filter_map(|t| t.post.clone()).collect();
    (pre, post)
}

pub fn calibration_report(transcripts: &[QuestionTranscript], bins: usize) -> Result<CalibrationReport, MetricsError> {
    let (pre, post) = prediction_rows(transcripts);
    let failures = transcripts.len() - pre.len();
    let pre: Vec<Prediction> = pre.iter().map(PredictionRow::prediction).collect();
    let post: Vec<Prediction> = post.iter().map(PredictionRow::prediction).collect();
    Ok(CalibrationReport {
        bins,
        pre: MetricsSummary::compute(&pre, bins, failures)?,
        post: MetricsSummary::compute(&post, bins, failures)?,
        reliability_pre: Some(reliability_bins(&pre, bins)?),
        reliability_post: Some(reliability_bins(&post, bins)?),
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(contents).map_err(io_err(path))
}

pub(crate) fn to_json_pretty<T: Serialize>(value: &T, path: &Path) -> Result<Vec<u8>, ReportError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| ReportError::Json { path: path.to_path_buf(), source })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `metrics.json` and both reliability CSVs.
pub fn write_report(dir: &Path, report: &CalibrationReport) -> Result<(), ReportError> {
    let path = dir.join(METRICS_FILE);
    write_file(&path, &to_json_pretty(report, &path)?)?;
    for (name, bins) in [(RELIABILITY_PRE, &report.reliability_pre), (RELIABILITY_POST, &report.reliability_post)] {
        if let Some(bins) = bins {
            write_file(&dir.join(name), bins.to_csv().as_bytes())?;
        }
    }
    Ok(())
}

pub fn write_predictions(dir: &Path, transcripts: &[QuestionTranscript]) -> Result<(), ReportError> {
    let (pre, post) = prediction_rows(transcripts);
    for (name, rows) in [(PREDICTIONS_PRE, pre), (PREDICTIONS_POST, post)] {
        let path = dir.join(name);
        let mut out = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut out, &row).map_err(|source| ReportError::Json { path: path.clone(), source })?;
            out.push(b'\n');
        }
        write_file(&path, &out)?;
    }
    Ok(())
}

pub fn write_transcript(dir: &Path, transcript: &QuestionTranscript) -> Result<(), ReportError> {
    let tdir = dir.join(TRANSCRIPT_DIR);
    fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
    let path = tdir.join(crate::transcript::file_name(&transcript.id));
    write_file(&path, &to_json_pretty(transcript, &path)?)
}

pub fn read_transcripts(dir: &Path) -> Result<Vec<QuestionTranscript>, ReportError> {
    let tdir = dir.join(TRANSCRIPT_DIR);
    let entries = match fs::read_dir(&tdir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ReportError::NoTranscripts(dir.to_path_buf())),
        Err(e) => return Err(io_err(&tdir)(e)),
    };
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(io_err(&tdir)))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        out.push(serde_json::from_str(&text).map_err(|source| ReportError::Json { path: path.clone(), source })?);
    }
    if out.is_empty() {
        return Err(ReportError::NoTranscripts(dir.to_path_buf()));
    }
    Ok(out)
}

/// Recomputes the report from the transcripts in a run directory and
/// rewrites the report files. `bins` defaults to the count recorded in the
/// existing `metrics.json`, then to 10.
pub fn report(dir: &Path, bins: Option<usize>) -> Result<CalibrationReport, ReportError> {
    let transcripts = read_transcripts(dir)?;
    let bins = match bins {
        Some(b) => b,
        None => fs::read_to_string(dir.join(METRICS_FILE))
            .ok()
            .and_then(|t| serde_json::from_str::<CalibrationReport>(&t).ok())
            .map_or(DEFAULT_BINS, |r| r.bins),
    };
    let report = calibration_report(&transcripts, bins)?;
    write_report(dir, &report)?;
    Ok(report)
}

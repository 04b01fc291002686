//! Batch orchestration: selection once per run, then both stages per question.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;
use tracing::{info, warn};

use crate::config::{ConfigError, RunConfig};
use crate::dataset::{DatasetRecord, Split};
use crate::deliberation::deliberate;
use crate::ensemble::{
    cluster_stances, collect_stage1, select_agents, AgentProfile, EnsembleError, EquivalenceJudge, Selection,
};
use crate::report::{self, CalibrationReport, ReportError};
use crate::runtime::Runtime;
use crate::transcript::{PredictionRow, QuestionTranscript, Status};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent selection failed: {0}")]
    Selection(#[from] EnsembleError),
    #[error("selection is enabled but the dataset has no validation records")]
    NoValidation,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Output(#[from] ReportError),
}

pub struct RunOutput {
    pub selection: Selection,
    /// In dataset order.
    pub transcripts: Vec<QuestionTranscript>,
    pub report: CalibrationReport,
}

/// Runs selection on the validation split (or an even split when selection
/// is off).
pub fn run_selection(rt: &Runtime, config: &RunConfig, dataset: &[DatasetRecord]) -> Result<Selection, PipelineError> {
    if !config.selection {
        return Ok(Selection::uniform(&config.candidate_skills, &config.expert_backbones, config.ensemble_size)?);
    }
    let validation: Vec<DatasetRecord> = dataset.iter().filter(|r| r.split == Split::Validation).cloned().collect();
    if validation.is_empty() {
        return Err(PipelineError::NoValidation);
    }
    Ok(select_agents(
        rt,
        &validation,
        &config.candidate_skills,
        &config.expert_backbones,
        config.validation_m,
        config.tau,
        config.ensemble_size,
        &config.judge(),
    )?)
}

fn failed(record: &DatasetRecord, error: String) -> QuestionTranscript {
    QuestionTranscript {
        id: record.id.clone(),
        question: record.question.clone(),
        reference_answers: record.reference_answers.clone(),
        status: Status::Failed,
        error: Some(error),
        stage1: Vec::new(),
        stances: Vec::new(),
        deliberation: None,
        pre: None,
        post: None,
    }
}

/// Both stages for one question. Never fails: problems end up in the
/// transcript with `status = failed`.
pub fn run_question(
    rt: &Runtime,
    config: &RunConfig,
    judge: &EquivalenceJudge,
    experts: &[AgentProfile],
    record: &DatasetRecord,
) -> QuestionTranscript {
    let question = record.question();
    let references = record.references();
    let stage1 = match collect_stage1(rt, &question, experts) {
        Ok(s) => s,
        Err(e) => {
            warn!(question = %record.id, error = %e, "question failed in stage 1");
            return failed(record, e.to_string());
        }
    };
    let bound = judge.bind(rt, &question);
    let stances = match cluster_stances(&stage1, &bound) {
        Ok(s) => s,
        Err(e) => {
            let mut t = failed(record, e.to_string());
            t.stage1 = stage1;
            return t;
        }
    };
    let top = &stances[0];
    let pre = PredictionRow {
        id: record.id.clone(),
        answer: top.representative_answer.clone(),
        confidence: top.mean_confidence,
        correct: judge.matches_any(rt, &question, &top.representative_answer, &references),
    };
    let outcome = match deliberate(rt, &question, &stances, &config.deliberation_settings(), &bound) {
        Ok(o) => o,
        Err(e) => {
            let mut t = failed(record, e.to_string());
            t.stage1 = stage1;
            t.stances = stances;
            return t;
        }
    };
    let verdict = &outcome.verdict;
    let post = PredictionRow {
        id: record.id.clone(),
        answer: verdict.final_answer.clone(),
        confidence: verdict.final_confidence,
        correct: judge.matches_any(rt, &question, &verdict.final_answer, &references),
    };
    QuestionTranscript {
        id: record.id.clone(),
        question: record.question.clone(),
        reference_answers: record.reference_answers.clone(),
        status: Status::Completed,
        error: None,
        stage1,
        stances,
        deliberation: Some(outcome),
        pre: Some(pre),
        post: Some(post),
    }
}

/// Runs the whole pipeline over the test split. Questions run on a pool of
/// `config.parallelism` workers; output does not depend on the pool size.
pub fn run_pipeline(config: &RunConfig, dataset: &[DatasetRecord]) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let rt = config.build_runtime(dataset)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    pool.install(|| {
        let selection = run_selection(&rt, config, dataset)?;
        let experts = selection.expert_profiles();
        info!(experts = experts.len(), "agent selection done");
        let judge = config.judge();
        let questions: Vec<&DatasetRecord> = dataset.iter().filter(|r| r.split == Split::Test).collect();
        let transcripts: Vec<QuestionTranscript> = questions
            .par_iter()
            .map(|record| {
                let t = run_question(&rt, config, &judge, &experts, record);
                info!(question = %t.id, status = ?t.status, "question done");
                t
            })
            .collect();
        let report = report::calibration_report(&transcripts, config.bins).map_err(ReportError::from)?;
        Ok(RunOutput { selection, transcripts, report })
    })
}

impl RunOutput {
    /// Writes transcripts, predictions, metrics, reliability tables and the
    /// selection result under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
        for t in &self.transcripts {
            report::write_transcript(dir, t)?;
        }
        report::write_predictions(dir, &self.transcripts)?;
        report::write_report(dir, &self.report)?;
        let path = dir.join(report::SELECTION_FILE);
        let bytes = report::to_json_pretty(&self.selection, &path)?;
        fs::write(&path, bytes).map_err(|source| ReportError::Io { path, source })
    }
}

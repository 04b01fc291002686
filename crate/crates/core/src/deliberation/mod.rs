//! Stage 2: group deliberation over the stage-1 stances.
//!
//! One round per question, in phases: arguments, then ratings and
//! factuality checks, then pairing and revision, then posterior confidence,
//! then the vote. Calls inside a phase run concurrently.

mod arguments;
mod assign;
mod pairing;
mod rating;
mod revise;
mod verdict;
mod verify;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Question;
use crate::ensemble::{AgentProfile, Equivalence, Stance};
use crate::runtime::Runtime;
use crate::seed::rng_for;

pub use arguments::generate_arguments;
pub use assign::{assign_stances, largest_remainder, Assignment};
pub use pairing::{pair_arguments, Pairing};
pub use rating::{assign_raters, rate_arguments, summarize, ArgumentRef, Feedback, OTHER_STANCE_NOTE, SAME_STANCE_NOTE};
pub use revise::{posterior_confidence, revise, RevisionInput, NO_DISSENT, REVISION_FAILED};
pub use verdict::{final_verdict, FinalVerdict};
pub use verify::{format_unfactual, verify_factuality, Verifier};

pub const NO_ARGUMENT: &str = "(no argument provided)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argument {
    pub author_id: String,
    pub stance_id: usize,
    pub text: String,
    /// True for the stand-in used when generation failed.
    #[serde(default)]
    pub placeholder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationRecord {
    pub agent_id: String,
    pub assigned_stance_id: usize,
    pub prior_answer: String,
    pub prior_confidence: f64,
    pub supporting_argument: Argument,
    pub opposing_argument: Option<Argument>,
    pub revised_answer: String,
    pub confidence_rationale: String,
    pub posterior_confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliberationSettings {
    pub backbone: String,
    pub deliberators: usize,
    pub feedback_per_argument: usize,
    pub verifier: Verifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationOutcome {
    pub assignment: Vec<Assignment>,
    pub arguments: Vec<Argument>,
    pub feedback: Vec<Feedback>,
    pub records: Vec<DeliberationRecord>,
    pub verdict: FinalVerdict,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeliberationError {
    #[error("no stances to deliberate on")]
    NoStances,
    #[error("no deliberators configured")]
    NoDeliberators,
}

pub fn deliberator_profiles(settings: &DeliberationSettings) -> Vec<AgentProfile> {
    (0..settings.deliberators).map(|i| AgentProfile::deliberator(&settings.backbone, i)).collect()
}

/// Runs the full round for one question. `equiv` re-clusters revised answers
/// and should be the judge used for stage 1.
pub fn deliberate(
    rt: &Runtime,
    question: &Question,
    stances: &[Stance],
    settings: &DeliberationSettings,
    equiv: &dyn Equivalence,
) -> Result<DeliberationOutcome, DeliberationError> {
    if stances.is_empty() {
        return Err(DeliberationError::NoStances);
    }
    if settings.deliberators == 0 {
        return Err(DeliberationError::NoDeliberators);
    }
    let deliberators = deliberator_profiles(settings);
    let backbone = settings.backbone.as_str();
    let assignment = assign_stances(stances, &deliberators);
    let stance_by_id: HashMap<usize, &Stance> = stances.iter().map(|s| (s.stance_id, s)).collect();

    let arguments = generate_arguments(rt, question, stances, &assignment, backbone);
    let feedback = rate_arguments(
        rt,
        question,
        stances,
        &assignment,
        &deliberators,
        &arguments,
        settings.feedback_per_argument,
        &settings.verifier,
    );

    let mut per_stance: HashMap<usize, usize> = HashMap::new();
    for a in &assignment {
        *per_stance.entry(a.stance_id).or_default() += 1;
    }
    let total = assignment.len();

    let mut records: Vec<DeliberationRecord> = assignment
        .par_iter()
        .map(|a| {
            let stance = stance_by_id[&a.stance_id];
            let mut rng = rng_for(rt.seed, &["pairing", &question.id, &a.agent_id]);
            let pairing = pair_arguments(a.stance_id, &arguments, &mut rng)
                .expect("every assigned stance has its own deliberators' arguments");
            let supporting = &arguments[pairing.supporting];
            let opposing = pairing.opposing.map(|i| {
                let arg = &arguments[i];
                (arg, &feedback[i], stance_by_id[&arg.stance_id].representative_answer.as_str())
            });
            let same = per_stance[&a.stance_id];
            let input = RevisionInput {
                agent_id: &a.agent_id,
                prior_answer: &stance.representative_answer,
                prior_confidence: stance.mean_confidence,
                supporting: (supporting, &feedback[pairing.supporting]),
                opposing,
                opposing_support: opposing.map_or(0, |(arg, _, _)| per_stance[&arg.stance_id]),
                number_supporting: same - 1,
                number_against: total - same,
            };
            let revision = revise(rt, question, backbone, &input);
            DeliberationRecord {
                agent_id: a.agent_id.clone(),
                assigned_stance_id: a.stance_id,
                prior_answer: stance.representative_answer.clone(),
                prior_confidence: stance.mean_confidence,
                supporting_argument: supporting.clone(),
                opposing_argument: opposing.map(|(arg, _, _)| arg.clone()),
                revised_answer: revision.answer,
                confidence_rationale: revision.rationale,
                posterior_confidence: stance.mean_confidence,
            }
        })
        .collect();

    let posteriors: Vec<f64> = records
        .par_iter()
        .map(|r| posterior_confidence(rt, question, backbone, &r.agent_id, r.prior_confidence, &r.confidence_rationale))
        .collect();
    for (r, c) in records.iter_mut().zip(posteriors) {
        r.posterior_confidence = c;
    }

    let verdict = final_verdict(&records, equiv).expect("at least one deliberator");
    Ok(DeliberationOutcome { assignment, arguments, feedback, records, verdict })
}

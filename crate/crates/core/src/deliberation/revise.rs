use super::rating::Feedback;
use super::Argument;
use crate::backend::CallKind;
use crate::dataset::Question;
use crate::prompts::{extract_confidence, names, parse_revision, Revision};
use crate::runtime::{Call, Runtime};
use crate::text::format_prob;

pub const NO_DISSENT: &str = "none (no dissenting stance)";
pub const REVISION_FAILED: &str = "(revision failed; retaining prior)";

/// What one deliberator sees when revising.
#[derive(Debug, Clone, Copy)]
pub struct RevisionInput<'a> {
    pub agent_id: &'a str,
    pub prior_answer: &'a str,
    pub prior_confidence: f64,
    pub supporting: (&'a Argument, &'a Feedback),
    pub opposing: Option<(&'a Argument, &'a Feedback, &'a str)>,
    /// Agents on the opposing argument's stance.
    pub opposing_support: usize,
    /// Other agents on the same stance.
    pub number_supporting: usize,
    /// Agents on any other stance.
    pub number_against: usize,
}

/// Re-vote with a confidence rationale. Total: an unusable reply keeps the
/// prior answer.
pub fn revise(rt: &Runtime, question: &Question, backbone: &str, input: &RevisionInput<'_>) -> Revision {
    let (arg_against, fb_against, opposing_stance) = match input.opposing {
        Some((a, f, s)) => (a.text.as_str(), f.summarized.as_str(), s),
        None => (NO_DISSENT, NO_DISSENT, ""),
    };
    let call = Call::new(backbone, &question.id, input.agent_id, CallKind::Revise, names::CONFIDENCE_RATIONALE)
        .var("QUERY", question.text.as_str())
        .var("STANCE", input.prior_answer)
        .var("ORIGINAL-CONFIDENCE", format_prob(input.prior_confidence))
        .var("ARGUMENT-AGAINST", arg_against)
        .var("FEEDBACK-AGAINST", fb_against)
        .var("NUMBER-AGAINST", input.number_against.to_string())
        .var("ARGUMENT-FOR", input.supporting.0.text.as_str())
        .var("FEEDBACK-SUPPORTING", input.supporting.1.summarized.as_str())
        .var("NUMBER-SUPPORTING", input.number_supporting.to_string())
        .var("OPPOSING-STANCE", opposing_stance)
        .var("OPPOSING-SUPPORT", input.opposing_support.to_string())
        .temperature(rt.decoding.deliberation_temperature);
    let parsed = match rt.invoke(call) {
        Ok(resp) => parse_revision(&resp.text),
        Err(e) => {
            tracing::warn!(question = %question.id, agent = input.agent_id, error = %e, "revision call failed");
            None
        }
    };
    parsed.filter(|r| !r.answer.trim().is_empty()).unwrap_or_else(|| Revision {
        answer: input.prior_answer.to_string(),
        rationale: REVISION_FAILED.to_string(),
    })
}

/// Posterior confidence from the rationale, in a fresh call. Falls back to
/// the prior.
pub fn posterior_confidence(
    rt: &Runtime,
    question: &Question,
    backbone: &str,
    agent_id: &str,
    prior_confidence: f64,
    rationale: &str,
) -> f64 {
    let call = Call::new(backbone, &question.id, agent_id, CallKind::Posterior, names::FINAL_CONFIDENCE)
        .var("ORIGINAL-CONFIDENCE", format_prob(prior_confidence))
        .var("CONFIDENCE-RATIONALE", rationale)
        .temperature(rt.decoding.judge_temperature);
    match rt.invoke(call) {
        Ok(resp) => extract_confidence(&resp.text).unwrap_or(prior_confidence),
        Err(e) => {
            tracing::warn!(question = %question.id, agent = agent_id, error = %e, "posterior call failed");
            prior_confidence
        }
    }
    .clamp(0.0, 1.0)
}

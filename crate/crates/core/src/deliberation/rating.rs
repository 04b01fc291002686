//! Peer rating of arguments.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::verify::{verify_factuality, Verifier};
use super::{Argument, Assignment};
use crate::backend::CallKind;
use crate::dataset::Question;
use crate::ensemble::{AgentProfile, Stance};
use crate::prompts::{names, parse_rating, ParsedRating};
use crate::runtime::{Call, Runtime};
use crate::seed::rng_for;

pub const SAME_STANCE_NOTE: &str = "Note in the earlier debate, you supported the answer corresponding to this argument.";
pub const OTHER_STANCE_NOTE: &str = "Note in the earlier debate, you supported a different answer from the one this argument defends.";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArgumentRef {
    pub author_id: String,
    pub stance_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub argument_ref: ArgumentRef,
    pub raters: Vec<String>,
    pub ratings: Vec<ParsedRating>,
    pub factuality_notes: String,
    /// What deliberators see: the ratings in order, then the factuality notes.
    pub summarized: String,
}

pub fn summarize(ratings: &[ParsedRating], factuality_notes: &str) -> String {
    let mut parts: Vec<String> = ratings
        .iter()
        .enumerate()
        .map(|(i, r)| format!("Rating {}: {}.", i + 1, r.format_line()))
        .collect();
    if parts.is_empty() {
        parts.push("No peer ratings.".to_string());
    }
    let notes = if factuality_notes.is_empty() { "no issues flagged." } else { factuality_notes };
    parts.push(format!("Factuality: {notes}"));
    parts.join(" ")
}

/// Rater ids per argument: deliberators are shuffled once per question and
/// each argument is rated by the next `k` deliberators after its author in
/// that cyclic order, so nobody rates their own argument and the load is even.
pub fn assign_raters(seed: u64, question_id: &str, arguments: &[Argument], deliberators: &[AgentProfile], k: usize) -> Vec<Vec<String>> {
    let mut order: Vec<&str> = deliberators.iter().map(|d| d.agent_id.as_str()).collect();
    order.shuffle(&mut rng_for(seed, &["raters", question_id]));
    let position: HashMap<&str, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    arguments
        .iter()
        .map(|arg| {
            let start = position.get(arg.author_id.as_str()).copied().unwrap_or(order.len());
            (1..order.len())
                .map(|step| order[(start + step) % order.len()])
                .filter(|id| *id != arg.author_id)
                .take(k)
                .map(str::to_string)
                .collect()
        })
        .collect()
}

/// Collects `k` ratings per argument plus factuality notes. When there are
/// fewer than `k + 1` deliberators, `k` shrinks to what is available.
pub fn rate_arguments(
    rt: &Runtime,
    question: &Question,
    stances: &[Stance],
    assignment: &[Assignment],
    deliberators: &[AgentProfile],
    arguments: &[Argument],
    k: usize,
    verifier: &Verifier,
) -> Vec<Feedback> {
    let available = deliberators.len().saturating_sub(1);
    let k = if k > available {
        warn!(question = %question.id, requested = k, available, "not enough raters; reducing feedback per argument");
        available
    } else {
        k
    };
    let raters = assign_raters(rt.seed, &question.id, arguments, deliberators, k);
    let stance_of: HashMap<&str, usize> = assignment.iter().map(|a| (a.agent_id.as_str(), a.stance_id)).collect();
    let backbone_of: HashMap<&str, &str> =
        deliberators.iter().map(|d| (d.agent_id.as_str(), d.backbone.as_str())).collect();
    let stance_text = |id: usize| stances.iter().find(|s| s.stance_id == id).map_or("", |s| s.representative_answer.as_str());

    let jobs: Vec<(usize, &str)> = raters
        .iter()
        .enumerate()
        .flat_map(|(a, rs)| rs.iter().map(move |r| (a, r.as_str())))
        .collect();
    let ratings: Vec<ParsedRating> = jobs
        .par_iter()
        .map(|&(a, rater)| {
            let arg = &arguments[a];
            if arg.placeholder {
                return ParsedRating::minimum();
            }
            let note = if stance_of.get(rater) == Some(&arg.stance_id) { SAME_STANCE_NOTE } else { OTHER_STANCE_NOTE };
            let agent_id = format!("{rater}>{}", arg.author_id);
            let call = Call::new(backbone_of[rater], &question.id, &agent_id, CallKind::Rating, names::ARGUMENT_RATING)
                .var("ARGUMENT", arg.text.as_str())
                .var("STANCE", stance_text(arg.stance_id))
                .var("RATER-NOTE", note)
                .temperature(rt.decoding.judge_temperature);
            match rt.invoke(call) {
                Ok(resp) => parse_rating(&resp.text).unwrap_or_else(|e| {
                    warn!(question = %question.id, rater, error = %e, "unparseable rating; using neutral");
                    ParsedRating::neutral()
                }),
                Err(e) => {
                    warn!(question = %question.id, rater, error = %e, "rating call failed; using neutral");
                    ParsedRating::neutral()
                }
            }
        })
        .collect();

    let notes: Vec<String> = arguments.par_iter().map(|arg| verify_factuality(rt, question, arg, verifier)).collect();

    let mut ratings = ratings.into_iter();
    arguments
        .iter()
        .zip(raters)
        .zip(notes)
        .map(|((arg, rs), factuality_notes)| {
            let mine: Vec<ParsedRating> = ratings.by_ref().take(rs.len()).collect();
            Feedback {
                argument_ref: ArgumentRef { author_id: arg.author_id.clone(), stance_id: arg.stance_id },
                summarized: summarize(&mine, &factuality_notes),
                raters: rs,
                ratings: mine,
                factuality_notes,
            }
        })
        .collect()
}
